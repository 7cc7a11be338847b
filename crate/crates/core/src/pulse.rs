//! Pulse sequences, exact propagation of the joint state, and the shot loop.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    evolve_wait, field_deviation_integral, field_deviation_mg, heat_classical, shot_rng, white_noise_dephase,
    NoiseConfig, OpenSystemRates, ShotNoise, WaitDynamics,
};
use crate::physics::{
    check_quadrupole, matrix_elements, motional_matrix_element, zeeman_susceptibility, Electronic, JointState, Level,
    MotionalPrep, PhysicalConstants, Sideband, ThermalDistribution, ZeemanState,
};

/// Lamb-Dicke factor and default preparation of one motional mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub eta: f64,
    /// Mean phonon number after cooling, used when a sequence does not
    /// prepare the mode explicitly.
    pub n_bar: f64,
}

/// π-times at which the bare Rabi frequencies are calibrated, μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Carrier π-time with every mode in its ground state.
    pub carrier_pi_time: f64,
    pub raman_pi_time: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { carrier_pi_time: 7.0, raman_pi_time: 1000.0 }
    }
}

/// Everything the simulator needs besides the sequence itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub constants: PhysicalConstants,
    /// Initial Fock cutoff of the tracked mode.
    pub n_max: usize,
    pub modes: BTreeMap<String, ModeConfig>,
    /// Tracked mode when a sequence addresses no sideband.
    pub default_mode: String,
    pub noise: NoiseConfig,
    pub rates: OpenSystemRates,
    pub calibration: Calibration,
    /// Probability that a measurement outcome is flipped.
    pub detection_error: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let mut modes = BTreeMap::new();
        modes.insert("axial".to_string(), ModeConfig { eta: 0.068, n_bar: 0.0 });
        modes.insert("radial".to_string(), ModeConfig { eta: 0.016, n_bar: 7.0 });
        Self {
            constants: PhysicalConstants::default(),
            n_max: 40,
            modes,
            default_mode: "axial".to_string(),
            noise: NoiseConfig::default(),
            rates: OpenSystemRates::default(),
            calibration: Calibration::default(),
            detection_error: 0.0,
        }
    }
}

impl SimConfig {
    /// No noise of any kind, no decay and no heating.
    pub fn noiseless() -> Self {
        Self { noise: NoiseConfig::quiet(), rates: OpenSystemRates::closed(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.noise.bfield.validate()?;
        self.noise.laser.validate()?;
        self.rates.validate()?;
        if self.modes.is_empty() {
            return Err(Error::invalid("at least one motional mode is required"));
        }
        for (name, m) in &self.modes {
            if !(0.0..1.0).contains(&m.eta) {
                return Err(Error::invalid(format!("modes.{name}.eta must lie in [0, 1)")));
            }
            if !(m.n_bar.is_finite() && m.n_bar >= 0.0) {
                return Err(Error::invalid(format!("modes.{name}.n_bar must be >= 0")));
            }
        }
        for mode in self.rates.heating.keys() {
            if !self.modes.contains_key(mode) {
                return Err(Error::invalid(format!("heating rate given for unknown mode '{mode}'")));
            }
        }
        if !self.modes.contains_key(&self.default_mode) {
            return Err(Error::invalid(format!("default mode '{}' is not configured", self.default_mode)));
        }
        for (name, t) in [
            ("calibration.carrier_pi_time", self.calibration.carrier_pi_time),
            ("calibration.raman_pi_time", self.calibration.raman_pi_time),
        ] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0")));
            }
        }
        if !(0.0..=0.5).contains(&self.detection_error) {
            return Err(Error::invalid("detection_error must lie in [0, 0.5]"));
        }
        Ok(())
    }

    fn eta(&self, mode: &str) -> Result<f64> {
        self.modes.get(mode).map(|m| m.eta).ok_or_else(|| Error::invalid(format!("unknown motional mode '{mode}'")))
    }

    /// Coupling of `transition` relative to its bare Rabi frequency with
    /// every mode in the ground state.
    pub fn ground_state_coupling(&self, transition: &Transition) -> Result<f64> {
        if transition.is_raman() {
            return Ok(1.0);
        }
        let mut factor = 1.0;
        for (name, m) in &self.modes {
            let active = transition.mode() == Some(name.as_str());
            factor *= match (active, transition.sideband()) {
                (true, Sideband::Blue) => motional_matrix_element(m.eta, 0, 1),
                (true, Sideband::Red) => motional_matrix_element(m.eta, 1, 0),
                _ => motional_matrix_element(m.eta, 0, 0),
            };
        }
        if let Some(mode) = transition.mode() {
            self.eta(mode)?;
        }
        Ok(factor)
    }

    /// Bare Rabi frequency (rad/μs) that makes a resonant pulse on
    /// `transition` a π pulse of length `pi_time` μs from the motional ground state.
    pub fn omega0_for_pi_time(&self, transition: &Transition, pi_time: f64) -> Result<f64> {
        if !(pi_time.is_finite() && pi_time > 0.0) {
            return Err(Error::invalid(format!("pi time must be > 0, got {pi_time}")));
        }
        let k = self.ground_state_coupling(transition)?;
        if k == 0.0 {
            return Err(Error::invalid("transition has no coupling from the ground state"));
        }
        Ok(PI / (pi_time * k.abs()))
    }

    /// Calibrated bare Rabi frequency. Sidebands share the carrier laser.
    pub fn calibrated_omega0(&self, transition: &Transition) -> Result<f64> {
        if transition.is_raman() {
            self.omega0_for_pi_time(transition, self.calibration.raman_pi_time)
        } else {
            let carrier = Transition::carrier(transition.pair().0, transition.pair().1);
            self.omega0_for_pi_time(&carrier, self.calibration.carrier_pi_time)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Carrier { from: ZeemanState, to: ZeemanState },
    Blue { mode: String, from: ZeemanState, to: ZeemanState },
    Red { mode: String, from: ZeemanState, to: ZeemanState },
    /// Co-propagating Raman drive S(−1/2) ↔ S(+1/2); no motional coupling and
    /// insensitive to the laser frequency.
    Raman,
}

/// Default optical qubit pair.
pub const DEFAULT_PAIR: (ZeemanState, ZeemanState) = (ZeemanState::S_MINUS_HALF, ZeemanState::D_MINUS_HALF);
pub const RAMAN_PAIR: (ZeemanState, ZeemanState) = (ZeemanState::S_MINUS_HALF, ZeemanState::S_PLUS_HALF);

impl Transition {
    pub fn carrier(from: ZeemanState, to: ZeemanState) -> Self {
        Transition::Carrier { from, to }
    }

    pub fn blue(mode: &str) -> Self {
        Transition::Blue { mode: mode.to_string(), from: DEFAULT_PAIR.0, to: DEFAULT_PAIR.1 }
    }

    pub fn red(mode: &str) -> Self {
        Transition::Red { mode: mode.to_string(), from: DEFAULT_PAIR.0, to: DEFAULT_PAIR.1 }
    }

    pub fn pair(&self) -> (ZeemanState, ZeemanState) {
        match self {
            Transition::Carrier { from, to } | Transition::Blue { from, to, .. } | Transition::Red { from, to, .. } => {
                (*from, *to)
            }
            Transition::Raman => RAMAN_PAIR,
        }
    }

    pub fn sideband(&self) -> Sideband {
        match self {
            Transition::Blue { .. } => Sideband::Blue,
            Transition::Red { .. } => Sideband::Red,
            _ => Sideband::Carrier,
        }
    }

    pub fn mode(&self) -> Option<&str> {
        match self {
            Transition::Blue { mode, .. } | Transition::Red { mode, .. } => Some(mode),
            _ => None,
        }
    }

    pub fn is_raman(&self) -> bool {
        matches!(self, Transition::Raman)
    }

    pub fn check(&self) -> Result<()> {
        if self.is_raman() {
            return Ok(());
        }
        let (from, to) = self.pair();
        if from.level() != Level::S12 || to.level() != Level::D52 {
            return Err(Error::invalid(format!("optical transitions run S -> D, got {from} -> {to}")));
        }
        check_quadrupole(from, to)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub transition: Transition,
    /// μs.
    pub duration: f64,
    /// Laser phase, radians.
    pub phase: f64,
    /// Laser detuning from the unperturbed resonance, Hz.
    pub detuning: f64,
    /// Bare Rabi frequency, rad/μs.
    pub omega0: f64,
}

impl Pulse {
    /// A resonant pulse of the given area (in units of π) at the calibrated
    /// Rabi frequency.
    pub fn with_area(transition: Transition, area_pi: f64, cfg: &SimConfig) -> Result<Self> {
        let omega0 = cfg.calibrated_omega0(&transition)?;
        let k = cfg.ground_state_coupling(&transition)?.abs();
        Ok(Self { transition, duration: area_pi * PI / (omega0 * k), phase: 0.0, detuning: 0.0, omega0 })
    }

    pub fn phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn detuning(mut self, hz: f64) -> Self {
        self.detuning = hz;
        self
    }

    fn check(&self) -> Result<()> {
        self.transition.check()?;
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::invalid(format!("pulse duration must be >= 0, got {}", self.duration)));
        }
        if !(self.omega0.is_finite() && self.omega0 >= 0.0) {
            return Err(Error::invalid("pulse Rabi frequency must be >= 0"));
        }
        if !self.phase.is_finite() || !self.detuning.is_finite() {
            return Err(Error::invalid("pulse phase and detuning must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    /// Projective fluorescence detection; an optional shelving pulse first
    /// moves one ground sublevel to D₅/₂.
    Population { shelving: Option<Pulse> },
    /// Mean phonon number of a motional mode (simulator-only readout).
    Phonons { mode: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceElement {
    Pulse(Pulse),
    /// Laser-free interval, μs.
    Wait(f64),
    Measure(Readout),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preparation {
    pub electronic: ZeemanState,
    /// Modes not listed start thermal at their configured `n_bar`.
    pub motion: BTreeMap<String, MotionalPrep>,
}

impl Default for Preparation {
    fn default() -> Self {
        Self { electronic: ZeemanState::S_MINUS_HALF, motion: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub prep: Preparation,
    pub elements: Vec<SequenceElement>,
    /// Delay after the mains trigger, ms.
    pub trigger_delay: f64,
}

impl Sequence {
    pub fn new(prep: Preparation, elements: Vec<SequenceElement>) -> Self {
        Self { prep, elements, trigger_delay: 0.0 }
    }

    pub fn pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.elements.iter().filter_map(|e| match e {
            SequenceElement::Pulse(p) => Some(p),
            _ => None,
        })
    }

    pub fn readout(&self) -> Option<&Readout> {
        match self.elements.last() {
            Some(SequenceElement::Measure(r)) => Some(r),
            _ => None,
        }
    }

    /// Total laser and wait time, μs.
    pub fn duration(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                SequenceElement::Pulse(p) => p.duration,
                SequenceElement::Wait(t) => *t,
                SequenceElement::Measure(_) => 0.0,
            })
            .sum()
    }

    /// The sequence cut off `t` μs after its start; the element running at
    /// `t` is shortened and the measurement is kept.
    pub fn truncated(&self, t: f64) -> Self {
        let mut out = Vec::new();
        let mut left = t.max(0.0);
        for e in &self.elements {
            match e {
                SequenceElement::Pulse(p) => {
                    if left > 0.0 {
                        let mut p = p.clone();
                        p.duration = p.duration.min(left);
                        left -= p.duration;
                        out.push(SequenceElement::Pulse(p));
                    }
                }
                SequenceElement::Wait(w) => {
                    if left > 0.0 {
                        let w = w.min(left);
                        left -= w;
                        out.push(SequenceElement::Wait(w));
                    }
                }
                SequenceElement::Measure(r) => out.push(SequenceElement::Measure(r.clone())),
            }
        }
        Self { prep: self.prep.clone(), elements: out, trigger_delay: self.trigger_delay }
    }

    /// The electronic pair mapped onto the S and D slots.
    pub fn qubit_pair(&self) -> Result<(ZeemanState, ZeemanState)> {
        let mut pair = None;
        for p in self.pulses() {
            let q = p.transition.pair();
            match pair {
                None => pair = Some(q),
                Some(old) if old != q => {
                    return Err(Error::invalid(format!(
                        "a sequence addresses a single qubit pair; found {} -> {} and {} -> {}",
                        old.0, old.1, q.0, q.1
                    )))
                }
                _ => {}
            }
        }
        Ok(pair.unwrap_or_else(|| match self.prep.electronic.level() {
            Level::S12 => (self.prep.electronic, DEFAULT_PAIR.1),
            Level::D52 => (DEFAULT_PAIR.0, self.prep.electronic),
        }))
    }

    /// The motional mode represented quantum mechanically.
    pub fn tracked_mode<'a>(&'a self, cfg: &'a SimConfig) -> Result<&'a str> {
        let mut mode: Option<&str> = None;
        let readout_mode = match self.readout() {
            Some(Readout::Phonons { mode }) => Some(mode.as_str()),
            _ => None,
        };
        for m in self.pulses().filter_map(|p| p.transition.mode()).chain(readout_mode) {
            match mode {
                None => mode = Some(m),
                Some(old) if old != m => {
                    return Err(Error::invalid(format!(
                        "sidebands and phonon readout must address one mode; found '{old}' and '{m}'"
                    )))
                }
                _ => {}
            }
        }
        Ok(mode.unwrap_or(&cfg.default_mode))
    }

    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        if !(self.trigger_delay.is_finite() && (0.0..crate::noise::LINE_PERIOD_MS).contains(&self.trigger_delay)) {
            return Err(Error::invalid(format!("trigger delay must lie in [0, 20) ms, got {}", self.trigger_delay)));
        }
        for (i, e) in self.elements.iter().enumerate() {
            match e {
                SequenceElement::Pulse(p) => {
                    p.check()?;
                    if let Some(m) = p.transition.mode() {
                        cfg.eta(m)?;
                    }
                }
                SequenceElement::Wait(t) => {
                    if !(t.is_finite() && *t >= 0.0) {
                        return Err(Error::invalid(format!("wait must be >= 0, got {t}")));
                    }
                }
                SequenceElement::Measure(r) => {
                    if i + 1 != self.elements.len() {
                        return Err(Error::invalid("measure must be the final element"));
                    }
                    match r {
                        Readout::Phonons { mode } => {
                            cfg.eta(mode)?;
                        }
                        Readout::Population { shelving: Some(s) } => {
                            s.check()?;
                            if s.transition.mode().is_some() || s.transition.is_raman() {
                                return Err(Error::invalid("the shelving pulse must be a carrier pulse"));
                            }
                        }
                        Readout::Population { shelving: None } => {}
                    }
                }
            }
        }
        for (name, _) in &self.prep.motion {
            cfg.eta(name)?;
        }
        let (s, d) = self.qubit_pair()?;
        if self.prep.electronic != s && self.prep.electronic != d {
            return Err(Error::invalid(format!(
                "prepared state {} is not part of the addressed pair {s} -> {d}",
                self.prep.electronic
            )));
        }
        self.tracked_mode(cfg)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Hz, applied to every pulse except the shelving pulse.
    Detuning,
    /// μs, applied to every pulse.
    Duration,
    /// μs, applied to every wait.
    Wait,
    /// Trigger delay, ms.
    Delay,
    /// Plain repetition; the value is an index.
    Repeat,
    /// Sequence cut off this many μs after its start, readout kept.
    Cutoff,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::Detuning => "detuning",
            ScanAxis::Duration => "duration",
            ScanAxis::Wait => "wait",
            ScanAxis::Delay => "delay",
            ScanAxis::Repeat => "repeat",
            ScanAxis::Cutoff => "cutoff",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ScanAxis::Detuning => "Hz",
            ScanAxis::Duration | ScanAxis::Wait | ScanAxis::Cutoff => "us",
            ScanAxis::Delay => "ms",
            ScanAxis::Repeat => "",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [ScanAxis::Detuning, ScanAxis::Duration, ScanAxis::Wait, ScanAxis::Delay, ScanAxis::Repeat, ScanAxis::Cutoff]
            .into_iter()
            .find(|a| a.name() == s)
    }

    /// Whether `seq` contains an element this axis acts on.
    pub fn applies_to(self, seq: &Sequence) -> bool {
        match self {
            ScanAxis::Detuning | ScanAxis::Duration => seq.pulses().next().is_some(),
            ScanAxis::Wait => seq.elements.iter().any(|e| matches!(e, SequenceElement::Wait(_))),
            ScanAxis::Delay | ScanAxis::Repeat | ScanAxis::Cutoff => true,
        }
    }

    pub fn apply(self, seq: &Sequence, value: f64) -> Sequence {
        let mut out = seq.clone();
        match self {
            ScanAxis::Delay => out.trigger_delay = value,
            ScanAxis::Repeat => {}
            ScanAxis::Cutoff => return seq.truncated(value),
            _ => {
                for e in &mut out.elements {
                    match (self, e) {
                        (ScanAxis::Detuning, SequenceElement::Pulse(p)) => p.detuning = value,
                        (ScanAxis::Duration, SequenceElement::Pulse(p)) => p.duration = value,
                        (ScanAxis::Wait, SequenceElement::Wait(w)) => *w = value,
                        _ => {}
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
}

impl Scan {
    pub fn new(axis: ScanAxis, values: Vec<f64>) -> Self {
        Self { axis, values }
    }

    pub fn repeat(points: usize) -> Self {
        Self { axis: ScanAxis::Repeat, values: (0..points).map(|i| i as f64).collect() }
    }

    /// lo, lo + step, …, up to and including hi. The number of intervals is
    /// rounded up, so the last point is exactly `hi`.
    pub fn linspace_step(axis: ScanAxis, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
            return Err(Error::EmptyScan);
        }
        let intervals = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize;
        let values = if intervals == 0 {
            vec![lo]
        } else {
            (0..=intervals)
                .map(|k| if k == intervals { hi } else { lo + (hi - lo) * k as f64 / intervals as f64 })
                .collect()
        };
        Ok(Self { axis, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Probability of detecting the ion dark (in D₅/₂).
    DarkProbability,
    /// Mean phonon number of the tracked mode.
    MeanPhonons,
    /// Fringe or echo contrast derived from several scans.
    Contrast,
    /// Fitted line centre, Hz.
    LineCenter,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::DarkProbability => "dark_probability",
            Observable::MeanPhonons => "mean_phonons",
            Observable::Contrast => "contrast",
            Observable::LineCenter => "line_center",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Observable::DarkProbability, Observable::MeanPhonons, Observable::Contrast, Observable::LineCenter]
            .into_iter()
            .find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub scan_value: f64,
    pub p_d: f64,
    pub std_err: f64,
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub axis: ScanAxis,
    pub observable: Observable,
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.scan_value).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_d).collect()
    }
}

/// √(p(1 − p)/N).
pub fn binomial_std_err(p: f64, shots: usize) -> f64 {
    (p * (1.0 - p) / shots as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Bright,
    Dark,
}

/// Result of one trajectory before and after the projective measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub outcome: Outcome,
    /// Probability of a dark outcome given this trajectory.
    pub p_dark: f64,
    /// Mean phonon number of the tracked mode.
    pub phonons: f64,
}

fn apply_block(a: &mut Complex64, b: &mut Complex64, omega: f64, delta: f64, phi: f64, tau: f64) {
    let w = omega.hypot(delta);
    if w == 0.0 {
        return;
    }
    let (s, c) = (w * tau / 2.0).sin_cos();
    let i = Complex64::i();
    let u11 = Complex64::new(c, -delta / w * s);
    let u22 = Complex64::new(c, delta / w * s);
    let u12 = -i * (omega / w * s) * Complex64::from_polar(1.0, -phi);
    let u21 = -i * (omega / w * s) * Complex64::from_polar(1.0, phi);
    let (x, y) = (*a, *b);
    *a = u11 * x + u12 * y;
    *b = u21 * x + u22 * y;
}

/// The 2×2 propagator of a pulse with Rabi frequency `omega`, detuning
/// `delta` (both rad/μs), phase `phi` and length `tau` μs, acting on (S, D).
pub fn two_level_unitary(omega: f64, delta: f64, phi: f64, tau: f64) -> [[Complex64; 2]; 2] {
    let mut cols = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut v = [Complex64::new(0.0, 0.0); 2];
        v[k] = Complex64::new(1.0, 0.0);
        let (mut a, mut b) = (v[0], v[1]);
        apply_block(&mut a, &mut b, omega, delta, phi, tau);
        *col = [a, b];
    }
    // transpose columns into rows
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// Per-shot context a pulse is propagated in.
#[derive(Debug, Clone, Copy)]
pub struct PulseEnv<'a> {
    pub cfg: &'a SimConfig,
    pub shot: &'a ShotNoise,
    /// Field deviation from B₀ during the pulse, mGauss.
    pub field_dev_mg: f64,
    /// Lamb-Dicke factor of the tracked mode.
    pub eta: f64,
    /// Product of the Debye-Waller factors of the spectator modes.
    pub spectator_factor: f64,
}

impl PulseEnv<'_> {
    /// Effective detuning, rad/μs.
    pub fn detuning(&self, pulse: &Pulse) -> f64 {
        let (from, to) = pulse.transition.pair();
        let zeeman_hz = zeeman_susceptibility(&self.cfg.constants, from, to) * self.field_dev_mg;
        let laser = if pulse.transition.is_raman() { 0.0 } else { self.shot.laser_offset };
        TAU * 1e-6 * (pulse.detuning + laser - zeeman_hz)
    }

    pub fn rabi_scale(&self) -> f64 {
        self.cfg.noise.laser.rabi_scale(self.shot.intensity_factor)
    }
}

/// Applies `pulse` to the tracked mode and electronic state.
pub fn propagate_pulse(state: &mut JointState, pulse: &Pulse, env: &PulseEnv<'_>) -> Result<()> {
    pulse.check()?;
    let delta = env.detuning(pulse);
    let tau = pulse.duration;
    let phi = pulse.phase;
    if tau == 0.0 {
        return Ok(());
    }
    let base = pulse.omega0 * env.rabi_scale();
    let free_s = Complex64::from_polar(1.0, -delta * tau / 2.0);
    let free_d = Complex64::from_polar(1.0, delta * tau / 2.0);
    if pulse.transition.is_raman() {
        let amps = state.amplitudes_mut();
        for n in 0..amps.len() / 2 {
            let (lo, hi) = amps.split_at_mut(2 * n + 1);
            apply_block(&mut lo[2 * n], &mut hi[0], base, delta, phi, tau);
        }
        return Ok(());
    }
    let base = base * env.spectator_factor;
    match pulse.transition.sideband() {
        Sideband::Carrier => {
            let m = matrix_elements(env.eta, state.n_max(), 0);
            let amps = state.amplitudes_mut();
            for (n, &mn) in m.iter().enumerate() {
                let (lo, hi) = amps.split_at_mut(2 * n + 1);
                apply_block(&mut lo[2 * n], &mut hi[0], base * mn, delta, phi, tau);
            }
        }
        Sideband::Blue => {
            if state.amplitude(Electronic::S, state.n_max()).norm_sqr() > 0.0 {
                state.ensure_n_max(state.n_max() + 1);
            }
            let n_max = state.n_max();
            let m = matrix_elements(env.eta, n_max, 1);
            let amps = state.amplitudes_mut();
            amps[1] *= free_d;
            for n in 0..n_max {
                // |S, n⟩ at 2n, |D, n + 1⟩ at 2n + 3
                let (lo, hi) = amps.split_at_mut(2 * n + 3);
                apply_block(&mut lo[2 * n], &mut hi[0], base * m[n], delta, phi, tau);
            }
            amps[2 * n_max] *= free_s;
        }
        Sideband::Red => {
            if state.amplitude(Electronic::D, state.n_max()).norm_sqr() > 0.0 {
                state.ensure_n_max(state.n_max() + 1);
            }
            let n_max = state.n_max();
            let m = matrix_elements(env.eta, n_max, 1);
            let amps = state.amplitudes_mut();
            amps[0] *= free_s;
            for n in 0..n_max {
                // |D, n⟩ at 2n + 1, |S, n + 1⟩ at 2n + 2
                let (lo, hi) = amps.split_at_mut(2 * n + 2);
                apply_block(&mut hi[0], &mut lo[2 * n + 1], base * m[n], delta, phi, tau);
            }
            amps[2 * n_max + 1] *= free_d;
        }
    }
    Ok(())
}

struct ModeSlot {
    name: String,
    eta: f64,
    prep: MotionalPrep,
    heating: f64,
}

/// A sequence resolved against a configuration, ready to run shots.
pub struct CompiledSequence<'a> {
    seq: Sequence,
    cfg: &'a SimConfig,
    pair: (ZeemanState, ZeemanState),
    tracked: usize,
    modes: Vec<ModeSlot>,
    start_slot: Electronic,
    /// Which slot the shelving pulse empties into D₅/₂.
    shelved_slot: Option<Electronic>,
    susceptibility: f64,
    observable: Observable,
}

impl<'a> CompiledSequence<'a> {
    pub fn new(seq: &Sequence, cfg: &'a SimConfig) -> Result<Self> {
        seq.validate(cfg)?;
        let pair = seq.qubit_pair()?;
        let tracked_name = seq.tracked_mode(cfg)?.to_string();
        let mut modes = Vec::new();
        for (name, m) in &cfg.modes {
            let prep = match seq.prep.motion.get(name) {
                Some(p) => *p,
                None => MotionalPrep::Thermal(ThermalDistribution::new(m.n_bar, cfg.n_max)?),
            };
            modes.push(ModeSlot { name: name.clone(), eta: m.eta, prep, heating: cfg.rates.heating_rate(name) * 1e-3 });
        }
        let tracked = modes.iter().position(|m| m.name == tracked_name).expect("tracked mode validated");
        let start_slot = if seq.prep.electronic == pair.0 { Electronic::S } else { Electronic::D };
        let mut shelved_slot = None;
        let mut observable = Observable::DarkProbability;
        match seq.readout() {
            Some(Readout::Population { shelving: Some(s) }) => {
                let from = s.transition.pair().0;
                shelved_slot = Some(if from == pair.0 {
                    Electronic::S
                } else if from == pair.1 {
                    Electronic::D
                } else {
                    return Err(Error::invalid(format!("shelving pulse starts from {from}, which is not in the qubit pair")));
                });
                let f = shelving_fidelity(s, &ShotNoise::NONE, cfg, 0.0, 1.0, None);
                if f < 1.0 - 1e-9 {
                    return Err(Error::ShelvingMiscalibrated { fidelity: f });
                }
            }
            Some(Readout::Phonons { .. }) => observable = Observable::MeanPhonons,
            _ => {}
        }
        let susceptibility = zeeman_susceptibility(&cfg.constants, pair.0, pair.1);
        Ok(Self { seq: seq.clone(), cfg, pair, tracked, modes, start_slot, shelved_slot, susceptibility, observable })
    }

    pub fn observable(&self) -> Observable {
        self.observable
    }

    fn slot_is_d_level(&self) -> bool {
        self.pair.1.level() == Level::D52
    }

    /// Runs one trajectory with its own random stream.
    pub fn run(&self, master_seed: u64, shot_index: u64) -> Result<ShotRecord> {
        let cfg = self.cfg;
        let mut rng = shot_rng(master_seed, shot_index);
        let shot = ShotNoise::draw(&cfg.noise, &mut rng);
        let mut ns: Vec<usize> = self.modes.iter().map(|m| m.prep.sample(&mut rng)).collect();
        let n_max = cfg.n_max.max(ns[self.tracked]);
        let mut state = JointState::basis(self.start_slot, ns[self.tracked], n_max);

        let delay = self.seq.trigger_delay;
        let mut t = 0.0; // μs since shot start
        let first_detuning = self.seq.pulses().next().map_or(0.0, |p| p.detuning);
        let mut frame = first_detuning;
        let laser_in_frame = !self.seq.pulses().next().is_some_and(|p| p.transition.is_raman());
        let decay = if self.slot_is_d_level() { cfg.rates.effective_decay_rate() * 1e-3 } else { 0.0 };

        for e in &self.seq.elements {
            match e {
                SequenceElement::Pulse(p) => {
                    let mid_ms = delay + (t + p.duration / 2.0) * 1e-3;
                    let env = self.env(&shot, field_deviation_mg(mid_ms, &shot, &cfg.noise.bfield), &ns);
                    propagate_pulse(&mut state, p, &env)?;
                    state.check_norm()?;
                    frame = p.detuning;
                    t += p.duration;
                }
                SequenceElement::Wait(w) => {
                    let w = *w;
                    let t0 = t;
                    let laser = if laser_in_frame { shot.laser_offset } else { 0.0 };
                    let chi = self.susceptibility;
                    let bcfg = &cfg.noise.bfield;
                    let phase = |a: f64, b: f64| {
                        let field = field_deviation_integral(delay + (t0 + a) * 1e-3, delay + (t0 + b) * 1e-3, &shot, bcfg);
                        TAU * ((frame + laser) * (b - a) * 1e-6 - chi * field * 1e-3)
                    };
                    let dynm = WaitDynamics {
                        decay_rate: decay,
                        heating_rate: self.modes[self.tracked].heating,
                        motional_dephasing: cfg.rates.motional_dephasing * 1e-3,
                        free_phase: &phase,
                    };
                    evolve_wait(&mut state, w, &dynm, &mut rng)?;
                    if laser_in_frame {
                        white_noise_dephase(&mut state, w * 1e-3, cfg.noise.laser.lorentzian_linewidth, &mut rng);
                    }
                    for (i, m) in self.modes.iter().enumerate() {
                        if i != self.tracked {
                            ns[i] = heat_classical(ns[i], m.heating, w, &mut rng);
                        }
                    }
                    state.check_norm()?;
                    t += w;
                }
                SequenceElement::Measure(_) => {}
            }
        }

        let p_dark = match self.seq.readout() {
            Some(Readout::Population { shelving: Some(s) }) => {
                let slot = self.shelved_slot.expect("shelving slot resolved");
                let mid_ms = delay + (t + s.duration / 2.0) * 1e-3;
                let dev = field_deviation_mg(mid_ms, &shot, &cfg.noise.bfield);
                let spect = self.spectator_factor(&ns);
                let pops: Vec<f64> = (0..=state.n_max()).map(|n| state.amplitude(slot, n).norm_sqr()).collect();
                shelving_fidelity(s, &shot, cfg, dev, spect, Some((self.modes[self.tracked].eta, &pops)))
            }
            Some(Readout::Population { shelving: None }) | None => {
                if self.slot_is_d_level() {
                    state.population(Electronic::D)
                } else {
                    0.0
                }
            }
            Some(Readout::Phonons { .. }) => 0.0,
        }
        .clamp(0.0, 1.0);

        let u: f64 = rng.random();
        let flip: f64 = rng.random();
        let mut dark = u < p_dark;
        if flip < cfg.detection_error {
            dark = !dark;
        }
        Ok(ShotRecord {
            outcome: if dark { Outcome::Dark } else { Outcome::Bright },
            p_dark,
            phonons: state.mean_phonons(),
        })
    }

    fn spectator_factor(&self, ns: &[usize]) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.tracked)
            .map(|(i, m)| motional_matrix_element(m.eta, ns[i], ns[i]))
            .product()
    }

    fn env<'b>(&'b self, shot: &'b ShotNoise, field_dev_mg: f64, ns: &[usize]) -> PulseEnv<'b> {
        PulseEnv {
            cfg: self.cfg,
            shot,
            field_dev_mg,
            eta: self.modes[self.tracked].eta,
            spectator_factor: self.spectator_factor(ns),
        }
    }
}

/// Probability that the shelving pulse moves the population of its source
/// level to D₅/₂. `populations` is the Fock distribution of the source level
/// in the tracked mode (ground state when `None`).
fn shelving_fidelity(
    pulse: &Pulse,
    shot: &ShotNoise,
    cfg: &SimConfig,
    field_dev_mg: f64,
    spectator_factor: f64,
    populations: Option<(f64, &[f64])>,
) -> f64 {
    let env = PulseEnv { cfg, shot, field_dev_mg, eta: 0.0, spectator_factor };
    let delta = env.detuning(pulse);
    let ground = cfg.ground_state_coupling(&pulse.transition).unwrap_or(1.0);
    let transfer = |omega: f64| {
        let u = two_level_unitary(omega, delta, pulse.phase, pulse.duration);
        u[1][0].norm_sqr()
    };
    let base = pulse.omega0 * env.rabi_scale();
    match populations {
        None => transfer(base * ground),
        Some((eta, pops)) => {
            let m = matrix_elements(eta, pops.len().saturating_sub(1), 0);
            pops.iter().zip(&m).filter(|(p, _)| **p > 0.0).map(|(p, mn)| p * transfer(base * spectator_factor * mn)).sum()
        }
    }
}

pub fn run_shot(seq: &Sequence, cfg: &SimConfig, master_seed: u64, shot_index: u64) -> Result<Outcome> {
    Ok(CompiledSequence::new(seq, cfg)?.run(master_seed, shot_index)?.outcome)
}

/// Runs `shots` shots at every scan value. Shot `k` of point `i` uses the
/// stream `i·shots + k`, so the result does not depend on scheduling.
pub fn run_scan(seq: &Sequence, scan: &Scan, shots: usize, cfg: &SimConfig, master_seed: u64) -> Result<ScanResult> {
    if shots == 0 {
        return Err(Error::invalid("shots per point must be > 0"));
    }
    cfg.validate()?;
    if !scan.values.is_empty() && !scan.axis.applies_to(seq) {
        return Err(Error::invalid(format!("scan axis '{}' matches no element of the sequence", scan.axis.name())));
    }
    let compiled: Vec<CompiledSequence<'_>> =
        scan.values.iter().map(|&v| CompiledSequence::new(&scan.axis.apply(seq, v), cfg)).collect::<Result<_>>()?;
    let observable = compiled.first().map_or(Observable::DarkProbability, |c| c.observable());
    let total = compiled.len() * shots;
    let records: Vec<ShotRecord> = (0..total)
        .into_par_iter()
        .map(|j| compiled[j / shots].run(master_seed, j as u64))
        .collect::<Result<_>>()?;
    let points = scan
        .values
        .iter()
        .zip(records.chunks(shots))
        .map(|(&v, chunk)| match observable {
            Observable::DarkProbability => {
                let dark = chunk.iter().filter(|r| r.outcome == Outcome::Dark).count();
                let p = dark as f64 / shots as f64;
                ScanPoint { scan_value: v, p_d: p, std_err: binomial_std_err(p, shots), shots }
            }
            _ => {
                let mean = chunk.iter().map(|r| r.phonons).sum::<f64>() / shots as f64;
                let var = if shots > 1 {
                    chunk.iter().map(|r| (r.phonons - mean).powi(2)).sum::<f64>() / (shots - 1) as f64
                } else {
                    0.0
                };
                ScanPoint { scan_value: v, p_d: mean, std_err: (var / shots as f64).sqrt(), shots }
            }
        })
        .collect();
    Ok(ScanResult { axis: scan.axis, observable, points })
}

/// Exact noiseless dark probability at each scan value, averaged over the
/// prepared Fock distributions by explicit enumeration instead of sampling.
pub fn expected_scan(seq: &Sequence, scan: &Scan, cfg: &SimConfig) -> Result<Vec<f64>> {
    let quiet = SimConfig { noise: NoiseConfig::quiet(), rates: OpenSystemRates::closed(), ..cfg.clone() };
    scan.values
        .iter()
        .map(|&v| {
            let s = scan.axis.apply(seq, v);
            let c = CompiledSequence::new(&s, &quiet)?;
            let mut total = 0.0;
            let mut stack = vec![(0usize, 1.0f64, Vec::new())];
            while let Some((i, w, ns)) = stack.pop() {
                if i == c.modes.len() {
                    total += w * c.evolve_fixed(&ns)?;
                    continue;
                }
                let prep = c.modes[i].prep;
                for n in 0..=prep.cutoff() {
                    let p = prep.probability(n);
                    if p > 0.0 {
                        let mut next = ns.clone();
                        next.push(n);
                        stack.push((i + 1, w * p, next));
                    }
                }
            }
            Ok(total)
        })
        .collect()
}

impl CompiledSequence<'_> {
    /// Noiseless dark probability for fixed initial Fock numbers.
    fn evolve_fixed(&self, ns: &[usize]) -> Result<f64> {
        let mut state = JointState::basis(self.start_slot, ns[self.tracked], self.cfg.n_max);
        let mut frame = self.seq.pulses().next().map_or(0.0, |p| p.detuning);
        // never drawn from: the dynamics below are not dissipative
        let mut rng = shot_rng(0, 0);
        for e in &self.seq.elements {
            match e {
                SequenceElement::Pulse(p) => {
                    propagate_pulse(&mut state, p, &self.env(&ShotNoise::NONE, 0.0, ns))?;
                    frame = p.detuning;
                }
                SequenceElement::Wait(w) => {
                    let phase = |a: f64, b: f64| TAU * frame * (b - a) * 1e-6;
                    let dynm =
                        WaitDynamics { decay_rate: 0.0, heating_rate: 0.0, motional_dephasing: 0.0, free_phase: &phase };
                    evolve_wait(&mut state, *w, &dynm, &mut rng)?;
                }
                SequenceElement::Measure(_) => {}
            }
        }
        Ok(match self.seq.readout() {
            Some(Readout::Population { shelving: Some(_) }) => {
                state.population(self.shelved_slot.expect("shelving slot resolved"))
            }
            _ if self.slot_is_d_level() => state.population(Electronic::D),
            _ => 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn no_motion() -> SimConfig {
        let mut cfg = SimConfig::noiseless();
        for m in cfg.modes.values_mut() {
            m.eta = 0.0;
            m.n_bar = 0.0;
        }
        cfg
    }

    /// Only the axial mode, so sideband pulses see no spectator factor.
    fn axial_only() -> SimConfig {
        let mut cfg = SimConfig::noiseless();
        cfg.modes.retain(|k, _| k == "axial");
        cfg
    }

    fn carrier_pulse(omega: f64, tau: f64, detuning_hz: f64) -> Pulse {
        Pulse {
            transition: Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1),
            duration: tau,
            phase: 0.0,
            detuning: detuning_hz,
            omega0: omega,
        }
    }

    fn env<'a>(cfg: &'a SimConfig) -> PulseEnv<'a> {
        PulseEnv { cfg, shot: &ShotNoise::NONE, field_dev_mg: 0.0, eta: 0.0, spectator_factor: 1.0 }
    }

    fn measured(elements: Vec<SequenceElement>) -> Sequence {
        let mut e = elements;
        e.push(SequenceElement::Measure(Readout::Population { shelving: None }));
        Sequence::new(Preparation::default(), e)
    }

    #[test]
    fn pi_pulse_transfers() {
        let cfg = no_motion();
        let mut st = JointState::basis(Electronic::S, 0, 3);
        propagate_pulse(&mut st, &carrier_pulse(1.0, PI, 0.0), &env(&cfg)).unwrap();
        assert!((st.population(Electronic::D) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn detuned_pi_pulse_closed_form() {
        let cfg = no_motion();
        let omega = 0.5;
        let delta_hz = omega / (TAU * 1e-6);
        let mut st = JointState::basis(Electronic::S, 0, 0);
        propagate_pulse(&mut st, &carrier_pulse(omega, PI / omega, delta_hz), &env(&cfg)).unwrap();
        let expected = 0.5 * (PI / 2f64.sqrt()).sin().powi(2);
        assert!((expected - 0.316564).abs() < 1e-6);
        assert!((st.population(Electronic::D) - expected).abs() < 1e-12);
    }

    #[test]
    fn two_half_pulses_make_pi() {
        let cfg = no_motion();
        let mut st = JointState::basis(Electronic::S, 0, 0);
        let half = carrier_pulse(1.0, PI / 2.0, 0.0);
        propagate_pulse(&mut st, &half, &env(&cfg)).unwrap();
        propagate_pulse(&mut st, &half, &env(&cfg)).unwrap();
        assert!((st.population(Electronic::D) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn blue_sideband_pi_reaches_d1() {
        let cfg = axial_only();
        let p = Pulse::with_area(Transition::blue("axial"), 1.0, &cfg).unwrap();
        let mut st = JointState::basis(Electronic::S, 0, 5);
        let e = PulseEnv { eta: 0.068, ..env(&cfg) };
        propagate_pulse(&mut st, &p, &e).unwrap();
        assert!((st.amplitude(Electronic::D, 1).norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn red_sideband_is_dark_on_ground_state() {
        let cfg = axial_only();
        let p = Pulse::with_area(Transition::red("axial"), 1.0, &cfg).unwrap();
        let mut st = JointState::basis(Electronic::S, 0, 5);
        let e = PulseEnv { eta: 0.068, ..env(&cfg) };
        propagate_pulse(&mut st, &p, &e).unwrap();
        assert!((st.amplitude(Electronic::S, 0).norm_sqr() - 1.0).abs() < 1e-15);
        // and it maps |S,1⟩ onto |D,0⟩ at the red-sideband π time for n = 1
        let mut st = JointState::basis(Electronic::S, 1, 5);
        propagate_pulse(&mut st, &p, &e).unwrap();
        assert!((st.amplitude(Electronic::D, 0).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sideband_grows_cutoff() {
        let cfg = SimConfig::noiseless();
        let p = Pulse::with_area(Transition::blue("axial"), 1.0, &cfg).unwrap();
        let mut st = JointState::basis(Electronic::S, 3, 3);
        propagate_pulse(&mut st, &p, &PulseEnv { eta: 0.068, ..env(&cfg) }).unwrap();
        assert_eq!(st.n_max(), 4);
        st.check_norm().unwrap();
    }

    #[test]
    fn calibrated_pi_time_is_seven_us() {
        let cfg = SimConfig::default();
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 1.0, &cfg).unwrap();
        assert!((p.duration - 7.0).abs() < 1e-12);
        let dw = (-0.068f64.powi(2) / 2.0).exp() * (-0.016f64.powi(2) / 2.0).exp();
        assert!((p.omega0 - PI / (7.0 * dw)).abs() < 1e-12);
    }

    #[test]
    fn selection_rule_enforced() {
        let bad = Transition::carrier(ZeemanState::S_MINUS_HALF, ZeemanState::new(Level::D52, 5).unwrap());
        assert!(bad.check().is_err());
        let ok = Transition::carrier(ZeemanState::S_MINUS_HALF, ZeemanState::D_MINUS_FIVE_HALF);
        ok.check().unwrap();
    }

    #[test]
    fn rabi_scan_hits_pi_at_seven_us() {
        let cfg = SimConfig { modes: no_motion().modes, ..SimConfig::noiseless() };
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 1.0, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p)]);
        let scan = Scan::linspace_step(ScanAxis::Duration, 0.0, 15.0, 0.5).unwrap();
        let r = run_scan(&seq, &scan, 50, &cfg, 1).unwrap();
        let at7 = r.points.iter().find(|p| (p.scan_value - 7.0).abs() < 1e-12).unwrap();
        assert_eq!(at7.p_d, 1.0);
        assert_eq!(r.points.len(), 31);
    }

    #[test]
    fn empty_scan_is_empty() {
        let seq = measured(vec![]);
        let r = run_scan(&seq, &Scan::new(ScanAxis::Repeat, vec![]), 10, &SimConfig::default(), 3).unwrap();
        assert!(r.points.is_empty());
        assert!(Scan::linspace_step(ScanAxis::Wait, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn prepare_and_measure_is_bright() {
        let cfg = SimConfig::default();
        let seq = measured(vec![]);
        for k in 0..20 {
            assert_eq!(run_shot(&seq, &cfg, 11, k).unwrap(), Outcome::Bright);
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let cfg = SimConfig::default();
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 0.5, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p.clone()), SequenceElement::Wait(100.0), SequenceElement::Pulse(p)]);
        let scan = Scan::linspace_step(ScanAxis::Detuning, -20e3, 20e3, 2e3).unwrap();
        let a = run_scan(&seq, &scan, 40, &cfg, 99).unwrap();
        let b = run_scan(&seq, &scan, 40, &cfg, 99).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_scan(&seq, &scan, 40, &cfg, 99)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn std_err_is_binomial() {
        let cfg = SimConfig::default();
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 0.5, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p)]);
        let r = run_scan(&seq, &Scan::repeat(5), 64, &cfg, 4).unwrap();
        for pt in r.points {
            assert_eq!(pt.std_err, binomial_std_err(pt.p_d, 64));
        }
    }

    #[test]
    fn intensity_noise_pi_pulse() {
        let mut cfg = no_motion();
        cfg.noise.laser.intensity_sigma_rel = 0.03;
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 1.0, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p)]);
        let r = run_scan(&seq, &Scan::repeat(1), 10_000, &cfg, 8).unwrap();
        assert!(r.points[0].p_d > 0.997, "{}", r.points[0].p_d);
        // brute-force oracle: sqrt law gives relative Rabi error ≈ 0.015
        let n = 200_000;
        let mut rng = shot_rng(1, 0);
        let mean: f64 = (0..n)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                ((1.0 + 0.015 * z) * PI / 2.0).sin().powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean > 0.999 && mean < 1.0);
    }

    #[test]
    fn thermal_carrier_flop_matches_sum() {
        let mut cfg = SimConfig::noiseless();
        cfg.modes.get_mut("axial").unwrap().n_bar = 0.0;
        cfg.modes.get_mut("radial").unwrap().n_bar = 7.0;
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 1.0, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p.clone())]);
        let scan = Scan::new(ScanAxis::Duration, vec![7.0, 21.0, 49.0, 70.0]);
        let sampled = run_scan(&seq, &scan, 4000, &cfg, 12).unwrap();
        let dist = ThermalDistribution::new(7.0, 40).unwrap();
        let dw_ax = (-0.068f64.powi(2) / 2.0).exp();
        for pt in &sampled.points {
            let exact: f64 = (0..=dist.cutoff())
                .map(|n| {
                    let omega = p.omega0 * dw_ax * motional_matrix_element(0.016, n, n);
                    dist.probability(n) * (omega * pt.scan_value / 2.0).sin().powi(2)
                })
                .sum();
            assert!((pt.p_d - exact).abs() < 3.0 * binomial_std_err(exact, 4000) + 1e-9, "{} vs {exact}", pt.p_d);
        }
        let enumerated = expected_scan(&seq, &scan, &cfg).unwrap();
        for (pt, e) in sampled.points.iter().zip(enumerated) {
            assert!((pt.p_d - e).abs() < 3.0 * binomial_std_err(e, 4000) + 1e-9);
        }
    }

    #[test]
    fn truncation_cuts_elements() {
        let cfg = SimConfig::noiseless();
        let p = Pulse::with_area(Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 1.0, &cfg).unwrap();
        let seq = measured(vec![SequenceElement::Pulse(p.clone()), SequenceElement::Wait(10.0), SequenceElement::Pulse(p)]);
        let cut = seq.truncated(12.0);
        assert_eq!(cut.elements.len(), 3);
        assert!((cut.duration() - 12.0).abs() < 1e-12);
        assert_eq!(seq.truncated(100.0), seq);
    }

    #[test]
    fn raman_ignores_laser_offset() {
        let mut cfg = no_motion();
        cfg.noise.laser.sigma_shot = 5e3;
        let raman = Pulse::with_area(Transition::Raman, 1.0, &cfg).unwrap();
        let shelve = Pulse::with_area(Transition::carrier(ZeemanState::S_MINUS_HALF, ZeemanState::D_MINUS_FIVE_HALF), 1.0, &no_motion()).unwrap();
        let seq = Sequence::new(
            Preparation::default(),
            vec![SequenceElement::Pulse(raman), SequenceElement::Measure(Readout::Population { shelving: Some(shelve) })],
        );
        let c = CompiledSequence::new(&seq, &cfg).unwrap();
        for k in 0..50 {
            // full transfer leaves nothing in S(-1/2) to shelve, whatever the laser does
            assert!(c.run(1, k).unwrap().p_dark < 1e-20);
        }
    }

    #[test]
    fn miscalibrated_shelving_rejected() {
        let cfg = no_motion();
        let raman = Pulse::with_area(Transition::Raman, 1.0, &cfg).unwrap();
        let shelve = Pulse::with_area(Transition::carrier(ZeemanState::S_MINUS_HALF, ZeemanState::D_MINUS_FIVE_HALF), 0.9, &cfg).unwrap();
        let seq = Sequence::new(
            Preparation::default(),
            vec![SequenceElement::Pulse(raman), SequenceElement::Measure(Readout::Population { shelving: Some(shelve) })],
        );
        assert!(matches!(CompiledSequence::new(&seq, &cfg), Err(Error::ShelvingMiscalibrated { .. })));
    }

    #[test]
    fn measure_must_be_last() {
        let cfg = SimConfig::default();
        let seq = Sequence::new(
            Preparation::default(),
            vec![SequenceElement::Measure(Readout::Population { shelving: None }), SequenceElement::Wait(1.0)],
        );
        assert!(seq.validate(&cfg).is_err());
    }

    proptest! {
        #[test]
        fn blocks_are_unitary(omega in 0.0f64..5.0, delta in -5.0f64..5.0, phi in -7.0f64..7.0, tau in 0.0f64..50.0) {
            let u = two_level_unitary(omega, delta, phi, tau);
            for i in 0..2 {
                for j in 0..2 {
                    let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - target).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn detuned_flop_closed_form(omega in 0.01f64..2.0, delta in -2.0f64..2.0, t in 0.0f64..30.0) {
            let cfg = no_motion();
            let mut st = JointState::basis(Electronic::S, 0, 0);
            propagate_pulse(&mut st, &carrier_pulse(omega, t, delta / (TAU * 1e-6)), &env(&cfg)).unwrap();
            let w2 = omega * omega + delta * delta;
            let expected = omega * omega / w2 * (w2.sqrt() * t / 2.0).sin().powi(2);
            prop_assert!((st.population(Electronic::D) - expected).abs() < 1e-10);
        }

        #[test]
        fn norm_survives_many_pulses(seed in 0u64..1000) {
            let cfg = SimConfig::noiseless();
            let mut rng = shot_rng(seed, 0);
            let mut st = JointState::basis(Electronic::S, 2, 10);
            let transitions = [Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), Transition::blue("axial"), Transition::red("axial")];
            for _ in 0..1000 {
                let tr = transitions[rng.random_range(0..3)].clone();
                let p = Pulse { transition: tr, duration: rng.random_range(0.0..20.0), phase: rng.random_range(0.0..TAU), detuning: rng.random_range(-1e4..1e4), omega0: 0.4 };
                propagate_pulse(&mut st, &p, &PulseEnv { eta: 0.068, ..env(&cfg) }).unwrap();
            }
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }
}
