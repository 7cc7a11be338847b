//! Ready-made measurements. Each one builds a sequence family, runs it
//! through [`run_scan`] and, where the measurement is a derived quantity
//! (fringe contrast, line centre), fits the raw scans.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_fringe, fit_line_center, Series};
use crate::error::{Error, Result};
use crate::noise::derive_seed;
use crate::physics::{MotionalPrep, ZeemanState};
use crate::pulse::{
    run_scan, Observable, Preparation, Pulse, Readout, Scan, ScanAxis, ScanPoint, ScanResult, Sequence, SequenceElement,
    SimConfig, Transition, DEFAULT_PAIR,
};

/// Echo pulse timing: carrier π/2, gap, blue-sideband π, all in μs.
pub const ECHO_CARRIER_US: f64 = 20.0;
pub const ECHO_GAP_US: f64 = 10.0;
pub const ECHO_SIDEBAND_US: f64 = 30.0;

/// Spectroscopy pulse used for line-centre measurements, μs.
pub const SPECTROSCOPY_PULSE_US: f64 = 1000.0;

pub const DEFAULT_SHOTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RabiFlop,
    RamseyFringe,
    RamseyContrast,
    LineTrigger,
    RamanSpectrum,
    RamanVsDelay,
    Lifetime,
    Heating,
    MotionalEcho,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::RabiFlop,
        ExperimentKind::RamseyFringe,
        ExperimentKind::RamseyContrast,
        ExperimentKind::LineTrigger,
        ExperimentKind::RamanSpectrum,
        ExperimentKind::RamanVsDelay,
        ExperimentKind::Lifetime,
        ExperimentKind::Heating,
        ExperimentKind::MotionalEcho,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RabiFlop => "rabi_flop",
            ExperimentKind::RamseyFringe => "ramsey_fringe",
            ExperimentKind::RamseyContrast => "ramsey_contrast",
            ExperimentKind::LineTrigger => "line_trigger",
            ExperimentKind::RamanSpectrum => "raman_spectrum",
            ExperimentKind::RamanVsDelay => "raman_vs_delay",
            ExperimentKind::Lifetime => "lifetime",
            ExperimentKind::Heating => "heating",
            ExperimentKind::MotionalEcho => "motional_echo",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|k| k.name()).collect()
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One named table of an experiment's output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub result: ScanResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub kind: ExperimentKind,
    pub datasets: Vec<Dataset>,
}

impl ExperimentData {
    pub fn get(&self, name: &str) -> Option<&ScanResult> {
        self.datasets.iter().find(|d| d.name == name).map(|d| &d.result)
    }
}

fn dataset(name: impl Into<String>, result: ScanResult) -> Dataset {
    Dataset { name: name.into(), result }
}

fn population_readout(mut elements: Vec<SequenceElement>) -> Vec<SequenceElement> {
    elements.push(SequenceElement::Measure(Readout::Population { shelving: None }));
    elements
}

fn ground_prep(state: ZeemanState) -> Preparation {
    Preparation { electronic: state, ..Preparation::default() }
}

/// Resonant pulse of `duration` μs whose Rabi frequency makes it a pulse of
/// area `area_pi`·π from the motional ground state.
fn timed_pulse(cfg: &SimConfig, transition: Transition, area_pi: f64, duration: f64) -> Result<Pulse> {
    if !(area_pi > 0.0 && duration > 0.0) {
        return Err(Error::invalid("pulse area and duration must be > 0"));
    }
    let omega0 = cfg.omega0_for_pi_time(&transition, duration / area_pi)?;
    Ok(Pulse { transition, duration, phase: 0.0, detuning: 0.0, omega0 })
}

fn check_values(name: &str, values: &[f64], non_negative: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name}: the scan range is empty")));
    }
    if values.iter().any(|v| !v.is_finite() || (non_negative && *v < 0.0)) {
        return Err(Error::invalid(format!("{name}: values must be finite{}", if non_negative { " and >= 0" } else { "" })));
    }
    Ok(())
}

/// Carrier (or sideband) Rabi flop: population versus pulse length.
pub fn rabi_flop_sequence(cfg: &SimConfig, transition: Transition) -> Result<Sequence> {
    let mut pulse = Pulse::with_area(transition, 1.0, cfg)?;
    let prep = ground_prep(pulse.transition.pair().0);
    pulse.duration = 0.0;
    Ok(Sequence::new(prep, population_readout(vec![SequenceElement::Pulse(pulse)])))
}

pub fn rabi_flop(cfg: &SimConfig, transition: Transition, durations: &[f64], shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("rabi_flop durations", durations, true)?;
    let seq = rabi_flop_sequence(cfg, transition)?;
    run_scan(&seq, &Scan::new(ScanAxis::Duration, durations.to_vec()), shots, cfg, seed)
}

/// (P_max − P_min)/(P_max + P_min) over the points with `lo ≤ x ≤ hi`.
pub fn sampled_contrast(r: &ScanResult, lo: f64, hi: f64) -> Option<f64> {
    let ys: Vec<f64> = r.points.iter().filter(|p| p.scan_value >= lo && p.scan_value <= hi).map(|p| p.p_d).collect();
    let max = ys.iter().copied().reduce(f64::max)?;
    let min = ys.iter().copied().reduce(f64::min)?;
    (max + min > 0.0).then(|| (max - min) / (max + min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyFringe {
    /// Free evolution between the pulses, μs.
    pub wait: f64,
    /// Laser detunings, Hz.
    pub detunings: Vec<f64>,
    /// Area of each pulse in units of π.
    pub area_pi: f64,
    /// Pulse length in μs; `None` uses the calibrated carrier Rabi frequency.
    pub pulse_duration: Option<f64>,
}

impl RamseyFringe {
    pub fn new(wait: f64, detunings: Vec<f64>) -> Self {
        Self { wait, detunings, area_pi: 0.5, pulse_duration: None }
    }
}

/// Two identical carrier pulses separated by `wait` μs; the second pulse
/// carries `final_phase`.
pub fn ramsey_sequence(cfg: &SimConfig, p: &RamseyFringe, final_phase: f64) -> Result<Sequence> {
    let tr = Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1);
    let pulse = match p.pulse_duration {
        Some(d) => timed_pulse(cfg, tr, p.area_pi, d)?,
        None => Pulse::with_area(tr, p.area_pi, cfg)?,
    };
    let elements = vec![
        SequenceElement::Pulse(pulse.clone()),
        SequenceElement::Wait(p.wait),
        SequenceElement::Pulse(pulse.phase(final_phase)),
    ];
    Ok(Sequence::new(ground_prep(DEFAULT_PAIR.0), population_readout(elements)))
}

pub fn ramsey_fringe(cfg: &SimConfig, p: &RamseyFringe, shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("ramsey_fringe detunings", &p.detunings, false)?;
    check_values("ramsey_fringe wait", &[p.wait], true)?;
    let seq = ramsey_sequence(cfg, p, 0.0)?;
    run_scan(&seq, &Scan::new(ScanAxis::Detuning, p.detunings.clone()), shots, cfg, seed)
}

/// `points` detunings spanning `periods` fringe periods, centred on zero.
pub fn fringe_detunings(wait_us: f64, periods: f64, points: usize) -> Vec<f64> {
    let half = 0.5 * periods * 1e6 / wait_us;
    (0..points).map(|i| -half + 2.0 * half * i as f64 / (points.max(2) - 1) as f64).collect()
}

fn contrast_point(x: f64, fringe: &ScanResult) -> Result<ScanPoint> {
    let fit = fit_fringe(&Series::from_scan(fringe))?;
    let shots = fringe.points.first().map_or(0, |p| p.shots);
    Ok(ScanPoint { scan_value: x, p_d: fit.value("contrast"), std_err: fit.error("contrast"), shots })
}

/// Ramsey fringes at every wait (μs) and the fitted contrast versus wait.
/// Each fringe spans two periods with `points` detunings.
pub fn ramsey_contrast(
    cfg: &SimConfig,
    waits: &[f64],
    points: usize,
    shots: usize,
    seed: u64,
) -> Result<(Vec<ScanResult>, ScanResult)> {
    check_values("ramsey_contrast waits", waits, true)?;
    if waits.contains(&0.0) {
        return Err(Error::invalid("ramsey_contrast waits must be > 0"));
    }
    let mut fringes = Vec::new();
    let mut contrast = Vec::new();
    for (i, &t) in waits.iter().enumerate() {
        let p = RamseyFringe::new(t, fringe_detunings(t, 2.0, points));
        let fringe = ramsey_fringe(cfg, &p, shots, derive_seed(seed, i as u64))?;
        contrast.push(contrast_point(t, &fringe)?);
        fringes.push(fringe);
    }
    Ok((fringes, ScanResult { axis: ScanAxis::Wait, observable: Observable::Contrast, points: contrast }))
}

/// Fits the line centre of a spectrum. `inverted` spectra (bright on
/// resonance) are flipped first.
fn center_point(x: f64, spectrum: &ScanResult, pulse_time: f64, inverted: bool) -> Result<ScanPoint> {
    let mut s = Series::from_scan(spectrum);
    if inverted {
        s.y.iter_mut().for_each(|y| *y = 1.0 - *y);
    }
    let fit = fit_line_center(&s, pulse_time)?;
    let shots = spectrum.points.first().map_or(0, |p| p.shots);
    Ok(ScanPoint { scan_value: x, p_d: fit.value("center"), std_err: fit.error("center"), shots })
}

/// Spectroscopy π pulse on S(−1/2) → `to` of `pulse_time` μs.
pub fn spectroscopy_sequence(cfg: &SimConfig, to: ZeemanState, pulse_time: f64) -> Result<Sequence> {
    let pulse = timed_pulse(cfg, Transition::carrier(DEFAULT_PAIR.0, to), 1.0, pulse_time)?;
    Ok(Sequence::new(ground_prep(DEFAULT_PAIR.0), population_readout(vec![SequenceElement::Pulse(pulse)])))
}

/// Spectra at each trigger delay (ms) and their fitted centres (Hz).
pub fn line_trigger(
    cfg: &SimConfig,
    to: ZeemanState,
    delays: &[f64],
    detunings: &[f64],
    pulse_time: f64,
    shots: usize,
    seed: u64,
) -> Result<(Vec<ScanResult>, ScanResult)> {
    check_values("line_trigger delays", delays, true)?;
    check_values("line_trigger detunings", detunings, false)?;
    let base = spectroscopy_sequence(cfg, to, pulse_time)?;
    let mut spectra = Vec::new();
    let mut centers = Vec::new();
    for (i, &d) in delays.iter().enumerate() {
        let seq = ScanAxis::Delay.apply(&base, d);
        let s = run_scan(&seq, &Scan::new(ScanAxis::Detuning, detunings.to_vec()), shots, cfg, derive_seed(seed, i as u64))?;
        centers.push(center_point(d, &s, pulse_time, false)?);
        spectra.push(s);
    }
    Ok((spectra, ScanResult { axis: ScanAxis::Delay, observable: Observable::LineCenter, points: centers }))
}

/// Raman π pulse S(−1/2) → S(+1/2) followed by shelving of S(−1/2) to
/// D(−5/2). A successful Raman transfer therefore reads out bright.
pub fn raman_sequence(cfg: &SimConfig) -> Result<Sequence> {
    let raman = Pulse::with_area(Transition::Raman, 1.0, cfg)?;
    let shelve = Pulse::with_area(Transition::carrier(ZeemanState::S_MINUS_HALF, ZeemanState::D_MINUS_FIVE_HALF), 1.0, cfg)?;
    let elements = vec![SequenceElement::Pulse(raman), SequenceElement::Measure(Readout::Population { shelving: Some(shelve) })];
    Ok(Sequence::new(ground_prep(ZeemanState::S_MINUS_HALF), elements))
}

/// Raman spectrum at one trigger delay (ms). The reported probability is
/// the dark (not transferred) fraction.
pub fn raman_spectrum(cfg: &SimConfig, detunings: &[f64], delay: f64, shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("raman_spectrum detunings", detunings, false)?;
    let seq = ScanAxis::Delay.apply(&raman_sequence(cfg)?, delay);
    run_scan(&seq, &Scan::new(ScanAxis::Detuning, detunings.to_vec()), shots, cfg, seed)
}

/// Raman spectra at each trigger delay (ms) and their fitted centres (Hz).
pub fn raman_vs_delay(
    cfg: &SimConfig,
    delays: &[f64],
    detunings: &[f64],
    shots: usize,
    seed: u64,
) -> Result<(Vec<ScanResult>, ScanResult)> {
    check_values("raman_vs_delay delays", delays, true)?;
    let mut spectra = Vec::new();
    let mut centers = Vec::new();
    for (i, &d) in delays.iter().enumerate() {
        let s = raman_spectrum(cfg, detunings, d, shots, derive_seed(seed, i as u64))?;
        centers.push(center_point(d, &s, cfg.calibration.raman_pi_time, true)?);
        spectra.push(s);
    }
    Ok((spectra, ScanResult { axis: ScanAxis::Delay, observable: Observable::LineCenter, points: centers }))
}

/// Prepares D(−1/2) directly, waits and detects. Waits are given in ms;
/// the result's scan values are in μs like every wait axis.
pub fn lifetime(cfg: &SimConfig, waits_ms: &[f64], shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("lifetime waits", waits_ms, true)?;
    let seq = Sequence::new(ground_prep(DEFAULT_PAIR.1), population_readout(vec![SequenceElement::Wait(0.0)]));
    let us: Vec<f64> = waits_ms.iter().map(|t| t * 1e3).collect();
    run_scan(&seq, &Scan::new(ScanAxis::Wait, us), shots, cfg, seed)
}

/// Mean phonon number of `mode` after a laser-free delay (ms), starting
/// from its ground state. Scan values are in μs.
pub fn heating(cfg: &SimConfig, mode: &str, waits_ms: &[f64], shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("heating waits", waits_ms, true)?;
    let mut prep = ground_prep(DEFAULT_PAIR.0);
    prep.motion.insert(mode.to_string(), MotionalPrep::Fock(0));
    let elements = vec![SequenceElement::Wait(0.0), SequenceElement::Measure(Readout::Phonons { mode: mode.to_string() })];
    let us: Vec<f64> = waits_ms.iter().map(|t| t * 1e3).collect();
    run_scan(&Sequence::new(prep, elements), &Scan::new(ScanAxis::Wait, us), shots, cfg, seed)
}

/// Carrier π/2, blue-sideband π, wait `wait` μs, then the two pulses in
/// reverse order. `final_phase` = π undoes the preparation exactly; 0 ends
/// in D.
pub fn echo_sequence(cfg: &SimConfig, mode: &str, wait: f64, final_phase: f64) -> Result<Sequence> {
    let carrier = timed_pulse(cfg, Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1), 0.5, ECHO_CARRIER_US)?;
    let blue = timed_pulse(cfg, Transition::blue(mode), 1.0, ECHO_SIDEBAND_US)?;
    let mut prep = ground_prep(DEFAULT_PAIR.0);
    prep.motion.insert(mode.to_string(), MotionalPrep::Fock(0));
    let elements = vec![
        SequenceElement::Pulse(carrier.clone()),
        SequenceElement::Wait(ECHO_GAP_US),
        SequenceElement::Pulse(blue.clone()),
        SequenceElement::Wait(wait),
        SequenceElement::Pulse(blue.phase(PI)),
        SequenceElement::Wait(ECHO_GAP_US),
        SequenceElement::Pulse(carrier.phase(final_phase)),
    ];
    Ok(Sequence::new(prep, population_readout(elements)))
}

/// P_D of the echo cut off at each time (μs), for final phases 0 and π.
pub fn echo_trace(
    cfg: &SimConfig,
    mode: &str,
    wait: f64,
    cutoffs: &[f64],
    shots: usize,
    seed: u64,
) -> Result<(ScanResult, ScanResult)> {
    check_values("motional_echo cutoffs", cutoffs, true)?;
    let scan = Scan::new(ScanAxis::Cutoff, cutoffs.to_vec());
    let d = run_scan(&echo_sequence(cfg, mode, wait, 0.0)?, &scan, shots, cfg, derive_seed(seed, 0))?;
    let s = run_scan(&echo_sequence(cfg, mode, wait, PI)?, &scan, shots, cfg, derive_seed(seed, 1))?;
    Ok((d, s))
}

/// Echo contrast |P_D(0) − P_D(π)| of the complete sequence at each wait (μs).
pub fn echo_contrast(cfg: &SimConfig, mode: &str, waits: &[f64], shots: usize, seed: u64) -> Result<ScanResult> {
    check_values("motional_echo waits", waits, true)?;
    let mut points = Vec::new();
    for (i, &t) in waits.iter().enumerate() {
        let mut p = [0.0; 2];
        let mut var = 0.0;
        for (k, phase) in [0.0, PI].into_iter().enumerate() {
            let seq = echo_sequence(cfg, mode, t, phase)?;
            let r = run_scan(&seq, &Scan::repeat(1), shots, cfg, derive_seed(seed, 2 * i as u64 + k as u64))?;
            p[k] = r.points[0].p_d;
            var += r.points[0].std_err.powi(2);
        }
        points.push(ScanPoint { scan_value: t, p_d: (p[0] - p[1]).abs(), std_err: var.sqrt(), shots });
    }
    Ok(ScanResult { axis: ScanAxis::Wait, observable: Observable::Contrast, points })
}

/// Kind-specific parameters. Times follow the unit of the matching scan
/// axis unless stated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentParams {
    /// Pulse lengths, μs.
    RabiFlop { durations: Vec<f64> },
    RamseyFringe(RamseyFringe),
    /// Waits, μs; detunings per fringe.
    RamseyContrast { waits: Vec<f64>, points: usize },
    /// Delays in ms, detunings in Hz, pulse in μs.
    LineTrigger { to: ZeemanState, delays: Vec<f64>, detunings: Vec<f64>, pulse_time: f64 },
    RamanSpectrum { detunings: Vec<f64>, delay: f64 },
    RamanVsDelay { delays: Vec<f64>, detunings: Vec<f64> },
    /// Waits, ms.
    Lifetime { waits: Vec<f64> },
    /// Waits, ms.
    Heating { mode: String, waits: Vec<f64> },
    /// Wait and cut-off times, μs.
    MotionalEcho { mode: String, wait: f64, cutoffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: ExperimentParams,
    pub shots_per_point: usize,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    Scan::linspace_step(ScanAxis::Repeat, lo, hi, step).map(|s| s.values).unwrap_or_default()
}

impl ExperimentSpec {
    pub fn new(params: ExperimentParams) -> Self {
        Self { params, shots_per_point: DEFAULT_SHOTS }
    }

    pub fn kind(&self) -> ExperimentKind {
        match &self.params {
            ExperimentParams::RabiFlop { .. } => ExperimentKind::RabiFlop,
            ExperimentParams::RamseyFringe(_) => ExperimentKind::RamseyFringe,
            ExperimentParams::RamseyContrast { .. } => ExperimentKind::RamseyContrast,
            ExperimentParams::LineTrigger { .. } => ExperimentKind::LineTrigger,
            ExperimentParams::RamanSpectrum { .. } => ExperimentKind::RamanSpectrum,
            ExperimentParams::RamanVsDelay { .. } => ExperimentKind::RamanVsDelay,
            ExperimentParams::Lifetime { .. } => ExperimentKind::Lifetime,
            ExperimentParams::Heating { .. } => ExperimentKind::Heating,
            ExperimentParams::MotionalEcho { .. } => ExperimentKind::MotionalEcho,
        }
    }

    /// The standard protocol of each measurement.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let params = match kind {
            ExperimentKind::RabiFlop => ExperimentParams::RabiFlop { durations: grid(0.0, 80.0, 0.5) },
            ExperimentKind::RamseyFringe => ExperimentParams::RamseyFringe(RamseyFringe {
                wait: 100.0,
                detunings: grid(-20e3, 20e3, 250.0),
                area_pi: 0.515,
                pulse_duration: Some(9.5),
            }),
            ExperimentKind::RamseyContrast => {
                ExperimentParams::RamseyContrast { waits: grid(100.0, 1000.0, 100.0), points: 41 }
            }
            ExperimentKind::LineTrigger => ExperimentParams::LineTrigger {
                to: ZeemanState::D_MINUS_FIVE_HALF,
                delays: grid(0.0, 19.0, 1.0),
                detunings: grid(-8e3, 8e3, 200.0),
                pulse_time: SPECTROSCOPY_PULSE_US,
            },
            ExperimentKind::RamanSpectrum => {
                ExperimentParams::RamanSpectrum { detunings: grid(-6e3, 6e3, 150.0), delay: 0.0 }
            }
            ExperimentKind::RamanVsDelay => {
                ExperimentParams::RamanVsDelay { delays: grid(0.0, 19.0, 1.0), detunings: grid(-8e3, 8e3, 200.0) }
            }
            ExperimentKind::Lifetime => ExperimentParams::Lifetime { waits: grid(0.0, 8000.0, 400.0) },
            ExperimentKind::Heating => ExperimentParams::Heating { mode: "axial".into(), waits: grid(0.0, 200.0, 20.0) },
            ExperimentKind::MotionalEcho => {
                ExperimentParams::MotionalEcho { mode: "axial".into(), wait: 850.0, cutoffs: grid(0.0, 970.0, 10.0) }
            }
        };
        Self::new(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots_per_point == 0 {
            return Err(Error::invalid("shots_per_point must be > 0"));
        }
        let kind = self.kind().name();
        let checks: Vec<(&[f64], bool)> = match &self.params {
            ExperimentParams::RabiFlop { durations } => vec![(durations, true)],
            ExperimentParams::RamseyFringe(p) => vec![(&p.detunings, false), (std::slice::from_ref(&p.wait), true)],
            ExperimentParams::RamseyContrast { waits, .. } => vec![(waits, true)],
            ExperimentParams::LineTrigger { delays, detunings, pulse_time, .. } => {
                vec![(delays, true), (detunings, false), (std::slice::from_ref(pulse_time), true)]
            }
            ExperimentParams::RamanSpectrum { detunings, delay } => vec![(detunings, false), (std::slice::from_ref(delay), true)],
            ExperimentParams::RamanVsDelay { delays, detunings } => vec![(delays, true), (detunings, false)],
            ExperimentParams::Lifetime { waits } | ExperimentParams::Heating { waits, .. } => vec![(waits, true)],
            ExperimentParams::MotionalEcho { wait, cutoffs, .. } => vec![(std::slice::from_ref(wait), true), (cutoffs, true)],
        };
        for (values, non_negative) in checks {
            check_values(kind, values, non_negative)?;
        }
        Ok(())
    }

    pub fn run(&self, cfg: &SimConfig, seed: u64) -> Result<ExperimentData> {
        self.validate()?;
        let shots = self.shots_per_point;
        let datasets = match &self.params {
            ExperimentParams::RabiFlop { durations } => {
                let tr = Transition::carrier(DEFAULT_PAIR.0, DEFAULT_PAIR.1);
                vec![dataset("flop", rabi_flop(cfg, tr, durations, shots, seed)?)]
            }
            ExperimentParams::RamseyFringe(p) => vec![dataset("fringe", ramsey_fringe(cfg, p, shots, seed)?)],
            ExperimentParams::RamseyContrast { waits, points } => {
                let (fringes, contrast) = ramsey_contrast(cfg, waits, *points, shots, seed)?;
                let mut out: Vec<Dataset> =
                    fringes.into_iter().zip(waits).map(|(f, t)| dataset(format!("fringe_{t}us"), f)).collect();
                out.push(dataset("contrast", contrast));
                out
            }
            ExperimentParams::LineTrigger { to, delays, detunings, pulse_time } => {
                let (spectra, centers) = line_trigger(cfg, *to, delays, detunings, *pulse_time, shots, seed)?;
                let mut out: Vec<Dataset> =
                    spectra.into_iter().zip(delays).map(|(s, d)| dataset(format!("spectrum_{d}ms"), s)).collect();
                out.push(dataset("centers", centers));
                out
            }
            ExperimentParams::RamanSpectrum { detunings, delay } => {
                vec![dataset("spectrum", raman_spectrum(cfg, detunings, *delay, shots, seed)?)]
            }
            ExperimentParams::RamanVsDelay { delays, detunings } => {
                let (spectra, centers) = raman_vs_delay(cfg, delays, detunings, shots, seed)?;
                let mut out: Vec<Dataset> =
                    spectra.into_iter().zip(delays).map(|(s, d)| dataset(format!("spectrum_{d}ms"), s)).collect();
                out.push(dataset("centers", centers));
                out
            }
            ExperimentParams::Lifetime { waits } => vec![dataset("survival", lifetime(cfg, waits, shots, seed)?)],
            ExperimentParams::Heating { mode, waits } => {
                vec![dataset(format!("phonons_{mode}"), heating(cfg, mode, waits, shots, seed)?)]
            }
            ExperimentParams::MotionalEcho { mode, wait, cutoffs } => {
                let (d, s) = echo_trace(cfg, mode, *wait, cutoffs, shots, seed)?;
                vec![dataset("trace_phase0", d), dataset("trace_phase_pi", s)]
            }
        };
        Ok(ExperimentData { kind: self.kind(), datasets })
    }
}
