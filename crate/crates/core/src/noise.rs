//! Noise realisations: 50 Hz magnetic field, per-shot laser frequency and
//! intensity offsets, white frequency noise, and the open-system jump
//! processes (D₅/₂ decay and motional heating) applied during waits.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{Electronic, JointState};

/// Mains frequency in cycles per ms.
pub const LINE_FREQUENCY_PER_MS: f64 = 0.05;

/// Mains period, ms.
pub const LINE_PERIOD_MS: f64 = 20.0;

/// Lower clamp of the per-shot intensity factor.
pub const MIN_INTENSITY_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinePhaseMode {
    /// Every shot starts at the same mains phase (`line_phase`).
    Triggered,
    /// The mains phase is uniform on [0, 2π) shot to shot.
    Random,
}

/// Magnetic field noise. `amp_50hz` is the amplitude of the 50 Hz sine (not
/// its rms value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BFieldNoise {
    /// mGauss.
    pub amp_50hz: f64,
    pub line_phase_mode: LinePhaseMode,
    /// Mains phase at the trigger, radians (triggered mode only).
    pub line_phase: f64,
    /// Standard deviation of a per-shot static field offset, mGauss.
    pub drift_sigma: f64,
    /// Suppression of the 50 Hz component by active compensation (≥ 1).
    pub compensation_factor: f64,
}

impl Default for BFieldNoise {
    fn default() -> Self {
        Self {
            amp_50hz: 1.0,
            line_phase_mode: LinePhaseMode::Triggered,
            line_phase: 0.0,
            drift_sigma: 0.0,
            compensation_factor: 1.0,
        }
    }
}

impl BFieldNoise {
    pub fn quiet() -> Self {
        Self { amp_50hz: 0.0, ..Self::default() }
    }

    pub fn effective_amplitude(&self) -> f64 {
        self.amp_50hz / self.compensation_factor
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_50hz.is_finite() && self.amp_50hz >= 0.0) {
            return Err(Error::invalid("bfield.amp_50hz must be >= 0"));
        }
        if !(self.compensation_factor.is_finite() && self.compensation_factor >= 1.0) {
            return Err(Error::invalid("bfield.compensation_factor must be >= 1"));
        }
        if !(self.drift_sigma.is_finite() && self.drift_sigma >= 0.0) {
            return Err(Error::invalid("bfield.drift_sigma must be >= 0"));
        }
        if !self.line_phase.is_finite() {
            return Err(Error::invalid("bfield.line_phase must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityLaw {
    /// Rabi frequency scales with the square root of the intensity factor.
    Sqrt,
    /// The intensity factor multiplies the Rabi frequency directly.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserNoise {
    /// Std of the quasi-static per-shot laser frequency offset, Hz.
    pub sigma_shot: f64,
    /// FWHM of white frequency noise, Hz.
    pub lorentzian_linewidth: f64,
    /// Relative std of the per-shot intensity.
    pub intensity_sigma_rel: f64,
    pub intensity_law: IntensityLaw,
}

/// √2 / (2π · 0.94 ms) expressed in Hz: the quasi-static offset whose
/// Gaussian Ramsey decay has a 1/e time of 0.94 ms.
pub const DEFAULT_SIGMA_SHOT_HZ: f64 = 240.0;

impl Default for LaserNoise {
    fn default() -> Self {
        Self {
            sigma_shot: DEFAULT_SIGMA_SHOT_HZ,
            lorentzian_linewidth: 0.0,
            intensity_sigma_rel: 0.03,
            intensity_law: IntensityLaw::Sqrt,
        }
    }
}

impl LaserNoise {
    pub fn quiet() -> Self {
        Self { sigma_shot: 0.0, lorentzian_linewidth: 0.0, intensity_sigma_rel: 0.0, intensity_law: IntensityLaw::Sqrt }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("laser.sigma_shot", self.sigma_shot),
            ("laser.lorentzian_linewidth", self.lorentzian_linewidth),
            ("laser.intensity_sigma_rel", self.intensity_sigma_rel),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Multiplier of the bare Rabi frequency for a given intensity factor.
    pub fn rabi_scale(&self, intensity_factor: f64) -> f64 {
        match self.intensity_law {
            IntensityLaw::Sqrt => intensity_factor.sqrt(),
            IntensityLaw::Linear => intensity_factor,
        }
    }
}

/// Natural lifetime of D₅/₂ assumed when none is configured, ms.
pub const DEFAULT_D_LIFETIME_MS: f64 = 1168.0;
/// Effective lifetime observed with residual 854 nm light, ms.
pub const OBSERVED_D_LIFETIME_MS: f64 = 1011.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSystemRates {
    /// Natural D₅/₂ lifetime, ms.
    pub d_lifetime: f64,
    /// Extra D → S pumping by residual 854 nm light, 1/ms.
    pub leak_854_rate: f64,
    /// Heating rate d⟨n⟩/dt per motional mode, phonons/ms.
    pub heating: BTreeMap<String, f64>,
    /// Pure motional dephasing rate, 1/ms.
    pub motional_dephasing: f64,
}

impl Default for OpenSystemRates {
    fn default() -> Self {
        let mut heating = BTreeMap::new();
        heating.insert("axial".to_string(), 1.0 / 190.0);
        heating.insert("radial".to_string(), 1.0 / 70.0);
        Self {
            d_lifetime: DEFAULT_D_LIFETIME_MS,
            leak_854_rate: 1.0 / OBSERVED_D_LIFETIME_MS - 1.0 / DEFAULT_D_LIFETIME_MS,
            heating,
            motional_dephasing: 0.0,
        }
    }
}

impl OpenSystemRates {
    pub fn closed() -> Self {
        Self { d_lifetime: f64::INFINITY, leak_854_rate: 0.0, heating: BTreeMap::new(), motional_dephasing: 0.0 }
    }

    /// Total D → S rate, 1/ms.
    pub fn effective_decay_rate(&self) -> f64 {
        1.0 / self.d_lifetime + self.leak_854_rate
    }

    pub fn heating_rate(&self, mode: &str) -> f64 {
        self.heating.get(mode).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_lifetime > 0.0) || self.d_lifetime.is_nan() {
            return Err(Error::invalid("rates.d_lifetime must be > 0"));
        }
        if !(self.leak_854_rate.is_finite() && self.leak_854_rate >= 0.0) {
            return Err(Error::invalid("rates.leak_854_rate must be >= 0"));
        }
        if !(self.motional_dephasing.is_finite() && self.motional_dephasing >= 0.0) {
            return Err(Error::invalid("rates.motional_dephasing must be >= 0"));
        }
        for (mode, r) in &self.heating {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::invalid(format!("rates.heating.{mode} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Static noise parameters drawn from once per shot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub bfield: BFieldNoise,
    pub laser: LaserNoise,
}

impl NoiseConfig {
    pub fn quiet() -> Self {
        Self { bfield: BFieldNoise::quiet(), laser: LaserNoise::quiet() }
    }
}

/// Per-shot noise realisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotNoise {
    /// Laser frequency offset, Hz.
    pub laser_offset: f64,
    pub intensity_factor: f64,
    /// Mains phase at the line trigger, radians.
    pub b_phase: f64,
    /// Static field offset, mGauss.
    pub drift_offset: f64,
}

impl ShotNoise {
    pub const NONE: ShotNoise = ShotNoise { laser_offset: 0.0, intensity_factor: 1.0, b_phase: 0.0, drift_offset: 0.0 };

    /// Always consumes the same number of draws from `rng`, whatever the
    /// configuration, so later draws line up across configurations.
    pub fn draw<R: Rng + ?Sized>(cfg: &NoiseConfig, rng: &mut R) -> Self {
        let z_offset: f64 = StandardNormal.sample(rng);
        let z_intensity: f64 = StandardNormal.sample(rng);
        let u_phase: f64 = rng.random();
        let z_drift: f64 = StandardNormal.sample(rng);
        let b_phase = match cfg.bfield.line_phase_mode {
            LinePhaseMode::Triggered => cfg.bfield.line_phase,
            LinePhaseMode::Random => TAU * u_phase,
        };
        Self {
            laser_offset: cfg.laser.sigma_shot * z_offset,
            intensity_factor: (1.0 + cfg.laser.intensity_sigma_rel * z_intensity).max(MIN_INTENSITY_FACTOR),
            b_phase,
            drift_offset: cfg.bfield.drift_sigma * z_drift,
        }
    }
}

/// The random stream owned by one shot. Depends only on `(master_seed, shot_index)`.
pub fn shot_rng(master_seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shot_index);
    rng
}

/// Independent master seed for sub-experiment `k` of a run (splitmix64).
pub fn derive_seed(master_seed: u64, k: u64) -> u64 {
    let mut z = master_seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_shot_noise(cfg: &NoiseConfig, master_seed: u64, shot_index: u64) -> ShotNoise {
    ShotNoise::draw(cfg, &mut shot_rng(master_seed, shot_index))
}

/// Field deviation from B₀ at absolute time `t_abs_ms` after the trigger, mGauss.
pub fn field_deviation_mg(t_abs_ms: f64, shot: &ShotNoise, cfg: &BFieldNoise) -> f64 {
    cfg.effective_amplitude() * (TAU * LINE_FREQUENCY_PER_MS * t_abs_ms + shot.b_phase).sin() + shot.drift_offset
}

/// ∫ field deviation dt over [t0, t1] (absolute ms), in mGauss·ms.
pub fn field_deviation_integral(t0_ms: f64, t1_ms: f64, shot: &ShotNoise, cfg: &BFieldNoise) -> f64 {
    let w = TAU * LINE_FREQUENCY_PER_MS;
    let sine = if cfg.effective_amplitude() == 0.0 {
        0.0
    } else {
        cfg.effective_amplitude() * ((w * t0_ms + shot.b_phase).cos() - (w * t1_ms + shot.b_phase).cos()) / w
    };
    sine + shot.drift_offset * (t1_ms - t0_ms)
}

/// Magnetic field in Gauss at `t_ms` after shot start.
pub fn sample_bfield(t_ms: f64, trigger_delay_ms: f64, b0: f64, shot: &ShotNoise, cfg: &BFieldNoise) -> f64 {
    b0 + 1e-3 * field_deviation_mg(trigger_delay_ms + t_ms, shot, cfg)
}

/// Multiplies the D amplitudes by a random phase of variance 4π·ν·t
/// (white frequency noise of FWHM `linewidth_hz` acting for `duration_ms`).
pub fn white_noise_dephase<R: Rng + ?Sized>(state: &mut JointState, duration_ms: f64, linewidth_hz: f64, rng: &mut R) {
    if linewidth_hz <= 0.0 || duration_ms <= 0.0 {
        return;
    }
    let variance = 4.0 * PI * linewidth_hz * duration_ms * 1e-3;
    let z: f64 = StandardNormal.sample(rng);
    let phase = Complex64::from_polar(1.0, variance.sqrt() * z);
    for a in state.amplitudes_mut().iter_mut().skip(1).step_by(2) {
        *a *= phase;
    }
}

/// Parameters of the dynamics between pulses, in per-μs units.
pub struct WaitDynamics<'a> {
    /// D slot → S slot jump rate.
    pub decay_rate: f64,
    /// Heating rate d⟨n⟩/dt of the tracked mode.
    pub heating_rate: f64,
    pub motional_dephasing: f64,
    /// Relative D-S phase accumulated over [a, b] μs after the wait starts.
    pub free_phase: &'a dyn Fn(f64, f64) -> f64,
}

impl WaitDynamics<'_> {
    fn kappa(&self, e_is_d: bool, n: usize) -> f64 {
        self.heating_rate * (2 * n + 1) as f64 + if e_is_d { self.decay_rate } else { 0.0 }
    }

    fn is_dissipative(&self) -> bool {
        self.decay_rate > 0.0 || self.heating_rate > 0.0
    }
}

fn no_phase(_: f64, _: f64) -> f64 {
    0.0
}

/// Non-Hermitian no-jump propagation over `dt` μs starting at `t` μs.
fn drift(state: &mut JointState, dynm: &WaitDynamics<'_>, t: f64, dt: f64) {
    let phi = (dynm.free_phase)(t, t + dt);
    let rot_s = Complex64::from_polar(1.0, -phi / 2.0);
    let rot_d = Complex64::from_polar(1.0, phi / 2.0);
    let dissipative = dynm.is_dissipative();
    for (j, a) in state.amplitudes_mut().iter_mut().enumerate() {
        let is_d = j % 2 == 1;
        let mut f = if is_d { rot_d } else { rot_s };
        if dissipative {
            f *= (-dynm.kappa(is_d, j / 2) * dt / 2.0).exp();
        }
        *a *= f;
    }
}

/// Waiting time to the next jump: solves Σ w_j exp(-κ_j τ) = u by Newton's
/// method, which converges monotonically for this convex decreasing function.
fn jump_time(weights: &[(f64, f64)], u: f64, horizon: f64) -> Option<f64> {
    let survival = |tau: f64| weights.iter().map(|&(w, k)| w * (-k * tau).exp()).sum::<f64>();
    if survival(horizon) >= u {
        return None;
    }
    let mut tau = 0.0f64;
    for _ in 0..200 {
        let (f, df) = weights.iter().fold((-u, 0.0), |(f, df), &(w, k)| {
            let e = w * (-k * tau).exp();
            (f + e, df - k * e)
        });
        if df == 0.0 {
            break;
        }
        let step = f / df;
        tau -= step;
        if step.abs() <= 1e-13 * tau.max(1e-9) {
            break;
        }
    }
    Some(tau.clamp(0.0, horizon))
}

fn apply_jump<R: Rng + ?Sized>(state: &mut JointState, dynm: &WaitDynamics<'_>, rng: &mut R) -> Result<()> {
    let n_max = state.n_max();
    let mut decay = 0.0;
    let mut up = 0.0;
    let mut down = 0.0;
    for n in 0..=n_max {
        let pd = state.amplitude(Electronic::D, n).norm_sqr();
        let p = pd + state.amplitude(Electronic::S, n).norm_sqr();
        decay += dynm.decay_rate * pd;
        up += dynm.heating_rate * (n + 1) as f64 * p;
        down += dynm.heating_rate * n as f64 * p;
    }
    let pick = rng.random::<f64>() * (decay + up + down);
    let amps = state.amplitudes_mut();
    if pick < decay {
        for n in 0..=n_max {
            amps[2 * n] = amps[2 * n + 1];
            amps[2 * n + 1] = Complex64::new(0.0, 0.0);
        }
    } else if pick < decay + up {
        if state.touches_cutoff() {
            state.ensure_n_max(n_max + 1);
        }
        let amps = state.amplitudes_mut();
        let top = amps.len() / 2 - 1;
        for n in (0..top).rev() {
            let k = ((n + 1) as f64).sqrt();
            amps[2 * (n + 1)] = amps[2 * n] * k;
            amps[2 * (n + 1) + 1] = amps[2 * n + 1] * k;
        }
        amps[0] = Complex64::new(0.0, 0.0);
        amps[1] = Complex64::new(0.0, 0.0);
    } else {
        for n in 1..=n_max {
            let k = (n as f64).sqrt();
            amps[2 * (n - 1)] = amps[2 * n] * k;
            amps[2 * (n - 1) + 1] = amps[2 * n + 1] * k;
        }
        amps[2 * n_max] = Complex64::new(0.0, 0.0);
        amps[2 * n_max + 1] = Complex64::new(0.0, 0.0);
    }
    state.normalize()
}

/// Quantum-jump propagation of the tracked mode and electronic state over
/// a laser-free interval of `duration_us`.
///
/// Heating uses the high-temperature bath unravelling with jump operators
/// √r·a† and √r·a, which gives d⟨n⟩/dt = r exactly and damps the |n⟩-|m⟩
/// coherence at r(n + m + 1).
pub fn evolve_wait<R: Rng + ?Sized>(
    state: &mut JointState,
    duration_us: f64,
    dynm: &WaitDynamics<'_>,
    rng: &mut R,
) -> Result<()> {
    if duration_us <= 0.0 {
        return Ok(());
    }
    let mut t = 0.0;
    if dynm.is_dissipative() {
        let mut weights = Vec::new();
        loop {
            weights.clear();
            for (j, a) in state.amplitudes().iter().enumerate() {
                let w = a.norm_sqr();
                if w > 0.0 {
                    weights.push((w, dynm.kappa(j % 2 == 1, j / 2)));
                }
            }
            let u = 1.0 - rng.random::<f64>();
            match jump_time(&weights, u, duration_us - t) {
                None => break,
                Some(tau) => {
                    drift(state, dynm, t, tau);
                    t += tau;
                    apply_jump(state, dynm, rng)?;
                }
            }
        }
    }
    drift(state, dynm, t, duration_us - t);
    state.normalize()?;
    if dynm.motional_dephasing > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        let theta = (2.0 * dynm.motional_dephasing * duration_us).sqrt() * z;
        for (j, a) in state.amplitudes_mut().iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, theta * (j / 2) as f64);
        }
    }
    Ok(())
}

/// Open-system evolution with no coherent phase: D → S decay plus heating
/// of the tracked motional `mode` over `duration_ms`.
pub fn evolve_open<R: Rng + ?Sized>(
    state: &JointState,
    duration_ms: f64,
    rates: &OpenSystemRates,
    mode: &str,
    rng: &mut R,
) -> Result<JointState> {
    let mut out = state.clone();
    let dynm = WaitDynamics {
        decay_rate: rates.effective_decay_rate() * 1e-3,
        heating_rate: rates.heating_rate(mode) * 1e-3,
        motional_dephasing: rates.motional_dephasing * 1e-3,
        free_phase: &no_phase,
    };
    evolve_wait(&mut out, duration_ms * 1e3, &dynm, rng)?;
    Ok(out)
}

/// Birth-death heating of a spectator mode treated as a classical Fock
/// number: n → n+1 at r(n+1), n → n−1 at r·n.
pub fn heat_classical<R: Rng + ?Sized>(mut n: usize, rate: f64, duration: f64, rng: &mut R) -> usize {
    if rate <= 0.0 || duration <= 0.0 {
        return n;
    }
    let mut t = 0.0;
    loop {
        let total = rate * (2 * n + 1) as f64;
        let u: f64 = 1.0 - rng.random::<f64>();
        t += -u.ln() / total;
        if t > duration {
            return n;
        }
        if rng.random::<f64>() * total < rate * (n + 1) as f64 {
            n += 1;
        } else {
            n -= 1;
        }
    }
}
