//! Physical constants, Zeeman-level algebra, motional coupling matrix
//! elements and thermal phonon statistics for a single ⁴⁰Ca⁺ ion.
//!
//! Units used throughout the crate: time in μs, angular frequency in
//! rad/μs, laser detunings in Hz, magnetic fields in Gauss and Zeeman
//! shifts in kHz.

mod state;

pub use state::{Electronic, JointState};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the squared norm of a [`JointState`].
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Largest admissible truncated thermal tail mass.
pub const THERMAL_TAIL_MASS: f64 = 1e-6;

/// Trap and level-structure constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Bohr magneton over Planck's constant, MHz/Gauss.
    pub mu_b_over_h: f64,
    /// Landé factor of S₁/₂.
    pub g_s: f64,
    /// Landé factor of D₅/₂.
    pub g_d: f64,
    /// Static quantisation field, Gauss.
    pub b0: f64,
    /// Axial trap frequency / 2π, MHz.
    pub omega_ax: f64,
    /// Radial trap frequency / 2π, MHz.
    pub omega_rad: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu_b_over_h: 1.399624,
            g_s: 2.0,
            g_d: 6.0 / 5.0,
            b0: 2.4,
            omega_ax: 1.7,
            omega_rad: 5.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu_b_over_h", self.mu_b_over_h),
            ("b0", self.b0),
            ("omega_ax", self.omega_ax),
            ("omega_rad", self.omega_rad),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.g_s.is_finite() && self.g_d.is_finite()) {
            return Err(Error::invalid("g-factors must be finite"));
        }
        Ok(())
    }

    pub fn g_factor(&self, level: Level) -> f64 {
        match level {
            Level::S12 => self.g_s,
            Level::D52 => self.g_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    S12,
    D52,
}

impl Level {
    /// Twice the total angular momentum J.
    pub fn twice_j(self) -> i8 {
        match self {
            Level::S12 => 1,
            Level::D52 => 5,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Level::S12 => 'S',
            Level::D52 => 'D',
        }
    }
}

/// A Zeeman sublevel. The magnetic quantum number is stored doubled so
/// that half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZeemanState {
    level: Level,
    twice_m: i8,
}

impl ZeemanState {
    pub fn new(level: Level, twice_m: i8) -> Result<Self> {
        let j2 = level.twice_j();
        if twice_m.abs() > j2 || (twice_m - j2) % 2 != 0 {
            return Err(Error::InvalidZeemanState { level: level.letter(), twice_m });
        }
        Ok(Self { level, twice_m })
    }

    pub const S_MINUS_HALF: ZeemanState = ZeemanState { level: Level::S12, twice_m: -1 };
    pub const S_PLUS_HALF: ZeemanState = ZeemanState { level: Level::S12, twice_m: 1 };
    pub const D_MINUS_HALF: ZeemanState = ZeemanState { level: Level::D52, twice_m: -1 };
    pub const D_MINUS_FIVE_HALF: ZeemanState = ZeemanState { level: Level::D52, twice_m: -5 };

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn twice_m(&self) -> i8 {
        self.twice_m
    }

    pub fn m(&self) -> f64 {
        f64::from(self.twice_m) / 2.0
    }

    /// All sublevels of a fine-structure level, in increasing m.
    pub fn all(level: Level) -> impl Iterator<Item = ZeemanState> {
        let j2 = level.twice_j();
        (-j2..=j2).step_by(2).map(move |twice_m| ZeemanState { level, twice_m })
    }
}

impl fmt::Display for ZeemanState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}/2)", self.level.letter(), self.twice_m)
    }
}

/// Signed shift of the `from → to` transition frequency caused by a field
/// `b_gauss`, in kHz.
pub fn zeeman_shift(consts: &PhysicalConstants, from: ZeemanState, to: ZeemanState, b_gauss: f64) -> f64 {
    let gm = |s: ZeemanState| consts.g_factor(s.level) * s.m();
    consts.mu_b_over_h * 1e3 * (gm(to) - gm(from)) * b_gauss
}

/// Zeeman shift per unit field in Hz/mGauss (numerically kHz/Gauss).
pub fn zeeman_susceptibility(consts: &PhysicalConstants, from: ZeemanState, to: ZeemanState) -> f64 {
    zeeman_shift(consts, from, to, 1.0)
}

/// Quadrupole selection rule for S₁/₂ ↔ D₅/₂: |Δm| ≤ 2.
pub fn check_quadrupole(from: ZeemanState, to: ZeemanState) -> Result<()> {
    if from.level == to.level {
        return Err(Error::invalid(format!("{from} -> {to} is not an S-D transition")));
    }
    let dm2 = (i16::from(to.twice_m) - i16::from(from.twice_m)).abs();
    if dm2 > 4 {
        return Err(Error::SelectionRule { from, to });
    }
    Ok(())
}

/// Motional part of a laser coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sideband {
    Carrier,
    Blue,
    Red,
}

impl Sideband {
    /// Change of the phonon number of the active mode on excitation S → D.
    pub fn delta_n(self) -> i64 {
        match self {
            Sideband::Carrier => 0,
            Sideband::Blue => 1,
            Sideband::Red => -1,
        }
    }
}

/// Lamb-Dicke factor and Fock number of one motional mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOccupation {
    pub eta: f64,
    pub n: usize,
}

/// Generalised Laguerre polynomials L_k^alpha(x) for k = 0..=n_max.
pub fn laguerre_all(n_max: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    laguerre_all(n, alpha, x)[n]
}

/// ⟨n_to| exp(iη(a + a†)) |n_from⟩ with the overall factor i^|Δn| dropped.
pub fn motional_matrix_element(eta: f64, n_from: usize, n_to: usize) -> f64 {
    let (lo, hi) = if n_from <= n_to { (n_from, n_to) } else { (n_to, n_from) };
    let dn = hi - lo;
    let x = eta * eta;
    // sqrt(lo!/hi!) accumulated as a product to avoid overflow.
    let ratio: f64 = ((lo + 1)..=hi).map(|k| 1.0 / (k as f64).sqrt()).product();
    (-x / 2.0).exp() * eta.powi(dn as i32) * ratio * laguerre(lo, dn as f64, x)
}

/// Matrix elements ⟨n + Δ|exp(iη(a + a†))|n⟩ for n = 0..=n_max, with
/// Δ ∈ {0, +1}. Entries where the target Fock state is out of range are
/// still well defined and returned.
pub fn matrix_elements(eta: f64, n_max: usize, delta: usize) -> Vec<f64> {
    let x = eta * eta;
    let dw = (-x / 2.0).exp();
    match delta {
        0 => laguerre_all(n_max, 0.0, x).into_iter().map(|l| dw * l).collect(),
        1 => laguerre_all(n_max, 1.0, x)
            .into_iter()
            .enumerate()
            .map(|(n, l)| dw * eta * l / ((n + 1) as f64).sqrt())
            .collect(),
        _ => (0..=n_max).map(|n| motional_matrix_element(eta, n, n + delta)).collect(),
    }
}

/// Effective Rabi frequency of a transition for the given mode occupations.
///
/// `active` selects the mode whose phonon number changes on a sideband; all
/// other modes act as spectators through their Debye-Waller factors. A red
/// sideband on an empty active mode returns 0.
pub fn coupling_strength(omega0: f64, sideband: Sideband, modes: &[ModeOccupation], active: usize) -> f64 {
    let mut factor = 1.0;
    for (i, m) in modes.iter().enumerate() {
        let d = if i == active {
            match sideband {
                Sideband::Carrier => motional_matrix_element(m.eta, m.n, m.n),
                Sideband::Blue => motional_matrix_element(m.eta, m.n, m.n + 1),
                Sideband::Red => {
                    if m.n == 0 {
                        return 0.0;
                    }
                    motional_matrix_element(m.eta, m.n, m.n - 1)
                }
            }
        } else {
            motional_matrix_element(m.eta, m.n, m.n)
        };
        factor *= d;
    }
    omega0 * factor
}

/// Thermal (Bose-Einstein) phonon distribution, truncated at `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalDistribution {
    n_bar: f64,
    cutoff: usize,
}

impl ThermalDistribution {
    /// Builds the distribution, raising `min_cutoff` until the neglected
    /// tail mass is below [`THERMAL_TAIL_MASS`].
    pub fn new(n_bar: f64, min_cutoff: usize) -> Result<Self> {
        if !(n_bar.is_finite() && n_bar >= 0.0) {
            return Err(Error::invalid(format!("mean phonon number must be >= 0, got {n_bar}")));
        }
        let mut cutoff = min_cutoff;
        if n_bar > 0.0 {
            let q = n_bar / (1.0 + n_bar);
            // tail mass beyond cutoff is q^(cutoff+1)
            let needed = (THERMAL_TAIL_MASS.ln() / q.ln()).ceil() as usize;
            cutoff = cutoff.max(needed);
        }
        Ok(Self { n_bar, cutoff })
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn probability(&self, n: usize) -> f64 {
        thermal_probability(self.n_bar, n)
    }

    pub fn tail_mass(&self) -> f64 {
        if self.n_bar == 0.0 {
            return 0.0;
        }
        (self.n_bar / (1.0 + self.n_bar)).powi(self.cutoff as i32 + 1)
    }

    /// Draws a Fock number; draws beyond the cutoff are rejected.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.n_bar == 0.0 {
            return 0;
        }
        let ln_q = (self.n_bar / (1.0 + self.n_bar)).ln();
        loop {
            let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
            let n = (u.ln() / ln_q).floor();
            if n <= self.cutoff as f64 {
                return n as usize;
            }
        }
    }
}

/// p(n) = n̄ⁿ / (1 + n̄)ⁿ⁺¹.
pub fn thermal_probability(n_bar: f64, n: usize) -> f64 {
    if n_bar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let q = n_bar / (1.0 + n_bar);
    q.powi(n as i32) / (1.0 + n_bar)
}

/// Preparation of one motional mode at the start of a shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionalPrep {
    Thermal(ThermalDistribution),
    Fock(usize),
}

impl MotionalPrep {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            MotionalPrep::Thermal(d) => d.sample(rng),
            MotionalPrep::Fock(n) => *n,
        }
    }

    pub fn cutoff(&self) -> usize {
        match self {
            MotionalPrep::Thermal(d) => d.cutoff(),
            MotionalPrep::Fock(n) => *n,
        }
    }

    pub fn probability(&self, n: usize) -> f64 {
        match self {
            MotionalPrep::Thermal(d) => d.probability(n),
            MotionalPrep::Fock(m) => f64::from(u8::from(*m == n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(m2: i8) -> ZeemanState {
        ZeemanState::new(Level::S12, m2).unwrap()
    }
    fn d(m2: i8) -> ZeemanState {
        ZeemanState::new(Level::D52, m2).unwrap()
    }

    #[test]
    fn zeeman_state_validation() {
        assert!(ZeemanState::new(Level::S12, 3).is_err());
        assert!(ZeemanState::new(Level::S12, 0).is_err());
        assert!(ZeemanState::new(Level::D52, 7).is_err());
        assert!(ZeemanState::new(Level::D52, 2).is_err());
        assert_eq!(ZeemanState::all(Level::D52).count(), 6);
        assert_eq!(ZeemanState::all(Level::S12).count(), 2);
        assert_eq!(d(-5).to_string(), "D(-5/2)");
    }

    #[test]
    fn zeeman_susceptibilities() {
        let c = PhysicalConstants::default();
        assert_relative_eq!(zeeman_shift(&c, s(-1), s(1), 1e-3), 2.799248, epsilon = 1e-9);
        assert_relative_eq!(zeeman_shift(&c, d(-5), d(3), 1e-3), 6.7181952, epsilon = 1e-9);
        assert_eq!(zeeman_shift(&c, d(3), d(3), 0.7), 0.0);
        let dm0 = zeeman_shift(&c, s(-1), d(-1), 1e-3);
        let dm2 = zeeman_shift(&c, s(-1), d(-5), 1e-3);
        assert_relative_eq!(dm0, 0.5598496, epsilon = 1e-9);
        assert_relative_eq!(dm2.abs() / dm0.abs(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn selection_rule() {
        assert!(check_quadrupole(s(-1), d(-5)).is_ok());
        assert!(check_quadrupole(s(1), d(-5)).is_err());
        assert!(check_quadrupole(s(-1), s(1)).is_err());
    }

    #[test]
    fn coupling_examples() {
        let omega0 = 1.3;
        let zero = [ModeOccupation { eta: 0.0, n: 5 }];
        assert_eq!(coupling_strength(omega0, Sideband::Carrier, &zero, 0), omega0);
        let m = [ModeOccupation { eta: 0.068, n: 0 }];
        assert_relative_eq!(
            coupling_strength(1.0, Sideband::Carrier, &m, 0),
            (-0.068f64 * 0.068 / 2.0).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(coupling_strength(1.0, Sideband::Carrier, &m, 0), 0.9976907, epsilon = 1e-7);
        assert_relative_eq!(coupling_strength(1.0, Sideband::Blue, &m, 0), 0.067843, epsilon = 5e-7);
        assert_eq!(coupling_strength(1.0, Sideband::Red, &m, 0), 0.0);
    }

    #[test]
    fn laguerre_known_values() {
        // L_2(x) = (x² - 4x + 2)/2, L_3^1(x) = (-x³ + 12x² - 36x + 24)/6
        let x = 0.37;
        assert_relative_eq!(laguerre(2, 0.0, x), (x * x - 4.0 * x + 2.0) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(
            laguerre(3, 1.0, x),
            (-x * x * x + 12.0 * x * x - 36.0 * x + 24.0) / 6.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn matrix_elements_agree_with_direct_form() {
        let eta = 0.21;
        let carrier = matrix_elements(eta, 30, 0);
        let blue = matrix_elements(eta, 30, 1);
        for n in 0..=30 {
            assert_relative_eq!(carrier[n], motional_matrix_element(eta, n, n), epsilon = 1e-13);
            assert_relative_eq!(blue[n], motional_matrix_element(eta, n, n + 1), epsilon = 1e-13);
            // red sideband is the transpose of blue
            assert_relative_eq!(
                motional_matrix_element(eta, n + 1, n),
                motional_matrix_element(eta, n, n + 1),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn displacement_matrix_is_unitary_column() {
        // Σ_m |⟨m|D|n⟩|² = 1
        let eta = 0.3;
        for n in [0usize, 3, 10] {
            let total: f64 = (0..120).map(|m| motional_matrix_element(eta, n, m).powi(2)).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn small_eta_series() {
        let eta = 1e-4;
        let m = [ModeOccupation { eta, n: 0 }];
        let c = coupling_strength(1.0, Sideband::Carrier, &m, 0);
        let b = coupling_strength(1.0, Sideband::Blue, &m, 0);
        assert!((c - 1.0).abs() / 1.0 < 1e-7);
        assert!((b - eta).abs() / eta < 1e-7);
    }

    #[test]
    fn lamb_dicke_carrier_approximation() {
        for n in 0..=20usize {
            for &eta in &[0.01, 0.05, 0.1] {
                let m = [ModeOccupation { eta, n }];
                let exact = coupling_strength(1.0, Sideband::Carrier, &m, 0);
                let approx = 1.0 - eta * eta * (n as f64 + 0.5);
                let bound = 2.0 * eta.powi(4) * ((n * n) as f64 + 2.0 * n as f64 + 1.0);
                assert!((exact - approx).abs() <= bound, "n={n} eta={eta}");
            }
        }
    }

    #[test]
    fn thermal_probabilities() {
        assert_eq!(thermal_probability(0.0, 0), 1.0);
        assert_eq!(thermal_probability(15.0, 0), 0.0625);
        let total: f64 = (0..2000).map(|n| thermal_probability(15.0, n)).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thermal_cutoff_is_raised() {
        let dist = ThermalDistribution::new(15.0, 40).unwrap();
        assert!(dist.cutoff() > 40);
        assert!(dist.tail_mass() < THERMAL_TAIL_MASS);
        let cold = ThermalDistribution::new(0.05, 40).unwrap();
        assert_eq!(cold.cutoff(), 40);
        assert!(ThermalDistribution::new(-1.0, 4).is_err());
    }

    #[test]
    fn thermal_sampling_mean() {
        let n_bar = 7.0;
        let dist = ThermalDistribution::new(n_bar, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mean = (0..draws).map(|_| dist.sample(&mut rng) as f64).sum::<f64>() / draws as f64;
        let sigma = (n_bar * (n_bar + 1.0) / draws as f64).sqrt();
        assert!((mean - n_bar).abs() < 3.0 * sigma, "mean {mean}");
    }

    proptest! {
        #[test]
        fn zeeman_antisymmetric_and_linear(
            a in 0usize..8, b in 0usize..8, field in -5.0f64..5.0, k in -3.0f64..3.0
        ) {
            let all: Vec<_> = ZeemanState::all(Level::S12).chain(ZeemanState::all(Level::D52)).collect();
            let c = PhysicalConstants::default();
            let (x, y) = (all[a], all[b]);
            let fwd = zeeman_shift(&c, x, y, field);
            let rev = zeeman_shift(&c, y, x, field);
            prop_assert!((fwd + rev).abs() <= 1e-12 * fwd.abs().max(1e-300));
            let scaled = zeeman_shift(&c, x, y, k * field);
            prop_assert!((scaled - k * fwd).abs() <= 1e-12 * scaled.abs().max(1e-12));
        }
    }
}
