use num_complex::Complex64;

use super::NORM_TOLERANCE;
use crate::error::{Error, Result};

/// Electronic slot of the two-level register.
///
/// `S` is the lower and `D` the upper sublevel of the addressed pair. For a
/// ground-state Raman pair the `D` slot holds S₁/₂(m = +1/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Electronic {
    S,
    D,
}

impl Electronic {
    fn offset(self) -> usize {
        match self {
            Electronic::S => 0,
            Electronic::D => 1,
        }
    }
}

/// Amplitudes over {S, D} ⊗ {|0⟩ … |n_max⟩} of the tracked motional mode.
///
/// Storage is interleaved (`2n + e`) so the Fock cutoff can grow in place.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    amps: Vec<Complex64>,
}

impl JointState {
    /// |e, n⟩ with Fock cutoff `n_max` (raised to `n` if needed).
    pub fn basis(e: Electronic, n: usize, n_max: usize) -> Self {
        let n_max = n_max.max(n);
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * (n_max + 1)];
        amps[2 * n + e.offset()] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    /// Builds a state from `(e, n, amplitude)` triples and normalises it.
    pub fn from_components(n_max: usize, components: &[(Electronic, usize, Complex64)]) -> Result<Self> {
        let top = components.iter().map(|c| c.1).max().unwrap_or(0).max(n_max);
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * (top + 1)];
        for &(e, n, a) in components {
            amps[2 * n + e.offset()] += a;
        }
        let mut state = Self { amps };
        let norm = state.norm_sqr();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("state has zero or non-finite norm"));
        }
        state.scale(1.0 / norm.sqrt());
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        self.amps.len() / 2 - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, e: Electronic, n: usize) -> Complex64 {
        self.amps.get(2 * n + e.offset()).copied().unwrap_or_default()
    }

    pub fn amplitude_mut(&mut self, e: Electronic, n: usize) -> &mut Complex64 {
        self.ensure_n_max(n);
        &mut self.amps[2 * n + e.offset()]
    }

    /// Raw interleaved amplitudes (`2n` is S, `2n + 1` is D).
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn ensure_n_max(&mut self, n_max: usize) {
        if n_max > self.n_max() {
            self.amps.resize(2 * (n_max + 1), Complex64::new(0.0, 0.0));
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.amps {
            *a *= k;
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Normalization { norm });
        }
        self.scale(1.0 / norm.sqrt());
        Ok(())
    }

    /// Fails if the squared norm has drifted from 1 by more than [`NORM_TOLERANCE`].
    pub fn check_norm(&self) -> Result<()> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
            return Err(Error::Normalization { norm });
        }
        Ok(())
    }

    pub fn population(&self, e: Electronic) -> f64 {
        self.amps.iter().skip(e.offset()).step_by(2).map(|a| a.norm_sqr()).sum()
    }

    /// Probability of the tracked mode being in |n⟩, summed over electronic states.
    pub fn fock_population(&self, n: usize) -> f64 {
        self.amplitude(Electronic::S, n).norm_sqr() + self.amplitude(Electronic::D, n).norm_sqr()
    }

    pub fn mean_phonons(&self) -> f64 {
        (0..=self.n_max()).map(|n| n as f64 * self.fock_population(n)).sum()
    }

    /// Whether any amplitude sits at the current cutoff.
    pub fn touches_cutoff(&self) -> bool {
        let n = self.n_max();
        self.fock_population(n) > 0.0
    }

    /// |⟨self|other⟩|².
    pub fn overlap(&self, other: &JointState) -> f64 {
        let len = self.amps.len().min(other.amps.len());
        let inner: Complex64 = (0..len).map(|i| self.amps[i].conj() * other.amps[i]).sum();
        inner.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_dimension_and_populations() {
        let st = JointState::basis(Electronic::D, 3, 40);
        assert_eq!(st.dim(), 82);
        assert_eq!(st.n_max(), 40);
        assert_eq!(st.population(Electronic::D), 1.0);
        assert_eq!(st.mean_phonons(), 3.0);
        st.check_norm().unwrap();
    }

    #[test]
    fn grows_in_place() {
        let mut st = JointState::basis(Electronic::S, 2, 2);
        assert!(st.touches_cutoff());
        *st.amplitude_mut(Electronic::D, 5) = Complex64::new(0.0, 0.0);
        assert_eq!(st.n_max(), 5);
        assert_eq!(st.amplitude(Electronic::S, 2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn from_components_normalises() {
        let h = Complex64::new(1.0, 0.0);
        let st = JointState::from_components(4, &[(Electronic::D, 0, h), (Electronic::D, 1, h)]).unwrap();
        st.check_norm().unwrap();
        assert!((st.mean_phonons() - 0.5).abs() < 1e-15);
        assert!(JointState::from_components(4, &[]).is_err());
    }
}
