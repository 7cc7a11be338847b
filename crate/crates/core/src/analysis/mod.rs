//! Least-squares fits for every measured quantity: line centres, Ramsey
//! fringes, contrast decay, 50 Hz drift, lifetimes and heating rates.

pub mod optimize;

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::LINE_FREQUENCY_PER_MS;
use crate::pulse::{Observable, ScanResult};
use optimize::{covariance_from_hessian, hessian, multi_start, NelderMead};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// 1σ uncertainty.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub params: Vec<ParamEstimate>,
    /// Weighted sum of squared residuals (plain sum when unweighted).
    pub residual_ss: f64,
    pub dof: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn param(&self, name: &str) -> Option<&ParamEstimate> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of a parameter; panics if the model has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("fit '{}' has no parameter '{name}'", self.model)).value
    }

    pub fn error(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("fit '{}' has no parameter '{name}'", self.model)).error
    }

    pub fn reduced_residual(&self) -> f64 {
        if self.dof == 0 {
            f64::INFINITY
        } else {
            self.residual_ss / self.dof as f64
        }
    }

    fn push(&mut self, name: &str, value: f64, error: f64) {
        self.params.push(ParamEstimate { name: name.to_string(), value, error: error.abs() });
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model        {}", self.model)?;
        writeln!(f, "converged    {}", if self.converged { "yes" } else { "no" })?;
        writeln!(f, "residual_ss  {:.6e}", self.residual_ss)?;
        writeln!(f, "dof          {}", self.dof)?;
        writeln!(f, "{:<20} {:>16} {:>16}", "parameter", "value", "error")?;
        for p in &self.params {
            writeln!(f, "{:<20} {:>16.8e} {:>16.8e}", p.name, p.value, p.error)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// x/y data with optional 1σ errors on y.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    /// Shots behind each y when y is a binomial fraction. Fits then refine
    /// the weights with σ taken from the fitted model instead of from ŷ.
    pub shots: Option<Vec<usize>>,
}

/// Binomial error with the regulariser ε = 1/(4N²), so that p̂ ∈ {0, 1}
/// still gets a finite weight.
pub fn binomial_sigma(p: f64, shots: usize) -> f64 {
    let n = shots as f64;
    ((p * (1.0 - p) + 1.0 / (4.0 * n * n)) / n).sqrt()
}

impl Series {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, sigma: None, shots: None }
    }

    pub fn weighted(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Self {
        Self { x, y, sigma: Some(sigma), shots: None }
    }

    pub fn binomial(x: Vec<f64>, p: Vec<f64>, shots: &[usize]) -> Self {
        let sigma = p.iter().zip(shots).map(|(&p, &n)| binomial_sigma(p, n)).collect();
        Self { x, y: p, sigma: Some(sigma), shots: Some(shots.to_vec()) }
    }

    /// Dark probabilities get binomial weights; every other observable uses
    /// its reported standard error.
    pub fn from_scan(r: &ScanResult) -> Self {
        let x = r.xs();
        let y = r.ys();
        match r.observable {
            Observable::DarkProbability => {
                let shots: Vec<usize> = r.points.iter().map(|p| p.shots).collect();
                Self::binomial(x, y, &shots)
            }
            _ => {
                let floor = r.points.iter().map(|p| p.std_err).fold(0.0, f64::max).max(1e-12) * 1e-3;
                Self::weighted(x, y, r.points.iter().map(|p| p.std_err.max(floor)).collect())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn check(&self, min_points: usize, what: &str) -> Result<()> {
        if self.x.len() != self.y.len()
            || self.sigma.as_ref().is_some_and(|s| s.len() != self.x.len())
            || self.shots.as_ref().is_some_and(|n| n.len() != self.x.len() || n.contains(&0))
        {
            return Err(Error::Fit(format!("{what}: x, y and sigma lengths differ")));
        }
        if self.x.len() < min_points {
            return Err(Error::Fit(format!("{what} needs at least {min_points} points, got {}", self.x.len())));
        }
        let finite = self.x.iter().chain(&self.y).all(|v| v.is_finite())
            && self.sigma.as_ref().is_none_or(|s| s.iter().all(|v| v.is_finite() && *v > 0.0));
        if !finite {
            return Err(Error::Fit(format!("{what}: data must be finite with positive errors")));
        }
        Ok(())
    }

    /// Points sorted by (x, y, σ) so fits do not depend on input order.
    fn sorted(&self) -> Series {
        let mut idx: Vec<usize> = (0..self.x.len()).collect();
        let s = |i: usize| self.sigma.as_ref().map_or(0.0, |s| s[i]);
        idx.sort_by(|&a, &b| {
            self.x[a].total_cmp(&self.x[b]).then(self.y[a].total_cmp(&self.y[b])).then(s(a).total_cmp(&s(b)))
        });
        Series {
            x: idx.iter().map(|&i| self.x[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            sigma: self.sigma.as_ref().map(|sg| idx.iter().map(|&i| sg[i]).collect()),
            shots: self.shots.as_ref().map(|n| idx.iter().map(|&i| n[i]).collect()),
        }
    }

    fn weight(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| 1.0 / (s[i] * s[i]))
    }

    fn span(&self) -> f64 {
        let lo = self.x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

type ModelFn<'a> = &'a dyn Fn(&[f64], f64) -> f64;

struct Fit {
    x: Vec<f64>,
    cov: Option<nalgebra::DMatrix<f64>>,
    chi2: f64,
    dof: usize,
    converged: bool,
}

fn chi2(data: &Series, model: ModelFn<'_>, p: &[f64]) -> f64 {
    (0..data.len()).map(|i| data.weight(i) * (data.y[i] - model(p, data.x[i])).powi(2)).sum()
}

/// Rounds of model-based reweighting for binomial data.
const REWEIGHT_ROUNDS: usize = 3;

/// Non-linear least squares from several starts. Unweighted fits scale
/// the covariance by the residual variance. Binomial data are refitted
/// with σ² = p(1 − p)/N evaluated on the (smoothed) model, which keeps
/// points with ŷ ∈ {0, 1} from dominating.
fn least_squares(data: &Series, model: ModelFn<'_>, starts: &[Vec<f64>], step: &[f64], bounds: &[(f64, f64)]) -> Fit {
    let mut fit = least_squares_once(data, model, starts, step, bounds);
    let Some(shots) = &data.shots else { return fit };
    for _ in 0..REWEIGHT_ROUNDS {
        let sigma = (0..data.len())
            .map(|i| {
                // Laplace smoothing keeps a finite floor where the model reaches 0 or 1
                let n = shots[i] as f64;
                let p = (n * model(&fit.x, data.x[i]).clamp(0.0, 1.0) + 1.0) / (n + 2.0);
                (p * (1.0 - p) / n).sqrt()
            })
            .collect();
        let rw = Series { sigma: Some(sigma), ..data.clone() };
        let mut from = vec![fit.x.clone()];
        from.extend(starts.iter().cloned());
        fit = least_squares_once(&rw, model, &from, step, bounds);
    }
    fit
}

fn least_squares_once(
    data: &Series,
    model: ModelFn<'_>,
    starts: &[Vec<f64>],
    step: &[f64],
    bounds: &[(f64, f64)],
) -> Fit {
    let objective = |p: &[f64]| chi2(data, model, p);
    let m = multi_start(&NelderMead::default(), &objective, starts, step, bounds);
    let dof = data.len().saturating_sub(m.x.len());
    let h: Vec<f64> = m.x.iter().zip(step).map(|(x, s)| 1e-5 * x.abs().max(*s)).collect();
    let mut cov = covariance_from_hessian(&hessian(&objective, &m.x, &h));
    if data.sigma.is_none() {
        if let Some(c) = cov.as_mut() {
            *c *= m.f / dof.max(1) as f64;
        }
    }
    Fit { x: m.x, cov, chi2: m.f, dof, converged: m.converged }
}

impl Fit {
    fn err(&self, i: usize) -> f64 {
        self.cov.as_ref().map_or(f64::INFINITY, |c| c[(i, i)].max(0.0).sqrt())
    }

    fn report(&self, model: &str) -> FitReport {
        FitReport {
            model: model.to_string(),
            params: Vec::new(),
            residual_ss: self.chi2,
            dof: self.dof,
            converged: self.converged && self.cov.is_some(),
            notes: Vec::new(),
        }
    }
}

/// Angular detuning in rad/μs for a detuning in Hz.
fn rad_per_us(hz: f64) -> f64 {
    TAU * 1e-6 * hz
}

/// (Ω²/W²)·sin²(Wτ/2), W² = Ω² + d²; all rates in rad/μs, τ in μs.
pub fn rabi_lineshape(omega: f64, d: f64, tau: f64) -> f64 {
    let w2 = omega * omega + d * d;
    if w2 == 0.0 {
        return 0.0;
    }
    omega * omega / w2 * (w2.sqrt() * tau / 2.0).sin().powi(2)
}

/// Full width at half maximum (Hz) of the Rabi lineshape.
pub fn rabi_fwhm(omega: f64, tau: f64) -> f64 {
    let peak = rabi_lineshape(omega, 0.0, tau);
    if peak == 0.0 {
        return f64::NAN;
    }
    let f = |d: f64| rabi_lineshape(omega, d, tau) - peak / 2.0;
    let mut hi = 1e-3 / tau.max(1e-12);
    while f(hi) > 0.0 {
        hi *= 1.2;
    }
    let mut lo = hi / 1.2;
    if f(lo) < 0.0 {
        lo = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * 0.5 * (lo + hi) / (TAU * 1e-6)
}

/// Rabi-lineshape fit of a spectrum (x in Hz) probed with a pulse of
/// `pulse_time` μs. Reports `center` and `fwhm` in Hz, `omega` in rad/μs
/// and `amplitude`.
pub fn fit_line_center(spectrum: &Series, pulse_time: f64) -> Result<FitReport> {
    spectrum.check(5, "line-centre fit")?;
    if !(pulse_time.is_finite() && pulse_time > 0.0) {
        return Err(Error::Fit("pulse time must be > 0".into()));
    }
    let data = spectrum.sorted();
    let model = |p: &[f64], x: f64| p[2] * rabi_lineshape(p[1], rad_per_us(x - p[0]), pulse_time);
    let span = data.span().max(1.0);
    let (lo, hi) = (data.x[0], data.x[data.len() - 1]);
    let ymax = data.y.iter().copied().fold(0.0, f64::max).max(1e-3);
    let ymin = data.y.iter().copied().fold(f64::INFINITY, f64::min);
    let argmax = data.y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).map_or(0, |(i, _)| i);
    let wsum: f64 = data.y.iter().map(|y| y - ymin).sum();
    let centroid = if wsum > 0.0 {
        data.x.iter().zip(&data.y).map(|(x, y)| x * (y - ymin)).sum::<f64>() / wsum
    } else {
        0.5 * (lo + hi)
    };
    let pi_omega = PI / pulse_time;
    let mut starts = Vec::new();
    for c in [data.x[argmax], centroid] {
        for om in [pi_omega, 0.6 * pi_omega] {
            starts.push(vec![c, om, ymax.min(1.0)]);
        }
    }
    let step_x = span / (data.len() as f64).max(2.0);
    let bounds = [(lo - span, hi + span), (1e-6 * pi_omega, 50.0 * pi_omega), (0.0, 1.5)];
    let fit = least_squares(&data, &model, &starts, &[step_x, 0.2 * pi_omega, 0.1], &bounds);
    let mut r = fit.report("rabi_line");
    r.push("center", fit.x[0], fit.err(0));
    let fwhm = rabi_fwhm(fit.x[1], pulse_time);
    let dw = 1e-6 * fit.x[1].max(1e-12);
    let dfwhm = (rabi_fwhm(fit.x[1] + dw, pulse_time) - rabi_fwhm(fit.x[1] - dw, pulse_time)) / (2.0 * dw);
    r.push("fwhm", fwhm, dfwhm * fit.err(1));
    r.push("omega", fit.x[1], fit.err(1));
    r.push("amplitude", fit.x[2], fit.err(2));
    Ok(r)
}

/// FWHM of a Gaussian per unit standard deviation.
const GAUSS_FWHM: f64 = 2.354_820_045_030_949;

/// Gaussian profile `amplitude·exp(−(x − center)²/2s²)` for lines broadened
/// beyond their Fourier limit. Reports `center`, `fwhm` and `amplitude`.
pub fn fit_gaussian_line(spectrum: &Series) -> Result<FitReport> {
    spectrum.check(4, "gaussian line fit")?;
    let data = spectrum.sorted();
    let model = |p: &[f64], x: f64| p[2] * (-0.5 * ((x - p[0]) / p[1]).powi(2)).exp();
    let span = data.span().max(1e-12);
    let (lo, hi) = (data.x[0], data.x[data.len() - 1]);
    let ymax = data.y.iter().copied().fold(0.0, f64::max).max(1e-3);
    let argmax = data.y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).map_or(0, |(i, _)| i);
    let dx = span / (data.len() as f64 - 1.0).max(1.0);
    let starts: Vec<Vec<f64>> = [0.05, 0.15].iter().map(|f| vec![data.x[argmax], f * span, ymax.min(1.0)]).collect();
    let bounds = [(lo - span, hi + span), (0.1 * dx, 2.0 * span), (0.0, 1.5)];
    let fit = least_squares(&data, &model, &starts, &[dx, 0.05 * span, 0.1], &bounds);
    let mut r = fit.report("gaussian_line");
    r.push("center", fit.x[0], fit.err(0));
    r.push("fwhm", GAUSS_FWHM * fit.x[1], GAUSS_FWHM * fit.err(1));
    r.push("amplitude", fit.x[2], fit.err(2));
    Ok(r)
}

/// Weighted linear least squares on the given basis functions.
/// Returns coefficients, covariance (unscaled) and χ².
fn linear_lsq(data: &Series, basis: &[&dyn Fn(f64) -> f64]) -> Option<(Vec<f64>, nalgebra::DMatrix<f64>, f64)> {
    let k = basis.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut b = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..data.len() {
        let w = data.weight(i);
        let phi: Vec<f64> = basis.iter().map(|f| f(data.x[i])).collect();
        for r in 0..k {
            b[r] += w * phi[r] * data.y[i];
            for c in 0..k {
                a[(r, c)] += w * phi[r] * phi[c];
            }
        }
    }
    let inv = a.try_inverse()?;
    let coef = &inv * b;
    let coef: Vec<f64> = coef.iter().copied().collect();
    let chi2 = (0..data.len())
        .map(|i| {
            let m: f64 = basis.iter().zip(&coef).map(|(f, c)| c * f(data.x[i])).sum();
            data.weight(i) * (data.y[i] - m).powi(2)
        })
        .sum();
    Some((coef, inv, chi2))
}

/// Sinusoidal fringe fit P = off + a·cos(2πx/period) + b·sin(2πx/period).
/// Contrast is (P_max − P_min)/(P_max + P_min) of the fitted curve.
pub fn fit_fringe(fringes: &Series) -> Result<FitReport> {
    fringes.check(5, "fringe fit")?;
    let data = fringes.sorted();
    let span = data.span();
    if span <= 0.0 {
        return Err(Error::Fit("fringe fit needs distinct x values".into()));
    }
    let min_dx = data.x.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    // frequency grid from half a period over the span to Nyquist
    let f_lo = 0.5 / span;
    let f_hi = 0.5 / min_dx;
    let df = 0.25 / span;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut f = f_lo;
    while f <= f_hi + 1e-12 * f_hi {
        let c = move |x: f64| (TAU * f * x).cos();
        let s = move |x: f64| (TAU * f * x).sin();
        if let Some((coef, _, chi2)) = linear_lsq(&data, &[&|_| 1.0, &c, &s]) {
            if best.as_ref().is_none_or(|b| chi2 < b.2) {
                best = Some((f, coef, chi2));
            }
        }
        f += df;
    }
    let (f0, coef, _) = best.ok_or_else(|| Error::Fit("fringe fit: no frequency candidate".into()))?;
    let model = |p: &[f64], x: f64| p[0] + p[1] * (TAU * p[3] * x).cos() + p[2] * (TAU * p[3] * x).sin();
    let amp0 = coef[1].hypot(coef[2]).max(1e-3);
    let start = vec![coef[0], coef[1], coef[2], f0];
    let bounds = [(-1.0, 2.0), (-2.0, 2.0), (-2.0, 2.0), (0.5 * f_lo, 2.0 * f_hi)];
    let fit = least_squares(&data, &model, &[start], &[0.05, 0.2 * amp0, 0.2 * amp0, 0.2 * df], &bounds);
    let (off, a, b, freq) = (fit.x[0], fit.x[1], fit.x[2], fit.x[3]);
    let h = a.hypot(b);
    let mut r = fit.report("fringe");
    let contrast_raw = if off > 0.0 { h / off } else { 0.0 };
    let contrast = contrast_raw.clamp(0.0, 1.0);
    let c_err = match (&fit.cov, h > 1e-9 && off > 0.0) {
        (Some(cov), true) => {
            let g = [-h / (off * off), a / (h * off), b / (h * off)];
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += g[i] * g[j] * cov[(i, j)];
                }
            }
            v.max(0.0).sqrt()
        }
        _ => 1.0,
    };
    if h < 1e-9 {
        r.notes.push("flat data: contrast is not identifiable".into());
    }
    if contrast_raw > 1.0 {
        r.notes.push(format!("contrast {contrast_raw:.4} clipped to 1"));
    }
    r.push("contrast", contrast, c_err);
    r.push("phase", (-b).atan2(a), if h > 0.0 { fit.err(1).hypot(fit.err(2)) / h } else { PI });
    r.push("period", 1.0 / freq, fit.err(3) / (freq * freq));
    r.push("offset", off, fit.err(0));
    r.push("amplitude", 2.0 * h, 2.0 * fit.err(1).hypot(fit.err(2)));
    Ok(r)
}

/// Gaussian and exponential fits of a contrast decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastDecayFit {
    pub gaussian: FitReport,
    pub exponential: FitReport,
    /// `gaussian` or `exponential`, whichever has the smaller residual per dof.
    pub preferred: String,
}

fn one_param_decay(data: &Series, name: &str, model: ModelFn<'_>) -> FitReport {
    let tmax = data.x.iter().copied().fold(0.0, f64::max).max(1e-12);
    let bounds = [(1e-3 * tmax, 1e3 * tmax)];
    let starts: Vec<Vec<f64>> = [0.1, 0.3, 1.0, 3.0, 10.0].iter().map(|k| vec![k * tmax]).collect();
    let fit = least_squares(data, model, &starts, &[0.1 * tmax], &bounds);
    let mut r = fit.report(name);
    r.push("tau", fit.x[0], fit.err(0));
    if fit.x[0] >= 0.999 * bounds[0].1 {
        r.converged = false;
        r.notes.push("tau at its upper bound: decay not identifiable".into());
    }
    r
}

/// Fits exp(−(t/τ)²) and exp(−t/τ) to contrast versus wait time (ms).
/// Each report carries `tau` (ms) and `nu` = 1/(2πτ) in Hz.
pub fn fit_contrast_decay(contrast: &Series) -> Result<ContrastDecayFit> {
    contrast.check(4, "contrast-decay fit")?;
    let data = contrast.sorted();
    let mut gaussian = one_param_decay(&data, "gaussian", &|p, t| (-(t / p[0]).powi(2)).exp());
    let mut exponential = one_param_decay(&data, "exponential", &|p, t| (-t / p[0]).exp());
    for r in [&mut gaussian, &mut exponential] {
        let (tau, err) = (r.value("tau"), r.error("tau"));
        let nu = 1.0 / (TAU * tau * 1e-3);
        r.push("nu", nu, nu * err / tau);
    }
    let preferred =
        if gaussian.reduced_residual() <= exponential.reduced_residual() { "gaussian" } else { "exponential" }.to_string();
    Ok(ContrastDecayFit { gaussian, exponential, preferred })
}

/// Fixed-frequency 50 Hz sine fit of line centres (kHz) versus trigger
/// delay (ms). `susceptibility` (kHz/mGauss) converts the amplitude into a
/// field amplitude reported as `field_amplitude` in mGauss.
pub fn fit_sine_drift(centers: &Series, susceptibility: f64) -> Result<FitReport> {
    centers.check(4, "50 Hz sine fit")?;
    let data = centers.sorted();
    let w = TAU * LINE_FREQUENCY_PER_MS;
    let (coef, inv, chi2) = linear_lsq(&data, &[&|_| 1.0, &|t| (w * t).sin(), &|t| (w * t).cos()])
        .ok_or_else(|| Error::Fit("50 Hz sine fit is singular; delays must cover the period".into()))?;
    let dof = data.len().saturating_sub(3);
    let scale = if data.sigma.is_none() { chi2 / dof.max(1) as f64 } else { 1.0 };
    let var = |i: usize| inv[(i, i)] * scale;
    let (off, s, c) = (coef[0], coef[1], coef[2]);
    let amp = s.hypot(c);
    let amp_err = if amp > 0.0 {
        ((s * s * var(1) + c * c * var(2) + 2.0 * s * c * inv[(1, 2)] * scale) / (amp * amp)).max(0.0).sqrt()
    } else {
        var(1).max(var(2)).sqrt()
    };
    let mut r = FitReport { model: "sine_50hz".into(), params: Vec::new(), residual_ss: chi2, dof, converged: true, notes: Vec::new() };
    r.push("amplitude", amp, amp_err);
    r.push("phase", c.atan2(s), if amp > 0.0 { (var(1) + var(2)).sqrt() / amp } else { PI });
    r.push("offset", off, var(0).sqrt());
    let residual_std = {
        let res: Vec<f64> = (0..data.len()).map(|i| data.y[i] - (off + s * (w * data.x[i]).sin() + c * (w * data.x[i]).cos())).collect();
        (res.iter().map(|e| e * e).sum::<f64>() / dof.max(1) as f64).sqrt()
    };
    r.push("residual_std", residual_std, 0.0);
    r.push("field_amplitude", amp / susceptibility, amp_err / susceptibility);
    Ok(r)
}

/// Weighted fit of survival = exp(−t/τ), t in ms. Reports `tau` in ms.
pub fn fit_exponential_decay(survival: &Series) -> Result<FitReport> {
    survival.check(2, "lifetime fit")?;
    let data = survival.sorted();
    let mut r = one_param_decay(&data, "exponential_decay", &|p, t| (-t / p[0]).exp());
    if r.notes.iter().any(|n| n.contains("upper bound")) {
        r.notes.push("no decay observed: tau is only a lower bound".into());
    }
    Ok(r)
}

/// Ordinary least squares y = slope·x + intercept.
pub fn fit_linear(data: &Series) -> Result<FitReport> {
    let plain = Series::new(data.x.clone(), data.y.clone());
    plain.check(3, "linear fit")?;
    let d = plain.sorted();
    let (coef, inv, chi2) =
        linear_lsq(&d, &[&|_| 1.0, &|x| x]).ok_or_else(|| Error::Fit("linear fit needs two distinct x values".into()))?;
    let dof = d.len() - 2;
    let s2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let mut r = FitReport { model: "linear".into(), params: Vec::new(), residual_ss: chi2, dof, converged: true, notes: Vec::new() };
    r.push("slope", coef[1], (inv[(1, 1)] * s2).sqrt());
    r.push("intercept", coef[0], (inv[(0, 0)] * s2).sqrt());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::shot_rng;
    use rand::Rng;
    use rand_distr::{Binomial, Distribution, Normal};

    fn binomial_data(xs: &[f64], truth: impl Fn(f64) -> f64, shots: u64, seed: u64) -> Series {
        let mut rng = shot_rng(seed, 0);
        let p: Vec<f64> = xs
            .iter()
            .map(|&x| Binomial::new(shots, truth(x).clamp(0.0, 1.0)).unwrap().sample(&mut rng) as f64 / shots as f64)
            .collect();
        Series::binomial(xs.to_vec(), p, &vec![shots as usize; xs.len()])
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn symmetric_line_center_is_exact() {
        let tau = 1000.0;
        let omega = PI / tau;
        let xs = grid(-3000.0, 3000.0, 61);
        let ys: Vec<f64> = xs.iter().map(|&x| rabi_lineshape(omega, rad_per_us(x - 0.0), tau)).collect();
        let r = fit_line_center(&Series::new(xs, ys), tau).unwrap();
        let fwhm = r.value("fwhm");
        assert!(r.value("center").abs() <= 1e-6 * fwhm, "{}", r.value("center"));
        assert!((r.value("amplitude") - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_line_exact() {
        let xs = grid(-6000.0, 6000.0, 81);
        let s = 900.0;
        let ys: Vec<f64> = xs.iter().map(|&x| 0.6 * (-0.5 * ((x - 350.0) / s).powi(2)).exp()).collect();
        let r = fit_gaussian_line(&Series::new(xs, ys)).unwrap();
        assert!((r.value("center") - 350.0).abs() < 1e-3, "{r}");
        assert!((r.value("fwhm") - 2.0 * (2.0 * 2f64.ln()).sqrt() * s).abs() < 1e-2, "{r}");
        assert!((r.value("amplitude") - 0.6).abs() < 1e-6);
    }

    #[test]
    fn fourier_limited_width() {
        // π pulse of 1 ms: FWHM ≈ 0.8/τ
        let w = rabi_fwhm(PI / 1000.0, 1000.0);
        assert!((w - 799.0).abs() < 2.0, "{w}");
    }

    #[test]
    fn line_center_recovery() {
        let tau = 1000.0;
        let omega = PI / tau;
        let xs = grid(-1000.0, 5000.0, 41);
        let mut inside = 0;
        for seed in 0..100 {
            let data = binomial_data(&xs, |x| rabi_lineshape(omega, rad_per_us(x - 2000.0), tau), 100, seed);
            let r = fit_line_center(&data, tau).unwrap();
            if (r.value("center") - 2000.0).abs() < 3.0 * r.error("center") {
                inside += 1;
            }
        }
        assert!(inside >= 99, "{inside}/100 within 3σ");
    }

    #[test]
    fn fringe_contrast_definition() {
        let xs = grid(-10e3, 10e3, 81);
        for (lo, hi, c) in [(0.0, 1.0, 1.0), (0.1, 0.9, 0.8)] {
            let ys: Vec<f64> = xs.iter().map(|&x| lo + (hi - lo) * 0.5 * (1.0 + (TAU * x * 1e-4).cos())).collect();
            let r = fit_fringe(&Series::new(xs.clone(), ys)).unwrap();
            assert!((r.value("contrast") - c).abs() < 1e-6, "{}", r.value("contrast"));
            assert!((r.value("period") - 1e4).abs() < 1e-3);
        }
    }

    #[test]
    fn flat_fringe_has_no_contrast() {
        let xs = grid(-10e3, 10e3, 41);
        let r = fit_fringe(&Series::new(xs.clone(), vec![0.5; xs.len()])).unwrap();
        assert!(r.value("contrast") < 1e-6);
        assert!(r.error("contrast") >= 1.0);
    }

    #[test]
    fn fringe_recovery() {
        let xs = grid(-10e3, 10e3, 81);
        let t = 300e-6;
        let c = (-(0.3f64 / 0.94).powi(2)).exp();
        let mut inside = 0;
        for seed in 0..100 {
            let data = binomial_data(&xs, |x| 0.5 * (1.0 + c * (TAU * x * t).cos()), 100, seed + 1000);
            let r = fit_fringe(&data).unwrap();
            if (r.value("contrast") - c).abs() < 3.0 * r.error("contrast") {
                inside += 1;
            }
        }
        assert!(inside >= 99, "{inside}/100 within 3σ");
    }

    #[test]
    fn doubling_wait_halves_period() {
        let xs = grid(-20e3, 20e3, 161);
        let period = |t: f64| {
            let ys: Vec<f64> = xs.iter().map(|&x| 0.5 * (1.0 + (TAU * x * t).cos())).collect();
            fit_fringe(&Series::new(xs.clone(), ys)).unwrap().value("period")
        };
        let (a, b) = (period(100e-6), period(200e-6));
        assert!((a / b - 2.0).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn gaussian_contrast_decay() {
        let t = grid(0.1, 1.0, 10);
        let c: Vec<f64> = t.iter().map(|t| (-(t / 0.94f64).powi(2)).exp()).collect();
        let f = fit_contrast_decay(&Series::new(t, c)).unwrap();
        assert_eq!(f.preferred, "gaussian");
        assert!((f.gaussian.value("tau") - 0.94).abs() < 1e-6);
        assert!((f.gaussian.value("nu") - 1.0 / (TAU * 0.94e-3)).abs() < 1e-3);
    }

    #[test]
    fn exponential_contrast_decay() {
        let nu = 150.0;
        let t = grid(0.1, 1.0, 10);
        let c: Vec<f64> = t.iter().map(|t| (-TAU * nu * t * 1e-3).exp()).collect();
        let f = fit_contrast_decay(&Series::new(t, c)).unwrap();
        assert_eq!(f.preferred, "exponential");
        assert!((f.exponential.value("tau") - 1e3 / (TAU * nu)).abs() < 1e-6);
    }

    #[test]
    fn constant_contrast_not_identifiable() {
        let t = grid(0.1, 1.0, 6);
        let f = fit_contrast_decay(&Series::new(t, vec![1.0; 6])).unwrap();
        assert!(!f.gaussian.converged && !f.exponential.converged);
    }

    #[test]
    fn model_preference_is_reliable() {
        let t = grid(0.1, 1.0, 10);
        let mut correct = 0;
        let mut trials = 0;
        for (k, tau) in [0.5, 0.8, 1.2, 1.6, 2.0].into_iter().enumerate() {
            for seed in 0..20u64 {
                for gaussian in [true, false] {
                    trials += 1;
                    let mut rng = shot_rng(77 + k as u64, seed * 2 + gaussian as u64);
                    // contrast scatter of 100-shot fringe fits, ≈ 0.02
                    let c: Vec<f64> = t
                        .iter()
                        .map(|&t| {
                            let truth = if gaussian { (-(t / tau).powi(2)).exp() } else { (-t / tau).exp() };
                            truth + Normal::new(0.0, 0.02).unwrap().sample(&mut rng)
                        })
                        .collect();
                    let sig = vec![0.02; t.len()];
                    let f = fit_contrast_decay(&Series::weighted(t.clone(), c, sig)).unwrap();
                    if f.preferred == if gaussian { "gaussian" } else { "exponential" } {
                        correct += 1;
                    }
                }
            }
        }
        assert!(correct as f64 >= 0.95 * trials as f64, "{correct}/{trials}");
    }

    #[test]
    fn sine_drift() {
        let d = grid(0.0, 19.0, 20);
        let flat = fit_sine_drift(&Series::new(d.clone(), vec![1.0; 20]), 2.8).unwrap();
        assert!(flat.value("amplitude") < 1e-10);
        let ys: Vec<f64> = d.iter().map(|t| 3.8 * (TAU * 0.05 * t + 0.7).sin()).collect();
        let r = fit_sine_drift(&Series::new(d.clone(), ys), 2.799248).unwrap();
        assert!((r.value("amplitude") - 3.8).abs() < 1e-9);
        assert!((r.value("field_amplitude") - 1.3575).abs() < 1e-3);
        let mut inside = 0;
        for seed in 0..100 {
            let mut rng = shot_rng(seed, 5);
            let ys: Vec<f64> = d.iter().map(|t| 3.8 * (TAU * 0.05 * t).sin() + 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let r = fit_sine_drift(&Series::new(d.clone(), ys), 2.8).unwrap();
            if (r.value("amplitude") - 3.8).abs() < 3.0 * r.error("amplitude") {
                inside += 1;
            }
        }
        assert!(inside >= 99, "{inside}");
    }

    #[test]
    fn lifetime_exact_and_recovered() {
        let t = grid(0.0, 3000.0, 16);
        let s: Vec<f64> = t.iter().map(|t| (-t / 1011.0f64).exp()).collect();
        let r = fit_exponential_decay(&Series::new(t.clone(), s)).unwrap();
        assert!((r.value("tau") - 1011.0).abs() < 1e-6);
        let mut inside = 0;
        for seed in 0..100 {
            let data = binomial_data(&t, |t| (-t / 500.0).exp(), 2000, seed + 300);
            let r = fit_exponential_decay(&data).unwrap();
            if (r.value("tau") - 500.0).abs() < 3.0 * r.error("tau") {
                inside += 1;
            }
        }
        assert!(inside >= 99, "{inside}");
    }

    #[test]
    fn lifetime_lower_bound_flag() {
        let t = grid(0.0, 100.0, 5);
        let r = fit_exponential_decay(&Series::binomial(t, vec![1.0; 5], &[100; 5])).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("lower bound")));
    }

    #[test]
    fn linear_exact() {
        let x = grid(0.0, 100.0, 6);
        let y: Vec<f64> = x.iter().map(|x| 0.0053 * x).collect();
        let r = fit_linear(&Series::new(x, y)).unwrap();
        assert!((r.value("slope") - 0.0053).abs() < 1e-15);
        assert!(r.value("intercept").abs() < 1e-12);
        assert!(fit_linear(&Series::new(vec![1.0, 2.0], vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn linear_recovery() {
        let x = grid(0.0, 190.0, 8);
        let mut inside = 0;
        for seed in 0..100 {
            let mut rng = shot_rng(seed, 9);
            let y: Vec<f64> = x.iter().map(|x| x / 190.0 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let r = fit_linear(&Series::new(x.clone(), y)).unwrap();
            if (r.value("slope") - 1.0 / 190.0).abs() < 3.0 * r.error("slope") {
                inside += 1;
            }
        }
        // OLS error from 6 dof is t-distributed; 3σ covers ~97.6 %
        assert!(inside >= 95, "{inside}");
    }

    #[test]
    fn empty_data_rejected() {
        assert!(fit_linear(&Series::new(vec![], vec![])).is_err());
        assert!(fit_fringe(&Series::new(vec![1.0], vec![0.5])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn fits_ignore_point_order(seed in 0u64..1000, rot in 1usize..15) {
                let xs = grid(-3000.0, 3000.0, 31);
                let data = binomial_data(&xs, |x| rabi_lineshape(PI / 1000.0, rad_per_us(x - 300.0), 1000.0), 100, seed);
                let mut shuffled = data.clone();
                shuffled.x.rotate_left(rot);
                shuffled.y.rotate_left(rot);
                shuffled.sigma.as_mut().unwrap().rotate_left(rot);
                prop_assert_eq!(fit_line_center(&data, 1000.0).unwrap(), fit_line_center(&shuffled, 1000.0).unwrap());
                prop_assert_eq!(fit_fringe(&data).unwrap(), fit_fringe(&shuffled).unwrap());
                prop_assert_eq!(fit_linear(&data).unwrap(), fit_linear(&shuffled).unwrap());
            }
        }
    }
}
