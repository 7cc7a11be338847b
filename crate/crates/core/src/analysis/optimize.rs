//! Derivative-free minimisation and curvature-based uncertainties.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below `f_tol·(|f_best| + f_tol)`.
    pub f_tol: f64,
    /// …and every vertex lies within `x_tol` (relative to `step`) of the best.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evaluations: 20_000, f_tol: 1e-14, x_tol: 1e-10 }
    }
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

impl NelderMead {
    /// Minimises `f` from `x0` inside the box `bounds`. `step` sets the size
    /// of the initial simplex along each axis.
    pub fn minimize(&self, f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: &[f64], bounds: &[(f64, f64)]) -> Minimum {
        let n = x0.len();
        let mut evals = 0usize;
        let eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut start = x0.to_vec();
        clamp(&mut start, bounds);
        let mut best = Minimum { x: start.clone(), f: eval(&start, &mut evals), converged: false, evaluations: 0 };
        // one restart from the optimum guards against a collapsed simplex
        for _round in 0..2 {
            let mut simplex: Vec<Vec<f64>> = vec![best.x.clone()];
            for i in 0..n {
                let mut v = best.x.clone();
                v[i] += step[i];
                if v[i] > bounds[i].1 {
                    v[i] = best.x[i] - step[i];
                }
                clamp(&mut v, bounds);
                simplex.push(v);
            }
            let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
            let mut converged = false;
            while evals < self.max_evaluations {
                let mut order: Vec<usize> = (0..=n).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                simplex = order.iter().map(|&i| simplex[i].clone()).collect();
                values = order.iter().map(|&i| values[i]).collect();

                let spread = (values[n] - values[0]).abs();
                let size = (1..=n)
                    .flat_map(|k| (0..n).map(move |i| (k, i)))
                    .map(|(k, i)| ((simplex[k][i] - simplex[0][i]) / step[i].max(f64::MIN_POSITIVE)).abs())
                    .fold(0.0, f64::max);
                if spread <= self.f_tol * (values[0].abs() + self.f_tol) && size <= self.x_tol.max(1e-8) {
                    converged = true;
                    break;
                }
                if size <= 1e-14 {
                    converged = spread <= 1e-9 * (values[0].abs() + 1e-12);
                    break;
                }

                let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64).collect();
                let along = |t: f64| {
                    let mut p: Vec<f64> = (0..n).map(|i| centroid[i] + t * (simplex[n][i] - centroid[i])).collect();
                    clamp(&mut p, bounds);
                    p
                };
                let xr = along(-1.0);
                let fr = eval(&xr, &mut evals);
                if fr < values[0] {
                    let xe = along(-2.0);
                    let fe = eval(&xe, &mut evals);
                    if fe < fr {
                        simplex[n] = xe;
                        values[n] = fe;
                    } else {
                        simplex[n] = xr;
                        values[n] = fr;
                    }
                } else if fr < values[n - 1] {
                    simplex[n] = xr;
                    values[n] = fr;
                } else {
                    let (xc, fc) = if fr < values[n] {
                        let xc = along(-0.5);
                        let fc = eval(&xc, &mut evals);
                        (xc, fc)
                    } else {
                        let xc = along(0.5);
                        let fc = eval(&xc, &mut evals);
                        (xc, fc)
                    };
                    if fc < values[n].min(fr) {
                        simplex[n] = xc;
                        values[n] = fc;
                    } else {
                        for k in 1..=n {
                            let mut p: Vec<f64> = (0..n).map(|i| simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i])).collect();
                            clamp(&mut p, bounds);
                            values[k] = eval(&p, &mut evals);
                            simplex[k] = p;
                        }
                    }
                }
            }
            let (k, &fbest) = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("simplex is non-empty");
            if fbest <= best.f {
                best.x = simplex[k].clone();
                best.f = fbest;
            }
            best.converged = converged;
            if !converged {
                break;
            }
        }
        best.evaluations = evals;
        best
    }
}

/// Multi-start minimisation. Ties are broken by the lowest parameter vector
/// in lexicographic order so the result never depends on start order.
pub fn multi_start(
    nm: &NelderMead,
    f: &dyn Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    step: &[f64],
    bounds: &[(f64, f64)],
) -> Minimum {
    let mut best: Option<Minimum> = None;
    for s in starts {
        let m = nm.minimize(f, s, step, bounds);
        let better = match &best {
            None => true,
            Some(b) => match m.f.total_cmp(&b.f) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => {
                    m.x.iter().zip(&b.x).find(|(a, b)| a != b).is_some_and(|(a, b)| a < b)
                }
                std::cmp::Ordering::Greater => false,
            },
        };
        if better {
            best = Some(m);
        }
    }
    best.expect("at least one start point")
}

/// Central finite-difference Hessian of `f` at `x` with per-axis steps `h`.
pub fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let at = |d: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in d {
            p[i] += s;
        }
        f(&p)
    };
    let mut hm = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = at(&[(i, h[i])]);
        let fm = at(&[(i, -h[i])]);
        hm[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])]) - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    hm
}

/// Parameter covariance 2·H⁻¹ of a χ² surface; `None` if H is not
/// positive definite.
pub fn covariance_from_hessian(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = h.clone().try_inverse()?;
    let cov = inv * 2.0;
    (0..cov.nrows()).all(|i| cov[(i, i)].is_finite() && cov[(i, i)] > 0.0).then_some(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = NelderMead::default().minimize(&f, &[-1.2, 1.0], &[0.5, 0.5], &[(-5.0, 5.0), (-5.0, 5.0)]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2);
        let m = NelderMead::default().minimize(&f, &[1.0], &[0.5], &[(0.0, 10.0)]);
        assert_eq!(m.x[0], 0.0);
    }

    #[test]
    fn quadratic_covariance() {
        // χ² = (x/σx)² + (y/σy)² has covariance diag(σx², σy²)
        let f = |x: &[f64]| (x[0] / 2.0).powi(2) + (x[1] / 0.5).powi(2);
        let h = hessian(&f, &[0.0, 0.0], &[1e-3, 1e-3]);
        let c = covariance_from_hessian(&h).unwrap();
        assert!((c[(0, 0)] - 4.0).abs() < 1e-6 && (c[(1, 1)] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn multi_start_finds_global() {
        let f = |x: &[f64]| (x[0] * x[0] - 4.0).powi(2) + 0.1 * (x[0] - 2.0).powi(2);
        let m = multi_start(&NelderMead::default(), &f, &[vec![-3.0], vec![3.0]], &[0.3], &[(-10.0, 10.0)]);
        assert!((m.x[0] - 2.0).abs() < 1e-6);
    }
}
