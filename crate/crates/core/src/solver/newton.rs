use serde::{Deserialize, Serialize};

use super::banded::BandedMatrix;
use crate::error::{ensure_positive, Error, Result};

/// Step-length control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Damping {
    /// Full Newton steps.
    None,
    /// Halve the step until the residual max-norm decreases.
    Armijo { factor: f64, min_step: f64 },
}

impl Default for Damping {
    fn default() -> Self {
        Self::Armijo { factor: 0.5, min_step: 1.0 / 1024.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Convergence threshold on the residual max-norm.
    pub tol_residual: f64,
    pub max_iter: usize,
    pub damping: Damping,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol_residual: 1e-10, max_iter: 25, damping: Damping::default() }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("newton.tol_residual", self.tol_residual)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter { name: "newton.max_iter", reason: "must be at least 1".into() });
        }
        if let Damping::Armijo { factor, min_step } = self.damping {
            if !(factor > 0.0 && factor < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "newton.damping.factor",
                    reason: format!("{factor} not in (0, 1)"),
                });
            }
            if !(min_step > 0.0 && min_step <= 1.0) {
                return Err(Error::InvalidParameter {
                    name: "newton.damping.min_step",
                    reason: format!("{min_step} not in (0, 1]"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual max-norm before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Damped Newton iteration for `F(x) = 0` with banded Jacobians.
pub fn newton_solve<F, J>(
    mut residual: F,
    mut jacobian: J,
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<BandedMatrix>,
{
    let mut x = guess;
    let mut r = residual(&x)?;
    let mut norm = max_norm(&r);
    let mut report = NewtonReport { iterations: 0, residual_history: vec![norm], converged: false };
    let mut trial = vec![0.0; x.len()];

    while !(norm <= opts.tol_residual) {
        if report.iterations == opts.max_iter || !norm.is_finite() {
            return Err(Error::NoConvergence(Box::new(report)));
        }
        let lu = jacobian(&x)?.factorize()?;
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut step)?;

        let mut lambda = 1.0;
        loop {
            for ((t, xi), si) in trial.iter_mut().zip(&x).zip(&step) {
                *t = xi + lambda * si;
            }
            let r_trial = residual(&trial)?;
            let n_trial = max_norm(&r_trial);
            match opts.damping {
                Damping::None => {
                    r = r_trial;
                    norm = n_trial;
                    break;
                }
                Damping::Armijo { factor, min_step } => {
                    if n_trial < norm {
                        r = r_trial;
                        norm = n_trial;
                        break;
                    }
                    lambda *= factor;
                    if lambda < min_step {
                        report.iterations += 1;
                        report.residual_history.push(n_trial);
                        return Err(Error::NoConvergence(Box::new(report)));
                    }
                }
            }
        }
        std::mem::swap(&mut x, &mut trial);
        report.iterations += 1;
        report.residual_history.push(norm);
    }
    report.converged = true;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(
        f: impl Fn(f64) -> f64 + Copy,
        df: impl Fn(f64) -> f64 + Copy,
        x0: f64,
        opts: &NewtonOptions,
    ) -> Result<(Vec<f64>, NewtonReport)> {
        newton_solve(
            |x| Ok(vec![f(x[0])]),
            |x| {
                let mut m = BandedMatrix::zeros(1, 0, 0);
                m.set(0, 0, df(x[0]));
                Ok(m)
            },
            vec![x0],
            opts,
        )
    }

    #[test]
    fn affine_map_converges_in_one_iteration() {
        let mut a = BandedMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            a.set(i, i, 4.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i < 3 {
                a.set(i, i + 1, -2.0);
            }
        }
        let b = [1.0, 2.0, 3.0, 4.0];
        let (x, rep) = newton_solve(
            |x| Ok(a.matvec(x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect()),
            |_| Ok(a.clone()),
            vec![0.0; 4],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(max_norm(&r) <= 1e-10);
    }

    #[test]
    fn square_root_of_four() {
        let opts = NewtonOptions { damping: Damping::None, ..Default::default() };
        let (x, rep) = scalar(|x| x * x - 4.0, |x| 2.0 * x, 3.0, &opts).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        // 3 -> 13/6 -> 2.00641... : residuals 5, 0.694, 0.0257, ...
        let h = &rep.residual_history;
        assert_eq!(h[0], 5.0);
        assert!((h[1] - ((13.0f64 / 6.0).powi(2) - 4.0)).abs() < 1e-14);
        for w in h.windows(2).skip(1) {
            if w[0] < 1e-2 && w[1] > 0.0 {
                assert!(w[1] <= w[0].powf(1.5), "{:?}", h);
            }
        }
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
    }

    #[test]
    fn zero_initial_residual_takes_no_iterations() {
        let (x, rep) = scalar(|x| x - 1.0, |_| 1.0, 1.0, &NewtonOptions::default()).unwrap();
        assert_eq!(x, vec![1.0]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn damping_gives_decreasing_history() {
        // arctan overshoots from x0 = 3 without damping
        let (x, rep) = scalar(f64::atan, |x| 1.0 / (1.0 + x * x), 3.0, &NewtonOptions::default()).unwrap();
        assert!(x[0].abs() < 1e-10);
        assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));

        let undamped = NewtonOptions { damping: Damping::None, ..Default::default() };
        assert!(scalar(f64::atan, |x| 1.0 / (1.0 + x * x), 3.0, &undamped).is_err());
    }

    #[test]
    fn no_convergence_after_max_iter() {
        let opts = NewtonOptions { max_iter: 2, ..Default::default() };
        match scalar(|x| x * x - 4.0, |x| 2.0 * x, 100.0, &opts) {
            Err(Error::NoConvergence(rep)) => {
                assert_eq!(rep.iterations, 2);
                assert!(!rep.converged);
                assert_eq!(rep.residual_history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_jacobian_propagates() {
        let r = scalar(|x| x * x + 1.0, |_| 0.0, 1.0, &NewtonOptions::default());
        assert!(matches!(r, Err(Error::SingularMatrix { index: 0 })));
    }
}
