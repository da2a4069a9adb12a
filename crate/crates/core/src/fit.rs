//! Small dense Levenberg–Marquardt least-squares solver.
//!
//! Problems here have at most a handful of parameters, so the normal
//! equations are formed explicitly and solved by Gaussian elimination.
//! The Jacobian is taken by central differences.

use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit is underdetermined: {0}")]
    Underdetermined(String),
    #[error("initial parameters are outside the model domain")]
    BadStart,
    #[error("no convergence after {iterations} iterations (residual norm {residual_norm})")]
    NotConverged { iterations: usize, residual_norm: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions<T> {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub xtol: T,
    /// Relative cost-decrease tolerance.
    pub ftol: T,
}

impl<T: Scalar> Default for LmOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            xtol: T::epsilon().sqrt() * lit::<T>(1e-3),
            ftol: T::epsilon() * lit::<T>(16.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport<T> {
    pub params: Vec<T>,
    /// Standard errors from the covariance `s² (JᵀJ)⁻¹` where `s²` is the
    /// reduced chi-square (residuals are assumed already weighted).
    pub std_errors: Vec<T>,
    pub covariance: Vec<Vec<T>>,
    pub residual_norm: T,
    pub iterations: usize,
}

/// Minimizes ‖r(p)‖². `residuals` writes r(p) into the slice and returns
/// `false` when `p` lies outside the model domain.
pub fn levenberg_marquardt<T, F>(residuals: F, start: &[T], n_residuals: usize, opts: LmOptions<T>) -> Result<LmReport<T>, FitError>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) -> bool,
{
    let np = start.len();
    if n_residuals < np {
        return Err(FitError::TooFewPoints { needed: np, got: n_residuals });
    }
    let mut p = start.to_vec();
    let mut r = vec![T::zero(); n_residuals];
    if !residuals(&p, &mut r) || r.iter().any(|x| !x.is_finite()) {
        return Err(FitError::BadStart);
    }
    let mut cost = sum_sq(&r);
    let mut lambda = lit::<T>(1e-3);
    let mut jac = vec![vec![T::zero(); n_residuals]; np];
    let mut iterations = 0;

    loop {
        if iterations >= opts.max_iterations {
            return Err(FitError::NotConverged { iterations, residual_norm: to_f64(cost.sqrt()) });
        }
        iterations += 1;
        if !jacobian(&residuals, &p, n_residuals, &mut jac) {
            return Err(FitError::Underdetermined("jacobian left the model domain".into()));
        }
        let (jtj, jtr) = normal_equations(&jac, &r);
        if jtr.iter().all(|g| g.abs() <= T::min_positive_value()) {
            break;
        }

        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..np {
                let d = if jtj[i][i] > T::zero() { jtj[i][i] } else { T::one() };
                a[i][i] = jtj[i][i] + lambda * d;
            }
            let rhs: Vec<T> = jtr.iter().map(|&g| -g).collect();
            let step = match solve(a, rhs) {
                Some(s) => s,
                None => {
                    lambda = lambda * lit::<T>(10.0);
                    continue;
                }
            };
            let trial: Vec<T> = p.iter().zip(&step).map(|(&x, &d)| x + d).collect();
            let mut rt = vec![T::zero(); n_residuals];
            let ok = residuals(&trial, &mut rt) && rt.iter().all(|x| x.is_finite());
            let trial_cost = if ok { sum_sq(&rt) } else { T::infinity() };
            if trial_cost <= cost {
                let rel_step = step
                    .iter()
                    .zip(&p)
                    .map(|(&d, &x)| d.abs() / (x.abs() + opts.xtol))
                    .fold(T::zero(), T::max);
                let rel_decrease = (cost - trial_cost) / cost.max(T::min_positive_value());
                p = trial;
                r = rt;
                cost = trial_cost;
                lambda = (lambda * lit::<T>(0.3)).max(lit::<T>(1e-12));
                accepted = true;
                small_step = rel_step <= opts.xtol || rel_decrease <= opts.ftol;
                break;
            }
            lambda = lambda * lit::<T>(10.0);
            if lambda > lit::<T>(1e16) {
                break;
            }
        }
        if !accepted || small_step {
            break;
        }
    }

    jacobian(&residuals, &p, n_residuals, &mut jac);
    let (jtj, _) = normal_equations(&jac, &r);
    let covariance = invert(jtj)
        .ok_or_else(|| FitError::Underdetermined("singular normal matrix at the optimum".into()))?;
    let dof = n_residuals.saturating_sub(np).max(1);
    let s2 = cost / lit::<T>(dof as f64);
    let covariance: Vec<Vec<T>> = covariance.into_iter().map(|row| row.into_iter().map(|c| c * s2).collect()).collect();
    let std_errors = (0..np).map(|i| covariance[i][i].max(T::zero()).sqrt()).collect();
    Ok(LmReport { params: p, std_errors, covariance, residual_norm: cost.sqrt(), iterations })
}

fn sum_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

fn jacobian<T: Scalar, F: Fn(&[T], &mut [T]) -> bool>(f: &F, p: &[T], m: usize, jac: &mut [Vec<T>]) -> bool {
    let cbrt_eps = T::epsilon().cbrt();
    let mut plus = vec![T::zero(); m];
    let mut minus = vec![T::zero(); m];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = cbrt_eps * p[j].abs().max(T::one());
        q[j] = p[j] + h;
        let ok_p = f(&q, &mut plus);
        q[j] = p[j] - h;
        let ok_m = f(&q, &mut minus);
        q[j] = p[j];
        match (ok_p, ok_m) {
            (true, true) => {
                for i in 0..m {
                    jac[j][i] = (plus[i] - minus[i]) / (h + h);
                }
            }
            (true, false) | (false, true) => {
                // One-sided difference at a domain boundary.
                let mut base = vec![T::zero(); m];
                if !f(p, &mut base) {
                    return false;
                }
                let (side, sign) = if ok_p { (&plus, T::one()) } else { (&minus, -T::one()) };
                for i in 0..m {
                    jac[j][i] = sign * (side[i] - base[i]) / h;
                }
            }
            (false, false) => return false,
        }
    }
    true
}

fn normal_equations<T: Scalar>(jac: &[Vec<T>], r: &[T]) -> (Vec<Vec<T>>, Vec<T>) {
    let np = jac.len();
    let mut jtj = vec![vec![T::zero(); np]; np];
    let mut jtr = vec![T::zero(); np];
    for a in 0..np {
        for b in a..np {
            let s = jac[a].iter().zip(&jac[b]).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
            jtj[a][b] = s;
            jtj[b][a] = s;
        }
        jtr[a] = jac[a].iter().zip(r).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    }
    (jtj, jtr)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if !(a[pivot][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - factor * v;
            }
            let v = b[col];
            b[row] = b[row] - factor * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).fold(b[row], |acc, k| acc - a[row][k] * x[k]);
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<T: Scalar>(a: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        cols.push(solve(a.clone(), e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}
