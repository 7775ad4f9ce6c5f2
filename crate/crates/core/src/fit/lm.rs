//! Levenberg–Marquardt least squares with box bounds.
//!
//! Damping follows Nielsen's update with Moré's diagonal scaling. The
//! covariance is `(JᵀJ)⁻¹` at the optimum, optionally scaled by the reduced
//! chi-square.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::Estimate;

/// Physical dimension of a fitted parameter, used when reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Angular frequency or rate, rad/s. Reported as cyclic Hz.
    Rate,
    /// Product of two rates, (rad/s)². Reported as Hz².
    RateSquared,
    /// Anything else, reported as is.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub kinds: Vec<ParamKind>,
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// `‖r‖` of the weighted residuals.
    pub residual_norm: f64,
    pub chi2: f64,
    pub dof: usize,
    pub n_iter: usize,
    pub converged: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    /// One-sigma error from the covariance diagonal.
    pub fn sigma_of(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn get(&self, name: &str) -> Option<Estimate> {
        self.index(name)
            .map(|i| Estimate::new(self.params[i], self.sigma_of(i)))
    }

    /// Like [`get`](Self::get) but failing with a descriptive error.
    pub fn estimate(&self, name: &str) -> Result<Estimate> {
        self.get(name)
            .ok_or_else(|| Error::Sanity(format!("fit has no parameter `{name}`")))
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof.max(1) as f64
    }

    /// Appends a derived parameter `value` with gradient `grad` with respect
    /// to the existing parameters; the covariance is extended by linear
    /// propagation.
    pub fn push_derived(&mut self, name: &str, kind: ParamKind, value: f64, grad: &[f64]) {
        let n = self.params.len();
        let cov_row: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.covariance[i][j] * grad[j]).sum())
            .collect();
        let var: f64 = (0..n).map(|i| grad[i] * cov_row[i]).sum();
        for (row, c) in self.covariance.iter_mut().zip(&cov_row) {
            row.push(*c);
        }
        let mut last = cov_row;
        last.push(var);
        self.covariance.push(last);
        self.names.push(name.to_string());
        self.kinds.push(kind);
        self.params.push(value);
    }

    /// Multiplies parameter `i` by `k`, with its covariance row and column.
    pub fn scale_param(&mut self, i: usize, k: f64) {
        self.params[i] *= k;
        for row in self.covariance.iter_mut() {
            row[i] *= k;
        }
        for c in self.covariance[i].iter_mut() {
            *c *= k;
        }
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.params.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
    /// Scale the covariance by `χ²/dof`. Turn off when the data sigmas are
    /// trusted absolutely.
    pub scale_covariance: bool,
    /// Relative singular-value threshold of the column-scaled Jacobian
    /// below which the fit is declared rank deficient.
    pub rank_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-14,
            xtol: 1e-14,
            gtol: 1e-14,
            scale_covariance: true,
            rank_tol: 1e-10,
        }
    }
}

type ResidualFn<'a> = dyn Fn(&[f64], &mut [f64]) -> Result<()> + Sync + 'a;
type JacobianFn<'a> = dyn Fn(&[f64], &mut DMatrix<f64>) -> Result<()> + Sync + 'a;

/// A weighted least-squares problem `min ½‖r(p)‖²` with `m` residuals.
pub struct Problem<'a> {
    names: Vec<String>,
    kinds: Vec<ParamKind>,
    m: usize,
    residual: Box<ResidualFn<'a>>,
    jacobian: Option<Box<JacobianFn<'a>>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new<F>(names: &[&str], m: usize, residual: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync + 'a,
    {
        let n = names.len();
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            kinds: vec![ParamKind::Plain; n],
            m,
            residual: Box::new(residual),
            jacobian: None,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64], &mut DMatrix<f64>) -> Result<()> + Sync + 'a,
    {
        self.jacobian = Some(Box::new(jac));
        self
    }

    pub fn with_bounds(mut self, lower: &[f64], upper: &[f64]) -> Self {
        self.lower = lower.to_vec();
        self.upper = upper.to_vec();
        self
    }

    pub fn with_kinds(mut self, kinds: &[ParamKind]) -> Self {
        self.kinds = kinds.to_vec();
        self
    }

    fn n(&self) -> usize {
        self.names.len()
    }

    fn eval(&self, p: &[f64], r: &mut DVector<f64>) -> Result<f64> {
        (self.residual)(p, r.as_mut_slice())?;
        let cost = 0.5 * r.norm_squared();
        if !cost.is_finite() {
            return Err(Error::Degenerate("non-finite residuals".into()));
        }
        Ok(cost)
    }

    fn jac(&self, p: &[f64], r0: &DVector<f64>, jac: &mut DMatrix<f64>) -> Result<()> {
        if let Some(j) = &self.jacobian {
            return j(p, jac);
        }
        let n = self.n();
        let mut rp = DVector::zeros(self.m);
        let mut rm = DVector::zeros(self.m);
        let mut q = p.to_vec();
        for k in 0..n {
            let h = fd_step(p[k]);
            let up = p[k] + h <= self.upper[k];
            let down = p[k] - h >= self.lower[k];
            let (a, b) = match (up, down) {
                (true, true) | (false, false) => (p[k] + h, p[k] - h),
                (true, false) => (p[k] + h, p[k]),
                (false, true) => (p[k], p[k] - h),
            };
            q[k] = a;
            if a == p[k] {
                rp.copy_from(r0);
            } else {
                (self.residual)(&q, rp.as_mut_slice())?;
            }
            q[k] = b;
            if b == p[k] {
                rm.copy_from(r0);
            } else {
                (self.residual)(&q, rm.as_mut_slice())?;
            }
            q[k] = p[k];
            let d = a - b;
            for i in 0..self.m {
                jac[(i, k)] = (rp[i] - rm[i]) / d;
            }
        }
        Ok(())
    }
}

/// Finite-difference step `max(1e-8, 1e-6·|p|)`.
pub fn fd_step(p: f64) -> f64 {
    (1e-6 * p.abs()).max(1e-8)
}

fn clamp_into(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, l), h) in p.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(*l, *h);
    }
}

pub fn damped_least_squares(problem: &Problem<'_>, init: &[f64], opts: &LmOptions) -> Result<FitResult> {
    let n = problem.n();
    let m = problem.m;
    if init.len() != n {
        return Err(Error::InvalidParameter {
            name: "init",
            reason: format!("expected {n} parameters, got {}", init.len()),
        });
    }
    if m < n {
        return Err(Error::InsufficientData(format!("{m} residuals for {n} parameters")));
    }
    for (k, v) in init.iter().enumerate() {
        if !(*v >= problem.lower[k] && *v <= problem.upper[k]) {
            return Err(Error::InvalidParameter {
                name: "init",
                reason: format!("`{}` = {v} outside bounds", problem.names[k]),
            });
        }
    }

    let mut p = init.to_vec();
    let mut r = DVector::zeros(m);
    let mut cost = problem.eval(&p, &mut r)?;
    let mut jac = DMatrix::zeros(m, n);
    problem.jac(&p, &r, &mut jac)?;

    let mut diag = DVector::<f64>::zeros(n);
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = cost == 0.0;
    let mut n_iter = 0;
    let mut r_new = DVector::zeros(m);

    while !converged && n_iter < opts.max_iter {
        n_iter += 1;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let amax = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        for i in 0..n {
            diag[i] = diag[i].max(a[(i, i)]).max(1e-30 * amax).max(f64::MIN_POSITIVE);
        }
        // Gradient cosine test.
        let rn = r.norm();
        let gmax = (0..n)
            .map(|i| {
                let cn = a[(i, i)].sqrt();
                if cn == 0.0 || rn == 0.0 {
                    0.0
                } else {
                    g[i].abs() / (cn * rn)
                }
            })
            .fold(0.0, f64::max);
        if gmax <= opts.gtol {
            converged = true;
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3 * (0..n).map(|i| a[(i, i)] / diag[i]).fold(0.0, f64::max);
        }

        let mut accepted = false;
        while !accepted {
            let mut lhs = a.clone();
            for i in 0..n {
                lhs[(i, i)] += lambda * diag[i];
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if !lambda.is_finite() || lambda > 1e300 {
                        break;
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp_into(&mut trial, &problem.lower, &problem.upper);
            let delta = DVector::from_iterator(n, trial.iter().zip(&p).map(|(a, b)| a - b));
            let pred = -(delta.dot(&g) + 0.5 * delta.dot(&(&a * &delta)));
            let new_cost = problem.eval(&trial, &mut r_new);
            let ok = matches!(new_cost, Ok(c) if c < cost || (c == cost && delta.norm() == 0.0));
            if ok && pred > 0.0 {
                let new_cost = new_cost.unwrap();
                let rho = (cost - new_cost) / pred;
                let small_step = delta
                    .iter()
                    .zip(&p)
                    .all(|(d, x)| d.abs() <= opts.xtol * (x.abs() + opts.xtol));
                let small_red = (cost - new_cost) <= opts.ftol * cost && pred <= opts.ftol * cost;
                p = trial;
                std::mem::swap(&mut r, &mut r_new);
                cost = new_cost;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                accepted = true;
                if small_step || small_red || cost == 0.0 {
                    converged = true;
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
                if !lambda.is_finite() || lambda > 1e300 {
                    break;
                }
            }
        }
        if !accepted {
            // No representable step decreases the cost any further.
            converged = true;
            break;
        }
        problem.jac(&p, &r, &mut jac)?;
    }

    let covariance = covariance(problem, &jac, cost, opts)?;
    Ok(FitResult {
        names: problem.names.clone(),
        kinds: problem.kinds.clone(),
        params: p,
        covariance,
        residual_norm: r.norm(),
        chi2: 2.0 * cost,
        dof: m - n,
        n_iter,
        converged,
        warnings: Vec::new(),
    })
}

fn covariance(problem: &Problem<'_>, jac: &DMatrix<f64>, cost: f64, opts: &LmOptions) -> Result<Vec<Vec<f64>>> {
    let (m, n) = jac.shape();
    let norms: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    let dead: Vec<String> = (0..n)
        .filter(|&j| norms[j] == 0.0 || !norms[j].is_finite())
        .map(|j| problem.names[j].clone())
        .collect();
    if !dead.is_empty() {
        return Err(Error::RankDeficient { directions: dead });
    }
    let scaled = DMatrix::from_fn(m, n, |i, j| jac[(i, j)] / norms[j]);
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let smax = svd.singular_values.max();
    let mut directions = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= opts.rank_tol * smax {
            let row = v_t.row(k);
            let big = row.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let combo: Vec<String> = (0..n)
                .filter(|&j| row[j].abs() >= 0.3 * big)
                .map(|j| format!("{:+.3}·{}", row[j], problem.names[j]))
                .collect();
            directions.push(combo.join(" "));
        }
    }
    if !directions.is_empty() {
        return Err(Error::RankDeficient { directions });
    }
    let scale = if opts.scale_covariance {
        2.0 * cost / (m - n).max(1) as f64
    } else {
        1.0
    };
    let mut cov = vec![vec![0.0; n]; n];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v_t[(k, i)] * v_t[(k, j)] / svd.singular_values[k].powi(2);
            }
            *c = scale * acc / (norms[i] * norms[j]);
        }
    }
    // Exactly symmetric: (i, j) and (j, i) are the same commuted products.
    Ok(cov)
}

/// A scalar model `f(x; p)` for curve fitting.
pub trait CurveModel: Sync {
    type X: Copy + Sync;

    fn names(&self) -> Vec<&'static str>;

    fn eval(&self, x: Self::X, p: &[f64]) -> f64;

    /// Writes `∂f/∂p` into `grad` and returns `true`, or returns `false` if
    /// the model has no analytic derivative.
    fn gradient(&self, _x: Self::X, _p: &[f64], _grad: &mut [f64]) -> bool {
        false
    }
}

/// Weighted fit of `model` to `(xs, ys)`; residuals `(f − y)/σ`.
pub fn fit_curve<M: CurveModel>(
    model: &M,
    xs: &[M::X],
    ys: &[f64],
    sigma: Option<&[f64]>,
    init: &[f64],
    bounds: Option<(&[f64], &[f64])>,
    opts: &LmOptions,
) -> Result<FitResult> {
    if xs.len() != ys.len() || sigma.is_some_and(|s| s.len() != ys.len()) {
        return Err(Error::InvalidParameter {
            name: "data",
            reason: "x, y and sigma lengths differ".into(),
        });
    }
    if let Some(s) = sigma {
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "sigmas must be finite and > 0".into(),
            });
        }
    }
    let names = model.names();
    let n = names.len();
    let w = |i: usize| sigma.map_or(1.0, |s| 1.0 / s[i]);
    let residual = |p: &[f64], r: &mut [f64]| {
        for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
            r[i] = (model.eval(*x, p) - y) * w(i);
        }
        Ok(())
    };
    let mut problem = Problem::new(&names, xs.len(), residual);
    let mut g = vec![0.0; n];
    let analytic = xs.first().is_some_and(|x| model.gradient(*x, init, &mut g));
    if analytic {
        problem = problem.with_jacobian(move |p: &[f64], jac: &mut DMatrix<f64>| {
            let mut g = vec![0.0; n];
            for (i, x) in xs.iter().enumerate() {
                model.gradient(*x, p, &mut g);
                for k in 0..n {
                    jac[(i, k)] = g[k] * w(i);
                }
            }
            Ok(())
        });
    }
    if let Some((lo, hi)) = bounds {
        problem = problem.with_bounds(lo, hi);
    }
    damped_least_squares(&problem, init, opts)
}

/// Derivative of `f` at `x` by Ridders' extrapolation of central
/// differences, starting from step `h`.
pub fn ridders_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    ridders_with_error(f, x, h).0
}

/// Ridders' estimate together with its extrapolation error.
fn ridders_with_error<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> (f64, f64) {
    const CON: f64 = 1.4;
    const NTAB: usize = 10;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut hh = h;
    a[0][0] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    // Rounding in f bounds how well any difference on step h can do;
    // without this a quantised f reports a spuriously exact derivative.
    let fx = f(x).abs();
    let noise = |h: f64| 4.0 * f64::EPSILON * fx / h;
    for i in 1..NTAB {
        hh /= CON;
        a[0][i] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
        let mut fac = CON * CON;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (a[j][i] - a[j - 1][i])
                .abs()
                .max((a[j][i] - a[j - 1][i - 1]).abs())
                .max(noise(hh));
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}

/// Largest relative mismatch between the analytic gradient and
/// extrapolated central differences at `(x, p)`.
pub fn gradient_mismatch<M: CurveModel>(model: &M, x: M::X, p: &[f64]) -> Option<f64> {
    let n = p.len();
    let mut g = vec![0.0; n];
    if !model.gradient(x, p, &mut g) {
        return None;
    }
    let pmax = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let fscale = model.eval(x, p).abs();
    let gscale = g.iter().zip(p).map(|(a, b)| (a * b).abs()).fold(fscale, f64::max);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let scale = if p[k].abs() > 1e-8 * pmax {
            p[k].abs()
        } else {
            (1e-3 * pmax).max(1e-12)
        };
        let f = |v: f64| {
            let mut q = p.to_vec();
            q[k] = v;
            model.eval(x, &q)
        };
        // A parameter's magnitude need not match the scale on which the
        // model varies (a line centre far from zero, say), so several
        // starting steps are tried and the best extrapolation kept.
        let (fd, _) = [1.0, 1e-1, 1e-2, 1e-3, 1e-4]
            .map(|c| ridders_with_error(f, p[k], c * scale))
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // Components that are negligible against the largest sensitivity
        // compare in absolute terms.
        let floor = 1e-9 * gscale / scale;
        let denom = g[k].abs().max(fd.abs()).max(floor);
        worst = worst.max((g[k] - fd).abs() / denom);
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl CurveModel for Line {
        type X = f64;
        fn names(&self) -> Vec<&'static str> {
            vec!["slope", "intercept"]
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            p[0] * x + p[1]
        }
        fn gradient(&self, x: f64, _p: &[f64], g: &mut [f64]) -> bool {
            g[0] = x;
            g[1] = 1.0;
            true
        }
    }

    struct Quadratic;
    impl CurveModel for Quadratic {
        type X = f64;
        fn names(&self) -> Vec<&'static str> {
            vec!["a", "b", "c"]
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            p[0] * x * x + p[1] * x + p[2]
        }
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let f = fit_curve(&Line, &xs, &ys, None, &[0.0, 0.0], None, &LmOptions::default()).unwrap();
        assert!((f.params[0] - 3.0).abs() < 1e-12);
        assert!((f.params[1] + 2.0).abs() < 1e-12);
        assert!(f.residual_norm < 1e-10);
        assert!(f.converged);
    }

    #[test]
    fn interpolating_quadratic_has_no_covariance() {
        let xs = [-1.0, 0.5, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 0.25).collect();
        let f = fit_curve(
            &Quadratic,
            &xs,
            &ys,
            None,
            &[1.0, 1.0, 1.0],
            None,
            &LmOptions::default(),
        )
        .unwrap();
        assert!((f.params[0] - 2.0).abs() < 1e-9);
        assert!(f.covariance.iter().flatten().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn rosenbrock_valley() {
        // r = (10(y − x²), 1 − x)
        let problem = Problem::new(&["x", "y"], 2, |p: &[f64], r: &mut [f64]| {
            r[0] = 10.0 * (p[1] - p[0] * p[0]);
            r[1] = 1.0 - p[0];
            Ok(())
        });
        let f = damped_least_squares(&problem, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!((f.params[0] - 1.0).abs() < 1e-8);
        assert!((f.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bounds_are_respected() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let f = fit_curve(
            &Line,
            &xs,
            &ys,
            None,
            &[0.0, 0.0],
            Some((&[0.0, -1.0], &[2.5, 1.0])),
            &LmOptions::default(),
        )
        .unwrap();
        assert!(f.params[0] <= 2.5 && f.params[1] >= -1.0);
    }

    #[test]
    fn degenerate_direction_named() {
        // Only the sum a + b is identifiable.
        let problem = Problem::new(&["a", "b"], 3, |p: &[f64], r: &mut [f64]| {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = (p[0] + p[1]) * i as f64 - 1.0;
            }
            Ok(())
        });
        match damped_least_squares(&problem, &[0.3, 0.1], &LmOptions::default()) {
            Err(Error::RankDeficient { directions }) => {
                assert!(directions[0].contains('a') && directions[0].contains('b'))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn derived_parameter_propagation() {
        let mut f = FitResult {
            names: vec!["a".into(), "b".into()],
            kinds: vec![ParamKind::Plain; 2],
            params: vec![1.0, 2.0],
            covariance: vec![vec![4.0, 1.0], vec![1.0, 9.0]],
            residual_norm: 0.0,
            chi2: 0.0,
            dof: 0,
            n_iter: 0,
            converged: true,
            warnings: vec![],
        };
        f.push_derived("a-b", ParamKind::Plain, -1.0, &[1.0, -1.0]);
        assert_eq!(f.covariance[2][2], 4.0 + 9.0 - 2.0);
        assert_eq!(f.covariance[0][2], 3.0);
        assert_eq!(f.covariance[2][1], -8.0);
    }

    #[test]
    fn gradient_check_catches_errors() {
        assert!(gradient_mismatch(&Line, 2.0, &[1.0, 1.0]).unwrap() < 1e-9);
        assert!(gradient_mismatch(&Quadratic, 2.0, &[1.0, 1.0, 1.0]).is_none());
    }
}
