//! The spectral functional `Lambda_f(eps)`, the epsilon-Poincaré scaling
//! check, weighted Sobolev sweeps and the nonlinear Coulomb inequality.
//!
//! `Lambda_f(eps)` is the top eigenvalue of `phi -> h phi + eps div(A grad phi)`
//! with zero Dirichlet data, i.e. the best constant in
//! `int h phi^2 <= eps int (A grad phi, grad phi) + Lambda int phi^2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientBundle, CoefficientPlan, MatrixField};
use crate::error::{param, Error, Result};
use crate::grid::{self, ScalarField, VelocityGrid};
use crate::numerics::{fit_line, jacobi_eigen};
use crate::operator::{centered_energy, centered_gradient, Boundary, DiffusionOperator};
use crate::report::DiagnosticsReport;

/// Restarted Lanczos settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosOptions {
    /// Largest basis size before a restart.
    pub krylov: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_matvecs: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            krylov: 60,
            keep: 10,
            tol: 1e-6,
            max_matvecs: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub matvecs: usize,
    /// `||T u - theta u|| / max|theta|` at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(b, a)| *b += alpha * a);
}

/// Largest eigenvalue of a symmetric operator by thick-restarted Lanczos
/// with full reorthogonalisation.
pub fn top_eigenpair(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<EigenPair> {
    let norm0 = dot(start, start).sqrt();
    if !(norm0 > 0.0) {
        return Err(param("start", "zero start vector"));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / norm0).collect()];
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut matvecs = 0;
    let mut tv = vec![0.0; n];
    apply(&basis[0], &mut tv);
    matvecs += 1;
    images.push(tv.clone());
    loop {
        let mut exhausted = false;
        while basis.len() < opts.krylov {
            let mut w = images.last().unwrap().clone();
            let scale = dot(&w, &w).sqrt();
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            let beta = dot(&w, &w).sqrt();
            if !(beta > 1e-12 * scale.max(1e-300)) {
                exhausted = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            apply(&w, &mut tv);
            matvecs += 1;
            basis.push(w);
            images.push(tv.clone());
        }
        let m = basis.len();
        let mut hm = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let x = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                hm[i * m + j] = x;
                hm[j * m + i] = x;
            }
        }
        let (vals, vecs) = jacobi_eigen(&hm, m).ok_or(Error::NoConvergence {
            iterations: matvecs,
            residual: f64::NAN,
        })?;
        let keep = opts.keep.min(m);
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_img = Vec::with_capacity(keep);
        for t in 0..keep {
            let col = m - 1 - t;
            let mut u = vec![0.0; n];
            let mut tu = vec![0.0; n];
            for r in 0..m {
                let y = vecs[r * m + col];
                axpy(y, &basis[r], &mut u);
                axpy(y, &images[r], &mut tu);
            }
            ritz.push(u);
            ritz_img.push(tu);
        }
        let theta = vals[m - 1];
        let scale = vals.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let mut r = ritz_img[0].clone();
        axpy(-theta, &ritz[0], &mut r);
        let res = dot(&r, &r).sqrt();
        let rel = if scale > 0.0 { res / scale } else { 0.0 };
        if rel <= opts.tol || exhausted || scale == 0.0 {
            return Ok(EigenPair {
                value: theta,
                vector: ritz.swap_remove(0),
                matvecs,
                residual: rel,
            });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                residual: rel,
            });
        }
        basis = ritz;
        images = ritz_img;
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &r);
                axpy(-c, v, &mut r);
            }
        }
        let beta = dot(&r, &r).sqrt();
        r.iter_mut().for_each(|x| *x /= beta);
        apply(&r, &mut tv);
        matvecs += 1;
        basis.push(r);
        images.push(tv.clone());
    }
}

/// `T phi = h phi - eps K phi`, optionally in the metric of a mass weight.
pub struct PoincareOperator {
    h: Vec<f64>,
    op: DiffusionOperator,
    /// `W^(-1/2)` for a mass weight `W`.
    inv_sqrt_weight: Option<Vec<f64>>,
    grid: VelocityGrid,
}

impl PoincareOperator {
    pub fn new(bundle: &CoefficientBundle) -> Self {
        Self {
            h: bundle.h.values.clone(),
            op: DiffusionOperator::new(&bundle.matrix, Boundary::Dirichlet),
            inv_sqrt_weight: None,
            grid: bundle.h.grid,
        }
    }

    /// Generalised problem `T phi = lambda W phi` for a positive weight.
    pub fn with_mass_weight(bundle: &CoefficientBundle, weight: &ScalarField) -> Result<Self> {
        if weight.values.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::VanishingWeight("mass weight".into()));
        }
        let mut p = Self::new(bundle);
        p.inv_sqrt_weight = Some(weight.values.iter().map(|w| 1.0 / w.sqrt()).collect());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn apply(&self, eps: f64, x: &[f64], y: &mut [f64]) {
        match &self.inv_sqrt_weight {
            None => {
                self.op.apply(x, y);
                for i in 0..x.len() {
                    y[i] = self.h[i] * x[i] - eps * y[i];
                }
            }
            Some(s) => {
                let xs: Vec<f64> = x.iter().zip(s).map(|(a, b)| a * b).collect();
                self.op.apply(&xs, y);
                for i in 0..x.len() {
                    y[i] = s[i] * (self.h[i] * xs[i] - eps * y[i]);
                }
            }
        }
    }

    /// Default start vector: positive and concentrated where `h` is large.
    pub fn default_start(&self) -> Vec<f64> {
        let hmax = self.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let l = self.grid.half_extent();
        let d = self.grid.dim();
        (0..self.len())
            .map(|i| {
                let v = self.grid.node_vec(i);
                let taper: f64 = v.iter().map(|x| (std::f64::consts::FRAC_PI_2 * x / l).cos()).product();
                (self.h[i].abs() + 1e-3 * hmax + 1e-300) * taper.max(0.0).powi(d as i32) + 1e-12
            })
            .collect()
    }

    pub fn top(&self, eps: f64, start: Option<&[f64]>, opts: &LanczosOptions) -> Result<EigenPair> {
        let owned;
        let start = match start {
            Some(s) => s,
            None => {
                owned = self.default_start();
                &owned
            }
        };
        top_eigenpair(self.len(), |x, y| self.apply(eps, x, y), start, opts)
    }

    /// Dense matrix of `T`, for small oracle problems.
    pub fn dense(&self, eps: f64) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(eps, &e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                a[i * n + j] = col[i];
            }
        }
        a
    }
}

/// `Lambda_f(eps)` for one density.
pub fn lambda_f(f: &ScalarField, gamma: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(param("epsilon", "must be positive"));
    }
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    let bundle = plan.bundle(f)?;
    let op = PoincareOperator::new(&bundle);
    Ok(op.top(eps, None, &LanczosOptions::default())?.value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub gamma: f64,
    pub grid: VelocityGrid,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl LambdaCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,lambda,iterations,residual\n");
        for k in 0..self.epsilons.len() {
            s.push_str(&format!(
                "{:e},{:e},{},{:e}\n",
                self.epsilons[k], self.lambdas[k], self.iterations[k], self.residuals[k]
            ));
        }
        s
    }

    /// Least-squares slope of `log Lambda` against `log eps` over the
    /// `count` smallest epsilons.
    pub fn small_eps_slope(&self, count: usize) -> Option<f64> {
        let mut pairs: Vec<(f64, f64)> = self
            .epsilons
            .iter()
            .copied()
            .zip(self.lambdas.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pts: Vec<(f64, f64)> = pairs.into_iter().take(count).collect();
        if pts.len() < 2 || pts.iter().any(|p| !(p.1 > 0.0)) {
            return None;
        }
        let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        fit_line(&x, &y).map(|f| f.slope)
    }
}

/// Default epsilon grid: `count` log-spaced points in `[1e-3, 1]`.
pub fn default_epsilons(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| 10f64.powf(-3.0 + 3.0 * k as f64 / (count - 1) as f64))
        .collect()
}

/// Lambda over an epsilon grid, warm-starting each solve from the previous
/// eigenvector (largest epsilon first).
pub fn lambda_curve(
    op: &PoincareOperator,
    gamma: f64,
    epsilons: &[f64],
    opts: &LanczosOptions,
) -> Result<LambdaCurve> {
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut lambdas = vec![0.0; eps.len()];
    let mut iterations = vec![0; eps.len()];
    let mut residuals = vec![0.0; eps.len()];
    let mut start: Option<Vec<f64>> = None;
    for k in (0..eps.len()).rev() {
        let pair = op.top(eps[k], start.as_deref(), opts)?;
        lambdas[k] = pair.value;
        iterations[k] = pair.matvecs;
        residuals[k] = pair.residual;
        start = Some(pair.vector);
    }
    Ok(LambdaCurve {
        gamma,
        grid: op.grid,
        epsilons: eps,
        lambdas,
        iterations,
        residuals,
    })
}

/// `Lambda_f(eps)` on the lattice and on a box enlarged to about `1.25 L`
/// by zero padding at the same spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub epsilon: f64,
    pub half_extent: f64,
    pub enlarged_half_extent: f64,
    pub lambda: f64,
    pub lambda_enlarged: f64,
    pub relative_change: f64,
}

pub fn truncation_check(f: &ScalarField, gamma: f64, eps: f64, opts: &LanczosOptions) -> Result<TruncationCheck> {
    let n = f.grid.points_per_axis();
    let big = grid::zero_pad(f, n + 2 * n.div_ceil(8))?;
    let top = |g: &ScalarField| -> Result<f64> {
        let bundle = CoefficientPlan::new(&g.grid, gamma)?.bundle(g)?;
        Ok(PoincareOperator::new(&bundle).top(eps, None, opts)?.value)
    };
    let lambda = top(f)?;
    let lambda_enlarged = top(&big)?;
    Ok(TruncationCheck {
        epsilon: eps,
        half_extent: f.grid.half_extent(),
        enlarged_half_extent: big.grid.half_extent(),
        lambda,
        lambda_enlarged,
        relative_change: (lambda_enlarged - lambda).abs() / lambda.abs().max(f64::MIN_POSITIVE),
    })
}

/// Predicted small-epsilon slope `gamma/(2+gamma)` for `gamma in (-2, 0]`.
pub fn predicted_slope(gamma: f64) -> Option<f64> {
    (gamma > -2.0 && gamma <= 0.0).then(|| gamma / (2.0 + gamma))
}

/// Fits the small-epsilon slope of the plain and the `<v>^gamma`-weighted
/// curves.
pub fn verify_eps_poincare(
    f: &ScalarField,
    gamma: f64,
    epsilons: &[f64],
) -> Result<(DiagnosticsReport, LambdaCurve, LambdaCurve)> {
    if epsilons.len() < 4 {
        return Err(param("epsilons", "need at least 4 samples"));
    }
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    let bundle = plan.bundle(f)?;
    eps_poincare_from_bundle(&bundle, epsilons, &LanczosOptions::default())
}

pub fn eps_poincare_from_bundle(
    bundle: &CoefficientBundle,
    epsilons: &[f64],
    opts: &LanczosOptions,
) -> Result<(DiagnosticsReport, LambdaCurve, LambdaCurve)> {
    if epsilons.len() < 4 {
        return Err(param("epsilons", "need at least 4 samples"));
    }
    let gamma = bundle.gamma;
    let grid = bundle.h.grid;
    let op = PoincareOperator::new(bundle);
    let plain = lambda_curve(&op, gamma, epsilons, opts)?;
    let jv = ScalarField::from_fn(&grid, |v| {
        (1.0 + v.iter().map(|x| x * x).sum::<f64>()).powf(0.5 * gamma)
    });
    let wop = PoincareOperator::with_mass_weight(bundle, &jv)?;
    let weighted = lambda_curve(&wop, gamma, epsilons, opts)?;
    let mut rep = DiagnosticsReport::new(
        "eps_poincare",
        "int h phi^2 <= eps int (A grad phi, grad phi) + C eps^(gamma/(2+gamma)) int phi^2 <v>^gamma",
    );
    rep.value("gamma", gamma);
    if let Some(s) = plain.small_eps_slope(4) {
        rep.value("slope", s);
    }
    if let Some(s) = weighted.small_eps_slope(4) {
        rep.value("weighted_slope", s);
    }
    if let Some(p) = predicted_slope(gamma) {
        rep.value("predicted_slope", p);
    }
    rep.curve("lambda", plain.epsilons.clone(), plain.lambdas.clone());
    rep.curve("lambda_weighted", weighted.epsilons.clone(), weighted.lambdas.clone());
    if plain.lambdas.iter().any(|&l| l < -1e-8) {
        rep.flag("negative lambda beyond tolerance");
    }
    Ok((rep, plain, weighted))
}

/// A random smooth test function: a few random Fourier modes under a
/// compactly supported bump.
pub fn random_test_function<R: Rng>(grid: &VelocityGrid, rng: &mut R) -> ScalarField {
    let d = grid.dim();
    let radius = rng.random_range(1.0..3.0);
    let center: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            (
                (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    ScalarField::from_fn(grid, |v| {
        let r2: f64 = v.iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>()
            / (radius * radius);
        if r2 >= 1.0 {
            return 0.0;
        }
        let bump = (-1.0 / (1.0 - r2)).exp();
        let wave: f64 = modes
            .iter()
            .map(|(k, ph, a)| a * (k.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() + ph).cos())
            .sum();
        bump * (1.0 + wave)
    })
}

fn weighted_grad_sq(weight: &ScalarField, phi: &ScalarField) -> f64 {
    let grad = centered_gradient(phi);
    let mut s = 0.0;
    for i in 0..phi.len() {
        let g2: f64 = grad.iter().map(|g| g.values[i] * g.values[i]).sum();
        s += weight.values[i] * g2;
    }
    s * phi.grid.cell_volume()
}

/// Exponent used for the Coulomb stationary inequality.
pub const COULOMB_SOBOLEV_M: f64 = 2.0;
/// Space-time integrability exponent used in the Coulomb case.
pub const COULOMB_SPACE_TIME_Q: f64 = 3.0;

/// Largest observed LHS/RHS ratios of the weighted Sobolev inequalities
/// with weight `a*` over random test functions.
pub fn verify_weighted_sobolev<R: Rng>(
    f: &ScalarField,
    bundle: &CoefficientBundle,
    trials: usize,
    rng: &mut R,
) -> Result<DiagnosticsReport> {
    let grid = f.grid;
    let d = grid.dim() as f64;
    let gamma = bundle.gamma;
    let coulomb = bundle.norm.is_coulomb();
    let a_star = &bundle.a_star;
    let vol = grid.cell_volume();
    let mut rep = DiagnosticsReport::new(
        "weighted_sobolev",
        if coulomb {
            "(int phi^2m a*^m)^(1/m) <= C int a* |grad phi|^2 + phi^2"
        } else {
            "(int phi^(2d/(d-2)) a*^((d-2)/d))^((d-2)/d) <= C int a* |grad phi|^2 + phi^2"
        },
    );
    let slices = 8;
    let mut best_stationary = 0.0f64;
    let mut best_space_time = 0.0f64;
    for _ in 0..trials {
        let phi = random_test_function(&grid, rng);
        let energy = weighted_grad_sq(a_star, &phi);
        let l2: f64 = vol * phi.values.iter().map(|x| x * x).sum::<f64>();
        let lhs = if coulomb {
            let m = COULOMB_SOBOLEV_M;
            let s: f64 = phi
                .values
                .iter()
                .zip(&a_star.values)
                .map(|(p, a)| p.abs().powf(2.0 * m) * a.max(0.0).powf(m))
                .sum();
            (vol * s).powf(1.0 / m)
        } else {
            let q = 2.0 * d / (d - 2.0);
            let s: f64 = phi
                .values
                .iter()
                .zip(&a_star.values)
                .map(|(p, a)| p.abs().powf(q) * a.max(0.0).powf((d - 2.0) / d))
                .sum();
            (vol * s).powf((d - 2.0) / d)
        };
        let rhs = energy + l2;
        if rhs > 0.0 {
            best_stationary = best_stationary.max(lhs / rhs);
        }
        // synthetic time slices phi(v) theta_j on a unit interval
        let thetas: Vec<f64> = (0..slices).map(|_| rng.random_range(0.5..1.5)).collect();
        let dt = 1.0 / slices as f64;
        let (q, outer) = if coulomb {
            (COULOMB_SPACE_TIME_Q, 2.0 / COULOMB_SPACE_TIME_Q)
        } else {
            (2.0 * (1.0 + 2.0 / d), 1.0 / (1.0 + 2.0 / d))
        };
        let base: f64 = vol
            * phi
                .values
                .iter()
                .zip(&a_star.values)
                .map(|(p, a)| p.abs().powf(q) * a.max(0.0))
                .sum::<f64>();
        let lhs_t = (thetas.iter().map(|t| dt * t.powf(q)).sum::<f64>() * base).powf(outer);
        let theta_max2 = thetas.iter().fold(0.0f64, |m, t| m.max(t * t));
        let rhs_t = thetas.iter().map(|t| dt * t * t).sum::<f64>() * energy + theta_max2 * l2;
        if rhs_t > 0.0 {
            best_space_time = best_space_time.max(lhs_t / rhs_t);
        }
    }
    rep.value("gamma", gamma);
    rep.value("trials", trials as f64);
    rep.value("stationary_constant", best_stationary);
    rep.value("space_time_constant", best_space_time);
    if gamma < -2.0 {
        let centers: Vec<Vec<f64>> = (0..grid.len())
            .step_by(5)
            .map(|i| grid.node_vec(i))
            .filter(|c| c.iter().map(|x| x * x).sum::<f64>() <= 9.0)
            .collect();
        let radii: Vec<f64> = [0.5, 0.75].into_iter().filter(|&r| r >= grid.spacing()).collect();
        let cd = crate::weights::doubling_constant(f, &centers, &radii)?;
        rep.value("doubling_constant", cd.value);
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GksResult {
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when both sides vanish.
    pub ratio: Option<f64>,
}

/// `int f^(p+1)` against `((p+1)/p)^2 int (A grad f^(p/2), grad f^(p/2))`
/// with the Coulomb matrix.
pub fn gks_check(f: &ScalarField, p: f64) -> Result<GksResult> {
    let d = f.grid.dim() as f64;
    f.check_density()?;
    if f.is_zero() {
        return Ok(GksResult {
            lhs: 0.0,
            rhs: 0.0,
            ratio: None,
        });
    }
    let plan = CoefficientPlan::new(&f.grid, -d)?;
    let bundle = plan.bundle(f)?;
    gks_from_matrix(f, &bundle.matrix, p)
}

pub fn gks_from_matrix(f: &ScalarField, matrix: &MatrixField, p: f64) -> Result<GksResult> {
    if !(p > 0.0) {
        return Err(param("p", "must be positive"));
    }
    f.check_density()?;
    let vol = f.grid.cell_volume();
    let lhs = vol * f.values.iter().map(|x| x.powf(p + 1.0)).sum::<f64>();
    let u = f.map(|x| x.powf(0.5 * p));
    let rhs = ((p + 1.0) / p).powi(2) * centered_energy(matrix, &u);
    let ratio = if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs == 0.0 {
        None
    } else {
        Some(f64::INFINITY)
    };
    Ok(GksResult { lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::maxwellian;

    #[test]
    fn lanczos_finds_top_of_diagonal() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let top = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = vec![1.0; n];
        let r = top_eigenpair(
            n,
            |x, y| {
                for i in 0..n {
                    y[i] = diag[i] * x[i];
                }
            },
            &start,
            &LanczosOptions::default(),
        )
        .unwrap();
        assert!((r.value - top).abs() < 1e-10);
    }

    #[test]
    fn zero_density_gives_zero() {
        let g = VelocityGrid::new(3, 4.0, 8).unwrap();
        let f = ScalarField::zeros(&g);
        assert_eq!(lambda_f(&f, -1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn gks_zero_density_flagged() {
        let g = VelocityGrid::new(3, 4.0, 8).unwrap();
        let r = gks_check(&ScalarField::zeros(&g), 1.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, None));
    }

    #[test]
    fn lambda_monotone_in_eps() {
        let g = VelocityGrid::new(3, 6.0, 12).unwrap();
        let f = maxwellian(&g);
        let plan = CoefficientPlan::new(&g, -1.0).unwrap();
        let op = PoincareOperator::new(&plan.bundle(&f).unwrap());
        let c = lambda_curve(&op, -1.0, &default_epsilons(5), &LanczosOptions::default()).unwrap();
        for w in c.lambdas.windows(2) {
            assert!(w[0] >= w[1] - 1e-10);
        }
    }
}
