//! Time stepping for `d_t f = Q(f, f)` with conservation and entropy
//! accounting.
//!
//! The divergence form is `div(A grad f - f b)` with `b = div A`, so that it
//! agrees with the non-divergence form `tr(A D^2 f) + f h` (`div b = -h`).
//! Its flux is discretised relative to a reference Maxwellian; see
//! [`StepCoefficients`].

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::{a_field, CoefficientBundle, CoefficientPlan, MatrixField, StaggeredMatrix};
use crate::error::{param, Error, Result};
use crate::fft::spectral_gradient;
use crate::grid::{ScalarField, VelocityGrid};
use crate::operator::{centered_energy, centered_gradient, Boundary, DiffusionOperator};
use crate::report::DiagnosticsReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Divergence,
    Nondivergence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Imex,
    Explicit,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex" => Ok(Self::Imex),
            "explicit" => Ok(Self::Explicit),
            _ => Err(param("scheme", format!("unknown scheme `{s}`"))),
        }
    }
}

/// `div(f b)` with centred face averages and zero flux through the boundary.
pub fn drift_divergence(f: &[f64], drift: &[ScalarField], grid: &VelocityGrid) -> Vec<f64> {
    let n = grid.points_per_axis();
    let d = grid.dim();
    let hinv = 1.0 / grid.spacing();
    let mut out = vec![0.0; f.len()];
    let mut idx = vec![0usize; d];
    for k in 0..d {
        let stride = grid.stride(k);
        let bk = &drift[k].values;
        for i in 0..f.len() {
            grid.unravel(i, &mut idx);
            if idx[k] + 1 < n {
                let j = i + stride;
                let flux = 0.5 * (f[i] * bk[i] + f[j] * bk[j]) * hinv;
                out[i] += flux;
                out[j] -= flux;
            }
        }
    }
    out
}

/// Maxwellian with the mass, mean and temperature of a reference density,
/// used as the weight of the divergence-form flux. The log is floored so the
/// weight stays representable far from the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceMaxwellian {
    pub mean: Vec<f64>,
    pub temperature: f64,
}

const LOG_WEIGHT_FLOOR: f64 = -600.0;

impl ReferenceMaxwellian {
    pub fn of(f: &ScalarField) -> Result<Self> {
        let m = conserved_moments(f);
        if !(m.mass > 0.0) {
            return Err(Error::ZeroField);
        }
        let d = f.grid.dim() as f64;
        let mean: Vec<f64> = m.momentum.iter().map(|p| p / m.mass).collect();
        let u2: f64 = mean.iter().map(|x| x * x).sum();
        let temperature = (m.energy / m.mass - u2) / d;
        if !(temperature > 0.0) {
            return Err(param("f", "nonpositive temperature"));
        }
        Ok(Self { mean, temperature })
    }

    fn exponent(&self, v: &[f64]) -> f64 {
        let r2: f64 = v.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * r2 / self.temperature
    }

    /// Unnormalised weight `exp(-|v - u|^2 / 2T)`.
    pub fn weight(&self, v: &[f64]) -> f64 {
        self.exponent(v).max(LOG_WEIGHT_FLOOR).exp()
    }

    /// `grad log` of the weight.
    pub fn log_gradient(&self, v: &[f64], out: &mut [f64]) {
        let live = self.exponent(v) > LOG_WEIGHT_FLOOR;
        for (k, o) in out.iter_mut().enumerate() {
            *o = if live { -(v[k] - self.mean[k]) / self.temperature } else { 0.0 };
        }
    }
}

/// Coefficients a step needs.
///
/// The divergence-form flux is written against the reference Maxwellian `M`
/// of the density the coefficients were built from:
///
/// ```text
/// A grad f - f b = A M grad(f / M) - f (b - A grad log M),
/// ```
///
/// with `A M` sampled at the dual-cube centres. A discrete Maxwellian is then
/// an exact null vector of the diffusion part, and the residual drift
/// `b - A grad log M` vanishes at equilibrium up to quadrature error, so
/// steep tails do not drive the centred drift flux negative.
#[derive(Clone, Debug)]
pub struct StepCoefficients {
    pub bundle: CoefficientBundle,
    pub staggered: StaggeredMatrix,
    pub reference: ReferenceMaxwellian,
    /// `M` at the nodes.
    pub weight: Vec<f64>,
    /// `b - A grad log M` at the nodes.
    pub residual_drift: Vec<ScalarField>,
}

impl StepCoefficients {
    pub fn compute(plan: &CoefficientPlan, f: &ScalarField) -> Result<Self> {
        let bundle = plan.bundle(f)?;
        let reference = ReferenceMaxwellian::of(f)?;
        let staggered = plan.staggered_matrix(f)?.weighted(|v| reference.weight(v));
        let grid = f.grid;
        let d = grid.dim();
        let mut v = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut weight = vec![0.0; grid.len()];
        let mut residual_drift: Vec<ScalarField> = bundle.drift.clone();
        for (i, w) in weight.iter_mut().enumerate() {
            grid.node(i, &mut v);
            *w = reference.weight(&v);
            reference.log_gradient(&v, &mut g);
            for (k, r) in residual_drift.iter_mut().enumerate() {
                let ag: f64 = (0..d).map(|l| bundle.matrix.get(i, k, l) * g[l]).sum();
                r.values[i] -= ag;
            }
        }
        Ok(Self {
            bundle,
            staggered,
            reference,
            weight,
            residual_drift,
        })
    }

    /// `K` with `(K u, u) = int (A M grad u, grad u)`, acting on `u = f / M`.
    pub fn diffusion(&self) -> DiffusionOperator {
        DiffusionOperator::from_staggered(&self.staggered, Boundary::Neumann)
    }

    pub fn ratio(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.weight).map(|(a, w)| a / w).collect()
    }
}

/// `Q(f, f)` from precomputed coefficients.
pub fn collision_from_coefficients(f: &ScalarField, coef: &StepCoefficients, form: Form) -> ScalarField {
    let grid = f.grid;
    let bundle = &coef.bundle;
    match form {
        Form::Divergence => {
            let op = coef.diffusion();
            let mut kf = vec![0.0; f.len()];
            op.apply(&coef.ratio(&f.values), &mut kf);
            let div = drift_divergence(&f.values, &coef.residual_drift, &grid);
            let values = kf.iter().zip(&div).map(|(a, b)| -a - b).collect();
            ScalarField { grid, values }
        }
        Form::Nondivergence => {
            let mut values = hessian_contract(f, &bundle.matrix);
            for (q, (fi, hi)) in values.iter_mut().zip(f.values.iter().zip(&bundle.h.values)) {
                *q += fi * hi;
            }
            ScalarField { grid, values }
        }
    }
}

/// `tr(A D^2 u)` with centred second differences; ghost nodes copy the
/// nearest boundary node.
pub fn hessian_contract(u: &ScalarField, matrix: &MatrixField) -> Vec<f64> {
    let grid = u.grid;
    let d = grid.dim();
    let n = grid.points_per_axis() as i64;
    let h2 = grid.spacing() * grid.spacing();
    let mut idx = vec![0usize; d];
    let mut out = vec![0.0; u.len()];
    let at = |base: &[usize], k: usize, dk: i64, l: usize, dl: i64| -> f64 {
        let mut flat = 0usize;
        for (a, &b) in base.iter().enumerate() {
            let mut c = b as i64;
            if a == k {
                c += dk;
            }
            if a == l {
                c += dl;
            }
            flat += (c.clamp(0, n - 1) as usize) * grid.stride(a);
        }
        u.values[flat]
    };
    for (i, o) in out.iter_mut().enumerate() {
        grid.unravel(i, &mut idx);
        let mut s = 0.0;
        for k in 0..d {
            let dkk = at(&idx, k, 1, k, 0) - 2.0 * u.values[i] + at(&idx, k, -1, k, 0);
            s += matrix.get(i, k, k) * dkk / h2;
            for l in (k + 1)..d {
                let dkl = at(&idx, k, 1, l, 1) - at(&idx, k, 1, l, -1) - at(&idx, k, -1, l, 1)
                    + at(&idx, k, -1, l, -1);
                s += 2.0 * matrix.get(i, k, l) * dkl / (4.0 * h2);
            }
        }
        *o = s;
    }
    out
}

/// `Q_gamma(f, f)` in the requested form.
pub fn collision_operator(f: &ScalarField, gamma: f64, form: Form) -> Result<ScalarField> {
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    let coef = StepCoefficients::compute(&plan, f)?;
    Ok(collision_from_coefficients(f, &coef, form))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
}

/// Mass, momentum and energy by midpoint quadrature.
pub fn conserved_moments(f: &ScalarField) -> Moments {
    let grid = f.grid;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut v = vec![0.0; d];
    let mut mass = 0.0;
    let mut momentum = vec![0.0; d];
    let mut energy = 0.0;
    for (i, &x) in f.values.iter().enumerate() {
        grid.node(i, &mut v);
        mass += x;
        for k in 0..d {
            momentum[k] += x * v[k];
        }
        energy += x * v.iter().map(|y| y * y).sum::<f64>();
    }
    Moments {
        mass: mass * vol,
        momentum: momentum.into_iter().map(|m| m * vol).collect(),
        energy: energy * vol,
    }
}

/// `H(f) = int f log f` with `0 log 0 = 0`.
pub fn entropy(f: &ScalarField) -> f64 {
    f.grid.cell_volume()
        * f.values
            .iter()
            .map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 })
            .sum::<f64>()
}

/// `D(f) = int 4 (A grad sqrt f, grad sqrt f) - f h` from a bundle, with
/// Fourier-differentiated `grad sqrt f`.
pub fn entropy_production_from_bundle(f: &ScalarField, bundle: &CoefficientBundle) -> f64 {
    let root = f.map(|x| x.max(0.0).sqrt());
    let grad = spectral_gradient(&root);
    let d = f.grid.dim();
    let mut energy = 0.0;
    for i in 0..f.len() {
        for k in 0..d {
            let gk = grad[k].values[i];
            energy += bundle.matrix.get(i, k, k) * gk * gk;
            for l in (k + 1)..d {
                energy += 2.0 * bundle.matrix.get(i, k, l) * gk * grad[l].values[i];
            }
        }
    }
    let fh: f64 = f.values.iter().zip(&bundle.h.values).map(|(a, b)| a * b).sum();
    (4.0 * energy - fh) * f.grid.cell_volume()
}

pub fn entropy_production(f: &ScalarField, gamma: f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    Ok(entropy_production_from_bundle(f, &plan.bundle(f)?))
}

/// One ledger row, recorded after every accepted step and at time zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub entropy: f64,
    pub entropy_production: f64,
    /// Flux that would have left through the truncation boundary this step.
    pub boundary_flux_leak: f64,
    pub clipped_nodes: usize,
    pub clipped_mass: f64,
    pub cg_iterations: usize,
    /// `max(0, H_new - H_old)`.
    pub entropy_increase: f64,
}

impl LedgerRow {
    pub const CSV_HEADER: &'static str = "step,time,dt,mass,momentum,energy,entropy,entropy_production,boundary_flux_leak,clipped_nodes,clipped_mass,cg_iterations,entropy_increase";

    pub fn csv(&self) -> String {
        let mom = self
            .momentum
            .iter()
            .map(|m| format!("{m:e}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{},{:e},{},{:e}",
            self.step,
            self.time,
            self.dt,
            self.mass,
            mom,
            self.energy,
            self.entropy,
            self.entropy_production,
            self.boundary_flux_leak,
            self.clipped_nodes,
            self.clipped_mass,
            self.cg_iterations,
            self.entropy_increase
        )
    }
}

pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut s = String::from(LedgerRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub f: ScalarField,
    pub time: f64,
    pub gamma: f64,
    pub step_index: usize,
    pub ledger: Vec<LedgerRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    /// `min(cfl h^2 / max a, reaction / max h)` for explicit steps and
    /// `reaction / max h` for imex steps.
    Auto { cfl: f64, reaction: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self::Auto {
            cfl: 0.5,
            reaction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: DtPolicy,
    /// Relative mass drift that aborts the run.
    pub mass_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Recompute coefficients every this many steps.
    pub coefficient_stride: usize,
    /// Explicit stability guard `dt <= guard h^2 / max a`.
    pub explicit_guard: f64,
    /// Rescale after each step to restore the initial moments.
    pub projection: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Imex,
            dt: DtPolicy::default(),
            mass_tol: 1e-8,
            cg_tol: 1e-10,
            cg_max_iter: 10_000,
            coefficient_stride: 1,
            explicit_guard: 0.5,
            projection: false,
        }
    }
}

/// Jacobi-preconditioned CG for `(diag(w) + s K) u = b`, started from `u0`.
#[allow(clippy::too_many_arguments)]
fn cg_weighted(
    op: &DiffusionOperator,
    w: &[f64],
    s: f64,
    b: &[f64],
    u0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            y[i] = w[i] * x[i];
        }
        op.apply_add(x, s, y);
    };
    let inv: Vec<f64> = op.diagonal().iter().zip(w).map(|(k, wi)| 1.0 / (wi + s * k)).collect();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = u0.to_vec();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Outward flux `(A grad f - f b) . n` summed over boundary faces, times the
/// face area.
fn boundary_flux(f: &ScalarField, bundle: &CoefficientBundle) -> f64 {
    let grid = f.grid;
    let d = grid.dim();
    let n = grid.points_per_axis();
    let grad = centered_gradient(f);
    let area = grid.cell_volume() / grid.spacing();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    for i in 0..f.len() {
        grid.unravel(i, &mut idx);
        for k in 0..d {
            let sign = if idx[k] == 0 {
                -1.0
            } else if idx[k] == n - 1 {
                1.0
            } else {
                continue;
            };
            let mut flux = -f.values[i] * bundle.drift[k].values[i];
            for l in 0..d {
                flux += bundle.matrix.get(i, k, l) * grad[l].values[i];
            }
            total += (sign * flux).abs() * area;
        }
    }
    total
}

/// Lagged-coefficient stepper owning the convolution plan.
pub struct Solver {
    plan: CoefficientPlan,
    pub config: SolverConfig,
    coef: Option<StepCoefficients>,
    since_refresh: usize,
    initial: Option<Moments>,
}

impl Solver {
    pub fn new(grid: &VelocityGrid, gamma: f64, config: SolverConfig) -> Result<Self> {
        if config.coefficient_stride == 0 {
            return Err(param("coefficient_stride", "must be at least 1"));
        }
        Ok(Self {
            plan: CoefficientPlan::new(grid, gamma)?,
            config,
            coef: None,
            since_refresh: 0,
            initial: None,
        })
    }

    pub fn plan(&self) -> &CoefficientPlan {
        &self.plan
    }

    /// Builds the initial state and its ledger row.
    pub fn init(&mut self, f: ScalarField) -> Result<SolverState> {
        f.check_density()?;
        if f.grid != *self.plan.grid() {
            return Err(Error::InvalidGrid("density grid differs from solver grid".into()));
        }
        let coef = StepCoefficients::compute(&self.plan, &f)?;
        let bundle = &coef.bundle;
        let m = conserved_moments(&f);
        let row = LedgerRow {
            step: 0,
            time: 0.0,
            dt: 0.0,
            mass: m.mass,
            momentum: m.momentum.clone(),
            energy: m.energy,
            entropy: entropy(&f),
            entropy_production: entropy_production_from_bundle(&f, bundle),
            boundary_flux_leak: 0.0,
            clipped_nodes: 0,
            clipped_mass: 0.0,
            cg_iterations: 0,
            entropy_increase: 0.0,
        };
        self.coef = Some(coef);
        self.since_refresh = 0;
        self.initial = Some(m);
        Ok(SolverState {
            f,
            time: 0.0,
            gamma: self.plan.normalization().gamma,
            step_index: 0,
            ledger: vec![row],
        })
    }

    pub fn coefficients(&self) -> Option<&StepCoefficients> {
        self.coef.as_ref()
    }

    /// The step size the configured policy selects for the current state.
    pub fn auto_dt(&self) -> Result<f64> {
        let b = &self.coef.as_ref().ok_or(param("state", "solver not initialised"))?.bundle;
        match self.config.dt {
            DtPolicy::Fixed { dt } => Ok(dt),
            DtPolicy::Auto { cfl, reaction } => {
                let hmax = b.h.max_abs();
                let react = if hmax > 0.0 { reaction / hmax } else { f64::INFINITY };
                let dt = match self.config.scheme {
                    Scheme::Imex => react,
                    Scheme::Explicit => {
                        let h = b.h.grid.spacing();
                        let amax = b.a.max_abs();
                        let diff = if amax > 0.0 { cfl * h * h / amax } else { f64::INFINITY };
                        diff.min(react)
                    }
                };
                if dt.is_finite() {
                    Ok(dt)
                } else {
                    Ok(1.0)
                }
            }
        }
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &mut SolverState, dt: f64) -> Result<()> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(param("dt", "must be finite and nonnegative"));
        }
        if self.coef.is_none() {
            return Err(param("state", "solver not initialised"));
        }
        let grid = state.f.grid;
        if dt == 0.0 {
            state.step_index += 1;
            let mut row = state.ledger.last().cloned().expect("ledger has an initial row");
            row.step = state.step_index;
            row.dt = 0.0;
            row.boundary_flux_leak = 0.0;
            row.clipped_nodes = 0;
            row.clipped_mass = 0.0;
            row.cg_iterations = 0;
            row.entropy_increase = 0.0;
            state.ledger.push(row);
            return Ok(());
        }
        let coef = self.coef.as_ref().expect("checked above");
        let bundle = &coef.bundle;
        let leak = dt * boundary_flux(&state.f, bundle);
        let div = drift_divergence(&state.f.values, &coef.residual_drift, &grid);
        let op = coef.diffusion();
        let ratio = coef.ratio(&state.f.values);
        let mut iterations = 0;
        let mut next: Vec<f64> = match self.config.scheme {
            Scheme::Explicit => {
                let h = grid.spacing();
                let limit = self.config.explicit_guard * h * h / bundle.a.max_abs().max(1e-300);
                if dt > limit * (1.0 + 1e-12) {
                    return Err(Error::Stability { dt, limit });
                }
                let mut kf = vec![0.0; state.f.len()];
                op.apply(&ratio, &mut kf);
                (0..state.f.len())
                    .map(|i| state.f.values[i] - dt * (kf[i] + div[i]))
                    .collect()
            }
            Scheme::Imex => {
                let rhs: Vec<f64> = state.f.values.iter().zip(&div).map(|(f, q)| f - dt * q).collect();
                let (u, it) = cg_weighted(&op, &coef.weight, dt, &rhs, &ratio, self.config.cg_tol, self.config.cg_max_iter)?;
                iterations = it;
                u.iter().zip(&coef.weight).map(|(a, w)| a * w).collect()
            }
        };
        let mut clipped_nodes = 0;
        let mut clipped = 0.0;
        for x in next.iter_mut() {
            if *x < 0.0 {
                clipped_nodes += 1;
                clipped -= *x;
                *x = 0.0;
            }
        }
        let mut f = ScalarField { grid, values: next };
        if self.config.projection {
            if let Some(target) = &self.initial {
                f = project_moments(&f, target)?;
            }
        }
        self.since_refresh += 1;
        if self.since_refresh >= self.config.coefficient_stride {
            self.coef = Some(StepCoefficients::compute(&self.plan, &f)?);
            self.since_refresh = 0;
        }
        let bundle = &self.coef.as_ref().expect("set above").bundle;
        let m = conserved_moments(&f);
        let h_new = entropy(&f);
        let prev = state.ledger.last().expect("ledger has an initial row");
        let m0 = state.ledger[0].mass;
        let drift = (m.mass - m0).abs();
        if drift > self.config.mass_tol * m0.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::MassDrift {
                drift,
                tol: self.config.mass_tol,
            });
        }
        let row = LedgerRow {
            step: state.step_index + 1,
            time: state.time + dt,
            dt,
            mass: m.mass,
            momentum: m.momentum,
            energy: m.energy,
            entropy: h_new,
            entropy_production: entropy_production_from_bundle(&f, bundle),
            boundary_flux_leak: leak,
            clipped_nodes,
            clipped_mass: clipped * grid.cell_volume(),
            cg_iterations: iterations,
            entropy_increase: (h_new - prev.entropy).max(0.0),
        };
        state.f = f;
        state.time += dt;
        state.step_index += 1;
        state.ledger.push(row);
        Ok(())
    }
}

/// Multiplies `f` by `1 + c0 + c.v + c2 |v|^2` so the moments match `target`.
pub fn project_moments(f: &ScalarField, target: &Moments) -> Result<ScalarField> {
    let grid = f.grid;
    let d = grid.dim();
    let k = d + 2;
    let vol = grid.cell_volume();
    let mut v = vec![0.0; d];
    let mut basis = vec![0.0; k];
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let current = conserved_moments(f);
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[0] = target.mass - current.mass;
    for j in 0..d {
        rhs[1 + j] = target.momentum[j] - current.momentum[j];
    }
    rhs[k - 1] = target.energy - current.energy;
    let fill = |v: &[f64], basis: &mut [f64]| {
        basis[0] = 1.0;
        basis[1..=d].copy_from_slice(v);
        basis[d + 1] = v.iter().map(|x| x * x).sum();
    };
    for (i, &x) in f.values.iter().enumerate() {
        grid.node(i, &mut v);
        fill(&v, &mut basis);
        for a in 0..k {
            for b in 0..k {
                gram[(a, b)] += x * basis[a] * basis[b] * vol;
            }
        }
    }
    let coef = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| param("f", "moment system is singular"))?;
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            grid.node(i, &mut v);
            fill(&v, &mut basis);
            let s: f64 = (0..k).map(|a| coef[a] * basis[a]).sum();
            (x * (1.0 + s)).max(0.0)
        })
        .collect();
    Ok(ScalarField { grid, values })
}

/// Stored snapshots of a run plus its ledger.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    pub ledger: Vec<LedgerRow>,
}

impl Trajectory {
    pub fn grid(&self) -> &VelocityGrid {
        &self.fields[0].grid
    }

    /// Index of the snapshot at `t` (to a relative `1e-9`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// A stationary trajectory repeating `f` at the given times.
    pub fn constant(f: &ScalarField, gamma: f64, times: &[f64]) -> Self {
        Self {
            gamma,
            times: times.to_vec(),
            fields: vec![f.clone(); times.len()],
            ledger: Vec::new(),
        }
    }
}

/// Runs from `f0` to `t_final`, storing a snapshot every `stride` steps and
/// at the end; `on_snapshot` sees each stored snapshot.
pub fn run(
    solver: &mut Solver,
    f0: ScalarField,
    t_final: f64,
    stride: usize,
    on_snapshot: impl FnMut(usize, f64, &ScalarField) -> Result<()>,
) -> Result<Trajectory> {
    drive(solver, f0, t_final, stride, false, on_snapshot)
}

/// As [`run`], but `on_step` sees the state after every step, stored or not.
pub fn run_observed(
    solver: &mut Solver,
    f0: ScalarField,
    t_final: f64,
    stride: usize,
    on_step: impl FnMut(usize, f64, &ScalarField) -> Result<()>,
) -> Result<Trajectory> {
    drive(solver, f0, t_final, stride, true, on_step)
}

fn drive(
    solver: &mut Solver,
    f0: ScalarField,
    t_final: f64,
    stride: usize,
    every_step: bool,
    mut observe: impl FnMut(usize, f64, &ScalarField) -> Result<()>,
) -> Result<Trajectory> {
    if !(t_final >= 0.0) {
        return Err(param("t_final", "must be nonnegative"));
    }
    let stride = stride.max(1);
    let mut state = solver.init(f0)?;
    let gamma = state.gamma;
    let mut times = vec![0.0];
    let mut fields = vec![state.f.clone()];
    observe(0, 0.0, &state.f)?;
    let dt0 = solver.auto_dt()?;
    let steps = if t_final > 0.0 { (t_final / dt0 - 1e-9).ceil().max(1.0) as usize } else { 0 };
    let dt = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    for s in 1..=steps {
        solver.step(&mut state, dt)?;
        if s == steps {
            state.time = t_final;
        }
        let keep = s % stride == 0 || s == steps;
        if keep {
            times.push(state.time);
            fields.push(state.f.clone());
        }
        if keep || every_step {
            observe(s, state.time, &state.f)?;
        }
    }
    Ok(Trajectory {
        gamma,
        times,
        fields,
        ledger: state.ledger,
    })
}

/// Entropy identity `H(t1) - H(t2) = int D dt` and the cumulative bound
/// against the Maxwellian with the same moments.
pub fn entropy_production_bound_check(ledger: &[LedgerRow], initial: &ScalarField) -> Result<DiagnosticsReport> {
    if ledger.len() < 2 {
        return Err(param("trajectory", "need at least two ledger rows"));
    }
    let mut rep = DiagnosticsReport::new(
        "entropy_production",
        "H(f(t1)) - H(f(t2)) = int_t1^t2 D(f) dt and int D dt <= H(f_in) - H(rho_f_in)",
    );
    let h0 = ledger[0].entropy;
    let h1 = ledger.last().unwrap().entropy;
    let mut integral = 0.0;
    for w in ledger.windows(2) {
        integral += 0.5 * (w[1].time - w[0].time) * (w[0].entropy_production + w[1].entropy_production);
    }
    let drop = h0 - h1;
    rep.value("entropy_drop", drop);
    rep.value("production_integral", integral);
    let scale = drop.abs().max(integral.abs());
    rep.value("identity_relative_error", if scale > 0.0 { (drop - integral).abs() / scale } else { 0.0 });
    let rho = moment_matched_maxwellian(initial)?;
    let bound = h0 - entropy(&rho);
    rep.value("maxwellian_entropy_gap", bound);
    rep.value("bound_margin", bound - integral);
    let increases = ledger.iter().filter(|r| r.entropy_increase > 0.0).count();
    let worst = ledger.iter().map(|r| r.entropy_increase).fold(0.0, f64::max);
    rep.value("entropy_increase_steps", increases as f64);
    rep.value("max_entropy_increase", worst);
    rep.curve(
        "entropy",
        ledger.iter().map(|r| r.time).collect(),
        ledger.iter().map(|r| r.entropy).collect(),
    );
    Ok(rep)
}

/// The Gaussian with the mass, mean and energy of `f`.
pub fn moment_matched_maxwellian(f: &ScalarField) -> Result<ScalarField> {
    let m = conserved_moments(f);
    if !(m.mass > 0.0) {
        return Err(Error::ZeroField);
    }
    let d = f.grid.dim() as f64;
    let u: Vec<f64> = m.momentum.iter().map(|p| p / m.mass).collect();
    let u2: f64 = u.iter().map(|x| x * x).sum();
    let temp = (m.energy / m.mass - u2) / d;
    if !(temp > 0.0) {
        return Err(param("f", "nonpositive temperature"));
    }
    let g = ScalarField::from_fn(&f.grid, |v| {
        let r2: f64 = v.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * r2 / temp).exp()
    });
    let total: f64 = g.values.iter().sum::<f64>() * f.grid.cell_volume();
    Ok(g.scaled(m.mass / total))
}

/// Smooth approximation to `u^p / p` that becomes linear beyond `h + 1`.
///
/// Built from the cutoff `chi(s)`, a C-infinity step from 1 at `s <= 0` to 0
/// at `s >= 1` with `|chi'| <= 2`; `chi_h(u) = int_0^u chi(s - h) ds` and
/// `phi(u) = int_0^u chi_h^(p-1)`. Closed forms are used below `h` and above
/// `h + 1`; the transition band is tabulated on a uniform mesh and evaluated
/// by Gauss-Legendre from the nearest lower mesh point.
#[derive(Clone, Debug)]
pub struct TruncationFn {
    pub p: f64,
    pub h: f64,
    mesh: usize,
    chi_h: Vec<f64>,
    phi: Vec<f64>,
    phi_bar: Vec<f64>,
    phi_under: Vec<f64>,
}

const TRUNC_NODES: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.591_717_321_247_825,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const TRUNC_WEIGHTS: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.181_341_891_689_181,
    0.181_341_891_689_181,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

/// The cutoff `chi`.
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        b / (a + b)
    }
}

/// `chi'`.
pub fn cutoff_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        let da = a / (s * s);
        let db = -b / ((1.0 - s) * (1.0 - s));
        (db * (a + b) - b * (da + db)) / ((a + b) * (a + b))
    }
}

impl TruncationFn {
    pub fn new(p: f64, h: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(param("p", "must exceed 1"));
        }
        if !(h > 0.0) {
            return Err(param("h", "must be positive"));
        }
        let mesh = 2048;
        let mut t = Self {
            p,
            h,
            mesh,
            chi_h: vec![h; mesh + 1],
            phi: vec![h.powf(p) / p; mesh + 1],
            phi_bar: vec![2.0 / p * (p - 1.0).sqrt() * h.powf(0.5 * p); mesh + 1],
            phi_under: vec![(p - 1.0) / p * h.powf(p); mesh + 1],
        };
        let du = 1.0 / mesh as f64;
        for k in 0..mesh {
            t.chi_h[k + 1] = t.chi_h_local(k, h + (k + 1) as f64 * du);
        }
        for k in 0..mesh {
            let u0 = h + k as f64 * du;
            let u1 = u0 + du;
            t.phi[k + 1] = t.phi[k] + t.partial(u0, u1, |s, tt| tt.chi_h_local(k, s).powf(p - 1.0));
            t.phi_bar[k + 1] = t.phi_bar[k] + t.partial(u0, u1, |s, tt| tt.second_local(k, s).max(0.0).sqrt());
            t.phi_under[k + 1] = t.phi_under[k] + t.partial(u0, u1, |s, tt| s * tt.second_local(k, s));
        }
        Ok(t)
    }

    fn partial(&self, a: f64, b: f64, g: impl Fn(f64, &Self) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let w = b - a;
        TRUNC_NODES
            .iter()
            .zip(&TRUNC_WEIGHTS)
            .map(|(x, wt)| wt * g(a + w * x, self))
            .sum::<f64>()
            * w
    }

    /// `chi_h(u)` for `u` in mesh cell `k`, using only `chi_h[k]`.
    fn chi_h_local(&self, k: usize, u: f64) -> f64 {
        let u0 = self.h + k as f64 / self.mesh as f64;
        let h = self.h;
        self.chi_h[k] + self.partial(u0, u, |s, _| cutoff(s - h))
    }

    fn second_local(&self, k: usize, u: f64) -> f64 {
        let c = self.chi_h_local(k, u);
        (self.p - 1.0) * c.powf(self.p - 2.0) * cutoff(u - self.h)
    }

    fn cell(&self, u: f64) -> usize {
        (((u - self.h) * self.mesh as f64).floor() as usize).min(self.mesh - 1)
    }

    fn band<F: Fn(f64, &Self, usize) -> f64>(&self, table: &[f64], u: f64, g: F) -> f64 {
        let k = self.cell(u);
        let u0 = self.h + k as f64 / self.mesh as f64;
        table[k] + self.partial(u0, u, |s, tt| g(s, tt, k))
    }

    pub fn chi_h(&self, u: f64) -> f64 {
        if u <= self.h {
            u
        } else if u >= self.h + 1.0 {
            self.chi_h[self.mesh]
        } else {
            self.chi_h_local(self.cell(u), u)
        }
    }

    pub fn phi(&self, u: f64) -> f64 {
        let p = self.p;
        if u <= self.h {
            u.max(0.0).powf(p) / p
        } else if u >= self.h + 1.0 {
            self.phi[self.mesh] + self.chi_h[self.mesh].powf(p - 1.0) * (u - self.h - 1.0)
        } else {
            self.band(&self.phi, u, |s, tt, k| tt.chi_h_local(k, s).powf(p - 1.0))
        }
    }

    pub fn phi_prime(&self, u: f64) -> f64 {
        self.chi_h(u.max(0.0)).powf(self.p - 1.0)
    }

    pub fn phi_second(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        (self.p - 1.0) * self.chi_h(u).powf(self.p - 2.0) * cutoff(u - self.h)
    }

    /// `int_0^u sqrt(phi'')`.
    pub fn phi_bar(&self, u: f64) -> f64 {
        let p = self.p;
        if u <= self.h {
            2.0 / p * (p - 1.0).sqrt() * u.max(0.0).powf(0.5 * p)
        } else if u >= self.h + 1.0 {
            self.phi_bar[self.mesh]
        } else {
            self.band(&self.phi_bar, u, |s, tt, k| tt.second_local(k, s).max(0.0).sqrt())
        }
    }

    /// `int_0^u s phi''(s) ds`.
    pub fn phi_under(&self, u: f64) -> f64 {
        let p = self.p;
        if u <= self.h {
            (p - 1.0) / p * u.max(0.0).powf(p)
        } else if u >= self.h + 1.0 {
            self.phi_under[self.mesh]
        } else {
            self.band(&self.phi_under, u, |s, tt, k| s * tt.second_local(k, s))
        }
    }
}

/// Smooth radial bump `exp(1 - 1/(1 - |v - c|^2/R^2))` on `B_R(c)`.
pub fn bump(grid: &VelocityGrid, center: &[f64], radius: f64) -> ScalarField {
    ScalarField::from_fn(grid, |v| {
        let r2: f64 = v.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    })
}

/// Discrete weak-form pairing `-int Q(f) g` for the scheme's operator.
fn weak_pairing(f: &ScalarField, coef: &StepCoefficients, g: &[f64]) -> f64 {
    let q = collision_from_coefficients(f, coef, Form::Divergence);
    -q.values.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_volume()
}

/// Residual of the weak formulation tested against `eta^2 phi'(f)` between
/// two snapshot times, scaled by the larger side.
pub fn weak_form_residual(
    traj: &Trajectory,
    plan: &CoefficientPlan,
    eta: &ScalarField,
    trunc: &TruncationFn,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let i1 = traj.index_of(t1).ok_or_else(|| param("t1", "not a snapshot time"))?;
    let i2 = traj.index_of(t2).ok_or_else(|| param("t2", "not a snapshot time"))?;
    if i1 == i2 {
        return Ok(0.0);
    }
    if i2 < i1 {
        return Err(param("t2", "must follow t1"));
    }
    let vol = eta.grid.cell_volume();
    let eta2: Vec<f64> = eta.values.iter().map(|e| e * e).collect();
    let energy = |f: &ScalarField| -> f64 {
        f.values.iter().zip(&eta2).map(|(x, e)| e * trunc.phi(*x)).sum::<f64>() * vol
    };
    let bracket = energy(&traj.fields[i2]) - energy(&traj.fields[i1]);
    let mut integral = 0.0;
    let mut prev: Option<f64> = None;
    for k in i1..=i2 {
        let f = &traj.fields[k];
        let coef = StepCoefficients::compute(plan, f)?;
        let g: Vec<f64> = f.values.iter().zip(&eta2).map(|(x, e)| e * trunc.phi_prime(*x)).collect();
        let val = weak_pairing(f, &coef, &g);
        if let Some(p) = prev {
            integral += 0.5 * (traj.times[k] - traj.times[k - 1]) * (p + val);
        }
        prev = Some(val);
    }
    let scale = bracket.abs().max(integral.abs());
    Ok(if scale > 0.0 { (bracket + integral).abs() / scale } else { 0.0 })
}

/// Radial-profile sup norms of `|grad eta|` and `|D^2 eta^2|` for the bump
/// of radius `radius`, from a fine one-dimensional sample.
pub fn bump_derivative_bounds(radius: f64) -> (f64, f64) {
    let samples = 20_000;
    let mut g1 = 0.0f64;
    let mut g2 = 0.0f64;
    let prof = |r: f64| {
        let s = r * r / (radius * radius);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s)).exp()
        }
    };
    let dr = radius / samples as f64;
    for k in 1..samples {
        let r = k as f64 * dr;
        let e1 = (prof(r + dr) - prof(r - dr)) / (2.0 * dr);
        g1 = g1.max(e1.abs());
        let sq = |x: f64| prof(x) * prof(x);
        let d1 = (sq(r + dr) - sq(r - dr)) / (2.0 * dr);
        let d2 = (sq(r + dr) - 2.0 * sq(r) + sq(r - dr)) / (dr * dr);
        g2 = g2.max(d2.abs()).max((d1 / r).abs());
    }
    (g1, g2)
}

/// Per-checkpoint terms of the local `L^p` energy inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpEnergyPoint {
    pub time: f64,
    pub sup_lp: f64,
    pub dissipation: f64,
    pub lambda: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Tracks `sup int eta^2 f^p` and `int int (A grad(eta f^(p/2)), grad(eta f^(p/2)))`
/// against the bound assembled from `Lambda_f(1/(2p))` and the weight
/// integrals, with windows `T1 = t_0`, `T2 = (t_0 + t_k)/2`, `T3 = t_k`.
/// `cutoff_constant` plays the role of the dimensional constant in front of
/// the cutoff-derivative term.
pub fn lp_energy_tracker(
    traj: &Trajectory,
    plan: &CoefficientPlan,
    p: f64,
    radius: f64,
    cutoff_constant: f64,
) -> Result<Vec<LpEnergyPoint>> {
    let grid = *traj.grid();
    let d = grid.dim() as f64;
    if p < 1.0 + 2.0 / d {
        return Err(param("p", format!("must be at least 1 + 2/d = {}", 1.0 + 2.0 / d)));
    }
    if radius > grid.half_extent() {
        return Err(param("R", "exceeds the grid half extent"));
    }
    let vol = grid.cell_volume();
    let eta = bump(&grid, &vec![0.0; grid.dim()], radius);
    let (g1, g2) = bump_derivative_bounds(radius);
    let cut = cutoff_constant * (g1 * g1 + g2);
    let n = traj.fields.len();
    let mut lp = Vec::with_capacity(n);
    let mut diss = Vec::with_capacity(n);
    let mut weighted = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    let opts = crate::poincare::LanczosOptions::default();
    for f in &traj.fields {
        let bundle = plan.bundle(f)?;
        lp.push(f.values.iter().zip(&eta.values).map(|(x, e)| e * e * x.powf(p)).sum::<f64>() * vol);
        let u = ScalarField {
            grid,
            values: f.values.iter().zip(&eta.values).map(|(x, e)| e * x.powf(0.5 * p)).collect(),
        };
        diss.push(centered_energy(&bundle.matrix, &u));
        weighted.push(
            f.values
                .iter()
                .zip(&eta.values)
                .zip(&bundle.a.values)
                .filter(|((_, e), _)| **e > 0.0)
                .map(|((x, _), a)| x.powf(p) * a)
                .sum::<f64>()
                * vol,
        );
        let l = if f.is_zero() {
            0.0
        } else {
            crate::poincare::PoincareOperator::new(&bundle).top(1.0 / (2.0 * p), None, &opts)?.value
        };
        lambda.push(l);
    }
    let trap = |vals: &[f64], a: usize, b: usize| -> f64 {
        (a..b).map(|k| 0.5 * (traj.times[k + 1] - traj.times[k]) * (vals[k] + vals[k + 1])).sum()
    };
    let mut out = Vec::new();
    for k in 1..n {
        let t1 = traj.times[0];
        let t3 = traj.times[k];
        let t2 = 0.5 * (t1 + t3);
        let j2 = (0..=k).find(|&j| traj.times[j] >= t2).unwrap_or(k);
        let sup_lp = lp[j2..=k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dissipation = trap(&diss, j2, k);
        let lam = lambda[..=k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rhs = (1.0 / (t2 - t1) + 0.5 * p * lam) * trap(&lp, 0, k) + cut * trap(&weighted, 0, k);
        let lhs = sup_lp + (p - 1.0) / p * dissipation;
        out.push(LpEnergyPoint {
            time: t3,
            sup_lp,
            dissipation,
            lambda: lam,
            rhs,
            margin: rhs - lhs,
        });
    }
    Ok(out)
}

/// Right side of the isotropic model `d_t f = a_f Lap f + alpha f^2` with
/// `a_f` the Newtonian potential of `f`.
pub fn krieger_strain_rhs(f: &ScalarField, alpha: f64) -> Result<ScalarField> {
    if f.grid.dim() != 3 {
        return Err(Error::Dimension("isotropic model requires d = 3".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(param("alpha", "must lie in [0, 1]"));
    }
    let a = a_field(f, -3.0)?;
    let lap = laplacian(f);
    let values = (0..f.len())
        .map(|i| a.values[i] * lap[i] + alpha * f.values[i] * f.values[i])
        .collect();
    Ok(ScalarField { grid: f.grid, values })
}

/// Centred five-point Laplacian with zero ghost values.
pub fn laplacian(u: &ScalarField) -> Vec<f64> {
    let grid = u.grid;
    let d = grid.dim();
    let n = grid.points_per_axis();
    let h2 = grid.spacing() * grid.spacing();
    let mut idx = vec![0usize; d];
    let mut out = vec![0.0; u.len()];
    for (i, o) in out.iter_mut().enumerate() {
        grid.unravel(i, &mut idx);
        let mut s = 0.0;
        for k in 0..d {
            let st = grid.stride(k);
            let lo = if idx[k] > 0 { u.values[i - st] } else { 0.0 };
            let hi = if idx[k] + 1 < n { u.values[i + st] } else { 0.0 };
            s += lo - 2.0 * u.values[i] + hi;
        }
        *o = s / h2;
    }
    out
}

/// `div(a grad f - f grad a)` by face fluxes with arithmetic face averages.
pub fn isotropic_divergence_form(f: &ScalarField, a: &ScalarField) -> Vec<f64> {
    let grid = f.grid;
    let d = grid.dim();
    let n = grid.points_per_axis();
    let h2 = grid.spacing() * grid.spacing();
    let mut idx = vec![0usize; d];
    let mut out = vec![0.0; f.len()];
    for i in 0..f.len() {
        grid.unravel(i, &mut idx);
        for k in 0..d {
            if idx[k] + 1 >= n {
                continue;
            }
            let j = i + grid.stride(k);
            let af = 0.5 * (a.values[i] + a.values[j]);
            let ff = 0.5 * (f.values[i] + f.values[j]);
            let flux = (af * (f.values[j] - f.values[i]) - ff * (a.values[j] - a.values[i])) / h2;
            out[i] += flux;
            out[j] -= flux;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::maxwellian;

    #[test]
    fn zero_density_has_zero_entropy_and_production() {
        let g = VelocityGrid::new(3, 4.0, 8).unwrap();
        let f = ScalarField::zeros(&g);
        assert_eq!(entropy(&f), 0.0);
        assert_eq!(entropy_production(&f, -1.0).unwrap(), 0.0);
        let m = conserved_moments(&f);
        assert_eq!((m.mass, m.energy), (0.0, 0.0));
    }

    #[test]
    fn truncation_identity() {
        let t = TruncationFn::new(2.0, 10.0).unwrap();
        for k in 0..1000 {
            let s = 12.0 * k as f64 / 999.0;
            let lhs = s * t.phi_prime(s) - t.phi_under(s);
            assert!((lhs - t.phi(s)).abs() <= 1e-10 * t.phi(s).max(1.0), "s = {s}");
        }
        assert_eq!(t.phi(3.0), 4.5);
    }

    #[test]
    fn cutoff_slope_bounded_by_two() {
        let m = (1..1000).map(|k| cutoff_derivative(k as f64 / 1000.0).abs()).fold(0.0, f64::max);
        assert!(m <= 2.0 + 1e-12 && m > 1.99);
    }

    #[test]
    fn divergence_form_conserves_mass() {
        let g = VelocityGrid::new(3, 6.0, 16).unwrap();
        let f = crate::grid::gaussian(&g, &[0.5, 0.0, -0.3], 0.9).unwrap();
        let q = collision_operator(&f, -1.0, Form::Divergence).unwrap();
        let total: f64 = q.values.iter().sum::<f64>() * g.cell_volume();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = VelocityGrid::new(3, 6.0, 12).unwrap();
        let mut s = Solver::new(&g, 0.0, SolverConfig::default()).unwrap();
        let mut st = s.init(maxwellian(&g)).unwrap();
        let before = st.f.clone();
        s.step(&mut st, 0.0).unwrap();
        assert_eq!(st.f, before);
        assert_eq!(st.time, 0.0);
        assert_eq!(st.step_index, 1);
    }
}
