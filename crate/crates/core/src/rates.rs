//! Decay-rate fits of `||f(t)||_{L^inf(B_R)}` and Moser-iteration
//! diagnostics along trajectories.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::coefficients::{a_field, CoefficientPlan};
use crate::error::{param, Error, Result};
use crate::grid::{ScalarField, VelocityGrid};
use crate::numerics::fit_line;
use crate::report::DiagnosticsReport;
use crate::solver::{moment_matched_maxwellian, Trajectory};

/// Radii of the R sweep used for the growth exponent.
pub const RADIUS_SWEEP: [f64; 4] = [2.0, 3.0, 4.0, 6.0];
/// Fraction above the stationary limit below which samples count as
/// saturated.
pub const FLOOR_MARGIN: f64 = 0.05;
pub const MIN_SAMPLES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Unconditional rate for `gamma` in `(-2, 0]`.
    Main1,
    /// Conditional rate for `gamma` in `(-d, -2]`.
    VerySoft,
    /// Conditional rate for `gamma = -d`.
    Coulomb,
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main_1" => Ok(Self::Main1),
            "very_soft" => Ok(Self::VerySoft),
            "coulomb" => Ok(Self::Coulomb),
            _ => Err(param("theorem", format!("unknown theorem id {s:?}"))),
        }
    }
}

impl TheoremId {
    /// Predicted `(alpha, beta)` in `C R^beta (1 + 1/t)^alpha`. For the
    /// Coulomb rate `s` is the free exponent in `(0, 1)`.
    pub fn predicted(self, d: usize, gamma: f64, s: f64) -> (f64, f64) {
        let d = d as f64;
        match self {
            Self::Main1 | Self::VerySoft => (0.5 * d, -0.5 * gamma * d),
            Self::Coulomb => (1.0 + s, s),
        }
    }
}

/// `||f(t)||_{L^inf(B_R(0))}` at every snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfCurve {
    pub radius: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

impl LinfCurve {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            times: Vec::new(),
            norms: Vec::new(),
        }
    }

    /// Appends the norm of `f` at time `t`.
    pub fn record(&mut self, t: f64, f: &ScalarField) {
        self.times.push(t);
        self.norms.push(ball_max(f, self.radius));
    }

    /// Columns `t, norm, fitted`; `fitted` is empty when no fit is given.
    pub fn to_csv(&self, fit: Option<&RateFit>) -> String {
        let mut s = String::from("t,norm,fitted\n");
        for (t, n) in self.times.iter().zip(&self.norms) {
            let fitted = fit.filter(|_| *t > 0.0).map(|f| f.evaluate(*t));
            match fitted {
                Some(v) => s.push_str(&format!("{t:.17e},{n:.17e},{v:.17e}\n")),
                None => s.push_str(&format!("{t:.17e},{n:.17e},\n")),
            }
        }
        s
    }
}

fn ball_max(f: &ScalarField, radius: f64) -> f64 {
    let d = f.grid.dim();
    let mut v = vec![0.0; d];
    let r2 = radius * radius;
    let mut best = 0.0f64;
    for (i, &x) in f.values.iter().enumerate() {
        f.grid.node(i, &mut v);
        if v.iter().map(|a| a * a).sum::<f64>() <= r2 {
            best = best.max(x);
        }
    }
    best
}

pub fn linf_history(traj: &Trajectory, radius: f64) -> Result<LinfCurve> {
    let grid = traj.grid();
    if !(radius > 0.0) || radius > grid.half_extent() {
        return Err(param("R", "must lie in (0, L]"));
    }
    let mut curve = LinfCurve::new(radius);
    for (t, f) in traj.times.iter().zip(&traj.fields) {
        curve.record(*t, f);
    }
    Ok(curve)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub theorem: TheoremId,
    pub radius: f64,
    /// First and last fitted time.
    pub window: (f64, f64),
    pub samples: usize,
    pub alpha: f64,
    pub log_c: f64,
    /// RMS log-misfit of the fit.
    pub residual: f64,
    /// Growth exponent from the R sweep, when one was run.
    pub beta: Option<f64>,
    pub predicted_alpha: f64,
    pub predicted_beta: f64,
    /// Stationary limit used for the saturation cut.
    pub floor: f64,
    pub flags: Vec<String>,
}

impl RateFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        (self.log_c + self.alpha * (1.0 + 1.0 / t).ln()).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Samples with `t < 2 dt` are excluded.
    pub dt: f64,
    /// Stationary limit of the norm; when `None` the peak of the
    /// moment-matched Maxwellian of the initial snapshot inside `B_R`.
    pub floor: Option<f64>,
    /// Exponent `s` of the Coulomb rate.
    pub coulomb_s: f64,
}

impl FitOptions {
    /// Takes `dt` from the trajectory's ledger, or the first snapshot gap.
    pub fn for_trajectory(traj: &Trajectory) -> Self {
        let dt = traj
            .ledger
            .iter()
            .map(|r| r.dt)
            .find(|&dt| dt > 0.0)
            .or_else(|| traj.times.windows(2).map(|w| w[1] - w[0]).find(|&g| g > 0.0))
            .unwrap_or(0.0);
        Self {
            dt,
            floor: None,
            coulomb_s: 0.5,
        }
    }
}

/// Peak inside `B_R` of the Maxwellian with the moments of `f0`, the
/// stationary limit of the norm.
pub fn stationary_limit(f0: &ScalarField, radius: f64) -> Result<f64> {
    Ok(ball_max(&moment_matched_maxwellian(f0)?, radius))
}

/// Fits `log ||f||_{L^inf(B_R)}` against `log(1 + 1/t)` over the samples
/// with `t >= 2 dt` whose norm is more than 5% above the stationary limit.
pub fn fit_curve(curve: &LinfCurve, theorem: TheoremId, d: usize, gamma: f64, floor: f64, opts: &FitOptions) -> Result<RateFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut ts = Vec::new();
    for (&t, &n) in curve.times.iter().zip(&curve.norms) {
        if t <= 0.0 || t < 2.0 * opts.dt || !(n > 0.0) {
            continue;
        }
        if n <= (1.0 + FLOOR_MARGIN) * floor {
            continue;
        }
        x.push((1.0 + 1.0 / t).ln());
        y.push(n.ln());
        ts.push(t);
    }
    if ts.len() < MIN_SAMPLES {
        return Err(Error::DegenerateWindow(format!(
            "{} usable samples, need {MIN_SAMPLES}",
            ts.len()
        )));
    }
    let (t0, t1) = (ts[0], ts[ts.len() - 1]);
    if t1 < 10.0 * t0 {
        return Err(Error::DegenerateWindow(format!(
            "window [{t0}, {t1}] spans less than a decade"
        )));
    }
    let line = fit_line(&x, &y).ok_or_else(|| Error::DegenerateWindow("constant abscissa".into()))?;
    let (alpha, log_c, residual) = (line.slope, line.intercept, line.rms);
    let (pa, pb) = theorem.predicted(d, gamma, opts.coulomb_s);
    Ok(RateFit {
        theorem,
        radius: curve.radius,
        window: (t0, t1),
        samples: ts.len(),
        alpha,
        log_c,
        residual,
        beta: None,
        predicted_alpha: pa,
        predicted_beta: pb,
        floor,
        flags: Vec::new(),
    })
}

pub fn fit_decay(traj: &Trajectory, radius: f64, theorem: TheoremId, opts: &FitOptions) -> Result<RateFit> {
    let curve = linf_history(traj, radius)?;
    let floor = match opts.floor {
        Some(v) => v,
        None => stationary_limit(&traj.fields[0], radius)?,
    };
    fit_curve(&curve, theorem, traj.grid().dim(), traj.gamma, floor, opts)
}

/// Fits at every admissible radius of the sweep and regresses the fitted
/// prefactors on `log R` for the growth exponent. The returned fit is the
/// one at the smallest radius, with `beta` filled in when at least two
/// radii were usable.
pub fn fit_decay_sweep(traj: &Trajectory, theorem: TheoremId, opts: &FitOptions) -> Result<(RateFit, Vec<RateFit>)> {
    let l = traj.grid().half_extent();
    let mut fits = Vec::new();
    for &r in RADIUS_SWEEP.iter().filter(|&&r| r <= l) {
        fits.push(fit_decay(traj, r, theorem, opts)?);
    }
    let Some(first) = fits.first() else {
        return Err(param("R", "no sweep radius fits inside the grid"));
    };
    let mut head = first.clone();
    if fits.len() >= 2 {
        let lx: Vec<f64> = fits.iter().map(|f| f.radius.ln()).collect();
        let ly: Vec<f64> = fits.iter().map(|f| f.log_c).collect();
        head.beta = fit_line(&lx, &ly).map(|l| l.slope);
    }
    Ok((head, fits))
}

/// Which conditional regime a Coulomb fit sits closer to: `d/2` or the
/// `1 + s` family that approaches `t^-1`.
pub fn coulomb_regime(fit: &RateFit, d: usize) -> &'static str {
    let half = 0.5 * d as f64;
    if (fit.alpha - half).abs() <= (fit.alpha - 1.0).abs() {
        "d/2"
    } else {
        "1+s"
    }
}

/// `a*` at every snapshot.
pub fn a_star_history(traj: &Trajectory) -> Result<Vec<ScalarField>> {
    let plan = CoefficientPlan::new(traj.grid(), traj.gamma)?;
    traj.fields
        .iter()
        .map(|f| {
            if f.is_zero() {
                Ok(ScalarField::zeros(&f.grid))
            } else {
                Ok(plan.bundle(f)?.a_star)
            }
        })
        .collect()
}

fn snapshot_range(traj: &Trajectory, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let i0 = traj
        .index_of(t0)
        .ok_or_else(|| param("window", format!("t = {t0} is not a snapshot time")))?;
    let i1 = traj
        .index_of(t1)
        .ok_or_else(|| param("window", format!("t = {t1} is not a snapshot time")))?;
    if i1 < i0 {
        return Err(param("window", "end precedes start"));
    }
    Ok((i0, i1))
}

/// `int_{t0}^{t1} int a* f^(1 + 2/d) dv dt` by trapezoid over snapshots,
/// with `a*` precomputed by [`a_star_history`].
pub fn lplp_from_history(traj: &Trajectory, a_star: &[ScalarField], window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    if t1 - t0 > 1.0 + 1e-9 {
        return Err(param("window", "length must not exceed 1"));
    }
    let (i0, i1) = snapshot_range(traj, t0, t1)?;
    let grid = traj.grid();
    let e = 1.0 + 2.0 / grid.dim() as f64;
    let vol = grid.cell_volume();
    let slice = |k: usize| -> f64 {
        traj.fields[k]
            .values
            .iter()
            .zip(&a_star[k].values)
            .map(|(f, a)| a * f.max(0.0).powf(e))
            .sum::<f64>()
            * vol
    };
    let mut total = 0.0;
    let mut prev = slice(i0);
    for k in i0..i1 {
        let next = slice(k + 1);
        total += 0.5 * (traj.times[k + 1] - traj.times[k]) * (prev + next);
        prev = next;
    }
    Ok(total)
}

pub fn lplp_weighted_integral(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let a_star = a_star_history(traj)?;
    lplp_from_history(traj, &a_star, window)
}

/// One level of the iteration: `T_n`, `R_n`, `p_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserLevel {
    pub n: usize,
    pub t_n: f64,
    pub r_n: f64,
    pub p_n: f64,
}

pub const MOSER_MAX_LEVEL: usize = 8;

/// `q = 2 + 4/d`, the Sobolev gain of the weighted inequality.
pub fn moser_q(d: usize) -> f64 {
    2.0 + 4.0 / d as f64
}

pub fn moser_schedule(n_max: usize, d: usize, t_final: f64, radius: f64) -> Result<Vec<MoserLevel>> {
    if n_max > MOSER_MAX_LEVEL {
        return Err(param("n_max", format!("must not exceed {MOSER_MAX_LEVEL}")));
    }
    let p = 1.0 + 2.0 / d as f64;
    let ratio = 0.5 * moser_q(d);
    Ok((0..=n_max)
        .map(|n| {
            let half = 0.5f64.powi(n as i32);
            MoserLevel {
                n,
                t_n: 0.25 * (2.0 - half) * t_final,
                r_n: 0.5 * (1.0 + half) * radius,
                p_n: p * ratio.powi(n as i32),
            }
        })
        .collect())
}

/// Quintic smoothstep `6s^5 - 15s^4 + 10s^3` on `[0, 1]`.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// Bounds of the quintic smoothstep's first and second derivatives.
const SMOOTHSTEP_D1: f64 = 15.0 / 8.0;
const SMOOTHSTEP_D2: f64 = 5.773_502_691_896_258;

/// Radial cutoff equal to 1 on `B_inner` and 0 outside `B_outer`.
pub fn radial_cutoff(grid: &VelocityGrid, inner: f64, outer: f64) -> Result<ScalarField> {
    if !(inner > 0.0 && outer > inner) {
        return Err(param("radii", "need 0 < inner < outer"));
    }
    Ok(ScalarField::from_fn(grid, |v| {
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        smoothstep((outer - r) / (outer - inner))
    }))
}

/// Constants `C1, C2` with `|grad eta_n| <= C1 2^n / R` and
/// `|D^2 eta_n| <= C2 4^n / R^2` for the smoothstep cutoffs.
pub fn cutoff_constants() -> (f64, f64) {
    // the transition band of eta_n has width R 2^(-n-2) and starts at R/2
    let c1 = 4.0 * SMOOTHSTEP_D1;
    let c2 = (16.0 * SMOOTHSTEP_D2).max(2.0 * c1);
    (c1, c2)
}

/// `(int_{t_start}^{T} int eta^q f^p a* dv dt)^(1/p)`, with the integrand
/// linearly interpolated at `t_start` and evaluated relative to the largest
/// value of `f` so large exponents neither overflow nor underflow.
pub fn moser_energy(
    traj: &Trajectory,
    a_star: &[ScalarField],
    eta: &ScalarField,
    q: f64,
    p: f64,
    t_start: f64,
) -> Result<f64> {
    let vol = traj.grid().cell_volume();
    let last = traj.times.len() - 1;
    let t_end = traj.times[last];
    if !(t_start <= t_end) {
        return Err(param("t_start", "after the final time"));
    }
    let k0 = traj.times.iter().rposition(|&t| t <= t_start).unwrap_or(0);
    let scale = traj.fields[k0..]
        .iter()
        .flat_map(|f| f.values.iter().zip(&eta.values).filter(|(_, e)| **e > 0.0).map(|(x, _)| *x))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let slice = |k: usize| -> f64 {
        traj.fields[k]
            .values
            .iter()
            .zip(&eta.values)
            .zip(&a_star[k].values)
            .filter(|((_, e), _)| **e > 0.0)
            .map(|((x, e), a)| e.powf(q) * (x.max(0.0) / scale).powf(p) * a)
            .sum::<f64>()
            * vol
    };
    let mut total = 0.0;
    let mut prev_t = t_start;
    let mut prev = if k0 < last && traj.times[k0] < t_start {
        let w = (t_start - traj.times[k0]) / (traj.times[k0 + 1] - traj.times[k0]);
        (1.0 - w) * slice(k0) + w * slice(k0 + 1)
    } else {
        slice(k0)
    };
    for k in (k0 + 1)..=last {
        let next = slice(k);
        total += 0.5 * (traj.times[k] - prev_t) * (prev + next);
        prev_t = traj.times[k];
        prev = next;
    }
    Ok(scale * total.max(0.0).powf(1.0 / p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserRow {
    pub level: MoserLevel,
    pub e_n: f64,
    /// `E_n - ||f||_{L^inf(B_{R/2} x (T/2, T))}`.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserReport {
    pub gamma: f64,
    pub radius: f64,
    pub t_final: f64,
    pub q: f64,
    /// Grid maximum over `B_{R/2} x [T/2, T]`.
    pub linf: f64,
    pub cutoff_gradient_constant: f64,
    pub cutoff_hessian_constant: f64,
    pub rows: Vec<MoserRow>,
}

impl MoserReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,t_n,r_n,p_n,e_n,slack\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.level.n, r.level.t_n, r.level.r_n, r.level.p_n, r.e_n, r.slack
            ));
        }
        s
    }

    pub fn report(&self) -> DiagnosticsReport {
        let mut rep = DiagnosticsReport::new(
            "moser_iteration",
            "Moser iteration energies E_n bound the local sup norm in the limit",
        );
        rep.value("radius", self.radius)
            .value("t_final", self.t_final)
            .value("linf_half_cylinder", self.linf)
            .value("cutoff_gradient_constant", self.cutoff_gradient_constant)
            .value("cutoff_hessian_constant", self.cutoff_hessian_constant);
        for r in &self.rows {
            rep.value(format!("E_{}", r.level.n), r.e_n);
        }
        rep.curve(
            "E_n",
            self.rows.iter().map(|r| r.level.n as f64).collect(),
            self.rows.iter().map(|r| r.e_n).collect(),
        );
        rep
    }
}

/// `E_n` for `n = 0..=n_max` over `(0, T)` with `T` the final snapshot time.
pub fn moser_report(traj: &Trajectory, n_max: usize, radius: f64) -> Result<MoserReport> {
    let a_star = a_star_history(traj)?;
    moser_report_with(traj, &a_star, n_max, radius)
}

pub fn moser_report_with(traj: &Trajectory, a_star: &[ScalarField], n_max: usize, radius: f64) -> Result<MoserReport> {
    let grid = *traj.grid();
    if radius > grid.half_extent() {
        return Err(param("R", "exceeds the grid half extent"));
    }
    let t_final = *traj.times.last().ok_or_else(|| param("trajectory", "empty"))?;
    let d = grid.dim();
    let levels = moser_schedule(n_max, d, t_final, radius)?;
    let q = moser_q(d);
    let linf = traj
        .times
        .iter()
        .zip(&traj.fields)
        .filter(|(t, _)| **t >= 0.5 * t_final - 1e-12)
        .map(|(_, f)| ball_max(f, 0.5 * radius))
        .fold(0.0f64, f64::max);
    let mut rows = Vec::with_capacity(levels.len());
    for level in levels {
        let inner = 0.5 * (1.0 + 0.5f64.powi(level.n as i32 + 1)) * radius;
        let eta = radial_cutoff(&grid, inner, level.r_n)?;
        let e_n = moser_energy(traj, a_star, &eta, q, level.p_n, level.t_n)?;
        rows.push(MoserRow {
            level,
            e_n,
            slack: e_n - linf,
        });
    }
    let (c1, c2) = cutoff_constants();
    Ok(MoserReport {
        gamma: traj.gamma,
        radius,
        t_final,
        q,
        linf,
        cutoff_gradient_constant: c1,
        cutoff_hessian_constant: c2,
        rows,
    })
}

/// Exponents of `||f||_1` and `||f||_p` in the Newtonian-potential
/// interpolation bound.
pub fn newtonian_exponents(d: usize, p: f64) -> (f64, f64) {
    let d = d as f64;
    let k = p / (p - 1.0);
    (k * (2.0 / d - 1.0 / p), k * (1.0 - 2.0 / d))
}

/// Smallest `C` with `||a||_inf <= C ||f||_1^e1 ||f||_p^e2` for the
/// Newtonian potential `a` of `f`.
pub fn newtonian_interpolation_check(f: &ScalarField, p: f64) -> Result<DiagnosticsReport> {
    let d = f.grid.dim();
    if d != 3 {
        return Err(Error::Dimension("Newtonian interpolation requires d = 3".into()));
    }
    if !(p > 0.5 * d as f64) {
        return Err(param("p", "must exceed d/2"));
    }
    f.check_density()?;
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let a = a_field(f, -(d as f64))?;
    let vol = f.grid.cell_volume();
    let l1: f64 = f.values.iter().sum::<f64>() * vol;
    let lp = (f.values.iter().map(|x| x.powf(p)).sum::<f64>() * vol).powf(1.0 / p);
    let (e1, e2) = newtonian_exponents(d, p);
    let lhs = a.max_abs();
    let rhs = l1.powf(e1) * lp.powf(e2);
    let mut rep = DiagnosticsReport::new(
        "newtonian_interpolation",
        "sup norm of the Newtonian potential interpolated between L1 and Lp",
    );
    rep.value("p", p)
        .value("exponent_l1", e1)
        .value("exponent_lp", e2)
        .value("sup_a", lhs)
        .value("l1", l1)
        .value("lp", lp)
        .value("constant", lhs / rhs);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = moser_schedule(8, 3, 4.0, 2.0).unwrap();
        assert_eq!(s[0].t_n, 1.0);
        assert_eq!(s[0].r_n, 2.0);
        assert!((s[8].t_n - 2.0).abs() < 0.01);
        assert!((s[8].r_n - 1.0).abs() < 0.01);
        assert!(moser_schedule(9, 3, 4.0, 2.0).is_err());
    }

    #[test]
    fn smoothstep_limits() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn newtonian_exponents_at_two() {
        let (e1, e2) = newtonian_exponents(3, 2.0);
        assert!((e1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((e2 - 2.0 / 3.0).abs() < 1e-15);
    }
}
