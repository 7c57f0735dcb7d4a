//! Nonlocal coefficient fields of the collision operator.
//!
//! With `omega` the area of the unit sphere in `R^d`, the kernels are
//!
//! * `h = (d+gamma)/omega |z|^gamma * f` (and `h = f` at `gamma = -d`),
//! * `a = 1/omega |z|^(2+gamma) * f`,
//! * `A = 1/((d-1) omega) |z|^(2+gamma) Pi(z) * f`, so that `tr A = a`,
//! * `b = div A = -1/omega |z|^gamma z * f`,
//! * `psi` with `grad psi = b` and `-Laplace psi = h`: the kernel is
//!   `-1/((2+gamma) omega) |z|^(2+gamma)`, or `-1/omega log|z|` at `gamma = -2`.
//!
//! For `gamma = -d` this gives `a = psi`, the Newtonian potential of `f`.
//! Away from that case `grad a = -(2+gamma) b`, so `a` and `psi` differ by
//! the factor `-(2+gamma)`.

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fft::Convolver;
use crate::grid::{ScalarField, VelocityGrid};
use crate::numerics::{cube_log_average, cube_power_average, jacobi_eigenvalues, sphere_area, sym3_eigenvalues};
use crate::report::DiagnosticsReport;

/// Kernel constants for one `(d, gamma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub dim: usize,
    pub gamma: f64,
    /// Constant in front of `|z|^gamma` for `h`.
    pub reaction: f64,
    /// Constant in front of `|z|^(2+gamma)` for `a`.
    pub trace: f64,
    /// Constant in front of `|z|^(2+gamma) Pi(z)` for `A`.
    pub matrix: f64,
    /// Constant in front of `-|z|^gamma z` for `b = div A`.
    pub drift: f64,
}

impl Normalization {
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        validate(dim, gamma)?;
        let omega = sphere_area(dim);
        let d = dim as f64;
        Ok(Self {
            dim,
            gamma,
            reaction: (d + gamma) / omega,
            trace: 1.0 / omega,
            matrix: 1.0 / ((d - 1.0) * omega),
            drift: 1.0 / omega,
        })
    }

    pub fn is_coulomb(&self) -> bool {
        self.gamma == -(self.dim as f64)
    }

    /// Relative mismatch of the Fourier symbols of `-Laplace psi` and `h`,
    /// using `FT |z|^s = pi^(d/2) 2^(s+d) Gamma((s+d)/2) / Gamma(-s/2) |k|^(-s-d)`.
    /// `None` where the closed form degenerates (`gamma = 0` or `-2`).
    pub fn symbol_residual(&self) -> Option<f64> {
        let d = self.dim as f64;
        let g = self.gamma;
        if g == 0.0 || g == -2.0 {
            return None;
        }
        let symbol = |s: f64| {
            std::f64::consts::PI.powf(d / 2.0) * 2f64.powf(s + d) * libm::tgamma((s + d) / 2.0)
                / libm::tgamma(-s / 2.0)
        };
        let lhs = -self.drift / (2.0 + g) * symbol(2.0 + g);
        let rhs = if self.is_coulomb() {
            1.0
        } else {
            self.reaction * symbol(g)
        };
        Some(((lhs - rhs) / rhs).abs())
    }
}

fn validate(dim: usize, gamma: f64) -> Result<()> {
    if dim < 2 {
        return Err(Error::Dimension(
            "coefficient fields need d >= 2".to_string(),
        ));
    }
    if !(gamma >= -(dim as f64) && gamma <= 0.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(())
}

/// The convolution kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Reaction,
    Trace,
    Matrix(usize, usize),
    Drift(usize),
    Potential,
}

impl Kernel {
    /// Kernel value at `z != 0`.
    pub fn eval(self, n: &Normalization, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|x| x * x).sum();
        let r = r2.sqrt();
        let g = n.gamma;
        match self {
            Kernel::Reaction => n.reaction * r.powf(g),
            Kernel::Trace => n.trace * r.powf(2.0 + g),
            Kernel::Matrix(i, j) => {
                let delta = if i == j { 1.0 } else { 0.0 };
                n.matrix * r.powf(2.0 + g) * (delta - z[i] * z[j] / r2)
            }
            Kernel::Drift(i) => -n.drift * r.powf(g) * z[i],
            Kernel::Potential => {
                if g == -2.0 {
                    -n.drift * r.ln()
                } else {
                    -n.drift / (2.0 + g) * r.powf(2.0 + g)
                }
            }
        }
    }

    /// Exact average of the kernel over the cell of side `s` centred at the
    /// origin. Odd kernels average to zero; by cubic symmetry the diagonal
    /// entries of the projection average to `(d-1)/d` of the trace.
    pub fn origin_average(self, n: &Normalization, s: f64) -> f64 {
        let d = n.dim;
        let g = n.gamma;
        let half = 0.5 * s;
        let power = |p: f64| half.powf(p) * cube_power_average(d, p);
        match self {
            Kernel::Reaction => n.reaction * power(g),
            Kernel::Trace => n.trace * power(2.0 + g),
            Kernel::Matrix(i, j) => {
                if i == j {
                    n.matrix * (d as f64 - 1.0) / d as f64 * power(2.0 + g)
                } else {
                    0.0
                }
            }
            Kernel::Drift(_) => 0.0,
            Kernel::Potential => {
                if g == -2.0 {
                    -n.drift * (half.ln() + cube_log_average(d))
                } else {
                    -n.drift / (2.0 + g) * power(2.0 + g)
                }
            }
        }
    }

    /// Lattice stencil: the kernel at cell offset `off`, with the origin
    /// cell replaced by its average.
    pub fn stencil(self, n: &Normalization, spacing: f64) -> impl Fn(&[i64]) -> f64 + Sync {
        let n = *n;
        let origin = self.origin_average(&n, spacing);
        move |off: &[i64]| {
            if off.iter().all(|&o| o == 0) {
                return origin;
            }
            let mut z = [0.0; 8];
            for (k, &o) in off.iter().enumerate() {
                z[k] = o as f64 * spacing;
            }
            self.eval(&n, &z[..off.len()])
        }
    }
}

/// Symmetric `d x d` matrix per node, stored as upper-triangle components.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: VelocityGrid,
    /// `d(d+1)/2` component arrays in upper-triangle row-major order.
    pub comps: Vec<Vec<f64>>,
}

impl MatrixField {
    pub fn zeros(grid: &VelocityGrid) -> Self {
        let d = grid.dim();
        Self {
            grid: *grid,
            comps: vec![vec![0.0; grid.len()]; d * (d + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Position of entry `(i, j)` in `comps`.
    #[inline]
    pub fn index(d: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * d - i * i.saturating_sub(1) / 2 + (j - i)
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        self.comps[Self::index(self.dim(), i, j)][node]
    }

    /// Full row-major matrix at a node.
    pub fn at(&self, node: usize) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.get(node, i, j);
            }
        }
        m
    }

    pub fn trace(&self, node: usize) -> f64 {
        (0..self.dim()).map(|i| self.get(node, i, i)).sum()
    }

    /// `(A e, e)` at a node.
    pub fn quad_form(&self, node: usize, e: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.get(node, i, j) * e[i] * e[j];
            }
        }
        s
    }

    /// Ascending eigenvalues at a node.
    pub fn eigenvalues(&self, node: usize) -> Result<Vec<f64>> {
        let d = self.dim();
        let ev = if d == 3 {
            let c = &self.comps;
            sym3_eigenvalues(&[
                c[0][node], c[1][node], c[2][node], c[3][node], c[4][node], c[5][node],
            ])
            .to_vec()
        } else {
            jacobi_eigenvalues(&self.at(node), d).ok_or_else(|| Error::EigenFailure {
                node,
                reason: "Jacobi sweeps did not converge".into(),
            })?
        };
        if ev.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure {
                node,
                reason: "non-finite eigenvalue".into(),
            });
        }
        Ok(ev)
    }

    /// Smallest eigenvalue at every node.
    pub fn min_eigenvalue(&self) -> Result<ScalarField> {
        let values = (0..self.grid.len())
            .map(|i| self.eigenvalues(i).map(|ev| ev[0]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn add(&self, other: &MatrixField) -> MatrixField {
        MatrixField {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }
}

/// All coefficient fields for one density.
#[derive(Clone, Debug)]
pub struct CoefficientBundle {
    pub gamma: f64,
    pub norm: Normalization,
    pub h: ScalarField,
    pub a: ScalarField,
    pub a_star: ScalarField,
    pub matrix: MatrixField,
    /// `b = div A`.
    pub drift: Vec<ScalarField>,
    /// `grad a = -(2+gamma) b`.
    pub grad_a: Vec<ScalarField>,
    /// Drift potential, `grad psi = b`, `-Laplace psi = h`.
    pub potential: ScalarField,
}

/// The diffusion matrix at the `(N+1)^d` cell vertices `-L + s h`, the
/// centres of the dual cubes spanned by neighbouring nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredMatrix {
    pub grid: VelocityGrid,
    /// `d(d+1)/2` component arrays over the vertex lattice, row-major.
    pub comps: Vec<Vec<f64>>,
}

impl StaggeredMatrix {
    pub fn side(&self) -> usize {
        self.grid.points_per_axis() + 1
    }

    pub fn get(&self, vertex: usize, i: usize, j: usize) -> f64 {
        self.comps[MatrixField::index(self.grid.dim(), i, j)][vertex]
    }

    /// Coordinates of a vertex; vertex `s` on an axis sits at `-L + s h`.
    pub fn vertex(&self, flat: usize, out: &mut [f64]) {
        let side = self.side();
        let h = self.grid.spacing();
        let l = self.grid.half_extent();
        let mut rest = flat;
        for k in (0..self.grid.dim()).rev() {
            out[k] = -l + (rest % side) as f64 * h;
            rest /= side;
        }
    }

    /// Every component multiplied by `w` at each vertex.
    pub fn weighted(&self, mut w: impl FnMut(&[f64]) -> f64) -> StaggeredMatrix {
        let mut v = vec![0.0; self.grid.dim()];
        let len = self.comps.first().map_or(0, Vec::len);
        let scale: Vec<f64> = (0..len)
            .map(|i| {
                self.vertex(i, &mut v);
                w(&v)
            })
            .collect();
        StaggeredMatrix {
            grid: self.grid,
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(&scale).map(|(a, s)| a * s).collect())
                .collect(),
        }
    }
}

/// Cached kernel spectra for repeated coefficient evaluation on one grid.
pub struct CoefficientPlan {
    conv: Convolver,
    norm: Normalization,
    layout: Vec<(Kernel, Option<Kernel>)>,
    spectra: Vec<Vec<Complex64>>,
    staggered: OnceLock<Vec<Vec<Complex64>>>,
}

impl CoefficientPlan {
    pub fn new(grid: &VelocityGrid, gamma: f64) -> Result<Self> {
        let norm = Normalization::new(grid.dim(), gamma)?;
        Ok(Self::with_normalization(grid, norm))
    }

    /// Plan with explicitly supplied constants.
    pub fn with_normalization(grid: &VelocityGrid, norm: Normalization) -> Self {
        let d = grid.dim();
        let mut kernels = vec![Kernel::Trace, Kernel::Potential];
        if !norm.is_coulomb() {
            kernels.push(Kernel::Reaction);
        }
        for i in 0..d {
            for j in i..d {
                kernels.push(Kernel::Matrix(i, j));
            }
        }
        for i in 0..d {
            kernels.push(Kernel::Drift(i));
        }
        let layout: Vec<(Kernel, Option<Kernel>)> = kernels
            .chunks(2)
            .map(|c| (c[0], c.get(1).copied()))
            .collect();
        let conv = Convolver::new(grid);
        let spectra = layout
            .iter()
            .map(|&(k1, k2)| pair_spectrum(&conv, &norm, k1, k2))
            .collect();
        Self {
            conv,
            norm,
            layout,
            spectra,
            staggered: OnceLock::new(),
        }
    }

    fn matrix_pairs(&self) -> Vec<(usize, usize, Option<(usize, usize)>)> {
        let d = self.grid().dim();
        let mut comps = Vec::new();
        for i in 0..d {
            for j in i..d {
                comps.push((i, j));
            }
        }
        comps.chunks(2).map(|c| (c[0].0, c[0].1, c.get(1).copied())).collect()
    }

    /// The diffusion matrix at the dual-cube centres, by direct convolution
    /// with the kernel sampled at half-integer offsets (never singular).
    pub fn staggered_matrix(&self, f: &ScalarField) -> Result<StaggeredMatrix> {
        self.check_input(f)?;
        let grid = *self.grid();
        let d = grid.dim();
        let s = grid.spacing();
        let norm = self.norm;
        let spectra = self.staggered.get_or_init(|| {
            self.matrix_pairs()
                .into_iter()
                .map(|(i, j, second)| {
                    let at = move |a: usize, b: usize| {
                        move |off: &[i64]| {
                            let mut z = [0.0; 8];
                            for (k, &o) in off.iter().enumerate() {
                                z[k] = (o as f64 - 0.5) * s;
                            }
                            Kernel::Matrix(a, b).eval(&norm, &z[..off.len()])
                        }
                    };
                    let re = at(i, j);
                    match second {
                        Some((k, l)) => {
                            let im = at(k, l);
                            self.conv.staggered_kernel_spectrum(&re, Some(&im))
                        }
                        None => self.conv.staggered_kernel_spectrum(&re, None),
                    }
                })
                .collect()
        });
        let fhat = self.conv.field_spectrum(&f.values);
        let mut comps = vec![Vec::new(); d * (d + 1) / 2];
        for ((i, j, second), spec) in self.matrix_pairs().into_iter().zip(spectra) {
            let (re, im) = self.conv.apply_staggered(&fhat, spec);
            comps[MatrixField::index(d, i, j)] = re;
            if let Some((k, l)) = second {
                comps[MatrixField::index(d, k, l)] = im;
            }
        }
        Ok(StaggeredMatrix { grid, comps })
    }

    pub fn grid(&self) -> &VelocityGrid {
        self.conv.grid()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn convolver(&self) -> &Convolver {
        &self.conv
    }

    /// Spectrum of a single kernel, if the plan holds it.
    fn spectrum_of(&self, k: Kernel) -> Option<(&[Complex64], bool)> {
        self.layout.iter().zip(&self.spectra).find_map(|(&(a, b), s)| {
            if a == k {
                Some((s.as_slice(), false))
            } else if b == Some(k) {
                Some((s.as_slice(), true))
            } else {
                None
            }
        })
    }

    /// Every coefficient field of `f`.
    pub fn bundle(&self, f: &ScalarField) -> Result<CoefficientBundle> {
        self.check_input(f)?;
        let grid = *self.grid();
        let d = grid.dim();
        let fhat = self.conv.field_spectrum(&f.values);
        let mut h = None;
        let mut a = None;
        let mut potential = None;
        let mut matrix = MatrixField::zeros(&grid);
        let mut drift: Vec<Option<Vec<f64>>> = vec![None; d];
        for (&(k1, k2), spec) in self.layout.iter().zip(&self.spectra) {
            let (re, im) = self.conv.apply(&fhat, spec);
            let mut put = |k: Kernel, v: Vec<f64>| match k {
                Kernel::Reaction => h = Some(v),
                Kernel::Trace => a = Some(v),
                Kernel::Potential => potential = Some(v),
                Kernel::Matrix(i, j) => matrix.comps[MatrixField::index(d, i, j)] = v,
                Kernel::Drift(i) => drift[i] = Some(v),
            };
            put(k1, re);
            if let Some(k2) = k2 {
                put(k2, im);
            }
        }
        let field = |v: Vec<f64>| ScalarField { grid, values: v };
        let h = match h {
            Some(v) => field(v),
            None => f.clone(),
        };
        let drift: Vec<ScalarField> = drift.into_iter().map(|v| field(v.unwrap())).collect();
        let factor = -(2.0 + self.norm.gamma);
        let grad_a = drift.iter().map(|b| b.scaled(factor)).collect();
        let a_star = matrix.min_eigenvalue()?;
        Ok(CoefficientBundle {
            gamma: self.norm.gamma,
            norm: self.norm,
            h,
            a: field(a.unwrap()),
            a_star,
            matrix,
            drift,
            grad_a,
            potential: field(potential.unwrap()),
        })
    }

    /// Convolutions of `f` with the listed kernels.
    pub fn convolve(&self, f: &ScalarField, kernels: &[Kernel]) -> Result<Vec<ScalarField>> {
        self.check_input(f)?;
        let grid = *self.grid();
        let fhat = self.conv.field_spectrum(&f.values);
        kernels
            .iter()
            .map(|&k| {
                if k == Kernel::Reaction && self.norm.is_coulomb() {
                    return Ok(f.clone());
                }
                let (spec, imag) = self
                    .spectrum_of(k)
                    .ok_or_else(|| param("kernel", format!("{k:?} is not in the plan")))?;
                let (re, im) = self.conv.apply(&fhat, spec);
                Ok(ScalarField {
                    grid,
                    values: if imag { im } else { re },
                })
            })
            .collect()
    }

    fn check_input(&self, f: &ScalarField) -> Result<()> {
        if f.grid != *self.grid() {
            return Err(Error::Dimension("field grid differs from plan grid".into()));
        }
        f.check_density()
    }

    /// Applies the spectral Laplacian to the drift potential on the padded
    /// torus and compares `-Laplace psi` with `h` at nodes with
    /// `|v|_inf <= interior * L`. Returns `(max |residual|, max |h|)` over
    /// those nodes.
    pub fn laplacian_residual(&self, f: &ScalarField, interior: f64) -> Result<(f64, f64)> {
        self.check_input(f)?;
        let fhat = self.conv.field_spectrum(&f.values);
        let (spec, imag) = self.spectrum_of(Kernel::Potential).expect("potential in plan");
        let k2 = self.conv.wavenumber_sq();
        // The symbol |k|^2 is real and even, so it keeps the packed real and
        // imaginary convolutions apart.
        let mut buf: Vec<Complex64> = fhat
            .iter()
            .zip(spec)
            .zip(&k2)
            .map(|((a, b), &q)| a * b * q)
            .collect();
        self.conv.transform(&mut buf, true);
        let (re, im) = self.conv.restrict(&buf);
        self.compare_interior(f, if imag { &im } else { &re }, interior)
    }

    fn compare_interior(&self, f: &ScalarField, lap: &[f64], interior: f64) -> Result<(f64, f64)> {
        let grid = *self.grid();
        let h = self.convolve(f, &[Kernel::Reaction])?.pop().unwrap();
        let bound = interior * grid.half_extent();
        let mut v = vec![0.0; grid.dim()];
        let (mut res, mut hmax) = (0.0f64, 0.0f64);
        for i in 0..grid.len() {
            grid.node(i, &mut v);
            if v.iter().all(|x| x.abs() <= bound) {
                res = res.max((lap[i] - h.values[i]).abs());
                hmax = hmax.max(h.values[i].abs());
            }
        }
        Ok((res, hmax))
    }
}

fn pair_spectrum(conv: &Convolver, norm: &Normalization, k1: Kernel, k2: Option<Kernel>) -> Vec<Complex64> {
    let s = conv.grid().spacing();
    let a = k1.stencil(norm, s);
    match k2 {
        Some(k2) => {
            let b = k2.stencil(norm, s);
            conv.kernel_spectrum(&a, Some(&b))
        }
        None => conv.kernel_spectrum(&a, None),
    }
}

fn single(f: &ScalarField, gamma: f64, kernel: Kernel) -> Result<ScalarField> {
    let norm = Normalization::new(f.grid.dim(), gamma)?;
    f.check_density()?;
    if kernel == Kernel::Reaction && norm.is_coulomb() {
        return Ok(f.clone());
    }
    let conv = Convolver::new(&f.grid);
    let spec = pair_spectrum(&conv, &norm, kernel, None);
    let (re, _) = conv.apply(&conv.field_spectrum(&f.values), &spec);
    Ok(ScalarField {
        grid: f.grid,
        values: re,
    })
}

/// `h_{f,gamma}`; equal to `f` at `gamma = -d`.
pub fn h_field(f: &ScalarField, gamma: f64) -> Result<ScalarField> {
    single(f, gamma, Kernel::Reaction)
}

/// `a_{f,gamma}`.
pub fn a_field(f: &ScalarField, gamma: f64) -> Result<ScalarField> {
    single(f, gamma, Kernel::Trace)
}

/// Drift potential `psi` with `-Laplace psi = h`.
pub fn potential_field(f: &ScalarField, gamma: f64) -> Result<ScalarField> {
    single(f, gamma, Kernel::Potential)
}

/// `A_{f,gamma}`.
pub fn matrix_field(f: &ScalarField, gamma: f64) -> Result<MatrixField> {
    let d = f.grid.dim();
    let mut m = MatrixField::zeros(&f.grid);
    for i in 0..d {
        for j in i..d {
            m.comps[MatrixField::index(d, i, j)] = single(f, gamma, Kernel::Matrix(i, j))?.values;
        }
    }
    Ok(m)
}

/// `b = div A`, one field per axis.
pub fn drift_field(f: &ScalarField, gamma: f64) -> Result<Vec<ScalarField>> {
    (0..f.grid.dim())
        .map(|i| single(f, gamma, Kernel::Drift(i)))
        .collect()
}

/// `grad a` from the analytic gradient kernel `(2+gamma)/omega |z|^gamma z`.
pub fn grad_a_field(f: &ScalarField, gamma: f64) -> Result<Vec<ScalarField>> {
    let factor = -(2.0 + gamma);
    Ok(drift_field(f, gamma)?
        .into_iter()
        .map(|b| b.scaled(factor))
        .collect())
}

/// `a*`: smallest eigenvalue of `A` at each node.
pub fn a_star_field(f: &ScalarField, gamma: f64) -> Result<ScalarField> {
    matrix_field(f, gamma)?.min_eigenvalue()
}

/// `(A e, e)` for a fixed unit direction.
pub fn a_star_e(f: &ScalarField, gamma: f64, e: &[f64]) -> Result<ScalarField> {
    if e.len() != f.grid.dim() {
        return Err(Error::Dimension("direction length".into()));
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(param("e", "zero direction"));
    }
    let e: Vec<f64> = e.iter().map(|x| x / norm).collect();
    let m = matrix_field(f, gamma)?;
    Ok(ScalarField {
        grid: f.grid,
        values: (0..f.grid.len()).map(|i| m.quad_form(i, &e)).collect(),
    })
}

/// Empirical lower and upper comparability constants of `a` and `a*`
/// against powers of `<v> = (1 + |v|^2)^(1/2)`.
pub fn comparability_report(f: &ScalarField, gamma: f64) -> Result<DiagnosticsReport> {
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let plan = CoefficientPlan::new(&f.grid, gamma)?;
    let b = plan.bundle(f)?;
    Ok(comparability_from_bundle(f, &b))
}

pub fn comparability_from_bundle(f: &ScalarField, b: &CoefficientBundle) -> DiagnosticsReport {
    let grid = f.grid;
    let gamma = b.gamma;
    let mut rep = DiagnosticsReport::new(
        "comparability",
        "a >= c <v>^(2+gamma), a* >= c <v>^gamma, and a <= C <v>^max(-gamma-2, 2) a* for gamma <= -2",
    );
    let mut v = vec![0.0; grid.dim()];
    let (mut ca, mut cs, mut upper) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    let up_exp = (-gamma - 2.0).max(2.0);
    for i in 0..grid.len() {
        grid.node(i, &mut v);
        let jv = (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        ca = ca.min(b.a.values[i] / jv.powf(2.0 + gamma));
        cs = cs.min(b.a_star.values[i] / jv.powf(gamma));
        if gamma <= -2.0 && b.a_star.values[i] > 0.0 {
            upper = upper.max(b.a.values[i] / (jv.powf(up_exp) * b.a_star.values[i]));
        }
    }
    rep.value("gamma", gamma);
    rep.value("c_a", ca);
    rep.value("c_a_star", cs);
    if gamma <= -2.0 {
        rep.value("C_a_over_a_star", upper);
    }
    let radii: Vec<f64> = [0.5, 0.75]
        .into_iter()
        .filter(|&r| r >= grid.spacing())
        .collect();
    let centers: Vec<Vec<f64>> = (0..grid.len())
        .step_by(7)
        .map(|i| grid.node_vec(i))
        .filter(|c| c.iter().map(|x| x * x).sum::<f64>() <= 9.0)
        .collect();
    if let Ok(cd) = crate::weights::doubling_constant(f, &centers, &radii) {
        rep.value("doubling_constant", cd.value);
    }
    rep
}

/// Closed-form comparability value of the cube average of
/// `(|z|^(2+gamma) (Pi(z) e, e))^m` over the cube of half-side `r` centred at
/// `v0`, bracketed by `[value / factor, value * factor]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelAverageOracle {
    Bracket { lower: f64, upper: f64, regime: u8 },
    /// Too close to the regime boundary to decide.
    Indeterminate,
}

pub fn kernel_cube_average_oracle(
    v0: &[f64],
    r: f64,
    e: &[f64],
    gamma: f64,
    m: f64,
    spacing: f64,
    factor: f64,
) -> Result<KernelAverageOracle> {
    let d = v0.len() as f64;
    if !(r > 0.0) {
        return Err(param("r", "must be positive"));
    }
    if !(m * (2.0 + gamma).abs() < d) {
        return Err(param("m", "need m |2+gamma| < d"));
    }
    if m == 0.0 {
        return Ok(KernelAverageOracle::Bracket {
            lower: 1.0,
            upper: 1.0,
            regime: 0,
        });
    }
    let en = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e: Vec<f64> = e.iter().map(|x| x / en).collect();
    let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let along: f64 = v0.iter().zip(&e).map(|(a, b)| a * b).sum();
    let dist = (norm * norm - along * along).max(0.0).sqrt();
    if (dist - 2.0 * r).abs() < spacing {
        return Ok(KernelAverageOracle::Indeterminate);
    }
    let (value, regime) = if dist >= 2.0 * r {
        let proj = 1.0 - along * along / (norm * norm);
        (norm.powf((2.0 + gamma) * m) * proj.powf(m), 1)
    } else {
        (norm.max(2.0 * r).powf(gamma * m) * r.powf(2.0 * m), 2)
    };
    Ok(KernelAverageOracle::Bracket {
        lower: value / factor,
        upper: value * factor,
        regime,
    })
}
