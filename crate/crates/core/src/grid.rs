//! Truncated velocity lattice, midpoint quadrature, dyadic cubes and the
//! canonical initial profiles.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Default cap on the number of lattice nodes (2^27, about 1 GiB per field).
pub const DEFAULT_MAX_NODES: usize = 1 << 27;

const SNAPSHOT_MAGIC: &[u8; 4] = b"LLF1";

/// Cell-centred lattice on `[-L, L]^d` with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    dim: usize,
    half_extent: f64,
    points_per_axis: usize,
    spacing: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, half_extent: f64, points_per_axis: usize) -> Result<Self> {
        Self::with_cap(dim, half_extent, points_per_axis, DEFAULT_MAX_NODES)
    }

    pub fn with_cap(
        dim: usize,
        half_extent: f64,
        points_per_axis: usize,
        max_nodes: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half extent must be positive, got {half_extent}"
            )));
        }
        if points_per_axis < 4 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {points_per_axis}"
            )));
        }
        let total = (points_per_axis as u128).checked_pow(dim as u32);
        match total {
            Some(t) if t <= max_nodes as u128 => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{points_per_axis}^{dim} nodes exceeds the cap of {max_nodes}"
                )))
            }
        }
        let spacing = 2.0 * half_extent / points_per_axis as f64;
        // keep spacing * N == 2L in the stored values
        let half_extent = spacing * points_per_axis as f64 / 2.0;
        Ok(Self {
            dim,
            half_extent,
            points_per_axis,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.spacing
    }

    /// All axis coordinates, shared by every axis.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|i| self.coord(i)).collect()
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.points_per_axis;
        for k in (0..self.dim).rev() {
            out[k] = flat % n;
            flat /= n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Velocity of node `flat`.
    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let n = self.points_per_axis;
        let mut rest = flat;
        for k in (0..self.dim).rev() {
            out[k] = self.coord(rest % n);
            rest /= n;
        }
    }

    pub fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.node(flat, &mut v);
        v
    }

    /// Flat index stride of axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - k) as u32)
    }

    /// Index of the node nearest to `v` (clamped to the box).
    pub fn nearest_node(&self, v: &[f64]) -> usize {
        let n = self.points_per_axis as i64;
        let idx: Vec<usize> = v
            .iter()
            .map(|&x| {
                let i = ((x + self.half_extent) / self.spacing - 0.5).round() as i64;
                i.clamp(0, n - 1) as usize
            })
            .collect();
        self.ravel(&idx)
    }

    /// Index range `[lo, hi)` of nodes whose coordinate lies in `[a, b]`.
    fn index_range(&self, a: f64, b: f64) -> (usize, usize) {
        let n = self.points_per_axis as f64;
        let lo = ((a + self.half_extent) / self.spacing - 0.5).ceil().max(0.0);
        let hi = ((b + self.half_extent) / self.spacing - 0.5).floor() + 1.0;
        let hi = hi.min(n).max(lo);
        (lo as usize, hi as usize)
    }
}

/// Real values on the lattice, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &VelocityGrid) -> Self {
        Self {
            grid: *grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &VelocityGrid, c: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    /// Samples `g(v)` at every node.
    pub fn from_fn(grid: &VelocityGrid, mut g: impl FnMut(&[f64]) -> f64) -> Self {
        let mut v = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node(i, &mut v);
                g(&v)
            })
            .collect();
        Self {
            grid: *grid,
            values,
        }
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&x| g(x)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Discrete L2 norm, `(h^d sum v^2)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// Errors when any node is negative.
    pub fn check_density(&self) -> Result<()> {
        let mut count = 0;
        let mut first = usize::MAX;
        for (i, &x) in self.values.iter().enumerate() {
            if x < 0.0 || x.is_nan() {
                count += 1;
                first = first.min(i);
            }
        }
        if count > 0 {
            return Err(Error::NegativeField { count, first });
        }
        Ok(())
    }

    pub fn integrate(&self, region: &Region) -> Result<f64> {
        integrate(self, region)
    }
}

/// A lattice-aligned cube made of whole cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    /// First node index per axis.
    pub lo: Vec<usize>,
    /// Cells per side.
    pub cells: usize,
    pub level: usize,
    pub parent: Option<usize>,
}

impl Cube {
    pub fn side(&self, grid: &VelocityGrid) -> f64 {
        self.cells as f64 * grid.spacing()
    }

    pub fn center(&self, grid: &VelocityGrid) -> Vec<f64> {
        self.lo
            .iter()
            .map(|&i| -grid.half_extent() + (i as f64 + self.cells as f64 / 2.0) * grid.spacing())
            .collect()
    }

    pub fn volume(&self, grid: &VelocityGrid) -> f64 {
        self.side(grid).powi(grid.dim() as i32)
    }

    pub fn node_count(&self, dim: usize) -> usize {
        self.cells.pow(dim as u32)
    }

    /// Calls `g` with the flat index of every node in the cube.
    pub fn for_each_node(&self, grid: &VelocityGrid, mut g: impl FnMut(usize)) {
        let d = grid.dim();
        let mut off = vec![0usize; d];
        let mut idx = vec![0usize; d];
        loop {
            for k in 0..d {
                idx[k] = self.lo[k] + off[k];
            }
            g(grid.ravel(&idx));
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                off[k] += 1;
                if off[k] < self.cells {
                    break;
                }
                off[k] = 0;
            }
        }
    }

    /// The cube with the same centre and `factor` times the side, clipped
    /// to the grid. Returns the clipped index box and whether clipping
    /// occurred.
    pub fn enlarged(&self, grid: &VelocityGrid, factor: usize) -> (Vec<(usize, usize)>, bool) {
        let n = grid.points_per_axis() as i64;
        let c = self.cells as i64;
        let grow = (factor as i64 - 1) * c / 2;
        let mut clipped = false;
        let bounds = self
            .lo
            .iter()
            .map(|&lo| {
                let a = lo as i64 - grow;
                let b = lo as i64 + c + grow;
                if a < 0 || b > n {
                    clipped = true;
                }
                (a.max(0) as usize, b.min(n) as usize)
            })
            .collect();
        (bounds, clipped)
    }
}

/// Dyadic hierarchy: a lattice-aligned tiling by cubes of side `base_side`
/// and all refinements down to `levels`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubeSet {
    pub base_side: f64,
    pub levels: usize,
    pub cubes: Vec<Cube>,
    /// Start of each level in `cubes`, plus the total length.
    pub level_start: Vec<usize>,
}

impl CubeSet {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn level(&self, k: usize) -> &[Cube] {
        &self.cubes[self.level_start[k]..self.level_start[k + 1]]
    }
}

pub fn make_dyadic_cubes(grid: &VelocityGrid, base_side: f64, levels: usize) -> Result<CubeSet> {
    let ratio = base_side / grid.spacing();
    let cells = ratio.round();
    if !(base_side > 0.0) || (ratio - cells).abs() > 1e-9 * ratio.max(1.0) || cells < 1.0 {
        return Err(param(
            "base_side",
            format!(
                "{base_side} is not a multiple of the spacing {}",
                grid.spacing()
            ),
        ));
    }
    let cells = cells as usize;
    if !cells.is_multiple_of(1usize << levels) || (cells >> levels) < 2 {
        return Err(param(
            "levels",
            format!("{levels} levels leave fewer than 2 cells per side of a {cells}-cell cube"),
        ));
    }
    let d = grid.dim();
    let per_axis = grid.points_per_axis() / cells;
    if per_axis == 0 {
        return Err(param("base_side", "larger than the grid".to_string()));
    }
    let mut cubes = Vec::new();
    let mut level_start = vec![0];
    let mut t = vec![0usize; d];
    loop {
        cubes.push(Cube {
            lo: t.iter().map(|&x| x * cells).collect(),
            cells,
            level: 0,
            parent: None,
        });
        let mut k = d;
        let mut done = true;
        while k > 0 {
            k -= 1;
            t[k] += 1;
            if t[k] < per_axis {
                done = false;
                break;
            }
            t[k] = 0;
        }
        if done {
            break;
        }
    }
    level_start.push(cubes.len());
    for level in 1..=levels {
        let (a, b) = (level_start[level - 1], level_start[level]);
        for p in a..b {
            let parent = cubes[p].clone();
            let half = parent.cells / 2;
            for mask in 0..(1usize << d) {
                let lo = (0..d)
                    .map(|k| parent.lo[k] + if mask >> (d - 1 - k) & 1 == 1 { half } else { 0 })
                    .collect();
                cubes.push(Cube {
                    lo,
                    cells: half,
                    level,
                    parent: Some(p),
                });
            }
        }
        level_start.push(cubes.len());
    }
    Ok(CubeSet {
        base_side: cells as f64 * grid.spacing(),
        levels,
        cubes,
        level_start,
    })
}

/// Integration region.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    All,
    Ball { center: Vec<f64>, radius: f64 },
    Cube(Cube),
}

/// Midpoint quadrature over `region`: `h^d` times the sum of the values at
/// nodes inside it. Ball membership is decided by node centre.
pub fn integrate(field: &ScalarField, region: &Region) -> Result<f64> {
    let grid = &field.grid;
    let vol = grid.cell_volume();
    match region {
        Region::All => Ok(vol * field.values.iter().sum::<f64>()),
        Region::Cube(cube) => {
            let mut s = 0.0;
            cube.for_each_node(grid, |i| s += field.values[i]);
            Ok(vol * s)
        }
        Region::Ball { center, radius } => {
            let mut s = 0.0;
            let count = for_each_in_ball(grid, center, *radius, |i| s += field.values[i]);
            if count == 0 {
                return Err(Error::EmptyRegion);
            }
            Ok(vol * s)
        }
    }
}

/// Calls `g` for each node whose centre lies in the closed ball; returns the
/// node count.
pub fn for_each_in_ball(
    grid: &VelocityGrid,
    center: &[f64],
    radius: f64,
    mut g: impl FnMut(usize),
) -> usize {
    let d = grid.dim();
    let ranges: Vec<(usize, usize)> = center
        .iter()
        .map(|&c| grid.index_range(c - radius, c + radius))
        .collect();
    if ranges.iter().any(|&(a, b)| a >= b) {
        return 0;
    }
    let r2 = radius * radius;
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    let mut count = 0;
    loop {
        let dist2: f64 = (0..d)
            .map(|k| {
                let x = grid.coord(idx[k]) - center[k];
                x * x
            })
            .sum();
        if dist2 <= r2 {
            g(grid.ravel(&idx));
            count += 1;
        }
        let mut k = d;
        loop {
            if k == 0 {
                return count;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
        }
    }
}

/// Average of `field` over a cube.
pub fn cube_average(field: &ScalarField, cube: &Cube) -> Result<f64> {
    if cube.cells == 0 {
        return Err(Error::EmptyRegion);
    }
    let n = cube.node_count(field.grid.dim()) as f64;
    let mut s = 0.0;
    cube.for_each_node(&field.grid, |i| s += field.values[i]);
    Ok(s / n)
}

/// Standard Gaussian `(2 pi)^(-d/2) exp(-|v|^2/2)` sampled at the nodes and
/// corrected by a factor `alpha + beta |v|^2` so that the discrete mass is 1
/// and the discrete second moment is `d`.
pub fn maxwellian(grid: &VelocityGrid) -> ScalarField {
    let d = grid.dim() as f64;
    let norm = (2.0 * PI).powf(-d / 2.0);
    let g = ScalarField::from_fn(grid, |v| {
        let r2: f64 = v.iter().map(|x| x * x).sum();
        norm * (-0.5 * r2).exp()
    });
    let mut v = vec![0.0; grid.dim()];
    let (mut m0, mut m2, mut m4) = (0.0, 0.0, 0.0);
    for (i, &gi) in g.values.iter().enumerate() {
        grid.node(i, &mut v);
        let r2: f64 = v.iter().map(|x| x * x).sum();
        m0 += gi;
        m2 += gi * r2;
        m4 += gi * r2 * r2;
    }
    let w = grid.cell_volume();
    let (m0, m2, m4) = (w * m0, w * m2, w * m4);
    // alpha m0 + beta m2 = 1, alpha m2 + beta m4 = d
    let det = m0 * m4 - m2 * m2;
    let alpha = (m4 - d * m2) / det;
    let beta = (d * m0 - m2) / det;
    let mut f = g;
    for (i, x) in f.values.iter_mut().enumerate() {
        grid.node(i, &mut v);
        let r2: f64 = v.iter().map(|x| x * x).sum();
        *x *= (alpha + beta * r2).max(0.0);
    }
    f
}

/// Gaussian with standard deviation `sigma` centred at `center`, rescaled to
/// unit discrete mass.
pub fn gaussian(grid: &VelocityGrid, center: &[f64], sigma: f64) -> Result<ScalarField> {
    if !(sigma > 0.0) {
        return Err(param("sigma", format!("must be positive, got {sigma}")));
    }
    if center.len() != grid.dim() {
        return Err(Error::Dimension("gaussian centre".into()));
    }
    let f = ScalarField::from_fn(grid, |v| {
        let r2: f64 = v.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
        (-0.5 * r2 / (sigma * sigma)).exp()
    });
    unit_mass(f)
}

/// Centred Gaussian squeezed to width `sigma` along the first axis, with the
/// remaining widths chosen so that the energy is `d`; unit mass.
pub fn squeezed_gaussian(grid: &VelocityGrid, sigma: f64) -> Result<ScalarField> {
    let d = grid.dim();
    if !(sigma > 0.0) || (d > 1 && sigma * sigma >= d as f64) {
        return Err(param("sigma", format!("need 0 < sigma^2 < d, got {sigma}")));
    }
    if d == 1 {
        return gaussian(grid, &[0.0], sigma);
    }
    let tau2 = (d as f64 - sigma * sigma) / (d - 1) as f64;
    let f = ScalarField::from_fn(grid, |v| {
        let rest: f64 = v[1..].iter().map(|x| x * x).sum();
        (-0.5 * v[0] * v[0] / (sigma * sigma) - 0.5 * rest / tau2).exp()
    });
    unit_mass(f)
}

/// Mixture `(1 - weight) M + weight G_sigma` of the Maxwellian and a narrow
/// centred Gaussian; unit mass.
pub fn concentrated_gaussian(grid: &VelocityGrid, sigma: f64, weight: f64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(param("weight", "must lie in [0, 1]"));
    }
    let spike = gaussian(grid, &vec![0.0; grid.dim()], sigma)?;
    let m = maxwellian(grid);
    let values = m
        .values
        .iter()
        .zip(&spike.values)
        .map(|(a, b)| (1.0 - weight) * a + weight * b)
        .collect();
    Ok(ScalarField { grid: *grid, values })
}

/// `|v|^(-m)` on the unit ball, zero outside, unit mass.
pub fn counterexample_profile(grid: &VelocityGrid, m: f64) -> Result<ScalarField> {
    let d = grid.dim() as f64;
    if !(m >= 0.0) || m >= d {
        return Err(param("m", format!("need 0 <= m < d, got {m}")));
    }
    let f = ScalarField::from_fn(grid, |v| {
        let r: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r <= 1.0 {
            r.powf(-m)
        } else {
            0.0
        }
    });
    unit_mass(f)
}

/// Smoothed indicator of the shell `||v| - radius| < width`, unit mass.
pub fn shell(grid: &VelocityGrid, radius: f64, width: f64) -> Result<ScalarField> {
    if !(width > 0.0) || !(radius > 0.0) {
        return Err(param("shell", "radius and width must be positive"));
    }
    let f = ScalarField::from_fn(grid, |v| {
        let r: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t = (r - radius) / width;
        (-0.5 * t * t).exp()
    });
    unit_mass(f)
}

/// A random smooth density: a sum of `bumps` Gaussians with random centres
/// in the ball of radius `spread`, widths in `[0.5, 1.5]` and weights in
/// `[0.2, 1]`, rescaled to unit mass.
pub fn random_density<R: Rng>(
    grid: &VelocityGrid,
    rng: &mut R,
    bumps: usize,
    spread: f64,
) -> ScalarField {
    let d = grid.dim();
    let params: Vec<(Vec<f64>, f64, f64)> = (0..bumps.max(1))
        .map(|_| {
            let c: Vec<f64> = loop {
                let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                if c.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break c.into_iter().map(|x| x * spread).collect();
                }
            };
            (c, rng.random_range(0.5..1.5), rng.random_range(0.2..1.0))
        })
        .collect();
    let f = ScalarField::from_fn(grid, |v| {
        params
            .iter()
            .map(|(c, s, w)| {
                let r2: f64 = v.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
                w * (-0.5 * r2 / (s * s)).exp()
            })
            .sum()
    });
    unit_mass(f).expect("random density has positive mass")
}

fn unit_mass(mut f: ScalarField) -> Result<ScalarField> {
    let m = integrate(&f, &Region::All)?;
    if !(m > 0.0) {
        return Err(Error::ZeroField);
    }
    for x in &mut f.values {
        *x /= m;
    }
    Ok(f)
}

/// Embeds `f` in the centre of a lattice with `points` nodes per axis and the
/// same spacing, zero outside the original box.
pub fn zero_pad(f: &ScalarField, points: usize) -> Result<ScalarField> {
    let n = f.grid.points_per_axis();
    if points < n || !(points - n).is_multiple_of(2) {
        return Err(param(
            "points",
            format!("{points} must be at least {n} and differ from it by an even count"),
        ));
    }
    let d = f.grid.dim();
    let big = VelocityGrid::new(d, 0.5 * points as f64 * f.grid.spacing(), points)?;
    let shift = (points - n) / 2;
    let mut out = ScalarField::zeros(&big);
    let mut idx = vec![0usize; d];
    for (i, &x) in f.values.iter().enumerate() {
        f.grid.unravel(i, &mut idx);
        idx.iter_mut().for_each(|k| *k += shift);
        out.values[big.ravel(&idx)] = x;
    }
    Ok(out)
}

/// Writes a field snapshot: `LLF1`, then dim, N and L as little-endian
/// 64-bit values, then the `N^d` values.
pub fn write_snapshot(w: &mut impl Write, field: &ScalarField) -> Result<()> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(28 + 8 * field.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(g.points_per_axis() as u64).to_le_bytes());
    buf.extend_from_slice(&g.half_extent().to_le_bytes());
    for x in &field.values {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 28 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[4 + 8 * k..12 + 8 * k].try_into().unwrap() };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let grid = VelocityGrid::new(dim, l, n)?;
    let body = &bytes[28..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Snapshot(format!(
            "expected {} values, found {} bytes",
            grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarField { grid, values })
}

pub fn save_snapshot(path: &Path, field: &ScalarField) -> Result<()> {
    let mut buf = Vec::new();
    write_snapshot(&mut buf, field)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_snapshot(path: &Path) -> Result<ScalarField> {
    let mut file = std::fs::File::open(path)?;
    read_snapshot(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_nodes() {
        let g = VelocityGrid::new(1, 1.0, 4).unwrap();
        assert_eq!(g.axis(), vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn default_grid_spacing() {
        let g = VelocityGrid::new(3, 8.0, 64).unwrap();
        assert_eq!(g.len(), 64 * 64 * 64);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.spacing() * 64.0, 16.0);
    }

    #[test]
    fn rejects_odd_and_huge() {
        assert!(VelocityGrid::new(3, 8.0, 3).is_err());
        assert!(VelocityGrid::new(3, 8.0, 2).is_err());
        assert!(VelocityGrid::with_cap(3, 8.0, 64, 1000).is_err());
        assert!(VelocityGrid::new(3, -1.0, 8).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = VelocityGrid::new(3, 2.0, 6).unwrap();
        let mut idx = [0; 3];
        for i in 0..g.len() {
            g.unravel(i, &mut idx);
            assert_eq!(g.ravel(&idx), i);
        }
    }

    #[test]
    fn volume_of_box() {
        let g = VelocityGrid::new(3, 8.0, 64).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(integrate(&one, &Region::All).unwrap(), 4096.0);
        let zero = ScalarField::zeros(&g);
        assert_eq!(integrate(&zero, &Region::All).unwrap(), 0.0);
    }

    #[test]
    fn empty_ball_is_an_error() {
        let g = VelocityGrid::new(2, 1.0, 4).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let far = Region::Ball {
            center: vec![5.0, 5.0],
            radius: 0.1,
        };
        assert!(matches!(integrate(&one, &far), Err(Error::EmptyRegion)));
    }

    #[test]
    fn cube_counts() {
        let g = VelocityGrid::new(3, 8.0, 64).unwrap();
        assert_eq!(make_dyadic_cubes(&g, 2.0, 0).unwrap().len(), 512);
        assert_eq!(make_dyadic_cubes(&g, 2.0, 1).unwrap().len(), 512 + 4096);
        assert!(make_dyadic_cubes(&g, 0.3, 0).is_err());
    }

    #[test]
    fn linear_field_cube_average_is_centre_value() {
        let g = VelocityGrid::new(3, 4.0, 16).unwrap();
        let f = ScalarField::from_fn(&g, |v| 1.0 + 2.0 * v[0] - v[1] + 0.5 * v[2]);
        let cubes = make_dyadic_cubes(&g, 2.0, 1).unwrap();
        for c in &cubes.cubes {
            let x = c.center(&g);
            let expect = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
            assert!((cube_average(&f, c).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn maxwellian_moments_enforced() {
        let g = VelocityGrid::new(3, 8.0, 32).unwrap();
        let m = maxwellian(&g);
        let mass = integrate(&m, &Region::All).unwrap();
        let e = ScalarField::from_fn(&g, |v| v.iter().map(|x| x * x).sum());
        let energy: f64 = g.cell_volume()
            * m.values.iter().zip(&e.values).map(|(a, b)| a * b).sum::<f64>();
        assert!((mass - 1.0).abs() < 1e-14);
        assert!((energy - 3.0).abs() < 1e-13);
    }

    #[test]
    fn counterexample_rejects_non_integrable() {
        let g = VelocityGrid::new(3, 2.0, 16).unwrap();
        assert!(counterexample_profile(&g, 3.0).is_err());
        let f = counterexample_profile(&g, 2.9).unwrap();
        assert!((integrate(&f, &Region::All).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_roundtrip_and_corruption() {
        let g = VelocityGrid::new(2, 3.0, 8).unwrap();
        let f = ScalarField::from_fn(&g, |v| v[0] - 2.0 * v[1]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 28 + 8 * 64);
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
        buf.truncate(100);
        assert!(read_snapshot(&mut buf.as_slice()).is_err());
    }
}
