//! Symmetric finite-volume discretisation of `-div(A grad u)` and
//! centred-difference gradients.
//!
//! The quadratic form is assembled on the dual cubes spanned by `2^d`
//! neighbouring nodes. On a dual cube with matrix `A_c` (the corner average
//! of a nodal field, or a value sampled at the cube centre),
//! edge differences `delta_{k,e}` along axis `k` and their mean `g_k`,
//!
//! ```text
//! E_c = sum_k A_kk mean_e(delta_{k,e}^2) + sum_{k != l} A_kl g_k g_l
//!     = (A_c g, g) + sum_k A_kk (mean_e delta^2 - g_k^2) >= 0,
//! ```
//!
//! so the assembled matrix is symmetric and positive semidefinite whenever
//! `A` is, and the diagonal part has no checkerboard null modes.

use crate::coefficients::{MatrixField, StaggeredMatrix};
use crate::grid::{ScalarField, VelocityGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// `u = 0` on a layer of ghost nodes one spacing outside the box.
    Dirichlet,
    /// No flux through the box boundary.
    Neumann,
}

pub struct DiffusionOperator {
    grid: VelocityGrid,
    boundary: Boundary,
    ext: usize,
    ext_len: usize,
    /// Extended flat index of each dual cube's lowest corner.
    cubes: Vec<usize>,
    /// Corner-averaged upper-triangle entries, `ncomp` per cube.
    coef: Vec<f64>,
    corners: Vec<usize>,
    /// Per axis, pairs of corner positions forming the edges.
    edges: Vec<Vec<(usize, usize)>>,
}

impl DiffusionOperator {
    /// Dual-cube matrices are the averages of the nodal matrix over the
    /// cube's corners; ghost nodes take the coefficient of the nearest node.
    pub fn new(matrix: &MatrixField, boundary: Boundary) -> Self {
        let grid = matrix.grid;
        let d = grid.dim();
        let n = grid.points_per_axis();
        let mut node = vec![0usize; d];
        Self::build(grid, boundary, |idx, acc| {
            for mask in 0..1usize << d {
                for k in 0..d {
                    let e = idx[k] + ((mask >> (d - 1 - k)) & 1);
                    node[k] = e.clamp(1, n) - 1;
                }
                let flat = grid.ravel(&node);
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += matrix.comps[c][flat];
                }
            }
            let scale = 1.0 / (1usize << d) as f64;
            acc.iter_mut().for_each(|a| *a *= scale);
        })
    }

    /// Dual-cube matrices taken from the vertex lattice directly.
    pub fn from_staggered(matrix: &StaggeredMatrix, boundary: Boundary) -> Self {
        let grid = matrix.grid;
        let side = matrix.side();
        Self::build(grid, boundary, |idx, acc| {
            let flat = idx.iter().fold(0, |p, &k| p * side + k);
            for (c, a) in acc.iter_mut().enumerate() {
                *a = matrix.comps[c][flat];
            }
        })
    }

    fn build(grid: VelocityGrid, boundary: Boundary, mut cube_matrix: impl FnMut(&[usize], &mut [f64])) -> Self {
        let d = grid.dim();
        assert!(d <= 3, "diffusion operator supports d <= 3");
        let n = grid.points_per_axis();
        let ext = n + 2;
        let ext_len = ext.pow(d as u32);
        let ext_stride = |k: usize| ext.pow((d - 1 - k) as u32);
        let corners: Vec<usize> = (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| ((mask >> (d - 1 - k)) & 1) * ext_stride(k))
                    .sum()
            })
            .collect();
        let edges: Vec<Vec<(usize, usize)>> = (0..d)
            .map(|k| {
                let bit = 1usize << (d - 1 - k);
                (0..1usize << d)
                    .filter(|m| m & bit == 0)
                    .map(|m| (m, m | bit))
                    .collect()
            })
            .collect();
        let (lo, hi) = match boundary {
            Boundary::Dirichlet => (0, n),
            Boundary::Neumann => (1, n - 1),
        };
        let per = hi - lo + 1;
        let ncomp = d * (d + 1) / 2;
        let count = per.pow(d as u32);
        let mut cubes = Vec::with_capacity(count);
        let mut coef = Vec::with_capacity(count * ncomp);
        let mut idx = vec![0usize; d];
        for t in 0..count {
            let mut rest = t;
            for k in (0..d).rev() {
                idx[k] = lo + rest % per;
                rest /= per;
            }
            cubes.push((0..d).map(|k| idx[k] * ext_stride(k)).sum());
            let mut acc = vec![0.0; ncomp];
            cube_matrix(&idx, &mut acc);
            coef.extend_from_slice(&acc);
        }
        Self {
            grid,
            boundary,
            ext,
            ext_len,
            cubes,
            coef,
            corners,
            edges,
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn embed(&self, x: &[f64]) -> Vec<f64> {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let mut xe = vec![0.0; self.ext_len];
        // copy rows along the last axis
        let rows = x.len() / n;
        let mut idx = vec![0usize; d];
        for r in 0..rows {
            let mut rest = r;
            for k in (0..d - 1).rev() {
                idx[k] = rest % n + 1;
                rest /= n;
            }
            let mut base = 0;
            for k in 0..d - 1 {
                base = base * self.ext + idx[k];
            }
            let base = base * self.ext + 1;
            xe[base..base + n].copy_from_slice(&x[r * n..(r + 1) * n]);
        }
        xe
    }

    fn extract_add(&self, ye: &[f64], y: &mut [f64]) {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let rows = y.len() / n;
        let mut idx = vec![0usize; d];
        for r in 0..rows {
            let mut rest = r;
            for k in (0..d - 1).rev() {
                idx[k] = rest % n + 1;
                rest /= n;
            }
            let mut base = 0;
            for k in 0..d - 1 {
                base = base * self.ext + idx[k];
            }
            let base = base * self.ext + 1;
            for (a, b) in y[r * n..(r + 1) * n].iter_mut().zip(&ye[base..base + n]) {
                *a += b;
            }
        }
    }

    /// `y = K x`, with `(x, K x)` the discrete `int (A grad x, grad x)`
    /// divided by the cell volume.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.apply_add(x, 1.0, y);
    }

    /// `y += scale K x`.
    pub fn apply_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        let d = self.grid.dim();
        let h = self.grid.spacing();
        let ncomp = d * (d + 1) / 2;
        let ne = (1usize << (d - 1)) as f64;
        let xe = self.embed(x);
        let mut ye = vec![0.0; self.ext_len];
        let mut vals = [0.0f64; 8];
        let mut g = [0.0f64; 8];
        let mut amat = [[0.0f64; 8]; 8];
        let w = scale / (ne * h * h);
        for (c, &base) in self.cubes.iter().enumerate() {
            let cf = &self.coef[c * ncomp..(c + 1) * ncomp];
            for (m, &off) in self.corners.iter().enumerate() {
                vals[m] = xe[base + off];
            }
            let mut t = 0;
            for i in 0..d {
                for j in i..d {
                    amat[i][j] = cf[t];
                    amat[j][i] = cf[t];
                    t += 1;
                }
            }
            for k in 0..d {
                let s: f64 = self.edges[k].iter().map(|&(a, b)| vals[b] - vals[a]).sum();
                g[k] = s / ne;
            }
            for k in 0..d {
                let mut cross = 0.0;
                for l in 0..d {
                    if l != k {
                        cross += amat[k][l] * g[l];
                    }
                }
                for &(a, b) in &self.edges[k] {
                    // differences are in units of h; the 1/h^2 sits in w
                    let flux = w * (amat[k][k] * (vals[b] - vals[a]) + cross);
                    ye[base + self.corners[b]] += flux;
                    ye[base + self.corners[a]] -= flux;
                }
            }
        }
        self.extract_add(&ye, y);
    }

    /// Diagonal of `K`.
    pub fn diagonal(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let h = self.grid.spacing();
        let ncomp = d * (d + 1) / 2;
        let ne = (1usize << (d - 1)) as f64;
        let w = 1.0 / (ne * h * h);
        let mut ye = vec![0.0; self.ext_len];
        let sign = |m: usize, k: usize| if (m >> (d - 1 - k)) & 1 == 1 { 1.0 } else { -1.0 };
        for (c, &base) in self.cubes.iter().enumerate() {
            let cf = &self.coef[c * ncomp..(c + 1) * ncomp];
            for (m, &off) in self.corners.iter().enumerate() {
                let mut s = 0.0;
                let mut t = 0;
                for k in 0..d {
                    for l in k..d {
                        s += if k == l {
                            cf[t]
                        } else {
                            2.0 * sign(m, k) * sign(m, l) * cf[t] / ne
                        };
                        t += 1;
                    }
                }
                ye[base + off] += w * s;
            }
        }
        let mut y = vec![0.0; self.grid.len()];
        self.extract_add(&ye, &mut y);
        y
    }

    /// Discrete `int (A grad x, grad x) dv`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        self.grid.cell_volume() * x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Centred-difference gradient; one-sided at the box faces.
pub fn centered_gradient(u: &ScalarField) -> Vec<ScalarField> {
    let grid = u.grid;
    let d = grid.dim();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let mut out = vec![ScalarField::zeros(&grid); d];
    let mut idx = vec![0usize; d];
    for i in 0..grid.len() {
        grid.unravel(i, &mut idx);
        for k in 0..d {
            let s = grid.stride(k);
            let (lo, hi, span) = if idx[k] == 0 {
                (i, i + s, h)
            } else if idx[k] == n - 1 {
                (i - s, i, h)
            } else {
                (i - s, i + s, 2.0 * h)
            };
            out[k].values[i] = (u.values[hi] - u.values[lo]) / span;
        }
    }
    out
}

/// `int (A grad u, grad u) dv` with centred-difference gradients.
pub fn centered_energy(matrix: &MatrixField, u: &ScalarField) -> f64 {
    let grad = centered_gradient(u);
    let d = u.grid.dim();
    let mut s = 0.0;
    for i in 0..u.grid.len() {
        for k in 0..d {
            for l in 0..d {
                s += matrix.get(i, k, l) * grad[k].values[i] * grad[l].values[i];
            }
        }
    }
    s * u.grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_matrix(grid: &VelocityGrid, entries: &[f64]) -> MatrixField {
        let mut m = MatrixField::zeros(grid);
        for (c, &e) in entries.iter().enumerate() {
            m.comps[c] = vec![e; grid.len()];
        }
        m
    }

    #[test]
    fn symmetric_and_psd() {
        let g = VelocityGrid::new(3, 1.0, 4).unwrap();
        let mut m = MatrixField::zeros(&g);
        for i in 0..g.len() {
            let t = i as f64 * 0.1;
            m.comps[0][i] = 2.0 + t.sin();
            m.comps[1][i] = 0.3 * t.cos();
            m.comps[2][i] = -0.2;
            m.comps[3][i] = 1.5;
            m.comps[4][i] = 0.1 * t.sin();
            m.comps[5][i] = 1.0 + 0.5 * t.cos();
        }
        for bc in [Boundary::Dirichlet, Boundary::Neumann] {
            let op = DiffusionOperator::new(&m, bc);
            let n = g.len();
            let mut k = vec![0.0; n * n];
            let mut e = vec![0.0; n];
            let mut col = vec![0.0; n];
            for j in 0..n {
                e.iter_mut().for_each(|x| *x = 0.0);
                e[j] = 1.0;
                op.apply(&e, &mut col);
                for i in 0..n {
                    k[i * n + j] = col[i];
                }
            }
            for i in 0..n {
                for j in 0..n {
                    assert!((k[i * n + j] - k[j * n + i]).abs() < 1e-12);
                }
            }
            let ev = crate::numerics::jacobi_eigenvalues(&k, n).unwrap();
            assert!(ev[0] > -1e-10, "{:?} {}", bc, ev[0]);
            if bc == Boundary::Neumann {
                assert!(ev[0].abs() < 1e-10);
            } else {
                assert!(ev[0] > 1e-3);
            }
        }
    }

    #[test]
    fn identity_matrix_gives_laplacian_on_quadratics() {
        let g = VelocityGrid::new(3, 2.0, 12).unwrap();
        let m = constant_matrix(&g, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let op = DiffusionOperator::new(&m, Boundary::Neumann);
        let u = ScalarField::from_fn(&g, |v| v[0] * v[0] + 2.0 * v[1] * v[1] - v[2] * v[2]);
        let mut y = vec![0.0; g.len()];
        op.apply(&u.values, &mut y);
        let mut idx = [0usize; 3];
        for i in 0..g.len() {
            g.unravel(i, &mut idx);
            if idx.iter().all(|&k| k > 0 && k < 11) {
                assert!((y[i] + 4.0).abs() < 1e-10, "{}", y[i]);
            }
        }
    }

    #[test]
    fn neumann_conserves_sum() {
        let g = VelocityGrid::new(2, 1.0, 8).unwrap();
        let m = constant_matrix(&g, &[1.0, 0.4, 2.0]);
        let op = DiffusionOperator::new(&m, Boundary::Neumann);
        let u = ScalarField::from_fn(&g, |v| (3.0 * v[0]).sin() + v[1]);
        let mut y = vec![0.0; g.len()];
        op.apply(&u.values, &mut y);
        assert!(y.iter().sum::<f64>().abs() < 1e-12);
    }
}
