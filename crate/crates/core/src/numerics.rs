//! Quadrature rules, small symmetric eigenproblems and least-squares fits.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Tensor Gauss-Legendre integral of `g` over `[0,1]^k`.
pub fn unit_cube_integral(k: usize, order: usize, g: impl Fn(&[f64]) -> f64) -> f64 {
    if k == 0 {
        return g(&[]);
    }
    let (x, w) = gauss_legendre(order);
    let mut idx = vec![0usize; k];
    let mut pt = vec![0.0; k];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for j in 0..k {
            pt[j] = x[idx[j]];
            weight *= w[idx[j]];
        }
        total += weight * g(&pt);
        let mut j = k;
        loop {
            if j == 0 {
                return total;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < order {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Average of `|x|^p` over `[0,1]^d`, `p > -d`.
///
/// Splitting the cube into the `d` pyramids where one coordinate dominates
/// and scaling out that coordinate leaves a smooth integrand.
pub fn cube_power_average(d: usize, p: f64) -> f64 {
    let inner = unit_cube_integral(d - 1, 48, |u| {
        (1.0 + u.iter().map(|x| x * x).sum::<f64>()).powf(0.5 * p)
    });
    d as f64 / (d as f64 + p) * inner
}

/// Average of `log|x|` over `[0,1]^d`.
pub fn cube_log_average(d: usize) -> f64 {
    let inner = unit_cube_integral(d - 1, 48, |u| {
        (1.0 + u.iter().map(|x| x * x).sum::<f64>()).ln()
    });
    -1.0 / d as f64 + 0.5 * inner
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// Eigenvalues of a symmetric 3x3 matrix given by its upper triangle
/// `[m00, m01, m02, m11, m12, m22]`, ascending.
pub fn sym3_eigenvalues(m: &[f64; 6]) -> [f64; 3] {
    let [a, b, c, d, e, f] = *m;
    let p1 = b * b + c * c + e * e;
    if p1 <= 1e-300 * (a * a + d * d + f * f).max(1e-300) {
        let mut ev = [a, d, f];
        ev.sort_by(f64::total_cmp);
        return ev;
    }
    let q = (a + d + f) / 3.0;
    let p2 = (a - q).powi(2) + (d - q).powi(2) + (f - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let (ba, bd, bf) = ((a - q) / p, (d - q) / p, (f - q) / p);
    let (bb, bc, be) = (b / p, c / p, e / p);
    let det = ba * (bd * bf - be * be) - bb * (bb * bf - be * bc) + bc * (bb * be - bd * bc);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut ev = [lo, mid, hi];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a dense symmetric matrix (row-major, `n x n`) by cyclic
/// Jacobi rotations, ascending. Returns `None` if the sweeps do not converge.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Option<Vec<f64>> {
    jacobi_eigen(a, n).map(|(vals, _)| vals)
}

/// Eigenvalues (ascending) and eigenvectors of a dense symmetric matrix.
/// Eigenvector `k` is column `k` of the returned row-major matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| m[x * n + x].total_cmp(&m[y * n + y]));
            let vals = order.iter().map(|&k| m[k * n + k]).collect();
            let mut vecs = vec![0.0; n * n];
            for (col, &k) in order.iter().enumerate() {
                for r in 0..n {
                    vecs[r * n + col] = v[r * n + k];
                }
            }
            return Some((vals, vecs));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    None
}

/// Near-uniform unit directions on the 2-sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Some(LineFit {
        slope,
        intercept,
        rms,
    })
}

/// Observed convergence order between successive resolutions, from errors
/// `e` measured at spacings `h`: the least-squares slope of `log e` against
/// `log h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|x| x.ln()).collect();
    fit_line(&lx, &ly).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn power_average_known_values() {
        // 1-d: 1/(1+p)
        assert!((cube_power_average(1, -0.5) - 2.0).abs() < 1e-14);
        // |x|^2 over the unit square: 2/3
        assert!((cube_power_average(2, 2.0) - 2.0 / 3.0).abs() < 1e-13);
        assert!((cube_power_average(3, 2.0) - 1.0).abs() < 1e-13);
        assert!((cube_power_average(3, 0.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_average_one_dimension() {
        assert!((cube_log_average(1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn sym3_diagonal_and_dense() {
        assert_eq!(sym3_eigenvalues(&[2.0, 0.0, 0.0, 5.0, 0.0, 3.0]), [2.0, 3.0, 5.0]);
        let m = [4.0, 1.0, -2.0, 3.0, 0.5, 1.0];
        let full = [4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, 1.0];
        let a = sym3_eigenvalues(&m);
        let b = jacobi_eigenvalues(&full, 3).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 - 0.5 * t).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.rms < 1e-14);
    }

    #[test]
    fn jacobi_vectors_diagonalise() {
        let a = [2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let (vals, vecs) = jacobi_eigen(&a, 3).unwrap();
        for k in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|c| a[r * 3 + c] * vecs[c * 3 + k]).sum();
                assert!((av - vals[k] * vecs[r * 3 + k]).abs() < 1e-12);
            }
        }
    }
}
