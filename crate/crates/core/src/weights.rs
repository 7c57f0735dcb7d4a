//! Muckenhoupt, reverse-Hölder, doubling, Morrey-ratio and Chanillo-Wheeden
//! functionals of gridded weights over finite dyadic cube families.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{for_each_in_ball, Cube, CubeSet, ScalarField, VelocityGrid};

/// Cubes whose weight integral falls below this fraction of the global
/// integral are excluded from suprema and counted.
pub const DEGENERATE_FRACTION: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantName {
    Ap,
    A1,
    RH,
    CD,
    Morrey,
    Sigma,
    CurlyC,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSetSummary {
    pub base_side: f64,
    pub levels: usize,
    pub count: usize,
}

impl CubeSetSummary {
    pub fn of(cubes: &CubeSet) -> Self {
        Self {
            base_side: cubes.base_side,
            levels: cubes.levels,
            count: cubes.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub weight_id: String,
    pub cube_set: Option<CubeSetSummary>,
    pub constant_name: ConstantName,
    pub value: f64,
    /// Index of the maximising cube in the cube set.
    pub argmax_cube: Option<usize>,
    pub parameters: WeightParameters,
    /// Cubes or balls excluded as degenerate.
    pub excluded: usize,
}

/// Per-cube values of one functional, for CSV export.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeValues {
    pub values: Vec<Option<f64>>,
}

fn positive_weight(w: &ScalarField) -> Result<()> {
    let bad = w.values.iter().filter(|&&x| !(x > 0.0)).count();
    if bad > 0 {
        return Err(Error::VanishingWeight(format!(
            "{bad} of {} nodes are not positive",
            w.len()
        )));
    }
    Ok(())
}

/// Cube averages of `g(w)` for every cube.
fn averages(w: &ScalarField, cubes: &CubeSet, g: impl Fn(f64) -> f64) -> Vec<f64> {
    let d = w.grid.dim();
    cubes
        .cubes
        .iter()
        .map(|c| {
            let mut s = 0.0;
            c.for_each_node(&w.grid, |i| s += g(w.values[i]));
            s / c.node_count(d) as f64
        })
        .collect()
}

fn argmax(values: &[f64]) -> (f64, Option<usize>) {
    let mut best = f64::NEG_INFINITY;
    let mut at = None;
    for (k, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            at = Some(k);
        }
    }
    (best, at)
}

fn report(
    id: &str,
    cubes: &CubeSet,
    name: ConstantName,
    values: &[f64],
    parameters: WeightParameters,
    excluded: usize,
) -> WeightReport {
    let (value, at) = argmax(values);
    WeightReport {
        weight_id: id.to_string(),
        cube_set: Some(CubeSetSummary::of(cubes)),
        constant_name: name,
        value,
        argmax_cube: at,
        parameters,
        excluded,
    }
}

/// `sup_Q (avg_Q w)(avg_Q w^(-1/(p-1)))^(p-1)`.
pub fn ap_constant(w: &ScalarField, p: f64, cubes: &CubeSet) -> Result<WeightReport> {
    Ok(report(
        "w",
        cubes,
        ConstantName::Ap,
        &ap_values(w, p, cubes)?,
        WeightParameters {
            p: Some(p),
            ..Default::default()
        },
        0,
    ))
}

pub fn ap_values(w: &ScalarField, p: f64, cubes: &CubeSet) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(param("p", format!("need p > 1, got {p}")));
    }
    positive_weight(w)?;
    let e = -1.0 / (p - 1.0);
    let m1 = averages(w, cubes, |x| x);
    let m2 = averages(w, cubes, |x| x.powf(e));
    Ok(m1
        .iter()
        .zip(&m2)
        .map(|(a, b)| a * b.powf(p - 1.0))
        .collect())
}

/// `sup_Q sup_{v in Q} (avg_Q w) / w(v)`.
pub fn a1_constant(w: &ScalarField, cubes: &CubeSet) -> Result<WeightReport> {
    positive_weight(w)?;
    let d = w.grid.dim();
    let values: Vec<f64> = cubes
        .cubes
        .iter()
        .map(|c| {
            let (mut s, mut lo) = (0.0, f64::INFINITY);
            c.for_each_node(&w.grid, |i| {
                s += w.values[i];
                lo = lo.min(w.values[i]);
            });
            s / c.node_count(d) as f64 / lo
        })
        .collect();
    Ok(report(
        "w",
        cubes,
        ConstantName::A1,
        &values,
        WeightParameters::default(),
        0,
    ))
}

/// `sup_Q (avg_Q w^m)^(1/m) / avg_Q w`, skipping cubes where `w` is
/// numerically zero.
pub fn reverse_holder(w: &ScalarField, m: f64, cubes: &CubeSet) -> Result<WeightReport> {
    if !(m > 0.0) {
        return Err(param("m", format!("need m > 0, got {m}")));
    }
    if w.values.iter().any(|&x| x < 0.0) {
        return Err(Error::VanishingWeight("negative weight".into()));
    }
    let total: f64 = w.values.iter().sum::<f64>() / w.len() as f64;
    let m1 = averages(w, cubes, |x| x);
    let mm = averages(w, cubes, |x| x.powf(m));
    let mut excluded = 0;
    let values: Vec<f64> = m1
        .iter()
        .zip(&mm)
        .map(|(&a, &b)| {
            if a <= DEGENERATE_FRACTION * total {
                excluded += 1;
                f64::NEG_INFINITY
            } else if m == 1.0 {
                1.0
            } else {
                b.powf(1.0 / m) / a
            }
        })
        .collect();
    Ok(report(
        "w",
        cubes,
        ConstantName::RH,
        &values,
        WeightParameters {
            m: Some(m),
            ..Default::default()
        },
        excluded,
    ))
}

/// `sup over (v0, r) of int_{B_2r(v0)} f / int_{B_r(v0)} f`.
pub fn doubling_constant(f: &ScalarField, centers: &[Vec<f64>], radii: &[f64]) -> Result<WeightReport> {
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(param("radii", "must lie in (0, 1)"));
    }
    let mass: f64 = f.values.iter().sum();
    let mut best = f64::NEG_INFINITY;
    let mut excluded = 0;
    for c in centers {
        for &r in radii {
            let mut inner = 0.0;
            let mut outer = 0.0;
            for_each_in_ball(&f.grid, c, r, |i| inner += f.values[i]);
            for_each_in_ball(&f.grid, c, 2.0 * r, |i| outer += f.values[i]);
            if inner < DEGENERATE_FRACTION * mass {
                excluded += 1;
                continue;
            }
            best = best.max(outer / inner);
        }
    }
    Ok(WeightReport {
        weight_id: "f".into(),
        cube_set: None,
        constant_name: ConstantName::CD,
        value: best,
        argmax_cube: None,
        parameters: WeightParameters::default(),
        excluded,
    })
}

/// `|Q|^(1/d) (avg_Q h^s)^(1/(2s)) (avg_Q w^(-s))^(1/(2s))`.
pub fn morrey_ratio(h: &ScalarField, w: &ScalarField, cube: &Cube, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(param("s", format!("need s >= 1, got {s}")));
    }
    sigma_q2s(cube, h, w, 2.0, s)
}

/// Morrey ratio for every cube of a family.
pub fn morrey_values(h: &ScalarField, w: &ScalarField, cubes: &CubeSet, s: f64) -> Result<Vec<f64>> {
    cubes
        .cubes
        .iter()
        .map(|c| morrey_ratio(h, w, c, s))
        .collect()
}

/// `sigma_{q,2,s}(Q) = |Q|^(1/d - 1/2 + 1/q) (avg w1^s)^(1/(qs)) (avg w2^(-s))^(1/(2s))`.
pub fn sigma_q2s(cube: &Cube, w1: &ScalarField, w2: &ScalarField, q: f64, s: f64) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(param("q", format!("need q >= 2, got {q}")));
    }
    if !(s >= 1.0) {
        return Err(param("s", format!("need s >= 1, got {s}")));
    }
    let grid = &w1.grid;
    let d = grid.dim() as f64;
    let n = cube.node_count(grid.dim()) as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut vanishing = false;
    cube.for_each_node(grid, |i| {
        s1 += w1.values[i].max(0.0).powf(s);
        let x = w2.values[i];
        if x > 0.0 {
            s2 += x.powf(-s);
        } else {
            vanishing = true;
        }
    });
    if vanishing {
        return Err(Error::VanishingWeight(format!("cube at {:?}", cube.lo)));
    }
    let vol = cube.volume(grid);
    Ok(vol.powf(1.0 / d - 0.5 + 1.0 / q) * (s1 / n).powf(1.0 / (q * s)) * (s2 / n).powf(1.0 / (2.0 * s)))
}

/// Result of the enlarged-cube supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurlyC {
    /// `C(d,s,q)` times the supremum of sigma.
    pub value: f64,
    pub sup_sigma: f64,
    pub constant: f64,
    /// True if `8Q` had to be clipped to the grid.
    pub clipped: bool,
}

/// `C(d,s,q) sup { sigma(Q') : Q' in subcubes, Q' inside 8Q clipped to the
/// grid }`.
pub fn curly_c(
    cube: &Cube,
    w1: &ScalarField,
    w2: &ScalarField,
    q: f64,
    s: f64,
    subcubes: &CubeSet,
    constant: f64,
) -> Result<CurlyC> {
    let (bounds, clipped) = cube.enlarged(&w1.grid, 8);
    let mut sup = 0.0f64;
    for c in &subcubes.cubes {
        let inside = c
            .lo
            .iter()
            .zip(&bounds)
            .all(|(&lo, &(a, b))| lo >= a && lo + c.cells <= b);
        if inside {
            sup = sup.max(sigma_q2s(c, w1, w2, q, s)?);
        }
    }
    Ok(CurlyC {
        value: constant * sup,
        sup_sigma: sup,
        constant,
        clipped,
    })
}

/// Piecewise-constant field equal to `|Q|^(-1) (int_Q w1)^(2/q)` on each
/// tile `Q` of side `ell`.
pub fn e_ell(w1: &ScalarField, ell: f64, q: f64) -> Result<ScalarField> {
    if !(q >= 2.0) {
        return Err(param("q", format!("need q >= 2, got {q}")));
    }
    let grid = w1.grid;
    let tiles = crate::grid::make_dyadic_cubes(&grid, ell, 0)
        .or_else(|_| single_cell_tiles(&grid, ell))?;
    let covered: usize = tiles.cubes.iter().map(|c| c.node_count(grid.dim())).sum();
    if covered != grid.len() {
        return Err(param("ell", "tiles do not cover the grid"));
    }
    let mut out = ScalarField::zeros(&grid);
    let cell = grid.cell_volume();
    for c in &tiles.cubes {
        let mut s = 0.0;
        c.for_each_node(&grid, |i| s += w1.values[i]);
        let value = (cell * s).powf(2.0 / q) / c.volume(&grid);
        c.for_each_node(&grid, |i| out.values[i] = value);
    }
    Ok(out)
}

/// Tiling by cubes of `ell / spacing` cells, allowing a single cell per side.
fn single_cell_tiles(grid: &VelocityGrid, ell: f64) -> Result<CubeSet> {
    let ratio = ell / grid.spacing();
    let cells = ratio.round();
    if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) || cells < 1.0 {
        return Err(param("ell", format!("{ell} is not a multiple of the spacing")));
    }
    let cells = cells as usize;
    let n = grid.points_per_axis();
    if !n.is_multiple_of(cells) {
        return Err(param("ell", "tiles do not divide the grid"));
    }
    let d = grid.dim();
    let per = n / cells;
    let mut cubes = Vec::new();
    for t in 0..per.pow(d as u32) {
        let mut rest = t;
        let mut lo = vec![0; d];
        for k in (0..d).rev() {
            lo[k] = (rest % per) * cells;
            rest /= per;
        }
        cubes.push(Cube {
            lo,
            cells,
            level: 0,
            parent: None,
        });
    }
    let len = cubes.len();
    Ok(CubeSet {
        base_side: ell,
        levels: 0,
        cubes,
        level_start: vec![0, len],
    })
}

/// Writes `index,level,side,center...,value` rows.
pub fn cube_values_csv(grid: &VelocityGrid, cubes: &CubeSet, values: &[f64]) -> String {
    let d = grid.dim();
    let mut out = String::from("index,level,side");
    for k in 0..d {
        out.push_str(&format!(",c{k}"));
    }
    out.push_str(",value\n");
    for (k, (c, v)) in cubes.cubes.iter().zip(values).enumerate() {
        out.push_str(&format!("{k},{},{}", c.level, c.side(grid)));
        for x in c.center(grid) {
            out.push_str(&format!(",{x}"));
        }
        out.push_str(&format!(",{v:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_dyadic_cubes;

    fn grid() -> VelocityGrid {
        VelocityGrid::new(3, 4.0, 16).unwrap()
    }

    #[test]
    fn constant_weight_constants_are_one() {
        let g = grid();
        let w = ScalarField::constant(&g, 3.5);
        let cubes = make_dyadic_cubes(&g, 2.0, 1).unwrap();
        for p in [1.5, 2.0, 4.0] {
            assert!((ap_constant(&w, p, &cubes).unwrap().value - 1.0).abs() < 1e-14);
        }
        assert!((a1_constant(&w, &cubes).unwrap().value - 1.0).abs() < 1e-14);
        assert!((reverse_holder(&w, 2.0, &cubes).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reverse_holder_at_one_is_exactly_one() {
        let g = grid();
        let w = ScalarField::from_fn(&g, |v| 1.0 + v[0] * v[0]);
        let cubes = make_dyadic_cubes(&g, 2.0, 1).unwrap();
        assert_eq!(reverse_holder(&w, 1.0, &cubes).unwrap().value, 1.0);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let g = grid();
        let w = ScalarField::from_fn(&g, |v| v[0]);
        let cubes = make_dyadic_cubes(&g, 2.0, 0).unwrap();
        assert!(ap_constant(&w, 2.0, &cubes).is_err());
    }

    #[test]
    fn sigma_unit_cube() {
        let g = VelocityGrid::new(3, 2.0, 8).unwrap();
        let cubes = make_dyadic_cubes(&g, 1.0, 0).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let s = sigma_q2s(&cubes.cubes[0], &one, &one, 2.0, 2.0).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn e_ell_constant_weight() {
        let g = VelocityGrid::new(3, 2.0, 8).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let e = e_ell(&one, 1.0, 3.0).unwrap();
        let expect = 1f64.powf(3.0 * (2.0 / 3.0 - 1.0));
        assert!(e.values.iter().all(|&x| (x - expect).abs() < 1e-14));
        let e = e_ell(&one, 2.0, 4.0).unwrap();
        let expect = 2f64.powf(3.0 * (0.5 - 1.0));
        assert!(e.values.iter().all(|&x| (x - expect).abs() < 1e-14));
    }

    #[test]
    fn doubling_of_constant_is_volume_ratio() {
        let g = VelocityGrid::new(3, 4.0, 32).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let r = doubling_constant(&f, &[vec![0.0, 0.0, 0.0]], &[0.5, 0.75]).unwrap();
        assert!((r.value / 8.0 - 1.0).abs() < 0.1, "{}", r.value);
    }
}
