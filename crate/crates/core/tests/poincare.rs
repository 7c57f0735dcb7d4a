use landau_lab::coefficients::CoefficientPlan;
use landau_lab::grid::{self, ScalarField, VelocityGrid};
use landau_lab::poincare::{gks_check, predicted_slope, LanczosOptions, PoincareOperator};
use landau_lab::rates::{moser_q, TheoremId};
use nalgebra::{DMatrix, SymmetricEigen};

fn dense_top(a: Vec<f64>, n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, &a);
    SymmetricEigen::new(m).eigenvalues.max()
}

fn operator(gamma: f64, weighted: bool) -> PoincareOperator {
    let grid = VelocityGrid::new(3, 3.0, 10).unwrap();
    let f = grid::squeezed_gaussian(&grid, 0.7).unwrap();
    let bundle = CoefficientPlan::new(&grid, gamma).unwrap().bundle(&f).unwrap();
    if weighted {
        let w = ScalarField::from_fn(&grid, |v| (1.0 + v.iter().map(|x| x * x).sum::<f64>()).powf(0.5 * gamma));
        PoincareOperator::with_mass_weight(&bundle, &w).unwrap()
    } else {
        PoincareOperator::new(&bundle)
    }
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    let opts = LanczosOptions { tol: 1e-10, ..Default::default() };
    for (gamma, weighted) in [(-1.0, false), (0.0, false), (-1.0, true)] {
        let op = operator(gamma, weighted);
        for eps in [0.05, 0.5] {
            let a = op.dense(eps);
            let n = op.len();
            let asym = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .fold(0.0f64, |m, (i, j)| m.max((a[i * n + j] - a[j * n + i]).abs()));
            assert!(asym < 1e-12, "operator not symmetric: {asym}");
            let exact = dense_top(a, n);
            let got = op.top(eps, None, &opts).unwrap().value;
            assert!((got - exact).abs() <= 1e-8 * exact.abs().max(1e-3), "gamma {gamma} eps {eps}: {got} vs {exact}");
        }
    }
}

#[test]
fn lambda_decreases_with_epsilon() {
    let op = operator(-1.0, false);
    let opts = LanczosOptions::default();
    let values: Vec<f64> = [0.02, 0.1, 0.5].iter().map(|&e| op.top(e, None, &opts).unwrap().value).collect();
    assert!(values[0] >= values[1] && values[1] >= values[2], "{values:?}");
}

#[test]
fn small_epsilon_slope_matches_published_exponent() {
    assert_eq!(predicted_slope(-1.0), Some(-1.0));
    assert_eq!(predicted_slope(0.0), Some(0.0));
    assert!((predicted_slope(-0.5).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(predicted_slope(-2.0), None);
}

#[test]
fn regularization_exponents_match_published_values() {
    // (1 + 1/t)^(d/2) with radius power -gamma d / 2 below gamma = -2 and
    // in the unconditional range; (1 + 1/t)^(1+s) R^s for Coulomb.
    assert_eq!(TheoremId::Main1.predicted(3, -1.0, 0.0), (1.5, 1.5));
    assert_eq!(TheoremId::VerySoft.predicted(3, -2.5, 0.0), (1.5, 3.75));
    assert_eq!(TheoremId::Coulomb.predicted(3, -3.0, 0.25), (1.25, 0.25));
    assert!((moser_q(3) - 10.0 / 3.0).abs() < 1e-15);
}

#[test]
fn gks_ratio_is_invariant_under_mass_scaling() {
    // Both sides are homogeneous of degree p + 1 in f.
    let grid = VelocityGrid::new(3, 4.0, 16).unwrap();
    let f = grid::squeezed_gaussian(&grid, 0.8).unwrap();
    for p in [1.0, 2.0, 3.0] {
        let base = gks_check(&f, p).unwrap().ratio.unwrap();
        let scaled = gks_check(&f.scaled(7.0), p).unwrap().ratio.unwrap();
        assert!(base > 0.0 && (base - scaled).abs() < 1e-10 * base, "p {p}: {base} vs {scaled}");
    }
    assert_eq!(gks_check(&ScalarField::zeros(&grid), 2.0).unwrap().ratio, None);
}

#[test]
fn lambda_scales_linearly_with_the_density() {
    let grid = VelocityGrid::new(3, 3.0, 10).unwrap();
    let f = grid::squeezed_gaussian(&grid, 0.7).unwrap();
    let opts = LanczosOptions { tol: 1e-12, ..Default::default() };
    for c in [0.1, 3.0, 250.0] {
        let g = f.scaled(c);
        for eps in [0.01, 0.3] {
            let a = landau_lab::poincare::lambda_f(&f, -1.0, eps).unwrap();
            let bundle = CoefficientPlan::new(&grid, -1.0).unwrap().bundle(&g).unwrap();
            let b = PoincareOperator::new(&bundle).top(eps, None, &opts).unwrap().value;
            assert!((b - c * a).abs() <= 1e-6 * (c * a).abs(), "c {c} eps {eps}: {b} vs {}", c * a);
        }
    }
}

#[test]
fn lambda_is_stable_under_refinement() {
    let coarse = grid::maxwellian(&VelocityGrid::new(3, 5.0, 20).unwrap());
    let fine = grid::maxwellian(&VelocityGrid::new(3, 5.0, 40).unwrap());
    for eps in [0.01, 0.1, 1.0] {
        let a = landau_lab::poincare::lambda_f(&coarse, -1.0, eps).unwrap();
        let b = landau_lab::poincare::lambda_f(&fine, -1.0, eps).unwrap();
        assert!((a - b).abs() < 0.05 * b, "eps {eps}: {a} vs {b}");
    }
}

#[test]
fn zero_padding_keeps_values_and_spacing() {
    let grid = VelocityGrid::new(3, 3.0, 12).unwrap();
    let f = grid::squeezed_gaussian(&grid, 0.7).unwrap();
    let big = grid::zero_pad(&f, 16).unwrap();
    assert!((big.grid.spacing() - grid.spacing()).abs() < 1e-15);
    assert!((big.grid.half_extent() - 4.0).abs() < 1e-12);
    let sum = |g: &ScalarField| g.values.iter().sum::<f64>();
    assert_eq!(sum(&big), sum(&f));
    let centre = big.grid.nearest_node(&[0.25, 0.25, 0.25]);
    assert_eq!(big.values[centre], f.values[grid.nearest_node(&[0.25, 0.25, 0.25])]);
    assert!(grid::zero_pad(&f, 13).is_err());
}

#[test]
fn maxwellian_lambda_is_insensitive_to_truncation() {
    let f = grid::maxwellian(&VelocityGrid::new(3, 6.0, 24).unwrap());
    let t = landau_lab::poincare::truncation_check(&f, -1.0, 0.01, &LanczosOptions::default()).unwrap();
    assert!((t.enlarged_half_extent - 7.5).abs() < 1e-12);
    assert!(t.relative_change < 0.01, "{t:?}");
}
