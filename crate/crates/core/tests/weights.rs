use landau_lab::grid::{self, make_dyadic_cubes, CubeSet, ScalarField, VelocityGrid};
use landau_lab::weights::{a1_constant, ap_constant, doubling_constant, reverse_holder};
use proptest::prelude::*;

const N: usize = 16;

fn setting() -> (VelocityGrid, CubeSet) {
    let grid = VelocityGrid::new(3, 4.0, N).unwrap();
    let cubes = make_dyadic_cubes(&grid, 4.0, 2).unwrap();
    (grid, cubes)
}

fn weight(logs: Vec<f64>) -> ScalarField {
    let (grid, _) = setting();
    ScalarField::from_values(&grid, logs.into_iter().map(f64::exp).collect()).unwrap()
}

fn logs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, N * N * N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ap_is_at_least_one(l in logs(), p in 1.1..4.0f64) {
        let (_, cubes) = setting();
        prop_assert!(ap_constant(&weight(l), p, &cubes).unwrap().value >= 1.0 - 1e-12);
    }

    #[test]
    fn ap_is_scale_invariant(l in logs(), p in 1.1..4.0f64, c in 1e-3..1e3f64) {
        let (_, cubes) = setting();
        let w = weight(l);
        let a = ap_constant(&w, p, &cubes).unwrap().value;
        let b = ap_constant(&w.scaled(c), p, &cubes).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn ap_does_not_increase_with_p(l in logs(), p in 1.1..3.0f64, dp in 0.1..2.0f64) {
        let (_, cubes) = setting();
        let w = weight(l);
        let lo = ap_constant(&w, p, &cubes).unwrap().value;
        let hi = ap_constant(&w, p + dp, &cubes).unwrap().value;
        prop_assert!(hi <= lo * (1.0 + 1e-12));
    }

    #[test]
    fn a1_dominates_every_ap(l in logs(), p in 1.1..4.0f64) {
        let (_, cubes) = setting();
        let w = weight(l);
        let a1 = a1_constant(&w, &cubes).unwrap().value;
        prop_assert!(ap_constant(&w, p, &cubes).unwrap().value <= a1 * (1.0 + 1e-12));
    }

    #[test]
    fn reverse_holder_at_one_is_one(l in logs()) {
        let (_, cubes) = setting();
        prop_assert_eq!(reverse_holder(&weight(l), 1.0, &cubes).unwrap().value, 1.0);
    }

    #[test]
    fn reverse_holder_grows_with_m(l in logs(), m in 1.0..3.0f64, dm in 0.1..1.0f64) {
        let (_, cubes) = setting();
        let w = weight(l);
        let lo = reverse_holder(&w, m, &cubes).unwrap().value;
        let hi = reverse_holder(&w, m + dm, &cubes).unwrap().value;
        prop_assert!(lo >= 1.0 - 1e-12 && hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn doubling_is_at_least_one(l in logs()) {
        let w = weight(l);
        let centers = vec![vec![0.0; 3], vec![1.0, -0.5, 0.5]];
        let r = doubling_constant(&w, &centers, &[0.5, 0.9]).unwrap();
        prop_assert!(r.value >= 1.0);
    }
}

#[test]
fn constant_weight_has_unit_constants() {
    let (grid, cubes) = setting();
    let w = ScalarField::constant(&grid, 3.5);
    for p in [1.5, 2.0, 3.0] {
        assert!((ap_constant(&w, p, &cubes).unwrap().value - 1.0).abs() < 1e-13);
    }
    assert!((a1_constant(&w, &cubes).unwrap().value - 1.0).abs() < 1e-13);
    assert!((reverse_holder(&w, 2.0, &cubes).unwrap().value - 1.0).abs() < 1e-13);
}

#[test]
fn vanishing_weight_is_rejected() {
    let (grid, cubes) = setting();
    let mut w = grid::maxwellian(&grid);
    w.values[0] = 0.0;
    assert!(ap_constant(&w, 2.0, &cubes).is_err());
    assert!(ap_constant(&grid::maxwellian(&grid), 1.0, &cubes).is_err());
}

#[test]
fn power_weight_ap_matches_quadrature() {
    // |v|^(-1) is A_2 in three dimensions; on a cube centred at the origin
    // the A_2 product is avg(|v|^-1) avg(|v|), which the cube averages
    // approach from the lattice side.
    let grid = VelocityGrid::new(3, 4.0, 32).unwrap();
    let cubes = make_dyadic_cubes(&grid, 8.0, 0).unwrap();
    let w = ScalarField::from_fn(&grid, |v| 1.0 / v.iter().map(|x| x * x).sum::<f64>().sqrt());
    let got = ap_constant(&w, 2.0, &cubes).unwrap().value;
    let exact = landau_lab::numerics::cube_power_average(3, -1.0) * landau_lab::numerics::cube_power_average(3, 1.0);
    assert!((got - exact).abs() < 0.02 * exact, "{got} vs {exact}");
}
