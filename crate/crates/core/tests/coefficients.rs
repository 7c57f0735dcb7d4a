use landau_lab::cli::verify::{direct_convolution, structural_identities, Suite};
use landau_lab::coefficients::{CoefficientPlan, Kernel, MatrixField, Normalization};
use landau_lab::grid::{self, ScalarField, VelocityGrid};
use landau_lab::numerics::sphere_area;
use landau_lab::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_max_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn sample(n: usize, half: f64, seed: u64) -> ScalarField {
    let grid = VelocityGrid::new(3, half, n).unwrap();
    grid::random_density(&grid, &mut ChaCha8Rng::seed_from_u64(seed), 3, 1.0)
}

#[test]
fn fft_matches_direct_sum_off_the_gated_exponents() {
    let f = sample(10, 3.0, 7);
    for gamma in [-0.5, -1.7, -2.7] {
        let plan = CoefficientPlan::new(&f.grid, gamma).unwrap();
        let norm = *plan.normalization();
        let b = plan.bundle(&f).unwrap();
        let h = direct_convolution(&f, Kernel::Reaction, &norm);
        assert!(rel_max_diff(&b.h.values, &h) < 1e-10, "h at gamma {gamma}");
        let a = direct_convolution(&f, Kernel::Trace, &norm);
        assert!(rel_max_diff(&b.a.values, &a) < 1e-10, "a at gamma {gamma}");
        let a01 = direct_convolution(&f, Kernel::Matrix(0, 1), &norm);
        let fast = &b.matrix.comps[MatrixField::index(3, 0, 1)];
        assert!(rel_max_diff(fast, &a01) < 1e-10, "A01 at gamma {gamma}");
    }
}

#[test]
fn hard_sphere_trace_equals_moment_expansion() {
    // At gamma = 0 the trace kernel is |z|^2 / omega, so a is a quadratic
    // polynomial in the discrete moments plus the origin-cell correction.
    let f = sample(12, 4.0, 3);
    let grid = f.grid;
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let omega = sphere_area(3);
    let mut mass = 0.0;
    let mut mom = [0.0; 3];
    let mut energy = 0.0;
    for (i, &fi) in f.values.iter().enumerate() {
        let v = grid.node_vec(i);
        mass += fi * vol;
        for k in 0..3 {
            mom[k] += fi * v[k] * vol;
        }
        energy += fi * v.iter().map(|x| x * x).sum::<f64>() * vol;
    }
    let expected: Vec<f64> = (0..grid.len())
        .map(|i| {
            let v = grid.node_vec(i);
            let v2: f64 = v.iter().map(|x| x * x).sum();
            let vm: f64 = (0..3).map(|k| v[k] * mom[k]).sum();
            (mass * v2 - 2.0 * vm + energy + f.values[i] * vol * h * h / 4.0) / omega
        })
        .collect();
    let a = landau_lab::coefficients::a_field(&f, 0.0).unwrap();
    assert!(rel_max_diff(&a.values, &expected) < 1e-11);
}

#[test]
fn coulomb_reaction_is_the_density() {
    let grid = VelocityGrid::new(3, 4.0, 16).unwrap();
    let f = grid::maxwellian(&grid);
    let h = landau_lab::coefficients::h_field(&f, -3.0).unwrap();
    assert_eq!(h.values, f.values);
}

#[test]
fn trace_of_matrix_equals_trace_coefficient() {
    let f = sample(16, 4.0, 11);
    for gamma in [0.0, -1.0, -2.0, -3.0] {
        let b = CoefficientPlan::new(&f.grid, gamma).unwrap().bundle(&f).unwrap();
        let scale = b.a.max_abs();
        for i in 0..f.len() {
            assert!((b.matrix.trace(i) - b.a.values[i]).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn matrix_is_positive_semidefinite() {
    let f = sample(16, 4.0, 5);
    for gamma in [0.0, -1.0, -2.5] {
        let b = CoefficientPlan::new(&f.grid, gamma).unwrap().bundle(&f).unwrap();
        let lmin = b.matrix.min_eigenvalue().unwrap();
        assert!(lmin.min() >= -1e-12 * b.a.max_abs(), "gamma {gamma}");
    }
}

#[test]
fn kernel_constants_have_matching_fourier_symbols() {
    for gamma in [-0.5, -1.0, -2.5, -3.0] {
        let r = Normalization::new(3, gamma).unwrap().symbol_residual().unwrap();
        assert!(r < 1e-12, "gamma {gamma}: {r}");
    }
}

#[test]
fn exponents_outside_the_range_are_rejected() {
    for gamma in [0.5, -3.5, f64::NAN] {
        assert!(matches!(Normalization::new(3, gamma), Err(Error::GammaOutOfRange(_))));
    }
    assert!(Normalization::new(1, 0.0).is_err());
}

#[test]
fn tampered_drift_constant_fails_the_structural_gate() {
    let honest = structural_identities(Suite::Quick, 0, &|d, g| Normalization::new(d, g)).unwrap();
    let tampered = structural_identities(Suite::Quick, 0, &|d, g| {
        let mut n = Normalization::new(d, g)?;
        n.drift *= 1.25;
        Ok(n)
    })
    .unwrap();
    assert!(!tampered.passed);
    let key = "symbol_residual[gamma=-1]";
    let good = honest.report.get(key).unwrap();
    let bad = tampered.report.get(key).unwrap();
    assert!(good < 1e-12 && bad > 0.1, "{good} vs {bad}");
    let lap = |o: &landau_lab::cli::verify::Outcome| o.report.get("laplacian_residual[gamma=-1]").unwrap();
    assert!(lap(&tampered) > 5.0 * lap(&honest));
}
