use landau_lab::grid::{self, VelocityGrid};
use landau_lab::rates::{fit_curve, FitOptions, LinfCurve, TheoremId};
use landau_lab::solver::{self, collision_operator, conserved_moments, entropy, DtPolicy, Form, Solver, SolverConfig};
use proptest::prelude::*;

fn short_run(gamma: f64) -> solver::Trajectory {
    let grid = VelocityGrid::new(3, 5.0, 20).unwrap();
    let f0 = grid::squeezed_gaussian(&grid, 0.7).unwrap();
    let config = SolverConfig { dt: DtPolicy::Fixed { dt: 0.05 }, ..Default::default() };
    let mut s = Solver::new(&grid, gamma, config).unwrap();
    solver::run(&mut s, f0, 0.5, 2, |_, _, _| Ok(())).unwrap()
}

#[test]
fn mass_is_conserved_and_entropy_decreases() {
    for gamma in [0.0, -1.0, -3.0] {
        let traj = short_run(gamma);
        let m0 = conserved_moments(&traj.fields[0]).mass;
        // Each implicit solve stops at a 1e-10 relative residual.
        for f in &traj.fields {
            let drift = (conserved_moments(f).mass / m0 - 1.0).abs();
            assert!(drift < 1e-9, "gamma {gamma}: {drift:e}");
            assert!(f.min() >= 0.0);
        }
        for w in traj.ledger.windows(2) {
            assert!(w[1].entropy <= w[0].entropy + 1e-12, "gamma {gamma} step {}", w[1].step);
        }
        assert!(traj.ledger.iter().all(|r| r.entropy_production >= -1e-6));
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let a = short_run(-1.0);
    let b = short_run(-1.0);
    assert_eq!(a.times, b.times);
    for (x, y) in a.fields.iter().zip(&b.fields) {
        assert_eq!(x.values, y.values);
    }
}

#[test]
fn maxwellian_entropy_matches_closed_form() {
    // int M log M = -(d/2)(1 + log 2 pi) for the standard Maxwellian.
    let grid = VelocityGrid::new(3, 8.0, 48).unwrap();
    let exact = -1.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    assert!((entropy(&grid::maxwellian(&grid)) - exact).abs() < 1e-6);
}

#[test]
fn maxwellian_is_nearly_stationary() {
    let grid = VelocityGrid::new(3, 6.0, 32).unwrap();
    let m = grid::maxwellian(&grid);
    let s = grid::squeezed_gaussian(&grid, 0.6).unwrap();
    for gamma in [0.0, -1.0] {
        let qm = collision_operator(&m, gamma, Form::Divergence).unwrap().max_abs();
        let qs = collision_operator(&s, gamma, Form::Divergence).unwrap().max_abs();
        assert!(qm < 1e-2 * qs, "gamma {gamma}: {qm} vs {qs}");
    }
}

#[test]
fn zero_final_time_keeps_only_the_initial_snapshot() {
    let grid = VelocityGrid::new(3, 4.0, 12).unwrap();
    let f0 = grid::maxwellian(&grid);
    let mut s = Solver::new(&grid, -1.0, SolverConfig::default()).unwrap();
    let traj = solver::run(&mut s, f0.clone(), 0.0, 1, |_, _, _| Ok(())).unwrap();
    assert_eq!(traj.times, vec![0.0]);
    assert_eq!(traj.fields[0].values, f0.values);
}

fn synthetic(alpha: f64, c: f64) -> LinfCurve {
    let mut curve = LinfCurve::new(2.0);
    for k in 0..30 {
        let t = 0.02 * 1.25f64.powi(k);
        curve.times.push(t);
        curve.norms.push(c * (1.0 + 1.0 / t).powf(alpha));
    }
    curve
}

proptest! {
    #[test]
    fn rate_fit_recovers_exact_power_laws(alpha in 0.2..3.0f64, c in 0.1..10.0f64) {
        let opts = FitOptions { dt: 0.001, floor: Some(0.0), coulomb_s: 0.5 };
        let fit = fit_curve(&synthetic(alpha, c), TheoremId::Main1, 3, -1.0, 0.0, &opts).unwrap();
        prop_assert!((fit.alpha - alpha).abs() < 1e-9);
        prop_assert!((fit.log_c - c.ln()).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-9);
    }
}

#[test]
fn rate_fit_rejects_short_windows() {
    let mut curve = synthetic(1.0, 1.0);
    curve.times.truncate(4);
    curve.norms.truncate(4);
    let opts = FitOptions { dt: 0.001, floor: Some(0.0), coulomb_s: 0.5 };
    assert!(matches!(
        fit_curve(&curve, TheoremId::Main1, 3, -1.0, 0.0, &opts),
        Err(landau_lab::Error::DegenerateWindow(_))
    ));
}
