use std::f64::consts::TAU;
use std::sync::Arc;

use gla_core::analytic::{principal_eigenfunction, product_eigenfunction, AdjointBasis, EigenfunctionFamily, Expansion};
use gla_core::dynsys::{flow_sample, DiscreteLinearSystem, LimitCycleFlow, State};
use gla_core::gla::{
    continuous_laplace_average, forward_samples, gla_project, gla_sweep, inverse_gla, inverse_samples,
    laplace_average, peel_residual, project_peeled, project_samples, Observable, Order, Target,
};
use gla_core::spectra::{decompose_circles, fixed_point_lattice, LatticeIndex, DEFAULT_GROUPING_TOLERANCE};
use gla_core::{Complex64, Error, Wide};
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(eigs: &[f64]) -> DiscreteLinearSystem {
    DiscreteLinearSystem::diagonal(&eigs.iter().map(|&l| c(l)).collect::<Vec<_>>()).unwrap()
}

fn phi(system: &DiscreteLinearSystem, j: usize) -> Observable {
    let basis = AdjointBasis::new(system.eigenvectors()).unwrap();
    principal_eigenfunction(&basis, j).unwrap()
}

fn sum(parts: &[&Observable]) -> Observable {
    Observable::linear_combination(&parts.iter().map(|f| (c(1.0), (*f).clone())).collect::<Vec<_>>())
}

fn geometric(mu: Complex64, scale: Complex64, n: usize) -> Vec<Wide> {
    let mu = Wide::from(mu);
    (0..n).map(|k| mu.powu(k as u64) * scale).collect()
}

fn multi(k: &[u32]) -> Target {
    Target::Index(LatticeIndex::Multi(k.to_vec()))
}

/// `(1/n) sum_{k<n} q^k` by the closed form.
fn cesaro(q: f64, n: usize) -> f64 {
    (1.0 - q.powi(n as i32)) / (n as f64 * (1.0 - q))
}

#[test]
fn exact_eigen_data_gives_coefficient() {
    let coeff = Complex64::new(-0.7, 1.3);
    let lambda = Complex64::from_polar(0.93, 0.4);
    for n in [1, 10, 1000, 100_000] {
        let v = laplace_average(&geometric(lambda, coeff, n), lambda).unwrap();
        assert!((v - coeff).norm() <= 1e-12 * coeff.norm(), "n = {n}: {v}");
    }
}

#[test]
fn lower_geometric_samples_match_closed_form() {
    let v = laplace_average(&geometric(c(0.5), c(1.0), 100), c(0.9)).unwrap();
    let oracle = cesaro(5.0 / 9.0, 100);
    assert!((v.re - oracle).abs() < 1e-15);
    assert!((v.re - 0.0225).abs() < 1e-4);
}

#[test]
fn unit_circle_average_is_small() {
    let lambda = Complex64::from_polar(1.0, 1.0);
    let n = 628;
    let v = laplace_average(&vec![Wide::ONE; n], lambda).unwrap();
    let bound = 2.0 / (n as f64 * (c(1.0) - lambda.inv()).norm());
    assert!(v.norm() <= bound);
}

#[test]
fn overflowing_weight_reports_step() {
    let err = laplace_average(&vec![Wide::ONE; 5000], c(0.1)).unwrap_err();
    assert!(matches!(err, Error::WeightOverflow { step } if (295..=301).contains(&step)), "{err:?}");
}

#[test]
fn peripheral_target_carries_cesaro_cross_term() {
    let sys = diag(&[0.9, 0.5]);
    let f = sum(&[&phi(&sys, 0), &phi(&sys, 1)]);
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    for n in [10, 100, 1000, 10_000] {
        let r = gla_project(&sys, &f, &x0, &multi(&[1, 0]), &dec, n).unwrap();
        let err = r.value - c(1.0);
        assert!(err.norm() <= 2.25 / n as f64 + 1e-12);
        assert!((err.re - cesaro(5.0 / 9.0, n)).abs() <= 1e-12, "n = {n}");
        // the constant circle carries no component and is left alone
        assert!(r.peel_trace.iter().all(|p| !p.subtracted));
        assert!(err.norm() <= r.cesaro_bound.unwrap());
    }
}

#[test]
fn exact_peel_cancels_algebraically() {
    let sys = diag(&[0.9, 0.5]);
    let f = sum(&[&phi(&sys, 0), &phi(&sys, 1)]);
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let s = forward_samples(&sys, &f, &x0, 10).unwrap();
    let v = project_peeled(&s, c(0.5), &[(c(0.9), c(1.0))]).unwrap();
    assert!((v - c(1.0)).norm() <= 1e-12);
    for n in [10, 100, 1000] {
        let s = forward_samples(&sys, &f, &x0, n).unwrap();
        let resid = peel_residual(&s, &[(c(0.9), c(1.0))]);
        let eigen = geometric(c(0.5), c(1.0), n);
        let sup = resid.iter().zip(&eigen).map(|(a, b)| (*a - *b).abs()).fold(0.0, f64::max);
        assert!(sup <= 1e-10);
    }
}

#[test]
fn product_eigenfunction_projects_to_its_value() {
    let sys = diag(&[0.9, 0.5]);
    let basis = AdjointBasis::new(sys.eigenvectors()).unwrap();
    let f = product_eigenfunction(&basis, &[2, 0]).unwrap();
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 2).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let r = gla_project(&sys, &f, &x0, &multi(&[2, 0]), &dec, 100).unwrap();
    assert!((r.value - c(1.0)).norm() <= 1e-13);
    assert_eq!(r.peel_trace.len(), 2);
}

#[test]
fn target_outside_lattice_rejected() {
    let sys = diag(&[0.9, 0.5]);
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let err = gla_project(&sys, &phi(&sys, 0), &x0, &multi(&[2, 0]), &dec, 10).unwrap_err();
    assert_eq!(err, Error::TargetNotInLattice("[2,0]".into()));
}

#[test]
fn inverse_eigenfunction_terms_are_one() {
    let sys = diag(&[0.5]);
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let x0 = State::from_real(&[1.0]).unwrap();
    let r = inverse_gla(&sys, &phi(&sys, 0), &x0, &multi(&[1]), &dec, 200).unwrap();
    assert_eq!(r.value, c(1.0));
    assert!(r.peel_trace.is_empty());
}

#[test]
fn inverse_exact_peel_mirrors_forward() {
    let sys = diag(&[0.9, 0.5]);
    let f = sum(&[&phi(&sys, 0), &phi(&sys, 1)]);
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let s = inverse_samples(&sys, &f, &x0, 10, 150.0).unwrap();
    // the inverse map has eigenvalues 1/0.9 and 1/0.5
    let v = project_peeled(&s, c(1.0 / 0.9), &[(c(2.0), c(1.0))]).unwrap();
    assert!((v - c(1.0)).norm() <= 1e-12);
}

#[test]
fn inverse_absent_target_is_small() {
    let sys = diag(&[0.9, 0.5]);
    let x0 = State::from_real(&[1.0, 1.0]).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    for n in [100, 400] {
        let r = inverse_gla(&sys, &phi(&sys, 0), &x0, &multi(&[0, 1]), &dec, n).unwrap();
        assert!(r.value.norm() <= 1.0 / (n as f64 * (1.0 - 5.0 / 9.0)));
    }
}

#[test]
fn sweep_of_zero_is_zero() {
    let sys = diag(&[0.9, 0.5]);
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 2).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let x0 = State::from_real(&[0.3, -0.2]).unwrap();
    let sweep = gla_sweep(&sys, &Observable::zero(), &x0, &dec, 500).unwrap();
    assert_eq!(sweep.entries.len(), 6);
    assert!(sweep.entries.iter().all(|e| e.result.value == c(0.0)));
    assert_eq!(sweep.reconstruction_residual, 0.0);
}

#[test]
fn sweep_recovers_coefficients_within_bounds() {
    let sys = diag(&[0.9, 0.5]);
    let family = Arc::new(EigenfunctionFamily::linear(&sys).unwrap());
    let terms = vec![
        (LatticeIndex::Multi(vec![0, 0]), c(0.25)),
        (LatticeIndex::Multi(vec![1, 0]), c(2.0)),
    ];
    let expansion = Expansion::new(family, terms).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let x0 = State::from_real(&[0.5, 0.5]).unwrap();
    let n = 60;
    let sweep = gla_sweep(&sys, &expansion.observable(), &x0, &dec, n).unwrap();
    for e in &sweep.entries {
        let oracle = expansion.target_projection(&Target::Index(e.index.clone()), &x0).unwrap();
        let bound = e.result.cesaro_bound.unwrap();
        assert!((e.result.value - oracle).norm() <= bound, "{}: {} vs {oracle}", e.index, e.result.value);
    }
}

#[test]
fn sweep_flags_component_outside_truncation() {
    let sys = diag(&[0.9, 0.5]);
    let basis = AdjointBasis::new(sys.eigenvectors()).unwrap();
    let outside = product_eigenfunction(&basis, &[2, 0]).unwrap();
    let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let x0 = State::from_real(&[0.8, 0.0]).unwrap();
    let sweep = gla_sweep(&sys, &outside, &x0, &dec, 200).unwrap();
    assert!(sweep.reconstruction_residual >= 0.64);
}

fn cycle() -> LimitCycleFlow {
    LimitCycleFlow::new(-1.0, vec![0.3], vec![]).unwrap()
}

fn cycle_samples(f: &Observable, x0: f64, s0: f64, dt: f64, steps: usize) -> Vec<(f64, Wide)> {
    let grid: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let states = flow_sample(&cycle(), x0, s0, &grid).unwrap();
    grid.iter().zip(&states).map(|(&t, x)| (t, f.eval(x).unwrap())).collect()
}

#[test]
fn continuous_eigenfunction_integrand_collapses() {
    let flow = cycle();
    for (m, n, exponent) in [(1, 0, c(-1.0)), (1, 1, Complex64::new(-1.0, 1.0))] {
        let f = gla_core::analytic::limit_cycle_eigenfunction(&flow, m, n);
        let samples = cycle_samples(&f, 0.6, 1.1, 1e-2, 500);
        let v = continuous_laplace_average(&samples, exponent).unwrap();
        let want = f.eval(&LimitCycleFlow::state(0.6, 1.1).unwrap()).unwrap().to_complex();
        assert!((v - want).norm() <= 1e-10);
    }
}

#[test]
fn continuous_growth_below_target_is_diagnosed() {
    let f = gla_core::analytic::limit_cycle_eigenfunction(&cycle(), 0, 1);
    let samples = cycle_samples(&f, 0.6, 0.0, 1e-2, 3000);
    let err = continuous_laplace_average(&samples, Complex64::new(-1.0, 1.0)).unwrap_err();
    assert!(matches!(err, Error::TargetBelowGrowth { .. }));
    assert!(err.to_string().contains("target modulus below sample growth"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn cesaro_bound_law(mu_r in 0.05f64..0.95, ratio in 0.05f64..0.95, a in 0.0f64..6.3, b in 0.0f64..6.3) {
        let lambda = Complex64::from_polar(mu_r / ratio, b);
        let lambda = if lambda.norm() > 50.0 { lambda / lambda.norm() * 50.0 } else { lambda };
        let mu = Complex64::from_polar(mu_r, a);
        let q = (mu / lambda).norm();
        for n in [100usize, 10_000] {
            let v = laplace_average(&geometric(mu, c(1.0), n), lambda).unwrap();
            let bound = (1.0 + q.powi(n as i32)) / (n as f64 * (1.0 - q));
            prop_assert!(v.norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn linearity(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let sys = diag(&[0.9, 0.5]);
        let basis = AdjointBasis::new(sys.eigenvectors()).unwrap();
        let f = sum(&[&phi(&sys, 0), &product_eigenfunction(&basis, &[1, 1]).unwrap()]);
        let g = sum(&[&phi(&sys, 1), &Observable::constant(c(0.3))]);
        let h = Observable::linear_combination(&[(c(alpha), f.clone()), (c(beta), g.clone())]);
        let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 2).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
        let x0 = State::from_real(&[x, y]).unwrap();
        let s_f = forward_samples(&sys, &f, &x0, 300).unwrap();
        let s_g = forward_samples(&sys, &g, &x0, 300).unwrap();
        let s_h = forward_samples(&sys, &h, &x0, 300).unwrap();
        for lambda in [c(1.0), c(0.9), c(0.7)] {
            let vf = laplace_average(&s_f, lambda).unwrap();
            let vg = laplace_average(&s_g, lambda).unwrap();
            let vh = laplace_average(&s_h, lambda).unwrap();
            let want = vf * alpha + vg * beta;
            prop_assert!((vh - want).norm() <= 1e-10 * (1.0 + want.norm()));
        }
        let _ = &dec;
    }

    #[test]
    fn within_circle_order_is_irrelevant(x in -1.0f64..1.0, y in -1.0f64..1.0, a in 0.1f64..3.0) {
        let eigs = [Complex64::from_polar(0.8, a), Complex64::from_polar(0.8, -a)];
        let sys = DiscreteLinearSystem::diagonal(&eigs).unwrap();
        let f = sum(&[&phi(&sys, 0), &phi(&sys, 1)]);
        let x0 = State::from_real(&[x, y]).unwrap();
        let s = forward_samples(&sys, &f, &x0, 10).unwrap();
        let peel = [(eigs[0], c(x)), (eigs[1], c(y))];
        let reversed = [peel[1], peel[0]];
        for lambda in [c(0.5), c(0.3)] {
            let v1 = project_peeled(&s, lambda, &peel).unwrap();
            let v2 = project_peeled(&s, lambda, &reversed).unwrap();
            prop_assert!((v1 - v2).norm() <= 1e-12);
        }
    }

    #[test]
    fn non_eigenvalue_nulling(x in -0.9f64..0.9, y in -0.9f64..0.9, arg in 0.0f64..TAU) {
        let sys = diag(&[0.9, 0.5]);
        let f = phi(&sys, 1);
        let x0 = State::from_real(&[x, y]).unwrap();
        let dec = decompose_circles(&fixed_point_lattice(sys.eigenvalues(), 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
        for n in [100, 10_000] {
            let r = gla_project(&sys, &f, &x0, &Target::Probe(Complex64::from_polar(0.7, arg)), &dec, n).unwrap();
            let bound = y.abs() / (n as f64 * (1.0 - 0.5 / 0.7));
            prop_assert!(r.value.norm() <= bound * (1.0 + 1e-12));
            prop_assert!(r.value.norm() <= r.cesaro_bound.unwrap());
        }
    }

    #[test]
    fn forward_and_inverse_agree_within_bounds(x in 0.2f64..1.0, y in 0.2f64..1.0) {
        let sys = diag(&[0.9, 0.5]);
        let basis = AdjointBasis::new(sys.eigenvectors()).unwrap();
        let f = sum(&[&phi(&sys, 0), &phi(&sys, 1), &product_eigenfunction(&basis, &[1, 1]).unwrap()]);
        let lattice = fixed_point_lattice(sys.eigenvalues(), 2).unwrap();
        let dec = decompose_circles(&lattice, DEFAULT_GROUPING_TOLERANCE).unwrap();
        let x0 = State::from_real(&[x, y]).unwrap();
        let n = 40;
        for entry in lattice.entries() {
            let t = Target::Index(entry.index.clone());
            let fwd = gla_project(&sys, &f, &x0, &t, &dec, n).unwrap();
            let inv = inverse_gla(&sys, &f, &x0, &t, &dec, n).unwrap();
            let tol = fwd.cesaro_bound.unwrap() + inv.cesaro_bound.unwrap();
            prop_assert!((fwd.value - inv.value).norm() <= tol, "{}: {} vs {} (tol {tol})", entry.index, fwd.value, inv.value);
        }
    }
}

#[test]
fn mixed_sign_components_do_not_fake_a_constant() {
    // f_k = z 0.5^k - z^2/2 0.25^k: the full-range bound on the (zero) constant
    // is smaller than its averaging error, the second half is not fooled
    let z = 0.327;
    let samples: Vec<Wide> = (0..10)
        .map(|k| Wide::from(c(z * 0.5f64.powi(k) - 0.5 * z * z * 0.25f64.powi(k))))
        .collect();
    let dec = decompose_circles(&fixed_point_lattice(&[c(0.5)], 2).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    let r = project_samples(&samples, &multi(&[1]), &dec, Order::Forward).unwrap();
    let step = &r.peel_trace[0];
    assert!(step.estimate.norm() > step.bound && !step.subtracted);
    assert!((r.value - c(z)).norm() <= r.cesaro_bound.unwrap());
    // nothing was subtracted, so the value is the plain average
    let oracle = z - 0.5 * z * z * cesaro(0.5, 10);
    assert!((r.value.re - oracle).abs() < 1e-15);
}
