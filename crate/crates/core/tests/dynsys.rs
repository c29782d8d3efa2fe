use std::f64::consts::{PI, TAU};

use gla_core::dynsys::{
    flow_sample, inverse_trajectory, inverse_trajectory_guarded, trajectory, ConjugateNonlinearSystem,
    CubicConjugacy, DiscreteLinearSystem, DiscreteMap, LimitCycleFlow, State,
};
use gla_core::linalg::CMatrix;
use gla_core::{Complex64, Error};
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(eigs: &[f64]) -> DiscreteLinearSystem {
    DiscreteLinearSystem::diagonal(&eigs.iter().map(|&l| c(l)).collect::<Vec<_>>()).unwrap()
}

fn real(x: &State) -> Vec<f64> {
    x.to_complex().iter().map(|z| z.re).collect()
}

fn shear_system() -> DiscreteLinearSystem {
    let v = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
    DiscreteLinearSystem::new(vec![c(0.9), c(0.5)], v).unwrap()
}

fn cubic_system(a: f64, half_width: f64) -> ConjugateNonlinearSystem {
    ConjugateNonlinearSystem::new(
        diag(&[a]),
        CubicConjugacy::new(1.0).unwrap(),
        vec![(-half_width, half_width)],
    )
    .unwrap()
}

#[test]
fn non_normal_matrix_matches_hand_computation() {
    // V diag(0.9, 0.5) V^-1 = [[0.9, 0.5 - 0.9], [0, 0.5]]
    let a = shear_system().matrix();
    let want = CMatrix::from_real_rows(&[&[0.9, -0.4], &[0.0, 0.5]]).unwrap();
    assert!(a.max_abs_diff(&want) < 1e-15);
    let y = shear_system().step(&State::from_real(&[1.0, 1.0]).unwrap()).unwrap();
    let y = real(&y);
    assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
}

#[test]
fn geometric_trajectories() {
    let t = trajectory(&diag(&[0.5]), &State::from_real(&[1.0]).unwrap(), 3).unwrap();
    let xs: Vec<f64> = t.states.iter().map(|s| real(s)[0]).collect();
    assert_eq!(xs, [1.0, 0.5, 0.25, 0.125]);

    let t = trajectory(&diag(&[0.9, 0.5]), &State::from_real(&[1.0, 1.0]).unwrap(), 10).unwrap();
    assert_eq!(t.len(), 11);
    let last = real(&t.states[10]);
    assert!((last[0] - 0.9f64.powi(10)).abs() < 1e-15);
    assert_eq!(last[1], 0.5f64.powi(10));

    let one = trajectory(&shear_system(), &State::from_real(&[1.0, 1.0]).unwrap(), 1).unwrap();
    assert_eq!(one.states.len(), 2);
}

#[test]
fn inverse_trajectories() {
    let t = inverse_trajectory(&diag(&[0.5]), &State::from_real(&[1.0]).unwrap(), 3).unwrap();
    let xs: Vec<f64> = t.states.iter().map(|s| real(s)[0]).collect();
    assert_eq!(xs, [1.0, 2.0, 4.0, 8.0]);

    let t = inverse_trajectory(&diag(&[0.9, 0.5]), &State::from_real(&[1.0, 1.0]).unwrap(), 2).unwrap();
    let want = [[1.0, 1.0], [1.0 / 0.9, 2.0], [1.0 / 0.81, 4.0]];
    for (s, w) in t.states.iter().zip(want) {
        let s = real(s);
        assert!((s[0] - w[0]).abs() < 1e-15 && (s[1] - w[1]).abs() < 1e-15);
    }
}

#[test]
fn guard_trips_at_predicted_step() {
    // 2^k > 1e150 first at k = ceil(150 log2 10) = 499
    let predicted = (150.0 * 10f64.log2()).ceil() as usize;
    let err = inverse_trajectory(&diag(&[0.5]), &State::from_real(&[1.0]).unwrap(), 600).unwrap_err();
    match err {
        Error::OverflowGuard { step, log10_magnitude } => {
            assert_eq!(step, predicted);
            assert!(log10_magnitude > 150.0 && log10_magnitude < 150.4);
        }
        other => panic!("{other:?}"),
    }
    let t = inverse_trajectory_guarded(&diag(&[0.5]), &State::from_real(&[1.0]).unwrap(), 600, 400.0).unwrap();
    assert!((t.states[600].coord(0).log10_abs() - 600.0 * 2f64.log10()).abs() < 1e-9);
}

#[test]
fn conjugate_system_fixes_origin() {
    let sys = cubic_system(0.5, 0.5);
    assert_eq!(real(&sys.step(&State::from_real(&[0.0]).unwrap()).unwrap()), [0.0]);
}

#[test]
fn zero_eigenvalue_and_singular_basis_rejected() {
    assert!(matches!(
        DiscreteLinearSystem::diagonal(&[c(0.5), c(0.0)]),
        Err(Error::ZeroEigenvalue { index: 1 })
    ));
    let v = CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.5, 1.0]]).unwrap();
    assert!(matches!(DiscreteLinearSystem::new(vec![c(0.9), c(0.5)], v), Err(Error::Singular { .. })));
}

#[test]
fn wrong_dimension_rejected() {
    let sys = cubic_system(0.5, 0.5);
    // a wrongly sized start state fails before any step
    let err = trajectory(&sys, &State::from_real(&[0.1, 0.2]).unwrap(), 4).unwrap_err();
    assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
}

#[test]
fn flow_examples() {
    let constant = LimitCycleFlow::new(-1.0, vec![], vec![]).unwrap();
    let s = flow_sample(&constant, 1.0, 0.0, &[1.0]).unwrap();
    assert!((real(&s[0])[0] - (-1.0f64).exp()).abs() < 1e-16);
    assert_eq!(real(&s[0])[1], 1.0);

    let flow = LimitCycleFlow::new(-1.0, vec![0.3], vec![]).unwrap();
    let s = flow_sample(&flow, 1.0, 0.0, &[TAU]).unwrap();
    let p = real(&s[0]);
    assert!((p[0] / (-TAU).exp() - 1.0).abs() < 1e-13);
    assert!(p[1] < 1e-12 || TAU - p[1] < 1e-12);

    let s = flow_sample(&flow, 0.7, 2.0, &[0.0]).unwrap();
    assert_eq!(real(&s[0]), [0.7, 2.0]);

    assert!(matches!(flow_sample(&flow, 1.0, 0.0, &[]), Err(Error::Empty(_))));
    assert!(flow_sample(&flow, 1.0, 0.0, &[1.0, 0.5]).is_err());
}

#[test]
fn angles_stay_reduced() {
    let flow = LimitCycleFlow::new(-0.2, vec![0.1], vec![0.05]).unwrap();
    let grid: Vec<f64> = (0..200).map(|j| j as f64 * 0.37).collect();
    for s in flow_sample(&flow, 0.5, 6.2, &grid).unwrap() {
        let a = s.coord(1).re();
        assert!((0.0..TAU).contains(&a));
    }
}

proptest! {
    #[test]
    fn semigroup_is_bitwise(x in -2.0f64..2.0, y in -2.0f64..2.0, k in 1usize..40, m in 1usize..40) {
        let sys = shear_system();
        let x0 = State::from_real(&[x, y]).unwrap();
        let whole = trajectory(&sys, &x0, k + m).unwrap();
        let first = trajectory(&sys, &x0, k).unwrap();
        let rest = trajectory(&sys, &first.states[k], m).unwrap();
        prop_assert_eq!(&whole.states[k + m], &rest.states[m]);
    }

    #[test]
    fn inverse_consistency(x in -2.0f64..2.0, y in -2.0f64..2.0, n in 1usize..60) {
        let sys = shear_system();
        let t = inverse_trajectory(&sys, &State::from_real(&[x, y]).unwrap(), n).unwrap();
        let norm = |x: &State| x.to_complex().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let back = sys.step(&t.states[k + 1]).unwrap().to_complex();
            let scale = norm(&t.states[k]).max(norm(&t.states[k + 1]));
            for (a, b) in back.iter().zip(t.states[k].to_complex()) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn flow_group_property(x in -0.99f64..0.99, s in 0.0f64..TAU, t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let flow = LimitCycleFlow::new(-1.0, vec![0.3, -0.1], vec![0.2]).unwrap();
        let direct = flow_sample(&flow, x, s, &[t1 + t2]).unwrap();
        let mid = flow_sample(&flow, x, s, &[t1]).unwrap();
        let mid = real(&mid[0]);
        let composed = flow_sample(&flow, mid[0], mid[1], &[t2]).unwrap();
        let (a, b) = (real(&direct[0]), real(&composed[0]));
        prop_assert!((a[0] - b[0]).abs() <= 1e-12 * a[0].abs().max(1e-300));
        let da = (a[1] - b[1]).abs();
        prop_assert!(da.min(TAU - da) <= 1e-12 * PI);
    }

    #[test]
    fn cubic_inverse_round_trips(x in -3.0f64..3.0) {
        let h = CubicConjugacy::new(1.0).unwrap();
        let y = h.forward_f64(x);
        prop_assert!((h.forward_f64(h.inverse_f64(y)) - y).abs() <= 1e-14 * y.abs().max(1e-300) * 4.0);
    }
}

#[test]
fn conjugacy_identity_on_grid() {
    let sys = cubic_system(0.5, 0.5);
    let h = *sys.conjugacy();
    for i in 0..100 {
        let x = -0.5 + i as f64 / 99.0;
        let phi_x = real(&sys.step(&State::from_real(&[x]).unwrap()).unwrap())[0];
        let lhs = h.forward_f64(phi_x);
        let rhs = 0.5 * h.forward_f64(x);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "x = {x}");
    }
    // g maps h(domain) into the open unit cube
    let reach = sys.scale()[0] * h.forward_f64(0.5);
    assert!(reach < 1.0 && reach > 0.9);
}
