use std::f64::consts::PI;

use gla_core::spectra::{
    decompose_circles, fixed_point_lattice, limit_cycle_lattice, LatticeIndex, DEFAULT_GROUPING_TOLERANCE,
};
use gla_core::{Complex64, Error};
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn two_eigenvalue_lattice_values() {
    let lattice = fixed_point_lattice(&[c(0.9), c(0.5)], 2).unwrap();
    let mut values: Vec<f64> = lattice.entries().iter().map(|e| e.value.re).collect();
    values.sort_by(f64::total_cmp);
    let want = [0.25, 0.45, 0.5, 0.81, 0.9, 1.0];
    for (v, w) in values.iter().zip(want) {
        assert!((v - w).abs() < 1e-15);
    }
    assert_eq!(lattice.value(&LatticeIndex::Multi(vec![0, 0])).unwrap(), c(1.0));
    assert!(lattice.entries().iter().all(|e| e.value.im == 0.0));
}

#[test]
fn cycle_lattice_rings() {
    let lattice = limit_cycle_lattice(-1.0, 1, 1).unwrap();
    assert_eq!(lattice.len(), 6);
    let e1 = (-1.0f64).exp();
    for e in lattice.entries() {
        let LatticeIndex::Cycle { k, n } = e.index else { panic!() };
        let want = if k == 0 { 1.0 } else { e1 };
        assert!((e.modulus - want).abs() < 1e-16);
        assert!((e.value.arg() - n as f64).abs() < 1e-15);
    }
    let v = lattice_value(-1.0, 2, -1);
    let want = Complex64::from_polar((-2.0f64).exp(), -1.0);
    assert!((v - want).norm() < 1e-16);

    let trivial = limit_cycle_lattice(-1.0, 0, 0).unwrap();
    assert_eq!(trivial.len(), 1);
    assert_eq!(trivial.entries()[0].value, c(1.0));
    assert!(matches!(limit_cycle_lattice(0.0, 1, 1), Err(Error::UnstableCycle { .. })));
}

fn lattice_value(rho: f64, k: u32, n: i32) -> Complex64 {
    limit_cycle_lattice(rho, k, n.unsigned_abs())
        .unwrap()
        .value(&LatticeIndex::Cycle { k, n })
        .unwrap()
}

#[test]
fn fixed_point_circles() {
    let lattice = fixed_point_lattice(&[c(0.9), c(0.5)], 2).unwrap();
    let dec = decompose_circles(&lattice, DEFAULT_GROUPING_TOLERANCE).unwrap();
    let want = [1.0, 0.9, 0.81, 0.5, 0.45, 0.25];
    assert_eq!(dec.len(), 6);
    for (r, w) in dec.radii().iter().zip(want) {
        assert!((r - w).abs() < 1e-15);
    }
}

#[test]
fn cycle_circles() {
    let dec = decompose_circles(&limit_cycle_lattice(-1.0, 2, 5).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    assert_eq!(dec.len(), 3);
    for (i, circle) in dec.circles().iter().enumerate() {
        assert_eq!(circle.members.len(), 11);
        assert!((circle.radius - (-(i as f64)).exp()).abs() < 1e-16);
    }
}

#[test]
fn equal_moduli_share_a_circle() {
    let eigs = [c(0.7), Complex64::from_polar(0.7, PI / 4.0)];
    let dec = decompose_circles(&fixed_point_lattice(&eigs, 1).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    assert_eq!(dec.len(), 2);
    assert_eq!(dec.circles()[1].members.len(), 2);
}

#[test]
fn resonant_products_stay_separate_entries() {
    let eigs = [c(0.9), c(0.81)];
    let lattice = fixed_point_lattice(&eigs, 2).unwrap();
    let dec = decompose_circles(&lattice, DEFAULT_GROUPING_TOLERANCE).unwrap();
    let (ci, _) = dec.locate(&LatticeIndex::Multi(vec![2, 0])).unwrap();
    let (cj, _) = dec.locate(&LatticeIndex::Multi(vec![0, 1])).unwrap();
    assert_eq!(ci, cj);
    assert_eq!(lattice.resonances(1e-12).len(), 1);
}

#[test]
fn chained_near_collision_is_an_error() {
    // each neighbour is within tolerance, the ends are not
    let eigs = [c(0.9), c(0.9 * (1.0 - 0.8e-9)), c(0.9 * (1.0 - 1.6e-9))];
    match decompose_circles(&fixed_point_lattice(&eigs, 1).unwrap(), 1e-9) {
        Err(Error::AmbiguousCircles { moduli }) => assert!(moduli.len() >= 2),
        other => panic!("{other:?}"),
    }
    let separated = [c(0.9), c(0.9 * (1.0 + 3e-9))];
    let dec = decompose_circles(&fixed_point_lattice(&separated, 1).unwrap(), 1e-9).unwrap();
    assert_eq!(dec.len(), 3);
}

#[test]
fn peripheral_and_removal() {
    let dec = decompose_circles(&fixed_point_lattice(&[c(0.9), c(0.5)], 2).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    assert_eq!(dec.peripheral().unwrap().radius, 1.0);
    assert_eq!(dec.without_leading(1).unwrap().peripheral().unwrap().radius, 0.9);
    let single = decompose_circles(&fixed_point_lattice(&[c(0.9)], 0).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
    assert_eq!(single.peripheral().unwrap().radius, 1.0);
}

fn eigenvalues() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((0.05f64..0.99, -PI..PI), 1..4)
        .prop_map(|v| v.into_iter().map(|(r, a)| Complex64::from_polar(r, a)).collect())
}

proptest! {
    #[test]
    fn removal_keeps_strictly_decreasing_radii(eigs in eigenvalues(), k in 0u32..4) {
        let lattice = fixed_point_lattice(&eigs, k).unwrap();
        // random eigenvalues rarely collide; a collision is a legitimate refusal
        let Ok(dec) = decompose_circles(&lattice, DEFAULT_GROUPING_TOLERANCE) else { return Ok(()) };
        let total: usize = dec.circles().iter().map(|c| c.members.len()).sum();
        prop_assert_eq!(total, lattice.len());
        for drop in 0..dec.len() {
            let rest = dec.without_leading(drop).unwrap();
            for w in rest.radii().windows(2) {
                prop_assert!(w[0] - w[1] > rest.tolerance() * w[0]);
            }
            for circle in rest.circles() {
                for m in &circle.members {
                    prop_assert!((circle.radius - m.modulus).abs() <= rest.tolerance() * circle.radius);
                }
            }
        }
    }

    #[test]
    fn cycle_circle_count(rho in -3.0f64..-0.01, k in 0u32..6, n in 0u32..12) {
        let dec = decompose_circles(&limit_cycle_lattice(rho, k, n).unwrap(), DEFAULT_GROUPING_TOLERANCE).unwrap();
        prop_assert_eq!(dec.len(), k as usize + 1);
    }

    #[test]
    fn lattice_multiplicativity(eigs in eigenvalues(), seed in any::<u64>()) {
        let k = 4;
        let lattice = fixed_point_lattice(&eigs, k).unwrap();
        let entries = lattice.entries();
        let a = &entries[(seed % entries.len() as u64) as usize];
        let b = &entries[((seed / 7) % entries.len() as u64) as usize];
        let (LatticeIndex::Multi(ka), LatticeIndex::Multi(kb)) = (&a.index, &b.index) else { unreachable!() };
        let sum: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
        if sum.iter().sum::<u32>() <= k {
            let v = lattice.value(&LatticeIndex::Multi(sum)).unwrap();
            let prod = a.value * b.value;
            prop_assert!((v - prod).norm() <= 1e-12 * prod.norm());
        }
    }
}
