//! Finite ring polynomials in eigen-coordinates, the Koopman action on their
//! coefficients, and the spectral measure realized as coefficient selection.
//!
//! A fixed-point polynomial `sum_k a_k z^k` is keyed by multi-degrees. A
//! limit-cycle polynomial `sum_k psi_k(s) x^k` with `psi_k(s) = sum_n a_{k,n} e^{ins}`
//! is keyed by `(k, n)` pairs, so each key carries a single complex coefficient.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::analytic::cycle_eigenfunction_value;
use crate::dynsys::{LimitCycleFlow, State};
use crate::error::{Error, Result};
use crate::spectra::{EigenvalueLattice, LatticeIndex, LatticeKind};
use crate::wide::Wide;

#[derive(Debug, Clone, PartialEq)]
pub struct RingPolynomial {
    kind: LatticeKind,
    coeffs: BTreeMap<LatticeIndex, Complex64>,
}

impl RingPolynomial {
    pub fn zero(kind: LatticeKind) -> Self {
        RingPolynomial {
            kind,
            coeffs: BTreeMap::new(),
        }
    }

    /// Zero coefficients are dropped; repeated keys are summed.
    pub fn new(kind: LatticeKind, terms: impl IntoIterator<Item = (LatticeIndex, Complex64)>) -> Result<Self> {
        let mut p = RingPolynomial::zero(kind);
        let mut dim = None;
        for (index, c) in terms {
            if index.kind() != kind {
                return Err(Error::KindMismatch("term index does not match polynomial kind"));
            }
            if let LatticeIndex::Multi(k) = &index {
                match dim {
                    None => dim = Some(k.len()),
                    Some(d) if d != k.len() => {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            found: k.len(),
                        })
                    }
                    _ => {}
                }
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!("non-finite coefficient at {index}")));
            }
            *p.coeffs.entry(index).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        p.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(p)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn coefficient(&self, index: &LatticeIndex) -> Complex64 {
        self.coeffs.get(index).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LatticeIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(LatticeIndex::degree).max().unwrap_or(0)
    }

    fn map_selected(&self, mut f: impl FnMut(&LatticeIndex, Complex64) -> Result<Option<Complex64>>) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (index, &c) in &self.coeffs {
            if let Some(v) = f(index, c)? {
                if v != Complex64::new(0.0, 0.0) {
                    coeffs.insert(index.clone(), v);
                }
            }
        }
        Ok(RingPolynomial {
            kind: self.kind,
            coeffs,
        })
    }
}

/// `(sum |a|^2)^{1/2}`; for limit-cycle polynomials this is Parseval's
/// `sum_k ||psi_k||^2` under normalized Haar measure.
pub fn poly_norm(p: &RingPolynomial) -> f64 {
    let scale = p.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = p.coeffs.values().map(|c| (c / scale).norm_sqr()).sum();
    scale * libm::sqrt(sum)
}

fn check_polydisc(coords: &[Wide]) -> Result<()> {
    for (coordinate, c) in coords.iter().enumerate() {
        if !(c.abs() < 1.0) {
            return Err(Error::OutsidePolydisc { coordinate });
        }
    }
    Ok(())
}

/// Evaluation on the open unit polydisc.
///
/// Limit-cycle terms are read as `x^k e^{ins}` at `(x, s)`; use
/// [`poly_eval_on_cycle`] for the eigenfunction coordinates of a given flow.
pub fn poly_eval(p: &RingPolynomial, point: &State) -> Result<Complex64> {
    let mut acc = Wide::ZERO;
    match p.kind {
        LatticeKind::FixedPoint => {
            check_polydisc(point.coords())?;
            for (index, &c) in &p.coeffs {
                let LatticeIndex::Multi(k) = index else { unreachable!() };
                if k.len() != point.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: k.len(),
                        found: point.dim(),
                    });
                }
                let mut term = Wide::from(c);
                for (z, &kj) in point.coords().iter().zip(k) {
                    term *= z.powu(u64::from(kj));
                }
                acc += term;
            }
        }
        LatticeKind::LimitCycle => {
            let (x, s) = cycle_point(point)?;
            for (index, &c) in &p.coeffs {
                let LatticeIndex::Cycle { k, n } = *index else { unreachable!() };
                let phase = Wide::exp(Complex64::new(0.0, f64::from(n) * s));
                acc += Wide::from(c) * x.powu(u64::from(k)) * phase;
            }
        }
    }
    acc.to_finite_complex().ok_or(Error::NonFinite { coordinate: 0 })
}

fn cycle_point(point: &State) -> Result<(Wide, f64)> {
    if point.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: point.dim(),
        });
    }
    check_polydisc(&point.coords()[..1])?;
    Ok((point.coord(0), point.coord(1).re()))
}

/// `sum a_{k,n} g_k(x, s) h_n(s)` for the eigenfunctions of `flow`.
pub fn poly_eval_on_cycle(p: &RingPolynomial, flow: &LimitCycleFlow, point: &State) -> Result<Complex64> {
    if p.kind != LatticeKind::LimitCycle {
        return Err(Error::KindMismatch("poly_eval_on_cycle needs a limit-cycle polynomial"));
    }
    cycle_point(point)?;
    let mut acc = Wide::ZERO;
    for (index, &c) in &p.coeffs {
        let LatticeIndex::Cycle { k, n } = *index else { unreachable!() };
        acc += Wide::from(c) * cycle_eigenfunction_value(flow, k, n, point)?;
    }
    acc.to_finite_complex().ok_or(Error::NonFinite { coordinate: 0 })
}

fn lattice_value(lattice: &EigenvalueLattice, p: &RingPolynomial, index: &LatticeIndex) -> Result<Complex64> {
    if lattice.kind() != p.kind {
        return Err(Error::KindMismatch("polynomial and lattice kinds differ"));
    }
    lattice.value(index)
}

/// Koopman action: each coefficient times its lattice eigenvalue.
pub fn koopman_apply(p: &RingPolynomial, lattice: &EigenvalueLattice) -> Result<RingPolynomial> {
    p.map_selected(|index, c| Ok(Some(c * lattice_value(lattice, p, index)?)))
}

/// A Borel subset of the complex plane, or an explicit set of lattice indices.
#[derive(Debug, Clone, PartialEq)]
pub enum BorelRegion {
    Everything,
    /// Closed modulus interval plus an optional closed argument interval
    /// `[a_lo, a_lo + width]`, taken modulo `2 pi`.
    Annulus {
        r_lo: f64,
        r_hi: f64,
        arg: Option<(f64, f64)>,
    },
    Indices(BTreeSet<LatticeIndex>),
    Intersection(Vec<BorelRegion>),
    Union(Vec<BorelRegion>),
}

impl BorelRegion {
    pub fn annulus(r_lo: f64, r_hi: f64) -> Result<Self> {
        BorelRegion::sector(r_lo, r_hi, None)
    }

    pub fn sector(r_lo: f64, r_hi: f64, arg: Option<(f64, f64)>) -> Result<Self> {
        if !(r_lo <= r_hi) {
            return Err(Error::InvalidParameter(alloc::format!(
                "modulus interval [{r_lo}, {r_hi}] is empty"
            )));
        }
        if let Some((lo, hi)) = arg {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "argument interval [{lo}, {hi}] is invalid"
                )));
            }
        }
        Ok(BorelRegion::Annulus { r_lo, r_hi, arg })
    }

    /// A small closed neighbourhood of `gamma`, relative width `1e-12`.
    pub fn singleton(gamma: Complex64) -> Self {
        let r = gamma.norm();
        let a = gamma.arg();
        BorelRegion::Annulus {
            r_lo: r * (1.0 - 1e-12),
            r_hi: r * (1.0 + 1e-12),
            arg: Some((a - 1e-12, a + 1e-12)),
        }
    }

    pub fn contains(&self, index: &LatticeIndex, value: Complex64) -> bool {
        match self {
            BorelRegion::Everything => true,
            BorelRegion::Annulus { r_lo, r_hi, arg } => {
                let r = value.norm();
                if r < *r_lo || r > *r_hi {
                    return false;
                }
                match arg {
                    None => true,
                    Some((lo, hi)) if hi - lo >= TAU => true,
                    Some((lo, hi)) => {
                        let offset = crate::dynsys::reduce_angle(value.arg() - lo);
                        offset <= hi - lo
                    }
                }
            }
            BorelRegion::Indices(set) => set.contains(index),
            BorelRegion::Intersection(parts) => parts.iter().all(|r| r.contains(index, value)),
            BorelRegion::Union(parts) => parts.iter().any(|r| r.contains(index, value)),
        }
    }
}

/// `E(D) p`: keeps exactly the coefficients whose eigenvalue lies in `region`.
pub fn spectral_projection(
    p: &RingPolynomial,
    region: &BorelRegion,
    lattice: &EigenvalueLattice,
) -> Result<RingPolynomial> {
    p.map_selected(|index, c| {
        let value = lattice_value(lattice, p, index)?;
        Ok(region.contains(index, value).then_some(c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::fixed_point_lattice;

    #[test]
    fn zero_coefficients_dropped() {
        let p = RingPolynomial::new(
            LatticeKind::FixedPoint,
            [
                (LatticeIndex::Multi(alloc::vec![1]), Complex64::new(1.0, 0.0)),
                (LatticeIndex::Multi(alloc::vec![1]), Complex64::new(-1.0, 0.0)),
            ],
        )
        .unwrap();
        assert!(p.is_empty());
        assert_eq!(poly_norm(&p), 0.0);
    }

    #[test]
    fn apply_outside_truncation_fails() {
        let lattice = fixed_point_lattice(&[Complex64::new(0.5, 0.0)], 1).unwrap();
        let p = RingPolynomial::new(
            LatticeKind::FixedPoint,
            [(LatticeIndex::Multi(alloc::vec![2]), Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        assert!(matches!(koopman_apply(&p, &lattice), Err(Error::TargetNotInLattice(_))));
    }
}
