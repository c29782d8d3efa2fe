//! Truncated eigenvalue lattices and their decomposition into isolated circles.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used to group moduli into circles.
pub const DEFAULT_GROUPING_TOLERANCE: f64 = 1e-9;

/// Index of a lattice eigenvalue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LatticeIndex {
    /// Multi-degree `k` of the product `prod_j lambda_j^k_j`.
    Multi(Vec<u32>),
    /// `e^{k rho* + i n}` on a limit cycle.
    Cycle { k: u32, n: i32 },
}

impl LatticeIndex {
    pub fn degree(&self) -> u32 {
        match self {
            LatticeIndex::Multi(k) => k.iter().sum(),
            LatticeIndex::Cycle { k, .. } => *k,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        match self {
            LatticeIndex::Multi(_) => LatticeKind::FixedPoint,
            LatticeIndex::Cycle { .. } => LatticeKind::LimitCycle,
        }
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeIndex::Multi(k) => {
                f.write_str("[")?;
                for (i, v) in k.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            LatticeIndex::Cycle { k, n } => write!(f, "[{k},{n}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    FixedPoint,
    LimitCycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeEntry {
    pub index: LatticeIndex,
    pub value: Complex64,
    /// `|value|`; shared bit-for-bit by all entries of one limit-cycle ring.
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueLattice {
    kind: LatticeKind,
    entries: Vec<LatticeEntry>,
    max_degree: u32,
    max_frequency: u32,
    positions: BTreeMap<LatticeIndex, usize>,
}

impl EigenvalueLattice {
    fn from_entries(
        kind: LatticeKind,
        entries: Vec<LatticeEntry>,
        max_degree: u32,
        max_frequency: u32,
    ) -> Self {
        let positions = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.index.clone(), i))
            .collect();
        EigenvalueLattice {
            kind,
            entries,
            max_degree,
            max_frequency,
            positions,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn entries(&self) -> &[LatticeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn max_frequency(&self) -> u32 {
        self.max_frequency
    }

    pub fn get(&self, index: &LatticeIndex) -> Option<&LatticeEntry> {
        self.positions.get(index).map(|&i| &self.entries[i])
    }

    pub fn value(&self, index: &LatticeIndex) -> Result<Complex64> {
        self.get(index)
            .map(|e| e.value)
            .ok_or_else(|| Error::TargetNotInLattice(alloc::format!("{index}")))
    }

    /// Pairs of distinct indices whose eigenvalues agree to relative `tol`.
    pub fn resonances(&self, tol: f64) -> Vec<(LatticeIndex, LatticeIndex)> {
        let mut out = Vec::new();
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                let scale = a.modulus.max(b.modulus);
                if (a.value - b.value).norm() <= tol * scale {
                    out.push((a.index.clone(), b.index.clone()));
                }
            }
        }
        out
    }
}

fn multi_indices(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=degree).rev() {
        prefix.push(first);
        multi_indices(dim, degree - first, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of dimension `dim` with total degree at most `max_degree`,
/// graded by degree and lexicographically descending within a degree.
pub fn graded_multi_indices(dim: usize, max_degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        multi_indices(dim, degree, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Products of eigenvalue powers; computed by repeated multiplication in coordinate order.
pub fn eigenvalue_product(eigenvalues: &[Complex64], k: &[u32]) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for (l, &p) in eigenvalues.iter().zip(k) {
        for _ in 0..p {
            v *= l;
        }
    }
    v
}

/// `{ (k, prod_j lambda_j^k_j) : |k| <= max_degree }`, including `k = 0 -> 1`.
pub fn fixed_point_lattice(eigenvalues: &[Complex64], max_degree: u32) -> Result<EigenvalueLattice> {
    if eigenvalues.is_empty() {
        return Err(Error::Empty("eigenvalues"));
    }
    if let Some(index) = eigenvalues.iter().position(|l| l.norm() == 0.0) {
        return Err(Error::ZeroEigenvalue { index });
    }
    let entries = graded_multi_indices(eigenvalues.len(), max_degree)
        .into_iter()
        .map(|k| {
            let value = eigenvalue_product(eigenvalues, &k);
            LatticeEntry {
                index: LatticeIndex::Multi(k),
                value,
                modulus: value.norm(),
            }
        })
        .collect();
    Ok(EigenvalueLattice::from_entries(
        LatticeKind::FixedPoint,
        entries,
        max_degree,
        0,
    ))
}

/// `{ ((k, n), e^{k rho* + i n}) : 0 <= k <= max_degree, |n| <= max_frequency }`.
pub fn limit_cycle_lattice(
    rho_star: f64,
    max_degree: u32,
    max_frequency: u32,
) -> Result<EigenvalueLattice> {
    if !rho_star.is_finite() || rho_star >= 0.0 {
        return Err(Error::UnstableCycle { rho_star });
    }
    let n_max = max_frequency as i32;
    let mut entries = Vec::new();
    for k in 0..=max_degree {
        let modulus = libm::exp(k as f64 * rho_star);
        for n in -n_max..=n_max {
            let (s, c) = libm::sincos(n as f64);
            entries.push(LatticeEntry {
                index: LatticeIndex::Cycle { k, n },
                value: Complex64::new(modulus * c, modulus * s),
                modulus,
            });
        }
    }
    Ok(EigenvalueLattice::from_entries(
        LatticeKind::LimitCycle,
        entries,
        max_degree,
        max_frequency,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub radius: f64,
    pub members: Vec<LatticeEntry>,
}

/// Lattice entries grouped by modulus, radii strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleDecomposition {
    circles: Vec<Circle>,
    tolerance: f64,
}

/// Groups lattice moduli into circles.
///
/// An entry joins the current circle when its modulus is within `tol * radius`
/// of the circle radius. Otherwise it starts a new circle, unless it is also within
/// `tol * radius` of the previous entry: that chain of near-equal moduli has no
/// well-defined grouping and is reported as [`Error::AmbiguousCircles`].
pub fn decompose_circles(lattice: &EigenvalueLattice, tol: f64) -> Result<CircleDecomposition> {
    if lattice.is_empty() {
        return Err(Error::Empty("lattice"));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "grouping tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let mut sorted: Vec<&LatticeEntry> = lattice.entries.iter().collect();
    sorted.sort_by(|a, b| b.modulus.total_cmp(&a.modulus));

    let mut circles: Vec<Circle> = Vec::new();
    let mut last_modulus = f64::NAN;
    for entry in sorted {
        match circles.last_mut() {
            Some(c) if c.radius - entry.modulus <= tol * c.radius => {
                c.members.push(entry.clone());
            }
            Some(c) => {
                if last_modulus - entry.modulus <= tol * c.radius {
                    return Err(Error::AmbiguousCircles {
                        moduli: alloc::vec![c.radius, last_modulus, entry.modulus],
                    });
                }
                circles.push(Circle {
                    radius: entry.modulus,
                    members: alloc::vec![entry.clone()],
                });
            }
            None => circles.push(Circle {
                radius: entry.modulus,
                members: alloc::vec![entry.clone()],
            }),
        }
        last_modulus = entry.modulus;
    }
    Ok(CircleDecomposition {
        circles,
        tolerance: tol,
    })
}

impl CircleDecomposition {
    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn len(&self) -> usize {
        self.circles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn radii(&self) -> Vec<f64> {
        self.circles.iter().map(|c| c.radius).collect()
    }

    /// The largest-radius circle.
    pub fn peripheral(&self) -> Result<&Circle> {
        self.circles.first().ok_or(Error::Empty("circle decomposition"))
    }

    /// Drops the `count` largest circles; at least one circle must remain.
    pub fn without_leading(&self, count: usize) -> Result<CircleDecomposition> {
        if count >= self.circles.len() {
            return Err(Error::Empty("circle decomposition"));
        }
        Ok(CircleDecomposition {
            circles: self.circles[count..].to_vec(),
            tolerance: self.tolerance,
        })
    }

    /// Position of the circle holding `index`, and the entry itself.
    pub fn locate(&self, index: &LatticeIndex) -> Option<(usize, &LatticeEntry)> {
        self.circles.iter().enumerate().find_map(|(ci, c)| {
            c.members
                .iter()
                .find(|m| &m.index == index)
                .map(|m| (ci, m))
        })
    }

    /// Human-readable listing, one circle per line.
    pub fn describe(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (i, c) in self.circles.iter().enumerate() {
            let _ = write!(s, "circle {i}: radius {:.17e}, {} member(s):", c.radius, c.members.len());
            for m in &c.members {
                let _ = write!(s, " {}", m.index);
            }
            s.push('\n');
        }
        s
    }
}
