//! Closed-form Koopman eigenfunctions: the oracle side of every projection.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dynsys::{ConjugateNonlinearSystem, DiscreteLinearSystem, LimitCycleFlow, State};
use crate::error::{Error, Result};
use crate::gla::{Observable, Target};
use crate::linalg::CMatrix;
use crate::spectra::{eigenvalue_product, LatticeIndex};
use crate::wide::Wide;

/// Relative distance under which two lattice values count as the same eigenvalue.
pub const EIGENVALUE_MATCH_TOLERANCE: f64 = 1e-12;

/// Dual basis `W = (V^*)^-1`, so that `<v_i, w_j> = delta_ij`.
#[derive(Debug, Clone)]
pub struct AdjointBasis {
    vectors: CMatrix,
    adjoint: CMatrix,
}

impl AdjointBasis {
    /// Fails with [`Error::Singular`] when `V` is numerically singular.
    pub fn new(vectors: &CMatrix) -> Result<Self> {
        let adjoint = vectors.adjoint().inverse()?;
        Ok(AdjointBasis {
            vectors: vectors.clone(),
            adjoint,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    /// `max_j |A^* w_j - conj(lambda_j) w_j| / |w_j|`; zero up to round-off.
    pub fn adjoint_eigen_defect(&self, system: &DiscreteLinearSystem) -> f64 {
        let a_star = system.matrix().adjoint();
        (0..self.dim())
            .map(|j| {
                let w = self.adjoint.column(j);
                let aw = a_star.mul_vec(&w);
                let lambda = system.eigenvalues()[j].conj();
                let scale = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
                aw.iter()
                    .zip(&w)
                    .map(|(x, y)| (x - lambda * y).norm())
                    .fold(0.0, f64::max)
                    / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// Columns are the adjoint vectors `w_j`.
    pub fn adjoint(&self) -> &CMatrix {
        &self.adjoint
    }

    /// `max_ij |<v_i, w_j> - delta_ij|` with `<y, w> = sum_r y_r conj(w_r)`.
    pub fn biorthogonality_defect(&self) -> f64 {
        let gram = self.adjoint.adjoint().matmul(&self.vectors);
        gram.max_abs_diff(&CMatrix::identity(gram.dim()))
    }

    /// Principal eigenfunction `phi_j(y) = <y, w_j>`.
    pub fn principal(&self, j: usize, y: &[Wide]) -> Result<Wide> {
        let d = self.vectors.dim();
        if y.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: y.len(),
            });
        }
        if j >= d {
            return Err(Error::IndexOutOfRange { index: j, len: d });
        }
        let mut acc = Wide::ZERO;
        for (r, yr) in y.iter().enumerate() {
            let w = self.adjoint[(r, j)].conj();
            if w != Complex64::new(0.0, 0.0) {
                acc += *yr * w;
            }
        }
        Ok(acc)
    }

    /// `prod_j phi_j(y)^k_j`.
    pub fn product(&self, k: &[u32], y: &[Wide]) -> Result<Wide> {
        if k.len() != self.vectors.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.vectors.dim(),
                found: k.len(),
            });
        }
        let mut acc = Wide::ONE;
        for (j, &kj) in k.iter().enumerate() {
            if kj > 0 {
                acc *= self.principal(j, y)?.powu(u64::from(kj));
            }
        }
        Ok(acc)
    }
}

/// `phi_j` as an observable; `j` counts from zero.
pub fn principal_eigenfunction(basis: &AdjointBasis, j: usize) -> Result<Observable> {
    if j >= basis.dim() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: basis.dim(),
        });
    }
    let basis = basis.clone();
    Ok(Observable::new(format!("phi_{j}"), move |x| basis.principal(j, x.coords())))
}

/// `prod_j phi_j^m_j`, eigenvalue `prod_j lambda_j^m_j`.
pub fn product_eigenfunction(basis: &AdjointBasis, m: &[u32]) -> Result<Observable> {
    if m.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: m.len(),
        });
    }
    let basis = basis.clone();
    let m = m.to_vec();
    let label = format!("phi{}", LatticeIndex::Multi(m.clone()));
    Ok(Observable::new(label, move |x| basis.product(&m, x.coords())))
}

pub fn limit_cycle_eigenfunction(flow: &LimitCycleFlow, m: u32, n: i32) -> Observable {
    let flow = flow.clone();
    Observable::new(format!("g{m}h{n}"), move |x| cycle_eigenfunction_value(&flow, m, n, x))
}

/// A named map between state spaces, one link of a pullback chain.
#[derive(Clone)]
pub struct StateMap {
    map: Arc<dyn Fn(&State) -> Result<State> + Send + Sync>,
    label: alloc::string::String,
}

impl core::fmt::Debug for StateMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label)
    }
}

impl StateMap {
    pub fn new<F>(label: &str, map: F) -> Self
    where
        F: Fn(&State) -> Result<State> + Send + Sync + 'static,
    {
        StateMap {
            map: Arc::new(map),
            label: label.into(),
        }
    }

    pub fn apply(&self, x: &State) -> Result<State> {
        (self.map)(x)
    }

    /// `h`, refusing points outside the declared domain of `system`.
    pub fn conjugacy(system: &ConjugateNonlinearSystem) -> Self {
        let system = system.clone();
        StateMap::new("h", move |x| {
            if !system.in_domain(x) {
                let coordinate = x
                    .coords()
                    .iter()
                    .zip(system.domain())
                    .position(|(c, &(lo, hi))| !(c.im() == 0.0 && c.re() >= lo && c.re() <= hi))
                    .unwrap_or(0);
                return Err(Error::DomainViolation {
                    coordinate,
                    value: x.coord(coordinate).re(),
                });
            }
            system.conjugacy().forward(x)
        })
    }

    /// `g`, the coordinatewise scaling onto the unit cube.
    pub fn scaling(system: &ConjugateNonlinearSystem) -> Self {
        let system = system.clone();
        StateMap::new("g", move |y| system.scaling(y))
    }
}

/// `obs o chain[0] o chain[1] o ...`: the last map is applied first.
pub fn pullback(obs: &Observable, chain: &[StateMap]) -> Observable {
    if chain.is_empty() {
        return obs.clone();
    }
    let obs = obs.clone();
    let chain = chain.to_vec();
    let label = format!(
        "{}({})",
        obs.label(),
        chain.iter().map(|m| m.label.as_str()).collect::<Vec<_>>().join(" o ")
    );
    Observable::new(label, move |x| {
        let mut y = x.clone();
        for map in chain.iter().rev() {
            y = map.apply(&y)?;
        }
        obs.eval(&y)
    })
}

/// `g_m(x, s) h_n(s) = x^m e^{-m xi(s)} e^{i n s}`, eigenvalue `e^{m rho_star + i n}`.
pub fn cycle_eigenfunction_value(flow: &LimitCycleFlow, m: u32, n: i32, state: &State) -> Result<Wide> {
    if state.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: state.dim(),
        });
    }
    let s = state.coord(1).re();
    let radial = state.coord(0).powu(u64::from(m));
    let phase = Complex64::new(-(m as f64) * flow.xi(s), n as f64 * s);
    Ok(radial * Wide::exp(phase))
}

#[derive(Debug, Clone)]
enum Source {
    Linear(DiscreteLinearSystem, AdjointBasis),
    Conjugate(ConjugateNonlinearSystem, AdjointBasis),
    LimitCycle(LimitCycleFlow),
}

/// The eigenfunctions of one system, indexed by lattice indices.
#[derive(Debug, Clone)]
pub struct EigenfunctionFamily {
    source: Source,
}

impl EigenfunctionFamily {
    pub fn linear(system: &DiscreteLinearSystem) -> Result<Self> {
        let basis = AdjointBasis::new(system.eigenvectors())?;
        Ok(EigenfunctionFamily {
            source: Source::Linear(system.clone(), basis),
        })
    }

    /// Pulled back through `x -> g(h(x))`, using the adjoint of the scaled eigenvectors.
    pub fn conjugate(system: &ConjugateNonlinearSystem) -> Result<Self> {
        let basis = AdjointBasis::new(&system.scaled_eigenvectors())?;
        Ok(EigenfunctionFamily {
            source: Source::Conjugate(system.clone(), basis),
        })
    }

    pub fn limit_cycle(flow: &LimitCycleFlow) -> Self {
        EigenfunctionFamily {
            source: Source::LimitCycle(flow.clone()),
        }
    }

    pub fn eigenvalue(&self, index: &LatticeIndex) -> Result<Complex64> {
        match (&self.source, index) {
            (Source::Linear(sys, _), LatticeIndex::Multi(k)) => check_len(sys.eigenvalues(), k)
                .map(|_| eigenvalue_product(sys.eigenvalues(), k)),
            (Source::Conjugate(sys, _), LatticeIndex::Multi(k)) => check_len(sys.base().eigenvalues(), k)
                .map(|_| eigenvalue_product(sys.base().eigenvalues(), k)),
            (Source::LimitCycle(flow), LatticeIndex::Cycle { k, n }) => Ok(Complex64::new(
                f64::from(*k) * flow.rho_star(),
                f64::from(*n),
            )
            .exp()),
            _ => Err(Error::KindMismatch("lattice index does not match the system")),
        }
    }

    pub fn eval(&self, index: &LatticeIndex, x: &State) -> Result<Wide> {
        match (&self.source, index) {
            (Source::Linear(_, basis), LatticeIndex::Multi(k)) => basis.product(k, x.coords()),
            (Source::Conjugate(sys, basis), LatticeIndex::Multi(k)) => {
                let y = sys.scaling(&sys.conjugacy().forward(x)?)?;
                basis.product(k, y.coords())
            }
            (Source::LimitCycle(flow), LatticeIndex::Cycle { k, n }) => {
                cycle_eigenfunction_value(flow, *k, *n, x)
            }
            _ => Err(Error::KindMismatch("lattice index does not match the system")),
        }
    }

    pub fn observable(self: &Arc<Self>, index: &LatticeIndex) -> Observable {
        let family = Arc::clone(self);
        let idx = index.clone();
        Observable::new(format!("phi{index}"), move |x| family.eval(&idx, x))
    }
}

fn check_len(eigs: &[Complex64], k: &[u32]) -> Result<()> {
    if eigs.len() == k.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: eigs.len(),
            found: k.len(),
        })
    }
}

/// Finite eigenfunction expansion `f = sum_i c_i phi_{k_i}` with known projections.
#[derive(Debug, Clone)]
pub struct Expansion {
    family: Arc<EigenfunctionFamily>,
    terms: Vec<(LatticeIndex, Complex64)>,
}

impl Expansion {
    pub fn new(family: Arc<EigenfunctionFamily>, terms: Vec<(LatticeIndex, Complex64)>) -> Result<Self> {
        for (index, _) in &terms {
            family.eigenvalue(index)?;
        }
        Ok(Expansion { family, terms })
    }

    pub fn family(&self) -> &Arc<EigenfunctionFamily> {
        &self.family
    }

    pub fn terms(&self) -> &[(LatticeIndex, Complex64)] {
        &self.terms
    }

    pub fn observable(&self) -> Observable {
        let parts: Vec<(Complex64, Observable)> = self
            .terms
            .iter()
            .map(|(index, c)| (*c, self.family.observable(index)))
            .collect();
        if parts.is_empty() {
            Observable::zero()
        } else {
            Observable::linear_combination(&parts)
        }
    }

    /// `P_lambda f(x0)`: the terms whose eigenvalue equals `lambda`, evaluated at `x0`.
    pub fn projection(&self, lambda: Complex64, x0: &State) -> Result<Complex64> {
        let mut acc = Wide::ZERO;
        for (index, c) in &self.terms {
            let mu = self.family.eigenvalue(index)?;
            if (mu - lambda).norm() <= EIGENVALUE_MATCH_TOLERANCE * lambda.norm().max(mu.norm()) {
                acc += self.family.eval(index, x0)? * *c;
            }
        }
        acc.to_finite_complex()
            .ok_or(Error::NonFinite { coordinate: 0 })
    }

    pub fn target_projection(&self, target: &Target, x0: &State) -> Result<Complex64> {
        let lambda = match target {
            Target::Index(index) => self.family.eigenvalue(index)?,
            Target::Probe(lambda) => *lambda,
        };
        self.projection(lambda, x0)
    }
}
