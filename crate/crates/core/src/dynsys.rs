//! Benchmark dynamical systems and the trajectories observables are sampled on.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::wide::Wide;

/// Default inverse-iteration guard: abort once any coordinate modulus exceeds `1e150`.
pub const DEFAULT_GUARD_LOG10: f64 = 150.0;

/// A point in state space. Coordinates are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    coords: Vec<Wide>,
}

impl State {
    pub fn new(coords: Vec<Wide>) -> Result<State> {
        if coords.is_empty() {
            return Err(Error::Empty("state"));
        }
        Ok(State { coords })
    }

    pub fn from_complex(coords: &[Complex64]) -> Result<State> {
        let coords = coords
            .iter()
            .enumerate()
            .map(|(i, &z)| Wide::try_from_complex(z).ok_or(Error::NonFinite { coordinate: i }))
            .collect::<Result<Vec<_>>>()?;
        State::new(coords)
    }

    pub fn from_real(coords: &[f64]) -> Result<State> {
        let coords: Vec<Complex64> = coords.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        State::from_complex(&coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Wide] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> Wide {
        self.coords[i]
    }

    /// Coordinates rounded to double precision (may flush to zero or saturate).
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.coords.iter().map(Wide::to_complex).collect()
    }

    fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// A discrete-time map `x -> Phi(x)`.
pub trait DiscreteMap {
    fn dim(&self) -> usize;
    fn step(&self, x: &State) -> Result<State>;
}

/// `y -> A y` with `A = V diag(eigenvalues) V^-1`.
#[derive(Debug, Clone)]
pub struct DiscreteLinearSystem {
    eigenvalues: Vec<Complex64>,
    vectors: CMatrix,
    vectors_inv: CMatrix,
    diagonal: bool,
}

impl DiscreteLinearSystem {
    pub fn new(eigenvalues: Vec<Complex64>, vectors: CMatrix) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Empty("eigenvalues"));
        }
        if vectors.dim() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                found: vectors.dim(),
            });
        }
        for (index, l) in eigenvalues.iter().enumerate() {
            if !(l.re.is_finite() && l.im.is_finite()) {
                return Err(Error::NonFinite { coordinate: index });
            }
            if l.norm() == 0.0 {
                return Err(Error::ZeroEigenvalue { index });
            }
        }
        let vectors_inv = vectors.inverse()?;
        let diagonal = vectors == CMatrix::identity(vectors.dim());
        Ok(DiscreteLinearSystem {
            eigenvalues,
            vectors,
            vectors_inv,
            diagonal,
        })
    }

    pub fn diagonal(eigenvalues: &[Complex64]) -> Result<Self> {
        DiscreteLinearSystem::new(eigenvalues.to_vec(), CMatrix::identity(eigenvalues.len()))
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn is_stable(&self) -> bool {
        self.eigenvalues.iter().all(|l| l.norm() < 1.0)
    }

    /// The assembled matrix `V diag(eigenvalues) V^-1`.
    pub fn matrix(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        let d = scaled.dim();
        for r in 0..d {
            for c in 0..d {
                scaled[(r, c)] *= self.eigenvalues[c];
            }
        }
        scaled.matmul(&self.vectors_inv)
    }

    fn apply_diagonal(&self, x: &State, invert: bool) -> Result<State> {
        x.check_dim(self.dim())?;
        let modal: Vec<Wide> = if self.diagonal {
            x.coords().to_vec()
        } else {
            self.vectors_inv.mul_wide(x.coords())
        };
        let scaled: Vec<Wide> = modal
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &l)| {
                if invert {
                    *c / Wide::from(l)
                } else {
                    *c * l
                }
            })
            .collect();
        let out = if self.diagonal {
            scaled
        } else {
            self.vectors.mul_wide(&scaled)
        };
        State::new(out)
    }

    /// `A^-1 x`.
    pub fn step_inverse(&self, x: &State) -> Result<State> {
        self.apply_diagonal(x, true)
    }
}

impl DiscreteMap for DiscreteLinearSystem {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn step(&self, x: &State) -> Result<State> {
        self.apply_diagonal(x, false)
    }
}

/// Coordinatewise monotone cubic `h(x) = x + c x^3` with `c >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicConjugacy {
    cubic: f64,
}

/// Below this modulus `c x^3` is far under one ulp of `x`, so `h` is the identity.
const CUBIC_NEGLIGIBLE: f64 = 1e-60;

impl CubicConjugacy {
    pub fn new(cubic: f64) -> Result<Self> {
        if !(cubic.is_finite() && cubic >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "cubic coefficient must be finite and nonnegative, got {cubic}"
            )));
        }
        Ok(CubicConjugacy { cubic })
    }

    pub fn cubic(&self) -> f64 {
        self.cubic
    }

    pub fn forward_f64(&self, x: f64) -> f64 {
        x + self.cubic * x * x * x
    }

    fn derivative(&self, x: f64) -> f64 {
        1.0 + 3.0 * self.cubic * x * x
    }

    /// Solves `h(x) = y` by safeguarded Newton iteration with a bisection fallback.
    pub fn inverse_f64(&self, y: f64) -> f64 {
        if self.cubic == 0.0 || y == 0.0 {
            return y;
        }
        let (mut lo, mut hi) = if y > 0.0 {
            (0.0, y.min(libm::cbrt(y / self.cubic)))
        } else {
            (y.max(libm::cbrt(y / self.cubic)), 0.0)
        };
        // h(x) <= y at lo and >= y at hi; widen hi/lo to be safe against rounding
        if self.forward_f64(hi) < y {
            hi = y;
        }
        if self.forward_f64(lo) > y {
            lo = y;
        }
        let mut x = 0.5 * (lo + hi);
        let tol = 1e-14 * y.abs();
        for _ in 0..200 {
            let r = self.forward_f64(x) - y;
            if r == 0.0 {
                return x;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - r / self.derivative(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == x || (r.abs() <= tol && (next - x).abs() <= f64::EPSILON * x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    fn apply(&self, x: Wide, coordinate: usize, inverse: bool) -> Result<Wide> {
        if x.im() != 0.0 {
            return Err(Error::KindMismatch("cubic conjugacy acts on real coordinates"));
        }
        if x.abs() < CUBIC_NEGLIGIBLE {
            return Ok(x);
        }
        let v = x.re();
        let out = if inverse {
            self.inverse_f64(v)
        } else {
            self.forward_f64(v)
        };
        if !out.is_finite() {
            return Err(Error::NonFinite { coordinate });
        }
        Ok(Wide::from_real(out))
    }

    pub fn forward(&self, x: &State) -> Result<State> {
        let coords = x
            .coords()
            .iter()
            .enumerate()
            .map(|(i, &c)| self.apply(c, i, false))
            .collect::<Result<Vec<_>>>()?;
        State::new(coords)
    }

    pub fn inverse(&self, y: &State) -> Result<State> {
        let coords = y
            .coords()
            .iter()
            .enumerate()
            .map(|(i, &c)| self.apply(c, i, true))
            .collect::<Result<Vec<_>>>()?;
        State::new(coords)
    }
}

/// `Phi = h^-1 o A o h`, a nonlinear map conjugate to a linear one by construction.
///
/// `scale` holds the coordinatewise factors of `g`, which maps `h(domain)` into the
/// open unit cube.
#[derive(Debug, Clone)]
pub struct ConjugateNonlinearSystem {
    base: DiscreteLinearSystem,
    conjugacy: CubicConjugacy,
    domain: Vec<(f64, f64)>,
    scale: Vec<f64>,
}

impl ConjugateNonlinearSystem {
    pub fn new(
        base: DiscreteLinearSystem,
        conjugacy: CubicConjugacy,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if domain.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: domain.len(),
            });
        }
        let mut scale = Vec::with_capacity(domain.len());
        for &(lo, hi) in &domain {
            if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && hi > 0.0) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "domain interval [{lo}, {hi}] must contain the fixed point 0 in its interior"
                )));
            }
            let reach = conjugacy
                .forward_f64(lo)
                .abs()
                .max(conjugacy.forward_f64(hi).abs());
            scale.push(1.0 / (1.01 * reach));
        }
        Ok(ConjugateNonlinearSystem {
            base,
            conjugacy,
            domain,
            scale,
        })
    }

    pub fn base(&self) -> &DiscreteLinearSystem {
        &self.base
    }

    pub fn conjugacy(&self) -> &CubicConjugacy {
        &self.conjugacy
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Eigenvectors of the linear map in the scaled coordinates `g(h(x))`.
    pub fn scaled_eigenvectors(&self) -> CMatrix {
        let mut v = self.base.eigenvectors().clone();
        for r in 0..v.dim() {
            for c in 0..v.dim() {
                v[(r, c)] *= self.scale[r];
            }
        }
        v
    }

    pub fn in_domain(&self, x: &State) -> bool {
        x.coords()
            .iter()
            .zip(&self.domain)
            .all(|(c, &(lo, hi))| c.im() == 0.0 && c.re() >= lo && c.re() <= hi)
    }

    /// The scaling `g`, coordinatewise multiplication onto the unit cube.
    pub fn scaling(&self, y: &State) -> Result<State> {
        y.check_dim(self.dim())?;
        State::new(
            y.coords()
                .iter()
                .zip(&self.scale)
                .map(|(c, &s)| *c * s)
                .collect(),
        )
    }
}

impl DiscreteMap for ConjugateNonlinearSystem {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn step(&self, x: &State) -> Result<State> {
        x.check_dim(self.dim())?;
        let y = self.conjugacy.forward(x)?;
        let ay = self.base.step(&y)?;
        self.conjugacy.inverse(&ay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub direction: Direction,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `x0, Phi(x0), ..., Phi^n(x0)`.
pub fn trajectory<M: DiscreteMap + ?Sized>(system: &M, x0: &State, n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidParameter("trajectory length n must be >= 1".into()));
    }
    x0.check_dim(system.dim())?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    for k in 1..=n {
        let next = system.step(&states[k - 1]).map_err(|e| e.at_step(k))?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        direction: Direction::Forward,
    })
}

/// `x0, A^-1 x0, ..., A^-n x0` under the default `1e150` modulus guard.
pub fn inverse_trajectory(
    system: &DiscreteLinearSystem,
    x0: &State,
    n: usize,
) -> Result<Trajectory> {
    inverse_trajectory_guarded(system, x0, n, DEFAULT_GUARD_LOG10)
}

/// Inverse iteration aborting once any coordinate modulus exceeds `10^guard_log10`.
pub fn inverse_trajectory_guarded(
    system: &DiscreteLinearSystem,
    x0: &State,
    n: usize,
    guard_log10: f64,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidParameter("trajectory length n must be >= 1".into()));
    }
    x0.check_dim(system.dim())?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    for k in 1..=n {
        let next = system.step_inverse(&states[k - 1]).map_err(|e| e.at_step(k))?;
        let peak = next
            .coords()
            .iter()
            .map(Wide::log10_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        if peak > guard_log10 {
            return Err(Error::OverflowGuard {
                step: k,
                log10_magnitude: peak,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        direction: Direction::Inverse,
    })
}

/// Planar flow `x' = rho(s) x, s' = 1` with a finite Fourier series for `rho`.
///
/// `rho(s) = rho_star + sum_j cos[j-1] cos(j s) + sin[j-1] sin(j s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycleFlow {
    rho_star: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

pub fn reduce_angle(s: f64) -> f64 {
    let mut r = libm::fmod(s, TAU);
    if r < 0.0 {
        r += TAU;
    }
    // tiny negative input rounds up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl LimitCycleFlow {
    pub fn new(rho_star: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !rho_star.is_finite() || rho_star >= 0.0 {
            return Err(Error::UnstableCycle { rho_star });
        }
        if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Fourier coefficient".into()));
        }
        Ok(LimitCycleFlow { rho_star, cos, sin })
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[f64] {
        &self.sin
    }

    pub fn rho(&self, s: f64) -> f64 {
        let mut acc = self.rho_star;
        for (j, a) in self.cos.iter().enumerate() {
            acc += a * libm::cos((j + 1) as f64 * s);
        }
        for (j, b) in self.sin.iter().enumerate() {
            acc += b * libm::sin((j + 1) as f64 * s);
        }
        acc
    }

    /// `xi(s) = int_0^s (rho - rho_star)`, from the closed-form antiderivative.
    pub fn xi(&self, s: f64) -> f64 {
        let s = reduce_angle(s);
        let mut acc = 0.0;
        for (j, a) in self.cos.iter().enumerate() {
            let w = (j + 1) as f64;
            acc += a / w * libm::sin(w * s);
        }
        for (j, b) in self.sin.iter().enumerate() {
            let w = (j + 1) as f64;
            acc += b / w * (1.0 - libm::cos(w * s));
        }
        acc
    }

    /// Exact flow map applied to `(x, s)`.
    pub fn flow(&self, x: Wide, s: f64, t: f64) -> (Wide, f64) {
        let s0 = reduce_angle(s);
        let s1 = reduce_angle(s0 + t);
        let growth = self.rho_star * t + self.xi(s1) - self.xi(s0);
        (x * Wide::exp(Complex64::new(growth, 0.0)), s1)
    }

    pub fn state(x: f64, s: f64) -> Result<State> {
        State::from_real(&[x, reduce_angle(s)])
    }
}

/// Samples the limit-cycle flow at each time of a nondecreasing grid starting at `t >= 0`.
pub fn flow_sample(flow: &LimitCycleFlow, x0: f64, s0: f64, t_grid: &[f64]) -> Result<Vec<State>> {
    if t_grid.is_empty() {
        return Err(Error::Empty("time grid"));
    }
    if !x0.is_finite() || !s0.is_finite() {
        return Err(Error::NonFinite { coordinate: 0 });
    }
    if !(t_grid[0] >= 0.0) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be finite and start at t >= 0".into()));
    }
    if let Some(i) = t_grid.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(alloc::format!(
            "time grid decreases at index {}",
            i + 1
        )));
    }
    let x = Wide::from_real(x0);
    t_grid
        .iter()
        .map(|&t| {
            let (xt, st) = flow.flow(x, s0, t);
            State::new(alloc::vec![xt, Wide::from_real(st)])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn diagonal_step() {
        let sys = DiscreteLinearSystem::diagonal(&[c(0.9), c(0.5)]).unwrap();
        let x = State::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(sys.step(&x).unwrap().to_complex(), [c(0.9), c(0.5)]);
    }

    #[test]
    fn non_normal_step_matches_hand_product() {
        // A = V diag(0.9, 0.5) V^-1 = [[0.9, -0.4], [0, 0.5]], so A (1, 1) = (0.5, 0.5).
        let v = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let sys = DiscreteLinearSystem::new(alloc::vec![c(0.9), c(0.5)], v).unwrap();
        let a = sys.matrix();
        let want = CMatrix::from_real_rows(&[&[0.9, -0.4], &[0.0, 0.5]]).unwrap();
        assert!(a.max_abs_diff(&want) < 1e-15);
        let x = State::from_real(&[1.0, 1.0]).unwrap();
        let y = sys.step(&x).unwrap().to_complex();
        assert!((y[0] - c(0.5)).norm() < 1e-15 && (y[1] - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn conjugate_preserves_fixed_point() {
        let base = DiscreteLinearSystem::diagonal(&[c(0.5)]).unwrap();
        let sys = ConjugateNonlinearSystem::new(
            base,
            CubicConjugacy::new(1.0).unwrap(),
            alloc::vec![(-0.5, 0.5)],
        )
        .unwrap();
        let zero = State::from_real(&[0.0]).unwrap();
        assert_eq!(sys.step(&zero).unwrap(), zero);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sys = DiscreteLinearSystem::diagonal(&[c(0.9), c(0.5)]).unwrap();
        let x = State::from_real(&[1.0]).unwrap();
        assert_eq!(
            sys.step(&x),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn overflowing_conjugacy_names_coordinate() {
        let base = DiscreteLinearSystem::diagonal(&[c(0.5), c(0.5)]).unwrap();
        let sys = ConjugateNonlinearSystem::new(
            base,
            CubicConjugacy::new(1.0).unwrap(),
            alloc::vec![(-0.5, 0.5), (-0.5, 0.5)],
        )
        .unwrap();
        let x = State::from_real(&[0.1, 1e120]).unwrap();
        assert_eq!(sys.step(&x), Err(Error::NonFinite { coordinate: 1 }));
    }

    #[test]
    fn cubic_inverse_residual() {
        let h = CubicConjugacy::new(1.0).unwrap();
        for y in [-2.0, -0.3, 1e-9, 0.125, 0.6, 7.5, 1e30] {
            let x = h.inverse_f64(y);
            assert!((h.forward_f64(x) - y).abs() <= 1e-14 * y.abs(), "y = {y}");
        }
    }

    #[test]
    fn unstable_cycle_rejected() {
        assert!(matches!(
            LimitCycleFlow::new(0.0, alloc::vec![], alloc::vec![]),
            Err(Error::UnstableCycle { .. })
        ));
    }

    #[test]
    fn angle_reduction_stays_in_range() {
        for s in [-1e-300, -TAU, TAU, 3.0 * TAU + 0.1, -0.5] {
            let r = reduce_angle(s);
            assert!((0.0..TAU).contains(&r), "{s} -> {r}");
        }
    }
}
