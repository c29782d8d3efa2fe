//! Laplace averages along trajectories and the recursive peel-off that turns them
//! into spectral projections.
//!
//! Averages use `k = 0 .. n-1`, so a single-sample average returns `f(x0)`.
//! A projection is always a scalar: the value `P_lambda f(x0)` at the base point.
//!
//! # Peel-off
//!
//! For a target eigenvalue every circle of strictly larger modulus is processed
//! first, in descending order, on one residual copy of the sample vector. Each
//! member of a circle is averaged against the residual as it stood before that
//! circle, and then all members whose estimate is distinguishable from zero are
//! subtracted as `estimate * mu^k`. Subtracting a value that is pure averaging
//! error would inject a component growing like `(|mu|/|lambda|)^k` into
//! everything below it, so a member is subtracted only when its average over the
//! second half of the samples exceeds that half's own bound. Lower circles have
//! decayed by then, which keeps the test sharp when components of mixed sign
//! make the full-range bound optimistic.
//!
//! # Error bounds
//!
//! [`GlaResult::cesaro_bound`] is the sum of two terms:
//!
//! * contamination from the next-lower circle at ratio `r = r_next / r_target`:
//!   `(1/n) * 1/(1 - r) * sup_k |lambda^-k residual_k|`;
//! * what every upper circle leaves behind, amplified by the Laplace kernel
//!   `(1/n) sum_k |mu/lambda|^k`: the bound `B_mu` of a subtracted estimate, or
//!   `|estimate| + B_mu` for a component that was treated as zero.
//!
//! The second term grows geometrically in `n` whenever an upper circle is not
//! resolved exactly, which is the honest accuracy of a finite-sample recursion.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::dynsys::{inverse_trajectory_guarded, trajectory, DiscreteLinearSystem, DiscreteMap, State, DEFAULT_GUARD_LOG10};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::spectra::{CircleDecomposition, LatticeIndex};
use crate::wide::Wide;

/// Weighted terms beyond this modulus are reported as an overflow.
const TERM_LIMIT: f64 = 1e300;
/// Re-anchor running powers with an exact power every this many steps.
const RENORMALIZE_EVERY: usize = 64;
/// Relative slack when comparing an estimate against its own bound.
const GATE_SLACK: f64 = 1e-9;
/// Continuous averages abort once partial averages grow beyond this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

type Evaluator = dyn Fn(&State) -> Result<Wide> + Send + Sync;

/// A complex-valued function on state space.
#[derive(Clone)]
pub struct Observable {
    evaluator: Arc<Evaluator>,
    label: String,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("label", &self.label).finish()
    }
}

impl Observable {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&State) -> Result<Wide> + Send + Sync + 'static,
    {
        Observable {
            evaluator: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &State) -> Result<Wide> {
        (self.evaluator)(x)
    }

    pub fn constant(c: Complex64) -> Self {
        let w = Wide::from(c);
        Observable::new(alloc::format!("{c}"), move |_| Ok(w))
    }

    pub fn zero() -> Self {
        Observable::new("0", |_| Ok(Wide::ZERO))
    }

    /// `sum_i c_i f_i`, evaluated in the given order.
    pub fn linear_combination(terms: &[(Complex64, Observable)]) -> Self {
        let terms: Vec<(Wide, Observable)> =
            terms.iter().map(|(c, f)| (Wide::from(*c), f.clone())).collect();
        let label = terms
            .iter()
            .map(|(c, f)| alloc::format!("({})*{}", c.to_complex(), f.label()))
            .collect::<Vec<_>>()
            .join(" + ");
        Observable::new(label, move |x| {
            let mut acc = Wide::ZERO;
            for (c, f) in &terms {
                acc += *c * f.eval(x)?;
            }
            Ok(acc)
        })
    }

    pub fn product(&self, other: &Observable) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Observable::new(alloc::format!("({})*({})", a.label, b.label), move |x| {
            Ok(a.eval(x)? * b.eval(x)?)
        })
    }
}

/// One circle member processed before the target.
#[derive(Debug, Clone, PartialEq)]
pub struct PeelStep {
    pub index: LatticeIndex,
    pub eigenvalue: Complex64,
    pub estimate: Complex64,
    pub bound: f64,
    /// False when the estimate was within its bound and treated as zero.
    pub subtracted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlaResult {
    pub eigenvalue: Complex64,
    pub value: Complex64,
    pub n: usize,
    /// `None` when a circle shares the target modulus without containing it.
    pub cesaro_bound: Option<f64>,
    pub peel_trace: Vec<PeelStep>,
}

/// What to project onto.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Index(LatticeIndex),
    /// An arbitrary complex number, typically a non-eigenvalue between circles.
    Probe(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Forward iteration, weights `lambda^-k`, circles by decreasing modulus.
    Forward,
    /// Inverse iteration, weights `lambda^k`, circles by increasing modulus.
    Inverse,
}

/// Running powers `z^0, z^1, ...` by multiplication, re-anchored with an exact
/// power every 64 steps to bound drift.
struct Powers {
    base: Wide,
    current: Wide,
    k: usize,
}

impl Powers {
    fn new(base: Wide) -> Self {
        Powers {
            base,
            current: Wide::ONE,
            k: 0,
        }
    }

    fn next(&mut self) -> Wide {
        let out = self.current;
        self.k += 1;
        self.current = if self.k.is_multiple_of(RENORMALIZE_EVERY) {
            self.base.powu(self.k as u64)
        } else {
            self.current * self.base
        };
        out
    }
}

struct Detail {
    value: Complex64,
    /// `sup_k |lambda^-k sample_k|`
    sup: f64,
    /// Average and sup over the second half `k >= n/2` only.
    tail_value: Complex64,
    tail_sup: f64,
}

fn laplace_detailed(samples: &[Wide], lambda: Complex64) -> Result<Detail> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if lambda.norm() == 0.0 || !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::ZeroLambda);
    }
    // dividing by lambda^k keeps the rounding of 1/lambda out of the exponent
    let mut powers = Powers::new(Wide::from(lambda));
    let half = samples.len() / 2;
    let mut acc = KahanSum::new();
    let mut tail = KahanSum::new();
    let mut sup = 0.0f64;
    let mut tail_sup = 0.0f64;
    for (k, s) in samples.iter().enumerate() {
        let p = powers.next();
        let term = (*s / p)
            .to_finite_complex()
            .filter(|t| t.norm() <= TERM_LIMIT)
            .ok_or(Error::WeightOverflow { step: k })?;
        sup = sup.max(term.norm());
        acc.add(term);
        if k >= half {
            tail_sup = tail_sup.max(term.norm());
            tail.add(term);
        }
    }
    let value = acc.value() / samples.len() as f64;
    let tail_value = tail.value() / (samples.len() - half) as f64;
    if !(value.re.is_finite() && value.im.is_finite() && tail_value.re.is_finite() && tail_value.im.is_finite()) {
        return Err(Error::WeightOverflow {
            step: samples.len() - 1,
        });
    }
    Ok(Detail {
        value,
        sup,
        tail_value,
        tail_sup,
    })
}

/// `n^-1 sum_{k<n} lambda^-k samples[k]`, compensated and in index order.
pub fn laplace_average(samples: &[Wide], lambda: Complex64) -> Result<Complex64> {
    laplace_detailed(samples, lambda).map(|d| d.value)
}

/// Subtracts `value * mu^k` from `samples[k]` for each `(mu, value)` in order.
pub fn peel_residual(samples: &[Wide], peel: &[(Complex64, Complex64)]) -> Vec<Wide> {
    let mut residual = samples.to_vec();
    subtract_components(&mut residual, peel.iter().copied());
    residual
}

fn subtract_components(residual: &mut [Wide], peel: impl IntoIterator<Item = (Complex64, Complex64)>) {
    for (mu, value) in peel {
        if value.norm() == 0.0 {
            continue;
        }
        let c = Wide::from(value);
        let mut powers = Powers::new(Wide::from(mu));
        for r in residual.iter_mut() {
            *r -= c * powers.next();
        }
    }
}

/// Laplace average at `lambda` after removing known components `(mu, P_mu f(x0))`.
pub fn project_peeled(
    samples: &[Wide],
    lambda: Complex64,
    peel: &[(Complex64, Complex64)],
) -> Result<Complex64> {
    laplace_average(&peel_residual(samples, peel), lambda)
}

/// `(1/n) sum_{k<n} q^k` for `q >= 0`, saturating to infinity.
fn kernel_mass(q: f64, n: usize) -> f64 {
    let nf = n as f64;
    if (q - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    if q < 1.0 || nf * libm::log(q) < 700.0 {
        return (libm::pow(q, nf) - 1.0) / (nf * (q - 1.0));
    }
    let log = nf * libm::log(q) - libm::log(nf) - libm::log(q - 1.0);
    if log > 700.0 {
        f64::INFINITY
    } else {
        libm::exp(log)
    }
}

/// `(1/m) sum_{k=h}^{h+m-1} q^k`, saturating to infinity.
fn tail_kernel_mass(q: f64, h: usize, m: usize) -> f64 {
    let mass = kernel_mass(q, m);
    if h == 0 || mass == 0.0 {
        return mass;
    }
    let log = h as f64 * libm::log(q) + libm::log(mass);
    if log > 700.0 {
        f64::INFINITY
    } else {
        libm::exp(log)
    }
}

fn lower_term(sup: f64, ratio: f64, n: usize) -> f64 {
    sup / (n as f64 * (1.0 - ratio))
}

struct EffMember {
    index: LatticeIndex,
    eigenvalue: Complex64,
    /// Eigenvalue of the iterated map: `mu` forward, `1/mu` inverse.
    effective: Complex64,
}

struct EffCircle {
    radius: f64,
    members: Vec<EffMember>,
}

fn effective_circles(decomposition: &CircleDecomposition, order: Order) -> Vec<EffCircle> {
    let mut circles: Vec<EffCircle> = decomposition
        .circles()
        .iter()
        .map(|c| EffCircle {
            radius: match order {
                Order::Forward => c.radius,
                Order::Inverse => 1.0 / c.radius,
            },
            members: c
                .members
                .iter()
                .map(|m| EffMember {
                    index: m.index.clone(),
                    eigenvalue: m.value,
                    effective: match order {
                        Order::Forward => m.value,
                        Order::Inverse => m.value.inv(),
                    },
                })
                .collect(),
        })
        .collect();
    if order == Order::Inverse {
        circles.reverse();
    }
    circles
}

struct Estimate {
    value: Complex64,
    bound: f64,
    /// Whether the second-half average clears its own bound.
    significant: bool,
}

/// Peel-off state shared by single projections and sweeps.
struct Peeler {
    residual: Vec<Wide>,
    trace: Vec<PeelStep>,
    /// `(|effective|, bound)` on what every processed component leaves in the residual.
    carried: Vec<(f64, f64)>,
    n: usize,
}

impl Peeler {
    fn new(samples: &[Wide]) -> Self {
        Peeler {
            residual: samples.to_vec(),
            trace: Vec::new(),
            carried: Vec::new(),
            n: samples.len(),
        }
    }

    fn estimate(&self, effective: Complex64, next_radius: Option<f64>) -> Result<Estimate> {
        let d = laplace_detailed(&self.residual, effective)?;
        let target = effective.norm();
        let ratio = next_radius.map_or(0.0, |r| r / target);
        let half = self.n / 2;
        let mut bound = lower_term(d.sup, ratio, self.n);
        let mut tail_bound = lower_term(d.tail_sup, ratio, self.n - half);
        for &(radius, b) in &self.carried {
            if b > 0.0 {
                let q = radius / target;
                bound += b * kernel_mass(q, self.n);
                tail_bound += b * tail_kernel_mass(q, half, self.n - half);
            }
        }
        // lower circles die out over the first half, so the second half tells a
        // real component from contamination even when the full bound is loose
        let significant = tail_bound.is_finite() && d.tail_value.norm() > tail_bound * (1.0 + GATE_SLACK);
        Ok(Estimate {
            value: d.value,
            bound,
            significant,
        })
    }

    fn peel_circle(&mut self, circle: &EffCircle, next_radius: Option<f64>) -> Result<Vec<Estimate>> {
        let estimates = circle
            .members
            .iter()
            .map(|m| self.estimate(m.effective, next_radius))
            .collect::<Result<Vec<_>>>()?;
        let mut removals = Vec::new();
        for (m, e) in circle.members.iter().zip(&estimates) {
            let subtracted = e.significant;
            if subtracted {
                removals.push((m.effective, e.value));
                self.carried.push((m.effective.norm(), e.bound));
            } else {
                // the true component may still be up to |estimate| + bound
                self.carried.push((m.effective.norm(), e.value.norm() + e.bound));
            }
            self.trace.push(PeelStep {
                index: m.index.clone(),
                eigenvalue: m.eigenvalue,
                estimate: e.value,
                bound: e.bound,
                subtracted,
            });
        }
        subtract_components(&mut self.residual, removals);
        Ok(estimates)
    }
}

/// Projection of sampled data: `samples[k] = f(Phi^k x0)` (forward) or
/// `f(Phi^-k x0)` (inverse).
pub fn project_samples(
    samples: &[Wide],
    target: &Target,
    decomposition: &CircleDecomposition,
    order: Order,
) -> Result<GlaResult> {
    let circles = effective_circles(decomposition, order);
    let tol = decomposition.tolerance();

    // (eigenvalue, effective eigenvalue, number of circles to peel, level circle present)
    let (eigenvalue, effective, peel_count, level) = match target {
        Target::Index(index) => {
            let (pos, member) = circles
                .iter()
                .enumerate()
                .find_map(|(ci, c)| c.members.iter().find(|m| &m.index == index).map(|m| (ci, m)))
                .ok_or_else(|| Error::TargetNotInLattice(alloc::format!("{index}")))?;
            (member.eigenvalue, member.effective, pos, false)
        }
        Target::Probe(lambda) => {
            if lambda.norm() == 0.0 {
                return Err(Error::ZeroLambda);
            }
            let effective = match order {
                Order::Forward => *lambda,
                Order::Inverse => lambda.inv(),
            };
            let r = effective.norm();
            let peel_count = circles.iter().take_while(|c| c.radius > r * (1.0 + tol)).count();
            let level = circles
                .get(peel_count)
                .is_some_and(|c| c.radius >= r * (1.0 - tol));
            (*lambda, effective, peel_count, level)
        }
    };

    let mut peeler = Peeler::new(samples);
    for (i, circle) in circles[..peel_count].iter().enumerate() {
        let next = circles.get(i + 1).map(|c| c.radius);
        peeler.peel_circle(circle, next)?;
    }
    let next = if level {
        None
    } else {
        let skip = match target {
            Target::Index(_) => peel_count + 1,
            Target::Probe(_) => peel_count,
        };
        circles.get(skip).map(|c| c.radius)
    };
    let est = peeler.estimate(effective, next)?;
    Ok(GlaResult {
        eigenvalue,
        value: est.value,
        n: samples.len(),
        cesaro_bound: (!level).then_some(est.bound),
        peel_trace: peeler.trace,
    })
}

/// `f(x0), f(Phi x0), ..., f(Phi^{n-1} x0)`.
pub fn forward_samples<M: DiscreteMap + ?Sized>(
    system: &M,
    f: &Observable,
    x0: &State,
    n: usize,
) -> Result<Vec<Wide>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count n must be >= 1".into()));
    }
    let states = if n == 1 {
        alloc::vec![x0.clone()]
    } else {
        trajectory(system, x0, n - 1)?.states
    };
    states
        .iter()
        .enumerate()
        .map(|(k, x)| f.eval(x).map_err(|e| e.at_step(k)))
        .collect()
}

/// `f(x0), f(A^-1 x0), ..., f(A^-(n-1) x0)` under an inverse-iteration guard.
pub fn inverse_samples(
    system: &DiscreteLinearSystem,
    f: &Observable,
    x0: &State,
    n: usize,
    guard_log10: f64,
) -> Result<Vec<Wide>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count n must be >= 1".into()));
    }
    let states = if n == 1 {
        alloc::vec![x0.clone()]
    } else {
        inverse_trajectory_guarded(system, x0, n - 1, guard_log10)?.states
    };
    states
        .iter()
        .enumerate()
        .map(|(k, x)| f.eval(x).map_err(|e| e.at_step(k)))
        .collect()
}

/// Projection of `f` onto the eigenspace of `target`, evaluated at `x0`.
pub fn gla_project<M: DiscreteMap + ?Sized>(
    system: &M,
    f: &Observable,
    x0: &State,
    target: &Target,
    decomposition: &CircleDecomposition,
    n: usize,
) -> Result<GlaResult> {
    let samples = forward_samples(system, f, x0, n)?;
    project_samples(&samples, target, decomposition, Order::Forward)
}

/// Inverse-iteration projection with the default `1e150` guard.
pub fn inverse_gla(
    system: &DiscreteLinearSystem,
    f: &Observable,
    x0: &State,
    target: &Target,
    decomposition: &CircleDecomposition,
    n: usize,
) -> Result<GlaResult> {
    inverse_gla_guarded(system, f, x0, target, decomposition, n, DEFAULT_GUARD_LOG10)
}

/// Inverse-iteration projection: averages `lambda^k f(A^-k x0)` after peeling
/// every circle of smaller modulus, smallest first.
pub fn inverse_gla_guarded(
    system: &DiscreteLinearSystem,
    f: &Observable,
    x0: &State,
    target: &Target,
    decomposition: &CircleDecomposition,
    n: usize,
    guard_log10: f64,
) -> Result<GlaResult> {
    let samples = inverse_samples(system, f, x0, n, guard_log10)?;
    project_samples(&samples, target, decomposition, Order::Inverse)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub index: LatticeIndex,
    pub result: GlaResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub entries: Vec<SweepEntry>,
    /// `sup_k |f_k - sum_gamma value_gamma gamma^k|` over all returned projections.
    pub reconstruction_residual: f64,
}

/// Projections onto every lattice eigenvalue in one descending pass over circles.
pub fn sweep_samples(
    samples: &[Wide],
    decomposition: &CircleDecomposition,
    order: Order,
) -> Result<Sweep> {
    let circles = effective_circles(decomposition, order);
    let mut peeler = Peeler::new(samples);
    let mut entries = Vec::new();
    let mut all = Vec::new();
    for (i, circle) in circles.iter().enumerate() {
        let next = circles.get(i + 1).map(|c| c.radius);
        let trace_before = peeler.trace.clone();
        let estimates = peeler.peel_circle(circle, next)?;
        for (m, e) in circle.members.iter().zip(estimates) {
            all.push((m.effective, e.value));
            entries.push(SweepEntry {
                index: m.index.clone(),
                result: GlaResult {
                    eigenvalue: m.eigenvalue,
                    value: e.value,
                    n: samples.len(),
                    cesaro_bound: Some(e.bound),
                    peel_trace: trace_before.clone(),
                },
            });
        }
    }
    let reconstruction_residual = peel_residual(samples, &all)
        .iter()
        .map(Wide::abs)
        .fold(0.0, f64::max);
    Ok(Sweep {
        entries,
        reconstruction_residual,
    })
}

pub fn gla_sweep<M: DiscreteMap + ?Sized>(
    system: &M,
    f: &Observable,
    x0: &State,
    decomposition: &CircleDecomposition,
    n: usize,
) -> Result<Sweep> {
    let samples = forward_samples(system, f, x0, n)?;
    sweep_samples(&samples, decomposition, Order::Forward)
}

/// `alpha^-1 int_0^alpha e^{-t * lambda_exponent} f(t) dt` by the composite
/// trapezoid rule on a uniform grid starting at `t = 0`.
pub fn continuous_laplace_average(
    flow_samples: &[(f64, Wide)],
    lambda_exponent: Complex64,
) -> Result<Complex64> {
    if flow_samples.len() < 2 {
        return Err(Error::Empty("continuous average needs at least two samples"));
    }
    if flow_samples[0].0 != 0.0 {
        return Err(Error::InvalidParameter("time grid must start at t = 0".into()));
    }
    let dt = flow_samples[1].0 - flow_samples[0].0;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonUniformGrid { index: 1 });
    }
    for (j, w) in flow_samples.windows(2).enumerate() {
        let step = w[1].0 - w[0].0;
        if (step - dt).abs() > 1e-9 * dt + 4.0 * f64::EPSILON * w[1].0.abs() {
            return Err(Error::NonUniformGrid { index: j + 1 });
        }
    }

    let weighted = |t: f64, f: Wide| -> Result<Complex64> {
        (Wide::exp(-lambda_exponent * t) * f)
            .to_finite_complex()
            .filter(|z| z.norm() <= TERM_LIMIT)
            .ok_or(Error::TargetBelowGrowth { time: t })
    };

    let first = weighted(flow_samples[0].0, flow_samples[0].1)?;
    let reference = first.norm().max(f64::MIN_POSITIVE);
    let mut acc = KahanSum::new();
    let mut prev = first;
    let mut prev_avg = first.norm();
    for &(t, f) in &flow_samples[1..] {
        let g = weighted(t, f)?;
        acc.add((prev + g) * 0.5);
        prev = g;
        let partial = (acc.value() * dt / t).norm();
        if partial > DIVERGENCE_FACTOR * reference && partial >= prev_avg {
            return Err(Error::TargetBelowGrowth { time: t });
        }
        prev_avg = partial;
    }
    let alpha = flow_samples[flow_samples.len() - 1].0;
    Ok(acc.value() * dt / alpha)
}
