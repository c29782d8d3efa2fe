//! Experiment execution: samples once per start point, projections for every
//! `(target, n)` on prefixes of those samples.

use std::fmt;
use std::sync::Arc;

use gla_core::analytic::{EigenfunctionFamily, Expansion};
use gla_core::dynsys::{flow_sample, DiscreteMap, LimitCycleFlow, State};
use gla_core::gla::{
    continuous_laplace_average, forward_samples, inverse_samples, project_samples, sweep_samples, Observable, Order,
    Target,
};
use gla_core::hardy::{poly_eval, poly_eval_on_cycle, spectral_projection, BorelRegion, RingPolynomial};
use gla_core::spectra::{decompose_circles, CircleDecomposition, EigenvalueLattice, LatticeIndex};
use gla_core::{Complex64, Wide};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode, ObservableSpec, SystemSpec, Targets};

/// Slack added to the Cesàro bound when checking rows against the oracle.
pub const VERIFY_SLACK: f64 = 1e-10;

#[derive(Debug)]
pub enum RunError {
    Validation(Vec<String>),
    Numeric(String),
    Io(String),
    Verify { failures: usize, checked: usize },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io(_) | RunError::Verify { .. } => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(errors) => {
                writeln!(f, "invalid configuration ({} error(s)):", errors.len())?;
                for e in errors {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            RunError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            RunError::Io(msg) => write!(f, "io error: {msg}"),
            RunError::Verify { failures, checked } => {
                write!(f, "verification failed: {failures} of {checked} checked rows exceed their bound")
            }
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone)]
pub struct TargetInfo {
    pub label: String,
    pub target: Target,
    pub eigenvalue: Complex64,
}

/// One projection: target, start point, sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub target: usize,
    pub x0_id: usize,
    pub n: usize,
    pub value: Complex64,
    pub oracle: Complex64,
    pub cesaro_bound: Option<f64>,
}

impl Row {
    pub fn abs_err(&self) -> f64 {
        (self.value - self.oracle).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub x0_id: usize,
    pub n: usize,
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub sweeps: Vec<SweepRecord>,
}

enum Oracle {
    Expansion(Expansion),
    Polynomial(RingPolynomial),
    Zero,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub lattice: EigenvalueLattice,
    pub decomposition: CircleDecomposition,
    pub targets: Vec<TargetInfo>,
    family: Arc<EigenfunctionFamily>,
    observable: Observable,
    oracle: Oracle,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Experiment, RunError> {
        let invalid = |path: &str, e: gla_core::Error| RunError::Validation(vec![format!("{path}: {e}")]);
        let lattice = config
            .system
            .lattice(config.truncation)
            .map_err(|e| invalid("$.truncation", e))?;
        let decomposition =
            decompose_circles(&lattice, config.grouping_tolerance).map_err(|e| invalid("$.truncation", e))?;
        let family = Arc::new(match &config.system {
            SystemSpec::Linear(s) => EigenfunctionFamily::linear(s).map_err(|e| invalid("$.system", e))?,
            SystemSpec::Conjugate(s) => EigenfunctionFamily::conjugate(s).map_err(|e| invalid("$.system", e))?,
            SystemSpec::LimitCycle(f) => EigenfunctionFamily::limit_cycle(f),
        });

        let targets = match &config.targets {
            Targets::All => decomposition
                .circles()
                .iter()
                .flat_map(|c| &c.members)
                .map(|m| TargetInfo {
                    label: m.index.to_string(),
                    target: Target::Index(m.index.clone()),
                    eigenvalue: m.value,
                })
                .collect(),
            Targets::List(list) => list
                .iter()
                .map(|t| match t {
                    Target::Index(idx) => {
                        let value = lattice.value(idx).map_err(|e| invalid("$.targets", e))?;
                        Ok(TargetInfo {
                            label: idx.to_string(),
                            target: t.clone(),
                            eigenvalue: value,
                        })
                    }
                    Target::Probe(z) => Ok(TargetInfo {
                        label: format!("probe({},{})", z.re, z.im),
                        target: t.clone(),
                        eigenvalue: *z,
                    }),
                })
                .collect::<Result<_, RunError>>()?,
        };

        let (observable, oracle) = match &config.observable {
            ObservableSpec::Zero => (Observable::zero(), Oracle::Zero),
            ObservableSpec::Eigenfunctions(terms) => {
                let e = Expansion::new(Arc::clone(&family), terms.clone())
                    .map_err(|e| invalid("$.observable", e))?;
                (e.observable(), Oracle::Expansion(e))
            }
            ObservableSpec::Polynomial(p) => (
                polynomial_observable(p.clone(), &config.system, &family),
                Oracle::Polynomial(p.clone()),
            ),
        };

        Ok(Experiment {
            config,
            lattice,
            decomposition,
            targets,
            family,
            observable,
            oracle,
        })
    }
}

/// `p` evaluated at the eigen-coordinates of `x`.
fn polynomial_observable(p: RingPolynomial, system: &SystemSpec, family: &Arc<EigenfunctionFamily>) -> Observable {
    let label = format!("polynomial({} terms)", p.len());
    match system {
        SystemSpec::LimitCycle(flow) => {
            let flow = flow.clone();
            Observable::new(label, move |x| Ok(Wide::from(poly_eval_on_cycle(&p, &flow, x)?)))
        }
        _ => {
            let family = Arc::clone(family);
            let dim = system.dim();
            Observable::new(label, move |x| {
                let z = eigen_coordinates(&family, dim, x)?;
                Ok(Wide::from(poly_eval(&p, &z)?))
            })
        }
    }
}

fn eigen_coordinates(family: &EigenfunctionFamily, dim: usize, x: &State) -> gla_core::Result<State> {
    let coords = (0..dim)
        .map(|j| {
            let mut k = vec![0u32; dim];
            k[j] = 1;
            family.eval(&LatticeIndex::Multi(k), x)
        })
        .collect::<gla_core::Result<Vec<Wide>>>()?;
    State::new(coords)
}

impl Experiment {
    pub fn start_state(&self, point: &[f64]) -> gla_core::Result<State> {
        match &self.config.system {
            SystemSpec::LimitCycle(_) => LimitCycleFlow::state(point[0], point[1]),
            _ => State::from_real(point),
        }
    }

    /// Closed-form projection of the observable onto `target`'s eigenvalue at `x0`.
    pub fn oracle(&self, target: &TargetInfo, x0: &State) -> gla_core::Result<Complex64> {
        match &self.oracle {
            Oracle::Zero => Ok(Complex64::new(0.0, 0.0)),
            Oracle::Expansion(e) => e.target_projection(&target.target, x0),
            Oracle::Polynomial(p) => {
                let region = match &target.target {
                    Target::Index(idx) => BorelRegion::singleton(self.lattice.value(idx)?),
                    Target::Probe(z) => BorelRegion::singleton(*z),
                };
                let q = spectral_projection(p, &region, &self.lattice)?;
                match &self.config.system {
                    SystemSpec::LimitCycle(flow) => poly_eval_on_cycle(&q, flow, x0),
                    _ => poly_eval(&q, &eigen_coordinates(&self.family, self.config.system.dim(), x0)?),
                }
            }
        }
    }

    fn max_n(&self) -> usize {
        self.config.n.iter().copied().max().unwrap_or(1)
    }

    /// Discrete samples `f(Phi^{+-k} x0)`, `k < max n`.
    fn discrete_samples(&self, x0: &State) -> gla_core::Result<Vec<Wide>> {
        let n = self.max_n();
        let f = &self.observable;
        match (&self.config.system, self.config.mode) {
            (SystemSpec::Linear(s), Mode::Inverse) => {
                inverse_samples(s, f, x0, n, self.config.overflow_guard_log10)
            }
            (SystemSpec::Linear(s), _) => forward_samples(s as &dyn DiscreteMap, f, x0, n),
            (SystemSpec::Conjugate(s), _) => forward_samples(s as &dyn DiscreteMap, f, x0, n),
            (SystemSpec::LimitCycle(flow), _) => {
                // the time-1 map has the same lattice of eigenvalues
                let grid: Vec<f64> = (0..n).map(|k| k as f64).collect();
                let c = x0.to_complex();
                flow_sample(flow, c[0].re, c[1].re, &grid)?
                    .iter()
                    .map(|x| f.eval(x))
                    .collect()
            }
        }
    }

    /// `(t_j, f(flow_{t_j} x0))` for `t_j = j dt`, `j <= max n`.
    fn continuous_samples(&self, x0: &State) -> gla_core::Result<Vec<(f64, Wide)>> {
        let SystemSpec::LimitCycle(flow) = &self.config.system else {
            return Err(gla_core::Error::KindMismatch("continuous samples need a limit cycle"));
        };
        let grid: Vec<f64> = (0..=self.max_n()).map(|j| j as f64 * self.config.dt).collect();
        let c = x0.to_complex();
        let states = flow_sample(flow, c[0].re, c[1].re, &grid)?;
        grid.iter()
            .zip(&states)
            .map(|(&t, x)| Ok((t, self.observable.eval(x)?)))
            .collect()
    }
}

impl Experiment {
    fn run_point(&self, x0_id: usize) -> Result<RunOutput, RunError> {
        let point = &self.config.x0[x0_id];
        let numeric = |what: &str, e: gla_core::Error| RunError::Numeric(format!("x0 #{x0_id}: {what}: {e}"));
        let x0 = self.start_state(point).map_err(|e| numeric("start point", e))?;
        let mut rows = Vec::new();
        let mut sweeps = Vec::new();
        let oracles: Vec<Complex64> = self
            .targets
            .iter()
            .map(|t| self.oracle(t, &x0).map_err(|e| numeric(&format!("oracle for {}", t.label), e)))
            .collect::<Result<_, _>>()?;
        let row = |target: usize, n: usize, value: Complex64, bound: Option<f64>| Row {
            target,
            x0_id,
            n,
            value,
            oracle: oracles[target],
            cesaro_bound: bound,
        };

        match self.config.mode {
            Mode::Continuous => {
                let samples = self.continuous_samples(&x0).map_err(|e| numeric("sampling", e))?;
                for &n in &self.config.n {
                    for (ti, t) in self.targets.iter().enumerate() {
                        let exponent = match &t.target {
                            Target::Index(LatticeIndex::Cycle { k, n }) => Complex64::new(
                                f64::from(*k) * self.lattice_rho(),
                                f64::from(*n),
                            ),
                            _ => return Err(numeric(&t.label, gla_core::Error::KindMismatch("continuous target"))),
                        };
                        let v = continuous_laplace_average(&samples[..=n], exponent)
                            .map_err(|e| numeric(&format!("target {} at n = {n}", t.label), e))?;
                        rows.push(row(ti, n, v, None));
                    }
                }
            }
            Mode::Sweep => {
                let samples = self.discrete_samples(&x0).map_err(|e| numeric("sampling", e))?;
                for &n in &self.config.n {
                    let sweep = sweep_samples(&samples[..n], &self.decomposition, Order::Forward)
                        .map_err(|e| numeric(&format!("sweep at n = {n}"), e))?;
                    for (ti, t) in self.targets.iter().enumerate() {
                        let Target::Index(idx) = &t.target else { unreachable!("probes rejected in sweep mode") };
                        let entry = sweep
                            .entries
                            .iter()
                            .find(|e| &e.index == idx)
                            .expect("sweep covers the lattice");
                        rows.push(row(ti, n, entry.result.value, entry.result.cesaro_bound));
                    }
                    sweeps.push(SweepRecord {
                        x0_id,
                        n,
                        reconstruction_residual: sweep.reconstruction_residual,
                    });
                }
            }
            mode => {
                let order = if mode == Mode::Inverse { Order::Inverse } else { Order::Forward };
                let samples = self.discrete_samples(&x0).map_err(|e| numeric("sampling", e))?;
                for &n in &self.config.n {
                    for (ti, t) in self.targets.iter().enumerate() {
                        let r = project_samples(&samples[..n], &t.target, &self.decomposition, order)
                            .map_err(|e| numeric(&format!("target {} at n = {n}", t.label), e))?;
                        rows.push(row(ti, n, r.value, r.cesaro_bound));
                    }
                }
            }
        }
        Ok(RunOutput { rows, sweeps })
    }

    fn lattice_rho(&self) -> f64 {
        match &self.config.system {
            SystemSpec::LimitCycle(f) => f.rho_star(),
            _ => 0.0,
        }
    }

    /// All projections, ordered by `(target, x0_id, n)`; `jobs` worker threads.
    pub fn run(&self, jobs: usize) -> Result<RunOutput, RunError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| RunError::Io(e.to_string()))?;
        let parts: Vec<Result<RunOutput, RunError>> =
            pool.install(|| (0..self.config.x0.len()).into_par_iter().map(|i| self.run_point(i)).collect());
        let mut rows = Vec::new();
        let mut sweeps = Vec::new();
        // the first failing start point wins, independent of scheduling
        for part in parts {
            let part = part?;
            rows.extend(part.rows);
            sweeps.extend(part.sweeps);
        }
        rows.sort_by_key(|r| (r.target, r.x0_id, r.n));
        sweeps.sort_by_key(|s| (s.x0_id, s.n));
        for r in &rows {
            let finite = r.value.is_finite()
                && r.oracle.is_finite()
                && r.cesaro_bound.is_none_or(f64::is_finite);
            if !finite {
                return Err(RunError::Numeric(format!(
                    "non-finite result for target {} at x0 #{}, n = {}",
                    self.targets[r.target].label, r.x0_id, r.n
                )));
            }
        }
        Ok(RunOutput { rows, sweeps })
    }
}

/// `(failures, checked)`: rows whose error exceeds the bound plus slack.
/// Continuous rows have no Cesàro bound and are held to the slack alone.
pub fn verify(rows: &[Row], mode: Mode) -> (usize, usize) {
    let mut failures = 0;
    let mut checked = 0;
    for r in rows {
        let err = r.abs_err();
        let limit = match (r.cesaro_bound, mode) {
            (Some(b), _) => b + VERIFY_SLACK,
            (None, Mode::Continuous) => VERIFY_SLACK,
            (None, _) => continue,
        };
        checked += 1;
        if !(err <= limit) {
            failures += 1;
        }
    }
    (failures, checked)
}
