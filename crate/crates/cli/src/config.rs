//! Experiment configuration: strict JSON with every validation error collected.

use std::path::PathBuf;

use gla_core::dynsys::{
    ConjugateNonlinearSystem, CubicConjugacy, DiscreteLinearSystem, LimitCycleFlow, DEFAULT_GUARD_LOG10,
};
use gla_core::gla::Target;
use gla_core::hardy::RingPolynomial;
use gla_core::linalg::CMatrix;
use gla_core::spectra::{
    fixed_point_lattice, limit_cycle_lattice, EigenvalueLattice, LatticeIndex, LatticeKind,
    DEFAULT_GROUPING_TOLERANCE,
};
use gla_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::json::{index, join, Checker};
use crate::poly;

#[derive(Debug, Clone)]
pub enum SystemSpec {
    Linear(DiscreteLinearSystem),
    Conjugate(ConjugateNonlinearSystem),
    LimitCycle(LimitCycleFlow),
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Linear(s) => s.eigenvalues().len(),
            SystemSpec::Conjugate(s) => s.base().eigenvalues().len(),
            SystemSpec::LimitCycle(_) => 2,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        match self {
            SystemSpec::LimitCycle(_) => LatticeKind::LimitCycle,
            _ => LatticeKind::FixedPoint,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Linear(_) => "linear",
            SystemSpec::Conjugate(_) => "conjugate",
            SystemSpec::LimitCycle(_) => "limit_cycle",
        }
    }

    pub fn lattice(&self, t: Truncation) -> gla_core::Result<EigenvalueLattice> {
        match self {
            SystemSpec::Linear(s) => fixed_point_lattice(s.eigenvalues(), t.max_degree),
            SystemSpec::Conjugate(s) => fixed_point_lattice(s.base().eigenvalues(), t.max_degree),
            SystemSpec::LimitCycle(f) => limit_cycle_lattice(f.rho_star(), t.max_degree, t.max_frequency),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ObservableSpec {
    /// A finite combination of the system's eigenfunctions.
    Eigenfunctions(Vec<(LatticeIndex, Complex64)>),
    /// A ring polynomial in the eigen-coordinates.
    Polynomial(RingPolynomial),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub max_degree: u32,
    pub max_frequency: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Inverse,
    Continuous,
    Sweep,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Inverse => "inverse",
            Mode::Continuous => "continuous",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Targets {
    All,
    List(Vec<Target>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub observable: ObservableSpec,
    pub x0: Vec<Vec<f64>>,
    pub truncation: Truncation,
    pub n: Vec<usize>,
    pub targets: Targets,
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overflow_guard_log10: f64,
    /// Time step of continuous runs; each `n` is a step count, `alpha = n * dt`.
    pub dt: f64,
    pub grouping_tolerance: f64,
}

const MAX_SAMPLES: u64 = 10_000_000;

const TOP_REQUIRED: &[&str] = &["system", "observable", "x0", "truncation", "n", "targets", "mode"];
const TOP_OPTIONAL: &[&str] = &["output_dir", "seed", "overflow_guard_log10", "dt", "grouping_tolerance"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let v: Value = serde_json::from_str(text).map_err(|e| vec![format!("$: invalid JSON: {e}")])?;
    let mut ck = Checker::default();
    let cfg = parse_value(&mut ck, &v);
    match cfg {
        Some(cfg) if ck.errors.is_empty() => Ok(cfg),
        _ => {
            if ck.errors.is_empty() {
                ck.err("$", "invalid configuration");
            }
            Err(ck.errors)
        }
    }
}

fn parse_value(ck: &mut Checker, v: &Value) -> Option<ExperimentConfig> {
    let top = ck.object("$", v, TOP_REQUIRED, TOP_OPTIONAL)?;
    let system = top.get("system").and_then(|s| system(ck, "$.system", s));
    let mode = top.get("mode").and_then(|m| mode(ck, m));
    let truncation = top.get("truncation").and_then(|t| truncation(ck, t));
    let n = top.get("n").and_then(|n| sample_counts(ck, n));
    let seed = top.get("seed").and_then(|s| ck.unsigned("$.seed", s));
    let output_dir = top
        .get("output_dir")
        .and_then(|d| ck.string("$.output_dir", d))
        .map(PathBuf::from);
    let overflow_guard_log10 = positive(ck, top, "overflow_guard_log10").unwrap_or(DEFAULT_GUARD_LOG10);
    let dt = positive(ck, top, "dt").unwrap_or(1e-3);
    let grouping_tolerance = positive(ck, top, "grouping_tolerance").unwrap_or(DEFAULT_GROUPING_TOLERANCE);

    // everything below needs the system shape
    let system = system?;
    let x0 = top.get("x0").and_then(|x| start_points(ck, x, system.dim(), seed));
    if let Some(t) = truncation {
        if t.max_frequency > 0 && system.kind() == LatticeKind::FixedPoint {
            ck.err("$.truncation.N", "only limit-cycle lattices have a frequency truncation");
        }
    }
    match (mode, &system) {
        (Some(Mode::Continuous), SystemSpec::LimitCycle(_)) => {}
        (Some(Mode::Continuous), _) => ck.err("$.mode", "continuous mode needs a limit_cycle system"),
        (Some(Mode::Inverse), SystemSpec::Linear(_)) => {}
        (Some(Mode::Inverse), _) => ck.err("$.mode", "inverse mode needs a linear system"),
        _ => {}
    }

    // membership checks need the lattice; structure is checked regardless
    let lattice = truncation.and_then(|t| match system.lattice(t) {
        Ok(l) => Some(l),
        Err(e) => {
            ck.err("$.truncation", e);
            None
        }
    });
    let observable = top
        .get("observable")
        .and_then(|o| observable(ck, o, &system, lattice.as_ref()));
    let targets = top
        .get("targets")
        .and_then(|t| targets(ck, t, &system, lattice.as_ref(), mode));
    let (mode, truncation) = (mode?, truncation?);

    Some(ExperimentConfig {
        system,
        observable: observable?,
        x0: x0?,
        truncation,
        n: n?,
        targets: targets?,
        mode,
        output_dir,
        seed,
        overflow_guard_log10,
        dt,
        grouping_tolerance,
    })
}

fn positive(ck: &mut Checker, top: &Map<String, Value>, key: &str) -> Option<f64> {
    let path = join("$", key);
    let x = ck.number(&path, top.get(key)?)?;
    if x <= 0.0 {
        ck.err(&path, "must be positive");
        return None;
    }
    Some(x)
}

fn mode(ck: &mut Checker, v: &Value) -> Option<Mode> {
    Some(match ck.string("$.mode", v)? {
        "forward" => Mode::Forward,
        "inverse" => Mode::Inverse,
        "continuous" => Mode::Continuous,
        "sweep" => Mode::Sweep,
        "verify" => Mode::Verify,
        other => {
            ck.err("$.mode", format!("unknown mode {other:?}"));
            return None;
        }
    })
}

fn truncation(ck: &mut Checker, v: &Value) -> Option<Truncation> {
    let map = ck.object("$.truncation", v, &["K"], &["N"])?;
    let k = ck.unsigned("$.truncation.K", map.get("K")?)?;
    let n = match map.get("N") {
        Some(n) => ck.unsigned("$.truncation.N", n)?,
        None => 0,
    };
    // the lattice has (K+1)^d-ish entries; anything past this is a typo
    if k > 64 || n > 4096 {
        ck.err("$.truncation", "truncation too large (K <= 64, N <= 4096)");
        return None;
    }
    Some(Truncation {
        max_degree: k as u32,
        max_frequency: n as u32,
    })
}

fn sample_counts(ck: &mut Checker, v: &Value) -> Option<Vec<usize>> {
    let items = ck.array("$.n", v)?;
    if items.is_empty() {
        ck.err("$.n", "at least one sample count is required");
        return None;
    }
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let path = index("$.n", i);
        match ck.unsigned(&path, item) {
            Some(0) => {
                ck.err(&path, "n must be >= 1");
                ok = false;
            }
            Some(n) if n > MAX_SAMPLES => {
                ck.err(&path, format!("n must be <= {MAX_SAMPLES}"));
                ok = false;
            }
            Some(n) => out.push(n as usize),
            None => ok = false,
        }
    }
    ok.then_some(out)
}

fn system(ck: &mut Checker, path: &str, v: &Value) -> Option<SystemSpec> {
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .unwrap_or_default();
    match kind.as_str() {
        "linear" => {
            let map = ck.object(path, v, &["kind", "eigenvalues"], &["eigenvectors"])?;
            linear(ck, path, map).map(SystemSpec::Linear)
        }
        "conjugate" => {
            let map = ck.object(path, v, &["kind", "eigenvalues", "cubic", "domain"], &["eigenvectors"])?;
            let base = linear(ck, path, map);
            let cubic = map.get("cubic").and_then(|c| ck.number(&join(path, "cubic"), c));
            let domain = map.get("domain").and_then(|d| intervals(ck, &join(path, "domain"), d));
            let conj = match CubicConjugacy::new(cubic?) {
                Ok(h) => h,
                Err(e) => {
                    ck.err(&join(path, "cubic"), e);
                    return None;
                }
            };
            match ConjugateNonlinearSystem::new(base?, conj, domain?) {
                Ok(s) => Some(SystemSpec::Conjugate(s)),
                Err(e) => {
                    ck.err(&join(path, "domain"), e);
                    None
                }
            }
        }
        "limit_cycle" => {
            let map = ck.object(path, v, &["kind", "rho_star"], &["cos", "sin"])?;
            let rho = map.get("rho_star").and_then(|r| ck.number(&join(path, "rho_star"), r));
            let cos = match map.get("cos") {
                Some(c) => ck.numbers(&join(path, "cos"), c),
                None => Some(Vec::new()),
            };
            let sin = match map.get("sin") {
                Some(s) => ck.numbers(&join(path, "sin"), s),
                None => Some(Vec::new()),
            };
            match LimitCycleFlow::new(rho?, cos?, sin?) {
                Ok(f) => Some(SystemSpec::LimitCycle(f)),
                Err(e) => {
                    ck.err(path, e);
                    None
                }
            }
        }
        _ => {
            ck.err(
                &join(path, "kind"),
                "expected one of \"linear\", \"conjugate\", \"limit_cycle\"",
            );
            None
        }
    }
}

fn linear(ck: &mut Checker, path: &str, map: &Map<String, Value>) -> Option<DiscreteLinearSystem> {
    let epath = join(path, "eigenvalues");
    let items = ck.array(&epath, map.get("eigenvalues")?)?;
    let eigs: Vec<Option<Complex64>> = items
        .iter()
        .enumerate()
        .map(|(i, e)| ck.complex(&index(&epath, i), e))
        .collect();
    let eigs: Vec<Complex64> = eigs.into_iter().collect::<Option<_>>()?;
    let vectors = match map.get("eigenvectors") {
        Some(rows) => {
            let vpath = join(path, "eigenvectors");
            let rows = ck.array(&vpath, rows)?;
            let mut parsed = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let rpath = index(&vpath, i);
                let row = ck.array(&rpath, row)?;
                let row: Vec<Option<Complex64>> = row
                    .iter()
                    .enumerate()
                    .map(|(j, z)| ck.complex(&index(&rpath, j), z))
                    .collect();
                parsed.push(row.into_iter().collect::<Option<Vec<_>>>()?);
            }
            if parsed.len() != eigs.len() || parsed.iter().any(|r| r.len() != eigs.len()) {
                ck.err(&vpath, format!("expected a {0}x{0} matrix", eigs.len()));
                return None;
            }
            match CMatrix::from_rows(&parsed) {
                Ok(m) => m,
                Err(e) => {
                    ck.err(&vpath, e);
                    return None;
                }
            }
        }
        None => CMatrix::identity(eigs.len()),
    };
    match DiscreteLinearSystem::new(eigs, vectors) {
        Ok(s) => Some(s),
        Err(e) => {
            ck.err(path, e);
            None
        }
    }
}

fn intervals(ck: &mut Checker, path: &str, v: &Value) -> Option<Vec<(f64, f64)>> {
    let items = ck.array(path, v)?;
    let out: Vec<Option<(f64, f64)>> = items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let p = index(path, i);
            let pair = ck.numbers(&p, item)?;
            if pair.len() != 2 {
                ck.err(&p, "expected [lo, hi]");
                return None;
            }
            Some((pair[0], pair[1]))
        })
        .collect();
    out.into_iter().collect()
}

const MAX_POINTS: usize = 1_000_000;

fn start_points(ck: &mut Checker, v: &Value, dim: usize, seed: Option<u64>) -> Option<Vec<Vec<f64>>> {
    let map = ck.object("$.x0", v, &[], &["points", "grid", "random"])?;
    if map.len() != 1 {
        ck.err("$.x0", "expected exactly one of \"points\", \"grid\", \"random\"");
        return None;
    }
    let points = if let Some(points) = map.get("points") {
        let items = ck.array("$.x0.points", points)?;
        let parsed: Vec<Option<Vec<f64>>> = items
            .iter()
            .enumerate()
            .map(|(i, p)| ck.numbers(&index("$.x0.points", i), p))
            .collect();
        parsed.into_iter().collect::<Option<Vec<_>>>()?
    } else if let Some(grid) = map.get("grid") {
        let g = ck.object("$.x0.grid", grid, &["lo", "hi", "count"], &[])?;
        let (lo, hi) = bounds(ck, "$.x0.grid", g, dim)?;
        let cpath = "$.x0.grid.count";
        let counts = ck.array(cpath, g.get("count")?)?;
        let counts: Vec<Option<u64>> = counts
            .iter()
            .enumerate()
            .map(|(i, c)| ck.unsigned(&index(cpath, i), c))
            .collect();
        let counts: Vec<usize> = counts.into_iter().map(|c| c.map(|c| c as usize)).collect::<Option<_>>()?;
        if counts.len() != dim || counts.contains(&0) {
            ck.err(cpath, format!("expected {dim} positive counts"));
            return None;
        }
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        if total.is_none_or(|t| t > MAX_POINTS) {
            ck.err(cpath, format!("grid has more than {MAX_POINTS} points"));
            return None;
        }
        grid_points(&lo, &hi, &counts)
    } else {
        let r = ck.object("$.x0.random", map.get("random")?, &["count", "lo", "hi"], &[])?;
        let count = ck.unsigned("$.x0.random.count", r.get("count")?)? as usize;
        let (lo, hi) = bounds(ck, "$.x0.random", r, dim)?;
        if count == 0 || count > MAX_POINTS {
            ck.err("$.x0.random.count", format!("must be between 1 and {MAX_POINTS}"));
            return None;
        }
        let Some(seed) = seed else {
            ck.err("$.seed", "random start points need a seed");
            return None;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                lo.iter()
                    .zip(&hi)
                    .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..b) })
                    .collect()
            })
            .collect()
    };
    if points.is_empty() {
        ck.err("$.x0", "no start points");
        return None;
    }
    let mut ok = true;
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            ck.err(&index("$.x0", i), format!("expected {dim} coordinates, found {}", p.len()));
            ok = false;
        }
    }
    ok.then_some(points)
}

fn bounds(ck: &mut Checker, path: &str, map: &Map<String, Value>, dim: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let lo = map.get("lo").and_then(|v| ck.numbers(&join(path, "lo"), v));
    let hi = map.get("hi").and_then(|v| ck.numbers(&join(path, "hi"), v));
    let (lo, hi) = (lo?, hi?);
    if lo.len() != dim || hi.len() != dim {
        ck.err(path, format!("lo and hi need {dim} coordinates"));
        return None;
    }
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        ck.err(path, "lo must not exceed hi");
        return None;
    }
    Some((lo, hi))
}

/// Cartesian product, last coordinate fastest.
fn grid_points(lo: &[f64], hi: &[f64], counts: &[usize]) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .zip(counts)
        .map(|((&a, &b), &c)| {
            if c == 1 {
                vec![a]
            } else {
                (0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64).collect()
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

fn lattice_index(ck: &mut Checker, path: &str, v: &Value, system: &SystemSpec) -> Option<LatticeIndex> {
    let items = ck.array(path, v)?;
    match system.kind() {
        LatticeKind::FixedPoint => {
            if items.len() != system.dim() {
                ck.err(path, format!("expected a multi-degree of length {}", system.dim()));
                return None;
            }
            let k: Vec<Option<u32>> = items
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let p = index(path, i);
                    ck.unsigned(&p, d).and_then(|d| u32::try_from(d).ok())
                })
                .collect();
            k.into_iter().collect::<Option<_>>().map(LatticeIndex::Multi)
        }
        LatticeKind::LimitCycle => {
            if items.len() != 2 {
                ck.err(path, "expected [k, n]");
                return None;
            }
            let k = ck.unsigned(&index(path, 0), &items[0]).and_then(|k| u32::try_from(k).ok());
            let n = ck.integer(&index(path, 1), &items[1]).and_then(|n| i32::try_from(n).ok());
            Some(LatticeIndex::Cycle { k: k?, n: n? })
        }
    }
}

fn require_in_lattice(ck: &mut Checker, path: &str, idx: &LatticeIndex, lattice: Option<&EigenvalueLattice>) -> bool {
    let Some(lattice) = lattice else { return true };
    if lattice.get(idx).is_some() {
        return true;
    }
    let bound = match lattice.kind() {
        LatticeKind::FixedPoint => format!("K = {}", lattice.max_degree()),
        LatticeKind::LimitCycle => format!("K = {}, N = {}", lattice.max_degree(), lattice.max_frequency()),
    };
    ck.err(path, format!("index {idx} is not in the truncated lattice ({bound})"));
    false
}

fn observable(
    ck: &mut Checker,
    v: &Value,
    system: &SystemSpec,
    lattice: Option<&EigenvalueLattice>,
) -> Option<ObservableSpec> {
    let path = "$.observable";
    match v.get("kind").and_then(Value::as_str) {
        Some("zero") => {
            ck.object(path, v, &["kind"], &[])?;
            Some(ObservableSpec::Zero)
        }
        Some("eigenfunctions") => {
            let map = ck.object(path, v, &["kind", "terms"], &[])?;
            let tpath = join(path, "terms");
            let items = ck.array(&tpath, map.get("terms")?)?;
            let mut terms = Vec::with_capacity(items.len());
            let mut ok = true;
            for (i, item) in items.iter().enumerate() {
                let p = index(&tpath, i);
                let Some(t) = ck.object(&p, item, &["index", "re"], &["im"]) else {
                    ok = false;
                    continue;
                };
                let idx = t.get("index").and_then(|x| lattice_index(ck, &join(&p, "index"), x, system));
                let re = t.get("re").and_then(|x| ck.number(&join(&p, "re"), x));
                let im = match t.get("im") {
                    Some(x) => ck.number(&join(&p, "im"), x),
                    None => Some(0.0),
                };
                match (idx, re, im) {
                    (Some(idx), Some(re), Some(im)) => {
                        ok &= require_in_lattice(ck, &join(&p, "index"), &idx, lattice);
                        terms.push((idx, Complex64::new(re, im)));
                    }
                    _ => ok = false,
                }
            }
            ok.then_some(ObservableSpec::Eigenfunctions(terms))
        }
        Some("polynomial") => {
            let map = ck.object(path, v, &["kind", "polynomial"], &[])?;
            let ppath = join(path, "polynomial");
            let p = poly::parse(ck, &ppath, map.get("polynomial")?)?;
            if p.kind() != system.kind() {
                ck.err(&join(&ppath, "kind"), "polynomial kind does not match the system");
                return None;
            }
            let mut ok = true;
            for (i, (idx, _)) in p.terms().enumerate() {
                if let LatticeIndex::Multi(k) = idx {
                    if k.len() != system.dim() {
                        ck.err(&index(&join(&ppath, "terms"), i), "wrong number of degrees");
                        ok = false;
                        continue;
                    }
                }
                ok &= require_in_lattice(ck, &index(&join(&ppath, "terms"), i), idx, lattice);
            }
            ok.then_some(ObservableSpec::Polynomial(p))
        }
        _ => {
            ck.err(
                &join(path, "kind"),
                "expected one of \"eigenfunctions\", \"polynomial\", \"zero\"",
            );
            None
        }
    }
}

fn targets(
    ck: &mut Checker,
    v: &Value,
    system: &SystemSpec,
    lattice: Option<&EigenvalueLattice>,
    mode: Option<Mode>,
) -> Option<Targets> {
    let path = "$.targets";
    if let Some(s) = v.as_str() {
        if s == "all" {
            return Some(Targets::All);
        }
        ck.err(path, "expected \"all\" or a list of targets");
        return None;
    }
    let items = ck.array(path, v)?;
    if items.is_empty() {
        ck.err(path, "at least one target is required");
        return None;
    }
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let p = index(path, i);
        if item.is_object() {
            let Some(map) = ck.object(&p, item, &["probe"], &[]) else {
                ok = false;
                continue;
            };
            let Some(z) = map.get("probe").and_then(|z| ck.complex(&join(&p, "probe"), z)) else {
                ok = false;
                continue;
            };
            if z.norm() == 0.0 {
                ck.err(&join(&p, "probe"), "probe must be nonzero");
                ok = false;
            } else if let Some(m @ (Mode::Sweep | Mode::Continuous)) = mode {
                ck.err(&p, format!("probes are not available in {} mode", m.name()));
                ok = false;
            }
            out.push(Target::Probe(z));
        } else {
            match lattice_index(ck, &p, item, system) {
                Some(idx) => {
                    ok &= require_in_lattice(ck, &p, &idx, lattice);
                    out.push(Target::Index(idx));
                }
                None => ok = false,
            }
        }
    }
    ok.then_some(Targets::List(out))
}
