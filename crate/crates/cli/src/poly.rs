//! Ring polynomials as JSON:
//! `{"kind": "fixed_point" | "limit_cycle", "terms": [{"k": [..], "n": 0, "re": .., "im": ..}]}`.
//!
//! Fixed-point terms carry the full multi-degree in `k` and `n = 0`; limit-cycle
//! terms carry `k = [degree]` and the Fourier index `n`.

use gla_core::hardy::RingPolynomial;
use gla_core::spectra::{LatticeIndex, LatticeKind};
use gla_core::Complex64;
use serde_json::{json, Value};

use crate::json::{index, join, Checker};

pub fn to_json(p: &RingPolynomial) -> Value {
    let kind = match p.kind() {
        LatticeKind::FixedPoint => "fixed_point",
        LatticeKind::LimitCycle => "limit_cycle",
    };
    let terms: Vec<Value> = p
        .terms()
        .map(|(idx, c)| {
            let (k, n) = match idx {
                LatticeIndex::Multi(k) => (k.clone(), 0),
                LatticeIndex::Cycle { k, n } => (vec![*k], *n),
            };
            json!({"k": k, "n": n, "re": c.re, "im": c.im})
        })
        .collect();
    json!({"kind": kind, "terms": terms})
}

pub fn from_str(text: &str) -> Result<RingPolynomial, Vec<String>> {
    let v: Value = serde_json::from_str(text).map_err(|e| vec![format!("$: {e}")])?;
    let mut ck = Checker::default();
    match parse(&mut ck, "$", &v) {
        Some(p) if ck.errors.is_empty() => Ok(p),
        _ => Err(ck.errors),
    }
}

pub fn parse(ck: &mut Checker, path: &str, v: &Value) -> Option<RingPolynomial> {
    let map = ck.object(path, v, &["kind", "terms"], &[])?;
    let kind = match ck.string(&join(path, "kind"), map.get("kind")?)? {
        "fixed_point" => LatticeKind::FixedPoint,
        "limit_cycle" => LatticeKind::LimitCycle,
        other => {
            ck.err(&join(path, "kind"), format!("unknown polynomial kind {other:?}"));
            return None;
        }
    };
    let tpath = join(path, "terms");
    let items = ck.array(&tpath, map.get("terms")?)?;
    let mut terms = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        match term(ck, &index(&tpath, i), item, kind) {
            Some(t) => terms.push(t),
            None => ok = false,
        }
    }
    if !ok {
        return None;
    }
    match RingPolynomial::new(kind, terms) {
        Ok(p) => Some(p),
        Err(e) => {
            ck.err(path, e);
            None
        }
    }
}

fn term(ck: &mut Checker, path: &str, v: &Value, kind: LatticeKind) -> Option<(LatticeIndex, Complex64)> {
    let map = ck.object(path, v, &["k", "re"], &["n", "im"])?;
    let kpath = join(path, "k");
    let degrees = ck.array(&kpath, map.get("k")?)?;
    let k: Vec<Option<u32>> = degrees
        .iter()
        .enumerate()
        .map(|(i, d)| small(ck, &index(&kpath, i), d))
        .collect();
    let k: Option<Vec<u32>> = k.into_iter().collect();
    let n = match map.get("n") {
        Some(n) => ck.integer(&join(path, "n"), n).and_then(|n| {
            let n = i32::try_from(n).ok();
            if n.is_none() {
                ck.err(&join(path, "n"), "out of range");
            }
            n
        }),
        None => Some(0),
    };
    let re = ck.number(&join(path, "re"), map.get("re")?);
    let im = match map.get("im") {
        Some(im) => ck.number(&join(path, "im"), im),
        None => Some(0.0),
    };
    let (k, n, re, im) = (k?, n?, re?, im?);
    let idx = match kind {
        LatticeKind::FixedPoint => {
            if n != 0 {
                ck.err(&join(path, "n"), "must be 0 for a fixed-point polynomial");
                return None;
            }
            LatticeIndex::Multi(k)
        }
        LatticeKind::LimitCycle => {
            if k.len() != 1 {
                ck.err(&kpath, "a limit-cycle term has exactly one degree");
                return None;
            }
            LatticeIndex::Cycle { k: k[0], n }
        }
    };
    Some((idx, Complex64::new(re, im)))
}

fn small(ck: &mut Checker, path: &str, v: &Value) -> Option<u32> {
    let u = ck.unsigned(path, v)?;
    let s = u32::try_from(u).ok();
    if s.is_none() {
        ck.err(path, "out of range");
    }
    s
}
