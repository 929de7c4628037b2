#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use hierkey::{
    rebuild_oracle, Authority, ClassId, CurveContext, Hierarchy, Scheme, SchemeParams,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// Desk primes with a fixed prime-order curve `y² = x³ + 6x + 3` over each.
pub const DESK_PRIMES: [u64; 3] = [10007, 99991, 999983];

pub fn desk_curve(p: u64) -> CurveContext {
    // construction point-counts the curve, so build each one once
    static CURVES: OnceLock<Vec<CurveContext>> = OnceLock::new();
    let curves = CURVES.get_or_init(|| {
        vec![
            CurveContext::new(10007, 6, 3, 3, 4099, 9901).unwrap(),
            CurveContext::new(99991, 6, 3, 1, 32997, 99901).unwrap(),
            CurveContext::new(999983, 6, 3, 3, 108843, 1001303).unwrap(),
        ]
    });
    curves
        .iter()
        .find(|c| c.p() == p)
        .unwrap_or_else(|| panic!("no fixture curve over {p}"))
        .clone()
}

pub fn params(scheme: Scheme, p: u64) -> SchemeParams {
    let curve = scheme.uses_curve().then(|| desk_curve(p));
    SchemeParams::new(scheme, p, curve, 10).unwrap()
}

pub fn id(s: &str) -> ClassId {
    ClassId::from(s)
}

pub fn ids<const N: usize>(names: [&str; N]) -> Vec<ClassId> {
    names.iter().map(|s| id(s)).collect()
}

/// The five-class hierarchy: u1 on top, u2 and u3 below it, u4 below u2,
/// u5 below both u2 and u3.
pub fn fig1() -> Hierarchy {
    let edges = [("u1", "u2"), ("u1", "u3"), ("u2", "u4"), ("u2", "u5"), ("u3", "u5")];
    Hierarchy::from_edges(
        ids(["u1", "u2", "u3", "u4", "u5"]),
        edges.iter().map(|(a, b)| (id(a), id(b))),
    )
    .unwrap()
}

/// Classes `c0..c{n-1}`; each pair `(ci, cj)` with `i < j` is an edge with
/// probability `density`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Hierarchy {
    let classes: Vec<ClassId> = (0..n).map(|i| id(&format!("c{i}"))).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((classes[i].clone(), classes[j].clone()));
            }
        }
    }
    Hierarchy::from_edges(classes, edges).unwrap()
}

pub fn bootstrap(scheme: Scheme, p: u64, h: &Hierarchy, seed: u64) -> Authority {
    Authority::bootstrap(params(scheme, p), h, &BTreeMap::new(), seed).unwrap()
}

/// Every strict-predecessor pair derives the stored key.
pub fn assert_all_derivations(ca: &Authority) {
    let h = ca.hierarchy();
    for target in h.classes() {
        let expected = ca.key_of(target).unwrap();
        for viewer in h.strict_predecessors(target).unwrap() {
            let d = ca.derive(&viewer, target).unwrap();
            assert!(d.authorized);
            assert_eq!(d.key, expected, "{viewer} -> {target} under {}", ca.scheme());
        }
    }
}

/// Incremental board filters equal the from-scratch rebuild.
pub fn oracle_mismatches(ca: &Authority) -> Vec<ClassId> {
    let oracle = rebuild_oracle(ca).unwrap();
    oracle
        .into_iter()
        .filter(|(c, f)| ca.board().classes[c].filter.as_ref() != Some(f))
        .map(|(c, _)| c)
        .collect()
}

/// A random insertion that keeps the hierarchy acyclic: parents come from
/// a prefix of a topological order, children from the rest.
pub fn random_insertion<R: Rng>(rng: &mut R, h: &Hierarchy) -> (Vec<ClassId>, Vec<ClassId>) {
    let order = h.topological_order();
    let split = rng.gen_range(0..=order.len());
    let pick = |rng: &mut R, pool: &[ClassId]| -> Vec<ClassId> {
        pool.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect()
    };
    let above = pick(rng, &order[..split]);
    let below = pick(rng, &order[split..]);
    (above, below)
}

/// A class with at least `min` strict predecessors, if any.
pub fn class_with_predecessors<R: Rng>(
    rng: &mut R,
    h: &Hierarchy,
    min: usize,
) -> Option<ClassId> {
    let candidates: Vec<ClassId> = h
        .classes()
        .filter(|c| h.strict_predecessors(c).unwrap().len() >= min)
        .cloned()
        .collect();
    candidates.choose(rng).cloned()
}
