//! Acceptance criteria, one line of output each. Runs without the libtest
//! harness so the report is always printed.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use hierkey::attacks::attack_boards;
use hierkey::schemes::root_for;
use hierkey::{
    diff_epochs, AttackKind, Authority, ClassId, CurveContext, Point, RadixContext, Scheme,
    SchemeError,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed <= budget, || format!("took {elapsed:?}, budget {budget:?}"))
}

fn shift_values() -> Outcome {
    let dec = RadixContext::new(10, 99991).map_err(|e| e.to_string())?;
    let bin = RadixContext::new(2, 31).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let d: Vec<u64> = (1..=4).map(|l| dec.cyclic_shift(21349, l).unwrap()).collect();
    let b: Vec<u64> = (1..=4).map(|l| bin.cyclic_shift(0b11110, l).unwrap()).collect();
    let elapsed = start.elapsed();
    ensure(d == [23491, 24913, 29134, 21349], || format!("decimal table {d:?}"))?;
    ensure(b == [0b11101, 0b11011, 0b10111, 0b11110], || format!("binary table {b:?}"))?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("decimal {d:?}, binary {b:?} in {elapsed:?}"))
}

fn remark_counterexample() -> Outcome {
    let r = RadixContext::new(10, 239).map_err(|e| e.to_string())?;
    let forward = r.cyclic_shift(235, 1).map_err(|e| e.to_string())?;
    let back = r.cyclic_shift(forward, -1).map_err(|e| e.to_string())?;
    ensure(back == 41 && back != 235, || format!("L_-1(L_1(235)) = {back}"))?;
    ensure(!r.shiftable(235), || "235 reported shiftable".into())?;
    Ok(format!("L_1(235) = {forward}, L_-1 of that = {back}"))
}

fn shift_round_trips() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut done = 0;
    while done < 1000 {
        let base = *[2u64, 10].choose(&mut rng).unwrap();
        let p = *DESK_PRIMES.choose(&mut rng).unwrap();
        let radix = RadixContext::new(base, p).unwrap();
        let k = rng.gen_range(1..p);
        if !radix.shiftable(k) {
            continue;
        }
        let l = rng.gen_range(1..radix.block_len() as i64);
        let back = radix.cyclic_shift(radix.cyclic_shift(k, l).unwrap(), -l).unwrap();
        ensure(back == k, || format!("K={k} l={l} b={base} p={p} came back as {back}"))?;
        done += 1;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("{done} round trips in {elapsed:?}"))
}

fn scheme_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let curves: Vec<(u64, CurveContext)> = DESK_PRIMES.iter().map(|&p| (p, desk_curve(p))).collect();
    let start = Instant::now();
    let (mut exact, mut rejected) = (0usize, 0usize);
    for scheme in Scheme::ALL {
        for trial in 0..100u64 {
            let n = rng.gen_range(1..=8);
            let density = rng.gen_range(0.2..0.7);
            let h = random_dag(&mut rng, n, density);
            let (p, curve) = &curves[trial as usize % curves.len()];
            let params = hierkey::SchemeParams::new(
                scheme,
                *p,
                scheme.uses_curve().then(|| curve.clone()),
                10,
            )
            .map_err(|e| e.to_string())?;
            let ca = Authority::bootstrap(params, &h, &Default::default(), rng.gen())
                .map_err(|e| format!("{scheme}: {e}"))?;
            let classes: Vec<ClassId> = h.classes().cloned().collect();
            for target in &classes {
                let key = ca.key_of(target).unwrap();
                let preds = h.strict_predecessors(target).unwrap();
                for viewer in &preds {
                    let d = ca.derive(viewer, target).map_err(|e| e.to_string())?;
                    ensure(d.key == key, || format!("{scheme}: {viewer} -> {target} wrong"))?;
                    exact += 1;
                }
                let outsiders: Vec<&ClassId> =
                    classes.iter().filter(|c| *c != target && !preds.contains(*c)).collect();
                if let Some(viewer) = outsiders.choose(&mut rng) {
                    match ca.derive(viewer, target) {
                        Ok(d) => ensure(!d.authorized && d.key != key, || {
                            format!("{scheme}: outsider {viewer} derived {target}")
                        })?,
                        Err(SchemeError::NotPredecessor { .. }) => {}
                        Err(e) => return Err(e.to_string()),
                    }
                    rejected += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "600 boards, {exact} exact derivations, {rejected} outsider derivations rejected in {elapsed:?}"
    ))
}

/// Bootstraps a random board and inserts a new class directly above a
/// class with at least two predecessors.
fn insertion_trial(
    scheme: Scheme,
    p: u64,
    seed: u64,
) -> (Authority, Authority, ClassId, ClassId) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (h, target) = loop {
        let n = rng.gen_range(3..=7);
        let h = random_dag(&mut rng, n, 0.5);
        if let Some(t) = class_with_predecessors(&mut rng, &h, 2) {
            break (h, t);
        }
    };
    let before = bootstrap(scheme, p, &h, seed);
    let mut after = before.clone();
    let new = ClassId::from("r");
    after.insert_class(&new, &[], std::slice::from_ref(&target), None).unwrap();
    (before, after, target, new)
}

fn attack_soundness() -> Outcome {
    let start = Instant::now();
    let mut counts = Vec::new();
    for scheme in [Scheme::Wu, Scheme::JengWang] {
        let (mut lh_hits, mut tp_hits) = (0, 0);
        for seed in 0..100 {
            let (before, after, target, new) = insertion_trial(scheme, 99991, 1000 + seed);
            let key = after.key_of(&target).unwrap();
            let lh = attack_boards(AttackKind::LinHsu, before.board(), after.board(), &target)
                .map_err(|e| e.to_string())?;
            lh_hits += lh.recovers(key) as usize;
            let tp =
                attack_boards(AttackKind::TripathyPaul, before.board(), after.board(), &target)
                    .map_err(|e| e.to_string())?;
            let secret = after.secrets().classes[&new].secret;
            let root = root_for(after.board(), &target, &secret).unwrap().value();
            tp_hits += (tp.candidate_roots == [root] && tp.candidate_keys == [key]) as usize;
        }
        ensure(lh_hits == 100 && tp_hits == 100, || {
            format!("{scheme}: Lin-Hsu {lh_hits}/100, Tripathy-Paul {tp_hits}/100")
        })?;
        counts.push(format!("{scheme} linhsu {lh_hits}/100 tp {tp_hits}/100"));
    }
    Ok(format!("{} in {:?}", counts.join(", "), start.elapsed()))
}

fn attack_resistance() -> Outcome {
    let start = Instant::now();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(16);
    let mut summary = Vec::new();
    for scheme in [Scheme::Method1, Scheme::Method2] {
        let failures: Vec<String> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    s.spawn(move || {
                        let mut bad = Vec::new();
                        for seed in (t as u64..1000).step_by(threads) {
                            if let Err(e) = resistance_trial(scheme, seed) {
                                bad.push(e);
                            }
                        }
                        bad
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        ensure(failures.is_empty(), || {
            format!("{scheme}: {} trial(s) failed, first: {}", failures.len(), failures[0])
        })?;
        summary.push(format!("{scheme} 1000/1000"));
    }
    Ok(format!("{} resisted in {:?}", summary.join(", "), start.elapsed()))
}

fn resistance_trial(scheme: Scheme, seed: u64) -> Result<(), String> {
    let (before, after, target, _) = insertion_trial(scheme, 999983, 50_000 + seed);
    let key = after.key_of(&target).unwrap();
    let radix = after.params().radix.unwrap();
    let mask = |a: &Authority| {
        radix
            .cyclic_shift(key, a.board().classes[&target].shift.unwrap() as i64)
            .unwrap()
    };
    ensure(
        before.secrets().classes[&target].filter_secret
            != after.secrets().classes[&target].filter_secret,
        || format!("seed {seed}: h not refreshed"),
    )?;
    ensure(mask(&before) != mask(&after), || format!("seed {seed}: mask not refreshed"))?;
    for kind in [AttackKind::LinHsu, AttackKind::TripathyPaul] {
        let r = attack_boards(kind, before.board(), after.board(), &target)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(!r.recovers(key), || format!("seed {seed}: {kind} recovered the key"))?;
    }
    Ok(())
}

fn incremental_equivalence() -> Outcome {
    let schemes = [
        Scheme::Method1,
        Scheme::Method2,
        Scheme::Wu,
        Scheme::JengWang,
        Scheme::LinHsu,
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut mutations = 0;
    for seq in 0..500u64 {
        let scheme = schemes[seq as usize % schemes.len()];
        let p = DESK_PRIMES[(seq as usize / schemes.len()) % 2];
        let n = rng.gen_range(2..=6);
        let h = random_dag(&mut rng, n, 0.4);
        let mut ca = bootstrap(scheme, p, &h, seq);
        let mut next = n;
        for _ in 0..rng.gen_range(1..=6) {
            let size = ca.hierarchy().len();
            if size < 2 || (size < 8 && rng.gen_bool(0.55)) {
                let (above, below) = random_insertion(&mut rng, ca.hierarchy());
                let new = ClassId::from(format!("c{next}"));
                next += 1;
                ca.insert_class(&new, &above, &below, None)
                    .map_err(|e| format!("sequence {seq}: {e}"))?;
            } else {
                let all: Vec<ClassId> = ca.hierarchy().classes().cloned().collect();
                let victim = all.choose(&mut rng).unwrap().clone();
                ca.remove_class(&victim).map_err(|e| format!("sequence {seq}: {e}"))?;
            }
            mutations += 1;
            let bad = oracle_mismatches(&ca);
            ensure(bad.is_empty(), || format!("sequence {seq} ({scheme}): {bad:?} differ"))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("500 sequences, {mutations} mutations, 0 mismatches in {elapsed:?}"))
}

fn structural_replay() -> Outcome {
    let ca = bootstrap(Scheme::Method1, 99991, &fig1(), 2024);
    let degrees: Vec<usize> = ca.board().filter_degrees().into_values().collect();
    ensure(degrees == [0, 2, 2, 3, 4], || format!("Fig. 1 degrees {degrees:?}"))?;

    let mut inserted = ca.clone();
    let report = inserted
        .insert_class(&id("u6"), &ids(["u1"]), &ids(["u4"]), None)
        .map_err(|e| e.to_string())?;
    let diff = diff_epochs(ca.board(), inserted.board()).map_err(|e| e.to_string())?;
    ensure(report.updated == BTreeSet::from([id("u4")]), || {
        format!("insertion updated {:?}", report.updated)
    })?;
    ensure(diff.changed() == ids(["u4"]) && diff.added() == ids(["u6"]), || {
        format!("insertion diff {diff:?}")
    })?;
    let d = inserted.derive(&id("u6"), &id("u4")).map_err(|e| e.to_string())?;
    ensure(d.key == inserted.key_of(&id("u4")).unwrap(), || "u6 cannot derive K_4".into())?;

    let mut removed = ca.clone();
    removed.remove_class(&id("u3")).map_err(|e| e.to_string())?;
    let (old5, new5) = (
        ca.board().filter_degrees()[&id("u5")],
        removed.board().filter_degrees()[&id("u5")],
    );
    ensure((old5, new5) == (4, 3), || format!("u5 degree {old5} -> {new5}"))?;
    Ok(format!(
        "degrees {degrees:?}; insertion updated {{u4}}; u5 degree {old5} -> {new5}"
    ))
}

fn curve_sanity() -> Outcome {
    let curve = CurveContext::toy();
    let points = curve.points();
    ensure(points.len() == 19, || format!("{} points", points.len()))?;
    let g = curve.generator();
    for a in &points {
        ensure(curve.add(a, &Point::Infinity).unwrap() == *a, || format!("{a:?} + O"))?;
        ensure(curve.add(a, &curve.neg(a)).unwrap() == Point::Infinity, || {
            format!("{a:?} + -{a:?}")
        })?;
        for b in &points {
            let ab = curve.add(a, b).unwrap();
            ensure(curve.contains(&ab) && ab == curve.add(b, a).unwrap(), || {
                format!("{a:?} + {b:?}")
            })?;
            for c in &points {
                let lhs = curve.add(&ab, c).unwrap();
                let rhs = curve.add(a, &curve.add(b, c).unwrap()).unwrap();
                ensure(lhs == rhs, || format!("associativity at {a:?} {b:?} {c:?}"))?;
            }
        }
    }
    ensure(curve.mul(19, &g).unwrap() == Point::Infinity, || "19G != O".into())?;
    for n in 1..19 {
        ensure(curve.mul(n, &g).unwrap() != Point::Infinity, || format!("{n}G = O"))?;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for _ in 0..500 {
        let n_ca = rng.gen_range(1..19);
        let ca_public = curve.mul_generator(n_ca);
        let (key, secret, k) = (rng.gen_range(0..17), rng.gen_range(1..19), rng.gen_range(1..19));
        let ct = curve
            .transport_encrypt(key, secret, &ca_public, k)
            .map_err(|e| e.to_string())?;
        let back = curve.transport_decrypt(&ct, n_ca).map_err(|e| e.to_string())?;
        ensure(back == (key, secret), || format!("({key}, {secret}) came back as {back:?}"))?;
    }
    Ok("19-point group law exhaustive, 19G = O, 500 transport round trips".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shift values", shift_values),
        ("wraparound counterexample", remark_counterexample),
        ("shift round trip", shift_round_trips),
        ("scheme correctness", scheme_correctness),
        ("attack soundness", attack_soundness),
        ("attack resistance", attack_resistance),
        ("incremental equals rebuild", incremental_equivalence),
        ("structural replay", structural_replay),
        ("curve sanity", curve_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
