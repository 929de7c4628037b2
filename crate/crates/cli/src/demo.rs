//! `hierkey demo paper`: the worked examples, replayed and checked.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::Result;
use hierkey::{
    attack_boards, rebuild_oracle, AttackKind, Authority, ClassId, CurveContext, Hierarchy,
    RadixContext, Scheme, SchemeParams,
};

const P: u64 = 99991;

struct Checks {
    passed: usize,
    failed: usize,
}

impl Checks {
    fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "pass" } else { "FAIL" });
    }
}

fn id(s: &str) -> ClassId {
    ClassId::from(s)
}

fn five_classes() -> Result<Hierarchy> {
    let edges = [("u1", "u2"), ("u1", "u3"), ("u2", "u4"), ("u2", "u5"), ("u3", "u5")];
    Ok(Hierarchy::from_edges(
        ["u1", "u2", "u3", "u4", "u5"].map(id),
        edges.iter().map(|(a, b)| (id(a), id(b))),
    )?)
}

fn params(scheme: Scheme) -> Result<SchemeParams> {
    let curve = CurveContext::new(P, 6, 3, 1, 32997, 99901)?;
    Ok(SchemeParams::new(scheme, P, scheme.uses_curve().then_some(curve), 10)?)
}

fn degrees(ca: &Authority) -> BTreeMap<String, usize> {
    ca.board()
        .filter_degrees()
        .into_iter()
        .map(|(c, d)| (c.to_string(), d))
        .collect()
}

fn matches_oracle(ca: &Authority) -> Result<bool> {
    let oracle = rebuild_oracle(ca)?;
    Ok(oracle
        .iter()
        .all(|(c, f)| ca.board().classes[c].filter.as_ref() == Some(f)))
}

fn names(set: &BTreeSet<ClassId>) -> Vec<String> {
    set.iter().map(|c| c.to_string()).collect()
}

/// Runs every check and reports whether all of them passed.
pub fn paper(seed: u64) -> Result<bool> {
    let mut c = Checks {
        passed: 0,
        failed: 0,
    };

    println!("shift masks, b = 10, p = {P}");
    let radix = RadixContext::new(10, P)?;
    let table: Vec<u64> = (1..=4)
        .map(|l| radix.cyclic_shift(21349, l))
        .collect::<Result<_, _>>()?;
    for (l, v) in table.iter().enumerate() {
        println!("  L_{}(21349) = {v}", l + 1);
    }
    c.check(
        "shift table",
        table == [23491, 24913, 29134, 21349],
        format!("{table:?}"),
    );

    let narrow = RadixContext::new(10, 239)?;
    let there = narrow.cyclic_shift(235, 1)?;
    let back = narrow.cyclic_shift(there, -1)?;
    c.check(
        "wraparound under p = 239",
        back == 41,
        format!("L_1(235) = {there}, L_-1({there}) = {back}"),
    );

    println!("five-class hierarchy, m1, seed {seed}");
    let mut ca = Authority::bootstrap(params(Scheme::Method1)?, &five_classes()?, &BTreeMap::new(), seed)?;
    let d = degrees(&ca);
    let got: Vec<usize> = d.values().copied().collect();
    c.check("filter degrees", got == [0, 2, 2, 3, 4], format!("{d:?}"));

    let report = ca.insert_class(&id("u6"), &[id("u1")], &[id("u4")], None)?;
    c.check(
        "insert u6 between u1 and u4",
        names(&report.updated) == ["u4"] && !report.rebuilt_all,
        format!("epoch {}, updated {:?}", report.epoch, names(&report.updated)),
    );
    let d = degrees(&ca);
    c.check(
        "u4 and u6 degrees",
        d["u4"] == 4 && d["u6"] == 2,
        format!("u4 {}, u6 {}", d["u4"], d["u6"]),
    );
    let k4 = ca.key_of(&id("u4"))?;
    let got = ca.derive(&id("u6"), &id("u4"))?;
    c.check(
        "u6 derives K4",
        got.authorized && got.key == k4,
        format!("derived {}, stored {k4}", got.key),
    );
    c.check("insertion matches rebuild", matches_oracle(&ca)?, "coefficient-exact");

    let report = ca.remove_class(&id("u3"))?;
    c.check(
        "remove u3",
        names(&report.updated) == ["u5"],
        format!("epoch {}, updated {:?}", report.epoch, names(&report.updated)),
    );
    let d = degrees(&ca);
    c.check("u5 degree", d["u5"] == 3, format!("{}", d["u5"]));
    let k5 = ca.key_of(&id("u5"))?;
    let ok = ["u1", "u2"].iter().all(|v| {
        ca.derive(&id(v), &id("u5"))
            .map(|r| r.authorized && r.key == k5)
            .unwrap_or(false)
    });
    c.check("u1 and u2 still derive K5", ok, format!("K5 = {k5}"));
    c.check("removal matches rebuild", matches_oracle(&ca)?, "coefficient-exact");

    for (scheme, expect) in [(Scheme::JengWang, true), (Scheme::Method1, false)] {
        let before =
            Authority::bootstrap(params(scheme)?, &five_classes()?, &BTreeMap::new(), seed)?;
        let mut after = before.clone();
        after.insert_class(&id("u6"), &[id("u1")], &[id("u4")], None)?;
        let k4 = after.key_of(&id("u4"))?;
        let r = attack_boards(AttackKind::TripathyPaul, before.board(), after.board(), &id("u4"))?;
        let recovered = r.recovers(k4);
        c.check(
            &format!("coefficient attack on {scheme}"),
            recovered == expect,
            if recovered {
                format!("recovered K4 = {k4}")
            } else {
                format!("failed, candidates {:?}, K4 = {k4}", r.candidate_keys)
            },
        );
    }

    println!("{} passed, {} failed", c.passed, c.failed);
    Ok(c.failed == 0)
}
