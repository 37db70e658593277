//! Chidamber–Kemerer and size metrics.
//!
//! LCOM is the original pair-counting LCOM1: over all method pairs, the
//! number sharing no accessed field minus the number sharing at least one,
//! floored at zero. Constructors count as methods.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use super::{ClassSummary, CkMetrics, DependencyEdge, Snapshot};
use crate::error::{Error, Result};

pub fn compute_ck(
    target: &ClassSummary,
    universe: &Snapshot,
    edges: &[DependencyEdge],
) -> Result<CkMetrics> {
    if universe.get(&target.fqn).is_none() {
        return Err(Error::contract(format!(
            "class {} is not part of the analyzed snapshot",
            target.fqn
        )));
    }
    let mut incoming = BTreeSet::new();
    let mut outgoing = BTreeSet::new();
    for e in edges {
        if e.from_fqn == target.fqn {
            outgoing.insert(e.to_fqn.as_str());
        }
        if e.to_fqn == target.fqn {
            incoming.insert(e.from_fqn.as_str());
        }
    }
    let noc = universe
        .classes()
        .iter()
        .filter(|c| universe.superclass_of(c).is_some_and(|s| s.fqn == target.fqn))
        .count() as u32;
    Ok(assemble(target, universe, &incoming, &outgoing, noc))
}

/// Metrics for every class of the snapshot, keyed by fqn.
pub fn compute_all(universe: &Snapshot, edges: &[DependencyEdge]) -> BTreeMap<String, CkMetrics> {
    let mut incoming: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let mut outgoing: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for e in edges {
        outgoing.entry(&e.from_fqn).or_default().insert(&e.to_fqn);
        incoming.entry(&e.to_fqn).or_default().insert(&e.from_fqn);
    }
    let mut children: HashMap<&str, u32> = HashMap::new();
    for class in universe.classes() {
        if let Some(parent) = universe.superclass_of(class) {
            *children.entry(parent.fqn.as_str()).or_default() += 1;
        }
    }
    let empty = BTreeSet::new();
    universe
        .classes()
        .iter()
        .map(|c| {
            let m = assemble(
                c,
                universe,
                incoming.get(c.fqn.as_str()).unwrap_or(&empty),
                outgoing.get(c.fqn.as_str()).unwrap_or(&empty),
                children.get(c.fqn.as_str()).copied().unwrap_or(0),
            );
            (c.fqn.clone(), m)
        })
        .collect()
}

fn assemble(
    class: &ClassSummary,
    universe: &Snapshot,
    incoming: &BTreeSet<&str>,
    outgoing: &BTreeSet<&str>,
    noc: u32,
) -> CkMetrics {
    let wmc = class.methods.iter().map(|m| m.cyclomatic_complexity).sum();
    let invoked: HashSet<_> = class.methods.iter().flat_map(|m| &m.invoked_names).collect();
    CkMetrics {
        wmc,
        dit: depth_of_inheritance(class, universe),
        noc,
        cbo: incoming.union(outgoing).count() as u32,
        rfc: (class.methods.len() + invoked.len()) as u32,
        lcom: lcom1(class),
        loc: class.loc,
        fan_in: incoming.len() as u32,
        fan_out: outgoing.len() as u32,
    }
}

/// Number of ancestors reachable inside the snapshot. A cycle is cut at the
/// first revisited class.
fn depth_of_inheritance(class: &ClassSummary, universe: &Snapshot) -> u32 {
    let mut seen = HashSet::from([class.fqn.as_str()]);
    let mut depth = 0;
    let mut current = class;
    while let Some(parent) = universe.superclass_of(current) {
        if !seen.insert(parent.fqn.as_str()) {
            log::warn!("inheritance cycle through {} while measuring {}", parent.fqn, class.fqn);
            break;
        }
        depth += 1;
        current = parent;
    }
    depth
}

fn lcom1(class: &ClassSummary) -> u32 {
    let sets: Vec<HashSet<&str>> = class
        .methods
        .iter()
        .map(|m| m.accessed_fields.iter().map(String::as_str).collect())
        .collect();
    let (mut disjoint, mut sharing) = (0i64, 0i64);
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].is_disjoint(&sets[j]) {
                disjoint += 1;
            } else {
                sharing += 1;
            }
        }
    }
    (disjoint - sharing).max(0) as u32
}

/// Metrics dump: `fqn,wmc,dit,noc,cbo,rfc,lcom,loc,fan_in,fan_out`.
pub fn write_metrics<W: Write>(metrics: &BTreeMap<String, CkMetrics>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["fqn"];
    header.extend(CkMetrics::NAMES);
    w.write_record(&header)?;
    for (fqn, m) in metrics {
        let mut row = vec![fqn.clone()];
        row.extend(m.values().iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{extract_dependencies, parse_compilation_unit};

    fn snapshot(files: &[(&str, &str)]) -> Snapshot {
        Snapshot::new(
            files
                .iter()
                .flat_map(|(p, s)| parse_compilation_unit(s, p))
                .collect(),
        )
    }

    fn metrics_of(s: &Snapshot, fqn: &str) -> CkMetrics {
        let edges = extract_dependencies(s);
        compute_ck(s.get(fqn).unwrap(), s, &edges).unwrap()
    }

    #[test]
    fn wmc_sums_complexities() {
        let s = snapshot(&[("A.java", "class A { void a() {} void b(int x) { if (x > 0) {} } }")]);
        assert_eq!(metrics_of(&s, "A").wmc, 3);
    }

    #[test]
    fn dit_counts_only_known_ancestors() {
        let s = snapshot(&[(
            "p/A.java",
            "package p; class A extends java.util.ArrayList {} class B extends A {} class C extends B {}",
        )]);
        assert_eq!(metrics_of(&s, "p.A").dit, 0);
        assert_eq!(metrics_of(&s, "p.C").dit, 2);
        assert_eq!(metrics_of(&s, "p.A").noc, 1);
    }

    #[test]
    fn inheritance_cycles_terminate() {
        let s = snapshot(&[("p/A.java", "package p; class A extends B {} class B extends A {}")]);
        assert_eq!(metrics_of(&s, "p.A").dit, 1);
        assert_eq!(metrics_of(&s, "p.B").dit, 1);
    }

    #[test]
    fn lcom1_counts_pairs() {
        let s = snapshot(&[(
            "A.java",
            "class A { int a; int b; void f() { a++; } void g() { b++; } }",
        )]);
        assert_eq!(metrics_of(&s, "A").lcom, 1);
        let s = snapshot(&[(
            "A.java",
            "class A { int a; int b; void f() { a++; } void g() { a++; } void h() { b++; } }",
        )]);
        // P = 2 (f-h, g-h), Q = 1 (f-g)
        assert_eq!(metrics_of(&s, "A").lcom, 1);
        let s = snapshot(&[("A.java", "class A { int a; void f() { a++; } void g() { a--; } }")]);
        assert_eq!(metrics_of(&s, "A").lcom, 0);
    }

    #[test]
    fn target_outside_universe_is_rejected() {
        let s = snapshot(&[("A.java", "class A {}")]);
        let other = parse_compilation_unit("class Z {}", "Z.java").remove(0);
        assert!(matches!(compute_ck(&other, &s, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn compute_all_agrees_with_compute_ck() {
        let s = snapshot(&[
            ("p/A.java", "package p; class A extends B { C c; void f() { c.g(); new D(); } }"),
            ("p/B.java", "package p; class B implements I {}"),
            ("p/C.java", "package p; class C { void g() {} B b; }"),
            ("p/D.java", "package p; class D extends B {}"),
            ("p/I.java", "package p; interface I {}"),
        ]);
        let edges = extract_dependencies(&s);
        let all = compute_all(&s, &edges);
        for class in s.classes() {
            assert_eq!(all[&class.fqn], compute_ck(class, &s, &edges).unwrap(), "{}", class.fqn);
        }
        let fan_in: u32 = all.values().map(|m| m.fan_in).sum();
        let fan_out: u32 = all.values().map(|m| m.fan_out).sum();
        let pairs: BTreeSet<_> = edges.iter().map(|e| (&e.from_fqn, &e.to_fqn)).collect();
        assert_eq!(fan_in as usize, pairs.len());
        assert_eq!(fan_out as usize, pairs.len());
    }
}
