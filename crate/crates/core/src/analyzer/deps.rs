use std::collections::BTreeMap;
use std::io::Write;

use super::parser::{base_type_name, referenced_type_names};
use super::{ClassSummary, DependencyEdge, DependencyKind, Snapshot, TypeKind};
use crate::error::Result;

/// Edges plus the number of type mentions that did not resolve to a class
/// of the snapshot (library types, typos, generated code).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyReport {
    pub edges: Vec<DependencyEdge>,
    pub unresolved_names: usize,
}

/// Typed class-to-class dependencies of a snapshot, sorted by
/// `(from, to, kind)` with multiplicities folded into `count`.
pub fn extract_dependencies(snapshot: &Snapshot) -> Vec<DependencyEdge> {
    dependency_report(snapshot).edges
}

pub fn dependency_report(snapshot: &Snapshot) -> DependencyReport {
    let mut folded: BTreeMap<(String, String, DependencyKind), u32> = BTreeMap::new();
    let mut unresolved = 0usize;

    for class in snapshot.classes() {
        if let Some(outer) = class.outer_fqn.as_deref().and_then(|o| snapshot.get(o)) {
            // Contain edges point from the outer type; recorded here so each
            // nested type contributes exactly one.
            if outer.fqn != class.fqn {
                *folded
                    .entry((outer.fqn.clone(), class.fqn.clone(), DependencyKind::Contain))
                    .or_default() += 1;
            }
        }

        let mut add = |to: Option<&ClassSummary>, kind: DependencyKind| match to {
            Some(target) if target.fqn != class.fqn => {
                *folded
                    .entry((class.fqn.clone(), target.fqn.clone(), kind))
                    .or_default() += 1;
            }
            Some(_) => {}
            None => unresolved += 1,
        };

        if class.outer_fqn.is_none() {
            for import in class.imports.iter().filter(|i| !i.ends_with(".*")) {
                add(snapshot.get(import), DependencyKind::Import);
            }
        }
        if let Some(sup) = class.superclass_fqn.as_deref() {
            add(snapshot.resolve(class, sup), DependencyKind::Extend);
        }
        let interface_kind = if class.kind == TypeKind::Interface {
            DependencyKind::Extend
        } else {
            DependencyKind::Implement
        };
        for iface in &class.interface_fqns {
            add(snapshot.resolve(class, iface), interface_kind);
        }
        for field in &class.fields {
            for name in referenced_type_names(&field.type_name) {
                add(snapshot.resolve(class, &name), DependencyKind::Use);
            }
        }
        for method in &class.methods {
            for name in referenced_type_names(&method.return_type) {
                add(snapshot.resolve(class, &name), DependencyKind::Return);
            }
            for param in &method.parameter_types {
                for name in referenced_type_names(param) {
                    add(snapshot.resolve(class, &name), DependencyKind::Parameter);
                }
            }
            for call in &method.invoked_names {
                if let Some(receiver) = call.receiver.as_deref() {
                    add(
                        snapshot.resolve(class, &base_type_name(receiver)),
                        DependencyKind::Call,
                    );
                }
            }
        }
    }

    DependencyReport {
        edges: folded
            .into_iter()
            .map(|((from_fqn, to_fqn, kind), count)| DependencyEdge {
                from_fqn,
                to_fqn,
                kind,
                count,
            })
            .collect(),
        unresolved_names: unresolved,
    }
}

/// Edges dump: `from,to,kind,count`.
pub fn write_edges<W: Write>(edges: &[DependencyEdge], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "kind", "count"])?;
    for e in edges {
        w.write_record([
            e.from_fqn.as_str(),
            e.to_fqn.as_str(),
            e.kind.as_str(),
            &e.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::parse_compilation_unit;

    fn snapshot(files: &[(&str, &str)]) -> Snapshot {
        Snapshot::new(
            files
                .iter()
                .flat_map(|(p, s)| parse_compilation_unit(s, p))
                .collect(),
        )
    }

    fn edge(from: &str, to: &str, kind: DependencyKind, count: u32) -> DependencyEdge {
        DependencyEdge {
            from_fqn: from.into(),
            to_fqn: to.into(),
            kind,
            count,
        }
    }

    #[test]
    fn single_class_has_no_edges() {
        let s = snapshot(&[("A.java", "package p; class A { A self; void f() { g(); } void g() {} }")]);
        assert!(extract_dependencies(&s).is_empty());
    }

    #[test]
    fn field_of_sibling_type_is_a_use() {
        let s = snapshot(&[
            ("p/A.java", "package p; class A { B b; }"),
            ("p/B.java", "package p; class B {}"),
        ]);
        assert_eq!(extract_dependencies(&s), vec![edge("p.A", "p.B", DependencyKind::Use, 1)]);
    }

    #[test]
    fn implements_and_return() {
        let s = snapshot(&[
            ("p/A.java", "package p; class A implements I { B make() { return null; } }"),
            ("p/B.java", "package p; class B {}"),
            ("p/I.java", "package p; interface I {}"),
        ]);
        assert_eq!(
            extract_dependencies(&s),
            vec![
                edge("p.A", "p.B", DependencyKind::Return, 1),
                edge("p.A", "p.I", DependencyKind::Implement, 1),
            ]
        );
    }

    #[test]
    fn all_kinds_and_folding() {
        let s = snapshot(&[
            (
                "a/A.java",
                "package a;\nimport b.B;\nimport java.util.List;\n\
                 public class A extends Base implements Face {\n\
                   private List<B> bs; private B one;\n\
                   B find(B key, Helper h) { h.assist(); B.create(); return new B(); }\n\
                   static class Nested {}\n\
                 }",
            ),
            ("a/Base.java", "package a; class Base {}"),
            ("a/Face.java", "package a; interface Face extends Marker {}"),
            ("a/Marker.java", "package a; interface Marker {}"),
            ("a/Helper.java", "package a; class Helper { void assist() {} }"),
            ("b/B.java", "package b; public class B { static B create() { return null; } }"),
        ]);
        let report = dependency_report(&s);
        assert_eq!(
            report.edges,
            vec![
                edge("a.A", "a.A.Nested", DependencyKind::Contain, 1),
                edge("a.A", "a.Base", DependencyKind::Extend, 1),
                edge("a.A", "a.Face", DependencyKind::Implement, 1),
                edge("a.A", "a.Helper", DependencyKind::Call, 1),
                edge("a.A", "a.Helper", DependencyKind::Parameter, 1),
                edge("a.A", "b.B", DependencyKind::Import, 1),
                edge("a.A", "b.B", DependencyKind::Call, 2),
                edge("a.A", "b.B", DependencyKind::Return, 1),
                edge("a.A", "b.B", DependencyKind::Parameter, 1),
                edge("a.A", "b.B", DependencyKind::Use, 2),
                edge("a.Face", "a.Marker", DependencyKind::Extend, 1),
            ]
        );
        // java.util.List import and List field type
        assert_eq!(report.unresolved_names, 2);
    }

    #[test]
    fn edges_dump_format() {
        let mut buf = Vec::new();
        write_edges(&[edge("p.A", "p.B", DependencyKind::Use, 3)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "from,to,kind,count\np.A,p.B,Use,3\n");
    }
}
