use std::collections::HashMap;

use rayon::prelude::*;

use super::parser::parse_source_bytes;
use super::ClassSummary;

/// All classes of one source tree, with syntactic name resolution.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    classes: Vec<ClassSummary>,
    index: HashMap<String, usize>,
}

impl Snapshot {
    /// Builds a snapshot; a later duplicate fqn is dropped with a warning.
    pub fn new(classes: Vec<ClassSummary>) -> Self {
        let mut kept = Vec::with_capacity(classes.len());
        let mut index = HashMap::with_capacity(classes.len());
        for class in classes {
            if index.contains_key(&class.fqn) {
                log::warn!("duplicate class {} in {}; keeping the first", class.fqn, class.path);
                continue;
            }
            index.insert(class.fqn.clone(), kept.len());
            kept.push(class);
        }
        Self {
            classes: kept,
            index,
        }
    }

    /// Parses `(path, bytes)` sources in parallel; output order follows input order.
    pub fn from_sources(sources: &[(String, Vec<u8>)]) -> Self {
        let parsed: Vec<Vec<ClassSummary>> = sources
            .par_iter()
            .map(|(path, bytes)| parse_source_bytes(bytes, path).unwrap_or_default())
            .collect();
        Self::new(parsed.into_iter().flatten().collect())
    }

    pub fn classes(&self) -> &[ClassSummary] {
        &self.classes
    }

    pub fn get(&self, fqn: &str) -> Option<&ClassSummary> {
        self.index.get(fqn).map(|&i| &self.classes[i])
    }

    pub fn contains(&self, fqn: &str) -> bool {
        self.index.contains_key(fqn)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Resolves a type name as written inside `from` to a class of this
    /// snapshot: member types of `from` and its enclosing types, explicit
    /// imports, the same package, on-demand imports, then fully-qualified.
    pub fn resolve<'s>(&'s self, from: &'s ClassSummary, name: &str) -> Option<&'s ClassSummary> {
        if name.is_empty() {
            return None;
        }
        if let Some((head, rest)) = name.split_once('.') {
            if let Some(owner) = self.resolve_simple(from, head) {
                if let Some(c) = self.get(&format!("{}.{rest}", owner.fqn)) {
                    return Some(c);
                }
            }
            return self.get(name);
        }
        self.resolve_simple(from, name)
    }

    fn resolve_simple<'s>(&'s self, from: &'s ClassSummary, name: &str) -> Option<&'s ClassSummary> {
        let mut scope = Some(from);
        while let Some(class) = scope {
            if class.simple_name() == name {
                return Some(class);
            }
            if let Some(member) = self.get(&format!("{}.{name}", class.fqn)) {
                return Some(member);
            }
            scope = class.outer_fqn.as_deref().and_then(|o| self.get(o));
        }
        let suffix = format!(".{name}");
        for import in &from.imports {
            if import.ends_with(&suffix) {
                if let Some(c) = self.get(import) {
                    return Some(c);
                }
            }
        }
        let same_package = if from.package.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", from.package)
        };
        if let Some(c) = self.get(&same_package) {
            return Some(c);
        }
        for import in &from.imports {
            if let Some(prefix) = import.strip_suffix(".*") {
                if let Some(c) = self.get(&format!("{prefix}.{name}")) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Resolved superclass of `class`, if it is part of this snapshot.
    pub fn superclass_of<'s>(&'s self, class: &'s ClassSummary) -> Option<&'s ClassSummary> {
        class
            .superclass_fqn
            .as_deref()
            .and_then(|s| self.resolve(class, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::parse_compilation_unit;

    fn snapshot(files: &[(&str, &str)]) -> Snapshot {
        Snapshot::new(
            files
                .iter()
                .flat_map(|(path, src)| parse_compilation_unit(src, path))
                .collect(),
        )
    }

    #[test]
    fn resolution_order() {
        let s = snapshot(&[
            ("p/A.java", "package p; import q.B; import r.*; class A { class N {} }"),
            ("p/C.java", "package p; class C {}"),
            ("q/B.java", "package q; public class B { public static class Inner {} }"),
            ("r/D.java", "package r; public class D {}"),
            ("p/B.java", "package p; class B {}"),
        ]);
        let a = s.get("p.A").unwrap();
        let fqn = |n: &str| s.resolve(a, n).map(|c| c.fqn.clone());
        assert_eq!(fqn("N").as_deref(), Some("p.A.N"));
        assert_eq!(fqn("A").as_deref(), Some("p.A"));
        // explicit import beats same-package
        assert_eq!(fqn("B").as_deref(), Some("q.B"));
        assert_eq!(fqn("C").as_deref(), Some("p.C"));
        assert_eq!(fqn("D").as_deref(), Some("r.D"));
        assert_eq!(fqn("B.Inner").as_deref(), Some("q.B.Inner"));
        assert_eq!(fqn("r.D").as_deref(), Some("r.D"));
        assert_eq!(fqn("String"), None);

        let n = s.get("p.A.N").unwrap();
        assert_eq!(s.resolve(n, "A").map(|c| c.fqn.as_str()), Some("p.A"));
    }

    #[test]
    fn duplicate_fqns_keep_first() {
        let s = snapshot(&[("a/A.java", "package a; class A { int x; }"), ("b/A.java", "package a; class A {}")]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get("a.A").unwrap().path, "a/A.java");
    }
}
