//! Static analysis of Java sources: class summaries, CK metrics and a typed
//! class-level dependency graph.

mod deps;
mod lexer;
mod metrics;
mod parser;
mod snapshot;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use deps::{dependency_report, extract_dependencies, write_edges, DependencyReport};
pub use metrics::{compute_all, compute_ck, write_metrics};
pub use parser::{parse_compilation_unit, parse_source_bytes};
pub use snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub name: String,
    /// Declared type as written, e.g. `Map<String,Order>`.
    pub type_name: String,
}

/// A call site inside a method body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Invocation {
    /// Receiver type as written, `None` when it cannot be determined
    /// syntactically. Constructor calls use the created type.
    pub receiver: Option<String>,
    /// Method name; `<init>` for constructor calls.
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub is_constructor: bool,
    pub parameter_types: Vec<String>,
    /// Empty for constructors.
    pub return_type: String,
    pub cyclomatic_complexity: u32,
    pub invoked_names: Vec<Invocation>,
    /// Fields of the enclosing class read or written, deduplicated, sorted.
    pub accessed_fields: Vec<String>,
}

impl MethodSummary {
    /// Identity used for similarity matching: `name/arity`, with constructors
    /// normalized so that renaming the class does not change them.
    pub fn signature(&self) -> String {
        let name = if self.is_constructor { "<init>" } else { &self.name };
        format!("{name}/{}", self.parameter_types.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub fqn: String,
    pub package: String,
    pub kind: TypeKind,
    /// Repository-relative source path.
    pub path: String,
    /// Enclosing type for nested declarations.
    pub outer_fqn: Option<String>,
    /// Superclass as written in the source; resolved against a [`Snapshot`].
    pub superclass_fqn: Option<String>,
    /// `implements` list for classes, `extends` list for interfaces, as written.
    pub interface_fqns: Vec<String>,
    /// Non-static imports of the enclosing file (`a.b.C` or `a.b.*`).
    pub imports: Vec<String>,
    pub methods: Vec<MethodSummary>,
    pub fields: Vec<FieldSummary>,
    pub loc: u32,
}

impl ClassSummary {
    /// Name relative to the package, e.g. `Outer.Inner`.
    pub fn local_name(&self) -> &str {
        if self.package.is_empty() {
            &self.fqn
        } else {
            &self.fqn[self.package.len() + 1..]
        }
    }

    pub fn simple_name(&self) -> &str {
        self.fqn.rsplit('.').next().unwrap_or(&self.fqn)
    }

    pub fn field_types(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.type_name.as_str())
    }

    /// Member signatures: `m:name/arity` for methods, `f:name` for fields.
    pub fn member_signatures(&self) -> std::collections::BTreeSet<String> {
        self.methods
            .iter()
            .map(|m| format!("m:{}", m.signature()))
            .chain(self.fields.iter().map(|f| format!("f:{}", f.name)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CkMetrics {
    pub wmc: u32,
    pub dit: u32,
    pub noc: u32,
    pub cbo: u32,
    pub rfc: u32,
    pub lcom: u32,
    pub loc: u32,
    pub fan_in: u32,
    pub fan_out: u32,
}

impl CkMetrics {
    pub const NAMES: [&'static str; 9] =
        ["wmc", "dit", "noc", "cbo", "rfc", "lcom", "loc", "fan_in", "fan_out"];

    pub fn values(&self) -> [u32; 9] {
        [
            self.wmc, self.dit, self.noc, self.cbo, self.rfc, self.lcom, self.loc, self.fan_in,
            self.fan_out,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependencyKind {
    Import,
    Contain,
    Call,
    Return,
    Implement,
    Extend,
    Parameter,
    Use,
}

impl DependencyKind {
    pub const ALL: [DependencyKind; 8] = [
        DependencyKind::Import,
        DependencyKind::Contain,
        DependencyKind::Call,
        DependencyKind::Return,
        DependencyKind::Implement,
        DependencyKind::Extend,
        DependencyKind::Parameter,
        DependencyKind::Use,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DependencyKind::Import => "Import",
            DependencyKind::Contain => "Contain",
            DependencyKind::Call => "Call",
            DependencyKind::Return => "Return",
            DependencyKind::Implement => "Implement",
            DependencyKind::Extend => "Extend",
            DependencyKind::Parameter => "Parameter",
            DependencyKind::Use => "Use",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DependencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from_fqn: String,
    pub to_fqn: String,
    pub kind: DependencyKind,
    pub count: u32,
}
