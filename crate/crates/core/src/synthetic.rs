//! Scripted Java repositories with known refactorings, for tests and demos.
//!
//! Every class owns a distinctive token that prefixes all of its member
//! names, so member sets of unrelated classes never overlap and each planted
//! operation is the only plausible match.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::RefactoringKind;
use crate::error::{Error, Result};

/// A refactoring the script applied, with the commit that carries it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlantedOp {
    pub commit_id: String,
    pub kind: RefactoringKind,
    pub before_fqn: String,
    pub after_fqn: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub path: PathBuf,
    pub planted: Vec<PlantedOp>,
    /// Every commit, oldest first.
    pub commit_ids: Vec<String>,
    pub refactoring_commits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Str,
    Ref(usize),
}

#[derive(Debug, Clone)]
struct FieldSpec {
    name: String,
    ty: Ty,
}

#[derive(Debug, Clone)]
struct MethodSpec {
    name: String,
    arity: usize,
    stmts: usize,
    version: u32,
}

#[derive(Debug, Clone)]
struct ClassSpec {
    package: String,
    name: String,
    token: String,
    fields: Vec<FieldSpec>,
    methods: Vec<MethodSpec>,
    ctor: bool,
    alive: bool,
}

impl ClassSpec {
    fn fqn(&self) -> String {
        format!("{}.{}", self.package, self.name)
    }

    fn path(&self) -> String {
        format!("src/main/java/{}/{}.java", self.package.replace('.', "/"), self.name)
    }
}

const VERBS: [&str; 8] = ["compute", "load", "apply", "merge", "check", "render", "resolve", "count"];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct Script {
    dir: PathBuf,
    classes: Vec<ClassSpec>,
    written: BTreeMap<String, String>,
    clock: i64,
    pending: Vec<(RefactoringKind, String, String)>,
    planted: Vec<PlantedOp>,
    commit_ids: Vec<String>,
    refactoring_commits: usize,
}

impl Script {
    fn init(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let script = Self {
            dir: dir.to_path_buf(),
            classes: Vec::new(),
            written: BTreeMap::new(),
            clock: 1_577_836_800,
            pending: Vec::new(),
            planted: Vec::new(),
            commit_ids: Vec::new(),
            refactoring_commits: 0,
        };
        script.git(&["init", "-q"], &[])?;
        script.git(&["symbolic-ref", "HEAD", "refs/heads/main"], &[])?;
        Ok(script)
    }

    fn git(&self, args: &[&str], env: &[(&str, String)]) -> Result<String> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.dir)
            .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false"])
            .args(args)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env("LC_ALL", "C")
            .envs(env.iter().map(|(k, v)| (*k, v.as_str())))
            .output()?;
        if !out.status.success() {
            return Err(Error::Git {
                command: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    fn add_class(
        &mut self,
        package: &str,
        name: &str,
        token: &str,
        methods: usize,
        ctor: bool,
        refs: &[usize],
    ) -> usize {
        let mut fields = vec![
            FieldSpec { name: format!("{token}Count"), ty: Ty::Int },
            FieldSpec { name: format!("{token}Label"), ty: Ty::Str },
        ];
        for (i, &r) in refs.iter().enumerate() {
            fields.push(FieldSpec { name: format!("{token}Link{i}"), ty: Ty::Ref(r) });
        }
        let methods = (0..methods)
            .map(|j| MethodSpec {
                name: format!("{}{}", VERBS[j % VERBS.len()], capitalize(token)) + &suffix(j),
                arity: j % 3,
                stmts: 2 + (j * 3) % 5,
                version: 1,
            })
            .collect();
        self.classes.push(ClassSpec {
            package: package.into(),
            name: name.into(),
            token: token.into(),
            fields,
            methods,
            ctor,
            alive: true,
        });
        self.classes.len() - 1
    }

    fn fqn(&self, id: usize) -> String {
        self.classes[id].fqn()
    }

    fn edit(&mut self, id: usize, method: usize, grow: usize) {
        let m = method % self.classes[id].methods.len();
        let spec = &mut self.classes[id].methods[m];
        spec.version += 1;
        spec.stmts += grow;
    }

    fn add_method(&mut self, id: usize) {
        let class = &mut self.classes[id];
        let j = class.methods.len();
        class.methods.push(MethodSpec {
            name: format!("{}{}", VERBS[j % VERBS.len()], capitalize(&class.token)) + &suffix(j),
            arity: 1,
            stmts: 3,
            version: 1,
        });
    }

    fn move_class(&mut self, id: usize, package: &str) {
        assert_ne!(self.classes[id].package, package, "a move must change the package");
        let before = self.fqn(id);
        self.classes[id].package = package.into();
        self.pending.push((RefactoringKind::MoveClass, before, self.fqn(id)));
    }

    fn rename_class(&mut self, id: usize, name: &str) {
        assert_ne!(self.classes[id].name, name, "a rename must change the name");
        let before = self.fqn(id);
        self.classes[id].name = name.into();
        self.pending.push((RefactoringKind::RenameClass, before, self.fqn(id)));
    }

    fn move_rename_class(&mut self, id: usize, package: &str, name: &str) {
        assert_ne!(self.classes[id].package, package, "a move must change the package");
        assert_ne!(self.classes[id].name, name, "a rename must change the name");
        let before = self.fqn(id);
        self.classes[id].package = package.into();
        self.classes[id].name = name.into();
        self.pending.push((RefactoringKind::MoveAndRenameClass, before, self.fqn(id)));
    }

    /// Moves the last `k` methods and the last field of `src` into a new
    /// class of the same package.
    fn extract_class(&mut self, src: usize, name: &str, k: usize) -> usize {
        let class = &mut self.classes[src];
        assert!(class.methods.len() > k && class.fields.len() > 1, "source too small to extract from");
        let methods = class.methods.split_off(class.methods.len() - k);
        let field = class.fields.pop().expect("field");
        let package = class.package.clone();
        // later additions to the new class must not reuse the source's names
        let token = format!("{}x", class.token);
        self.classes.push(ClassSpec {
            package,
            name: name.into(),
            token,
            fields: vec![field],
            methods,
            ctor: false,
            alive: true,
        });
        let id = self.classes.len() - 1;
        self.pending.push((RefactoringKind::ExtractClass, self.fqn(src), self.fqn(id)));
        id
    }

    fn delete_class(&mut self, id: usize) {
        self.classes[id].alive = false;
        for class in &mut self.classes {
            class.fields.retain(|f| f.ty != Ty::Ref(id));
        }
    }

    fn render(&self, id: usize) -> String {
        let c = &self.classes[id];
        let mut imports = BTreeSet::new();
        for f in &c.fields {
            if let Ty::Ref(r) = f.ty {
                let target = &self.classes[r];
                if target.package != c.package {
                    imports.insert(target.fqn());
                }
            }
        }
        let mut out = format!("package {};\n\n", c.package);
        for i in &imports {
            out += &format!("import {i};\n");
        }
        if !imports.is_empty() {
            out.push('\n');
        }
        out += &format!("public class {} {{\n", c.name);
        for f in &c.fields {
            let ty = match f.ty {
                Ty::Int => "int".to_string(),
                Ty::Str => "String".to_string(),
                Ty::Ref(r) => self.classes[r].name.clone(),
            };
            out += &format!("    private {ty} {};\n", f.name);
        }
        if c.ctor {
            out += &format!(
                "\n    public {}(int start) {{\n        this.{} = start;\n    }}\n",
                c.name, c.fields[0].name
            );
        }
        for (j, m) in c.methods.iter().enumerate() {
            let params: Vec<String> = (0..m.arity).map(|p| format!("int p{p}")).collect();
            out += &format!("\n    public int {}({}) {{\n", m.name, params.join(", "));
            let field = &c.fields[j % c.fields.len()];
            let seed = match field.ty {
                Ty::Int => field.name.clone(),
                Ty::Str => format!("{}.length()", field.name),
                Ty::Ref(_) => format!("{}.hashCode()", field.name),
            };
            out += &format!("        int acc = {seed};\n");
            for p in 0..m.arity {
                out += &format!("        acc += p{p};\n");
            }
            for s in 0..m.stmts {
                if s % 4 == 3 {
                    out += &format!("        if (acc > {}) {{\n            acc -= {};\n        }}\n", 100 * (s + 1), m.version);
                } else {
                    out += &format!("        acc += {} * {};\n", s + 1, m.version);
                }
            }
            out += "        return acc;\n    }\n";
        }
        out += "}\n";
        out
    }

    /// Writes the current model to disk and commits it.
    fn commit(&mut self, message: &str, gap_secs: i64, author: &str) -> Result<String> {
        let mut current = BTreeMap::new();
        for (id, c) in self.classes.iter().enumerate() {
            if c.alive {
                current.insert(c.path(), self.render(id));
            }
        }
        for path in self.written.keys() {
            if !current.contains_key(path) {
                fs::remove_file(self.dir.join(path))?;
            }
        }
        for (path, text) in &current {
            if self.written.get(path) != Some(text) {
                let full = self.dir.join(path);
                fs::create_dir_all(full.parent().expect("file has a parent"))?;
                fs::write(full, text)?;
            }
        }
        self.written = current;

        self.clock += gap_secs;
        let date = format!("@{} +0000", self.clock);
        let email = format!("{author}@example.org");
        self.git(&["add", "-A"], &[])?;
        self.git(
            &["commit", "-q", "--allow-empty", "-m", message],
            &[
                ("GIT_AUTHOR_NAME", author.to_string()),
                ("GIT_AUTHOR_EMAIL", email.clone()),
                ("GIT_AUTHOR_DATE", date.clone()),
                ("GIT_COMMITTER_NAME", author.to_string()),
                ("GIT_COMMITTER_EMAIL", email),
                ("GIT_COMMITTER_DATE", date),
            ],
        )?;
        let id = self.git(&["rev-parse", "HEAD"], &[])?;
        if !self.pending.is_empty() {
            self.refactoring_commits += 1;
        }
        for (kind, before_fqn, after_fqn) in self.pending.drain(..) {
            self.planted.push(PlantedOp {
                commit_id: id.clone(),
                kind,
                before_fqn,
                after_fqn,
            });
        }
        self.commit_ids.push(id.clone());
        Ok(id)
    }

    fn finish(mut self) -> SyntheticCorpus {
        self.planted.sort();
        SyntheticCorpus {
            path: self.dir,
            planted: self.planted,
            commit_ids: self.commit_ids,
            refactoring_commits: self.refactoring_commits,
        }
    }
}

fn suffix(j: usize) -> String {
    if j < VERBS.len() {
        String::new()
    } else {
        (j / VERBS.len()).to_string()
    }
}

/// The small hand-written corpus: an initial commit, then 20 planted
/// refactorings in 16 commits interleaved with 30 ordinary commits.
///
/// Final layout (used by the planning fixtures):
///
/// | package       | classes                                                  |
/// |---------------|----------------------------------------------------------|
/// | `shop.core`   | `Cart`, `Checkout`, `Stock`, `TaxRules`, `CheckoutAudit` |
/// | `shop.util`   | `Money`, `Text`, `Clock`                                 |
/// | `shop.api`    | `OrderService`, `Gateway`, `Catalog`, `Shipping`, `ShippingQuote`, `OrderHistory`, `ReportFilters`, `CatalogSearch` |
/// | `shop.model`  | `Product`, `Client`, `Invoice`, `InvoiceLines`, `PostalAddress`, `Discount`, `PaymentTerms` |
/// | `shop.report` | `Ledger`, `LedgerEntries`, `Forecast`, `SalesReport`, `Formatter` |
pub fn build_small_corpus(dir: &Path) -> Result<SyntheticCorpus> {
    let mut s = Script::init(dir)?;
    let (a, b) = ("ana", "ben");

    let money = s.add_class("shop.util", "Money", "amber", 5, true, &[]);
    let strings = s.add_class("shop.util", "Strings", "birch", 5, false, &[]);
    let dates = s.add_class("shop.util", "Dates", "cedar", 4, false, &[]);
    let product = s.add_class("shop.model", "Product", "dune", 6, true, &[money]);
    let customer = s.add_class("shop.model", "Customer", "ember", 5, true, &[strings]);
    let invoice = s.add_class("shop.model", "Invoice", "fjord", 8, true, &[customer, money]);
    let address = s.add_class("shop.util", "Address", "glade", 4, false, &[strings]);
    let cart = s.add_class("shop.core", "Cart", "heath", 7, true, &[product, money]);
    let checkout = s.add_class("shop.core", "Checkout", "iris", 8, true, &[cart, invoice]);
    let pricing = s.add_class("shop.core", "Pricing", "jade", 5, false, &[money]);
    let inventory = s.add_class("shop.core", "Inventory", "kelp", 6, true, &[product]);
    let orders = s.add_class("shop.api", "OrderService", "larch", 8, true, &[checkout, customer]);
    let payments = s.add_class("shop.core", "PaymentGateway", "moss", 5, false, &[money]);
    let catalog = s.add_class("shop.api", "Catalog", "nectar", 7, true, &[product, inventory]);
    let shipping = s.add_class("shop.core", "Shipping", "onyx", 5, true, &[address]);
    let reports = s.add_class("shop.api", "Reports", "pearl", 9, false, &[invoice, dates]);
    let discount = s.add_class("shop.core", "Discount", "quartz", 4, false, &[pricing]);
    let ledger = s.add_class("shop.api", "Ledger", "raven", 6, true, &[invoice]);
    let forecast = s.add_class("shop.core", "Forecast", "sage", 5, false, &[inventory, dates]);
    let terms = s.add_class("shop.api", "Terms", "thyme", 4, false, &[]);
    s.commit("Initial shop skeleton", 0, a)?;

    // (0) ordinary work
    s.edit(cart, 1, 2);
    s.commit("Tune cart totals", 1800, a)?;
    s.edit(money, 0, 1);
    s.edit(pricing, 2, 3);
    s.commit("Round money consistently", 2700, a)?;
    // R1: move
    s.move_class(dates, "shop.report");
    s.commit("Move date helpers next to reporting", 3600, b)?;
    s.add_method(catalog);
    s.commit("Catalog paging", 900, b)?;
    s.edit(orders, 3, 4);
    s.commit("Order validation", 25_000, a)?;
    // R2 + R3: rename two classes
    s.rename_class(customer, "Client");
    s.rename_class(strings, "Text");
    s.commit("Rename customer and string utilities", 1200, a)?;
    s.edit(invoice, 2, 2);
    s.commit("Invoice rounding", 5400, a)?;
    s.edit(inventory, 0, 1);
    s.edit(inventory, 4, 2);
    s.commit("Inventory reservation", 600, b)?;
    // R4: extract
    s.extract_class(invoice, "InvoiceLines", 3);
    s.commit("Split invoice line handling", 4000, b)?;
    s.add_class("shop.api", "ShippingQuote", "umber", 4, false, &[shipping]);
    s.commit("Add shipping quotes", 30_000, a)?;
    s.edit(checkout, 5, 5);
    s.commit("Checkout retries", 2000, a)?;
    // R5: move and rename
    s.move_rename_class(address, "shop.model", "PostalAddress");
    s.commit("Clarify postal address", 800, a)?;
    s.edit(payments, 1, 3);
    s.commit("Gateway timeouts", 7000, b)?;
    // R6: move, with an edit in the same commit
    s.move_class(discount, "shop.model");
    s.edit(discount, 0, 2);
    s.commit("Discounts are model objects", 1500, b)?;
    s.edit(reports, 2, 6);
    s.commit("Monthly report", 3000, b)?;
    s.add_method(ledger);
    s.edit(ledger, 1, 1);
    s.commit("Ledger export", 40_000, a)?;
    // R7: rename
    s.rename_class(inventory, "Stock");
    s.commit("Inventory is stock", 900, a)?;
    // R8: extract
    s.extract_class(reports, "ReportFilters", 3);
    s.commit("Pull filters out of reports", 2200, a)?;
    s.edit(cart, 4, 3);
    s.commit("Cart limits", 1100, b)?;
    s.edit(product, 2, 2);
    s.commit("Product variants", 6000, b)?;
    // R9 + R10: move two classes
    s.move_class(ledger, "shop.report");
    s.move_class(forecast, "shop.report");
    s.commit("Reporting package", 3500, a)?;
    s.edit(catalog, 0, 4);
    s.commit("Catalog sorting", 1900, a)?;
    // R11: move and rename
    s.move_rename_class(payments, "shop.api", "Gateway");
    s.commit("Shorter gateway name", 28_000, b)?;
    let tmp = s.add_class("shop.core", "Scratch", "vapor", 3, false, &[]);
    s.commit("Prototype scratch pad", 1300, b)?;
    s.edit(orders, 6, 2);
    s.commit("Order cancellation", 2400, a)?;
    // R12: rename
    s.rename_class(pricing, "TaxRules");
    s.commit("Pricing is tax rules", 700, a)?;
    s.delete_class(tmp);
    s.commit("Drop scratch pad", 5000, b)?;
    s.edit(checkout, 2, 1);
    s.edit(cart, 0, 1);
    s.commit("Checkout and cart fixes", 1600, b)?;
    // R13: extract
    s.extract_class(orders, "OrderHistory", 2);
    s.commit("Order history component", 3300, a)?;
    s.edit(customer, 1, 3);
    s.commit("Client preferences", 20_000, a)?;
    // R14: move and rename
    s.move_rename_class(terms, "shop.model", "PaymentTerms");
    s.commit("Payment terms belong to the model", 1000, b)?;
    s.add_method(product);
    s.commit("Product bundles", 2600, b)?;
    s.edit(shipping, 3, 4);
    s.commit("Shipping zones", 4100, a)?;
    // R15 + R16: move one class, extract from another
    s.move_class(shipping, "shop.api");
    s.extract_class(ledger, "LedgerEntries", 2);
    s.commit("Shipping API and ledger entries", 1800, a)?;
    s.edit(reports, 0, 2);
    s.commit("Report headers", 35_000, b)?;
    // R17: rename
    s.rename_class(reports, "SalesReport");
    s.commit("Reports are sales reports", 1200, b)?;
    s.edit(money, 3, 2);
    s.commit("Currency conversion", 2500, a)?;
    // R18: move
    s.move_class(reports, "shop.report");
    s.commit("Sales report into reporting", 900, a)?;
    s.edit(catalog, 5, 3);
    s.commit("Catalog facets", 8000, b)?;
    // R19 + R20: extract and move-and-rename
    s.extract_class(catalog, "CatalogSearch", 3);
    s.move_rename_class(dates, "shop.util", "Clock");
    s.commit("Catalog search and clock", 2100, b)?;
    s.edit(checkout, 7, 2);
    s.commit("Checkout audit hooks", 3000, a)?;
    s.add_class("shop.core", "CheckoutAudit", "willow", 4, false, &[checkout]);
    s.commit("Checkout audit trail", 1400, a)?;
    s.add_class("shop.report", "Formatter", "yarrow", 3, false, &[]);
    s.commit("Report formatter", 26_000, b)?;
    s.edit(inventory, 2, 3);
    s.commit("Stock thresholds", 1700, b)?;
    s.edit(invoice, 0, 2);
    s.edit(product, 1, 1);
    s.commit("Invoice totals include bundles", 3900, a)?;
    s.add_method(terms);
    s.commit("Early payment terms", 2300, a)?;

    Ok(s.finish())
}

/// A longer seeded history: `commits` commits after the initial one, about
/// one in six carrying one or two refactorings.
pub fn build_large_corpus(dir: &Path, commits: usize, seed: u64) -> Result<SyntheticCorpus> {
    let mut s = Script::init(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors = ["ana", "ben", "cho"];
    let packages = ["app.core", "app.io", "app.model", "app.web", "app.util", "app.jobs"];
    let mut fresh = 0usize;
    let mut next_token = |prefix: &str| {
        fresh += 1;
        format!("{prefix}{fresh}")
    };

    for i in 0..30 {
        let n_refs = i.min(rng.gen_range(0..3));
        let refs: Vec<usize> = (0..n_refs)
            .map(|_| rng.gen_range(0..i))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let token = next_token("t");
        let pkg = packages[rng.gen_range(0..packages.len())];
        s.add_class(pkg, &format!("Unit{i}"), &token, rng.gen_range(3..10), rng.gen_bool(0.5), &refs);
    }
    s.commit("Initial import", 0, authors[0])?;

    for step in 0..commits {
        let author = authors[rng.gen_range(0..authors.len())];
        let gap = if rng.gen_bool(0.75) {
            rng.gen_range(300..7200)
        } else {
            rng.gen_range(18_000..120_000)
        };
        let alive: Vec<usize> = (0..s.classes.len()).filter(|&c| s.classes[c].alive).collect();
        if rng.gen_bool(0.17) {
            let ops = if rng.gen_bool(0.25) { 2 } else { 1 };
            let mut used = BTreeSet::new();
            for _ in 0..ops {
                let &id = alive.choose(&mut rng).expect("classes");
                if !used.insert(id) {
                    continue;
                }
                let token = next_token("N");
                match rng.gen_range(0..4) {
                    0 => {
                        let pkg = packages[rng.gen_range(0..packages.len())];
                        if pkg != s.classes[id].package {
                            s.move_class(id, pkg);
                        } else {
                            s.rename_class(id, &format!("{}{token}", s.classes[id].name.trim_end_matches(char::is_numeric)));
                        }
                    }
                    1 => s.rename_class(id, &format!("Part{token}")),
                    2 => {
                        let pkg = packages[rng.gen_range(0..packages.len())];
                        if pkg != s.classes[id].package {
                            s.move_rename_class(id, pkg, &format!("Piece{token}"));
                        } else {
                            s.rename_class(id, &format!("Piece{token}"));
                        }
                    }
                    _ => {
                        if s.classes[id].methods.len() >= 5 && s.classes[id].fields.len() > 1 {
                            let k = rng.gen_range(2..=3);
                            let new = s.extract_class(id, &format!("Extracted{token}"), k);
                            used.insert(new);
                        } else {
                            let pkg = packages[rng.gen_range(0..packages.len())];
                            if pkg != s.classes[id].package {
                                s.move_class(id, pkg);
                            } else {
                                s.rename_class(id, &format!("Renamed{token}"));
                            }
                        }
                    }
                }
                if rng.gen_bool(0.5) {
                    s.edit(id, rng.gen_range(0..8), rng.gen_range(0..4));
                }
            }
            s.commit(&format!("Restructure step {step}"), gap, author)?;
        } else {
            match rng.gen_range(0..10) {
                0 => {
                    let token = next_token("t");
                    let pkg = packages[rng.gen_range(0..packages.len())];
                    let n_refs = rng.gen_range(0..3);
                    let refs: Vec<usize> = alive.choose_multiple(&mut rng, n_refs).cloned().collect();
                    let name = format!("Feature{token}");
                    s.add_class(pkg, &name, &token, rng.gen_range(3..9), rng.gen_bool(0.5), &refs);
                }
                1 => {
                    let &id = alive.choose(&mut rng).expect("classes");
                    s.add_method(id);
                }
                _ => {
                    for _ in 0..rng.gen_range(1..4) {
                        let &id = alive.choose(&mut rng).expect("classes");
                        s.edit(id, rng.gen_range(0..8), rng.gen_range(0..12));
                    }
                }
            }
            s.commit(&format!("Work item {step}"), gap, author)?;
        }
    }
    Ok(s.finish())
}
