//! Best-effort structural parser for Java compilation units.
//!
//! Recognizes package and import declarations, type declarations (class,
//! interface, enum, record, annotation) including nested ones, and members.
//! Method bodies are scanned at the token level for decision points, call
//! sites, local variable declarations and field accesses. Anything not
//! understood is skipped.

use std::collections::{BTreeSet, HashMap};

use super::lexer::{tokenize, Token, TokenKind};
use super::{ClassSummary, FieldSummary, Invocation, MethodSummary, TypeKind};

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null", "yield",
];

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short", "void", "var",
];

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default", "sealed", "non",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Decodes `bytes` as UTF-8 and parses them; undecodable input is skipped
/// with a warning.
pub fn parse_source_bytes(bytes: &[u8], path: &str) -> Option<Vec<ClassSummary>> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(text) => Some(parse_compilation_unit(text, path)),
        Err(e) => {
            log::warn!("skipping {path}: not valid UTF-8 ({e})");
            None
        }
    }
}

/// Parses one source file into a summary per declared type, outer types
/// before the types nested in them.
pub fn parse_compilation_unit(source_text: &str, path: &str) -> Vec<ClassSummary> {
    let tokens = tokenize(source_text);
    let mut parser = Parser {
        toks: &tokens,
        pos: 0,
        package: String::new(),
        imports: Vec::new(),
        path,
        out: Vec::new(),
    };
    parser.compilation_unit();
    parser.out
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    package: String,
    imports: Vec<String>,
    path: &'a str,
    out: Vec<ClassSummary>,
}

struct RawParam {
    type_name: String,
    name: String,
}

struct RawMethod {
    name: String,
    is_constructor: bool,
    params: Vec<RawParam>,
    return_type: String,
    body: Option<(usize, usize)>,
}

struct ClassCtx<'c> {
    simple_name: &'c str,
    superclass: Option<&'c str>,
}

impl<'a> Parser<'a> {
    fn peek(&self, offset: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + offset)
    }

    fn at(&self, text: &str) -> bool {
        self.peek(0).is_some_and(|t| t.is(text))
    }

    fn at_ident(&self) -> bool {
        self.peek(0).is_some_and(|t| t.is_ident() && !is_keyword(&t.text))
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_to_semicolon(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.peek(0) {
            match t.text.as_str() {
                "(" | "{" | "[" if t.kind == TokenKind::Punct => depth += 1,
                ")" | "]" if t.kind == TokenKind::Punct => depth -= 1,
                "}" if t.kind == TokenKind::Punct => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                }
                ";" if depth <= 0 => {
                    self.pos += 1;
                    return;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    /// At an opening delimiter: returns the index of its partner and moves past it.
    fn skip_balanced(&mut self, open: &str, close: &str) -> usize {
        let mut depth = 0usize;
        while let Some(t) = self.peek(0) {
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    let end = self.pos;
                    self.pos += 1;
                    return end;
                }
            }
            self.pos += 1;
        }
        self.toks.len()
    }

    fn skip_angles(&mut self) {
        if self.at("<") {
            self.skip_balanced("<", ">");
        }
    }

    fn skip_annotation(&mut self) {
        self.pos += 1; // '@'
        self.qualified_name();
        if self.at("(") {
            self.skip_balanced("(", ")");
        }
    }

    fn qualified_name(&mut self) -> String {
        let mut name = String::new();
        while let Some(t) = self.peek(0) {
            if !t.is_ident() {
                break;
            }
            name.push_str(&t.text);
            self.pos += 1;
            if self.at(".") && self.peek(1).is_some_and(Token::is_ident) {
                name.push('.');
                self.pos += 1;
            } else {
                break;
            }
        }
        name
    }

    fn declaration_kind(&self) -> Option<TypeKind> {
        let t = self.peek(0)?;
        if !t.is_ident() {
            return None;
        }
        match t.text.as_str() {
            "class" => Some(TypeKind::Class),
            "interface" => Some(TypeKind::Interface),
            "enum" => Some(TypeKind::Enum),
            "record"
                if self.peek(1).is_some_and(Token::is_ident)
                    && self.peek(2).is_some_and(|t| t.is("(") || t.is("<")) =>
            {
                Some(TypeKind::Record)
            }
            _ => None,
        }
    }

    fn compilation_unit(&mut self) {
        while self.pos < self.toks.len() {
            if self.eat("package") {
                self.package = self.qualified_name();
                self.skip_to_semicolon();
            } else if self.eat("import") {
                let is_static = self.eat("static");
                let mut name = self.qualified_name();
                if self.at(".") && self.peek(1).is_some_and(|t| t.is("*")) {
                    name.push_str(".*");
                }
                self.skip_to_semicolon();
                if !is_static && !name.is_empty() {
                    self.imports.push(name);
                }
            } else if self.at("@") && self.peek(1).is_some_and(|t| t.is("interface")) {
                self.pos += 1;
                self.type_declaration(TypeKind::Annotation, None);
            } else if self.at("@") {
                self.skip_annotation();
            } else if let Some(kind) = self.declaration_kind() {
                self.type_declaration(kind, None);
            } else {
                self.pos += 1;
            }
        }
    }

    /// A type reference as written: qualified name, generic arguments and
    /// array dimensions.
    fn type_ref(&mut self) -> Option<String> {
        let start = self.pos;
        while self.at("@") {
            self.skip_annotation();
        }
        let t = self.peek(0)?;
        if !t.is_ident() || (is_keyword(&t.text) && !PRIMITIVES.contains(&t.text.as_str())) {
            self.pos = start;
            return None;
        }
        let first = self.pos;
        self.qualified_name();
        self.skip_angles();
        // Qualified access through a generic outer type: Outer<T>.Inner
        while self.at(".") && self.peek(1).is_some_and(Token::is_ident) {
            self.pos += 1;
            self.qualified_name();
            self.skip_angles();
        }
        while self.at("[") && self.peek(1).is_some_and(|t| t.is("]")) {
            self.pos += 2;
        }
        Some(join_tokens(&self.toks[first..self.pos]))
    }

    fn type_list(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        loop {
            match self.type_ref() {
                Some(text) => names.push(base_type_name(&text)),
                None => break,
            }
            if !self.eat(",") {
                break;
            }
        }
        names
    }

    fn type_declaration(&mut self, kind: TypeKind, outer: Option<&str>) {
        let keyword_index = self.pos;
        self.pos += 1;
        if !self.at_ident() {
            return;
        }
        let name = self.toks[self.pos].text.clone();
        self.pos += 1;
        self.skip_angles();

        let mut fields = Vec::new();
        if kind == TypeKind::Record && self.at("(") {
            fields = self
                .parameters()
                .into_iter()
                .map(|p| FieldSummary {
                    name: p.name,
                    type_name: p.type_name,
                })
                .collect();
        }

        let mut superclass = None;
        let mut interfaces = Vec::new();
        while let Some(t) = self.peek(0) {
            if t.is("{") || t.is(";") || t.is("}") {
                break;
            }
            if self.eat("extends") {
                let list = self.type_list();
                if kind == TypeKind::Interface {
                    interfaces.extend(list);
                } else {
                    superclass = list.into_iter().next();
                }
            } else if self.eat("implements") {
                interfaces.extend(self.type_list());
            } else {
                self.pos += 1;
            }
        }
        if !self.at("{") {
            return;
        }

        let fqn = match (outer, self.package.is_empty()) {
            (Some(o), _) => format!("{o}.{name}"),
            (None, true) => name.clone(),
            (None, false) => format!("{}.{name}", self.package),
        };
        let slot = self.out.len();
        self.out.push(ClassSummary {
            fqn: fqn.clone(),
            package: self.package.clone(),
            kind,
            path: self.path.to_string(),
            outer_fqn: outer.map(str::to_string),
            superclass_fqn: superclass.clone(),
            interface_fqns: interfaces,
            imports: self.imports.clone(),
            methods: Vec::new(),
            fields: Vec::new(),
            loc: 1,
        });

        let ctx = ClassCtx {
            simple_name: &name,
            superclass: superclass.as_deref(),
        };
        let (raw_methods, body_fields) = self.class_body(&fqn, kind, &name);
        fields.extend(body_fields);
        let close_index = self.pos.saturating_sub(1).min(self.toks.len().saturating_sub(1));
        let methods = raw_methods
            .into_iter()
            .map(|m| self.summarize_method(m, &ctx, &fields))
            .collect();

        let loc = self.toks[keyword_index..=close_index.max(keyword_index)]
            .iter()
            .map(|t| t.line)
            .collect::<BTreeSet<_>>()
            .len() as u32;

        let summary = &mut self.out[slot];
        summary.methods = methods;
        summary.fields = fields;
        summary.loc = loc.max(1);
    }

    /// At `{`; consumes through the matching `}`.
    fn class_body(
        &mut self,
        fqn: &str,
        kind: TypeKind,
        simple_name: &str,
    ) -> (Vec<RawMethod>, Vec<FieldSummary>) {
        let mut methods = Vec::new();
        let mut fields = Vec::new();
        self.pos += 1;
        if kind == TypeKind::Enum {
            self.skip_enum_constants();
        }
        while let Some(t) = self.peek(0) {
            if t.is("}") {
                self.pos += 1;
                break;
            }
            if t.is(";") || t.is("-") || (t.is_ident() && MODIFIERS.contains(&t.text.as_str())) {
                self.pos += 1;
            } else if t.is("@") && self.peek(1).is_some_and(|n| n.is("interface")) {
                self.pos += 1;
                self.type_declaration(TypeKind::Annotation, Some(fqn));
            } else if t.is("@") {
                self.skip_annotation();
            } else if t.is("{") {
                self.skip_balanced("{", "}");
            } else if let Some(nested) = self.declaration_kind() {
                self.type_declaration(nested, Some(fqn));
            } else {
                self.member(simple_name, &mut methods, &mut fields);
            }
        }
        (methods, fields)
    }

    fn skip_enum_constants(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.peek(0) {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "{" | "[" => depth += 1,
                    ")" | "]" => depth -= 1,
                    "}" if depth == 0 => return,
                    "}" => depth -= 1,
                    ";" if depth == 0 => {
                        self.pos += 1;
                        return;
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    fn member(
        &mut self,
        simple_name: &str,
        methods: &mut Vec<RawMethod>,
        fields: &mut Vec<FieldSummary>,
    ) {
        let start = self.pos;
        self.skip_angles();

        if self.peek(0).is_some_and(|t| t.is_ident() && t.text == simple_name)
            && self.peek(1).is_some_and(|t| t.is("("))
        {
            self.pos += 1;
            let params = self.parameters();
            let body = self.method_tail();
            methods.push(RawMethod {
                name: simple_name.to_string(),
                is_constructor: true,
                params,
                return_type: String::new(),
                body,
            });
            return;
        }

        let Some(type_name) = self.type_ref() else {
            self.pos = start + 1;
            return;
        };
        if !self.at_ident() {
            if self.pos == start {
                self.pos += 1;
            }
            return;
        }
        let name = self.toks[self.pos].text.clone();
        self.pos += 1;

        if self.at("(") {
            let params = self.parameters();
            let body = self.method_tail();
            methods.push(RawMethod {
                name,
                is_constructor: false,
                params,
                return_type: type_name,
                body,
            });
            return;
        }

        let mut name = name;
        loop {
            let mut declared = type_name.clone();
            while self.at("[") && self.peek(1).is_some_and(|t| t.is("]")) {
                self.pos += 2;
                declared.push_str("[]");
            }
            fields.push(FieldSummary {
                name: name.clone(),
                type_name: declared,
            });
            if self.eat("=") {
                self.skip_initializer();
            }
            if self.eat(",") {
                let next_is_declarator = self.at_ident()
                    && self
                        .peek(1)
                        .is_some_and(|t| t.is("=") || t.is(",") || t.is(";") || t.is("["));
                if next_is_declarator {
                    name = self.toks[self.pos].text.clone();
                    self.pos += 1;
                    continue;
                }
            }
            self.skip_to_semicolon();
            break;
        }
    }

    /// Skips a field initializer, stopping before `,` or `;` at depth 0.
    fn skip_initializer(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.peek(0) {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "{" | "[" => depth += 1,
                    ")" | "]" | "}" => {
                        if depth == 0 {
                            return;
                        }
                        depth -= 1;
                    }
                    "," | ";" if depth == 0 => return,
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    /// At `(`; parses a formal parameter list.
    fn parameters(&mut self) -> Vec<RawParam> {
        let open = self.pos;
        let close = self.skip_balanced("(", ")");
        let inner = &self.toks[(open + 1).min(close)..close];

        let mut params = Vec::new();
        let mut angle = 0i32;
        let mut paren = 0i32;
        let mut start = 0;
        for (i, t) in inner.iter().enumerate() {
            match t.text.as_str() {
                "<" => angle += 1,
                ">" => angle -= 1,
                "(" => paren += 1,
                ")" => paren -= 1,
                "," if angle == 0 && paren == 0 && t.kind == TokenKind::Punct => {
                    params.extend(parse_parameter(&inner[start..i]));
                    start = i + 1;
                }
                _ => {}
            }
        }
        params.extend(parse_parameter(&inner[start..]));
        params
    }

    /// After a parameter list: dims, `throws`, `default`, then `;` or a body.
    fn method_tail(&mut self) -> Option<(usize, usize)> {
        while self.at("[") && self.peek(1).is_some_and(|t| t.is("]")) {
            self.pos += 2;
        }
        if self.eat("throws") {
            self.type_list();
        }
        if self.at("default") {
            self.skip_to_semicolon();
            return None;
        }
        if self.at("{") {
            let open = self.pos;
            let close = self.skip_balanced("{", "}");
            return Some((open + 1, close));
        }
        self.skip_to_semicolon();
        None
    }

    fn summarize_method(
        &self,
        raw: RawMethod,
        ctx: &ClassCtx<'_>,
        fields: &[FieldSummary],
    ) -> MethodSummary {
        let body = raw
            .body
            .map(|(s, e)| &self.toks[s.min(e)..e])
            .unwrap_or(&[]);
        let analysis = analyze_body(body, ctx, &raw.params, fields);
        MethodSummary {
            name: raw.name,
            is_constructor: raw.is_constructor,
            parameter_types: raw.params.into_iter().map(|p| p.type_name).collect(),
            return_type: raw.return_type,
            cyclomatic_complexity: analysis.complexity,
            invoked_names: analysis.invocations,
            accessed_fields: analysis.accessed_fields,
        }
    }
}

fn parse_parameter(tokens: &[Token]) -> Option<RawParam> {
    let mut toks: Vec<&Token> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is("@") {
            // annotation: '@' name ('.' name)* ['(' ... ')']
            i += 1;
            if i < tokens.len() && tokens[i].is_ident() {
                i += 1;
            }
            while i + 1 < tokens.len() && tokens[i].is(".") && tokens[i + 1].is_ident() {
                i += 2;
            }
            if i < tokens.len() && tokens[i].is("(") {
                let mut depth = 0;
                while i < tokens.len() {
                    if tokens[i].is("(") {
                        depth += 1;
                    } else if tokens[i].is(")") {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    i += 1;
                }
            }
            continue;
        }
        if !t.is("final") {
            toks.push(t);
        }
        i += 1;
    }

    let mut dims = String::new();
    while toks.len() >= 2 && toks[toks.len() - 1].is("]") && toks[toks.len() - 2].is("[") {
        toks.truncate(toks.len() - 2);
        dims.push_str("[]");
    }
    let name_tok = toks.pop()?;
    if !name_tok.is_ident() || name_tok.text == "this" || toks.is_empty() {
        return None;
    }
    let mut type_name = String::new();
    let mut varargs = false;
    let owned: Vec<Token> = toks
        .into_iter()
        .filter(|t| {
            if t.is("...") {
                varargs = true;
                false
            } else {
                true
            }
        })
        .cloned()
        .collect();
    type_name.push_str(&join_tokens(&owned));
    if varargs {
        type_name.push_str("[]");
    }
    type_name.push_str(&dims);
    Some(RawParam {
        type_name,
        name: name_tok.text.clone(),
    })
}

/// Concatenates token texts, separating adjacent words with a space.
fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev_word = false;
    for t in tokens {
        let word = t.is_ident();
        if word && prev_word {
            out.push(' ');
        }
        out.push_str(&t.text);
        prev_word = word;
    }
    out
}

/// `java.util.List<Foo>[]` → `java.util.List`.
pub(crate) fn base_type_name(text: &str) -> String {
    text.split(|c: char| c == '<' || c == '[' || c == ' ')
        .next()
        .unwrap_or(text)
        .to_string()
}

/// Every (possibly qualified) type name mentioned in a type text, excluding
/// primitives and wildcard bounds keywords.
pub(crate) fn referenced_type_names(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$' || c == '.'))
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_matches('.'))
        .filter(|s| !s.is_empty() && !is_keyword(s) && !PRIMITIVES.contains(s))
        .map(str::to_string)
        .collect()
}

struct BodyAnalysis {
    complexity: u32,
    invocations: Vec<Invocation>,
    accessed_fields: Vec<String>,
}

fn looks_like_type(name: &str) -> bool {
    PRIMITIVES.contains(&name) || name.chars().next().is_some_and(char::is_uppercase)
}

/// Index past a generic argument list starting at `start` (a `<`), if the
/// tokens in between can only be type arguments.
fn generic_args_end(toks: &[Token], start: usize) -> Option<usize> {
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate().skip(start) {
        match t.text.as_str() {
            "<" => depth += 1,
            ">" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            "," | "." | "?" | "[" | "]" | "&" => {}
            _ if t.is_ident() => {}
            _ => return None,
        }
    }
    None
}

/// `Type name` declarations inside a body (locals, catch and loop variables,
/// lambda and pattern bindings).
fn local_declarations(toks: &[Token]) -> HashMap<String, String> {
    let mut locals = HashMap::new();
    for i in 0..toks.len() {
        let t = &toks[i];
        if !t.is_ident() || (is_keyword(&t.text) && !PRIMITIVES.contains(&t.text.as_str())) {
            continue;
        }
        if i > 0 && toks[i - 1].is(".") {
            continue;
        }
        if !looks_like_type(&t.text) {
            continue;
        }
        let mut j = i + 1;
        if toks.get(j).is_some_and(|t| t.is("<")) {
            match generic_args_end(toks, j) {
                Some(end) => j = end,
                None => continue,
            }
        }
        while toks.get(j).is_some_and(|t| t.is("[")) && toks.get(j + 1).is_some_and(|t| t.is("]")) {
            j += 2;
        }
        let Some(name) = toks.get(j) else { continue };
        if !name.is_ident() || is_keyword(&name.text) {
            continue;
        }
        let follows = toks.get(j + 1).is_some_and(|n| {
            n.kind == TokenKind::Punct && matches!(n.text.as_str(), "=" | ";" | ":" | "," | ")")
        });
        if follows {
            locals
                .entry(name.text.clone())
                .or_insert_with(|| join_tokens(&toks[i..j]));
        }
    }
    locals
}

fn analyze_body(
    toks: &[Token],
    ctx: &ClassCtx<'_>,
    params: &[RawParam],
    fields: &[FieldSummary],
) -> BodyAnalysis {
    let locals = local_declarations(toks);
    let param_types: HashMap<&str, &str> = params
        .iter()
        .map(|p| (p.name.as_str(), p.type_name.as_str()))
        .collect();
    let field_types: HashMap<&str, &str> = fields
        .iter()
        .map(|f| (f.name.as_str(), f.type_name.as_str()))
        .collect();
    let shadowed = |name: &str| locals.contains_key(name) || param_types.contains_key(name);

    let variable_type = |name: &str| -> Option<String> {
        if let Some(t) = locals.get(name) {
            return Some(base_type_name(t));
        }
        if let Some(t) = param_types.get(name) {
            return Some(base_type_name(t));
        }
        field_types.get(name).map(|t| base_type_name(t))
    };

    let mut complexity = 1u32;
    let mut invocations = BTreeSet::new();
    let mut accessed = BTreeSet::new();

    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        let prev = i.checked_sub(1).map(|p| &toks[p]);
        let next = toks.get(i + 1);

        if t.kind == TokenKind::Punct {
            match t.text.as_str() {
                "&&" | "||" => complexity += 1,
                "?" => {
                    let wildcard = prev.is_some_and(|p| p.is("<"))
                        || next.is_some_and(|n| {
                            n.is(">") || n.is(",") || n.is("extends") || n.is("super")
                        });
                    if !wildcard {
                        complexity += 1;
                    }
                }
                _ => {}
            }
            i += 1;
            continue;
        }
        if t.kind != TokenKind::Ident {
            i += 1;
            continue;
        }
        match t.text.as_str() {
            "if" | "for" | "while" | "case" | "catch" => {
                complexity += 1;
                i += 1;
                continue;
            }
            "new" => {
                let mut j = i + 1;
                while toks.get(j).is_some_and(|t| t.is("@")) {
                    j += 2;
                }
                let start = j;
                while toks.get(j).is_some_and(Token::is_ident)
                    || (toks.get(j).is_some_and(|t| t.is("."))
                        && toks.get(j + 1).is_some_and(Token::is_ident))
                {
                    j += 1;
                }
                let name = join_tokens(&toks[start.min(j)..j]);
                if toks.get(j).is_some_and(|t| t.is("<")) {
                    if let Some(end) = generic_args_end(toks, j) {
                        j = end;
                    }
                }
                if toks.get(j).is_some_and(|t| t.is("(")) && !name.is_empty() {
                    invocations.insert(Invocation {
                        receiver: Some(name),
                        method: "<init>".into(),
                    });
                }
                i = j.max(i + 1);
                continue;
            }
            _ => {}
        }
        let name = t.text.as_str();
        let is_call = next.is_some_and(|n| n.is("("));
        let after_dot = prev.is_some_and(|p| p.is("."));

        let declares = prev.is_some_and(|p| {
            p.is_ident() && (!is_keyword(&p.text) || PRIMITIVES.contains(&p.text.as_str()))
        });
        if is_call && !is_keyword(name) && !declares {
            let receiver = if after_dot {
                receiver_type(toks, i - 1, ctx, &variable_type)
            } else {
                Some(ctx.simple_name.to_string())
            };
            invocations.insert(Invocation {
                receiver,
                method: name.to_string(),
            });
        } else if !is_call && field_types.contains_key(name) {
            let via_this = after_dot && i >= 2 && toks[i - 2].is("this");
            if via_this || (!after_dot && !shadowed(name)) {
                accessed.insert(name.to_string());
            }
        }
        i += 1;
    }

    BodyAnalysis {
        complexity,
        invocations: invocations.into_iter().collect(),
        accessed_fields: accessed.into_iter().collect(),
    }
}

/// Receiver type of a call whose `.` sits at `dot`.
fn receiver_type(
    toks: &[Token],
    dot: usize,
    ctx: &ClassCtx<'_>,
    variable_type: &dyn Fn(&str) -> Option<String>,
) -> Option<String> {
    // Collect the `a.b.C` chain ending just before the dot; any other
    // expression as receiver is unknown.
    let mut parts = Vec::new();
    let mut k = dot;
    loop {
        if k == 0 || !toks[k - 1].is_ident() {
            return None;
        }
        parts.push(toks[k - 1].text.as_str());
        if k >= 2 && toks[k - 2].is(".") {
            k -= 2;
        } else {
            break;
        }
    }
    parts.reverse();
    let first = *parts.first()?;
    if parts.len() == 1 {
        return match first {
            "this" => Some(ctx.simple_name.to_string()),
            "super" => ctx.superclass.map(str::to_string),
            name => variable_type(name).or_else(|| looks_like_type(name).then(|| name.to_string())),
        };
    }
    if first == "this" || variable_type(first).is_some() {
        return None;
    }
    let last = parts.last()?;
    looks_like_type(last).then(|| parts.join("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Vec<ClassSummary> {
        parse_compilation_unit(src, "X.java")
    }

    #[test]
    fn empty_file_has_no_classes() {
        assert!(parse("").is_empty());
        assert!(parse("// nothing here\n").is_empty());
    }

    #[test]
    fn package_and_two_methods() {
        let cs = parse(
            "package p;\n\
             public class A {\n\
               void one() {}\n\
               int two(int x) { return x; }\n\
             }\n",
        );
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].fqn, "p.A");
        assert_eq!(cs[0].package, "p");
        assert_eq!(cs[0].methods.len(), 2);
        assert_eq!(cs[0].methods[1].parameter_types, vec!["int"]);
        assert_eq!(cs[0].methods[1].return_type, "int");
        assert_eq!(cs[0].loc, 4);
    }

    #[test]
    fn nested_types_get_dotted_names() {
        let cs = parse("package p; class A { static class B { int f; } interface C {} }");
        let fqns: Vec<_> = cs.iter().map(|c| c.fqn.as_str()).collect();
        assert_eq!(fqns, vec!["p.A", "p.A.B", "p.A.C"]);
        assert_eq!(cs[1].outer_fqn.as_deref(), Some("p.A"));
        assert_eq!(cs[1].local_name(), "A.B");
        assert_eq!(cs[2].kind, TypeKind::Interface);
    }

    #[test]
    fn inheritance_clauses() {
        let cs = parse(
            "package p; import q.Base; \
             public final class A<T extends Comparable<T>> extends Base<T> implements I, q.J<T> {}\n\
             interface K extends I, L {}",
        );
        assert_eq!(cs[0].superclass_fqn.as_deref(), Some("Base"));
        assert_eq!(cs[0].interface_fqns, vec!["I", "q.J"]);
        assert_eq!(cs[0].imports, vec!["q.Base"]);
        assert_eq!(cs[1].superclass_fqn, None);
        assert_eq!(cs[1].interface_fqns, vec!["I", "L"]);
    }

    #[test]
    fn fields_with_initializers_and_multiple_declarators() {
        let cs = parse(
            "class A {\n\
               private final Map<String, List<B>> index = new HashMap<>();\n\
               int x = f(1, 2), y, z[];\n\
               Runnable r = () -> { go(); };\n\
               static { init(); }\n\
               A() { this.x = 1; }\n\
             }",
        );
        let names: Vec<_> = cs[0].fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["index", "x", "y", "z", "r"]);
        assert_eq!(cs[0].fields[0].type_name, "Map<String,List<B>>");
        assert_eq!(cs[0].fields[3].type_name, "int[]");
        assert_eq!(cs[0].methods.len(), 1);
        assert!(cs[0].methods[0].is_constructor);
        assert_eq!(cs[0].methods[0].accessed_fields, vec!["x"]);
    }

    #[test]
    fn cyclomatic_complexity_counts_decision_points() {
        let cs = parse(
            "class A {\n\
               int f(int a, List<? extends B> bs) {\n\
                 if (a > 0 && a < 10 || a == 99) { return 1; }\n\
                 for (B b : bs) { while (b.next()) {} }\n\
                 switch (a) { case 1: case 2: break; default: }\n\
                 try { g(); } catch (RuntimeException e) {}\n\
                 Map<?, ?> m = null;\n\
                 return a > 5 ? 1 : 2;\n\
               }\n\
               void g() {}\n\
             }",
        );
        // 1 + if + && + || + for + while + 2×case + catch + ternary
        assert_eq!(cs[0].methods[0].cyclomatic_complexity, 10);
        assert_eq!(cs[0].methods[1].cyclomatic_complexity, 1);
    }

    #[test]
    fn invocations_resolve_receivers_syntactically() {
        let cs = parse(
            "class A extends S {\n\
               private Repo repo;\n\
               void run(Client c) {\n\
                 Cache cache = new Cache();\n\
                 repo.save();\n\
                 c.send(1);\n\
                 cache.get();\n\
                 Util.help();\n\
                 this.local();\n\
                 super.base();\n\
                 local();\n\
                 c.builder().build();\n\
                 java.util.Objects.hash(1);\n\
               }\n\
               void local() {}\n\
             }",
        );
        let inv: Vec<(Option<&str>, &str)> = cs[0].methods[0]
            .invoked_names
            .iter()
            .map(|i| (i.receiver.as_deref(), i.method.as_str()))
            .collect();
        assert_eq!(
            inv,
            vec![
                (None, "build"),
                (Some("A"), "local"),
                (Some("Cache"), "<init>"),
                (Some("Cache"), "get"),
                (Some("Client"), "builder"),
                (Some("Client"), "send"),
                (Some("Repo"), "save"),
                (Some("S"), "base"),
                (Some("Util"), "help"),
                (Some("java.util.Objects"), "hash"),
            ]
        );
        assert_eq!(cs[0].methods[0].accessed_fields, vec!["repo"]);
    }

    #[test]
    fn shadowed_fields_are_not_accesses() {
        let cs = parse(
            "class A { int n; int m;\n\
               void set(int n) { this.n = n; }\n\
               void other() { int m = 3; m++; }\n\
             }",
        );
        assert_eq!(cs[0].methods[0].accessed_fields, vec!["n"]);
        assert!(cs[0].methods[1].accessed_fields.is_empty());
    }

    #[test]
    fn enums_records_annotations_and_interfaces() {
        let cs = parse(
            "package p;\n\
             @Deprecated enum Color { RED(1) { void x() {} }, GREEN(2); private final int v; Color(int v) { this.v = v; } }\n\
             record Point(int x, @NonNull Integer y) implements Shape { double norm() { return 0; } }\n\
             @interface Tag { String value() default \"x\"; }\n\
             interface Shape { double norm(); default int sides() { return 0; } }",
        );
        let fqns: Vec<_> = cs.iter().map(|c| c.fqn.as_str()).collect();
        assert_eq!(fqns, vec!["p.Color", "p.Point", "p.Tag", "p.Shape"]);
        assert_eq!(cs[0].fields.len(), 1);
        assert_eq!(cs[0].methods.len(), 1);
        assert!(cs[0].methods[0].is_constructor);
        let point_fields: Vec<_> = cs[1].fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(point_fields, vec!["x", "y"]);
        assert_eq!(cs[1].interface_fqns, vec!["Shape"]);
        assert_eq!(cs[2].kind, TypeKind::Annotation);
        assert_eq!(cs[2].methods[0].name, "value");
        assert_eq!(cs[3].methods.len(), 2);
    }

    #[test]
    fn generic_methods_varargs_and_throws() {
        let cs = parse(
            "class A {\n\
               public <T extends Number> List<T> pick(final Map<String, T> m, String... keys) throws IOException, E { return null; }\n\
               abstract void hook(int[] xs, @A(\"v\") long y);\n\
             }",
        );
        let m = &cs[0].methods[0];
        assert_eq!(m.name, "pick");
        assert_eq!(m.return_type, "List<T>");
        assert_eq!(m.parameter_types, vec!["Map<String,T>", "String[]"]);
        assert_eq!(cs[0].methods[1].parameter_types, vec!["int[]", "long"]);
    }

    #[test]
    fn undecodable_bytes_are_skipped() {
        assert!(parse_source_bytes(&[0xff, 0xfe, 0x00], "bad.java").is_none());
        assert_eq!(parse_source_bytes(b"class A {}", "A.java").unwrap().len(), 1);
    }

    #[test]
    fn referenced_names_skip_primitives_and_bounds() {
        assert_eq!(
            referenced_type_names("Map<String,List<? extends p.B>>[]"),
            vec!["Map", "String", "List", "p.B"]
        );
        assert!(referenced_type_names("int[]").is_empty());
        assert_eq!(base_type_name("java.util.List<X>"), "java.util.List");
    }

    proptest::proptest! {
        #[test]
        fn parser_never_panics(src in "[ -~\\n]{0,300}") {
            let _ = parse_compilation_unit(&src, "fuzz.java");
        }

        #[test]
        fn parser_never_panics_on_java_like_tokens(
            parts in proptest::collection::vec(
                proptest::sample::select(vec![
                    "class", "A", "{", "}", "(", ")", "<", ">", ";", "=", ",", "int", "x",
                    "new", ".", "@", "interface", "enum", "record", "extends", "?", "&&",
                    "if", "case", "[", "]", "package", "import", "*", "\"s\"", "->",
                ]),
                0..80,
            )
        ) {
            let src = parts.join(" ");
            let _ = parse_compilation_unit(&src, "fuzz.java");
        }
    }
}
