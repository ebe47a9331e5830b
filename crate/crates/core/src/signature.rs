//! Index signatures: sorted element kinds with argument arrows.
//!
//! Declarations follow the grammar `Name[l1,...,ln](Arg,...,Arg)!` where the
//! label list, argument list and trailing `!` (simple sort) are optional.

use std::fmt;
use thiserror::Error;

pub type SortId = usize;
pub type LabelId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectDecl {
    pub name: String,
    pub args: Vec<SortId>,
    pub labels: Vec<String>,
    pub simple: bool,
}

/// Unresolved declaration, arguments given by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDecl {
    pub name: String,
    pub args: Vec<String>,
    pub labels: Vec<String>,
    pub simple: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    objects: Vec<ObjectDecl>,
    topo: Vec<SortId>,
    depth: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("object `{object}` refers to undeclared object `{target}`")]
    Undeclared { object: String, target: String },
    #[error("object `{0}` declared twice")]
    Duplicate(String),
    #[error("object `{object}` repeats label `{label}`")]
    DuplicateLabel { object: String, label: String },
    #[error("cyclic argument dependency through `{0}`")]
    Cycle(String),
    #[error("object `{object}` has labelled argument target `{target}`; argument targets must be unlabelled")]
    LabelledTarget { object: String, target: String },
}

pub fn validate_signature(decls: &[RawDecl]) -> Result<(), Vec<SignatureError>> {
    let mut errs = Vec::new();
    for (i, d) in decls.iter().enumerate() {
        if decls[..i].iter().any(|e| e.name == d.name) {
            errs.push(SignatureError::Duplicate(d.name.clone()));
        }
        for (j, l) in d.labels.iter().enumerate() {
            if d.labels[..j].contains(l) {
                errs.push(SignatureError::DuplicateLabel { object: d.name.clone(), label: l.clone() });
            }
        }
        for a in &d.args {
            match decls.iter().find(|e| &e.name == a) {
                None => errs.push(SignatureError::Undeclared { object: d.name.clone(), target: a.clone() }),
                Some(t) if !t.labels.is_empty() => errs.push(SignatureError::LabelledTarget {
                    object: d.name.clone(),
                    target: a.clone(),
                }),
                Some(_) => {}
            }
        }
    }
    if errs.is_empty() {
        // cycle check by DFS colouring
        let idx = |n: &str| decls.iter().position(|e| e.name == n).unwrap();
        let mut colour = vec![0u8; decls.len()];
        fn visit(v: usize, decls: &[RawDecl], colour: &mut [u8], idx: &dyn Fn(&str) -> usize) -> Option<usize> {
            if colour[v] == 2 {
                return None;
            }
            if colour[v] == 1 {
                return Some(v);
            }
            colour[v] = 1;
            for a in &decls[v].args {
                if let Some(c) = visit(idx(a), decls, colour, idx) {
                    return Some(c);
                }
            }
            colour[v] = 2;
            None
        }
        for v in 0..decls.len() {
            if let Some(c) = visit(v, decls, &mut colour, &idx) {
                errs.push(SignatureError::Cycle(decls[c].name.clone()));
                break;
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

impl Signature {
    pub fn new(decls: Vec<RawDecl>) -> Result<Signature, Vec<SignatureError>> {
        validate_signature(&decls)?;
        let ids: Vec<String> = decls.iter().map(|d| d.name.clone()).collect();
        let objects: Vec<ObjectDecl> = decls
            .into_iter()
            .map(|d| ObjectDecl {
                args: d.args.iter().map(|a| ids.iter().position(|n| n == a).unwrap()).collect(),
                name: d.name,
                labels: d.labels,
                simple: d.simple,
            })
            .collect();
        let n = objects.len();
        let mut depth = vec![usize::MAX; n];
        fn dep(s: usize, objects: &[ObjectDecl], depth: &mut [usize]) -> usize {
            if depth[s] == usize::MAX {
                let d = objects[s].args.iter().map(|&a| dep(a, objects, depth) + 1).max().unwrap_or(0);
                depth[s] = d;
            }
            depth[s]
        }
        for s in 0..n {
            dep(s, &objects, &mut depth);
        }
        let mut topo: Vec<SortId> = (0..n).collect();
        topo.sort_by_key(|&s| (depth[s], s));
        Ok(Signature { objects, topo, depth })
    }

    pub fn parse(text: &str) -> Result<Signature, Vec<SignatureError>> {
        let decls = parse_decls(text).map_err(|e| vec![e])?;
        Signature::new(decls)
    }

    pub fn objects(&self) -> &[ObjectDecl] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn obj(&self, s: SortId) -> &ObjectDecl {
        &self.objects[s]
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn label_id(&self, s: SortId, label: &str) -> Option<LabelId> {
        self.objects[s].labels.iter().position(|l| l == label)
    }

    /// Sorts ordered so that argument targets precede their sources.
    pub fn topo_order(&self) -> &[SortId] {
        &self.topo
    }

    pub fn depth(&self, s: SortId) -> usize {
        self.depth[s]
    }

    pub fn is_base(&self, s: SortId) -> bool {
        self.objects[s].args.is_empty()
    }

    pub fn is_labelled(&self, s: SortId) -> bool {
        !self.objects[s].labels.is_empty()
    }

    pub fn has_simple_sorts(&self) -> bool {
        self.objects.iter().any(|o| o.simple)
    }

    /// Labels of a sort as options: `[None]` for unlabelled sorts.
    pub fn label_choices(&self, s: SortId) -> Vec<Option<LabelId>> {
        if self.is_labelled(s) {
            (0..self.objects[s].labels.len()).map(Some).collect()
        } else {
            vec![None]
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, o) in self.objects.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", o.name)?;
            if !o.labels.is_empty() {
                write!(f, "[{}]", o.labels.join(","))?;
            }
            if !o.args.is_empty() {
                let a: Vec<&str> = o.args.iter().map(|&s| self.objects[s].name.as_str()).collect();
                write!(f, "({})", a.join(","))?;
            }
            if o.simple {
                write!(f, "!")?;
            }
        }
        Ok(())
    }
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '-'
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> SignatureError {
        let off = self.chars.get(self.pos).map(|c| c.0).unwrap_or(self.text.len());
        let (line, col) = line_col(self.text, off);
        SignatureError::Syntax { line, col, msg: msg.into() }
    }
    fn skip_ws(&mut self) {
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            if c.is_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }
    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn ident(&mut self) -> Result<String, SignatureError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if is_ident_start(c) => {}
            _ => return Err(self.err("expected identifier")),
        }
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(s)
    }
    fn list(&mut self, close: char) -> Result<Vec<String>, SignatureError> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if self.eat(close) {
                return Ok(out);
            }
            if !self.eat(',') {
                return Err(self.err(format!("expected `,` or `{close}`")));
            }
        }
    }
}

pub fn line_col(text: &str, off: usize) -> (usize, usize) {
    let before = &text[..off.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map(|p| before.len() - p).unwrap_or(before.len() + 1);
    (line, col)
}

pub fn parse_decls(text: &str) -> Result<Vec<RawDecl>, SignatureError> {
    let mut cur = Cursor { chars: text.char_indices().collect(), pos: 0, text };
    let mut out = Vec::new();
    loop {
        cur.skip_ws();
        if cur.peek().is_none() {
            break;
        }
        let name = cur.ident()?;
        let labels = if cur.eat('[') { cur.list(']')? } else { Vec::new() };
        let args = if cur.eat('(') { cur.list(')')? } else { Vec::new() };
        let simple = cur.eat('!');
        out.push(RawDecl { name, args, labels, simple });
        cur.eat(',');
    }
    Ok(out)
}
