//! System files: signature, framework, named graphs, rules, relative part
//! and an optional strategy.
//!
//! ```text
//! signature
//!   V E(V,V)
//! end
//! framework monic
//! graph L
//!   V a
//!   V b
//!   E e (a b)
//! end
//! rule rho L=L K=K R=R
//!   l={V.x -> V.a, V.y -> V.b}
//!   r={V.x -> V.u, V.y -> V.v}
//! end
//! relative { tau }
//! strategy "arithmetic(size=2,bits=4,timeout=30)"
//! ```
//!
//! Element lines are `SORT id [label] [(arg ids)]`, one per line. Map keys and
//! values are `SORT.id`. `#` starts a comment.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dpo::{Framework, MatchClass, Rule};
use crate::graph::{ElementRef, Graph};
use crate::morphism::Morphism;
use crate::signature::{Signature, SignatureError, SortId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct SystemError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedGraph {
    pub name: String,
    pub graph: Arc<Graph>,
    /// Element names as written, per sort.
    pub ids: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub rule: Rule,
    pub lhs: String,
    pub interface: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtSystem {
    pub sig: Arc<Signature>,
    pub framework: Framework,
    pub graphs: Vec<NamedGraph>,
    pub rules: Vec<RuleDecl>,
    pub relative: Vec<String>,
    pub strategy: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '-'
}

fn tokenize(text: &str, skip: &[bool]) -> Result<Vec<Token>, SystemError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        if skip.get(li).copied().unwrap_or(false) {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (ln, col) = (li + 1, i + 1);
            let err = |msg: String| SystemError { line: ln, col, msg };
            if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                out.push(Token { tok: Tok::Arrow, line: ln, col });
                i += 2;
            } else if c == '"' {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(err("unterminated string".into()));
                }
                out.push(Token { tok: Tok::Str(chars[start..j].iter().collect()), line: ln, col });
                i = j + 1;
            } else if word_char(c) {
                let start = i;
                while i < chars.len() && word_char(chars[i]) && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>')) {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(chars[start..i].iter().collect()), line: ln, col });
            } else if "{}()=,".contains(c) {
                out.push(Token { tok: Tok::Sym(c), line: ln, col });
                i += 1;
            } else {
                return Err(err(format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn err_at<T>(&self, t: Option<&Token>, msg: impl Into<String>) -> Result<T, SystemError> {
        let (line, col) = t.map(|t| (t.line, t.col)).unwrap_or(self.end);
        Err(SystemError { line, col, msg: msg.into() })
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SystemError> {
        self.err_at(self.toks.get(self.pos), msg)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<(String, Token), SystemError> {
        match self.peek().cloned() {
            Some(t) => match &t.tok {
                Tok::Word(w) => {
                    self.pos += 1;
                    Ok((w.clone(), t))
                }
                _ => self.err(format!("expected {what}")),
            },
            None => self.err(format!("expected {what}")),
        }
    }

    fn sym(&mut self, c: char) -> Result<(), SystemError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().map(|t| &t.tok) == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), SystemError> {
        let (w, t) = self.word(&format!("`{k}`"))?;
        if w != k {
            return self.err_at(Some(&t), format!("expected `{k}`, found `{w}`"));
        }
        Ok(())
    }
}

fn sig_error(e: &SignatureError, first_line: usize) -> SystemError {
    match e {
        SignatureError::Syntax { line, col, msg } => {
            SystemError { line: first_line + line - 1, col: *col, msg: format!("signature: {msg}") }
        }
        other => SystemError { line: first_line, col: 1, msg: format!("signature: {other}") },
    }
}

fn parse_graph(p: &mut Parser, sig: &Arc<Signature>, name: String) -> Result<NamedGraph, SystemError> {
    struct Line {
        sort: SortId,
        id: String,
        label: Option<usize>,
        args: Vec<(String, Token)>,
        at: Token,
    }
    let mut lines: Vec<Line> = Vec::new();
    loop {
        let Some(first) = p.peek().cloned() else { return p.err("unterminated graph block") };
        let (sort_name, _) = p.word("element line or `end`")?;
        if sort_name == "end" {
            break;
        }
        let Some(sort) = sig.sort_id(&sort_name) else {
            return p.err_at(Some(&first), format!("unknown sort `{sort_name}`"));
        };
        let (id, id_tok) = p.word("element id")?;
        if id_tok.line != first.line {
            return p.err_at(Some(&id_tok), "element id must be on the same line as its sort");
        }
        let mut label = None;
        if let Some(Token { tok: Tok::Word(w), line, .. }) = p.peek().cloned() {
            if line == first.line {
                let t = p.next().unwrap();
                match sig.label_id(sort, &w) {
                    Some(l) => label = Some(l),
                    None => return p.err_at(Some(&t), format!("sort `{sort_name}` has no label `{w}`")),
                }
            }
        }
        let mut args = Vec::new();
        if p.peek().is_some_and(|t| t.line == first.line && t.tok == Tok::Sym('(')) {
            p.next();
            while !p.eat_sym(')') {
                let (a, t) = p.word("argument id")?;
                args.push((a, t));
                p.eat_sym(',');
            }
        }
        lines.push(Line { sort, id, label, args, at: first });
    }
    let mut ids: Vec<Vec<String>> = vec![Vec::new(); sig.len()];
    let mut index: Vec<HashMap<String, usize>> = vec![HashMap::new(); sig.len()];
    for l in &lines {
        if index[l.sort].insert(l.id.clone(), ids[l.sort].len()).is_some() {
            return p.err_at(Some(&l.at), format!("element {}.{} defined twice", sig.obj(l.sort).name, l.id));
        }
        ids[l.sort].push(l.id.clone());
    }
    let mut g = Graph::empty(sig.clone());
    for l in &lines {
        let obj = sig.obj(l.sort);
        if l.args.len() != obj.args.len() {
            return p.err_at(
                Some(&l.at),
                format!("{} expects {} arguments, found {}", obj.name, obj.args.len(), l.args.len()),
            );
        }
        if sig.is_labelled(l.sort) && l.label.is_none() {
            return p.err_at(Some(&l.at), format!("element {}.{} needs a label", obj.name, l.id));
        }
        let mut args = Vec::new();
        for ((a, t), &target) in l.args.iter().zip(&obj.args) {
            match index[target].get(a) {
                Some(&i) => args.push(i),
                None => return p.err_at(Some(t), format!("no element {}.{a} in graph {name}", sig.obj(target).name)),
            }
        }
        g.push(l.sort, args, l.label);
    }
    if let Err(es) = g.validate() {
        return p.err_at(lines.first().map(|l| &l.at), format!("graph {name}: {}", es[0]));
    }
    Ok(NamedGraph { name, graph: Arc::new(g), ids })
}

fn element_key(sig: &Signature, w: &str) -> Option<(SortId, String)> {
    let (s, id) = w.split_once('.')?;
    Some((sig.sort_id(s)?, id.to_string()))
}

fn parse_map(p: &mut Parser, sig: &Signature, dom: &NamedGraph, cod: &NamedGraph) -> Result<Morphism, SystemError> {
    let open = p.peek().cloned();
    p.sym('{')?;
    let mut map: Vec<Vec<Option<usize>>> = dom.ids.iter().map(|v| vec![None; v.len()]).collect();
    while !p.eat_sym('}') {
        let (k, kt) = p.word("element")?;
        if p.next().map(|t| t.tok) != Some(Tok::Arrow) {
            return p.err_at(p.toks.get(p.pos - 1), "expected `->`");
        }
        let (v, vt) = p.word("element")?;
        let Some((ks, kid)) = element_key(sig, &k) else { return p.err_at(Some(&kt), format!("bad element `{k}`")) };
        let Some((vs, vid)) = element_key(sig, &v) else { return p.err_at(Some(&vt), format!("bad element `{v}`")) };
        if ks != vs {
            return p.err_at(Some(&vt), format!("{k} and {v} have different sorts"));
        }
        let Some(x) = dom.ids[ks].iter().position(|i| *i == kid) else {
            return p.err_at(Some(&kt), format!("no element {k} in graph {}", dom.name));
        };
        let Some(y) = cod.ids[vs].iter().position(|i| *i == vid) else {
            return p.err_at(Some(&vt), format!("no element {v} in graph {}", cod.name));
        };
        if map[ks][x].replace(y).is_some() {
            return p.err_at(Some(&kt), format!("{k} mapped twice"));
        }
        p.eat_sym(',');
    }
    let mut total = Vec::new();
    for (s, v) in map.iter().enumerate() {
        let mut row = Vec::new();
        for (x, y) in v.iter().enumerate() {
            match y {
                Some(y) => row.push(*y),
                None => {
                    return p.err_at(open.as_ref(), format!("{}.{} is not mapped", sig.obj(s).name, dom.ids[s][x]));
                }
            }
        }
        total.push(row);
    }
    let m = Morphism { dom: dom.graph.clone(), cod: cod.graph.clone(), map: total };
    if let Err(e) = m.check() {
        return p.err_at(open.as_ref(), format!("{} -> {}: {e}", dom.name, cod.name));
    }
    Ok(m)
}

impl GtSystem {
    pub fn parse(text: &str) -> Result<GtSystem, SystemError> {
        let lines: Vec<&str> = text.lines().collect();
        let mut skip = vec![false; lines.len()];
        let mut sig: Option<(Arc<Signature>, usize)> = None;
        let mut i = 0;
        while i < lines.len() {
            let t = lines[i].split('#').next().unwrap_or("").trim();
            if t == "signature" {
                if sig.is_some() {
                    return Err(SystemError { line: i + 1, col: 1, msg: "second signature block".into() });
                }
                let start = i;
                let mut j = i + 1;
                while j < lines.len() && lines[j].split('#').next().unwrap_or("").trim() != "end" {
                    j += 1;
                }
                if j == lines.len() {
                    return Err(SystemError { line: i + 1, col: 1, msg: "unterminated signature block".into() });
                }
                let body: Vec<&str> = lines[start + 1..j].iter().map(|l| l.split('#').next().unwrap_or("")).collect();
                let s = Signature::parse(&body.join("\n")).map_err(|es| sig_error(&es[0], start + 2))?;
                sig = Some((Arc::new(s), start + 1));
                for k in skip.iter_mut().take(j + 1).skip(start) {
                    *k = true;
                }
                i = j;
            }
            i += 1;
        }
        let Some((sig, _)) = sig else {
            return Err(SystemError { line: 1, col: 1, msg: "missing signature block".into() });
        };
        let toks = tokenize(text, &skip)?;
        let end = (lines.len().max(1), 1);
        let mut p = Parser { toks, pos: 0, end };
        let mut framework = None;
        let mut graphs: Vec<NamedGraph> = Vec::new();
        let mut rules: Vec<RuleDecl> = Vec::new();
        let mut relative: Option<Vec<(String, Token)>> = None;
        let mut strategy = None;
        while p.peek().is_some() {
            let (kw, kt) = p.word("a block keyword")?;
            match kw.as_str() {
                "framework" => {
                    let (w, t) = p.word("match class")?;
                    let Ok(mc) = w.parse::<MatchClass>() else {
                        return p.err_at(Some(&t), format!("unknown framework `{w}`"));
                    };
                    if framework.replace(Framework::new(mc)).is_some() {
                        return p.err_at(Some(&kt), "framework given twice");
                    }
                }
                "graph" => {
                    let (name, nt) = p.word("graph name")?;
                    if graphs.iter().any(|g| g.name == name) {
                        return p.err_at(Some(&nt), format!("graph {name} defined twice"));
                    }
                    let g = parse_graph(&mut p, &sig, name)?;
                    graphs.push(g);
                }
                "rule" => {
                    let (name, nt) = p.word("rule name")?;
                    if rules.iter().any(|r| r.rule.name == name) {
                        return p.err_at(Some(&nt), format!("rule {name} defined twice"));
                    }
                    let mut refs: Vec<String> = Vec::new();
                    for part in ["L", "K", "R"] {
                        p.keyword(part)?;
                        p.sym('=')?;
                        let (g, gt) = p.word("graph name")?;
                        if !graphs.iter().any(|x| x.name == g) {
                            return p.err_at(Some(&gt), format!("undefined graph {g}"));
                        }
                        refs.push(g);
                    }
                    let find = |n: &str| graphs.iter().find(|g| g.name == n).unwrap();
                    let (gl, gk, gr) = (find(&refs[0]), find(&refs[1]), find(&refs[2]));
                    p.keyword("l")?;
                    p.sym('=')?;
                    let lt = p.peek().cloned();
                    let l = parse_map(&mut p, &sig, gk, gl)?;
                    p.keyword("r")?;
                    p.sym('=')?;
                    let r = parse_map(&mut p, &sig, gk, gr)?;
                    p.keyword("end")?;
                    let rule = Rule::new(name.clone(), l, r).map_err(|e| SystemError {
                        line: lt.as_ref().map_or(kt.line, |t| t.line),
                        col: lt.as_ref().map_or(kt.col, |t| t.col),
                        msg: e.to_string(),
                    })?;
                    rules.push(RuleDecl { rule, lhs: refs[0].clone(), interface: refs[1].clone(), rhs: refs[2].clone() });
                }
                "relative" => {
                    if relative.is_some() {
                        return p.err_at(Some(&kt), "relative block given twice");
                    }
                    p.sym('{')?;
                    let mut names = Vec::new();
                    while !p.eat_sym('}') {
                        names.push(p.word("rule name")?);
                        p.eat_sym(',');
                    }
                    relative = Some(names);
                }
                "strategy" => match p.next() {
                    Some(Token { tok: Tok::Str(s), .. }) => {
                        if strategy.replace(s).is_some() {
                            return p.err_at(Some(&kt), "strategy given twice");
                        }
                    }
                    _ => return p.err_at(p.toks.get(p.pos - 1), "expected a quoted strategy"),
                },
                other => return p.err_at(Some(&kt), format!("unknown block `{other}`")),
            }
        }
        let mut rel = Vec::new();
        for (n, t) in relative.unwrap_or_default() {
            if !rules.iter().any(|r| r.rule.name == n) {
                return p.err_at(Some(&t), format!("relative block names undefined rule {n}"));
            }
            if rel.contains(&n) {
                return p.err_at(Some(&t), format!("rule {n} listed twice"));
            }
            rel.push(n);
        }
        Ok(GtSystem {
            sig,
            framework: framework.unwrap_or(Framework::new(MatchClass::Monic)),
            graphs,
            rules,
            relative: rel,
            strategy,
        })
    }

    pub fn graph(&self, name: &str) -> Option<&NamedGraph> {
        self.graphs.iter().find(|g| g.name == name)
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().map(|r| &r.rule).find(|r| r.name == name)
    }

    pub fn is_relative(&self, name: &str) -> bool {
        self.relative.iter().any(|n| n == name)
    }

    /// Rules in declaration order, flagged when they form the relative part.
    pub fn flagged_rules(&self) -> Vec<(Rule, bool)> {
        self.rules.iter().map(|r| (r.rule.clone(), self.is_relative(&r.rule.name))).collect()
    }

    /// Hex sha-256 over the signature, framework, relative part, and per rule
    /// its name, the canonical keys of L, K, R and both leg tables.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("signature {}\n", self.sig).as_bytes());
        h.update(format!("framework {}\n", self.framework.match_class).as_bytes());
        let mut rel = self.relative.clone();
        rel.sort();
        h.update(format!("relative {}\n", rel.join(",")).as_bytes());
        for d in &self.rules {
            let r = &d.rule;
            h.update(format!("rule {}\n", r.name).as_bytes());
            for g in [r.lhs(), r.interface(), r.rhs()] {
                h.update(hex::encode(g.canonical_key()).as_bytes());
                h.update(b"\n");
                for s in 0..self.sig.len() {
                    for e in g.elems(s) {
                        h.update(format!("{s}:{:?}:{:?};", e.label, e.args).as_bytes());
                    }
                }
                h.update(b"\n");
            }
            h.update(format!("l {:?}\nr {:?}\n", r.l.map, r.r.map).as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn element_label(sig: &Signature, s: SortId, l: Option<usize>) -> String {
    l.map(|l| format!(" {}", sig.obj(s).labels[l])).unwrap_or_default()
}

impl fmt::Display for NamedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = self.graph.sig();
        writeln!(f, "graph {}", self.name)?;
        for s in 0..sig.len() {
            let targets = &sig.obj(s).args;
            for (i, e) in self.graph.elems(s).iter().enumerate() {
                write!(f, "  {} {}{}", sig.obj(s).name, self.ids[s][i], element_label(sig, s, e.label))?;
                if !e.args.is_empty() {
                    let a: Vec<&str> = e.args.iter().zip(targets).map(|(&a, &t)| self.ids_of(t, a)).collect();
                    write!(f, " ({})", a.join(" "))?;
                }
                writeln!(f)?;
            }
        }
        writeln!(f, "end")
    }
}

impl NamedGraph {
    fn ids_of(&self, s: SortId, i: usize) -> &str {
        &self.ids[s][i]
    }

    pub fn element_name(&self, r: ElementRef) -> String {
        format!("{}.{}", self.graph.sig().obj(r.sort).name, self.ids[r.sort][r.id])
    }
}

fn write_map(f: &mut fmt::Formatter<'_>, m: &Morphism, dom: &NamedGraph, cod: &NamedGraph) -> fmt::Result {
    let sig = m.dom.sig();
    let mut parts = Vec::new();
    for s in 0..sig.len() {
        for (x, &y) in m.map[s].iter().enumerate() {
            parts.push(format!(
                "{} -> {}",
                dom.element_name(ElementRef { sort: s, id: x }),
                cod.element_name(ElementRef { sort: s, id: y })
            ));
        }
    }
    write!(f, "{{{}}}", parts.join(", "))
}

impl fmt::Display for GtSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "signature\n  {}\nend", self.sig)?;
        writeln!(f, "framework {}", self.framework.match_class)?;
        for g in &self.graphs {
            writeln!(f)?;
            write!(f, "{g}")?;
        }
        for d in &self.rules {
            let (gl, gk, gr) = (self.graph(&d.lhs).unwrap(), self.graph(&d.interface).unwrap(), self.graph(&d.rhs).unwrap());
            writeln!(f)?;
            writeln!(f, "rule {} L={} K={} R={}", d.rule.name, d.lhs, d.interface, d.rhs)?;
            write!(f, "  l=")?;
            write_map(f, &d.rule.l, gk, gl)?;
            write!(f, "\n  r=")?;
            write_map(f, &d.rule.r, gk, gr)?;
            writeln!(f, "\nend")?;
        }
        if !self.relative.is_empty() {
            writeln!(f, "\nrelative {{ {} }}", self.relative.join(", "))?;
        }
        if let Some(s) = &self.strategy {
            writeln!(f, "strategy \"{s}\"")?;
        }
        Ok(())
    }
}
