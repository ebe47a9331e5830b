//! Proof certificates: the resolved form produced by the prover and the
//! name-based file form, with a line-oriented text encoding and JSON.
//!
//! ```text
//! wtg-certificate 1
//! system <hex sha-256 of the system>
//! step 1
//! semiring arithmetic
//! graph T
//!   V 0
//!   E 0 (0 0)
//! end
//! weight E.0 2
//! rule rho closure-decreasing
//!   closure {V.x -> V.0, E.loop -> E.0}
//!   cmp {V.x -> V.0} 2 1
//! end
//! removed rho
//! end
//! verdict terminating
//! seal <hex sha-256 of everything above this line>
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::ElementRef;
use crate::morphism::Morphism;
use crate::prover::{ProofStep, StrategyRun, Verdict};
use crate::system::{GtSystem, NamedGraph};
use crate::wtg::compare_rule;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofCertificate {
    pub system_hash: String,
    pub steps: Vec<ProofStep>,
    pub verdict: Verdict,
}

impl ProofCertificate {
    pub fn from_run(system: &GtSystem, run: &StrategyRun) -> ProofCertificate {
        ProofCertificate { system_hash: system.hash(), steps: run.steps.clone(), verdict: run.verdict() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementLine {
    pub sort: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub args: Vec<String>,
}

pub type NameMap = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonLine {
    pub tk: NameMap,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub name: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<NameMap>,
    pub table: Vec<ComparisonLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFile {
    pub semiring: String,
    pub graph: Vec<ElementLine>,
    pub weights: Vec<(String, String)>,
    pub rules: Vec<RuleEntry>,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub version: u32,
    pub system: String,
    pub steps: Vec<StepFile>,
    /// `terminating`, `relatively-terminating <rules>` or `failed <rules>`.
    pub verdict: String,
    pub seal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate line {line}: {msg}")]
pub struct CertificateSyntaxError {
    pub line: usize,
    pub msg: String,
}

fn t_name(t: &crate::graph::Graph, r: ElementRef) -> String {
    t.elem_name(r)
}

fn name_map(m: &Morphism, dom: &NamedGraph) -> NameMap {
    let mut out = Vec::new();
    for s in 0..m.map.len() {
        for (x, &y) in m.map[s].iter().enumerate() {
            out.push((dom.element_name(ElementRef { sort: s, id: x }), t_name(&m.cod, ElementRef { sort: s, id: y })));
        }
    }
    out
}

fn step_file(system: &GtSystem, step: &ProofStep) -> StepFile {
    let t = &step.wtg.t;
    let sig = t.sig();
    let mut graph = Vec::new();
    for r in t.refs() {
        let e = t.elem(r);
        let obj = sig.obj(r.sort);
        graph.push(ElementLine {
            sort: obj.name.clone(),
            id: r.id.to_string(),
            label: e.label.map(|l| obj.labels[l].clone()),
            args: e.args.iter().map(|a| a.to_string()).collect(),
        });
    }
    let weights = step.wtg.elements.iter().map(|w| (t_name(t, w.target()), w.weight.to_string())).collect();
    let mut rules = Vec::new();
    for rr in &step.rules {
        let decl = system.rules.iter().find(|d| d.rule.name == rr.name).expect("rule of the system");
        let lhs = system.graph(&decl.lhs).expect("declared graph");
        let interface = system.graph(&decl.interface).expect("declared graph");
        let table = compare_rule(&step.wtg, &decl.rule)
            .expect("consistent weighted type graph")
            .into_iter()
            .map(|c| ComparisonLine { tk: name_map(&c.tk, interface), left: c.left.to_string(), right: c.right.to_string() })
            .collect();
        rules.push(RuleEntry {
            name: rr.name.clone(),
            class: rr.class.to_string(),
            closure: rr.closure.as_ref().map(|c| name_map(c, lhs)),
            table,
        });
    }
    StepFile { semiring: step.kind.to_string(), graph, weights, rules, removed: step.removed.clone() }
}

impl CertificateFile {
    pub fn from_proof(system: &GtSystem, proof: &ProofCertificate) -> CertificateFile {
        let mut c = CertificateFile {
            version: VERSION,
            system: proof.system_hash.clone(),
            steps: proof.steps.iter().map(|s| step_file(system, s)).collect(),
            verdict: proof.verdict.to_string().trim_end().to_string(),
            seal: String::new(),
        };
        c.reseal();
        c
    }

    /// Everything the seal covers.
    pub fn body(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(format!("wtg-certificate {}", self.version));
        line(format!("system {}", self.system));
        for (i, st) in self.steps.iter().enumerate() {
            line(format!("step {}", i + 1));
            line(format!("semiring {}", st.semiring));
            line("graph T".into());
            for e in &st.graph {
                let mut s = format!("  {} {}", e.sort, e.id);
                if let Some(l) = &e.label {
                    s.push(' ');
                    s.push_str(l);
                }
                if !e.args.is_empty() {
                    s.push_str(&format!(" ({})", e.args.join(" ")));
                }
                line(s);
            }
            line("end".into());
            for (e, w) in &st.weights {
                line(format!("weight {e} {w}"));
            }
            for r in &st.rules {
                line(format!("rule {} {}", r.name, r.class));
                if let Some(c) = &r.closure {
                    line(format!("  closure {}", format_map(c)));
                }
                for c in &r.table {
                    line(format!("  cmp {} {} {}", format_map(&c.tk), c.left, c.right));
                }
                line("end".into());
            }
            line(format!("removed {}", st.removed.join(" ")).trim_end().to_string());
            line("end".into());
        }
        line(format!("verdict {}", self.verdict));
        out
    }

    pub fn compute_seal(&self) -> String {
        hex::encode(Sha256::digest(self.body().as_bytes()))
    }

    pub fn reseal(&mut self) {
        self.seal = self.compute_seal();
    }

    pub fn to_text(&self) -> String {
        format!("{}seal {}\n", self.body(), self.seal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// Accepts either encoding.
    pub fn parse(text: &str) -> Result<CertificateFile, CertificateSyntaxError> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text)
                .map_err(|e| CertificateSyntaxError { line: e.line(), msg: e.to_string() });
        }
        parse_text(text)
    }
}

pub fn format_map(m: &NameMap) -> String {
    let parts: Vec<String> = m.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
    format!("{{{}}}", parts.join(", "))
}

fn parse_map(s: &str, line: usize) -> Result<(NameMap, &str), CertificateSyntaxError> {
    let err = |msg: &str| CertificateSyntaxError { line, msg: msg.into() };
    let s = s.trim_start();
    let rest = s.strip_prefix('{').ok_or_else(|| err("expected `{`"))?;
    let close = rest.find('}').ok_or_else(|| err("expected `}`"))?;
    let inner = &rest[..close];
    let mut out = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part.split_once("->").ok_or_else(|| err("expected `->` in map entry"))?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() || a.contains(char::is_whitespace) || b.contains(char::is_whitespace) {
            return Err(err("malformed map entry"));
        }
        out.push((a.to_string(), b.to_string()));
    }
    Ok((out, &rest[close + 1..]))
}

fn expect_line(
    lines: &[(usize, &str)],
    pos: &mut usize,
    last: usize,
    want: &str,
) -> Result<(usize, Vec<String>), CertificateSyntaxError> {
    let Some(&(n, l)) = lines.get(*pos) else {
        return Err(CertificateSyntaxError { line: last, msg: format!("expected `{want}`, found end of file") });
    };
    *pos += 1;
    let words: Vec<String> = l.split_whitespace().map(String::from).collect();
    if words[0] != want {
        return Err(CertificateSyntaxError { line: n, msg: format!("expected `{want}`, found `{}`", words[0]) });
    }
    Ok((n, words))
}

fn parse_text(text: &str) -> Result<CertificateFile, CertificateSyntaxError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
    let mut pos = 0;
    let last = lines.last().map_or(1, |l| l.0);
    let err = |line: usize, msg: String| CertificateSyntaxError { line, msg };
    let (n, head) = expect_line(&lines, &mut pos, last, "wtg-certificate")?;
    let version = head.get(1).and_then(|v| v.parse().ok()).filter(|_| head.len() == 2).ok_or_else(|| err(n, "bad version".into()))?;
    let (n, sys) = expect_line(&lines, &mut pos, last, "system")?;
    if sys.len() != 2 {
        return Err(err(n, "expected a system hash".into()));
    }
    let mut steps = Vec::new();
    loop {
        let Some(&(n, l)) = lines.get(pos) else { return Err(err(last, "missing verdict".into())) };
        if !l.starts_with("step ") {
            break;
        }
        pos += 1;
        if l != format!("step {}", steps.len() + 1) {
            return Err(err(n, "steps must be numbered consecutively".into()));
        }
        let (n, sr) = expect_line(&lines, &mut pos, last, "semiring")?;
        let semiring = sr.get(1).cloned().filter(|_| sr.len() == 2).ok_or_else(|| err(n, "expected a semiring".into()))?;
        let (n, g) = expect_line(&lines, &mut pos, last, "graph")?;
        if g.len() != 2 {
            return Err(err(n, "expected `graph T`".into()));
        }
        let mut graph = Vec::new();
        loop {
            let Some(&(n, l)) = lines.get(pos) else { return Err(err(last, "unterminated graph".into())) };
            pos += 1;
            if l == "end" {
                break;
            }
            let (head, args) = match l.split_once('(') {
                Some((h, a)) => {
                    let a = a.strip_suffix(')').ok_or_else(|| err(n, "expected `)`".into()))?;
                    (h, a.split_whitespace().map(String::from).collect())
                }
                None => (l, Vec::new()),
            };
            let w: Vec<&str> = head.split_whitespace().collect();
            if !(2..=3).contains(&w.len()) {
                return Err(err(n, "malformed element line".into()));
            }
            graph.push(ElementLine {
                sort: w[0].into(),
                id: w[1].into(),
                label: w.get(2).map(|s| s.to_string()),
                args,
            });
        }
        let mut weights = Vec::new();
        while let Some(&(n, l)) = lines.get(pos) {
            if !l.starts_with("weight ") {
                break;
            }
            pos += 1;
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() != 3 {
                return Err(err(n, "expected `weight ELEMENT VALUE`".into()));
            }
            weights.push((w[1].to_string(), w[2].to_string()));
        }
        let mut rules = Vec::new();
        while let Some(&(n, l)) = lines.get(pos) {
            if !l.starts_with("rule ") {
                break;
            }
            pos += 1;
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() != 3 {
                return Err(err(n, "expected `rule NAME CLASS`".into()));
            }
            let mut entry = RuleEntry { name: w[1].into(), class: w[2].into(), closure: None, table: Vec::new() };
            loop {
                let Some(&(n, l)) = lines.get(pos) else { return Err(err(last, "unterminated rule".into())) };
                pos += 1;
                if l == "end" {
                    break;
                }
                if let Some(rest) = l.strip_prefix("closure ") {
                    if entry.closure.is_some() || !entry.table.is_empty() {
                        return Err(err(n, "unexpected closure line".into()));
                    }
                    let (m, tail) = parse_map(rest, n)?;
                    if !tail.trim().is_empty() {
                        return Err(err(n, "trailing input after closure".into()));
                    }
                    entry.closure = Some(m);
                } else if let Some(rest) = l.strip_prefix("cmp ") {
                    let (tk, tail) = parse_map(rest, n)?;
                    let v: Vec<&str> = tail.split_whitespace().collect();
                    if v.len() != 2 {
                        return Err(err(n, "expected two weights after the map".into()));
                    }
                    entry.table.push(ComparisonLine { tk, left: v[0].into(), right: v[1].into() });
                } else {
                    return Err(err(n, "expected `closure`, `cmp` or `end`".into()));
                }
            }
            rules.push(entry);
        }
        let (_, rm) = expect_line(&lines, &mut pos, last, "removed")?;
        let removed = rm[1..].to_vec();
        expect_line(&lines, &mut pos, last, "end")?;
        steps.push(StepFile { semiring, graph, weights, rules, removed });
    }
    let Some(&(n, v)) = lines.get(pos) else { return Err(err(last, "missing verdict".into())) };
    pos += 1;
    let verdict = v.strip_prefix("verdict ").ok_or_else(|| err(n, "expected `verdict`".into()))?;
    let verdict = verdict.split_whitespace().collect::<Vec<_>>().join(" ");
    let Some(&(n, s)) = lines.get(pos) else { return Err(err(last, "missing seal".into())) };
    pos += 1;
    let seal = s.strip_prefix("seal ").ok_or_else(|| err(n, "expected `seal`".into()))?.trim().to_string();
    if let Some(&(n, _)) = lines.get(pos) {
        return Err(err(n, "trailing input after seal".into()));
    }
    Ok(CertificateFile { version, system: sys[1].clone(), steps, verdict, seal })
}
