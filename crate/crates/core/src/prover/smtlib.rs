//! SMT-LIB2 export of the constraint system for one base size.
//!
//! Variables: `p_i` (presence of non-base element i) and `w_i` (weight of
//! weighted element i). Every polynomial value is a pair of a nonzero flag
//! `*_f` and an integer `*_v`; for the arithmetic semiring only `*_v` is used.

use std::fmt::Write;

use super::search::{compile, Poly, Problem, SearchError};
use crate::dpo::{admissible_domains, Framework, MatchClass, Rule};
use crate::graph::representable_shapes;
use crate::semiring::SemiringKind;

fn present(p: &Problem, v: usize) -> String {
    let info = &p.vars[v];
    if info.base {
        "true".into()
    } else if info.in_constraints {
        format!("p_{v}")
    } else {
        let args: Vec<String> = info.args.iter().map(|&a| present(p, a)).collect();
        if args.is_empty() { "true".into() } else { format!("(and true {})", args.join(" ")) }
    }
}

fn weight(p: &Problem, v: usize) -> String {
    if p.vars[v].weighted { format!("w_{v}") } else { "1".into() }
}

struct Emitter<'a> {
    p: &'a Problem,
    kind: SemiringKind,
    out: String,
}

impl Emitter<'_> {
    fn arith_value(&self, v: usize) -> String {
        format!("(ite {} {} 0)", present(self.p, v), weight(self.p, v))
    }

    /// Defines `{name}_f` and `{name}_v`.
    fn define_poly(&mut self, name: &str, poly: &Poly) {
        if self.kind == SemiringKind::Arithmetic {
            let mut terms = vec!["0".to_string()];
            for t in &poly.terms {
                let mut fs = vec![t.coef.to_string()];
                for &(v, e) in &t.factors {
                    for _ in 0..e {
                        fs.push(self.arith_value(v));
                    }
                }
                terms.push(format!("(* {})", fs.join(" ")));
            }
            let _ = writeln!(self.out, "(define-fun {name}_v () Int (+ {}))", terms.join(" "));
            let _ = writeln!(self.out, "(define-fun {name}_f () Bool (> {name}_v 0))");
            return;
        }
        let pick = if self.kind == SemiringKind::Tropical { "<" } else { ">" };
        let _ = writeln!(self.out, "(define-fun {name}_0_f () Bool false)");
        let _ = writeln!(self.out, "(define-fun {name}_0_v () Int 0)");
        for (i, t) in poly.terms.iter().enumerate() {
            let flags: Vec<String> = t.factors.iter().map(|&(v, _)| present(self.p, v)).collect();
            let vals: Vec<String> = t
                .factors
                .iter()
                .filter(|&&(v, _)| self.p.vars[v].weighted)
                .map(|&(v, e)| format!("(* {e} w_{v})"))
                .collect();
            let tf = format!("(and true {})", flags.join(" "));
            let tv = if vals.is_empty() { "0".to_string() } else { format!("(+ 0 {})", vals.join(" ")) };
            let (a, b) = (format!("{name}_{i}"), format!("{name}_{}", i + 1));
            let _ = writeln!(self.out, "(define-fun {b}_t () Int {tv})");
            let _ = writeln!(self.out, "(define-fun {b}_f () Bool (or {a}_f {tf}))");
            let _ = writeln!(
                self.out,
                "(define-fun {b}_v () Int (ite {tf} (ite {a}_f (ite ({pick} {b}_t {a}_v) {b}_t {a}_v) {b}_t) {a}_v))"
            );
        }
        let n = poly.terms.len();
        let _ = writeln!(self.out, "(define-fun {name}_f () Bool {name}_{n}_f)");
        let _ = writeln!(self.out, "(define-fun {name}_v () Int {name}_{n}_v)");
    }

    /// `a ≼ b` and `a ≺ b` over the flag/value pairs.
    fn le(&self, a: &str, b: &str) -> String {
        match self.kind {
            SemiringKind::Arithmetic => format!("(<= {a}_v {b}_v)"),
            SemiringKind::Tropical => format!("(or (not {b}_f) (and {a}_f (<= {a}_v {b}_v)))"),
            SemiringKind::Arctic => format!("(or (not {a}_f) (and {b}_f (<= {a}_v {b}_v)))"),
        }
    }

    fn lt(&self, a: &str, b: &str) -> String {
        match self.kind {
            SemiringKind::Arithmetic => format!("(< {a}_v {b}_v)"),
            SemiringKind::Tropical => format!("(and {a}_f (or (not {b}_f) (< {a}_v {b}_v)))"),
            SemiringKind::Arctic => format!("(and {b}_f (or (not {a}_f) (< {a}_v {b}_v)))"),
        }
    }
}

/// SMT-LIB2 script satisfiable iff some sub-graph of the complete type graph
/// of the given base size, with unbounded legal weights, removes a rule.
pub fn emit_smtlib(rules: &[Rule], fw: Framework, kind: SemiringKind, size: usize) -> Result<String, SearchError> {
    let logic = if kind == SemiringKind::Arithmetic { "QF_NIA" } else { "QF_LIA" };
    let mut out = String::new();
    let _ = writeln!(out, "; {kind} semiring, base size {size}, framework {}", fw.match_class);
    let _ = writeln!(out, "(set-logic {logic})");
    if rules.is_empty() {
        let _ = writeln!(out, "(check-sat)");
        return Ok(out);
    }
    let sig = rules[0].lhs().sig().clone();
    let domains = admissible_domains(rules, fw, &representable_shapes(&sig));
    let p = compile(rules, fw, kind, size, &domains, &vec![true; rules.len()])?;
    let mut e = Emitter { p: &p, kind, out };
    let min = if kind == SemiringKind::Arithmetic { 1 } else { 0 };
    for (v, info) in p.vars.iter().enumerate() {
        let name = p.t.elem_name(info.elem);
        if !info.base && info.in_constraints {
            let _ = writeln!(e.out, "(declare-const p_{v} Bool) ; {name}");
            for &a in &info.args {
                if !p.vars[a].base {
                    let _ = writeln!(e.out, "(assert (=> p_{v} {}))", present(&p, a));
                }
            }
        }
        if info.weighted {
            let _ = writeln!(e.out, "(declare-const w_{v} Int) ; {name}");
            let _ = writeln!(e.out, "(assert (>= w_{v} {min}))");
        }
    }
    for (ci, c) in p.constraints.iter().enumerate() {
        e.define_poly(&format!("l{ci}"), &c.left);
        e.define_poly(&format!("r{ci}"), &c.right);
        let weak = e.le(&format!("r{ci}"), &format!("l{ci}"));
        let strict = e.lt(&format!("r{ci}"), &format!("l{ci}"));
        let _ = writeln!(e.out, "(define-fun weak{ci} () Bool {weak})");
        let _ = writeln!(e.out, "(define-fun strict{ci} () Bool {strict})");
        let _ = writeln!(e.out, "(define-fun empty{ci} () Bool (and (not l{ci}_f) (not r{ci}_f)))");
        let _ = writeln!(e.out, "(assert weak{ci})");
    }
    let mut options = Vec::new();
    for (ri, cs) in p.rule_constraints.iter().enumerate() {
        if !p.strict_candidate[ri] || p.closures[ri].is_empty() {
            continue;
        }
        let mut closure_terms = Vec::new();
        for c in &p.closures[ri] {
            let mut conj: Vec<String> = c.hit.iter().map(|&v| present(&p, v)).collect();
            if fw.match_class != MatchClass::Unrestricted {
                let flowers: Vec<String> = p
                    .flowers
                    .iter()
                    .map(|f| {
                        let mask = c.base_mask | f.base_mask;
                        let mut need: Vec<String> = f.hit.iter().map(|&v| present(&p, v)).collect();
                        need.extend(
                            (0..p.vars.len())
                                .filter(|&v| !p.vars[v].base && p.vars[v].support & !mask == 0)
                                .map(|v| present(&p, v)),
                        );
                        format!("(and true {})", need.join(" "))
                    })
                    .collect();
                conj.push(format!("(or false {})", flowers.join(" ")));
            }
            let valid = format!("(and true {})", conj.join(" "));
            closure_terms.push((c.constraint, valid));
        }
        let uniform: Vec<String> = cs.iter().map(|c| format!("(or strict{c} empty{c})")).collect();
        let any_closure: Vec<&str> = closure_terms.iter().map(|(_, v)| v.as_str()).collect();
        options.push(format!("(and true {} (or false {}))", uniform.join(" "), any_closure.join(" ")));
        if kind.strictly_monotonic() {
            for (c, valid) in &closure_terms {
                options.push(format!("(and strict{c} {valid})"));
            }
        }
    }
    let _ = writeln!(e.out, "(assert (or false {}))", options.join(" "));
    let _ = writeln!(e.out, "(check-sat)");
    let _ = writeln!(e.out, "(get-model)");
    Ok(e.out)
}

pub fn smtlib_file_name(kind: SemiringKind, size: usize) -> String {
    format!("{kind}-size{size}.smt2")
}
