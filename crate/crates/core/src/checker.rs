//! Independent certificate checking: replays every removal step from the
//! system file and recomputes all comparisons. No search is performed.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::certificate::{format_map, CertificateFile, NameMap, StepFile, VERSION};
use crate::dpo::{check_rule_admissibility, Rule};
use crate::graph::{representable_shape, ElementRef, Graph};
use crate::morphism::{compose, Morphism};
use crate::prover::verdict_for;
use crate::semiring::{SemiringKind, Weight};
use crate::system::{GtSystem, NamedGraph};
use crate::wtg::{classify_from_table, compare_rule, verify_context_closure, Classification, WeightedTypeGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Reject {
    #[error("seal does not match the certificate contents")]
    Seal,
    #[error("unsupported certificate version {0}")]
    Version(u32),
    #[error("system hash mismatch")]
    Hash,
    #[error("step {step}: {msg}")]
    Malformed { step: usize, msg: String },
    #[error("step {step}: illegal weight {weight} on {element}")]
    IllegalWeight { step: usize, element: String, weight: String },
    #[error("step {step}: rule {rule} is not admissible for the weighted elements: {msg}")]
    Admissibility { step: usize, rule: String, msg: String },
    #[error("step {step}: closure of rule {rule} is invalid")]
    ClosureInvalid { step: usize, rule: String },
    #[error("step {step}: comparison fails for rule {rule} at t_K = {tk}")]
    Comparison { step: usize, rule: String, tk: String },
    #[error("step {step}: rule {rule} is {recomputed}, certificate claims {claimed}")]
    Classification { step: usize, rule: String, claimed: String, recomputed: String },
    #[error("step {step}: removed rules {claimed:?} differ from the strictly decreasing rules {expected:?}")]
    Removed { step: usize, claimed: Vec<String>, expected: Vec<String> },
    #[error("verdict `{claimed}` does not follow from the steps (expected `{expected}`)")]
    Verdict { claimed: String, expected: String },
}

fn malformed(step: usize, msg: impl Into<String>) -> Reject {
    Reject::Malformed { step, msg: msg.into() }
}

fn build_type_graph(step: usize, sys: &GtSystem, file: &StepFile) -> Result<NamedGraph, Reject> {
    let sig = &sys.sig;
    let mut ids: Vec<Vec<String>> = vec![Vec::new(); sig.len()];
    let mut index: Vec<HashMap<String, usize>> = vec![HashMap::new(); sig.len()];
    let mut parsed = Vec::new();
    for e in &file.graph {
        let s = sig.sort_id(&e.sort).ok_or_else(|| malformed(step, format!("unknown sort {}", e.sort)))?;
        if index[s].insert(e.id.clone(), ids[s].len()).is_some() {
            return Err(malformed(step, format!("element {}.{} repeated", e.sort, e.id)));
        }
        ids[s].push(e.id.clone());
        parsed.push((s, e));
    }
    let mut g = Graph::empty(sig.clone());
    for (s, e) in parsed {
        let obj = sig.obj(s);
        let label = match &e.label {
            Some(l) => Some(sig.label_id(s, l).ok_or_else(|| malformed(step, format!("unknown label {l}")))?),
            None => None,
        };
        if e.args.len() != obj.args.len() {
            return Err(malformed(step, format!("element {}.{} has wrong arity", e.sort, e.id)));
        }
        let mut args = Vec::new();
        for (a, &t) in e.args.iter().zip(&obj.args) {
            args.push(*index[t].get(a).ok_or_else(|| malformed(step, format!("dangling argument {a}")))?);
        }
        g.push(s, args, label);
    }
    if let Err(es) = g.validate() {
        return Err(malformed(step, format!("type graph: {}", es[0])));
    }
    Ok(NamedGraph { name: "T".into(), graph: Arc::new(g), ids })
}

fn lookup(sig_graph: &NamedGraph, name: &str) -> Option<ElementRef> {
    let (s, id) = name.split_once('.')?;
    let sort = sig_graph.graph.sig().sort_id(s)?;
    let idx = sig_graph.ids[sort].iter().position(|i| i == id)?;
    Some(ElementRef { sort, id: idx })
}

/// Resolves a name map into a morphism `dom → cod`; every element of `dom`
/// must be mapped exactly once.
fn resolve_map(m: &NameMap, dom: &NamedGraph, cod: &NamedGraph) -> Option<Morphism> {
    let mut map: Vec<Vec<Option<usize>>> = dom.ids.iter().map(|v| vec![None; v.len()]).collect();
    for (a, b) in m {
        let x = lookup(dom, a)?;
        let y = lookup(cod, b)?;
        if x.sort != y.sort || map[x.sort][x.id].replace(y.id).is_some() {
            return None;
        }
    }
    let map: Option<Vec<Vec<usize>>> = map.into_iter().map(|v| v.into_iter().collect()).collect();
    Morphism::new(dom.graph.clone(), cod.graph.clone(), map?).ok()
}

fn exact_weight(kind: SemiringKind, s: &str) -> Option<Weight> {
    let w: Weight = s.parse().ok()?;
    kind.is_legal(&w).then_some(w)
}

/// Checks the certificate against the system. `Ok` carries the verdict.
pub fn check_certificate(sys: &GtSystem, cert: &CertificateFile) -> Result<String, Reject> {
    if cert.compute_seal() != cert.seal {
        return Err(Reject::Seal);
    }
    if cert.version != VERSION {
        return Err(Reject::Version(cert.version));
    }
    if cert.system != sys.hash() {
        return Err(Reject::Hash);
    }
    let mut present: Vec<(Rule, bool)> = sys.flagged_rules();
    for (i, st) in cert.steps.iter().enumerate() {
        let step = i + 1;
        let kind: SemiringKind = st.semiring.parse().map_err(|e: String| malformed(step, e))?;
        let t = build_type_graph(step, sys, st)?;
        let mut weights = Vec::new();
        let mut seen = Vec::new();
        for (name, value) in &st.weights {
            let r = lookup(&t, name).ok_or_else(|| malformed(step, format!("unknown element {name}")))?;
            if seen.contains(&r) {
                return Err(malformed(step, format!("element {name} weighted twice")));
            }
            seen.push(r);
            let illegal = || Reject::IllegalWeight { step, element: name.clone(), weight: value.clone() };
            let w = exact_weight(kind, value).ok_or_else(illegal)?;
            if !kind.is_element_weight(&w) {
                return Err(illegal());
            }
            weights.push((r, w));
        }
        let wtg = WeightedTypeGraph::new(t.graph.clone(), kind, weights)
            .map_err(|e| malformed(step, format!("weighted type graph: {e}")))?;
        let names: Vec<&str> = present.iter().map(|r| r.0.name.as_str()).collect();
        let listed: Vec<&str> = st.rules.iter().map(|r| r.name.as_str()).collect();
        if names != listed {
            return Err(malformed(step, format!("rules {listed:?} differ from the remaining rules {names:?}")));
        }
        let mut shapes = Vec::new();
        for e in &wtg.elements {
            let shape = representable_shape(&sys.sig, e.shape.sort, e.shape.label);
            if !shapes.contains(&shape) {
                shapes.push(shape);
            }
        }
        let mut strict = Vec::new();
        for (entry, (rule, relative)) in st.rules.iter().zip(&present) {
            let adm = check_rule_admissibility(rule, sys.framework, &shapes);
            if !(adm.left_weighable && adm.right_bounded) {
                return Err(Reject::Admissibility { step, rule: rule.name.clone(), msg: adm.diagnostics.join("; ") });
            }
            let decl = sys.rules.iter().find(|d| d.rule.name == rule.name).expect("rule of the system");
            let lhs = sys.graph(&decl.lhs).expect("declared graph");
            let interface = sys.graph(&decl.interface).expect("declared graph");
            let closure = match &entry.closure {
                Some(m) => {
                    let c = resolve_map(m, lhs, &t)
                        .ok_or_else(|| Reject::ClosureInvalid { step, rule: rule.name.clone() })?;
                    if !verify_context_closure(&c, rule, sys.framework) {
                        return Err(Reject::ClosureInvalid { step, rule: rule.name.clone() });
                    }
                    Some(compose(&c, &rule.l).expect("composable"))
                }
                None => None,
            };
            let table = compare_rule(&wtg, rule).map_err(|e| malformed(step, e.to_string()))?;
            if table.len() != entry.table.len() {
                return Err(malformed(step, format!("rule {}: comparison table has the wrong size", rule.name)));
            }
            for (c, line) in table.iter().zip(&entry.table) {
                let tk = resolve_map(&line.tk, interface, &t);
                let tk_name = format_map(&line.tk);
                if tk.as_ref() != Some(&c.tk) {
                    return Err(Reject::Comparison { step, rule: rule.name.clone(), tk: tk_name });
                }
                let (l, r) = (exact_weight(kind, &line.left), exact_weight(kind, &line.right));
                if l.as_ref() != Some(&c.left) || r.as_ref() != Some(&c.right) {
                    return Err(Reject::Comparison { step, rule: rule.name.clone(), tk: tk_name });
                }
            }
            let claimed: Classification =
                entry.class.parse().map_err(|e: String| malformed(step, e))?;
            let recomputed = classify_from_table(kind, &table, closure.as_ref());
            if recomputed == Classification::None {
                // name the first failing t_K
                let bad = table.iter().zip(&entry.table).find(|(c, _)| !kind.le(&c.right, &c.left));
                let tk = bad.map(|(_, l)| format_map(&l.tk)).unwrap_or_default();
                return Err(Reject::Comparison { step, rule: rule.name.clone(), tk });
            }
            if claimed != recomputed {
                return Err(Reject::Classification {
                    step,
                    rule: rule.name.clone(),
                    claimed: claimed.to_string(),
                    recomputed: recomputed.to_string(),
                });
            }
            if recomputed.is_strict() && !relative {
                strict.push(rule.name.clone());
            }
        }
        if strict.is_empty() || st.removed != strict {
            return Err(Reject::Removed { step, claimed: st.removed.clone(), expected: strict });
        }
        present.retain(|r| !strict.contains(&r.0.name));
    }
    let s1: Vec<String> = present.iter().filter(|r| !r.1).map(|r| r.0.name.clone()).collect();
    let s2: Vec<String> = present.iter().filter(|r| r.1).map(|r| r.0.name.clone()).collect();
    let expected = verdict_for(&s1, &s2).to_string().trim_end().to_string();
    if cert.verdict != expected {
        return Err(Reject::Verdict { claimed: cert.verdict.clone(), expected });
    }
    Ok(expected)
}
