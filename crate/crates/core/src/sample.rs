//! Seeded random host graphs and the soundness spot check run by
//! `prove --verified`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dpo::{enumerate_matches, Framework, Rule};
use crate::graph::Graph;
use crate::morphism::enumerate_homs;
use crate::prover::ProofStep;
use crate::signature::Signature;
use crate::wtg::{verify_decomposition, weight_of_object, OrientedSquare};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn add_random_element(g: &mut Graph, s: usize, rng: &mut impl Rng) -> bool {
    let sig = g.sig().clone();
    let obj = sig.obj(s);
    let mut args = Vec::new();
    for &t in &obj.args {
        let n = g.count(t);
        if n == 0 {
            return false;
        }
        args.push(rng.gen_range(0..n));
    }
    let labels = sig.label_choices(s);
    let label = labels[rng.gen_range(0..labels.len())];
    if obj.simple && g.find(s, label, &args).is_some() {
        return false;
    }
    g.push(s, args, label);
    true
}

/// Extends `base` (or the empty graph) by random elements until it has
/// `max_base` base elements and up to `max_other` further elements.
pub fn random_graph(
    sig: &Arc<Signature>,
    base: Option<&Graph>,
    max_base: usize,
    max_other: usize,
    rng: &mut impl Rng,
) -> Graph {
    let mut g = base.cloned().unwrap_or_else(|| Graph::empty(sig.clone()));
    let base_sorts: Vec<usize> = (0..sig.len()).filter(|&s| sig.is_base(s)).collect();
    let other: Vec<usize> = (0..sig.len()).filter(|&s| !sig.is_base(s)).collect();
    let have = g.base_total();
    let extra_base = if have < max_base { rng.gen_range(0..=max_base - have) } else { 0 };
    for _ in 0..extra_base {
        let s = base_sorts[rng.gen_range(0..base_sorts.len())];
        g.push(s, Vec::new(), sig.label_choices(s)[0]);
    }
    if !other.is_empty() {
        for _ in 0..rng.gen_range(0..=max_other) {
            // arguments of deeper sorts may need shallower ones first
            let mut order = other.clone();
            order.sort_by_key(|&s| sig.depth(s));
            let s = order[rng.gen_range(0..order.len())];
            add_random_element(&mut g, s, rng);
        }
    }
    g
}

/// Random host containing the left-hand side of some rule, so that matches
/// actually occur.
pub fn random_host(rules: &[Rule], max_base: usize, max_other: usize, rng: &mut impl Rng) -> Graph {
    let r = &rules[rng.gen_range(0..rules.len())];
    let lhs = r.lhs();
    random_graph(lhs.sig(), Some(lhs), max_base.max(lhs.base_total()), max_other, rng)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpotCheck {
    pub rewrite_steps: usize,
    pub decompositions: usize,
    pub failures: Vec<String>,
}

/// Rewrites random hosts with every rule present at each proof step and
/// checks the weight decrease promised by the step, and the decomposition of
/// the step's pushout squares for up to `phis` morphisms into `T`.
pub fn spot_check(
    rules: &[(Rule, bool)],
    fw: Framework,
    steps: &[ProofStep],
    seed: u64,
    hosts: usize,
    phis: usize,
) -> SpotCheck {
    let mut rng = rng(seed);
    let mut out = SpotCheck::default();
    let mut present: Vec<Rule> = rules.iter().map(|r| r.0.clone()).collect();
    for (i, step) in steps.iter().enumerate() {
        let wtg = &step.wtg;
        let k = wtg.kind();
        for _ in 0..hosts {
            let g = Arc::new(random_host(&present, 5, 6, &mut rng));
            let Ok(wg) = weight_of_object(wtg, &g) else { continue };
            for rule in &present {
                let strict = step.removed.contains(&rule.name);
                for (m, d) in enumerate_matches(rule, &g, fw) {
                    out.rewrite_steps += 1;
                    let wh = match weight_of_object(wtg, &d.h) {
                        Ok(w) => w,
                        Err(e) => {
                            out.failures.push(format!("step {}: {}: {e}", i + 1, rule.name));
                            continue;
                        }
                    };
                    let ok = if strict { k.lt(&wh, &wg) } else { k.le(&wh, &wg) };
                    if !ok {
                        out.failures.push(format!(
                            "step {}: rule {} rewrites a host of weight {wg} into one of weight {wh}",
                            i + 1,
                            rule.name
                        ));
                    }
                    let left = OrientedSquare {
                        alpha: rule.l.clone(),
                        beta: d.u.clone(),
                        beta_p: m.clone(),
                        alpha_p: d.l_prime.clone(),
                    };
                    let right = OrientedSquare {
                        alpha: rule.r.clone(),
                        beta: d.u.clone(),
                        beta_p: d.w.clone(),
                        alpha_p: d.r_prime.clone(),
                    };
                    for (sq, obj, exact) in [(&left, &d.g, true), (&right, &d.h, false)] {
                        for phi in enumerate_homs(obj, &wtg.t, None, false).into_iter().take(phis) {
                            out.decompositions += 1;
                            match verify_decomposition(wtg, sq, &phi) {
                                Ok(dec) if (exact && dec.exact) || (!exact && dec.upper) => {}
                                Ok(dec) => out.failures.push(format!(
                                    "step {}: rule {}: weight {} against decomposition {}",
                                    i + 1,
                                    rule.name,
                                    dec.weight,
                                    dec.k
                                )),
                                Err(e) => out.failures.push(format!("step {}: {}: {e}", i + 1, rule.name)),
                            }
                        }
                    }
                }
            }
        }
        present.retain(|r| !step.removed.contains(&r.name));
    }
    out
}
