//! DPO rules, pushouts, pushout complements and rewrite steps.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Graph, Shape};
use crate::morphism::{classify_monicity, compose, enumerate_homs, factors, Morphism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchClass {
    Unrestricted,
    Monic,
    RegularMonic,
}

impl fmt::Display for MatchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchClass::Unrestricted => "unrestricted",
            MatchClass::Monic => "monic",
            MatchClass::RegularMonic => "regular-monic",
        })
    }
}

impl FromStr for MatchClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unrestricted" => Ok(MatchClass::Unrestricted),
            "monic" => Ok(MatchClass::Monic),
            "regular-monic" => Ok(MatchClass::RegularMonic),
            _ => Err(format!("unknown framework `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Framework {
    pub match_class: MatchClass,
}

impl Framework {
    pub fn new(match_class: MatchClass) -> Framework {
        Framework { match_class }
    }

    pub fn admits(&self, m: &Morphism) -> bool {
        match self.match_class {
            MatchClass::Unrestricted => true,
            MatchClass::Monic => m.is_monic(),
            MatchClass::RegularMonic => classify_monicity(m).regular_monic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub l: Morphism,
    pub r: Morphism,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DpoError {
    #[error("rule {0}: l and r have different domains")]
    Span(String),
    #[error("rule {0}: left leg l is not monic")]
    NotMonic(String),
    #[error("left leg is not monic")]
    Precondition,
}

impl Rule {
    pub fn new(name: impl Into<String>, l: Morphism, r: Morphism) -> Result<Rule, DpoError> {
        let name = name.into();
        if *l.dom != *r.dom {
            return Err(DpoError::Span(name));
        }
        if !l.is_monic() {
            return Err(DpoError::NotMonic(name));
        }
        Ok(Rule { name, l, r })
    }

    pub fn lhs(&self) -> &Arc<Graph> {
        &self.l.cod
    }
    pub fn interface(&self) -> &Arc<Graph> {
        &self.l.dom
    }
    pub fn rhs(&self) -> &Arc<Graph> {
        &self.r.cod
    }
}

#[derive(Debug, Clone)]
pub struct StepDiagram {
    pub rule: String,
    pub m: Morphism,
    pub u: Morphism,
    pub l_prime: Morphism,
    pub w: Morphism,
    pub r_prime: Morphism,
    pub g: Arc<Graph>,
    pub c: Arc<Graph>,
    pub h: Arc<Graph>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let n = self.0[y];
            self.0[y] = r;
            y = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        // smaller index stays root so numbering follows first occurrence
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.0[hi] = lo;
        true
    }
}

/// Pushout of the span `B <-f- A -g-> C`. Simple sorts additionally identify
/// elements with equal label and argument tuple.
pub fn pushout(f: &Morphism, g: &Morphism) -> (Arc<Graph>, Morphism, Morphism) {
    assert!(*f.dom == *g.dom, "pushout of a non-span");
    let (b, c) = (&f.cod, &g.cod);
    let sig = b.sig().clone();
    let mut d = Graph::empty(sig.clone());
    let mut in_b: Vec<Vec<usize>> = vec![Vec::new(); sig.len()];
    let mut in_c: Vec<Vec<usize>> = vec![Vec::new(); sig.len()];
    for &s in sig.topo_order() {
        let nb = b.count(s);
        let n = nb + c.count(s);
        let mut uf = UnionFind((0..n).collect());
        for a in 0..f.dom.count(s) {
            uf.union(f.map[s][a], nb + g.map[s][a]);
        }
        let targets = sig.obj(s).args.clone();
        let key = |i: usize, in_b: &Vec<Vec<usize>>, in_c: &Vec<Vec<usize>>| {
            let e = if i < nb { &b.elems(s)[i] } else { &c.elems(s)[i - nb] };
            let im = if i < nb { in_b } else { in_c };
            let args: Vec<usize> = e.args.iter().zip(&targets).map(|(&x, &t)| im[t][x]).collect();
            (e.label, args)
        };
        if sig.obj(s).simple {
            let keys: Vec<_> = (0..n).map(|i| key(i, &in_b, &in_c)).collect();
            for i in 0..n {
                for j in 0..i {
                    if keys[i] == keys[j] {
                        uf.union(i, j);
                        break;
                    }
                }
            }
        }
        let mut class_id = vec![usize::MAX; n];
        let mut ids = vec![0; n];
        for i in 0..n {
            let r = uf.find(i);
            if class_id[r] == usize::MAX {
                let (label, args) = key(i, &in_b, &in_c);
                class_id[r] = d.push(s, args, label);
            }
            ids[i] = class_id[r];
        }
        in_b[s] = ids[..nb].to_vec();
        in_c[s] = ids[nb..].to_vec();
    }
    let d = Arc::new(d);
    let ib = Morphism { dom: b.clone(), cod: d.clone(), map: in_b };
    let ic = Morphism { dom: c.clone(), cod: d.clone(), map: in_c };
    (d, ib, ic)
}

/// Deleting pushout complement of `K -l-> L -m-> G`, when the gluing
/// conditions hold.
pub fn pushout_complement(l: &Morphism, m: &Morphism) -> Result<Option<(Arc<Graph>, Morphism, Morphism)>, DpoError> {
    if !l.is_monic() {
        return Err(DpoError::Precondition);
    }
    let g = &m.cod;
    let sig = g.sig().clone();
    let in_k = l.image_mask();
    // identification
    for s in 0..sig.len() {
        let ms = &m.map[s];
        for x in 0..ms.len() {
            for y in 0..x {
                if ms[x] == ms[y] && !(in_k[s][x] && in_k[s][y]) {
                    return Ok(None);
                }
            }
        }
    }
    let mut deleted: Vec<Vec<bool>> = (0..sig.len()).map(|s| vec![false; g.count(s)]).collect();
    for s in 0..sig.len() {
        for (x, &y) in m.map[s].iter().enumerate() {
            if !in_k[s][x] {
                deleted[s][y] = true;
            }
        }
    }
    // dangling
    for s in 0..sig.len() {
        let targets = &sig.obj(s).args;
        for (y, e) in g.elems(s).iter().enumerate() {
            if !deleted[s][y] && e.args.iter().zip(targets).any(|(&a, &t)| deleted[t][a]) {
                return Ok(None);
            }
        }
    }
    let mut c = Graph::empty(sig.clone());
    let mut new_id: Vec<Vec<usize>> = (0..sig.len()).map(|s| vec![usize::MAX; g.count(s)]).collect();
    let mut incl: Vec<Vec<usize>> = vec![Vec::new(); sig.len()];
    for &s in sig.topo_order() {
        let targets = sig.obj(s).args.clone();
        for (y, e) in g.elems(s).iter().enumerate() {
            if deleted[s][y] {
                continue;
            }
            let args = e.args.iter().zip(&targets).map(|(&a, &t)| new_id[t][a]).collect();
            new_id[s][y] = c.push(s, args, e.label);
            incl[s].push(y);
        }
    }
    let c = Arc::new(c);
    let l_prime = Morphism { dom: c.clone(), cod: g.clone(), map: incl };
    let ml = compose(m, l).expect("composable");
    let u_map = ml.map.iter().enumerate().map(|(s, v)| v.iter().map(|&y| new_id[s][y]).collect()).collect();
    let u = Morphism { dom: l.dom.clone(), cod: c.clone(), map: u_map };
    Ok(Some((c, u, l_prime)))
}

/// All admissible matches of the rule into `g` with their DPO diagrams.
pub fn enumerate_matches(rule: &Rule, g: &Arc<Graph>, fw: Framework) -> Vec<(Morphism, StepDiagram)> {
    let mono = fw.match_class != MatchClass::Unrestricted;
    let mut out = Vec::new();
    for m in enumerate_homs(rule.lhs(), g, None, mono) {
        if !fw.admits(&m) {
            continue;
        }
        let Ok(Some((c, u, l_prime))) = pushout_complement(&rule.l, &m) else { continue };
        let (h, w, r_prime) = pushout(&rule.r, &u);
        let step = StepDiagram { rule: rule.name.clone(), m: m.clone(), u, l_prime, w, r_prime, g: g.clone(), c, h };
        out.push((m, step));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admissibility {
    pub left_weighable: bool,
    pub right_bounded: bool,
    pub diagnostics: Vec<String>,
}

/// Does the shape contain an element of a simple sort?
pub fn shape_touches_simple(shape: &Shape) -> bool {
    let sig = shape.graph.sig();
    (0..sig.len()).any(|s| sig.obj(s).simple && shape.graph.count(s) > 0)
}

pub fn check_rule_admissibility(rule: &Rule, fw: Framework, domains: &[Shape]) -> Admissibility {
    let mut diagnostics = Vec::new();
    let mon = classify_monicity(&rule.l);
    if !mon.monic {
        diagnostics.push(format!("rule {}: l is not monic", rule.name));
    }
    let sig = rule.lhs().sig().clone();
    for x in domains {
        if shape_touches_simple(x) && !mon.regular_monic {
            diagnostics.push(format!(
                "rule {}: l is not regular monic, shape {} is not strongly traceable",
                rule.name,
                x.name(&sig)
            ));
        }
        if fw.match_class == MatchClass::Unrestricted {
            let through = enumerate_homs(&x.graph, rule.lhs(), None, false)
                .into_iter()
                .filter(|h| factors(h, &rule.l))
                .count();
            if through > 1 {
                diagnostics.push(format!(
                    "rule {}: {} occurrences of shape {} lie in the interface; a match may merge them",
                    rule.name,
                    through,
                    x.name(&sig)
                ));
            }
        }
    }
    Admissibility { left_weighable: diagnostics.is_empty(), right_bounded: true, diagnostics }
}

/// Shapes admissible as weighted-element domains for every rule.
pub fn admissible_domains(rules: &[Rule], fw: Framework, shapes: &[Shape]) -> Vec<Shape> {
    shapes
        .iter()
        .filter(|x| rules.iter().all(|r| check_rule_admissibility(r, fw, std::slice::from_ref(x)).left_weighable))
        .cloned()
        .collect()
}
