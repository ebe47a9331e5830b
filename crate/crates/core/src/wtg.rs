//! Weighted type graphs: weights of morphisms and objects, rule
//! classification and context closures.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::dpo::{Framework, MatchClass, Rule};
use crate::graph::{complete_type_graph, representable_shape, ElementRef, Graph, Shape};
use crate::morphism::{compose, count_triangles, enumerate_homs, factors, for_each_hom, Morphism, PartialMap};
use crate::semiring::{SemiringDescriptor, SemiringError, SemiringKind, Weight};
use crate::signature::SortId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedElement {
    pub shape: Shape,
    pub e: Morphism,
    pub weight: Weight,
}

impl WeightedElement {
    /// Element of `T` the generator is sent to.
    pub fn target(&self) -> ElementRef {
        ElementRef { sort: self.shape.sort, id: self.e.map[self.shape.sort][self.shape.generator] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedTypeGraph {
    pub t: Arc<Graph>,
    pub elements: Vec<WeightedElement>,
    pub semiring: SemiringDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WtgError {
    #[error("weight {weight} of element {elem} is not admissible in the {kind} semiring")]
    IllegalWeight { elem: String, weight: Weight, kind: SemiringKind },
    #[error("morphism does not land in the type graph")]
    Codomain,
    #[error("shapes of the square do not fit together")]
    Shape,
    #[error(transparent)]
    Semiring(#[from] SemiringError),
}

/// The unique morphism from the shape of `(sort, label)` sending the generator to `target`.
pub fn element_morphism(shape: &Shape, t: &Arc<Graph>, target: usize) -> Option<Morphism> {
    let g = &shape.graph;
    let mut map: Vec<Vec<usize>> = (0..g.sig().len()).map(|s| vec![usize::MAX; g.count(s)]).collect();
    fn place(g: &Graph, t: &Graph, s: SortId, x: usize, y: usize, map: &mut Vec<Vec<usize>>) -> bool {
        if y >= t.count(s) || g.elems(s)[x].label != t.elems(s)[y].label {
            return false;
        }
        map[s][x] = y;
        let targets = g.sig().obj(s).args.clone();
        let (ga, ta) = (g.elems(s)[x].args.clone(), t.elems(s)[y].args.clone());
        ga.iter().zip(&ta).zip(&targets).all(|((&a, &b), &ts)| place(g, t, ts, a, b, map))
    }
    if !place(g, t, shape.sort, shape.generator, target, &mut map) {
        return None;
    }
    Morphism::new(shape.graph.clone(), t.clone(), map).ok()
}

impl WeightedTypeGraph {
    pub fn new(
        t: Arc<Graph>,
        kind: SemiringKind,
        weights: Vec<(ElementRef, Weight)>,
    ) -> Result<WeightedTypeGraph, WtgError> {
        let sig = t.sig().clone();
        let mut elements = Vec::new();
        for (r, w) in weights {
            let elem = t.elem_name(r);
            if r.id >= t.count(r.sort) {
                return Err(WtgError::Codomain);
            }
            if !kind.is_element_weight(&w) {
                return Err(WtgError::IllegalWeight { elem, weight: w, kind });
            }
            let shape = representable_shape(&sig, r.sort, t.elem(r).label);
            let e = element_morphism(&shape, &t, r.id).ok_or(WtgError::Codomain)?;
            elements.push(WeightedElement { shape, e, weight: w });
        }
        Ok(WeightedTypeGraph { t, elements, semiring: kind.into() })
    }

    pub fn kind(&self) -> SemiringKind {
        self.semiring.kind
    }
}

/// `⊙_e w(e)^{#triangles(e, φ)}`, counting commuting triangles by enumeration.
pub fn weight_of_morphism(wtg: &WeightedTypeGraph, phi: &Morphism) -> Result<Weight, WtgError> {
    if *phi.cod != *wtg.t {
        return Err(WtgError::Codomain);
    }
    let k = wtg.kind();
    let mut acc = k.one();
    for el in &wtg.elements {
        let n = count_triangles(&el.e, phi).map_err(|_| WtgError::Codomain)?;
        acc = k.mul(&acc, &k.pow(&el.weight, n as u64)?)?;
    }
    Ok(acc)
}

/// Same value via preimage counting; valid because every domain is representable.
pub fn weight_of_morphism_fast(wtg: &WeightedTypeGraph, phi: &Morphism) -> Result<Weight, WtgError> {
    if *phi.cod != *wtg.t {
        return Err(WtgError::Codomain);
    }
    let k = wtg.kind();
    let mut acc = k.one();
    for el in &wtg.elements {
        let t = el.target();
        let n = phi.map[t.sort].iter().filter(|&&y| y == t.id).count();
        acc = k.mul(&acc, &k.pow(&el.weight, n as u64)?)?;
    }
    Ok(acc)
}

/// Weight of `φ` counting only occurrences that do not factor through `alpha`.
pub fn weight_of_morphism_excluding(
    wtg: &WeightedTypeGraph,
    phi: &Morphism,
    alpha: &Morphism,
) -> Result<Weight, WtgError> {
    if *phi.cod != *wtg.t || *alpha.cod != *phi.dom {
        return Err(WtgError::Codomain);
    }
    let k = wtg.kind();
    let mut acc = k.one();
    for el in &wtg.elements {
        let mut n = 0u64;
        let allowed = |s: SortId, a: usize, b: usize| phi.map[s][b] == el.e.map[s][a];
        for_each_hom(&el.e.dom, &phi.dom, false, &allowed, &mut |m| {
            let tau = Morphism { dom: el.e.dom.clone(), cod: phi.dom.clone(), map: m.to_vec() };
            if !factors(&tau, alpha) {
                n += 1;
            }
            true
        });
        acc = k.mul(&acc, &k.pow(&el.weight, n)?)?;
    }
    Ok(acc)
}

pub fn weight_of_object(wtg: &WeightedTypeGraph, g: &Arc<Graph>) -> Result<Weight, WtgError> {
    let k = wtg.kind();
    let mut acc = k.zero();
    for phi in enumerate_homs(g, &wtg.t, None, false) {
        acc = k.add(&acc, &weight_of_morphism_fast(wtg, &phi)?)?;
    }
    Ok(acc)
}

/// `w({t_Y | t_Y ∘ side = t_K})` together with the size of that set.
pub fn side_weight_counted(
    wtg: &WeightedTypeGraph,
    side: &Morphism,
    tk: &Morphism,
) -> Result<(Weight, usize), WtgError> {
    if *tk.cod != *wtg.t {
        return Err(WtgError::Codomain);
    }
    let y = &side.cod;
    let mut constraint: PartialMap = (0..y.sig().len()).map(|s| vec![None; y.count(s)]).collect();
    for (s, v) in side.map.iter().enumerate() {
        for (x, &img) in v.iter().enumerate() {
            match constraint[s][img] {
                // t_K identifies less than the side does: no extension
                Some(prev) if prev != tk.map[s][x] => return Ok((wtg.kind().zero(), 0)),
                _ => constraint[s][img] = Some(tk.map[s][x]),
            }
        }
    }
    let k = wtg.kind();
    let mut acc = k.zero();
    let homs = enumerate_homs(y, &wtg.t, Some(&constraint), false);
    for ty in &homs {
        acc = k.add(&acc, &weight_of_morphism(wtg, ty)?)?;
    }
    Ok((acc, homs.len()))
}

pub fn side_weight(wtg: &WeightedTypeGraph, side: &Morphism, tk: &Morphism) -> Result<Weight, WtgError> {
    side_weight_counted(wtg, side, tk).map(|p| p.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classification {
    None,
    Weak,
    ClosureDecreasing,
    Uniform,
}

impl Classification {
    pub fn is_strict(self) -> bool {
        matches!(self, Classification::ClosureDecreasing | Classification::Uniform)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::None => "none",
            Classification::Weak => "weak",
            Classification::ClosureDecreasing => "closure-decreasing",
            Classification::Uniform => "uniform",
        })
    }
}

impl FromStr for Classification {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Classification::None),
            "weak" => Ok(Classification::Weak),
            "closure-decreasing" => Ok(Classification::ClosureDecreasing),
            "uniform" => Ok(Classification::Uniform),
            _ => Err(format!("unknown classification `{s}`")),
        }
    }
}

/// One row of a rule's comparison table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub tk: Morphism,
    pub left: Weight,
    pub right: Weight,
    pub left_empty: bool,
    pub right_empty: bool,
}

/// Side weights of both legs for every `t_K : K → T`.
pub fn compare_rule(wtg: &WeightedTypeGraph, rule: &Rule) -> Result<Vec<Comparison>, WtgError> {
    let mut out = Vec::new();
    for tk in enumerate_homs(rule.interface(), &wtg.t, None, false) {
        let (left, nl) = side_weight_counted(wtg, &rule.l, &tk)?;
        let (right, nr) = side_weight_counted(wtg, &rule.r, &tk)?;
        out.push(Comparison { tk, left, right, left_empty: nl == 0, right_empty: nr == 0 });
    }
    Ok(out)
}

/// Strongest classification given the comparison table. `closure` is assumed
/// to be a verified context closure.
pub fn classify_from_table(kind: SemiringKind, table: &[Comparison], closure_tk: Option<&Morphism>) -> Classification {
    let weak = table.iter().all(|c| kind.le(&c.right, &c.left));
    let Some(ctk) = closure_tk else {
        return if weak { Classification::Weak } else { Classification::None };
    };
    let uniform = table.iter().all(|c| kind.lt(&c.right, &c.left) || (c.left_empty && c.right_empty));
    if uniform {
        return Classification::Uniform;
    }
    if weak && kind.strictly_monotonic() {
        let at = table.iter().find(|c| c.tk.map == ctk.map);
        if at.is_some_and(|c| kind.lt(&c.right, &c.left)) {
            return Classification::ClosureDecreasing;
        }
    }
    if weak {
        Classification::Weak
    } else {
        Classification::None
    }
}

pub fn classify_rule(
    wtg: &WeightedTypeGraph,
    rule: &Rule,
    closure: Option<&Morphism>,
) -> Result<Classification, WtgError> {
    let table = compare_rule(wtg, rule)?;
    let ctk = match closure {
        Some(c) => Some(compose(c, &rule.l).map_err(|_| WtgError::Shape)?),
        None => None,
    };
    Ok(classify_from_table(wtg.kind(), &table, ctk.as_ref()))
}

/// Morphisms `1 → T` from the terminal instance.
pub fn flower_points(t: &Arc<Graph>) -> Vec<Morphism> {
    let sig = t.sig();
    let one = Arc::new(complete_type_graph(sig, &vec![1; sig.len()]));
    enumerate_homs(&one, t, None, false)
}

fn saturated_over(t: &Graph, base: &[Vec<bool>]) -> bool {
    let sig = t.sig();
    let mut reach: Vec<Vec<bool>> = (0..sig.len()).map(|s| vec![false; t.count(s)]).collect();
    for &s in sig.topo_order() {
        if sig.is_base(s) {
            reach[s] = base[s].clone();
            continue;
        }
        let targets = sig.obj(s).args.clone();
        let sets: Vec<Vec<usize>> =
            targets.iter().map(|&ts| (0..t.count(ts)).filter(|&i| reach[ts][i]).collect()).collect();
        let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
        let mut ok = true;
        for l in sig.label_choices(s) {
            crate::graph::for_each_tuple(&sizes, &mut |ix| {
                let args: Vec<usize> = ix.iter().zip(&sets).map(|(&i, set)| set[i]).collect();
                if t.find(s, l, &args).is_none() {
                    ok = false;
                }
            });
        }
        if !ok {
            return false;
        }
        for (i, e) in t.elems(s).iter().enumerate() {
            reach[s][i] = e.args.iter().zip(&targets).all(|(&a, &ts)| reach[ts][a]);
        }
    }
    true
}

/// Sufficient check that `c` is a context closure for the rule.
pub fn verify_context_closure(c: &Morphism, rule: &Rule, fw: Framework) -> bool {
    if *c.dom != **rule.lhs() || c.check().is_err() {
        return false;
    }
    let t = &c.cod;
    let sig = t.sig().clone();
    let flowers = flower_points(t);
    match fw.match_class {
        MatchClass::Unrestricted => flowers.iter().any(|p| {
            // c factors as p ∘ ! : L → 1 → T
            (0..sig.len()).all(|s| {
                // the terminal instance has one element per label of each sort
                c.map[s].iter().zip(rule.lhs().elems(s)).all(|(&y, e)| p.map[s][e.label.unwrap_or(0)] == y)
            })
        }),
        _ => flowers.iter().any(|p| {
            let mut base: Vec<Vec<bool>> = (0..sig.len()).map(|s| vec![false; t.count(s)]).collect();
            for s in 0..sig.len() {
                if sig.is_base(s) {
                    for &y in c.map[s].iter().chain(p.map[s].iter()) {
                        base[s][y] = true;
                    }
                }
            }
            saturated_over(t, &base)
        }),
    }
}

pub fn monic_on_interface(c: &Morphism, rule: &Rule) -> bool {
    compose(c, &rule.l).map(|m| m.is_monic()).unwrap_or(false)
}

/// `δ`: `α : A → B`, `β : A → C`, `β' : B → D`, `α' : C → D`.
#[derive(Debug, Clone)]
pub struct OrientedSquare {
    pub alpha: Morphism,
    pub beta: Morphism,
    pub beta_p: Morphism,
    pub alpha_p: Morphism,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub weight: Weight,
    pub k: Weight,
    pub exact: bool,
    pub upper: bool,
}

pub fn verify_decomposition(
    wtg: &WeightedTypeGraph,
    sq: &OrientedSquare,
    phi: &Morphism,
) -> Result<Decomposition, WtgError> {
    if *sq.alpha.dom != *sq.beta.dom
        || *sq.alpha.cod != *sq.beta_p.dom
        || *sq.beta.cod != *sq.alpha_p.dom
        || *sq.beta_p.cod != *sq.alpha_p.cod
        || *phi.dom != *sq.beta_p.cod
    {
        return Err(WtgError::Shape);
    }
    let k = wtg.kind();
    let weight = weight_of_morphism_fast(wtg, phi)?;
    let left = weight_of_morphism(wtg, &compose(phi, &sq.beta_p).map_err(|_| WtgError::Shape)?)?;
    let right = weight_of_morphism_excluding(wtg, &compose(phi, &sq.alpha_p).map_err(|_| WtgError::Shape)?, &sq.beta)?;
    let kv = k.mul(&left, &right)?;
    let ord = k.cmp(&weight, &kv)?;
    Ok(Decomposition { exact: ord == Ordering::Equal, upper: ord != Ordering::Greater, weight, k: kv })
}
