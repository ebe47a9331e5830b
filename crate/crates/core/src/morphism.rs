//! Homomorphisms between instances: enumeration, composition, factorization.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{ElementRef, Graph};
use crate::signature::{LabelId, SortId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Morphism {
    pub dom: Arc<Graph>,
    pub cod: Arc<Graph>,
    pub map: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("map for sort {sort} has {found} entries, domain has {expected}")]
    Size { sort: String, expected: usize, found: usize },
    #[error("{elem} is sent to a missing element")]
    OutOfRange { elem: String },
    #[error("{elem} is sent to an element with a different label")]
    Label { elem: String },
    #[error("{elem}: argument {pos} does not commute")]
    Commute { elem: String, pos: usize },
    #[error("domain and codomain do not match")]
    Mismatch,
}

/// Partial assignment used to constrain enumeration.
pub type PartialMap = Vec<Vec<Option<usize>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monicity {
    pub monic: bool,
    pub regular_monic: bool,
}

impl Morphism {
    pub fn new(dom: Arc<Graph>, cod: Arc<Graph>, map: Vec<Vec<usize>>) -> Result<Morphism, MorphismError> {
        let m = Morphism { dom, cod, map };
        m.check()?;
        Ok(m)
    }

    pub fn identity(g: &Arc<Graph>) -> Morphism {
        let map = (0..g.sig().len()).map(|s| (0..g.count(s)).collect()).collect();
        Morphism { dom: g.clone(), cod: g.clone(), map }
    }

    pub fn check(&self) -> Result<(), MorphismError> {
        let sig = self.dom.sig();
        if self.map.len() != sig.len() {
            return Err(MorphismError::Mismatch);
        }
        for s in 0..sig.len() {
            if self.map[s].len() != self.dom.count(s) {
                return Err(MorphismError::Size {
                    sort: sig.obj(s).name.clone(),
                    expected: self.dom.count(s),
                    found: self.map[s].len(),
                });
            }
            for (x, &y) in self.map[s].iter().enumerate() {
                let elem = self.dom.elem_name(ElementRef { sort: s, id: x });
                if y >= self.cod.count(s) {
                    return Err(MorphismError::OutOfRange { elem });
                }
                let ex = &self.dom.elems(s)[x];
                let ey = &self.cod.elems(s)[y];
                if ex.label != ey.label {
                    return Err(MorphismError::Label { elem });
                }
                for (pos, (&a, &t)) in ex.args.iter().zip(&sig.obj(s).args).enumerate() {
                    if self.map[t][a] != ey.args[pos] {
                        return Err(MorphismError::Commute { elem, pos });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, r: ElementRef) -> usize {
        self.map[r.sort][r.id]
    }

    pub fn is_monic(&self) -> bool {
        self.map.iter().all(|m| {
            let mut seen = m.clone();
            seen.sort_unstable();
            seen.windows(2).all(|w| w[0] != w[1])
        })
    }

    pub fn is_iso(&self) -> bool {
        self.is_monic() && (0..self.map.len()).all(|s| self.map[s].len() == self.cod.count(s))
    }

    /// Image elements per sort (boolean mask over the codomain).
    pub fn image_mask(&self) -> Vec<Vec<bool>> {
        let mut m: Vec<Vec<bool>> = (0..self.map.len()).map(|s| vec![false; self.cod.count(s)]).collect();
        for (s, v) in self.map.iter().enumerate() {
            for &y in v {
                m[s][y] = true;
            }
        }
        m
    }

    pub fn to_partial(&self) -> PartialMap {
        self.map.iter().map(|v| v.iter().map(|&y| Some(y)).collect()).collect()
    }
}

/// `f ∘ g`.
pub fn compose(f: &Morphism, g: &Morphism) -> Result<Morphism, MorphismError> {
    if *g.cod != *f.dom {
        return Err(MorphismError::Mismatch);
    }
    let map = g.map.iter().enumerate().map(|(s, v)| v.iter().map(|&y| f.map[s][y]).collect()).collect();
    Ok(Morphism { dom: g.dom.clone(), cod: f.cod.clone(), map })
}

pub fn classify_monicity(f: &Morphism) -> Monicity {
    let monic = f.is_monic();
    if !monic {
        return Monicity { monic, regular_monic: false };
    }
    let sig = f.dom.sig();
    let mask = f.image_mask();
    let mut regular = true;
    for s in 0..sig.len() {
        if !sig.obj(s).simple {
            continue;
        }
        let targets = &sig.obj(s).args;
        for (y, e) in f.cod.elems(s).iter().enumerate() {
            if !mask[s][y] && e.args.iter().zip(targets).all(|(&a, &t)| mask[t][a]) {
                regular = false;
            }
        }
    }
    Monicity { monic, regular_monic: regular }
}

struct Index {
    // (sort, label, args) -> codomain ids
    by_args: HashMap<(SortId, Option<LabelId>, Vec<usize>), Vec<usize>>,
}

impl Index {
    fn new(h: &Graph) -> Index {
        let mut by_args: HashMap<_, Vec<usize>> = HashMap::new();
        for s in 0..h.sig().len() {
            for (i, e) in h.elems(s).iter().enumerate() {
                by_args.entry((s, e.label, e.args.clone())).or_default().push(i);
            }
        }
        Index { by_args }
    }
}

/// Backtracking enumeration of homomorphisms `g → h`. Elements of `g` are
/// visited in topological sort order, so every argument image is fixed before
/// an element is placed. `allowed(sort, x, y)` filters candidates; the visitor
/// returns `false` to stop.
pub fn for_each_hom(
    g: &Graph,
    h: &Graph,
    mono: bool,
    allowed: &dyn Fn(SortId, usize, usize) -> bool,
    visit: &mut dyn FnMut(&[Vec<usize>]) -> bool,
) {
    let sig = g.sig();
    let order: Vec<ElementRef> = sig
        .topo_order()
        .iter()
        .flat_map(|&s| (0..g.count(s)).map(move |id| ElementRef { sort: s, id }))
        .collect();
    let index = Index::new(h);
    let mut map: Vec<Vec<usize>> = (0..sig.len()).map(|s| vec![usize::MAX; g.count(s)]).collect();
    let mut used: Vec<Vec<bool>> = (0..sig.len()).map(|s| vec![false; h.count(s)]).collect();
    let empty = Vec::new();
    struct Ctx<'a> {
        g: &'a Graph,
        order: &'a [ElementRef],
        index: &'a Index,
        mono: bool,
        allowed: &'a dyn Fn(SortId, usize, usize) -> bool,
        empty: &'a Vec<usize>,
    }
    fn rec(
        c: &Ctx,
        k: usize,
        map: &mut Vec<Vec<usize>>,
        used: &mut Vec<Vec<bool>>,
        visit: &mut dyn FnMut(&[Vec<usize>]) -> bool,
    ) -> bool {
        if k == c.order.len() {
            return visit(map);
        }
        let r = c.order[k];
        let e = c.g.elem(r);
        let targets = &c.g.sig().obj(r.sort).args;
        let args: Vec<usize> = e.args.iter().zip(targets).map(|(&a, &t)| map[t][a]).collect();
        let cands = c.index.by_args.get(&(r.sort, e.label, args)).unwrap_or(c.empty);
        for &y in cands {
            if c.mono && used[r.sort][y] {
                continue;
            }
            if !(c.allowed)(r.sort, r.id, y) {
                continue;
            }
            map[r.sort][r.id] = y;
            used[r.sort][y] = true;
            let go = rec(c, k + 1, map, used, visit);
            used[r.sort][y] = false;
            if !go {
                return false;
            }
        }
        true
    }
    let ctx = Ctx { g, order: &order, index: &index, mono, allowed, empty: &empty };
    rec(&ctx, 0, &mut map, &mut used, visit);
}

pub fn enumerate_homs(g: &Arc<Graph>, h: &Arc<Graph>, constraint: Option<&PartialMap>, mono_only: bool) -> Vec<Morphism> {
    let mut out = Vec::new();
    let allowed = |s: SortId, x: usize, y: usize| constraint.is_none_or(|c| c[s][x].is_none_or(|v| v == y));
    for_each_hom(g, h, mono_only, &allowed, &mut |m| {
        out.push(Morphism { dom: g.clone(), cod: h.clone(), map: m.to_vec() });
        true
    });
    out
}

pub fn count_homs(g: &Graph, h: &Graph, constraint: Option<&PartialMap>, mono_only: bool) -> usize {
    let mut n = 0;
    let allowed = |s: SortId, x: usize, y: usize| constraint.is_none_or(|c| c[s][x].is_none_or(|v| v == y));
    for_each_hom(g, h, mono_only, &allowed, &mut |_| {
        n += 1;
        true
    });
    n
}

/// All `ζ` with `u ∘ ζ = x`.
pub fn factor_through(x: &Morphism, u: &Morphism) -> Result<Vec<Morphism>, MorphismError> {
    if *x.cod != *u.cod {
        return Err(MorphismError::Mismatch);
    }
    let mut out = Vec::new();
    let allowed = |s: SortId, a: usize, b: usize| u.map[s][b] == x.map[s][a];
    for_each_hom(&x.dom, &u.dom, false, &allowed, &mut |m| {
        out.push(Morphism { dom: x.dom.clone(), cod: u.dom.clone(), map: m.to_vec() });
        true
    });
    Ok(out)
}

pub fn factors(x: &Morphism, u: &Morphism) -> bool {
    let mut found = false;
    let allowed = |s: SortId, a: usize, b: usize| u.map[s][b] == x.map[s][a];
    for_each_hom(&x.dom, &u.dom, false, &allowed, &mut |_| {
        found = true;
        false
    });
    found
}

/// `#{α : dom(e) → dom(φ) | φ ∘ α = e}`.
pub fn count_triangles(e: &Morphism, phi: &Morphism) -> Result<usize, MorphismError> {
    if *e.cod != *phi.cod {
        return Err(MorphismError::Mismatch);
    }
    let mut n = 0;
    let allowed = |s: SortId, a: usize, b: usize| phi.map[s][b] == e.map[s][a];
    for_each_hom(&e.dom, &phi.dom, false, &allowed, &mut |_| {
        n += 1;
        true
    });
    Ok(n)
}

/// Whether `f ∘ g = f ∘ h ⇒ g = h` for all `g, h : X → dom f`, ignoring those
/// that factor through `outside_of` when given.
pub fn is_x_monic(f: &Morphism, x: &Arc<Graph>, outside_of: Option<&Morphism>) -> bool {
    let mut seen: HashMap<Vec<Vec<usize>>, usize> = HashMap::new();
    let homs = enumerate_homs(x, &f.dom, None, false);
    for g in homs {
        if let Some(u) = outside_of {
            if factors(&g, u) {
                continue;
            }
        }
        let fg = compose(f, &g).expect("composable");
        let c = seen.entry(fg.map).or_insert(0);
        *c += 1;
        if *c > 1 {
            return false;
        }
    }
    true
}
