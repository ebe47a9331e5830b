//! Finite instances of a signature.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::signature::{LabelId, Signature, SortId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementRef {
    pub sort: SortId,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem {
    pub args: Vec<usize>,
    pub label: Option<LabelId>,
}

#[derive(Debug, Clone)]
pub struct Graph {
    sig: Arc<Signature>,
    elems: Vec<Vec<Elem>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Graph) -> bool {
        (Arc::ptr_eq(&self.sig, &other.sig) || *self.sig == *other.sig) && self.elems == other.elems
    }
}
impl Eq for Graph {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("element {sort}.{id}: argument {pos} points to missing element {target}")]
    Dangling { sort: String, id: usize, pos: usize, target: usize },
    #[error("element {sort}.{id}: expected {expected} arguments, found {found}")]
    Arity { sort: String, id: usize, expected: usize, found: usize },
    #[error("element {sort}.{id}: missing label")]
    MissingLabel { sort: String, id: usize },
    #[error("element {sort}.{id}: label not allowed or unknown")]
    BadLabel { sort: String, id: usize },
    #[error("simple sort {sort}: elements {a} and {b} share arguments and label")]
    Simplicity { sort: String, a: usize, b: usize },
}

impl Graph {
    pub fn empty(sig: Arc<Signature>) -> Graph {
        let n = sig.len();
        Graph { sig, elems: vec![Vec::new(); n] }
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    /// Appends an element without validation and returns its id.
    pub fn push(&mut self, sort: SortId, args: Vec<usize>, label: Option<LabelId>) -> usize {
        self.elems[sort].push(Elem { args, label });
        self.elems[sort].len() - 1
    }

    pub fn count(&self, s: SortId) -> usize {
        self.elems[s].len()
    }

    pub fn elems(&self, s: SortId) -> &[Elem] {
        &self.elems[s]
    }

    pub fn elem(&self, r: ElementRef) -> &Elem {
        &self.elems[r.sort][r.id]
    }

    pub fn total(&self) -> usize {
        self.elems.iter().map(Vec::len).sum()
    }

    pub fn base_total(&self) -> usize {
        (0..self.sig.len()).filter(|&s| self.sig.is_base(s)).map(|s| self.count(s)).sum()
    }

    pub fn refs(&self) -> impl Iterator<Item = ElementRef> + '_ {
        (0..self.sig.len()).flat_map(move |s| (0..self.count(s)).map(move |id| ElementRef { sort: s, id }))
    }

    pub fn elem_name(&self, r: ElementRef) -> String {
        format!("{}.{}", self.sig.obj(r.sort).name, r.id)
    }

    /// Position of an element with the given label and argument tuple.
    pub fn find(&self, s: SortId, label: Option<LabelId>, args: &[usize]) -> Option<usize> {
        self.elems[s].iter().position(|e| e.label == label && e.args == args)
    }

    pub fn validate(&self) -> Result<(), Vec<GraphError>> {
        let mut errs = Vec::new();
        for s in 0..self.sig.len() {
            let o = self.sig.obj(s);
            for (id, e) in self.elems[s].iter().enumerate() {
                let sort = o.name.clone();
                if e.args.len() != o.args.len() {
                    errs.push(GraphError::Arity { sort, id, expected: o.args.len(), found: e.args.len() });
                    continue;
                }
                for (pos, (&t, &ts)) in e.args.iter().zip(&o.args).enumerate() {
                    if t >= self.elems[ts].len() {
                        errs.push(GraphError::Dangling { sort: sort.clone(), id, pos, target: t });
                    }
                }
                match e.label {
                    None if !o.labels.is_empty() => errs.push(GraphError::MissingLabel { sort, id }),
                    Some(l) if l >= o.labels.len() => errs.push(GraphError::BadLabel { sort, id }),
                    _ => {}
                }
            }
            if o.simple {
                for a in 0..self.elems[s].len() {
                    for b in a + 1..self.elems[s].len() {
                        if self.elems[s][a] == self.elems[s][b] {
                            errs.push(GraphError::Simplicity { sort: o.name.clone(), a, b });
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Exact canonical form: the least encoding over all sort- and
    /// label-respecting relabellings.
    pub fn canonical_key(&self) -> Vec<u8> {
        let order = self.sig.topo_order().to_vec();
        let mut best: Option<Vec<u32>> = None;
        let mut perms: Vec<Vec<usize>> = vec![Vec::new(); self.sig.len()];
        let mut prefix = Vec::new();
        self.canon_rec(&order, 0, &mut perms, &mut prefix, &mut best);
        best.unwrap_or_default().iter().flat_map(|v| v.to_be_bytes()).collect()
    }

    // perms[s][old] = new id
    fn canon_rec(
        &self,
        order: &[SortId],
        k: usize,
        perms: &mut Vec<Vec<usize>>,
        prefix: &mut Vec<u32>,
        best: &mut Option<Vec<u32>>,
    ) {
        if let Some(b) = best {
            let n = prefix.len().min(b.len());
            if prefix[..n] > b[..n] {
                return;
            }
        }
        if k == order.len() {
            if best.as_ref().is_none_or(|b| *prefix < *b) {
                *best = Some(prefix.clone());
            }
            return;
        }
        let s = order[k];
        let o = self.sig.obj(s);
        // key of each element under the current relabelling of earlier sorts
        let keyed: Vec<(u32, Vec<u32>)> = self.elems[s]
            .iter()
            .map(|e| {
                let l = e.label.map(|l| l as u32 + 1).unwrap_or(0);
                let a = e.args.iter().zip(&o.args).map(|(&x, &ts)| perms[ts][x] as u32).collect();
                (l, a)
            })
            .collect();
        let mut idx: Vec<usize> = (0..keyed.len()).collect();
        idx.sort_by(|&a, &b| keyed[a].cmp(&keyed[b]));
        // encoding is independent of tie order; ties only matter for later sorts
        let mark = prefix.len();
        prefix.push(keyed.len() as u32);
        for &i in &idx {
            prefix.push(keyed[i].0);
            prefix.extend_from_slice(&keyed[i].1);
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &i in &idx {
            match groups.last_mut() {
                Some(g) if keyed[g[0]] == keyed[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let referenced = order[k + 1..].iter().any(|&t| self.sig.obj(t).args.contains(&s));
        let mut choice: Vec<Vec<usize>> = groups.clone();
        let mut done = false;
        while !done {
            let mut p = vec![0; keyed.len()];
            let mut next = 0;
            for g in &choice {
                for &i in g {
                    p[i] = next;
                    next += 1;
                }
            }
            perms[s] = p;
            self.canon_rec(order, k + 1, perms, prefix, best);
            if !referenced {
                break;
            }
            // advance to next combination of within-group permutations
            done = true;
            for g in choice.iter_mut() {
                if next_permutation(g) {
                    done = false;
                    break;
                }
            }
        }
        prefix.truncate(mark);
    }

    pub fn is_isomorphic(&self, other: &Graph) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

/// Lexicographic successor; resets to sorted order and returns false at the end.
pub fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.sort_unstable();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.refs() {
            let o = self.sig.obj(r.sort);
            let e = self.elem(r);
            write!(f, "{} {}", o.name, self.elem_name(r))?;
            if let Some(l) = e.label {
                write!(f, " {}", o.labels[l])?;
            }
            if !e.args.is_empty() {
                let a: Vec<String> = e
                    .args
                    .iter()
                    .zip(&o.args)
                    .map(|(&x, &t)| self.elem_name(ElementRef { sort: t, id: x }))
                    .collect();
                write!(f, " ({})", a.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// The saturated graph with `counts[s]` base elements per label of every base
/// sort `s` and exactly one element per label and argument tuple elsewhere.
pub fn complete_type_graph(sig: &Arc<Signature>, counts: &[usize]) -> Graph {
    let mut g = Graph::empty(sig.clone());
    for &s in sig.topo_order() {
        if sig.is_base(s) {
            for l in sig.label_choices(s) {
                for _ in 0..counts[s] {
                    g.push(s, Vec::new(), l);
                }
            }
        } else {
            let targets = sig.obj(s).args.clone();
            let sizes: Vec<usize> = targets.iter().map(|&t| g.count(t)).collect();
            let mut tuples = Vec::new();
            for_each_tuple(&sizes, &mut |t| tuples.push(t.to_vec()));
            for l in sig.label_choices(s) {
                for t in &tuples {
                    g.push(s, t.clone(), l);
                }
            }
        }
    }
    g
}

/// Calls `f` on every tuple in the product of `0..sizes[i]`, lexicographically.
pub fn for_each_tuple(sizes: &[usize], f: &mut dyn FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut t = vec![0; sizes.len()];
    loop {
        f(&t);
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < sizes[i] {
                break;
            }
            t[i] = 0;
        }
    }
}

/// A free graph on one generator, usable as domain of a weighted element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub sort: SortId,
    pub label: Option<LabelId>,
    pub graph: Arc<Graph>,
    pub generator: usize,
}

impl Shape {
    pub fn name(&self, sig: &Signature) -> String {
        let o = sig.obj(self.sort);
        match self.label {
            Some(l) => format!("{}[{}]", o.name, o.labels[l]),
            None => o.name.clone(),
        }
    }
}

pub fn representable_shape(sig: &Arc<Signature>, sort: SortId, label: Option<LabelId>) -> Shape {
    fn build(g: &mut Graph, s: SortId, label: Option<LabelId>) -> usize {
        let targets = g.sig().obj(s).args.clone();
        let args: Vec<usize> = targets.iter().map(|&t| build(g, t, None)).collect();
        g.push(s, args, label)
    }
    let mut g = Graph::empty(sig.clone());
    let generator = build(&mut g, sort, label);
    Shape { sort, label, graph: Arc::new(g), generator }
}

pub fn representable_shapes(sig: &Arc<Signature>) -> Vec<Shape> {
    let mut out = Vec::new();
    for s in 0..sig.len() {
        for l in sig.label_choices(s) {
            out.push(representable_shape(sig, s, l));
        }
    }
    out
}
