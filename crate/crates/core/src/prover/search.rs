//! Exhaustive weight search over sub-graphs of complete type graphs.
//!
//! Every element of the complete type graph of a given size is a variable.
//! Base elements are always present; other elements may be absent, which is
//! encoded as the semiring zero. Each `(rule, t_K)` pair yields the pair of
//! polynomials `w(t_K, l)` and `w(t_K, r)`, monotone in every variable.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::dpo::{Framework, MatchClass, Rule};
use crate::graph::{complete_type_graph, ElementRef, Graph, Shape};
use crate::morphism::{compose, enumerate_homs, Morphism, PartialMap};
use crate::semiring::{SemiringKind, Weight};
use crate::wtg::{
    classify_from_table, compare_rule, flower_points, verify_context_closure, Classification,
    WeightedTypeGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SearchBudget {
    pub size: usize,
    pub bits: u32,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleResult {
    pub name: String,
    pub class: Classification,
    pub closure: Option<Morphism>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub wtg: WeightedTypeGraph,
    pub rules: Vec<RuleResult>,
    pub removable: Vec<String>,
    /// Base size and bit width at which the assignment was found.
    pub size: usize,
    pub bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Box<Solution>),
    Exhausted,
    Timeout,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("budget too large: weights may exceed 128 bits")]
    Overflow,
    #[error("budget must have size >= 1 and 1 <= bits <= 16")]
    Budget,
    #[error("too many base elements for the closure encoding")]
    TooLarge,
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

/// Cooperative cancellation: cancelled when any flag in the chain is set.
#[derive(Debug, Clone, Default)]
pub struct Cancel(Vec<Arc<AtomicBool>>);

impl Cancel {
    pub fn child(&self) -> (Cancel, Arc<AtomicBool>) {
        let f = Arc::new(AtomicBool::new(false));
        let mut v = self.0.clone();
        v.push(f.clone());
        (Cancel(v), f)
    }
    pub fn is_cancelled(&self) -> bool {
        self.0.iter().any(|f| f.load(AtomicOrdering::Relaxed))
    }
}

/// Node budget for each attempt at removing more rules than a solution
/// already found.
pub const IMPROVE_NODES: u64 = 200_000;

pub(crate) trait Alg {
    const ZERO: u128;
    const ONE: u128;
    fn add(a: u128, b: u128) -> u128;
    fn mul(a: u128, b: u128) -> u128;
    fn pow(a: u128, e: u32) -> u128;
    fn times(a: u128, c: u32) -> u128;
    fn encode(w: u64) -> u128;
    fn decode(v: u128) -> Weight;
}

pub(crate) struct Arith;
pub(crate) struct Trop;
pub(crate) struct Arctic;

impl Alg for Arith {
    const ZERO: u128 = 0;
    const ONE: u128 = 1;
    fn add(a: u128, b: u128) -> u128 {
        a + b
    }
    fn mul(a: u128, b: u128) -> u128 {
        a * b
    }
    fn pow(a: u128, e: u32) -> u128 {
        a.pow(e)
    }
    fn times(a: u128, c: u32) -> u128 {
        a * c as u128
    }
    fn encode(w: u64) -> u128 {
        w as u128
    }
    fn decode(v: u128) -> Weight {
        Weight::Fin(v.into())
    }
}

impl Alg for Trop {
    const ZERO: u128 = u128::MAX;
    const ONE: u128 = 0;
    fn add(a: u128, b: u128) -> u128 {
        a.min(b)
    }
    fn mul(a: u128, b: u128) -> u128 {
        if a == u128::MAX || b == u128::MAX {
            u128::MAX
        } else {
            a + b
        }
    }
    fn pow(a: u128, e: u32) -> u128 {
        if a == u128::MAX && e > 0 {
            u128::MAX
        } else {
            a * e as u128
        }
    }
    fn times(a: u128, _c: u32) -> u128 {
        a
    }
    fn encode(w: u64) -> u128 {
        w as u128
    }
    fn decode(v: u128) -> Weight {
        if v == u128::MAX {
            Weight::PosInf
        } else {
            Weight::Fin(v.into())
        }
    }
}

// arctic values are shifted by one so that -inf is 0 and the order is numeric
impl Alg for Arctic {
    const ZERO: u128 = 0;
    const ONE: u128 = 1;
    fn add(a: u128, b: u128) -> u128 {
        a.max(b)
    }
    fn mul(a: u128, b: u128) -> u128 {
        if a == 0 || b == 0 {
            0
        } else {
            a + b - 1
        }
    }
    fn pow(a: u128, e: u32) -> u128 {
        if e == 0 {
            1
        } else if a == 0 {
            0
        } else {
            (a - 1) * e as u128 + 1
        }
    }
    fn times(a: u128, _c: u32) -> u128 {
        a
    }
    fn encode(w: u64) -> u128 {
        w as u128 + 1
    }
    fn decode(v: u128) -> Weight {
        if v == 0 {
            Weight::NegInf
        } else {
            Weight::Fin((v - 1).into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Term {
    pub coef: u32,
    pub factors: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Poly {
    pub terms: Vec<Term>,
}

impl Poly {
    fn eval<A: Alg>(&self, vals: &[u128]) -> u128 {
        let mut acc = A::ZERO;
        for t in &self.terms {
            let mut m = A::ONE;
            for &(v, e) in &t.factors {
                m = A::mul(m, A::pow(vals[v], e));
                if m == A::ZERO {
                    break;
                }
            }
            acc = A::add(acc, A::times(m, t.coef));
        }
        acc
    }

    fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().flat_map(|t| t.factors.iter().map(|f| f.0))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub rule: usize,
    pub left: Poly,
    pub right: Poly,
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct ClosureCand {
    pub map: Vec<Vec<usize>>,
    pub constraint: usize,
    pub hit: Vec<usize>,
    pub base_mask: u64,
    pub monic_on_k: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Flower {
    pub hit: Vec<usize>,
    pub base_mask: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct VarInfo {
    pub elem: ElementRef,
    pub base: bool,
    pub weighted: bool,
    pub in_constraints: bool,
    pub args: Vec<usize>,
    pub base_bit: Option<u32>,
    pub support: u64,
}

/// The constraint system for one base size.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub t: Arc<Graph>,
    pub fw: Framework,
    pub vars: Vec<VarInfo>,
    pub offset: Vec<usize>,
    pub constraints: Vec<Constraint>,
    pub rule_constraints: Vec<Vec<usize>>,
    pub closures: Vec<Vec<ClosureCand>>,
    pub flowers: Vec<Flower>,
    pub strict_candidate: Vec<bool>,
}

/// Whether some epimorphism `e : R ↠ L` satisfies `e ∘ r = l`.
pub fn has_collapsing_epi(rule: &Rule) -> bool {
    let (l, r) = (&rule.l, &rule.r);
    let mut constraint: PartialMap = (0..r.cod.sig().len()).map(|s| vec![None; r.cod.count(s)]).collect();
    for s in 0..r.map.len() {
        for (k, &y) in r.map[s].iter().enumerate() {
            match constraint[s][y] {
                Some(v) if v != l.map[s][k] => return false,
                _ => constraint[s][y] = Some(l.map[s][k]),
            }
        }
    }
    enumerate_homs(rule.rhs(), rule.lhs(), Some(&constraint), false)
        .iter()
        .any(|e| e.image_mask().iter().all(|v| v.iter().all(|&b| b)))
}

fn monomial(p: &Problem, phi: &[Vec<usize>], constant: &[bool]) -> Vec<(usize, u32)> {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for (s, v) in phi.iter().enumerate() {
        for &y in v {
            let var = p.offset[s] + y;
            if !constant[var] {
                *counts.entry(var).or_insert(0) += 1;
            }
        }
    }
    let mut f: Vec<(usize, u32)> = counts.into_iter().collect();
    f.sort_unstable();
    f
}

fn side_poly(p: &Problem, side: &Morphism, tk: &Morphism, constant: &[bool]) -> Poly {
    let y = &side.cod;
    let mut constraint: PartialMap = (0..y.sig().len()).map(|s| vec![None; y.count(s)]).collect();
    for (s, v) in side.map.iter().enumerate() {
        for (x, &img) in v.iter().enumerate() {
            match constraint[s][img] {
                Some(prev) if prev != tk.map[s][x] => return Poly { terms: Vec::new() },
                _ => constraint[s][img] = Some(tk.map[s][x]),
            }
        }
    }
    let mut terms: Vec<Term> = Vec::new();
    let mut index: HashMap<Vec<(usize, u32)>, usize> = HashMap::new();
    for ty in enumerate_homs(y, &p.t, Some(&constraint), false) {
        let m = monomial(p, &ty.map, constant);
        match index.get(&m) {
            Some(&i) => terms[i].coef += 1,
            None => {
                index.insert(m.clone(), terms.len());
                terms.push(Term { coef: 1, factors: m });
            }
        }
    }
    Poly { terms }
}

pub(crate) fn compile(
    rules: &[Rule],
    fw: Framework,
    kind: SemiringKind,
    size: usize,
    domains: &[Shape],
    targets: &[bool],
) -> Result<Problem, SearchError> {
    let sig = rules.first().map(|r| r.lhs().sig().clone()).ok_or(SearchError::Budget)?;
    let t = Arc::new(complete_type_graph(&sig, &vec![size; sig.len()]));
    let mut offset = Vec::new();
    let mut vars = Vec::new();
    let mut next_bit = 0u32;
    for s in 0..sig.len() {
        offset.push(vars.len());
        for id in 0..t.count(s) {
            let e = t.elem(ElementRef { sort: s, id });
            let admissible = domains.iter().any(|d| d.sort == s && d.label == e.label);
            let base = sig.is_base(s);
            let base_bit = if base {
                next_bit += 1;
                Some(next_bit - 1)
            } else {
                None
            };
            vars.push(VarInfo {
                elem: ElementRef { sort: s, id },
                base,
                weighted: admissible,
                in_constraints: false,
                args: Vec::new(),
                base_bit,
                support: 0,
            });
        }
    }
    if next_bit > 64 {
        return Err(SearchError::TooLarge);
    }
    for v in 0..vars.len() {
        let r = vars[v].elem;
        let targets = sig.obj(r.sort).args.clone();
        vars[v].args = t.elem(r).args.iter().zip(&targets).map(|(&a, &ts)| offset[ts] + a).collect();
    }
    for &s in sig.topo_order() {
        for id in 0..t.count(s) {
            let v = offset[s] + id;
            vars[v].support = match vars[v].base_bit {
                Some(b) => 1u64 << b,
                None => vars[v].args.iter().fold(0, |m, &a| m | vars[a].support),
            };
        }
    }
    let constant: Vec<bool> = vars.iter().map(|v| v.base && !v.weighted).collect();
    let mut p = Problem {
        t: t.clone(),
        fw,
        vars,
        offset,
        constraints: Vec::new(),
        rule_constraints: vec![Vec::new(); rules.len()],
        closures: vec![Vec::new(); rules.len()],
        flowers: Vec::new(),
        strict_candidate: rules
            .iter()
            .zip(targets)
            .map(|(r, &t)| t && !(kind == SemiringKind::Arithmetic && has_collapsing_epi(r)))
            .collect(),
    };
    let mut tk_index: Vec<HashMap<Vec<Vec<usize>>, usize>> = vec![HashMap::new(); rules.len()];
    for (ri, rule) in rules.iter().enumerate() {
        for tk in enumerate_homs(rule.interface(), &t, None, false) {
            let left = side_poly(&p, &rule.l, &tk, &constant);
            let right = side_poly(&p, &rule.r, &tk, &constant);
            let mut vs: Vec<usize> = left.vars().chain(right.vars()).collect();
            vs.sort_unstable();
            vs.dedup();
            let id = p.constraints.len();
            tk_index[ri].insert(tk.map.clone(), id);
            p.rule_constraints[ri].push(id);
            p.constraints.push(Constraint { rule: ri, left, right, vars: vs });
        }
    }
    for c in &p.constraints {
        for &v in &c.vars {
            p.vars[v].in_constraints = true;
        }
    }
    for v in p.vars.iter_mut() {
        // a weight on an element that occurs nowhere changes nothing
        v.weighted &= v.in_constraints;
    }
    let mask_of = |p: &Problem, map: &[Vec<usize>]| -> (Vec<usize>, u64) {
        let mut hit = Vec::new();
        let mut mask = 0u64;
        for (s, v) in map.iter().enumerate() {
            for &y in v {
                let var = p.offset[s] + y;
                hit.push(var);
                if let Some(b) = p.vars[var].base_bit {
                    mask |= 1 << b;
                }
            }
        }
        hit.sort_unstable();
        hit.dedup();
        (hit, mask)
    };
    let flowers = flower_points(&t);
    for f in &flowers {
        let (hit, base_mask) = mask_of(&p, &f.map);
        p.flowers.push(Flower { hit, base_mask });
    }
    for (ri, rule) in rules.iter().enumerate() {
        let cands: Vec<Morphism> = match fw.match_class {
            MatchClass::Unrestricted => flowers
                .iter()
                .map(|f| {
                    let map = (0..sig.len())
                        .map(|s| rule.lhs().elems(s).iter().map(|e| f.map[s][e.label.unwrap_or(0)]).collect())
                        .collect();
                    Morphism { dom: rule.lhs().clone(), cod: t.clone(), map }
                })
                .collect(),
            _ => enumerate_homs(rule.lhs(), &t, None, false),
        };
        let mut list = Vec::new();
        for (fi, c) in cands.into_iter().enumerate() {
            let ctk = compose(&c, &rule.l).expect("composable");
            let constraint = tk_index[ri][&ctk.map];
            let (mut hit, base_mask) = mask_of(&p, &c.map);
            if fw.match_class == MatchClass::Unrestricted {
                hit.extend(p.flowers[fi].hit.iter().copied());
                hit.sort_unstable();
                hit.dedup();
            }
            let monic_on_k = ctk.is_monic();
            list.push(ClosureCand { map: c.map, constraint, hit, base_mask, monic_on_k });
        }
        // stable: monic-on-interface candidates first
        list.sort_by_key(|c| !c.monic_on_k);
        p.closures[ri] = list;
    }
    Ok(p)
}

fn domain_values<A: Alg>(kind: SemiringKind, bits: u32, weighted: bool, absent: bool) -> Vec<u128> {
    let mut v = Vec::new();
    if weighted {
        let (lo, hi) = kind.weight_range(bits);
        v.extend((lo..=hi).map(A::encode));
    } else {
        v.push(A::ONE);
    }
    if absent {
        v.push(A::ZERO);
    }
    v
}

/// Greedy order: arguments first; then the variable completing most
/// constraints, touching most partial ones, occurring most often.
fn variable_order(p: &Problem, branch: &[bool]) -> Vec<usize> {
    let n = p.vars.len();
    let mut occurs = vec![0usize; n];
    let mut of_var: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in p.constraints.iter().enumerate() {
        for &v in &c.vars {
            occurs[v] += 1;
            of_var[v].push(ci);
        }
    }
    let mut remaining: Vec<usize> = p.constraints.iter().map(|c| c.vars.iter().filter(|&&v| branch[v]).count()).collect();
    let total: Vec<usize> = remaining.clone();
    let mut placed = vec![false; n];
    let mut order = Vec::new();
    let todo = branch.iter().filter(|&&b| b).count();
    while order.len() < todo {
        let mut best: Option<(usize, (usize, usize, usize))> = None;
        for v in 0..n {
            if !branch[v] || placed[v] || p.vars[v].args.iter().any(|&a| branch[a] && !placed[a]) {
                continue;
            }
            let completes = of_var[v].iter().filter(|&&c| remaining[c] == 1).count();
            let touches = of_var[v].iter().filter(|&&c| remaining[c] < total[c]).count();
            let score = (completes, touches, occurs[v]);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((v, score));
            }
        }
        let (v, _) = best.expect("argument order is acyclic");
        placed[v] = true;
        for &c in &of_var[v] {
            remaining[c] -= 1;
        }
        order.push(v);
    }
    order
}

struct Dfs<'a, A: Alg> {
    p: &'a Problem,
    kind: SemiringKind,
    order: Vec<usize>,
    domains: Vec<Vec<u128>>,
    lo: Vec<u128>,
    hi: Vec<u128>,
    complete_at: Vec<Vec<usize>>,
    touch_at: Vec<Vec<usize>>,
    // per constraint: strict, both sides zero
    strict: Vec<bool>,
    empty: Vec<bool>,
    bad_uniform: Vec<usize>,
    alive_closure: Vec<usize>,
    closure_users: Vec<Vec<usize>>,
    deadline: Instant,
    cancel: &'a Cancel,
    nodes: u64,
    stop: Option<SearchOutcome>,
    found: Option<(Vec<u128>, usize)>,
    need: usize,
    node_limit: Option<u64>,
    required_cache: HashMap<u64, Vec<usize>>,
    reduced: Vec<Reduced>,
    constraints_of: Vec<Vec<usize>>,
    // domains in numeric order, for bound tightening
    sorted: Vec<Vec<u128>>,
    _alg: std::marker::PhantomData<A>,
}

impl<'a, A: Alg> Dfs<'a, A> {
    fn strict_possible(&self, r: usize) -> bool {
        if !self.p.strict_candidate[r] || self.p.closures[r].is_empty() {
            return false;
        }
        self.bad_uniform[r] == 0 || (self.kind.strictly_monotonic() && self.alive_closure[r] > 0)
    }

    fn any_strict_possible(&self) -> bool {
        (0..self.p.rule_constraints.len()).filter(|&r| self.strict_possible(r)).count() >= self.need
    }

    fn rec(&mut self, k: usize) -> bool {
        self.nodes += 1;
        if self.node_limit.is_some_and(|l| self.nodes > l) {
            self.stop = Some(SearchOutcome::Exhausted);
            return true;
        }
        if self.nodes & 0x3ff == 0 {
            if self.cancel.is_cancelled() {
                self.stop = Some(SearchOutcome::Cancelled);
                return true;
            }
            if Instant::now() >= self.deadline {
                self.stop = Some(SearchOutcome::Timeout);
                return true;
            }
        }
        if k == self.order.len() {
            return self.leaf();
        }
        let v = self.order[k];
        let args_present = self.p.vars[v].args.iter().all(|&a| self.lo[a] != A::ZERO || self.hi[a] != A::ZERO);
        let (old_lo, old_hi) = (self.lo[v], self.hi[v]);
        // once every constraint on v is empty, only its presence matters
        let idle = self.constraints_of[v].iter().all(|&c| self.dead(c));
        let mut tried_weight = false;
        for i in 0..self.domains[v].len() {
            let val = self.domains[v][i];
            if (val != A::ZERO && !args_present) || val < old_lo || val > old_hi {
                continue;
            }
            if idle && val != A::ZERO {
                if tried_weight {
                    continue;
                }
                tried_weight = true;
            }
            self.lo[v] = val;
            self.hi[v] = val;
            let mut undo: Vec<usize> = Vec::new();
            let ok = self.assign_checks(k, &mut undo);
            if ok && self.any_strict_possible() {
                let saved = (self.lo.clone(), self.hi.clone());
                let okp = self.propagate();
                if okp && self.rec(k + 1) {
                    return true;
                }
                (self.lo, self.hi) = saved;
            }
            self.revert(&undo);
        }
        self.lo[v] = old_lo;
        self.hi[v] = old_hi;
        false
    }

    /// Checks constraints completed or touched at position `k`.
    fn assign_checks(&mut self, k: usize, undo: &mut Vec<usize>) -> bool {
        for idx in 0..self.complete_at[k].len() {
            let c = self.complete_at[k][idx];
            let con = &self.p.constraints[c];
            let l = con.left.eval::<A>(&self.lo);
            let r = con.right.eval::<A>(&self.lo);
            if l < r {
                return false;
            }
            let strict = l > r;
            let empty = l == A::ZERO && r == A::ZERO;
            self.strict[c] = strict;
            self.empty[c] = empty;
            undo.push(c);
            if !(strict || empty) {
                self.bad_uniform[con.rule] += 1;
            }
            if !strict {
                for &ri in &self.closure_users[c] {
                    self.alive_closure[ri] -= 1;
                }
            }
        }
        for idx in 0..self.touch_at[k].len() {
            let c = self.touch_at[k][idx];
            let con = &self.p.constraints[c];
            if con.left.eval::<A>(&self.hi) < con.right.eval::<A>(&self.lo) {
                return false;
            }
        }
        true
    }

    fn revert(&mut self, undo: &[usize]) {
        for &c in undo {
            let con = &self.p.constraints[c];
            if !(self.strict[c] || self.empty[c]) {
                self.bad_uniform[con.rule] -= 1;
            }
            if !self.strict[c] {
                for &ri in &self.closure_users[c] {
                    self.alive_closure[ri] += 1;
                }
            }
        }
    }

    fn dead(&self, c: usize) -> bool {
        let con = &self.p.constraints[c];
        [&con.left, &con.right]
            .iter()
            .all(|p| p.eval::<A>(&self.lo) == A::ZERO && p.eval::<A>(&self.hi) == A::ZERO)
    }

    /// Rules that must end up strict: without strict monotonicity these
    /// are uniformly decreasing.
    fn forced_uniform(&self) -> Vec<bool> {
        let nr = self.p.rule_constraints.len();
        if self.kind.strictly_monotonic() {
            return vec![false; nr];
        }
        let possible: Vec<bool> = (0..nr).map(|r| self.strict_possible(r)).collect();
        if possible.iter().filter(|&&b| b).count() > self.need {
            return vec![false; nr];
        }
        possible
    }

    fn feasible(&self, c: usize, forced: &[bool]) -> bool {
        let con = &self.p.constraints[c];
        let (lo, hi) = (&self.lo, &self.hi);
        if con.left.eval::<A>(hi) < con.right.eval::<A>(lo) {
            return false;
        }
        if !forced[con.rule] {
            return true;
        }
        let red = &self.reduced[c];
        if red.guard.iter().any(|&g| lo[g] == A::ZERO || hi[g] == A::ZERO) {
            return true;
        }
        let (l_hi, r_lo) = (red.left.eval::<A>(hi), red.right.eval::<A>(lo));
        if l_hi > r_lo {
            return true;
        }
        let l_zero = l_hi == A::ZERO || red.left.eval::<A>(lo) == A::ZERO;
        let r_zero = r_lo == A::ZERO || red.right.eval::<A>(hi) == A::ZERO;
        l_zero && r_zero
    }

    /// Shrinks the value ranges of unassigned variables to values that keep
    /// every constraint satisfiable, until nothing changes.
    fn propagate(&mut self) -> bool {
        let forced = self.forced_uniform();
        let p = self.p;
        loop {
            let mut changed = false;
            for (c, con) in p.constraints.iter().enumerate() {
                if con.vars.iter().all(|&v| self.lo[v] == self.hi[v]) {
                    continue;
                }
                if !self.feasible(c, &forced) {
                    return false;
                }
                for &v in &con.vars {
                    if self.lo[v] == self.hi[v] {
                        continue;
                    }
                    let (lo, hi) = (self.lo[v], self.hi[v]);
                    let vals: Vec<u128> = self.sorted[v].iter().copied().filter(|&x| lo <= x && x <= hi).collect();
                    let test = |d: &mut Self, x: u128| {
                        d.lo[v] = x;
                        d.hi[v] = x;
                        let ok = d.feasible(c, &forced);
                        d.lo[v] = lo;
                        d.hi[v] = hi;
                        ok
                    };
                    let Some(a) = vals.iter().position(|&x| test(self, x)) else { return false };
                    let b = vals.iter().rposition(|&x| test(self, x)).expect("some value is feasible");
                    if vals[a] != lo || vals[b] != hi {
                        self.lo[v] = vals[a];
                        self.hi[v] = vals[b];
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn required(&mut self, mask: u64) -> Vec<usize> {
        if let Some(r) = self.required_cache.get(&mask) {
            return r.clone();
        }
        let r: Vec<usize> = (0..self.p.vars.len())
            .filter(|&v| !self.p.vars[v].base && self.p.vars[v].support & !mask == 0)
            .collect();
        self.required_cache.insert(mask, r.clone());
        r
    }

    fn present(&self, v: usize) -> bool {
        // fixed variables follow their arguments
        self.lo[v] != A::ZERO && self.p.vars[v].args.iter().all(|&a| self.present(a))
    }

    fn closure_valid(&mut self, c: &ClosureCand) -> bool {
        if !c.hit.iter().all(|&v| self.present(v)) {
            return false;
        }
        if self.p.fw.match_class == MatchClass::Unrestricted {
            return true;
        }
        let p = self.p;
        p.flowers.iter().any(|f| {
            f.hit.iter().all(|&v| self.present(v)) && self.required(c.base_mask | f.base_mask).iter().all(|&v| self.present(v))
        })
    }

    fn leaf(&mut self) -> bool {
        let mut count = 0;
        for r in 0..self.p.rule_constraints.len() {
            if !self.strict_possible(r) {
                continue;
            }
            let p = self.p;
            for c in &p.closures[r] {
                let strict_here = self.bad_uniform[r] == 0 || self.strict[c.constraint];
                if strict_here && self.closure_valid(c) {
                    count += 1;
                    break;
                }
            }
        }
        if count >= self.need {
            self.found = Some((self.lo.clone(), count));
            return true;
        }
        false
    }
}

/// A constraint with the monomial common to all terms of both sides
/// factored out. The factor only decides whether both sides are zero.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub guard: Vec<usize>,
    pub left: Poly,
    pub right: Poly,
}

fn reduce(c: &Constraint) -> Reduced {
    if c.left.terms.is_empty() || c.right.terms.is_empty() {
        return Reduced { guard: Vec::new(), left: c.left.clone(), right: c.right.clone() };
    }
    let mut terms = c.left.terms.iter().chain(&c.right.terms);
    let mut common: HashMap<usize, u32> = terms.next().unwrap().factors.iter().copied().collect();
    for t in terms {
        common.retain(|v, e| match t.factors.iter().find(|f| f.0 == *v) {
            Some(f) => {
                *e = (*e).min(f.1);
                true
            }
            None => false,
        });
    }
    let divide = |p: &Poly| Poly {
        terms: p
            .terms
            .iter()
            .map(|t| Term {
                coef: t.coef,
                factors: t
                    .factors
                    .iter()
                    .map(|&(v, e)| (v, e - common.get(&v).copied().unwrap_or(0)))
                    .filter(|f| f.1 > 0)
                    .collect(),
            })
            .collect(),
    };
    let mut guard: Vec<usize> = common.keys().copied().collect();
    guard.sort_unstable();
    Reduced { guard, left: divide(&c.left), right: divide(&c.right) }
}

/// Variables whose weight occurs on some reduced left-hand side.
fn left_occurrences(p: &Problem) -> Vec<bool> {
    let mut out = vec![false; p.vars.len()];
    for c in &p.constraints {
        for v in reduce(c).left.vars() {
            out[v] = true;
        }
    }
    out
}

pub(crate) fn ordering_and_domains<A: Alg>(
    p: &Problem,
    kind: SemiringKind,
    bits: u32,
) -> (Vec<usize>, Vec<Vec<u128>>, Vec<bool>) {
    let on_left = left_occurrences(p);
    let branch: Vec<bool> = p.vars.iter().map(|v| v.in_constraints && !(v.base && !v.weighted)).collect();
    let domains: Vec<Vec<u128>> = p
        .vars
        .iter()
        .zip(&branch)
        .zip(&on_left)
        .map(|((v, &b), &left)| {
            if !b {
                return vec![A::ONE];
            }
            let mut d = domain_values::<A>(kind, bits, v.weighted, !v.base);
            if !left {
                // only raises right-hand sides: the least weight dominates
                d.retain(|&x| x == A::ZERO || x == A::encode(kind.weight_range(bits).0) || !v.weighted);
            }
            d
        })
        .collect();
    (variable_order(p, &branch), domains, branch)
}

fn overflow_free<A: Alg>(p: &Problem, domains: &[Vec<u128>]) -> bool {
    let maxv: Vec<u128> = domains.iter().map(|d| d.iter().copied().filter(|&x| x != u128::MAX).max().unwrap_or(1)).collect();
    p.constraints.iter().all(|c| {
        [&c.left, &c.right].iter().all(|poly| {
            let mut total: u128 = 0;
            for t in &poly.terms {
                let mut m: u128 = t.coef as u128;
                for &(v, e) in &t.factors {
                    let f = match maxv[v].checked_pow(e) {
                        Some(f) => f,
                        None => return false,
                    };
                    let g = maxv[v].checked_mul(e as u128);
                    m = match (m.checked_mul(f), g) {
                        (Some(x), Some(_)) => x,
                        _ => return false,
                    };
                }
                total = match total.checked_add(m) {
                    Some(x) => x,
                    None => return false,
                };
            }
            total < u128::MAX / 2
        })
    })
}

fn run_problem<A: Alg>(
    p: &Problem,
    kind: SemiringKind,
    bits: u32,
    need: usize,
    node_limit: Option<u64>,
    deadline: Instant,
    cancel: &Cancel,
) -> Result<(SearchOutcome, Option<(Vec<u128>, usize)>), SearchError> {
    let (order, domains, _branch) = ordering_and_domains::<A>(p, kind, bits);
    if !overflow_free::<A>(p, &domains) {
        return Err(SearchError::Overflow);
    }
    let mut pos = vec![usize::MAX; p.vars.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut complete_at = vec![Vec::new(); order.len().max(1)];
    let mut touch_at = vec![Vec::new(); order.len().max(1)];
    let mut pre_complete = Vec::new();
    for (ci, c) in p.constraints.iter().enumerate() {
        let ps: Vec<usize> = c.vars.iter().map(|&v| pos[v]).filter(|&x| x != usize::MAX).collect();
        match ps.iter().max() {
            None => pre_complete.push(ci),
            Some(&last) => {
                complete_at[last].push(ci);
                for &q in &ps {
                    if q != last && !touch_at[q].contains(&ci) {
                        touch_at[q].push(ci);
                    }
                }
            }
        }
    }
    let lo: Vec<u128> = domains.iter().map(|d| *d.iter().min().unwrap()).collect();
    let hi: Vec<u128> = domains.iter().map(|d| *d.iter().max().unwrap()).collect();
    let nr = p.rule_constraints.len();
    let mut closure_users = vec![Vec::new(); p.constraints.len()];
    let mut alive_closure = vec![0usize; nr];
    for (r, cands) in p.closures.iter().enumerate() {
        let mut cs: Vec<usize> = cands.iter().map(|c| c.constraint).collect();
        cs.sort_unstable();
        cs.dedup();
        alive_closure[r] = cs.len();
        for c in cs {
            closure_users[c].push(r);
        }
    }
    let mut dfs: Dfs<A> = Dfs {
        p,
        kind,
        order,
        domains,
        lo: lo.clone(),
        hi,
        complete_at,
        touch_at,
        strict: vec![false; p.constraints.len()],
        empty: vec![false; p.constraints.len()],
        bad_uniform: vec![0; nr],
        alive_closure,
        closure_users,
        deadline,
        cancel,
        nodes: 0,
        stop: None,
        found: None,
        need,
        node_limit,
        required_cache: HashMap::new(),
        reduced: p.constraints.iter().map(reduce).collect(),
        constraints_of: {
            let mut of = vec![Vec::new(); p.vars.len()];
            for (c, con) in p.constraints.iter().enumerate() {
                for &v in &con.vars {
                    of[v].push(c);
                }
            }
            of
        },
        sorted: Vec::new(),
        _alg: std::marker::PhantomData,
    };
    // constraints without branching variables are decided up front
    let v_lo = lo;
    for &c in &pre_complete {
        let con = &p.constraints[c];
        let l = con.left.eval::<A>(&v_lo);
        let r = con.right.eval::<A>(&v_lo);
        if l < r {
            return Ok((SearchOutcome::Exhausted, None));
        }
        dfs.strict[c] = l > r;
        dfs.empty[c] = l == A::ZERO && r == A::ZERO;
        if !(dfs.strict[c] || dfs.empty[c]) {
            dfs.bad_uniform[con.rule] += 1;
        }
        if !dfs.strict[c] {
            for &ri in &dfs.closure_users[c].clone() {
                dfs.alive_closure[ri] -= 1;
            }
        }
    }
    dfs.sorted = dfs
        .domains
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.sort_unstable();
            d
        })
        .collect();
    if !dfs.any_strict_possible() || !dfs.propagate() {
        return Ok((SearchOutcome::Exhausted, None));
    }
    dfs.rec(0);
    if let Some(s) = dfs.stop.take() {
        return Ok((s, None));
    }
    Ok((SearchOutcome::Exhausted, dfs.found.take()))
}

/// Build the sub-type-graph, weights and per-rule classification from a
/// satisfying assignment, using the independent weight routines.
fn build_solution<A: Alg>(
    p: &Problem,
    rules: &[Rule],
    fw: Framework,
    kind: SemiringKind,
    vals: &[u128],
    size: usize,
    bits: u32,
) -> Result<Solution, SearchError> {
    let sig = p.t.sig().clone();
    let present = |v: usize| -> bool {
        fn pr(p: &Problem, vals: &[u128], zero: u128, v: usize) -> bool {
            vals[v] != zero && p.vars[v].args.iter().all(|&a| pr(p, vals, zero, a))
        }
        pr(p, vals, A::ZERO, v)
    };
    let mut sub = Graph::empty(sig.clone());
    let mut new_id: Vec<Vec<usize>> = (0..sig.len()).map(|s| vec![usize::MAX; p.t.count(s)]).collect();
    for &s in sig.topo_order() {
        let targets = sig.obj(s).args.clone();
        for id in 0..p.t.count(s) {
            let v = p.offset[s] + id;
            if !present(v) {
                continue;
            }
            let e = p.t.elem(ElementRef { sort: s, id });
            let args = e.args.iter().zip(&targets).map(|(&a, &t)| new_id[t][a]).collect();
            new_id[s][id] = sub.push(s, args, e.label);
        }
    }
    let sub = Arc::new(sub);
    let mut weights = Vec::new();
    for s in 0..sig.len() {
        for id in 0..p.t.count(s) {
            let v = p.offset[s] + id;
            if p.vars[v].weighted && present(v) && vals[v] != A::ONE {
                weights.push((ElementRef { sort: s, id: new_id[s][id] }, A::decode(vals[v])));
            }
        }
    }
    let wtg = WeightedTypeGraph::new(sub.clone(), kind, weights).map_err(|e| SearchError::Internal(e.to_string()))?;
    let remap = |map: &[Vec<usize>]| -> Option<Vec<Vec<usize>>> {
        map.iter()
            .enumerate()
            .map(|(s, v)| v.iter().map(|&y| Some(new_id[s][y]).filter(|&x| x != usize::MAX)).collect())
            .collect()
    };
    let mut results = Vec::new();
    for (ri, rule) in rules.iter().enumerate() {
        let table = compare_rule(&wtg, rule).map_err(|e| SearchError::Internal(e.to_string()))?;
        let mut valid: Vec<Morphism> = Vec::new();
        for c in &p.closures[ri] {
            let Some(map) = remap(&c.map) else { continue };
            let m = Morphism { dom: rule.lhs().clone(), cod: sub.clone(), map };
            if verify_context_closure(&m, rule, fw) {
                valid.push(m);
            }
        }
        let mut best: (Classification, Option<Morphism>) = (classify_from_table(kind, &table, None), None);
        for c in &valid {
            let ctk = compose(c, &rule.l).expect("composable");
            let class = classify_from_table(kind, &table, Some(&ctk));
            if class > best.0 || (best.1.is_none() && class >= best.0) {
                best = (class, Some(c.clone()));
            }
        }
        if best.0 == Classification::None {
            return Err(SearchError::Internal(format!("rule {} not weakly decreasing at solution", rule.name)));
        }
        results.push(RuleResult { name: rule.name.clone(), class: best.0, closure: best.1 });
    }
    let removable: Vec<String> = results
        .iter()
        .zip(&p.strict_candidate)
        .filter(|(r, &t)| t && r.class.is_strict())
        .map(|(r, _)| r.name.clone())
        .collect();
    if removable.is_empty() {
        return Err(SearchError::Internal("solution removes no rule".into()));
    }
    Ok(Solution { wtg, rules: results, removable, size, bits })
}

fn dispatch<A: Alg>(
    rules: &[Rule],
    fw: Framework,
    kind: SemiringKind,
    budget: SearchBudget,
    domains: &[Shape],
    targets: &[bool],
    cancel: &Cancel,
) -> Result<SearchOutcome, SearchError> {
    let start = Instant::now();
    let deadline = start + std::time::Duration::from_secs(budget.timeout_secs);
    for size in 1..=budget.size {
        let p = compile(rules, fw, kind, size, domains, targets)?;
        for bits in 1..=budget.bits {
            if cancel.is_cancelled() {
                return Ok(SearchOutcome::Cancelled);
            }
            if Instant::now() >= deadline {
                return Ok(SearchOutcome::Timeout);
            }
            let (outcome, found) = run_problem::<A>(&p, kind, bits, 1, None, deadline, cancel)?;
            if outcome != SearchOutcome::Exhausted {
                return Ok(outcome);
            }
            let Some((mut vals, mut count)) = found else { continue };
            // look for an assignment removing more rules, within a fixed node budget
            let (mut wider, mut at_bits) = (bits, bits);
            while wider <= budget.bits {
                let (outcome, found) =
                    run_problem::<A>(&p, kind, wider, count + 1, Some(IMPROVE_NODES), deadline, cancel)?;
                if outcome != SearchOutcome::Exhausted {
                    return Ok(outcome);
                }
                match found {
                    Some((v, c)) => (vals, count, at_bits) = (v, c, wider),
                    None => wider += 1,
                }
            }
            let sol = build_solution::<A>(&p, rules, fw, kind, &vals, size, at_bits)?;
            return Ok(SearchOutcome::Found(Box::new(sol)));
        }
    }
    Ok(SearchOutcome::Exhausted)
}

/// Searches for a weighted type graph under which every rule is weakly
/// decreasing and at least one rule flagged in `targets` is uniformly or
/// closure decreasing. The strict flagged rules are the removable ones.
pub fn search_wtg(
    rules: &[Rule],
    fw: Framework,
    kind: SemiringKind,
    budget: SearchBudget,
    domains: &[Shape],
    targets: &[bool],
    cancel: &Cancel,
) -> Result<SearchOutcome, SearchError> {
    assert_eq!(targets.len(), rules.len());
    if budget.size == 0 || budget.bits == 0 || budget.bits > 16 {
        return Err(SearchError::Budget);
    }
    if rules.is_empty() {
        return Ok(SearchOutcome::Exhausted);
    }
    match kind {
        SemiringKind::Arithmetic => dispatch::<Arith>(rules, fw, kind, budget, domains, targets, cancel),
        SemiringKind::Tropical => dispatch::<Trop>(rules, fw, kind, budget, domains, targets, cancel),
        SemiringKind::Arctic => dispatch::<Arctic>(rules, fw, kind, budget, domains, targets, cancel),
    }
}
