//! Brute-force oracles shared by the integration suites and the acceptance
//! run. Nothing here calls the library's hom enumeration or weight code; the
//! library is used only to build inputs and is then compared against these
//! independent computations.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wtg_core::certificate::{CertificateFile, ProofCertificate};
use wtg_core::checker::check_certificate;
use wtg_core::dpo::{enumerate_matches, pushout};
use wtg_core::graph::{ElementRef, Graph};
use wtg_core::morphism::Morphism;
use wtg_core::prover::{parse_strategy, run_strategy, Cancel, ProofStep, StrategyRun, DEFAULT_STRATEGY};
use wtg_core::sample::{random_host, rng};
use wtg_core::semiring::{SemiringKind, Weight};
use wtg_core::signature::Signature;
use wtg_core::system::{GtSystem, NamedGraph};
use wtg_core::wtg::{verify_decomposition, weight_of_object, OrientedSquare, WeightedTypeGraph};

pub const SYSTEMS: &[&str] = &[
    "loop-unfolding",
    "reconfiguration",
    "simple-graphs",
    "unrestricted",
    "unrestricted-relative",
    "tree-counter",
    "morphism-counting",
    "limitations-relative",
    "limitations-tau",
];

pub fn system_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(format!("{name}.wtg"));
    std::fs::read_to_string(path).unwrap()
}

pub fn system(name: &str) -> GtSystem {
    GtSystem::parse(&system_text(name)).unwrap()
}

pub fn prove(sys: &GtSystem) -> StrategyRun {
    let s = parse_strategy(sys.strategy.as_deref().unwrap_or(DEFAULT_STRATEGY)).unwrap();
    run_strategy(&s, sys.flagged_rules(), sys.framework, &Cancel::default()).unwrap()
}

pub fn certificate(sys: &GtSystem, run: &StrategyRun) -> CertificateFile {
    CertificateFile::from_proof(sys, &ProofCertificate::from_run(sys, run))
}

#[derive(Debug, Default)]
pub struct Report {
    pub checked: usize,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        } else if self.failures.len() == 20 {
            self.failures.push("…".into());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} checks, {} failures", self.checked, self.failures.len());
        for n in &self.notes {
            s.push_str("; ");
            s.push_str(n);
        }
        if let Some(f) = self.failures.first() {
            s.push_str("; first: ");
            s.push_str(f);
        }
        s
    }
}


// ---------------------------------------------------------------- homs

pub type Map = Vec<Vec<usize>>;

/// Every homomorphism `g → h`, by plain backtracking over the elements of
/// `g` in argument order.
pub fn homs(g: &Graph, h: &Graph) -> Vec<Map> {
    let sig = g.sig().clone();
    let order: Vec<(usize, usize)> =
        sig.topo_order().iter().flat_map(|&s| (0..g.count(s)).map(move |i| (s, i))).collect();
    let mut map: Map = (0..sig.len()).map(|s| vec![usize::MAX; g.count(s)]).collect();
    let mut out = Vec::new();
    fn rec(g: &Graph, h: &Graph, order: &[(usize, usize)], k: usize, map: &mut Map, out: &mut Vec<Map>) {
        let Some(&(s, i)) = order.get(k) else {
            out.push(map.clone());
            return;
        };
        let e = &g.elems(s)[i];
        let targets = g.sig().obj(s).args.clone();
        for (y, f) in h.elems(s).iter().enumerate() {
            if f.label != e.label {
                continue;
            }
            if e.args.iter().zip(&f.args).zip(&targets).all(|((&a, &b), &t)| map[t][a] == b) {
                map[s][i] = y;
                rec(g, h, order, k + 1, map, out);
            }
        }
        map[s][i] = usize::MAX;
    }
    rec(g, h, &order, 0, &mut map, &mut out);
    out
}

/// `g ∘ f`.
pub fn after(f: &Map, g: &Map) -> Map {
    f.iter().zip(g).map(|(fs, gs)| fs.iter().map(|&x| gs[x]).collect()).collect()
}

pub fn morphism(dom: &Arc<Graph>, cod: &Arc<Graph>, m: Map) -> Morphism {
    Morphism::new(dom.clone(), cod.clone(), m).unwrap()
}

// ---------------------------------------------------------------- semirings

/// Reference semiring value. `Zero` is the additive identity of the
/// tropical (+∞) and arctic (−∞) semirings; arithmetic uses `Fin(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R {
    Fin(u128),
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct Ref(pub SemiringKind);

impl Ref {
    pub fn zero(self) -> R {
        match self.0 {
            SemiringKind::Arithmetic => R::Fin(0),
            _ => R::Zero,
        }
    }

    pub fn one(self) -> R {
        match self.0 {
            SemiringKind::Arithmetic => R::Fin(1),
            _ => R::Fin(0),
        }
    }

    fn rank(self, a: R) -> i128 {
        match (self.0, a) {
            (_, R::Fin(n)) => n as i128,
            (SemiringKind::Tropical, R::Zero) => i128::MAX,
            (_, R::Zero) => -1,
        }
    }

    pub fn le(self, a: R, b: R) -> bool {
        self.rank(a) <= self.rank(b)
    }

    pub fn lt(self, a: R, b: R) -> bool {
        self.rank(a) < self.rank(b)
    }

    pub fn add(self, a: R, b: R) -> R {
        match (self.0, a, b) {
            (SemiringKind::Arithmetic, R::Fin(x), R::Fin(y)) => R::Fin(x.checked_add(y).unwrap()),
            (_, R::Zero, z) | (_, z, R::Zero) => z,
            (SemiringKind::Tropical, R::Fin(x), R::Fin(y)) => R::Fin(x.min(y)),
            (_, R::Fin(x), R::Fin(y)) => R::Fin(x.max(y)),
        }
    }

    pub fn mul(self, a: R, b: R) -> R {
        match (self.0, a, b) {
            (SemiringKind::Arithmetic, R::Fin(x), R::Fin(y)) => R::Fin(x.checked_mul(y).unwrap()),
            (_, R::Zero, _) | (_, _, R::Zero) => R::Zero,
            (_, R::Fin(x), R::Fin(y)) => R::Fin(x + y),
        }
    }

    pub fn pow(self, a: R, n: usize) -> R {
        (0..n).fold(self.one(), |acc, _| self.mul(acc, a))
    }

    pub fn sum(self, xs: impl IntoIterator<Item = R>) -> R {
        xs.into_iter().fold(self.zero(), |a, b| self.add(a, b))
    }

    pub fn to_weight(self, a: R) -> Weight {
        match a {
            R::Fin(n) => Weight::fin(n.try_into().unwrap()),
            R::Zero => self.0.zero(),
        }
    }

    pub fn of_weight(self, w: &Weight) -> R {
        match w {
            Weight::Fin(_) => R::Fin(w.as_u64().unwrap() as u128),
            _ => R::Zero,
        }
    }

    /// `{𝟎, 𝟏, 0..7}` without duplicates.
    pub fn values(self) -> Vec<R> {
        let mut v = vec![self.zero(), self.one()];
        for n in 0..=7 {
            if !v.contains(&R::Fin(n)) {
                v.push(R::Fin(n));
            }
        }
        v
    }
}

pub const KINDS: [SemiringKind; 3] = [SemiringKind::Arithmetic, SemiringKind::Tropical, SemiringKind::Arctic];

/// Library operations against the reference model, then the axioms and
/// derived laws with the library operations over all tuples.
pub fn semiring_suite() -> Report {
    let mut rep = Report::default();
    for k in KINDS {
        let r = Ref(k);
        let vals = r.values();
        let w: Vec<Weight> = vals.iter().map(|&v| r.to_weight(v)).collect();
        let add = |a: usize, b: usize| k.add(&w[a], &w[b]).unwrap();
        let mul = |a: usize, b: usize| k.mul(&w[a], &w[b]).unwrap();
        let le = |a: &Weight, b: &Weight| k.le(a, b);
        let lt = |a: &Weight, b: &Weight| k.lt(a, b);
        let n = vals.len();
        for a in 0..n {
            for b in 0..n {
                rep.checked += 1;
                if r.of_weight(&add(a, b)) != r.add(vals[a], vals[b])
                    || r.of_weight(&mul(a, b)) != r.mul(vals[a], vals[b])
                    || k.lt(&w[a], &w[b]) != r.lt(vals[a], vals[b])
                    || k.le(&w[a], &w[b]) != r.le(vals[a], vals[b])
                {
                    rep.fail(format!("{k}: operations disagree on {} and {}", w[a], w[b]));
                }
            }
            for e in 0..5u64 {
                rep.checked += 1;
                if r.of_weight(&k.pow(&w[a], e).unwrap()) != r.pow(vals[a], e as usize) {
                    rep.fail(format!("{k}: pow({}, {e})", w[a]));
                }
            }
        }
        let one = k.one();
        let zero = k.zero();
        if zero == one {
            rep.fail(format!("{k}: 0 = 1"));
        }
        let mut s5_counterexample = false;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    rep.checked += 1;
                    // semiring structure
                    let ok = add(x, y) == add(y, x)
                        && mul(x, y) == mul(y, x)
                        && k.add(&add(x, y), &w[z]).unwrap() == k.add(&w[x], &add(y, z)).unwrap()
                        && k.mul(&mul(x, y), &w[z]).unwrap() == k.mul(&w[x], &mul(y, z)).unwrap();
                    let dist = k.mul(&w[x], &add(y, z)).unwrap() == k.add(&mul(x, y), &mul(x, z)).unwrap();
                    let ident = k.add(&w[x], &zero).unwrap() == w[x]
                        && k.mul(&w[x], &one).unwrap() == w[x]
                        && k.mul(&w[x], &zero).unwrap() == zero;
                    if !(ok && dist && ident) {
                        rep.fail(format!("{k}: semiring laws fail on {}, {}, {}", w[x], w[y], w[z]));
                    }
                }
                for x2 in 0..n {
                    for y2 in 0..n {
                        rep.checked += 1;
                        let (a, a2, b, b2) = (&w[x], &w[x2], &w[y], &w[y2]);
                        let s1 = !(le(a, a2) && le(b, b2)) || le(&add(x, y), &add(x2, y2));
                        let s2 = !(lt(a, a2) && lt(b, b2)) || lt(&add(x, y), &add(x2, y2));
                        // x ≤ x', 1 ≤ y (x'=x2, y=y)
                        let s3 = !(le(a, a2) && le(&one, b))
                            || (le(&mul(x, y), &mul(x2, y)) && le(&mul(y, x), &mul(y, x2)));
                        let s4 = !(lt(a, a2) && le(&one, b) && *b != zero)
                            || (lt(&mul(x, y), &mul(x2, y)) && lt(&mul(y, x), &mul(y, x2)));
                        let s5 = !(lt(a, a2) && le(b, b2)) || lt(&add(x, y), &add(x2, y2));
                        if !s5 {
                            s5_counterexample = true;
                        }
                        // S6–S8 over a = x, b = y, x = x2, y = y2
                        let s6 = !(le(&one, a) && le(&one, b) && *a != zero && *b != zero)
                            || (le(&one, &mul(x, y)) && mul(x, y) != zero);
                        let ab = add(x, y);
                        let s7 = !(le(&one, a) && le(&one, b) && le(a2, b2))
                            || le(&k.mul(&ab, a2).unwrap(), &k.mul(&ab, b2).unwrap());
                        let s8 = !(le(&one, a) && le(&one, b) && *a != zero && *b != zero && lt(a2, b2))
                            || lt(&k.mul(&ab, a2).unwrap(), &k.mul(&ab, b2).unwrap());
                        let strict_ok = !k.strictly_monotonic() || s5;
                        if !(s1 && s2 && s3 && s4 && s6 && s7 && s8 && strict_ok) {
                            rep.fail(format!("{k}: S1–S8 fail on x={a} x'={a2} y={b} y'={b2}"));
                        }
                    }
                }
            }
        }
        // S5 holds exactly for the strictly monotonic semiring
        if s5_counterexample == k.strictly_monotonic() {
            rep.fail(format!("{k}: strict monotonicity flag does not match S5"));
        }
        // longest strictly decreasing chain in {0..16} plus the infinity
        let mut chain_vals = vec![r.zero()];
        chain_vals.extend((0..=16).map(R::Fin));
        chain_vals.dedup();
        let ws: Vec<Weight> = chain_vals.iter().map(|&v| r.to_weight(v)).collect();
        let mut best = vec![1usize; ws.len()];
        let mut idx: Vec<usize> = (0..ws.len()).collect();
        idx.sort_by(|&a, &b| k.cmp(&ws[a], &ws[b]).unwrap());
        for (p, &i) in idx.iter().enumerate() {
            for &j in &idx[..p] {
                if k.lt(&ws[j], &ws[i]) {
                    best[i] = best[i].max(best[j] + 1);
                }
            }
        }
        rep.checked += 1;
        let longest = best.iter().copied().max().unwrap_or(0);
        if longest > 16 + 2 {
            rep.fail(format!("{k}: descending chain of length {longest}"));
        }
    }
    rep
}

// ---------------------------------------------------------------- weights

/// A weighted element as plain data: domain, map into `T`, weight.
#[derive(Debug, Clone)]
pub struct Elt {
    pub dom: Arc<Graph>,
    pub e: Map,
    pub w: R,
}

pub fn elts_of(wtg: &WeightedTypeGraph) -> Vec<Elt> {
    let r = Ref(wtg.kind());
    wtg.elements.iter().map(|x| Elt { dom: x.shape.graph.clone(), e: x.e.map.clone(), w: r.of_weight(&x.weight) }).collect()
}

/// `⊙_e w(e)^{#τ: dom(e)→G with φ∘τ = e}`.
pub fn w_morphism(r: Ref, elts: &[Elt], g: &Graph, phi: &Map) -> R {
    let mut acc = r.one();
    for e in elts {
        let n = homs(&e.dom, g).iter().filter(|t| after(t, phi) == e.e).count();
        acc = r.mul(acc, r.pow(e.w, n));
    }
    acc
}

/// As `w_morphism` for `φ: C → T`, skipping occurrences that factor
/// through `β: A → C`.
pub fn w_excluding(r: Ref, elts: &[Elt], c: &Graph, phi: &Map, a: &Graph, beta: &Map) -> R {
    let mut acc = r.one();
    for e in elts {
        let through: Vec<Map> = homs(&e.dom, a).iter().map(|z| after(z, beta)).collect();
        let n = homs(&e.dom, c).iter().filter(|t| after(t, phi) == e.e && !through.contains(t)).count();
        acc = r.mul(acc, r.pow(e.w, n));
    }
    acc
}

pub fn w_object(r: Ref, elts: &[Elt], g: &Graph, t: &Graph) -> R {
    r.sum(homs(g, t).iter().map(|phi| w_morphism(r, elts, g, phi)))
}

/// `w({− ∘ side = tk})` together with whether that set is non-empty.
pub fn w_side(r: Ref, elts: &[Elt], y: &Graph, t: &Graph, side: &Map, tk: &Map) -> (R, bool) {
    let ext: Vec<Map> = homs(y, t).into_iter().filter(|ty| after(side, ty) == *tk).collect();
    (r.sum(ext.iter().map(|ty| w_morphism(r, elts, y, ty))), !ext.is_empty())
}

// ---------------------------------------------------------------- squares

pub fn graph_sig(simple: bool) -> Arc<Signature> {
    Arc::new(Signature::parse(if simple { "V E(V,V)!" } else { "V E(V,V)" }).unwrap())
}

fn push_edge(g: &mut Graph, a: usize, b: usize) -> bool {
    if g.sig().obj(1).simple && g.find(1, None, &[a, b]).is_some() {
        return false;
    }
    g.push(1, vec![a, b], None);
    true
}

/// Random graph over `V E(V,V)` (or its simple variant).
pub fn random_plain(sig: &Arc<Signature>, nodes: usize, edges: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut g = Graph::empty(sig.clone());
    for _ in 0..nodes {
        g.push(0, vec![], None);
    }
    if nodes > 0 {
        for _ in 0..edges {
            let (a, b) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
            push_edge(&mut g, a, b);
        }
    }
    g
}

/// Extends `a` by extra nodes and edges: the inclusion is monic.
fn extend(a: &Graph, max_nodes: usize, max_edges: usize, rng: &mut ChaCha8Rng) -> Graph {
    let mut b = a.clone();
    let extra = rng.gen_range(0..=max_nodes.saturating_sub(a.count(0)));
    for _ in 0..extra {
        b.push(0, vec![], None);
    }
    let n = b.count(0);
    let extra = rng.gen_range(0..=max_edges.saturating_sub(a.count(1)));
    for _ in 0..if n == 0 { 0 } else { extra } {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        push_edge(&mut b, x, y);
    }
    b
}

pub struct Square {
    pub a: Arc<Graph>,
    pub b: Arc<Graph>,
    pub c: Arc<Graph>,
    pub d: Arc<Graph>,
    pub alpha: Map,
    pub beta: Map,
    pub beta_p: Map,
    pub alpha_p: Map,
}

impl Square {
    pub fn oriented(&self) -> OrientedSquare {
        OrientedSquare {
            alpha: morphism(&self.a, &self.b, self.alpha.clone()),
            beta: morphism(&self.a, &self.c, self.beta.clone()),
            beta_p: morphism(&self.b, &self.d, self.beta_p.clone()),
            alpha_p: morphism(&self.c, &self.d, self.alpha_p.clone()),
        }
    }
}

/// A random pushout square with graphs of at most 4 nodes and 4 edges;
/// `monic_alpha` makes `α` an inclusion.
pub fn random_square(sig: &Arc<Signature>, monic_alpha: bool, rng: &mut ChaCha8Rng) -> Square {
    loop {
        let a = random_plain(sig, rng.gen_range(0..=2), rng.gen_range(0..=2), rng);
        let (b, alpha) = if monic_alpha {
            let b = extend(&a, 4, 4, rng);
            let id: Map = (0..2).map(|s| (0..a.count(s)).collect()).collect();
            (b, id)
        } else {
            let b = random_plain(sig, rng.gen_range(1..=4), rng.gen_range(0..=4), rng);
            let hs = homs(&a, &b);
            let Some(h) = hs.choose(rng) else { continue };
            let h = h.clone();
            (b, h)
        };
        let c = if rng.gen_bool(0.5) { extend(&a, 4, 4, rng) } else { random_plain(sig, rng.gen_range(1..=4), rng.gen_range(0..=4), rng) };
        let hs = homs(&a, &c);
        let Some(beta) = hs.choose(rng).cloned() else { continue };
        let (a, b, c) = (Arc::new(a), Arc::new(b), Arc::new(c));
        let fa = morphism(&a, &b, alpha.clone());
        let fb = morphism(&a, &c, beta.clone());
        let (d, ib, ic) = pushout(&fa, &fb);
        return Square { a, b, c, d, alpha, beta, beta_p: ib.map, alpha_p: ic.map };
    }
}

pub fn edge_graph(sig: &Arc<Signature>) -> Arc<Graph> {
    let mut g = Graph::empty(sig.clone());
    g.push(0, vec![], None);
    g.push(0, vec![], None);
    g.push(1, vec![0, 1], None);
    Arc::new(g)
}

fn injective_on(xs: &[Map], f: &Map) -> bool {
    let imgs: Vec<Map> = xs.iter().map(|x| after(x, f)).collect();
    (0..imgs.len()).all(|i| (0..i).all(|j| imgs[i] != imgs[j]))
}

/// Traceability of `x` along the square, and the three weighability
/// conditions, all by enumeration.
pub fn square_conditions(sq: &Square, x: &Graph) -> (bool, bool) {
    let xb = homs(x, &sq.b);
    let xc = homs(x, &sq.c);
    let xa = homs(x, &sq.a);
    let via_a: Vec<Map> = xa.iter().map(|z| after(z, &sq.beta)).collect();
    let mut traceable = true;
    let mut strong = true;
    for f in homs(x, &sq.d) {
        let a = xb.iter().any(|g| after(g, &sq.beta_p) == f);
        let hs: Vec<&Map> = xc.iter().filter(|h| after(h, &sq.alpha_p) == f).collect();
        if !a && hs.is_empty() {
            traceable = false;
        }
        if a && hs.iter().any(|h| !via_a.contains(h)) {
            strong = false;
        }
    }
    let outside: Vec<Map> = xc.iter().filter(|h| !via_a.contains(h)).cloned().collect();
    let weighable = traceable && strong && injective_on(&xb, &sq.beta_p) && injective_on(&outside, &sq.alpha_p);
    (traceable, weighable)
}

/// Random type graph with a loop on node 0, so every graph maps into it,
/// and random edge-shaped weighted elements.
fn random_wtg(sig: &Arc<Signature>, rng: &mut ChaCha8Rng) -> (Arc<Graph>, Vec<Elt>, WeightedTypeGraph) {
    let mut t = random_plain(sig, rng.gen_range(1..=2), rng.gen_range(0..=3), rng);
    push_edge(&mut t, 0, 0);
    let t = Arc::new(t);
    let mut picked = Vec::new();
    for i in 0..t.count(1) {
        if picked.is_empty() || rng.gen_bool(0.5) {
            picked.push((i, rng.gen_range(1..=3u128)));
        }
    }
    let shape = edge_graph(sig);
    let elts = picked
        .iter()
        .map(|&(i, w)| {
            let args = &t.elems(1)[i].args;
            Elt { dom: shape.clone(), e: vec![args.clone(), vec![i]], w: R::Fin(w) }
        })
        .collect();
    let wtg = WeightedTypeGraph::new(
        t.clone(),
        SemiringKind::Arithmetic,
        picked.iter().map(|&(i, w)| (ElementRef { sort: 1, id: i }, Weight::fin(w as u64))).collect(),
    )
    .unwrap();
    (t, elts, wtg)
}

/// Decomposition of `w(φ)` along random squares: equality on weighable
/// squares, `≤` on squares that are only bounded above.
pub fn decomposition_suite(seed: u64, want: usize) -> Report {
    let mut rep = Report::default();
    let mut rng = rng(seed);
    let r = Ref(SemiringKind::Arithmetic);
    let (mut weighable, mut bounded, mut tries) = (0, 0, 0);
    while (weighable < want || bounded < want) && tries < 200 * want {
        tries += 1;
        let sig = graph_sig(tries % 3 == 0);
        let sq = random_square(&sig, rng.gen_bool(0.5), &mut rng);
        let (traceable, is_weighable) = square_conditions(&sq, &edge_graph(&sig));
        let take = if is_weighable { weighable < want } else { traceable && bounded < want };
        if !take {
            continue;
        }
        let (t, elts, wtg) = random_wtg(&sig, &mut rng);
        let osq = sq.oriented();
        let phis = homs(&sq.d, &t);
        if phis.is_empty() {
            continue;
        }
        if is_weighable {
            weighable += 1;
        } else {
            bounded += 1;
        }
        for phi in phis {
            rep.checked += 1;
            let w = w_morphism(r, &elts, &sq.d, &phi);
            let left = w_morphism(r, &elts, &sq.b, &after(&sq.beta_p, &phi));
            let right = w_excluding(r, &elts, &sq.c, &after(&sq.alpha_p, &phi), &sq.a, &sq.beta);
            let k = r.mul(left, right);
            let holds = if is_weighable { w == k } else { r.le(w, k) };
            if !holds {
                rep.fail(format!("weighable={is_weighable}: w(φ) = {w:?}, k = {k:?}"));
            }
            let dec = verify_decomposition(&wtg, &osq, &morphism(&sq.d, &t, phi)).unwrap();
            if r.of_weight(&dec.weight) != w || r.of_weight(&dec.k) != k || dec.exact != (w == k) {
                rep.fail(format!("library decomposition {:?} differs from brute force ({w:?}, {k:?})", dec));
            }
        }
    }
    rep.notes.push(format!("{weighable} weighable and {bounded} bounded-above-only squares"));
    if weighable < want || bounded < want {
        rep.fail(format!("only {weighable} weighable and {bounded} bounded-above squares generated"));
    }
    rep
}

/// `#{t_D | t_D∘β′∘α = t_A}` against `#{(t_B, t_C) | t_B∘α = t_A = t_C∘β}`.
pub fn pushout_suite(seed: u64, squares: usize) -> Report {
    let mut rep = Report::default();
    let mut rng = rng(seed);
    let mut tas = 0;
    for i in 0..squares {
        let sig = graph_sig(i % 3 == 2);
        let sq = random_square(&sig, rng.gen_bool(0.3), &mut rng);
        let mut t = random_plain(&sig, rng.gen_range(1..=3), rng.gen_range(0..=5), &mut rng);
        push_edge(&mut t, 0, 0);
        let tds = homs(&sq.d, &t);
        let tbs = homs(&sq.b, &t);
        let tcs = homs(&sq.c, &t);
        let via = after(&sq.alpha, &sq.beta_p);
        for ta in homs(&sq.a, &t) {
            rep.checked += 1;
            tas += 1;
            let left = tds.iter().filter(|td| after(&via, td) == ta).count();
            let bs = tbs.iter().filter(|tb| after(&sq.alpha, tb) == ta).count();
            let cs = tcs.iter().filter(|tc| after(&sq.beta, tc) == ta).count();
            if left != bs * cs {
                rep.fail(format!("square {i}: {left} morphisms from D against {bs}·{cs} pairs"));
            }
        }
    }
    rep.notes.push(format!("{squares} squares, {tas} morphisms t_A"));
    rep
}

// ---------------------------------------------------------------- steps

/// Rewrites random hosts at each proof step: removed rules must strictly
/// decrease the brute-force object weight, the others weakly.
pub fn decreasing_suite(sys: &GtSystem, steps: &[ProofStep], seed: u64, hosts: usize) -> Report {
    let mut rep = Report::default();
    let mut rng = rng(seed);
    let mut present: Vec<_> = sys.flagged_rules().into_iter().map(|r| r.0).collect();
    for (i, step) in steps.iter().enumerate() {
        let r = Ref(step.kind);
        let elts = elts_of(&step.wtg);
        let t = &step.wtg.t;
        for h in 0..hosts {
            // sparse hosts pass the dangling condition more often
            let g = Arc::new(random_host(&present, 5, if h % 2 == 0 { 4 } else { 1 }, &mut rng));
            let wg = w_object(r, &elts, &g, t);
            if r.of_weight(&weight_of_object(&step.wtg, &g).unwrap()) != wg {
                rep.fail(format!("step {}: library object weight differs from brute force", i + 1));
            }
            for rule in &present {
                let strict = step.removed.contains(&rule.name);
                for (_, d) in enumerate_matches(rule, &g, sys.framework) {
                    rep.checked += 1;
                    let wh = w_object(r, &elts, &d.h, t);
                    let ok = if strict { r.lt(wh, wg) } else { r.le(wh, wg) };
                    if !ok {
                        rep.fail(format!("step {}: {} takes weight {wg:?} to {wh:?}", i + 1, rule.name));
                    }
                }
            }
        }
        present.retain(|r| !step.removed.contains(&r.name));
    }
    rep
}

// ---------------------------------------------------------------- named graphs

/// Parses a graph block in the signature of `text`.
pub fn extra_graph(text: &str, name: &str, body: &str) -> (GtSystem, NamedGraph) {
    let sys = GtSystem::parse(&format!("{text}\ngraph {name}\n{body}end\n")).unwrap();
    let g = sys.graph(name).unwrap().clone();
    (sys, g)
}

fn try_element(g: &NamedGraph, name: &str) -> Option<ElementRef> {
    let (s, id) = name.split_once('.')?;
    let sort = g.graph.sig().sort_id(s)?;
    Some(ElementRef { sort, id: g.ids[sort].iter().position(|i| i == id)? })
}

fn element(g: &NamedGraph, name: &str) -> ElementRef {
    try_element(g, name).unwrap_or_else(|| panic!("no element {name}"))
}

/// Map given by element names; `None` when a name is unknown, the sorts
/// differ or the map is partial.
pub fn try_named_map(dom: &NamedGraph, cod: &NamedGraph, pairs: &[(&str, &str)]) -> Option<Map> {
    let mut m: Map = dom.ids.iter().map(|v| vec![usize::MAX; v.len()]).collect();
    for (a, b) in pairs {
        let x = try_element(dom, a)?;
        let y = try_element(cod, b)?;
        if x.sort != y.sort || m[x.sort][x.id] != usize::MAX {
            return None;
        }
        m[x.sort][x.id] = y.id;
    }
    m.iter().flatten().all(|&v| v != usize::MAX).then_some(m)
}

/// Morphism given by element names, `("V.x", "V.yz")`.
pub fn named_map(dom: &NamedGraph, cod: &NamedGraph, pairs: &[(&str, &str)]) -> Map {
    try_named_map(dom, cod, pairs).expect("total map by names")
}

pub fn weights(t: &NamedGraph, kind: SemiringKind, ws: &[(&str, u64)]) -> WeightedTypeGraph {
    WeightedTypeGraph::new(t.graph.clone(), kind, ws.iter().map(|&(n, w)| (element(t, n), Weight::fin(w))).collect()).unwrap()
}

// ---------------------------------------------------------------- mutations

const CLASSES: [&str; 4] = ["none", "weak", "closure-decreasing", "uniform"];

fn bump(v: &str, rng: &mut ChaCha8Rng) -> String {
    match v.parse::<u64>() {
        Ok(n) if n > 0 && rng.gen_bool(0.5) => (n - 1).to_string(),
        Ok(n) => (n + 1).to_string(),
        Err(_) => "0".into(),
    }
}

fn other<'a>(xs: &[&'a str], cur: &str, rng: &mut ChaCha8Rng) -> &'a str {
    let rest: Vec<&&str> = xs.iter().filter(|x| **x != cur).collect();
    rest.choose(rng).unwrap()
}

/// Names of the elements of sort `sort` in the step's type graph.
fn ids_of_sort(c: &CertificateFile, step: usize, sort: &str) -> Vec<String> {
    c.steps[step].graph.iter().filter(|e| e.sort == sort).map(|e| format!("{sort}.{}", e.id)).collect()
}

fn retarget(pairs: &mut [(String, String)], c: &CertificateFile, step: usize, rng: &mut ChaCha8Rng) -> bool {
    if pairs.is_empty() {
        return false;
    }
    let i = rng.gen_range(0..pairs.len());
    let sort = pairs[i].1.split_once('.').unwrap().0.to_string();
    let cands: Vec<String> = ids_of_sort(c, step, &sort).into_iter().filter(|n| *n != pairs[i].1).collect();
    match cands.choose(rng) {
        Some(n) => {
            pairs[i].1 = n.clone();
            true
        }
        None => false,
    }
}

/// Applies one random single-field change; the certificate is resealed
/// unless the seal itself is the field.
pub fn mutate(cert: &CertificateFile, rng: &mut ChaCha8Rng) -> Option<(CertificateFile, String)> {
    let mut c = cert.clone();
    let n = c.steps.len();
    let kind = rng.gen_range(0..14);
    let s = if n > 0 { rng.gen_range(0..n) } else { 0 };
    let what = match kind {
        0 => {
            c.version += rng.gen_range(1..5);
            "version"
        }
        1 => {
            let i = rng.gen_range(0..c.system.len());
            let ch = if &c.system[i..i + 1] == "0" { "1" } else { "0" };
            c.system.replace_range(i..i + 1, ch);
            "system hash"
        }
        2 => {
            let v = c.verdict.clone();
            let cands = ["terminating", "failed rho", "failed tau", "relatively-terminating tau", "relatively-terminating rho"];
            c.verdict = other(&cands, &v, rng).to_string();
            "verdict"
        }
        3 => {
            let i = rng.gen_range(0..c.seal.len());
            let ch = if &c.seal[i..i + 1] == "0" { "1" } else { "0" };
            c.seal.replace_range(i..i + 1, ch);
            return Some((c, "seal".into()));
        }
        _ if n == 0 => return None,
        4 => {
            let st = &mut c.steps[s];
            let cur = st.semiring.clone();
            st.semiring = other(&["arithmetic", "tropical", "arctic"], &cur, rng).to_string();
            "semiring"
        }
        5 => {
            // an argument of an element of T
            let cand: Vec<usize> = (0..c.steps[s].graph.len()).filter(|&i| !c.steps[s].graph[i].args.is_empty()).collect();
            let &i = cand.choose(rng)?;
            let j = rng.gen_range(0..c.steps[s].graph[i].args.len());
            let cur = c.steps[s].graph[i].args[j].clone();
            // arguments point at base elements of the same sort as the current one
            let sort = c.steps[s].graph.iter().find(|e| e.id == cur && e.args.is_empty())?.sort.clone();
            let ids: Vec<String> = c.steps[s].graph.iter().filter(|e| e.sort == sort && e.id != cur).map(|e| e.id.clone()).collect();
            c.steps[s].graph[i].args[j] = ids.choose(rng)?.clone();
            "element argument"
        }
        6 => {
            let len = c.steps[s].graph.len();
            c.steps[s].graph.remove(rng.gen_range(0..len));
            "element removed"
        }
        7 => {
            let st = &mut c.steps[s];
            if st.weights.is_empty() {
                return None;
            }
            let i = rng.gen_range(0..st.weights.len());
            st.weights[i].1 = bump(&st.weights[i].1, rng);
            "weight value"
        }
        8 => {
            let st = &mut c.steps[s];
            if st.weights.is_empty() {
                return None;
            }
            st.weights.remove(rng.gen_range(0..st.weights.len()));
            "weight removed"
        }
        9 => {
            let i = rng.gen_range(0..c.steps[s].rules.len());
            let cur = c.steps[s].rules[i].class.clone();
            c.steps[s].rules[i].class = other(&CLASSES, &cur, rng).to_string();
            "classification"
        }
        10 => {
            let cand: Vec<usize> = (0..c.steps[s].rules.len()).filter(|&i| c.steps[s].rules[i].closure.is_some()).collect();
            let &i = cand.choose(rng)?;
            let mut pairs = c.steps[s].rules[i].closure.clone().unwrap();
            if !retarget(&mut pairs, &c, s, rng) {
                return None;
            }
            c.steps[s].rules[i].closure = Some(pairs);
            "closure image"
        }
        11 => {
            let i = rng.gen_range(0..c.steps[s].rules.len());
            let tl = c.steps[s].rules[i].table.len();
            if tl == 0 {
                return None;
            }
            let j = rng.gen_range(0..tl);
            let line = &mut c.steps[s].rules[i].table[j];
            if rng.gen_bool(0.5) {
                line.left = bump(&line.left, rng);
            } else {
                line.right = bump(&line.right, rng);
            }
            "comparison value"
        }
        12 => {
            let i = rng.gen_range(0..c.steps[s].rules.len());
            let tl = c.steps[s].rules[i].table.len();
            if tl == 0 {
                return None;
            }
            let j = rng.gen_range(0..tl);
            let mut tk = c.steps[s].rules[i].table[j].tk.clone();
            if !retarget(&mut tk, &c, s, rng) {
                return None;
            }
            c.steps[s].rules[i].table[j].tk = tk;
            "comparison t_K"
        }
        _ => {
            let st = &mut c.steps[s];
            let names: Vec<String> = st.rules.iter().map(|r| r.name.clone()).collect();
            if rng.gen_bool(0.5) && !st.removed.is_empty() {
                let len = st.removed.len();
                st.removed.remove(rng.gen_range(0..len));
            } else {
                let extra: Vec<&String> = names.iter().filter(|n| !st.removed.contains(n)).collect();
                st.removed.push((*extra.choose(rng)?).clone());
            }
            "removed rules"
        }
    };
    if c == *cert {
        return None;
    }
    c.reseal();
    Some((c, what.to_string()))
}

/// Independent validity of a certificate: every table, classification and
/// removal is recomputed by brute force. Header fields are compared with a
/// reference certificate that the checker accepted.
pub fn oracle_valid(sys: &GtSystem, reference: &CertificateFile, c: &CertificateFile) -> Result<String, String> {
    if c.version != reference.version || c.system != reference.system || c.seal != c.compute_seal() {
        return Err("header".into());
    }
    let text = sys.to_string();
    let all = sys.flagged_rules();
    let mut present: Vec<(String, bool)> = all.iter().map(|(r, rel)| (r.name.clone(), *rel)).collect();
    for (i, st) in c.steps.iter().enumerate() {
        let kind: SemiringKind = st.semiring.parse().map_err(|_| format!("step {i}: semiring"))?;
        let r = Ref(kind);
        let mut body = String::new();
        for e in &st.graph {
            body.push_str(&format!("{} {}", e.sort, e.id));
            if let Some(l) = &e.label {
                body.push_str(&format!(" {l}"));
            }
            if !e.args.is_empty() {
                body.push_str(&format!(" ({})", e.args.join(" ")));
            }
            body.push('\n');
        }
        let parsed = GtSystem::parse(&format!("{text}\ngraph T__\n{body}end\n")).map_err(|e| format!("step {i}: graph {e}"))?;
        let t = parsed.graph("T__").unwrap().clone();
        let mut ws = Vec::new();
        for (name, w) in &st.weights {
            let v: u64 = w.parse().map_err(|_| format!("step {i}: weight {w}"))?;
            if !r.le(r.one(), R::Fin(v as u128)) {
                return Err(format!("step {i}: weight {w} below one"));
            }
            let (so, id) = name.split_once('.').ok_or("weight name")?;
            if !st.graph.iter().any(|e| e.sort == so && e.id == id) {
                return Err(format!("step {i}: weight on missing {name}"));
            }
            ws.push((name.as_str(), v));
        }
        let mut names: Vec<&str> = ws.iter().map(|w| w.0).collect();
        names.sort();
        names.dedup();
        if names.len() != ws.len() {
            return Err(format!("step {i}: duplicate weight"));
        }
        let wtg = weights(&t, kind, &ws);
        let shapes = wtg_core::dpo::admissible_domains(
            &all.iter().map(|r| r.0.clone()).collect::<Vec<_>>(),
            sys.framework,
            &wtg_core::graph::representable_shapes(&sys.sig),
        );
        for x in &wtg.elements {
            if !shapes.iter().any(|sh| sh.graph.canonical_key() == x.shape.graph.canonical_key()) {
                return Err(format!("step {i}: inadmissible weighted element"));
            }
        }
        let elts = elts_of(&wtg);
        let here: Vec<&String> = st.rules.iter().map(|x| &x.name).collect();
        if here != present.iter().map(|p| &p.0).collect::<Vec<_>>() {
            return Err(format!("step {i}: rule list"));
        }
        let mut strict = Vec::new();
        for entry in &st.rules {
            let decl = sys.rules.iter().find(|d| d.rule.name == entry.name).unwrap();
            let rule = &decl.rule;
            let lhs = parsed.graph(&decl.lhs).unwrap();
            let kg = parsed.graph(&decl.interface).unwrap();
            let mut table = Vec::new();
            for tk in homs(rule.interface(), &t.graph) {
                let (wl, nl) = w_side(r, &elts, rule.lhs(), &t.graph, &rule.l.map, &tk);
                let (wr, nr) = w_side(r, &elts, rule.rhs(), &t.graph, &rule.r.map, &tk);
                table.push((tk, wl, wr, nl, nr));
            }
            if entry.table.len() != table.len() {
                return Err(format!("step {i}: {} table size", entry.name));
            }
            for line in &entry.table {
                let pairs: Vec<(&str, &str)> = line.tk.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                let tk = try_named_map(kg, &t, &pairs).ok_or("table t_K")?;
                let Some(row) = table.iter().find(|row| row.0 == tk) else {
                    return Err(format!("step {i}: {} t_K is no morphism", entry.name));
                };
                if line.left != r.to_weight(row.1).to_string() || line.right != r.to_weight(row.2).to_string() {
                    return Err(format!("step {i}: {} table values", entry.name));
                }
            }
            let weak = table.iter().all(|row| r.le(row.2, row.1));
            let mut class = if weak { "weak" } else { "none" };
            if let Some(cl) = &entry.closure {
                let pairs: Vec<(&str, &str)> = cl.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                let m = try_named_map(lhs, &t, &pairs).ok_or("closure")?;
                if !homs(rule.lhs(), &t.graph).contains(&m) {
                    return Err(format!("step {i}: {} closure is no morphism", entry.name));
                }
                if !wtg_core::wtg::verify_context_closure(&morphism(rule.lhs(), &t.graph, m.clone()), rule, sys.framework) {
                    return Err(format!("step {i}: {} closure", entry.name));
                }
                let ctk = after(&rule.l.map, &m);
                if table.iter().all(|row| r.lt(row.2, row.1) || (!row.3 && !row.4)) {
                    class = "uniform";
                } else if weak && kind.strictly_monotonic() && table.iter().any(|row| row.0 == ctk && r.lt(row.2, row.1)) {
                    class = "closure-decreasing";
                }
            }
            if entry.class != class {
                return Err(format!("step {i}: {} is {class}, not {}", entry.name, entry.class));
            }
            if class == "none" {
                return Err(format!("step {i}: {} not weakly decreasing", entry.name));
            }
            if class == "uniform" || class == "closure-decreasing" {
                strict.push(entry.name.clone());
            }
        }
        if st.removed.is_empty() {
            return Err(format!("step {i}: nothing removed"));
        }
        for name in &st.removed {
            let Some(pos) = present.iter().position(|p| p.0 == *name && !p.1) else {
                return Err(format!("step {i}: cannot remove {name}"));
            };
            if !strict.contains(name) {
                return Err(format!("step {i}: {name} not strict"));
            }
            present.remove(pos);
        }
    }
    let s1: Vec<String> = present.iter().filter(|p| !p.1).map(|p| p.0.clone()).collect();
    let s2: Vec<String> = present.iter().filter(|p| p.1).map(|p| p.0.clone()).collect();
    let verdict = wtg_core::prover::verdict_for(&s1, &s2).to_string();
    if c.verdict != verdict {
        return Err(format!("verdict {} instead of {verdict}", c.verdict));
    }
    Ok(verdict)
}

/// Every mutation must be rejected with the original seal. Resealed, it
/// must be rejected too unless the oracle finds it a valid proof on its own.
pub fn mutation_suite(sys: &GtSystem, cert: &CertificateFile, seed: u64, count: usize) -> Report {
    let mut rep = Report::default();
    let mut rng = rng(seed);
    rep.checked += 1;
    if check_certificate(sys, cert).is_err() {
        rep.fail("unmutated certificate rejected".into());
    }
    match oracle_valid(sys, cert, cert) {
        Ok(_) => {}
        Err(e) => rep.fail(format!("oracle rejects the unmutated certificate: {e}")),
    }
    let (mut done, mut unparsable, mut alternatives) = (0, 0, 0);
    while done < count {
        let Some((m, what)) = mutate(cert, &mut rng) else { continue };
        done += 1;
        // the text form must carry the change too
        let Ok(resealed) = CertificateFile::parse(&m.to_text()) else {
            unparsable += 1;
            rep.checked += 1;
            continue;
        };
        let mut raw = resealed.clone();
        if what != "seal" {
            raw.seal = cert.seal.clone();
        }
        rep.checked += 2;
        if let Ok(v) = check_certificate(sys, &raw) {
            rep.fail(format!("mutation of {what} accepted under the original seal ({v})"));
        }
        if let Ok(v) = check_certificate(sys, &resealed) {
            match oracle_valid(sys, cert, &resealed) {
                Ok(_) => alternatives += 1,
                Err(e) => rep.fail(format!("resealed mutation of {what} accepted ({v}), oracle: {e}")),
            }
        }
    }
    rep.notes.push(format!("{done} mutations, {unparsable} unparsable, {alternatives} resealed ones are valid proofs"));
    rep
}

// ---------------------------------------------------------------- determinism

/// Proves `sys` twice; both certificate encodings must match byte for byte.
pub fn determinism_suite(sys: &GtSystem) -> Report {
    let mut rep = Report::default();
    let a = certificate(sys, &prove(sys));
    let b = certificate(sys, &prove(sys));
    rep.checked += 2;
    if a.to_text().as_bytes() != b.to_text().as_bytes() {
        rep.fail("text certificates differ".into());
    }
    if a.to_json().as_bytes() != b.to_json().as_bytes() {
        rep.fail("JSON certificates differ".into());
    }
    rep
}
