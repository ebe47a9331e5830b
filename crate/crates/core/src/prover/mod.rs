//! Rule removal driven by a strategy.

pub mod search;
pub mod smtlib;
pub mod strategy;

use std::fmt;
use std::time::Instant;

use crate::dpo::{admissible_domains, Framework, Rule};
use crate::graph::representable_shapes;
use crate::semiring::SemiringKind;
use crate::wtg::WeightedTypeGraph;

pub use search::{search_wtg, Cancel, RuleResult, SearchBudget, SearchError, SearchOutcome, Solution};
pub use strategy::{parse_strategy, Strategy, StrategyError, DEFAULT_STRATEGY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofStep {
    pub kind: SemiringKind,
    pub wtg: WeightedTypeGraph,
    /// One entry per rule present at this step, in system order.
    pub rules: Vec<RuleResult>,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Terminating,
    RelativelyTerminating(Vec<String>),
    Failed(Vec<String>),
}

impl Verdict {
    pub fn is_success(&self) -> bool {
        !matches!(self, Verdict::Failed(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Terminating => f.write_str("terminating"),
            Verdict::RelativelyTerminating(r) => write!(f, "relatively-terminating {}", r.join(" ")),
            Verdict::Failed(r) => write!(f, "failed {}", r.join(" ")),
        }
    }
}

pub fn verdict_for(s1: &[String], s2: &[String]) -> Verdict {
    match (s1.is_empty(), s2.is_empty()) {
        (true, true) => Verdict::Terminating,
        (true, false) => Verdict::RelativelyTerminating(s2.to_vec()),
        _ => Verdict::Failed(s1.iter().chain(s2).cloned().collect()),
    }
}

/// Rules still present, each tagged with whether it belongs to the relative part.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub rules: Vec<(Rule, bool)>,
}

impl RuleSet {
    pub fn new(rules: Vec<(Rule, bool)>) -> RuleSet {
        RuleSet { rules }
    }

    pub fn names(&self, relative: bool) -> Vec<String> {
        self.rules.iter().filter(|r| r.1 == relative).map(|r| r.0.name.clone()).collect()
    }

    fn primaries_left(&self) -> bool {
        self.rules.iter().any(|r| !r.1)
    }
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub steps: Vec<ProofStep>,
    pub remaining: RuleSet,
    pub log: Vec<String>,
}

impl StrategyRun {
    pub fn verdict(&self) -> Verdict {
        verdict_for(&self.remaining.names(false), &self.remaining.names(true))
    }
}

struct Outcome {
    steps: Vec<ProofStep>,
    set: RuleSet,
    log: Vec<String>,
    cancelled: bool,
}

fn basic(
    kind: SemiringKind,
    budget: SearchBudget,
    set: &RuleSet,
    fw: Framework,
    cancel: &Cancel,
) -> Result<Outcome, SearchError> {
    let mut log = Vec::new();
    let rules: Vec<Rule> = set.rules.iter().map(|r| r.0.clone()).collect();
    let mut out = Outcome { steps: Vec::new(), set: set.clone(), log: Vec::new(), cancelled: false };
    if rules.is_empty() {
        return Ok(out);
    }
    let sig = rules[0].lhs().sig().clone();
    let domains = admissible_domains(&rules, fw, &representable_shapes(&sig));
    if kind == SemiringKind::Arithmetic {
        for r in rules.iter().filter(|r| search::has_collapsing_epi(r)) {
            log.push(format!("note: {} collapses onto its left-hand side; never strict over arithmetic", r.name));
        }
    }
    let started = Instant::now();
    let label = format!("{kind}(size={},bits={},timeout={})", budget.size, budget.bits, budget.timeout_secs);
    let targets: Vec<bool> = set.rules.iter().map(|r| !r.1).collect();
    match search_wtg(&rules, fw, kind, budget, &domains, &targets, cancel)? {
        SearchOutcome::Found(sol) => {
            log.push(format!(
                "{label}: removed {} (size {}, bits {}, {:.2}s)",
                sol.removable.join(", "),
                sol.size,
                sol.bits,
                started.elapsed().as_secs_f64()
            ));
            out.set.rules.retain(|r| !sol.removable.contains(&r.0.name));
            out.steps.push(ProofStep { kind, wtg: sol.wtg, rules: sol.rules, removed: sol.removable });
        }
        SearchOutcome::Exhausted => log.push(format!("{label}: no proof")),
        SearchOutcome::Timeout => log.push(format!("{label}: timeout")),
        SearchOutcome::Cancelled => out.cancelled = true,
    }
    out.log = log;
    Ok(out)
}

fn run(s: &Strategy, set: &RuleSet, fw: Framework, cancel: &Cancel) -> Result<Outcome, SearchError> {
    match s {
        Strategy::Basic(kind, budget) => basic(*kind, *budget, set, fw, cancel),
        Strategy::Seq(a, b) => {
            let mut first = run(a, set, fw, cancel)?;
            if first.cancelled {
                return Ok(first);
            }
            let second = run(b, &first.set, fw, cancel)?;
            first.steps.extend(second.steps);
            first.log.extend(second.log);
            first.set = second.set;
            first.cancelled = second.cancelled;
            Ok(first)
        }
        Strategy::Par(a, b) => {
            let (right_cancel, flag) = cancel.child();
            std::thread::scope(|scope| {
                let right = scope.spawn(|| run(b, set, fw, &right_cancel));
                let left = run(a, set, fw, cancel);
                if matches!(&left, Ok(o) if !o.steps.is_empty() || o.cancelled) {
                    flag.store(true, std::sync::atomic::Ordering::Relaxed);
                    let _ = right.join();
                    return left;
                }
                let right = right.join().expect("strategy thread panicked");
                let mut left = left?;
                let right = right?;
                left.log.extend(right.log);
                Ok(Outcome { steps: right.steps, set: right.set, log: left.log, cancelled: right.cancelled })
            })
        }
        Strategy::Repeat(inner) => {
            let mut acc = Outcome { steps: Vec::new(), set: set.clone(), log: Vec::new(), cancelled: false };
            while acc.set.primaries_left() {
                let o = run(inner, &acc.set, fw, cancel)?;
                acc.log.extend(o.log);
                if o.cancelled {
                    acc.cancelled = true;
                    break;
                }
                if o.steps.is_empty() {
                    break;
                }
                acc.steps.extend(o.steps);
                acc.set = o.set;
            }
            Ok(acc)
        }
    }
}

/// Interprets the strategy. Rules flagged `true` form the relative part.
pub fn run_strategy(
    strategy: &Strategy,
    rules: Vec<(Rule, bool)>,
    fw: Framework,
    cancel: &Cancel,
) -> Result<StrategyRun, SearchError> {
    let set = RuleSet::new(rules);
    if !set.primaries_left() {
        return Ok(StrategyRun { steps: Vec::new(), remaining: set, log: Vec::new() });
    }
    let o = run(strategy, &set, fw, cancel)?;
    Ok(StrategyRun { steps: o.steps, remaining: o.set, log: o.log })
}
