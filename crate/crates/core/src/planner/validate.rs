use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::knowledge::{apply, evaluate, KnowledgeState};
use crate::pddl::{Condition, Domain};

use super::{GroundedAction, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// The action could not be grounded or its duration evaluated.
    Grounding,
    StartCondition,
    OverAllCondition,
    EndCondition,
    /// Evaluating a condition or applying an effect failed.
    Evaluation,
    Goal,
}

/// First point at which a plan fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub time: f64,
    /// Index into the plan's items; `None` for goal violations.
    pub item: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.item {
            Some(i) => write!(f, "t={} item {}: {:?}: {}", self.time, i, self.kind, self.detail),
            None => write!(f, "t={}: {:?}: {}", self.time, self.kind, self.detail),
        }
    }
}

/// Phase of a timed event. At equal times, ends are processed before starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    End,
    Start,
}

/// Total order on (time, phase) used by validation and plan graphs.
pub fn event_cmp(a: (f64, Phase), b: (f64, Phase)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn unsatisfied(c: &Condition, state: &KnowledgeState) -> Result<Option<String>, String> {
    for lit in c.literals() {
        match evaluate(lit, state) {
            Ok(true) => {}
            Ok(false) => return Ok(Some(crate::pddl::print_condition(lit))),
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(None)
}

/// Simulates the plan from `state` and checks every timed condition and the
/// goal stored in `state`.
pub fn validate_plan(domain: &Domain, state: &KnowledgeState, plan: &Plan) -> Result<(), Violation> {
    let grounded: Vec<GroundedAction> = plan
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            item.ground(domain, state).map_err(|e| Violation {
                time: item.time,
                item: Some(i),
                kind: ViolationKind::Grounding,
                detail: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut events: Vec<(f64, Phase, usize)> = Vec::with_capacity(grounded.len() * 2);
    for (i, (item, g)) in plan.items.iter().zip(&grounded).enumerate() {
        events.push((item.time, Phase::Start, i));
        events.push((item.time + g.duration, Phase::End, i));
    }
    events.sort_by(|a, b| event_cmp((a.0, a.1), (b.0, b.1)).then(a.2.cmp(&b.2)));

    let mut s = state.clone();
    let mut active = BTreeSet::new();
    let mut last_time = 0.0;
    for (time, phase, i) in events {
        last_time = time;
        let g = &grounded[i];
        let fail = |kind, detail: String| Err(Violation { time, item: Some(i), kind, detail });
        let (cond, effect, kind) = match phase {
            Phase::Start => (&g.cond_start, &g.eff_start, ViolationKind::StartCondition),
            Phase::End => {
                active.remove(&i);
                (&g.cond_end, &g.eff_end, ViolationKind::EndCondition)
            }
        };
        match unsatisfied(cond, &s) {
            Ok(None) => {}
            Ok(Some(lit)) => return fail(kind, format!("{g}: {lit} does not hold")),
            Err(e) => return fail(ViolationKind::Evaluation, format!("{g}: {e}")),
        }
        if let Err(e) = apply(effect, &mut s) {
            return fail(ViolationKind::Evaluation, format!("{g}: {e}"));
        }
        if phase == Phase::Start {
            active.insert(i);
        }
        for &a in &active {
            let ga = &grounded[a];
            match unsatisfied(&ga.cond_overall, &s) {
                Ok(None) => {}
                Ok(Some(lit)) => {
                    return Err(Violation {
                        time,
                        item: Some(a),
                        kind: ViolationKind::OverAllCondition,
                        detail: format!("{ga}: {lit} does not hold"),
                    })
                }
                Err(e) => {
                    return Err(Violation {
                        time,
                        item: Some(a),
                        kind: ViolationKind::Evaluation,
                        detail: format!("{ga}: {e}"),
                    })
                }
            }
        }
    }
    match unsatisfied(state.goal(), &s) {
        Ok(None) => Ok(()),
        Ok(Some(lit)) => Err(Violation {
            time: last_time,
            item: None,
            kind: ViolationKind::Goal,
            detail: format!("{lit} does not hold at the end"),
        }),
        Err(e) => Err(Violation { time: last_time, item: None, kind: ViolationKind::Evaluation, detail: e }),
    }
}
