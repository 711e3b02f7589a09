use std::collections::HashMap;
use std::fmt;

use crate::knowledge::{eval_num, KnowledgeState};
use crate::pddl::{
    ActionName, Atom, Condition, Domain, DurationSpec, DurativeAction, Effect, EffectItem, FluentTerm, NumExpr,
    ObjectName, Term, TypeName, Variable,
};

use super::PlannerError;

/// A durative action with every parameter replaced by an object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedAction {
    pub name: ActionName,
    pub args: Vec<ObjectName>,
    pub duration: f64,
    pub cond_start: Condition,
    pub cond_overall: Condition,
    pub cond_end: Condition,
    pub eff_start: Effect,
    pub eff_end: Effect,
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

type Binding = HashMap<Variable, ObjectName>;

fn subst_term(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Var(v) => b.get(v).cloned().map(Term::Obj).unwrap_or_else(|| t.clone()),
        Term::Obj(_) => t.clone(),
    }
}

fn subst_atom(a: &Atom, b: &Binding) -> Atom {
    Atom { predicate: a.predicate.clone(), args: a.args.iter().map(|t| subst_term(t, b)).collect() }
}

fn subst_fluent(f: &FluentTerm, b: &Binding) -> FluentTerm {
    FluentTerm { function: f.function.clone(), args: f.args.iter().map(|t| subst_term(t, b)).collect() }
}

fn subst_num(e: &NumExpr, b: &Binding) -> NumExpr {
    match e {
        NumExpr::Number(v) => NumExpr::Number(*v),
        NumExpr::Fluent(f) => NumExpr::Fluent(subst_fluent(f, b)),
        NumExpr::Binary(op, l, r) => NumExpr::Binary(*op, Box::new(subst_num(l, b)), Box::new(subst_num(r, b))),
    }
}

pub(crate) fn subst_condition(c: &Condition, b: &Binding) -> Condition {
    match c {
        Condition::And(items) => Condition::And(items.iter().map(|i| subst_condition(i, b)).collect()),
        Condition::Atom(a) => Condition::Atom(subst_atom(a, b)),
        Condition::Not(a) => Condition::Not(subst_atom(a, b)),
        Condition::Compare(op, l, r) => Condition::Compare(*op, subst_num(l, b), subst_num(r, b)),
    }
}

fn subst_effect(e: &Effect, b: &Binding) -> Effect {
    Effect::new(
        e.items
            .iter()
            .map(|item| match item {
                EffectItem::Add(a) => EffectItem::Add(subst_atom(a, b)),
                EffectItem::Del(a) => EffectItem::Del(subst_atom(a, b)),
                EffectItem::Numeric { op, fluent, value } => {
                    EffectItem::Numeric { op: *op, fluent: subst_fluent(fluent, b), value: subst_num(value, b) }
                }
            })
            .collect(),
    )
}

fn object_type<'a>(domain: &'a Domain, state: &'a KnowledgeState, o: &ObjectName) -> Option<&'a TypeName> {
    state.instances().get(o).or_else(|| domain.constant_type(o))
}

/// Instantiates `schema` with `args` without type checking.
pub(crate) fn instantiate(
    schema: &DurativeAction,
    args: &[ObjectName],
    state: &KnowledgeState,
) -> Result<GroundedAction, PlannerError> {
    let binding: Binding = schema.params.iter().map(|p| p.name.clone()).zip(args.iter().cloned()).collect();
    let duration = match &schema.duration {
        DurationSpec::Constant(v) => *v,
        DurationSpec::Fluent(f) => eval_num(&NumExpr::Fluent(subst_fluent(f, &binding)), state)?,
    };
    if !(duration > 0.0) {
        return Err(PlannerError::InvalidDuration { action: schema.name.to_string(), duration });
    }
    Ok(GroundedAction {
        name: schema.name.clone(),
        args: args.to_vec(),
        duration,
        cond_start: subst_condition(&schema.cond_start, &binding),
        cond_overall: subst_condition(&schema.cond_overall, &binding),
        cond_end: subst_condition(&schema.cond_end, &binding),
        eff_start: subst_effect(&schema.eff_start, &binding),
        eff_end: subst_effect(&schema.eff_end, &binding),
    })
}

/// Substitutes `args` into the named action after checking arity and types.
/// Fluent durations are evaluated in `state`.
pub fn ground_action(
    domain: &Domain,
    state: &KnowledgeState,
    name: &ActionName,
    args: &[ObjectName],
) -> Result<GroundedAction, PlannerError> {
    let schema = domain.action(name).ok_or_else(|| PlannerError::UnknownAction(name.to_string()))?;
    if schema.params.len() != args.len() {
        return Err(PlannerError::Arity { action: name.to_string(), expected: schema.params.len(), found: args.len() });
    }
    for (p, arg) in schema.params.iter().zip(args) {
        let ty = object_type(domain, state, arg).ok_or_else(|| PlannerError::UnknownObject(arg.to_string()))?;
        if !domain.is_subtype(ty, &p.ty) {
            return Err(PlannerError::ArgumentType {
                action: name.to_string(),
                arg: arg.to_string(),
                expected: p.ty.to_string(),
            });
        }
    }
    instantiate(schema, args, state)
}

/// Every type-correct grounding of every action whose static preconditions
/// hold in `state`, in domain then lexicographic argument order.
pub(crate) fn ground_all(domain: &Domain, state: &KnowledgeState) -> Result<Vec<GroundedAction>, PlannerError> {
    let statics = domain.static_predicates();
    let mut objects: Vec<(ObjectName, TypeName)> =
        state.instances().iter().map(|(o, t)| (o.clone(), t.clone())).collect();
    for (c, t) in &domain.constants {
        if !state.instances().contains_key(c) {
            objects.push((c.clone(), t.clone()));
        }
    }
    objects.sort();

    let mut out = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<Vec<ObjectName>> = schema
            .params
            .iter()
            .map(|p| objects.iter().filter(|(_, t)| domain.is_subtype(t, &p.ty)).map(|(o, _)| o.clone()).collect())
            .collect();
        // Static literals, each tagged with the parameter position after which
        // all its variables are bound.
        let mut checks: Vec<(usize, &Condition)> = Vec::new();
        for cond in [&schema.cond_start, &schema.cond_overall, &schema.cond_end] {
            for lit in cond.literals() {
                let atom = match lit {
                    Condition::Atom(a) | Condition::Not(a) => a,
                    _ => continue,
                };
                if !statics.contains(&&atom.predicate) {
                    continue;
                }
                let last = atom
                    .variables()
                    .filter_map(|v| schema.params.iter().position(|p| &p.name == v))
                    .max()
                    .map_or(0, |i| i + 1);
                checks.push((last, lit));
            }
        }
        let mut binding = Binding::new();
        let mut chosen = Vec::with_capacity(schema.params.len());
        let static_ok = |binding: &Binding, depth: usize| -> bool {
            checks.iter().filter(|(d, _)| *d == depth).all(|(_, lit)| {
                let ground = subst_condition(lit, binding);
                crate::knowledge::evaluate(&ground, state).unwrap_or(false)
            })
        };
        if !static_ok(&binding, 0) {
            continue;
        }
        enumerate(schema, &candidates, 0, &mut binding, &mut chosen, &static_ok, state, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    schema: &DurativeAction,
    candidates: &[Vec<ObjectName>],
    depth: usize,
    binding: &mut Binding,
    chosen: &mut Vec<ObjectName>,
    static_ok: &dyn Fn(&Binding, usize) -> bool,
    state: &KnowledgeState,
    out: &mut Vec<GroundedAction>,
) -> Result<(), PlannerError> {
    if depth == schema.params.len() {
        out.push(instantiate(schema, chosen, state)?);
        return Ok(());
    }
    let var = &schema.params[depth].name;
    for obj in &candidates[depth] {
        binding.insert(var.clone(), obj.clone());
        chosen.push(obj.clone());
        if static_ok(binding, depth + 1) {
            enumerate(schema, candidates, depth + 1, binding, chosen, static_ok, state, out)?;
        }
        chosen.pop();
        binding.remove(var);
    }
    Ok(())
}
