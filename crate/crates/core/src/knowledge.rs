//! Problem-side knowledge: instances, ground predicates, fluent values and
//! the current goal, always validated against the domain.
//!
//! Evaluation is closed-world: an atom that is not stored is false. Reading a
//! fluent that was never set is an error rather than an implicit zero.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::pddl::{
    ArithOp, Condition, Domain, Effect, EffectItem, FluentTerm, GroundAtom, GroundFluent, NumExpr, NumericOp,
    ObjectName, Problem, Term, TypeName, TypedParam,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("`{0}` is not ground")]
    NonGround(String),
    #[error("fluent {0} has no value")]
    UnsetFluent(GroundFluent),
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("unknown type `{0}`")]
    UnknownType(TypeName),
    #[error("instance `{name}` already exists with type `{existing}`")]
    DuplicateInstance { name: ObjectName, existing: TypeName },
    #[error("unknown instance `{0}`")]
    UnknownInstance(ObjectName),
    #[error("instance `{name}` is still referenced by {by}")]
    InstanceReferenced { name: ObjectName, by: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` expects {expected} argument(s), found {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("argument `{arg}` of `{name}` has type `{found}`, expected `{expected}`")]
    ArgumentType { name: String, arg: ObjectName, found: TypeName, expected: TypeName },
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectName),
    #[error("goal is not ground: {0}")]
    NonGroundGoal(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Immutable view of the problem state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeState {
    instances: BTreeMap<ObjectName, TypeName>,
    atoms: BTreeSet<GroundAtom>,
    fluents: BTreeMap<GroundFluent, f64>,
    goal: Condition,
}

impl KnowledgeState {
    pub fn instances(&self) -> &BTreeMap<ObjectName, TypeName> {
        &self.instances
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.atoms
    }

    pub fn fluents(&self) -> &BTreeMap<GroundFluent, f64> {
        &self.fluents
    }

    pub fn goal(&self) -> &Condition {
        &self.goal
    }

    pub fn holds(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn fluent(&self, key: &GroundFluent) -> Option<f64> {
        self.fluents.get(key).copied()
    }

    /// Evaluates a ground condition under the closed-world assumption.
    pub fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        evaluate(condition, self)
    }

    /// Applies a ground effect in place.
    pub fn apply(&mut self, effect: &Effect) -> Result<(), EvalError> {
        apply(effect, self)
    }

    /// Converts the state into a problem description.
    pub fn to_problem(&self, name: &str, domain: &Domain) -> Problem {
        Problem {
            name: name.to_string(),
            domain_name: domain.name.clone(),
            objects: self.instances.iter().map(|(o, t)| (o.clone(), t.clone())).collect(),
            init: self.atoms.iter().cloned().collect(),
            init_fluents: self.fluents.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            goal: self.goal.clone(),
        }
    }
}

fn ground_fluent(f: &FluentTerm) -> Result<GroundFluent, EvalError> {
    f.to_ground().ok_or_else(|| EvalError::NonGround(f.to_string()))
}

pub fn eval_num(expr: &NumExpr, state: &KnowledgeState) -> Result<f64, EvalError> {
    match expr {
        NumExpr::Number(v) => Ok(*v),
        NumExpr::Fluent(f) => {
            let key = ground_fluent(f)?;
            state.fluent(&key).ok_or(EvalError::UnsetFluent(key))
        }
        NumExpr::Binary(op, l, r) => {
            let (l, r) = (eval_num(l, state)?, eval_num(r, state)?);
            Ok(match op {
                ArithOp::Add => l + r,
                ArithOp::Sub => l - r,
                ArithOp::Mul => l * r,
                ArithOp::Div if r == 0.0 => return Err(EvalError::DivisionByZero),
                ArithOp::Div => l / r,
            })
        }
    }
}

/// Closed-world evaluation of a ground condition.
pub fn evaluate(condition: &Condition, state: &KnowledgeState) -> Result<bool, EvalError> {
    match condition {
        Condition::And(items) => {
            for item in items {
                if !evaluate(item, state)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Condition::Atom(a) => {
            let g = a.to_ground().ok_or_else(|| EvalError::NonGround(a.to_string()))?;
            Ok(state.atoms.contains(&g))
        }
        Condition::Not(a) => {
            let g = a.to_ground().ok_or_else(|| EvalError::NonGround(a.to_string()))?;
            Ok(!state.atoms.contains(&g))
        }
        Condition::Compare(op, l, r) => Ok(op.holds(eval_num(l, state)?, eval_num(r, state)?)),
    }
}

/// Applies a ground effect set: numeric right-hand sides read the pre-state,
/// deletions happen before additions.
pub fn apply(effect: &Effect, state: &mut KnowledgeState) -> Result<(), EvalError> {
    let mut adds = Vec::new();
    let mut dels = Vec::new();
    let mut assignments = Vec::new();
    for item in &effect.items {
        match item {
            EffectItem::Add(a) => adds.push(a.to_ground().ok_or_else(|| EvalError::NonGround(a.to_string()))?),
            EffectItem::Del(a) => dels.push(a.to_ground().ok_or_else(|| EvalError::NonGround(a.to_string()))?),
            EffectItem::Numeric { op, fluent, value } => {
                let key = ground_fluent(fluent)?;
                let rhs = eval_num(value, state)?;
                let new = match op {
                    NumericOp::Assign => rhs,
                    NumericOp::Increase => state.fluent(&key).ok_or_else(|| EvalError::UnsetFluent(key.clone()))? + rhs,
                    NumericOp::Decrease => state.fluent(&key).ok_or_else(|| EvalError::UnsetFluent(key.clone()))? - rhs,
                };
                assignments.push((key, new));
            }
        }
    }
    for d in &dels {
        state.atoms.remove(d);
    }
    state.atoms.extend(adds);
    state.fluents.extend(assignments);
    Ok(())
}

/// Version-stamped immutable snapshot.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub version: u64,
    pub state: Arc<KnowledgeState>,
}

/// The mutable store. Every mutation is validated against the domain and
/// bumps the version; readers take cheap [`Snapshot`]s.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    domain: Arc<Domain>,
    state: Arc<KnowledgeState>,
    version: u64,
}

impl KnowledgeBase {
    pub fn new(domain: Arc<Domain>) -> Self {
        KnowledgeBase { domain, state: Arc::new(KnowledgeState::default()), version: 0 }
    }

    /// Loads objects, initial atoms, fluents and goal of a parsed problem.
    pub fn from_problem(domain: Arc<Domain>, problem: &Problem) -> Result<Self, KnowledgeError> {
        let mut kb = KnowledgeBase::new(domain);
        for (o, t) in &problem.objects {
            kb.add_instance(o.clone(), t.clone())?;
        }
        for a in &problem.init {
            kb.add_atom(a.clone())?;
        }
        for (f, v) in &problem.init_fluents {
            kb.set_fluent(f.clone(), *v)?;
        }
        kb.set_goal(problem.goal.clone())?;
        Ok(kb)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn state(&self) -> &KnowledgeState {
        &self.state
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { version: self.version, state: Arc::clone(&self.state) }
    }

    fn mutate(&mut self) -> &mut KnowledgeState {
        self.version += 1;
        Arc::make_mut(&mut self.state)
    }

    /// Type of an instance or domain constant.
    pub fn object_type(&self, name: &ObjectName) -> Option<&TypeName> {
        self.state.instances.get(name).or_else(|| self.domain.constant_type(name))
    }

    fn check_args(&self, name: &str, params: &[TypedParam], args: &[ObjectName]) -> Result<(), KnowledgeError> {
        if params.len() != args.len() {
            return Err(KnowledgeError::Arity { name: name.to_string(), expected: params.len(), found: args.len() });
        }
        for (p, arg) in params.iter().zip(args) {
            let ty = self.object_type(arg).ok_or_else(|| KnowledgeError::UnknownObject(arg.clone()))?;
            if !self.domain.is_subtype(ty, &p.ty) {
                return Err(KnowledgeError::ArgumentType {
                    name: name.to_string(),
                    arg: arg.clone(),
                    found: ty.clone(),
                    expected: p.ty.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn validate_atom(&self, atom: &GroundAtom) -> Result<(), KnowledgeError> {
        let def = self
            .domain
            .predicate(&atom.predicate)
            .ok_or_else(|| KnowledgeError::UnknownPredicate(atom.predicate.to_string()))?;
        self.check_args(atom.predicate.as_str(), &def.params, &atom.args)
    }

    pub fn validate_fluent(&self, fluent: &GroundFluent) -> Result<(), KnowledgeError> {
        let def = self
            .domain
            .function(&fluent.function)
            .ok_or_else(|| KnowledgeError::UnknownFunction(fluent.function.to_string()))?;
        self.check_args(fluent.function.as_str(), &def.params, &fluent.args)
    }

    fn validate_num(&self, e: &NumExpr) -> Result<(), KnowledgeError> {
        match e {
            NumExpr::Number(_) => Ok(()),
            NumExpr::Fluent(f) => {
                let g = f.to_ground().ok_or_else(|| KnowledgeError::NonGroundGoal(f.to_string()))?;
                self.validate_fluent(&g)
            }
            NumExpr::Binary(_, l, r) => {
                self.validate_num(l)?;
                self.validate_num(r)
            }
        }
    }

    pub fn validate_condition(&self, c: &Condition) -> Result<(), KnowledgeError> {
        match c {
            Condition::And(items) => items.iter().try_for_each(|i| self.validate_condition(i)),
            Condition::Atom(a) | Condition::Not(a) => {
                let g = a.to_ground().ok_or_else(|| KnowledgeError::NonGroundGoal(a.to_string()))?;
                self.validate_atom(&g)
            }
            Condition::Compare(_, l, r) => {
                self.validate_num(l)?;
                self.validate_num(r)
            }
        }
    }

    /// Adds an instance; re-adding with the same type is a no-op returning `false`.
    pub fn add_instance(&mut self, name: ObjectName, ty: TypeName) -> Result<bool, KnowledgeError> {
        if !self.domain.is_type_declared(&ty) {
            return Err(KnowledgeError::UnknownType(ty));
        }
        if let Some(existing) = self.object_type(&name) {
            if existing == &ty && self.state.instances.contains_key(&name) {
                return Ok(false);
            }
            return Err(KnowledgeError::DuplicateInstance { name, existing: existing.clone() });
        }
        self.mutate().instances.insert(name, ty);
        Ok(true)
    }

    /// Removes an instance that nothing refers to any more.
    pub fn remove_instance(&mut self, name: &ObjectName) -> Result<(), KnowledgeError> {
        if !self.state.instances.contains_key(name) {
            return Err(KnowledgeError::UnknownInstance(name.clone()));
        }
        if let Some(a) = self.state.atoms.iter().find(|a| a.args.contains(name)) {
            return Err(KnowledgeError::InstanceReferenced { name: name.clone(), by: a.to_string() });
        }
        if let Some(f) = self.state.fluents.keys().find(|f| f.args.contains(name)) {
            return Err(KnowledgeError::InstanceReferenced { name: name.clone(), by: f.to_string() });
        }
        if condition_mentions(&self.state.goal, name) {
            return Err(KnowledgeError::InstanceReferenced { name: name.clone(), by: "the goal".to_string() });
        }
        self.mutate().instances.remove(name);
        Ok(())
    }

    /// Returns `true` if the atom was not present before.
    pub fn add_atom(&mut self, atom: GroundAtom) -> Result<bool, KnowledgeError> {
        self.validate_atom(&atom)?;
        if self.state.atoms.contains(&atom) {
            return Ok(false);
        }
        Ok(self.mutate().atoms.insert(atom))
    }

    /// Returns `false` ("not present") when the atom was absent.
    pub fn remove_atom(&mut self, atom: &GroundAtom) -> Result<bool, KnowledgeError> {
        self.validate_atom(atom)?;
        if !self.state.atoms.contains(atom) {
            return Ok(false);
        }
        Ok(self.mutate().atoms.remove(atom))
    }

    pub fn set_fluent(&mut self, fluent: GroundFluent, value: f64) -> Result<(), KnowledgeError> {
        self.validate_fluent(&fluent)?;
        self.mutate().fluents.insert(fluent, value);
        Ok(())
    }

    pub fn remove_fluent(&mut self, fluent: &GroundFluent) -> bool {
        if !self.state.fluents.contains_key(fluent) {
            return false;
        }
        self.mutate().fluents.remove(fluent).is_some()
    }

    pub fn set_goal(&mut self, goal: Condition) -> Result<(), KnowledgeError> {
        if !goal.is_ground() {
            return Err(KnowledgeError::NonGroundGoal(crate::pddl::print_condition(&goal)));
        }
        self.validate_condition(&goal)?;
        self.mutate().goal = Condition::conjunction([goal]);
        Ok(())
    }

    pub fn clear_goal(&mut self) {
        self.mutate().goal = Condition::empty();
    }

    pub fn is_goal_satisfied(&self) -> Result<bool, EvalError> {
        evaluate(&self.state.goal, &self.state)
    }

    pub fn evaluate(&self, condition: &Condition) -> Result<bool, EvalError> {
        evaluate(condition, &self.state)
    }

    /// Applies a ground effect. Nothing is stored if an added atom fails
    /// validation or evaluation errors.
    pub fn apply(&mut self, effect: &Effect) -> Result<(), KnowledgeError> {
        for item in &effect.items {
            match item {
                EffectItem::Add(a) | EffectItem::Del(a) => {
                    let g = a.to_ground().ok_or_else(|| EvalError::NonGround(a.to_string()))?;
                    self.validate_atom(&g)?;
                }
                EffectItem::Numeric { fluent, .. } => {
                    let g = fluent.to_ground().ok_or_else(|| EvalError::NonGround(fluent.to_string()))?;
                    self.validate_fluent(&g)?;
                }
            }
        }
        let mut next = (*self.state).clone();
        apply(effect, &mut next)?;
        if next != *self.state {
            self.version += 1;
            self.state = Arc::new(next);
        }
        Ok(())
    }
}

fn condition_mentions(c: &Condition, name: &ObjectName) -> bool {
    fn num(e: &NumExpr, name: &ObjectName) -> bool {
        match e {
            NumExpr::Number(_) => false,
            NumExpr::Fluent(f) => f.args.iter().any(|t| matches!(t, Term::Obj(o) if o == name)),
            NumExpr::Binary(_, l, r) => num(l, name) || num(r, name),
        }
    }
    match c {
        Condition::And(items) => items.iter().any(|i| condition_mentions(i, name)),
        Condition::Atom(a) | Condition::Not(a) => a.args.iter().any(|t| matches!(t, Term::Obj(o) if o == name)),
        Condition::Compare(_, l, r) => num(l, name) || num(r, name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, Atom, CompOp, PredicateName};

    const DOMAIN: &str = r#"
(define (domain nav)
  (:requirements :typing :durative-actions :fluents)
  (:types robot zone car)
  (:predicates (robot_at ?r - robot ?z - zone) (car_assembled ?c - car))
  (:functions (battery_level ?r - robot))
  (:durative-action move
    :parameters (?r - robot ?a ?b - zone)
    :duration (= ?duration 5)
    :condition (at start (robot_at ?r ?a))
    :effect (and (at start (not (robot_at ?r ?a))) (at end (robot_at ?r ?b)))))
"#;

    fn o(s: &str) -> ObjectName {
        s.parse().unwrap()
    }

    fn t(s: &str) -> TypeName {
        s.parse().unwrap()
    }

    fn atom(text: &str) -> GroundAtom {
        GroundAtom::parse(text).unwrap()
    }

    fn kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new(Arc::new(parse_domain(DOMAIN).unwrap()));
        kb.add_instance(o("rb1"), t("robot")).unwrap();
        kb.add_instance(o("kitchen"), t("zone")).unwrap();
        kb.add_instance(o("a"), t("zone")).unwrap();
        kb.add_instance(o("b"), t("zone")).unwrap();
        kb.add_instance(o("car_1"), t("car")).unwrap();
        kb
    }

    fn battery(v: f64) -> (GroundFluent, f64) {
        (GroundFluent { function: "battery_level".parse().unwrap(), args: vec![o("rb1")] }, v)
    }

    #[test]
    fn add_instance_is_idempotent() {
        let mut kb = kb();
        assert!(!kb.add_instance(o("rb1"), t("robot")).unwrap());
        assert_eq!(kb.state().instances().len(), 5);
        let err = kb.add_instance(o("rb1"), t("zone")).unwrap_err();
        assert!(matches!(err, KnowledgeError::DuplicateInstance { .. }));
    }

    #[test]
    fn remove_referenced_instance_fails() {
        let mut kb = kb();
        kb.add_atom(atom("(robot_at rb1 kitchen)")).unwrap();
        assert!(matches!(kb.remove_instance(&o("rb1")), Err(KnowledgeError::InstanceReferenced { .. })));
        kb.remove_atom(&atom("(robot_at rb1 kitchen)")).unwrap();
        kb.remove_instance(&o("rb1")).unwrap();
        assert!(matches!(kb.remove_instance(&o("rb1")), Err(KnowledgeError::UnknownInstance(_))));
    }

    #[test]
    fn unknown_type_is_rejected() {
        let mut kb = kb();
        assert_eq!(kb.add_instance(o("d"), t("dish")), Err(KnowledgeError::UnknownType(t("dish"))));
    }

    #[test]
    fn atoms_have_set_semantics() {
        let mut kb = kb();
        assert!(kb.add_atom(atom("(robot_at rb1 kitchen)")).unwrap());
        assert!(!kb.add_atom(atom("(robot_at rb1 kitchen)")).unwrap());
        assert_eq!(kb.state().atoms().iter().filter(|a| a.predicate.as_str() == "robot_at").count(), 1);
        assert!(!kb.remove_atom(&atom("(robot_at rb1 a)")).unwrap());
    }

    #[test]
    fn invalid_atoms_are_rejected() {
        let mut kb = kb();
        assert_eq!(
            kb.add_atom(atom("(robot_at rb1 bogus_zone)")),
            Err(KnowledgeError::UnknownObject(o("bogus_zone")))
        );
        assert!(matches!(kb.add_atom(atom("(robot_at rb1)")), Err(KnowledgeError::Arity { .. })));
        assert!(matches!(kb.add_atom(atom("(robot_at kitchen rb1)")), Err(KnowledgeError::ArgumentType { .. })));
        assert!(matches!(kb.add_atom(atom("(flying rb1)")), Err(KnowledgeError::UnknownPredicate(_))));
        assert!(kb.state().atoms().is_empty());
    }

    #[test]
    fn fluent_overwrites() {
        let mut kb = kb();
        let (key, _) = battery(0.0);
        kb.set_fluent(key.clone(), 100.0).unwrap();
        kb.set_fluent(key.clone(), 40.0).unwrap();
        assert_eq!(kb.state().fluents().len(), 1);
        assert_eq!(kb.state().fluent(&key), Some(40.0));
    }

    #[test]
    fn goal_evaluation() {
        let mut kb = kb();
        kb.add_atom(atom("(car_assembled car_1)")).unwrap();
        kb.set_goal(Condition::And(vec![Condition::Atom(atom("(car_assembled car_1)").to_atom())])).unwrap();
        assert!(kb.is_goal_satisfied().unwrap());

        kb.set_goal(Condition::empty()).unwrap();
        assert!(kb.is_goal_satisfied().unwrap());

        let (key, v) = battery(40.0);
        kb.set_fluent(key.clone(), v).unwrap();
        let fluent = FluentTerm { function: key.function.clone(), args: vec![Term::Obj(o("rb1"))] };
        kb.set_goal(Condition::Compare(CompOp::Ge, NumExpr::Fluent(fluent), NumExpr::Number(50.0))).unwrap();
        assert!(!kb.is_goal_satisfied().unwrap());
    }

    #[test]
    fn non_ground_goal_is_rejected() {
        let mut kb = kb();
        let lifted = Atom::new(
            PredicateName::new("robot_at").unwrap(),
            vec![Term::Var(crate::pddl::Variable::new("?r").unwrap()), Term::Obj(o("a"))],
        );
        assert!(matches!(kb.set_goal(Condition::Atom(lifted)), Err(KnowledgeError::NonGroundGoal(_))));
    }

    #[test]
    fn apply_dels_before_adds() {
        let mut kb = kb();
        kb.add_atom(atom("(robot_at rb1 a)")).unwrap();
        let effect = Effect::new(vec![
            EffectItem::Add(atom("(robot_at rb1 b)").to_atom()),
            EffectItem::Del(atom("(robot_at rb1 a)").to_atom()),
        ]);
        kb.apply(&effect).unwrap();
        let at: Vec<_> = kb.state().atoms().iter().filter(|a| a.args[0] == o("rb1")).collect();
        assert_eq!(at, vec![&atom("(robot_at rb1 b)")]);
    }

    #[test]
    fn closed_world_negation() {
        let kb = kb();
        let c = Condition::Not(atom("(robot_at rb1 a)").to_atom());
        assert!(kb.evaluate(&c).unwrap());
    }

    #[test]
    fn numeric_effects() {
        let mut kb = kb();
        let (key, _) = battery(0.0);
        kb.set_fluent(key.clone(), 40.0).unwrap();
        let fluent = FluentTerm { function: key.function.clone(), args: vec![Term::Obj(o("rb1"))] };
        kb.apply(&Effect::new(vec![EffectItem::Numeric {
            op: NumericOp::Increase,
            fluent: fluent.clone(),
            value: NumExpr::Number(10.0),
        }]))
        .unwrap();
        assert_eq!(kb.state().fluent(&key), Some(50.0));
        // right-hand sides read the pre-state
        kb.apply(&Effect::new(vec![
            EffectItem::Numeric { op: NumericOp::Assign, fluent: fluent.clone(), value: NumExpr::Number(1.0) },
            EffectItem::Numeric {
                op: NumericOp::Decrease,
                fluent: fluent.clone(),
                value: NumExpr::Fluent(fluent.clone()),
            },
        ]))
        .unwrap();
        assert_eq!(kb.state().fluent(&key), Some(0.0));
    }

    #[test]
    fn unset_fluent_read_is_an_error() {
        let kb = kb();
        let (key, _) = battery(0.0);
        let fluent = FluentTerm { function: key.function.clone(), args: vec![Term::Obj(o("rb1"))] };
        let c = Condition::Compare(CompOp::Gt, NumExpr::Fluent(fluent), NumExpr::Number(0.0));
        assert_eq!(kb.evaluate(&c), Err(EvalError::UnsetFluent(key)));
    }

    #[test]
    fn snapshots_are_immutable() {
        let mut kb = kb();
        let before = kb.snapshot();
        kb.add_atom(atom("(robot_at rb1 a)")).unwrap();
        assert!(before.state.atoms().is_empty());
        assert!(kb.snapshot().version > before.version);
    }
}
