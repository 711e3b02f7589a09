//! PDDL 2.1 subset: typed domains with durative actions, numeric fluents and
//! negative preconditions.
//!
//! Identifiers are case-insensitive and stored lower case. Conditions are kept
//! in negation normal form with a flat top-level conjunction, which is also
//! what the parser produces, so `parse(print(x)) == x` holds structurally.

mod lexer;
mod merge;
mod parser;
mod printer;

use std::fmt;
use std::str::FromStr;

pub use lexer::Pos;
pub use merge::{merge_domains, MergeError};
pub use parser::{parse_condition, parse_domain, parse_fluent_assignment, parse_ground_atom, parse_problem};
pub use printer::{print_action, print_condition, print_domain, print_predicate, print_problem};

/// Returned when a string is not a valid PDDL identifier.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier `{0}`")]
pub struct NameError(pub String);

fn normalize_identifier(raw: &str) -> Result<String, NameError> {
    let mut chars = raw.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return Err(NameError(raw.to_string())),
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(NameError(raw.to_string()));
    }
    Ok(raw.to_ascii_lowercase())
}

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(raw: impl AsRef<str>) -> Result<Self, NameError> {
                normalize_identifier(raw.as_ref()).map(Self)
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = NameError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl TryFrom<&str> for $name {
            type Error = NameError;
            fn try_from(s: &str) -> Result<Self, Self::Error> {
                Self::new(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

identifier!(
    /// Name of a type in the domain's type hierarchy.
    TypeName
);
identifier!(
    /// Name of an object (problem instance or domain constant).
    ObjectName
);
identifier!(PredicateName);
identifier!(FunctionName);
identifier!(ActionName);

/// A schema variable, stored without its leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    /// Accepts the name with or without the leading `?`.
    pub fn new(raw: impl AsRef<str>) -> Result<Self, NameError> {
        let raw = raw.as_ref();
        let bare = raw.strip_prefix('?').unwrap_or(raw);
        normalize_identifier(bare).map(Self).map_err(|_| NameError(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl TypeName {
    /// The implicit root of every type hierarchy.
    pub fn object() -> Self {
        TypeName("object".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    Obj(ObjectName),
}

impl Term {
    pub fn as_object(&self) -> Option<&ObjectName> {
        match self {
            Term::Obj(o) => Some(o),
            Term::Var(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Obj(o) => o.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedParam {
    pub name: Variable,
    pub ty: TypeName,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: PredicateName,
    pub params: Vec<TypedParam>,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Two declarations are the same signature when names and parameter
    /// types agree; variable names are irrelevant.
    pub fn same_signature(&self, other: &PredicateDef) -> bool {
        self.name == other.name
            && self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| a.ty == b.ty)
    }
}

/// Numeric fluent declaration; values are reals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: FunctionName,
    pub params: Vec<TypedParam>,
}

impl FunctionDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn same_signature(&self, other: &FunctionDef) -> bool {
        self.name == other.name
            && self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| a.ty == b.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: PredicateName,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: PredicateName, args: Vec<Term>) -> Self {
        Atom { predicate, args }
    }

    /// Returns the ground version, or `None` if a variable remains.
    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self.args.iter().map(|t| t.as_object().cloned()).collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate: self.predicate.clone(), args })
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Obj(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// A fully instantiated predicate, the unit of stored knowledge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: PredicateName,
    pub args: Vec<ObjectName>,
}

impl GroundAtom {
    pub fn new(predicate: PredicateName, args: Vec<ObjectName>) -> Self {
        GroundAtom { predicate, args }
    }

    /// Parses `(pred a b)` or `pred a b`.
    pub fn parse(text: &str) -> Result<Self, NameError> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let mut words = inner.split_whitespace();
        let predicate = PredicateName::new(words.next().unwrap_or(""))?;
        let args = words.map(ObjectName::new).collect::<Result<_, _>>()?;
        Ok(GroundAtom { predicate, args })
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().cloned().map(Term::Obj).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FluentTerm {
    pub function: FunctionName,
    pub args: Vec<Term>,
}

impl FluentTerm {
    pub fn to_ground(&self) -> Option<GroundFluent> {
        let args = self.args.iter().map(|t| t.as_object().cloned()).collect::<Option<Vec<_>>>()?;
        Some(GroundFluent { function: self.function.clone(), args })
    }
}

impl fmt::Display for FluentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.function)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Key of a stored numeric fluent value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundFluent {
    pub function: FunctionName,
    pub args: Vec<ObjectName>,
}

impl fmt::Display for GroundFluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.function)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Number(f64),
    Fluent(FluentTerm),
    Binary(ArithOp, Box<NumExpr>, Box<NumExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CompOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Lt => "<",
            CompOp::Le => "<=",
            CompOp::Eq => "=",
            CompOp::Ge => ">=",
            CompOp::Gt => ">",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompOp::Lt => lhs < rhs,
            CompOp::Le => lhs <= rhs,
            CompOp::Eq => lhs == rhs,
            CompOp::Ge => lhs >= rhs,
            CompOp::Gt => lhs > rhs,
        }
    }

    /// The operator equivalent to `not (op a b)`, if one exists.
    fn negated(self) -> Option<CompOp> {
        match self {
            CompOp::Lt => Some(CompOp::Ge),
            CompOp::Le => Some(CompOp::Gt),
            CompOp::Ge => Some(CompOp::Lt),
            CompOp::Gt => Some(CompOp::Le),
            CompOp::Eq => None,
        }
    }
}

/// Condition tree in negation normal form.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    And(Vec<Condition>),
    Atom(Atom),
    Not(Atom),
    Compare(CompOp, NumExpr, NumExpr),
}

impl Default for Condition {
    fn default() -> Self {
        Condition::And(Vec::new())
    }
}

impl Condition {
    /// Empty conjunction; always true.
    pub fn empty() -> Self {
        Condition::And(Vec::new())
    }

    /// Builds a flat conjunction from the given parts.
    pub fn conjunction(parts: impl IntoIterator<Item = Condition>) -> Self {
        let mut flat = Vec::new();
        for part in parts {
            part.flatten_into(&mut flat);
        }
        Condition::And(flat)
    }

    fn flatten_into(self, out: &mut Vec<Condition>) {
        match self {
            Condition::And(items) => items.into_iter().for_each(|c| c.flatten_into(out)),
            other => out.push(other),
        }
    }

    /// Iterates over the leaves (atoms, negated atoms, comparisons).
    pub fn literals(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals<'a>(&'a self, out: &mut Vec<&'a Condition>) {
        match self {
            Condition::And(items) => items.iter().for_each(|c| c.collect_literals(out)),
            other => out.push(other),
        }
    }

    pub fn positive_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.literals().into_iter().filter_map(|c| match c {
            Condition::Atom(a) => Some(a),
            _ => None,
        })
    }

    pub fn negative_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.literals().into_iter().filter_map(|c| match c {
            Condition::Not(a) => Some(a),
            _ => None,
        })
    }

    pub fn has_comparisons(&self) -> bool {
        self.literals().iter().any(|c| matches!(c, Condition::Compare(..)))
    }

    pub fn is_empty(&self) -> bool {
        self.literals().is_empty()
    }

    /// True when the condition mentions no variables.
    pub fn is_ground(&self) -> bool {
        let mut vars = Vec::new();
        self.collect_variables(&mut vars);
        vars.is_empty()
    }

    pub(crate) fn collect_variables<'a>(&'a self, out: &mut Vec<&'a Variable>) {
        match self {
            Condition::And(items) => items.iter().for_each(|c| c.collect_variables(out)),
            Condition::Atom(a) | Condition::Not(a) => out.extend(a.variables()),
            Condition::Compare(_, l, r) => {
                l.collect_variables(out);
                r.collect_variables(out);
            }
        }
    }

    /// Pushes a negation inward. Fails for constructs that would need a
    /// disjunction or for negated equality.
    pub(crate) fn negate(self) -> Result<Condition, String> {
        match self {
            Condition::Atom(a) => Ok(Condition::Not(a)),
            Condition::Not(a) => Ok(Condition::Atom(a)),
            Condition::Compare(op, l, r) => match op.negated() {
                Some(neg) => Ok(Condition::Compare(neg, l, r)),
                None => Err("negated numeric equality is not supported".to_string()),
            },
            Condition::And(items) if items.len() == 1 => {
                items.into_iter().next().expect("one item").negate()
            }
            Condition::And(_) => Err("negated conjunction (disjunction) is not supported".to_string()),
        }
    }
}

impl NumExpr {
    pub(crate) fn collect_variables<'a>(&'a self, out: &mut Vec<&'a Variable>) {
        match self {
            NumExpr::Number(_) => {}
            NumExpr::Fluent(f) => out.extend(f.args.iter().filter_map(|t| match t {
                Term::Var(v) => Some(v),
                Term::Obj(_) => None,
            })),
            NumExpr::Binary(_, l, r) => {
                l.collect_variables(out);
                r.collect_variables(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericOp {
    Assign,
    Increase,
    Decrease,
}

impl NumericOp {
    pub fn keyword(self) -> &'static str {
        match self {
            NumericOp::Assign => "assign",
            NumericOp::Increase => "increase",
            NumericOp::Decrease => "decrease",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EffectItem {
    Add(Atom),
    Del(Atom),
    Numeric { op: NumericOp, fluent: FluentTerm, value: NumExpr },
}

/// Effects applied together at one time point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Effect {
    pub items: Vec<EffectItem>,
}

impl Effect {
    pub fn new(items: Vec<EffectItem>) -> Self {
        Effect { items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn adds(&self) -> impl Iterator<Item = &Atom> {
        self.items.iter().filter_map(|e| match e {
            EffectItem::Add(a) => Some(a),
            _ => None,
        })
    }

    pub fn dels(&self) -> impl Iterator<Item = &Atom> {
        self.items.iter().filter_map(|e| match e {
            EffectItem::Del(a) => Some(a),
            _ => None,
        })
    }

    pub fn has_numeric(&self) -> bool {
        self.items.iter().any(|e| matches!(e, EffectItem::Numeric { .. }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DurationSpec {
    Constant(f64),
    Fluent(FluentTerm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurativeAction {
    pub name: ActionName,
    pub params: Vec<TypedParam>,
    pub duration: DurationSpec,
    pub cond_start: Condition,
    pub cond_overall: Condition,
    pub cond_end: Condition,
    pub eff_start: Effect,
    pub eff_end: Effect,
}

impl DurativeAction {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requirement {
    Strips,
    Typing,
    DurativeActions,
    Fluents,
    NegativePreconditions,
}

impl Requirement {
    pub fn keyword(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::DurativeActions => ":durative-actions",
            Requirement::Fluents => ":fluents",
            Requirement::NegativePreconditions => ":negative-preconditions",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<Self> {
        Some(match kw.to_ascii_lowercase().as_str() {
            ":strips" => Requirement::Strips,
            ":typing" => Requirement::Typing,
            ":durative-actions" => Requirement::DurativeActions,
            ":fluents" => Requirement::Fluents,
            ":negative-preconditions" => Requirement::NegativePreconditions,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: TypeName,
    pub parent: TypeName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<(ObjectName, TypeName)>,
    pub predicates: Vec<PredicateDef>,
    pub functions: Vec<FunctionDef>,
    pub actions: Vec<DurativeAction>,
}

impl Domain {
    pub fn is_type_declared(&self, ty: &TypeName) -> bool {
        ty.as_str() == "object" || self.types.iter().any(|t| &t.name == ty)
    }

    pub fn parent_of(&self, ty: &TypeName) -> Option<&TypeName> {
        self.types.iter().find(|t| &t.name == ty).map(|t| &t.parent)
    }

    /// `child` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, child: &TypeName, ancestor: &TypeName) -> bool {
        if ancestor.as_str() == "object" {
            return true;
        }
        let mut current = child;
        // Bounded walk: the hierarchy is acyclic after parsing, the bound guards
        // hand-built domains.
        for _ in 0..=self.types.len() {
            if current == ancestor {
                return true;
            }
            match self.parent_of(current) {
                Some(p) => current = p,
                None => return false,
            }
        }
        false
    }

    pub fn predicate(&self, name: &PredicateName) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| &p.name == name)
    }

    pub fn function(&self, name: &FunctionName) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| &f.name == name)
    }

    pub fn action(&self, name: &ActionName) -> Option<&DurativeAction> {
        self.actions.iter().find(|a| &a.name == name)
    }

    pub fn constant_type(&self, name: &ObjectName) -> Option<&TypeName> {
        self.constants.iter().find(|(c, _)| c == name).map(|(_, t)| t)
    }

    /// Predicates that no action ever adds or deletes.
    pub fn static_predicates(&self) -> Vec<&PredicateName> {
        self.predicates
            .iter()
            .map(|p| &p.name)
            .filter(|name| {
                !self.actions.iter().any(|a| {
                    a.eff_start.adds().chain(a.eff_start.dels()).chain(a.eff_end.adds()).chain(a.eff_end.dels())
                        .any(|atom| &atom.predicate == *name)
                })
            })
            .collect()
    }
}

/// Contents of a problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<(ObjectName, TypeName)>,
    pub init: Vec<GroundAtom>,
    pub init_fluents: Vec<(GroundFluent, f64)>,
    pub goal: Condition,
}

/// Parse failure with its source position.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("lexical error: {0}")]
    Lexical(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared function `{0}`")]
    UndeclaredFunction(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("`{name}` expects {expected} argument(s), found {found}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
}
