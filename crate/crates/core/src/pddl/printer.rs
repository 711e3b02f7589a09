use std::fmt::Write;

use super::{Condition, Domain, DurationSpec, DurativeAction, Effect, EffectItem, NumExpr, PredicateDef, Problem, TypedParam};

fn params(out: &mut String, params: &[TypedParam]) {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{} - {}", p.name, p.ty);
    }
}

pub(crate) fn num_expr(e: &NumExpr) -> String {
    match e {
        NumExpr::Number(v) => v.to_string(),
        NumExpr::Fluent(f) => f.to_string(),
        NumExpr::Binary(op, l, r) => format!("({} {} {})", op.symbol(), num_expr(l), num_expr(r)),
    }
}

/// Prints a condition on one line.
pub fn print_condition(c: &Condition) -> String {
    match c {
        Condition::And(items) => {
            let mut s = String::from("(and");
            for item in items {
                s.push(' ');
                s.push_str(&print_condition(item));
            }
            s.push(')');
            s
        }
        Condition::Atom(a) => a.to_string(),
        Condition::Not(a) => format!("(not {a})"),
        Condition::Compare(op, l, r) => format!("({} {} {})", op.symbol(), num_expr(l), num_expr(r)),
    }
}

fn effect_item(e: &EffectItem) -> String {
    match e {
        EffectItem::Add(a) => a.to_string(),
        EffectItem::Del(a) => format!("(not {a})"),
        EffectItem::Numeric { op, fluent, value } => format!("({} {} {})", op.keyword(), fluent, num_expr(value)),
    }
}

fn timed_conditions(out: &mut String, tag: &str, c: &Condition, indent: &str) {
    for lit in c.literals() {
        let _ = writeln!(out, "{indent}({tag} {})", print_condition(lit));
    }
}

fn timed_effects(out: &mut String, tag: &str, e: &Effect, indent: &str) {
    for item in &e.items {
        let _ = writeln!(out, "{indent}({tag} {})", effect_item(item));
    }
}

pub fn print_predicate(p: &PredicateDef) -> String {
    let mut s = format!("({}", p.name);
    if !p.params.is_empty() {
        s.push(' ');
        params(&mut s, &p.params);
    }
    s.push(')');
    s
}

/// Prints a single durative action block at the given indentation.
pub fn print_action(a: &DurativeAction) -> String {
    let mut out = String::new();
    write_action(&mut out, a, "");
    out
}

fn write_action(out: &mut String, a: &DurativeAction, indent: &str) {
    let _ = writeln!(out, "{indent}(:durative-action {}", a.name);
    let _ = write!(out, "{indent}  :parameters (");
    params(out, &a.params);
    out.push_str(")\n");
    let duration = match &a.duration {
        DurationSpec::Constant(v) => v.to_string(),
        DurationSpec::Fluent(f) => f.to_string(),
    };
    let _ = writeln!(out, "{indent}  :duration (= ?duration {duration})");
    let inner = format!("{indent}    ");
    let _ = writeln!(out, "{indent}  :condition (and");
    timed_conditions(out, "at start", &a.cond_start, &inner);
    timed_conditions(out, "over all", &a.cond_overall, &inner);
    timed_conditions(out, "at end", &a.cond_end, &inner);
    let _ = writeln!(out, "{indent}  )");
    let _ = writeln!(out, "{indent}  :effect (and");
    timed_effects(out, "at start", &a.eff_start, &inner);
    timed_effects(out, "at end", &a.eff_end, &inner);
    let _ = writeln!(out, "{indent}  )");
    let _ = writeln!(out, "{indent})");
}

/// Canonical PDDL text for a domain; declaration order is preserved.
pub fn print_domain(d: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let reqs: Vec<&str> = d.requirements.iter().map(|r| r.keyword()).collect();
        let _ = writeln!(out, "  (:requirements {})", reqs.join(" "));
    }
    if !d.types.is_empty() {
        out.push_str("  (:types\n");
        for t in &d.types {
            let _ = writeln!(out, "    {} - {}", t.name, t.parent);
        }
        out.push_str("  )\n");
    }
    if !d.constants.is_empty() {
        out.push_str("  (:constants\n");
        for (c, t) in &d.constants {
            let _ = writeln!(out, "    {c} - {t}");
        }
        out.push_str("  )\n");
    }
    if !d.predicates.is_empty() {
        out.push_str("  (:predicates\n");
        for p in &d.predicates {
            let _ = writeln!(out, "    {}", print_predicate(p));
        }
        out.push_str("  )\n");
    }
    if !d.functions.is_empty() {
        out.push_str("  (:functions\n");
        for f in &d.functions {
            let mut s = format!("({}", f.name);
            if !f.params.is_empty() {
                s.push(' ');
                params(&mut s, &f.params);
            }
            let _ = writeln!(out, "    {s})");
        }
        out.push_str("  )\n");
    }
    for a in &d.actions {
        write_action(&mut out, a, "  ");
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    out.push_str("  (:objects\n");
    for (o, t) in &p.objects {
        let _ = writeln!(out, "    {o} - {t}");
    }
    out.push_str("  )\n");
    out.push_str("  (:init\n");
    for a in &p.init {
        let _ = writeln!(out, "    {a}");
    }
    for (f, v) in &p.init_fluents {
        let _ = writeln!(out, "    (= {f} {v})");
    }
    out.push_str("  )\n");
    let _ = writeln!(out, "  (:goal {})", print_condition(&p.goal));
    out.push_str(")\n");
    out
}
