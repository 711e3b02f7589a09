use super::lexer::{read_all, Pos, SExpr};
use super::{
    ArithOp, Atom, CompOp, Condition, Domain, DurationSpec, DurativeAction, Effect, EffectItem,
    FluentTerm, FunctionDef, FunctionName, GroundAtom, GroundFluent, NumExpr, NumericOp, ObjectName,
    ParseError, ParseErrorKind, PredicateDef, PredicateName, Problem, Requirement, Term, TypeDecl,
    TypeName, TypedParam, Variable,
};
use crate::pddl::ActionName;

type Result<T> = std::result::Result<T, ParseError>;

fn fail<T>(pos: Pos, kind: ParseErrorKind) -> Result<T> {
    Err(ParseError { pos, kind })
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T> {
    fail(pos, ParseErrorKind::Syntax(msg.into()))
}

fn expect_list<'a>(expr: &'a SExpr, what: &str) -> Result<&'a [SExpr]> {
    expr.list().ok_or_else(|| ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax(format!("expected {what}")),
    })
}

fn expect_symbol<'a>(expr: &'a SExpr, what: &str) -> Result<&'a str> {
    expr.symbol().ok_or_else(|| ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax(format!("expected {what}")),
    })
}

fn ident<T: std::str::FromStr>(expr: &SExpr, what: &str) -> Result<T> {
    let s = expect_symbol(expr, what)?;
    s.parse::<T>().map_err(|_| ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax(format!("invalid {what} `{s}`")),
    })
}

fn variable(expr: &SExpr) -> Result<Variable> {
    let s = expect_symbol(expr, "variable")?;
    if !s.starts_with('?') {
        return syntax(expr.pos(), format!("expected variable, found `{s}`"));
    }
    Variable::new(s).map_err(|_| ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax(format!("invalid variable `{s}`")),
    })
}

fn number(s: &str) -> Option<f64> {
    let first = s.chars().next()?;
    if !(first.is_ascii_digit() || first == '-' || first == '.' || first == '+') {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `(define (<kind> NAME) ...)` → (name, sections)
fn define_header<'a>(text_exprs: &'a [SExpr], kind: &str) -> Result<(String, &'a [SExpr])> {
    let root = match text_exprs {
        [root] => root,
        [] => return syntax(Pos { line: 1, column: 1 }, "empty input"),
        [_, extra, ..] => return syntax(extra.pos(), "unexpected content after definition"),
    };
    let items = expect_list(root, "(define ...)")?;
    if root.head().as_deref() != Some("define") {
        return syntax(root.pos(), "expected (define ...)");
    }
    let header = items.get(1).ok_or(ParseError {
        pos: root.pos(),
        kind: ParseErrorKind::Syntax(format!("missing ({kind} NAME)")),
    })?;
    let header_items = expect_list(header, "header")?;
    if header.head().as_deref() != Some(kind) || header_items.len() != 2 {
        return syntax(header.pos(), format!("expected ({kind} NAME)"));
    }
    let name = expect_symbol(&header_items[1], "name")?.to_ascii_lowercase();
    Ok((name, &items[2..]))
}

/// `a b - t c` → [(a,t),(b,t),(c,object)]
fn typed_names(items: &[SExpr]) -> Result<Vec<(&SExpr, Option<&SExpr>)>> {
    let mut out = Vec::new();
    let mut pending: Vec<&SExpr> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.symbol() == Some("-") {
            let ty = items.get(i + 1).ok_or(ParseError {
                pos: item.pos(),
                kind: ParseErrorKind::Syntax("missing type after `-`".to_string()),
            })?;
            if ty.list().is_some() {
                return fail(ty.pos(), ParseErrorKind::Unsupported("`either` types".to_string()));
            }
            if pending.is_empty() {
                return syntax(item.pos(), "`-` without preceding names");
            }
            out.extend(pending.drain(..).map(|n| (n, Some(ty))));
            i += 2;
        } else {
            if item.list().is_some() {
                return syntax(item.pos(), "expected a name");
            }
            pending.push(item);
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| (n, None)));
    Ok(out)
}

fn declared_type(domain: &Domain, expr: Option<&SExpr>) -> Result<TypeName> {
    match expr {
        None => Ok(TypeName::object()),
        Some(e) => {
            let ty: TypeName = ident(e, "type name")?;
            if !domain.is_type_declared(&ty) {
                return fail(e.pos(), ParseErrorKind::UndeclaredType(ty.to_string()));
            }
            Ok(ty)
        }
    }
}

fn parameters(domain: &Domain, items: &[SExpr]) -> Result<Vec<TypedParam>> {
    let mut params: Vec<TypedParam> = Vec::new();
    for (name, ty) in typed_names(items)? {
        let var = variable(name)?;
        if params.iter().any(|p| p.name == var) {
            return fail(name.pos(), ParseErrorKind::Duplicate(var.to_string()));
        }
        params.push(TypedParam { name: var, ty: declared_type(domain, ty)? });
    }
    Ok(params)
}

/// Names visible while parsing a condition or effect.
struct Scope<'a> {
    domain: &'a Domain,
    vars: &'a [TypedParam],
    objects: &'a [(ObjectName, TypeName)],
}

impl Scope<'_> {
    fn term(&self, expr: &SExpr) -> Result<(Term, TypeName)> {
        let s = expect_symbol(expr, "argument")?;
        if s.starts_with('?') {
            let var = variable(expr)?;
            match self.vars.iter().find(|p| p.name == var) {
                Some(p) => Ok((Term::Var(var), p.ty.clone())),
                None => fail(expr.pos(), ParseErrorKind::UnboundVariable(var.to_string())),
            }
        } else {
            let obj: ObjectName = ident(expr, "object name")?;
            let ty = self
                .domain
                .constant_type(&obj)
                .or_else(|| self.objects.iter().find(|(o, _)| o == &obj).map(|(_, t)| t));
            match ty {
                Some(t) => Ok((Term::Obj(obj), t.clone())),
                None => fail(expr.pos(), ParseErrorKind::UndeclaredObject(obj.to_string())),
            }
        }
    }

    fn check_args(&self, name: &str, pos: Pos, params: &[TypedParam], args: &[SExpr]) -> Result<Vec<Term>> {
        if params.len() != args.len() {
            return fail(
                pos,
                ParseErrorKind::ArityMismatch { name: name.to_string(), expected: params.len(), found: args.len() },
            );
        }
        let mut out = Vec::with_capacity(args.len());
        for (param, arg) in params.iter().zip(args) {
            let (term, ty) = self.term(arg)?;
            // Objects must conform exactly; variables only need overlapping types.
            let compatible = match term {
                Term::Obj(_) => self.domain.is_subtype(&ty, &param.ty),
                Term::Var(_) => self.domain.is_subtype(&ty, &param.ty) || self.domain.is_subtype(&param.ty, &ty),
            };
            if !compatible {
                return fail(
                    arg.pos(),
                    ParseErrorKind::TypeMismatch(format!("`{term}` of type {ty} used where {} expected", param.ty)),
                );
            }
            out.push(term);
        }
        Ok(out)
    }

    fn atom(&self, expr: &SExpr) -> Result<Atom> {
        let items = expect_list(expr, "atom")?;
        let head = items.first().ok_or(ParseError {
            pos: expr.pos(),
            kind: ParseErrorKind::Syntax("empty atom".to_string()),
        })?;
        let name: PredicateName = ident(head, "predicate name")?;
        let def = self
            .domain
            .predicate(&name)
            .ok_or_else(|| ParseError { pos: head.pos(), kind: ParseErrorKind::UndeclaredPredicate(name.to_string()) })?;
        let args = self.check_args(name.as_str(), expr.pos(), &def.params, &items[1..])?;
        Ok(Atom::new(name, args))
    }

    fn fluent(&self, expr: &SExpr) -> Result<FluentTerm> {
        let items = expect_list(expr, "function term")?;
        let head = items.first().ok_or(ParseError {
            pos: expr.pos(),
            kind: ParseErrorKind::Syntax("empty function term".to_string()),
        })?;
        let name: FunctionName = ident(head, "function name")?;
        let def = self
            .domain
            .function(&name)
            .ok_or_else(|| ParseError { pos: head.pos(), kind: ParseErrorKind::UndeclaredFunction(name.to_string()) })?;
        let args = self.check_args(name.as_str(), expr.pos(), &def.params, &items[1..])?;
        Ok(FluentTerm { function: name, args })
    }

    fn num_expr(&self, expr: &SExpr) -> Result<NumExpr> {
        match expr {
            SExpr::Symbol(s, pos) => match number(s) {
                Some(v) => Ok(NumExpr::Number(v)),
                None => syntax(*pos, format!("expected number or function term, found `{s}`")),
            },
            SExpr::List(items, pos) => {
                let op = match expr.head().as_deref() {
                    Some("+") => Some(ArithOp::Add),
                    Some("-") => Some(ArithOp::Sub),
                    Some("*") => Some(ArithOp::Mul),
                    Some("/") => Some(ArithOp::Div),
                    _ => None,
                };
                match op {
                    Some(op) if items.len() == 3 => Ok(NumExpr::Binary(
                        op,
                        Box::new(self.num_expr(&items[1])?),
                        Box::new(self.num_expr(&items[2])?),
                    )),
                    Some(_) => syntax(*pos, "arithmetic operators take exactly two operands"),
                    None => Ok(NumExpr::Fluent(self.fluent(expr)?)),
                }
            }
        }
    }

    fn condition(&self, expr: &SExpr) -> Result<Condition> {
        let items = expect_list(expr, "condition")?;
        if items.is_empty() {
            return Ok(Condition::empty());
        }
        let head = expr.head().unwrap_or_default();
        match head.as_str() {
            "and" => Ok(Condition::conjunction(
                items[1..].iter().map(|c| self.condition(c)).collect::<Result<Vec<_>>>()?,
            )),
            "not" => {
                if items.len() != 2 {
                    return syntax(expr.pos(), "`not` takes one argument");
                }
                let inner = self.condition(&items[1])?;
                inner.negate().map_err(|m| ParseError { pos: expr.pos(), kind: ParseErrorKind::Unsupported(m) })
            }
            "<" | "<=" | "=" | ">=" | ">" => {
                if items.len() != 3 {
                    return syntax(expr.pos(), "comparison takes two operands");
                }
                let op = match head.as_str() {
                    "<" => CompOp::Lt,
                    "<=" => CompOp::Le,
                    "=" => CompOp::Eq,
                    ">=" => CompOp::Ge,
                    _ => CompOp::Gt,
                };
                Ok(Condition::Compare(op, self.num_expr(&items[1])?, self.num_expr(&items[2])?))
            }
            "or" | "imply" | "forall" | "exists" | "when" | "preference" => {
                fail(expr.pos(), ParseErrorKind::Unsupported(format!("`{head}` conditions")))
            }
            _ => Ok(Condition::Atom(self.atom(expr)?)),
        }
    }

    fn effect_items(&self, expr: &SExpr, out: &mut Vec<EffectItem>) -> Result<()> {
        let items = expect_list(expr, "effect")?;
        if items.is_empty() {
            return Ok(());
        }
        let head = expr.head().unwrap_or_default();
        match head.as_str() {
            "and" => items[1..].iter().try_for_each(|e| self.effect_items(e, out)),
            "not" => {
                if items.len() != 2 {
                    return syntax(expr.pos(), "`not` takes one argument");
                }
                out.push(EffectItem::Del(self.atom(&items[1])?));
                Ok(())
            }
            "assign" | "increase" | "decrease" => {
                if items.len() != 3 {
                    return syntax(expr.pos(), format!("`{head}` takes two operands"));
                }
                let op = match head.as_str() {
                    "assign" => NumericOp::Assign,
                    "increase" => NumericOp::Increase,
                    _ => NumericOp::Decrease,
                };
                out.push(EffectItem::Numeric { op, fluent: self.fluent(&items[1])?, value: self.num_expr(&items[2])? });
                Ok(())
            }
            "forall" | "when" | "scale-up" | "scale-down" => {
                fail(expr.pos(), ParseErrorKind::Unsupported(format!("`{head}` effects")))
            }
            _ => {
                out.push(EffectItem::Add(self.atom(expr)?));
                Ok(())
            }
        }
    }

    fn effect(&self, expr: &SExpr) -> Result<Effect> {
        let mut items = Vec::new();
        self.effect_items(expr, &mut items)?;
        let effect = Effect::new(items);
        for add in effect.adds() {
            if effect.dels().any(|d| d == add) {
                return syntax(expr.pos(), format!("atom {add} is both added and deleted"));
            }
        }
        Ok(effect)
    }
}

#[derive(Clone, Copy)]
enum Timing {
    Start,
    OverAll,
    End,
}

fn timing_of(expr: &SExpr) -> Option<(Timing, &SExpr)> {
    let items = expr.list()?;
    let first = items.first()?.symbol()?.to_ascii_lowercase();
    let second = items.get(1)?.symbol()?.to_ascii_lowercase();
    let timing = match (first.as_str(), second.as_str()) {
        ("at", "start") => Timing::Start,
        ("at", "end") => Timing::End,
        ("over", "all") => Timing::OverAll,
        _ => return None,
    };
    (items.len() == 3).then(|| (timing, &items[2]))
}

fn timed_parts<'a>(expr: &'a SExpr, out: &mut Vec<(Timing, &'a SExpr)>) -> Result<()> {
    let items = expect_list(expr, "timed expression")?;
    if items.is_empty() {
        return Ok(());
    }
    if expr.head().as_deref() == Some("and") {
        return items[1..].iter().try_for_each(|e| timed_parts(e, out));
    }
    match timing_of(expr) {
        Some(part) => {
            out.push(part);
            Ok(())
        }
        None => syntax(expr.pos(), "durative action conditions and effects must be wrapped in `at start`, `over all` or `at end`"),
    }
}

fn durative_action(domain: &Domain, expr: &SExpr) -> Result<DurativeAction> {
    let items = expect_list(expr, "durative action")?;
    let name_expr = items.get(1).ok_or(ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax("missing action name".to_string()),
    })?;
    let name: ActionName = ident(name_expr, "action name")?;
    let mut params = None;
    let mut duration_expr = None;
    let mut condition_expr = None;
    let mut effect_expr = None;
    let mut rest = &items[2..];
    while let [key, value, tail @ ..] = rest {
        let key_name = expect_symbol(key, "action keyword")?.to_ascii_lowercase();
        match key_name.as_str() {
            ":parameters" => params = Some(parameters(domain, expect_list(value, "parameter list")?)?),
            ":duration" => duration_expr = Some(value),
            ":condition" => condition_expr = Some(value),
            ":effect" => effect_expr = Some(value),
            other => return syntax(key.pos(), format!("unexpected keyword `{other}` in action")),
        }
        rest = tail;
    }
    if let [dangling, ..] = rest {
        return syntax(dangling.pos(), "keyword without value");
    }
    let params = params.unwrap_or_default();
    let scope = Scope { domain, vars: &params, objects: &[] };

    let duration_expr = duration_expr.ok_or(ParseError {
        pos: expr.pos(),
        kind: ParseErrorKind::Syntax(format!("action `{name}` has no :duration")),
    })?;
    let duration = {
        let d = expect_list(duration_expr, "(= ?duration ...)")?;
        let ok_head = duration_expr.head().as_deref() == Some("=")
            && d.len() == 3
            && d[1].symbol().map(str::to_ascii_lowercase).as_deref() == Some("?duration");
        if !ok_head {
            return fail(
                duration_expr.pos(),
                ParseErrorKind::Unsupported("only `(= ?duration <constant|fluent>)` durations".to_string()),
            );
        }
        match &d[2] {
            SExpr::Symbol(s, pos) => match number(s) {
                Some(v) if v > 0.0 => DurationSpec::Constant(v),
                _ => return syntax(*pos, format!("invalid duration `{s}`")),
            },
            list => DurationSpec::Fluent(scope.fluent(list)?),
        }
    };

    let mut starts = Vec::new();
    let mut overalls = Vec::new();
    let mut ends = Vec::new();
    if let Some(c) = condition_expr {
        let mut parts = Vec::new();
        timed_parts(c, &mut parts)?;
        for (timing, body) in parts {
            let cond = scope.condition(body)?;
            match timing {
                Timing::Start => starts.push(cond),
                Timing::OverAll => overalls.push(cond),
                Timing::End => ends.push(cond),
            }
        }
    }
    let mut eff_start = Vec::new();
    let mut eff_end = Vec::new();
    if let Some(e) = effect_expr {
        let mut parts = Vec::new();
        timed_parts(e, &mut parts)?;
        for (timing, body) in parts {
            let effect = scope.effect(body)?;
            match timing {
                Timing::Start => eff_start.extend(effect.items),
                Timing::End => eff_end.extend(effect.items),
                Timing::OverAll => {
                    return fail(body.pos(), ParseErrorKind::Unsupported("`over all` effects".to_string()))
                }
            }
        }
    }
    let eff_start = Effect::new(eff_start);
    let eff_end = Effect::new(eff_end);
    for effect in [&eff_start, &eff_end] {
        for add in effect.adds() {
            if effect.dels().any(|d| d == add) {
                return syntax(expr.pos(), format!("atom {add} is both added and deleted at the same time point"));
            }
        }
    }

    Ok(DurativeAction {
        name,
        params,
        duration,
        cond_start: Condition::conjunction(starts),
        cond_overall: Condition::conjunction(overalls),
        cond_end: Condition::conjunction(ends),
        eff_start,
        eff_end,
    })
}

fn check_type_hierarchy(types: &[TypeDecl], positions: &[Pos]) -> Result<()> {
    for (decl, pos) in types.iter().zip(positions) {
        let mut current = &decl.parent;
        let mut steps = 0;
        while current.as_str() != "object" {
            if current == &decl.name || steps > types.len() {
                return syntax(*pos, format!("cyclic type hierarchy at `{}`", decl.name));
            }
            match types.iter().find(|t| &t.name == current) {
                Some(t) => current = &t.parent,
                None => return fail(*pos, ParseErrorKind::UndeclaredType(current.to_string())),
            }
            steps += 1;
        }
    }
    Ok(())
}

/// Parses a PDDL domain in the supported subset.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let exprs = read_all(text)?;
    let (name, sections) = define_header(&exprs, "domain")?;
    let mut domain = Domain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
    };

    // Declarations are processed before actions regardless of textual order.
    let mut action_exprs = Vec::new();
    let mut by_kind: Vec<(String, &SExpr)> = Vec::new();
    for section in sections {
        let head = section.head().ok_or(ParseError {
            pos: section.pos(),
            kind: ParseErrorKind::Syntax("expected a section".to_string()),
        })?;
        match head.as_str() {
            ":durative-action" => action_exprs.push(section),
            ":action" => {
                return fail(section.pos(), ParseErrorKind::Unsupported("instantaneous `:action`; use `:durative-action`".to_string()))
            }
            ":requirements" | ":types" | ":constants" | ":predicates" | ":functions" => {
                if by_kind.iter().any(|(k, _)| k == &head) {
                    return fail(section.pos(), ParseErrorKind::Duplicate(head));
                }
                by_kind.push((head, section));
            }
            other => return syntax(section.pos(), format!("unknown domain section `{other}`")),
        }
    }
    let section = |kind: &str| by_kind.iter().find(|(k, _)| k == kind).map(|(_, e)| &e.list().expect("list")[1..]);

    if let Some(items) = section(":requirements") {
        for item in items {
            let kw = expect_symbol(item, "requirement")?;
            let req = Requirement::from_keyword(kw)
                .ok_or_else(|| ParseError { pos: item.pos(), kind: ParseErrorKind::UnknownRequirement(kw.to_ascii_lowercase()) })?;
            if !domain.requirements.contains(&req) {
                domain.requirements.push(req);
            }
        }
    }

    if let Some(items) = section(":types") {
        let mut positions = Vec::new();
        for (name, parent) in typed_names(items)? {
            let ty: TypeName = ident(name, "type name")?;
            let parent = match parent {
                Some(p) => ident(p, "type name")?,
                None => TypeName::object(),
            };
            if ty.as_str() == "object" {
                if parent.as_str() != "object" {
                    return syntax(name.pos(), "`object` cannot have a parent");
                }
                continue;
            }
            if domain.types.iter().any(|t| t.name == ty) {
                return fail(name.pos(), ParseErrorKind::Duplicate(ty.to_string()));
            }
            domain.types.push(TypeDecl { name: ty, parent });
            positions.push(name.pos());
        }
        check_type_hierarchy(&domain.types, &positions)?;
    }

    if let Some(items) = section(":constants") {
        for (name, ty) in typed_names(items)? {
            let obj: ObjectName = ident(name, "constant name")?;
            let ty = declared_type(&domain, ty)?;
            if domain.constants.iter().any(|(c, _)| c == &obj) {
                return fail(name.pos(), ParseErrorKind::Duplicate(obj.to_string()));
            }
            domain.constants.push((obj, ty));
        }
    }

    if let Some(items) = section(":predicates") {
        for item in items {
            let parts = expect_list(item, "predicate declaration")?;
            let head = parts.first().ok_or(ParseError {
                pos: item.pos(),
                kind: ParseErrorKind::Syntax("empty predicate declaration".to_string()),
            })?;
            let name: PredicateName = ident(head, "predicate name")?;
            if domain.predicate(&name).is_some() {
                return fail(head.pos(), ParseErrorKind::Duplicate(name.to_string()));
            }
            let params = parameters(&domain, &parts[1..])?;
            domain.predicates.push(PredicateDef { name, params });
        }
    }

    if let Some(items) = section(":functions") {
        let mut i = 0;
        while i < items.len() {
            let item = &items[i];
            let parts = expect_list(item, "function declaration")?;
            let head = parts.first().ok_or(ParseError {
                pos: item.pos(),
                kind: ParseErrorKind::Syntax("empty function declaration".to_string()),
            })?;
            let name: FunctionName = ident(head, "function name")?;
            if domain.function(&name).is_some() {
                return fail(head.pos(), ParseErrorKind::Duplicate(name.to_string()));
            }
            let params = parameters(&domain, &parts[1..])?;
            domain.functions.push(FunctionDef { name, params });
            i += 1;
            // optional `- number` result type
            if items.get(i).and_then(SExpr::symbol) == Some("-") {
                match items.get(i + 1).and_then(SExpr::symbol).map(str::to_ascii_lowercase).as_deref() {
                    Some("number") => i += 2,
                    _ => return fail(items[i].pos(), ParseErrorKind::Unsupported("non-numeric functions".to_string())),
                }
            }
        }
    }

    for expr in action_exprs {
        let action = durative_action(&domain, expr)?;
        if domain.action(&action.name).is_some() {
            return fail(expr.pos(), ParseErrorKind::Duplicate(action.name.to_string()));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

/// Parses a problem file against an already-validated domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem> {
    let exprs = read_all(text)?;
    let (name, sections) = define_header(&exprs, "problem")?;
    let mut problem = Problem {
        name,
        domain_name: domain.name.clone(),
        objects: Vec::new(),
        init: Vec::new(),
        init_fluents: Vec::new(),
        goal: Condition::empty(),
    };
    let mut init_expr = None;
    let mut goal_expr = None;
    for section in sections {
        let items = expect_list(section, "problem section")?;
        match section.head().as_deref() {
            Some(":domain") => {
                let d = items.get(1).ok_or(ParseError {
                    pos: section.pos(),
                    kind: ParseErrorKind::Syntax("missing domain name".to_string()),
                })?;
                problem.domain_name = expect_symbol(d, "domain name")?.to_ascii_lowercase();
            }
            Some(":objects") => {
                for (name, ty) in typed_names(&items[1..])? {
                    let obj: ObjectName = ident(name, "object name")?;
                    let ty = declared_type(domain, ty)?;
                    if problem.objects.iter().any(|(o, _)| o == &obj) || domain.constant_type(&obj).is_some() {
                        return fail(name.pos(), ParseErrorKind::Duplicate(obj.to_string()));
                    }
                    problem.objects.push((obj, ty));
                }
            }
            Some(":init") => init_expr = Some(&items[1..]),
            Some(":goal") => {
                if items.len() != 2 {
                    return syntax(section.pos(), "(:goal CONDITION) expected");
                }
                goal_expr = Some(&items[1]);
            }
            _ => return syntax(section.pos(), "unknown problem section"),
        }
    }
    let scope = Scope { domain, vars: &[], objects: &problem.objects };
    if let Some(items) = init_expr {
        for item in items {
            if item.head().as_deref() == Some("=") {
                let parts = expect_list(item, "fluent assignment")?;
                if parts.len() != 3 {
                    return syntax(item.pos(), "(= (f args) value) expected");
                }
                let fluent = scope.fluent(&parts[1])?;
                let value = match parts[2].symbol().and_then(number) {
                    Some(v) => v,
                    None => return syntax(parts[2].pos(), "fluent value must be a number"),
                };
                let key = GroundFluent {
                    function: fluent.function,
                    args: fluent.args.into_iter().filter_map(|t| t.as_object().cloned()).collect(),
                };
                match scope_fluent_index(&problem.init_fluents, &key) {
                    Some(i) => problem.init_fluents[i].1 = value,
                    None => problem.init_fluents.push((key, value)),
                }
            } else {
                let atom = scope.atom(item)?;
                let ground: GroundAtom = atom.to_ground().expect("no variables in scope");
                if !problem.init.contains(&ground) {
                    problem.init.push(ground);
                }
            }
        }
    }
    if let Some(goal) = goal_expr {
        problem.goal = Condition::conjunction([scope.condition(goal)?]);
    }
    Ok(problem)
}

fn single_expr(text: &str) -> Result<SExpr> {
    let mut exprs = read_all(text)?;
    match exprs.len() {
        1 => Ok(exprs.pop().unwrap()),
        0 => fail(Pos { line: 1, column: 1 }, ParseErrorKind::Syntax("expression expected".to_string())),
        _ => syntax(exprs[1].pos(), "a single expression expected"),
    }
}

/// Parses a ground condition, e.g. a goal, over the given objects.
pub fn parse_condition(text: &str, domain: &Domain, objects: &[(ObjectName, TypeName)]) -> Result<Condition> {
    let expr = single_expr(text)?;
    let scope = Scope { domain, vars: &[], objects };
    Ok(Condition::conjunction([scope.condition(&expr)?]))
}

/// Parses a ground atom such as `(robot_at r1 kitchen)`.
pub fn parse_ground_atom(text: &str, domain: &Domain, objects: &[(ObjectName, TypeName)]) -> Result<GroundAtom> {
    let expr = single_expr(text)?;
    let scope = Scope { domain, vars: &[], objects };
    Ok(scope.atom(&expr)?.to_ground().expect("no variables in scope"))
}

/// Parses `(= (f args) value)`.
pub fn parse_fluent_assignment(
    text: &str,
    domain: &Domain,
    objects: &[(ObjectName, TypeName)],
) -> Result<(GroundFluent, f64)> {
    let expr = single_expr(text)?;
    let parts = expect_list(&expr, "fluent assignment")?;
    if parts.len() != 3 || expr.head().as_deref() != Some("=") {
        return syntax(expr.pos(), "(= (f args) value) expected");
    }
    let scope = Scope { domain, vars: &[], objects };
    let fluent = scope.fluent(&parts[1])?;
    let Some(value) = parts[2].symbol().and_then(number) else {
        return syntax(parts[2].pos(), "fluent value must be a number");
    };
    let key = GroundFluent {
        function: fluent.function,
        args: fluent.args.into_iter().filter_map(|t| t.as_object().cloned()).collect(),
    };
    Ok((key, value))
}

fn scope_fluent_index(fluents: &[(GroundFluent, f64)], key: &GroundFluent) -> Option<usize> {
    fluents.iter().position(|(k, _)| k == key)
}
