use super::Domain;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("no domains to merge")]
    Empty,
    #[error("conflicting definitions of {kind} `{name}`")]
    Conflict { kind: &'static str, name: String },
}

fn conflict(kind: &'static str, name: impl ToString) -> MergeError {
    MergeError::Conflict { kind, name: name.to_string() }
}

/// Unions several domains into one.
///
/// Identical re-declarations collapse; the same name declared with a different
/// signature or body is a conflict. The result keeps the first domain's name
/// and first-seen declaration order, so merging is associative and idempotent.
pub fn merge_domains(domains: &[Domain]) -> Result<Domain, MergeError> {
    let (first, rest) = domains.split_first().ok_or(MergeError::Empty)?;
    let mut merged = first.clone();
    for d in rest {
        for req in &d.requirements {
            if !merged.requirements.contains(req) {
                merged.requirements.push(*req);
            }
        }
        for t in &d.types {
            match merged.types.iter().find(|m| m.name == t.name) {
                Some(existing) if existing.parent != t.parent => return Err(conflict("type", &t.name)),
                Some(_) => {}
                None => merged.types.push(t.clone()),
            }
        }
        for (c, ty) in &d.constants {
            match merged.constant_type(c) {
                Some(existing) if existing != ty => return Err(conflict("constant", c)),
                Some(_) => {}
                None => merged.constants.push((c.clone(), ty.clone())),
            }
        }
        for p in &d.predicates {
            match merged.predicate(&p.name) {
                Some(existing) if !existing.same_signature(p) => return Err(conflict("predicate", &p.name)),
                Some(_) => {}
                None => merged.predicates.push(p.clone()),
            }
        }
        for f in &d.functions {
            match merged.function(&f.name) {
                Some(existing) if !existing.same_signature(f) => return Err(conflict("function", &f.name)),
                Some(_) => {}
                None => merged.functions.push(f.clone()),
            }
        }
        for a in &d.actions {
            match merged.action(&a.name) {
                Some(existing) if existing != a => return Err(conflict("action", &a.name)),
                Some(_) => {}
                None => merged.actions.push(a.clone()),
            }
        }
    }
    Ok(merged)
}
