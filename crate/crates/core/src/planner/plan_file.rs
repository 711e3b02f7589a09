use std::collections::BTreeMap;

use crate::pddl::{ActionName, Domain, DurationSpec, ObjectName};

use super::{Plan, PlanItem};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("plan line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> PlanParseError {
    PlanParseError { line, message: message.into() }
}

struct RawItem {
    line: usize,
    time: f64,
    action: ActionName,
    args: Vec<ObjectName>,
    duration: Option<f64>,
}

fn parse_line(line_no: usize, line: &str) -> Result<RawItem, PlanParseError> {
    let open = line.find('(').ok_or_else(|| err(line_no, "missing `(`"))?;
    let close = line[open..].find(')').map(|i| i + open).ok_or_else(|| err(line_no, "missing `)`"))?;
    let prefix = line[..open].trim();
    let prefix = prefix.strip_suffix(':').unwrap_or(prefix).trim();
    let time: f64 = prefix.parse().map_err(|_| err(line_no, format!("invalid time `{prefix}`")))?;
    if !(time >= 0.0) || !time.is_finite() {
        return Err(err(line_no, format!("invalid time `{prefix}`")));
    }
    let mut words = line[open + 1..close].split_whitespace();
    let action = words
        .next()
        .ok_or_else(|| err(line_no, "empty action"))?
        .parse::<ActionName>()
        .map_err(|e| err(line_no, e.to_string()))?;
    let args = words.map(|w| w.parse::<ObjectName>().map_err(|e| err(line_no, e.to_string()))).collect::<Result<Vec<_>, _>>()?;
    let rest = line[close + 1..].trim();
    let duration = if rest.is_empty() {
        None
    } else {
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| err(line_no, format!("unexpected trailing text `{rest}`")))?;
        let d: f64 = inner.trim().parse().map_err(|_| err(line_no, format!("invalid duration `{inner}`")))?;
        if !(d > 0.0) || !d.is_finite() {
            return Err(err(line_no, format!("invalid duration `{inner}`")));
        }
        Some(d)
    };
    Ok(RawItem { line: line_no, time, action, args, duration })
}

/// Groups times at microsecond resolution.
fn micros(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

/// Parses a plan in either the tab dialect (`0\t(move a b)`) or the
/// POPF-style dialect (`0.000: (move a b)  [5.000]`).
///
/// Items without a bracketed duration get the gap to the next strictly later
/// timestamp; items in the last timestamp group get the most frequent gap.
pub fn parse_plan_file(text: &str, domain: &Domain) -> Result<Plan, PlanParseError> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let item = parse_line(line_no, content)?;
        let schema = domain
            .action(&item.action)
            .ok_or_else(|| err(line_no, format!("unknown action `{}`", item.action)))?;
        if schema.arity() != item.args.len() {
            return Err(err(
                line_no,
                format!("`{}` expects {} argument(s), found {}", item.action, schema.arity(), item.args.len()),
            ));
        }
        raw.push(item);
    }

    let mut stamps: Vec<i64> = raw.iter().map(|r| micros(r.time)).collect();
    stamps.sort_unstable();
    stamps.dedup();
    let mut gap_counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in stamps.windows(2) {
        *gap_counts.entry(w[1] - w[0]).or_default() += 1;
    }
    // most frequent gap, smallest on ties
    let modal_gap = gap_counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(g, _)| *g);

    let mut items = Vec::with_capacity(raw.len());
    for r in raw {
        let duration = match r.duration {
            Some(d) => d,
            None => {
                let t = micros(r.time);
                let next = stamps.iter().find(|&&s| s > t);
                match (next, modal_gap) {
                    (Some(n), _) => (n - t) as f64 / 1e6,
                    (None, Some(g)) => g as f64 / 1e6,
                    (None, None) => match &domain.action(&r.action).expect("checked above").duration {
                        DurationSpec::Constant(d) => *d,
                        DurationSpec::Fluent(_) => {
                            return Err(err(r.line, "cannot infer a duration for a single-timestamp plan"))
                        }
                    },
                }
            }
        };
        items.push(PlanItem { time: r.time, action: r.action, args: r.args, duration });
    }
    Ok(Plan::new(items))
}

/// Lenient variant for solver output: lines that do not start with a
/// timestamp are skipped.
pub(crate) fn parse_solver_output(text: &str, domain: &Domain) -> Result<Plan, PlanParseError> {
    let kept: Vec<String> = text
        .lines()
        .map(|l| {
            let first = l.split_whitespace().next().unwrap_or("");
            let first = first.strip_suffix(':').unwrap_or(first);
            if first.parse::<f64>().is_ok() && l.contains('(') {
                l.to_string()
            } else {
                String::new()
            }
        })
        .collect();
    parse_plan_file(&kept.join("\n"), domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    fn domain() -> Domain {
        parse_domain(include_str!("../../fixtures/assembly_domain.pddl")).unwrap()
    }

    #[test]
    fn listing_has_21_items() {
        let plan = parse_plan_file(include_str!("../../fixtures/listing1.plan"), &domain()).unwrap();
        assert_eq!(plan.items.len(), 21);
        let first = &plan.items[0];
        assert_eq!(first.time, 0.0);
        assert_eq!(first.action.as_str(), "move");
        let args: Vec<&str> = first.args.iter().map(|a| a.as_str()).collect();
        assert_eq!(args, ["rb1", "assembly_zone", "body_car_zone"]);
    }

    #[test]
    fn missing_durations_are_inferred_from_gaps() {
        let plan = parse_plan_file(include_str!("../../fixtures/listing1.plan"), &domain()).unwrap();
        let at_5001 = plan.items.iter().find(|i| i.time == 5.001).unwrap();
        assert!((at_5001.duration - 5.001).abs() < 1e-9);
        // last group takes the modal gap
        let last = plan.items.last().unwrap();
        assert_eq!(last.time, 40.008);
        assert!((last.duration - 5.001).abs() < 1e-9);
    }

    #[test]
    fn popf_dialect_with_duration() {
        let plan = parse_plan_file("0.000: (move rb1 a b)  [5.000]", &domain()).unwrap();
        assert_eq!(plan.items[0].time, 0.0);
        assert_eq!(plan.items[0].duration, 5.0);
    }

    #[test]
    fn single_timestamp_falls_back_to_domain_duration() {
        let plan = parse_plan_file("0\t(move rb1 a b)", &domain()).unwrap();
        assert_eq!(plan.items[0].duration, 5.0);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let d = domain();
        let e = parse_plan_file("0: (move rb1 a b)\nbogus", &d).unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_plan_file("\n0: (fly rb1)", &d).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("unknown action"));
        let e = parse_plan_file("0: (move rb1 a)", &d).unwrap_err();
        assert!(e.message.contains("expects 3"));
    }

    #[test]
    fn solver_chatter_is_skipped() {
        let out = "; Plan found\n; States evaluated: 12\n0.000: (move rb1 a b)  [5.000]\n";
        let plan = parse_solver_output(out, &domain()).unwrap();
        assert_eq!(plan.items.len(), 1);
    }
}
