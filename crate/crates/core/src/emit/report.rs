//! Human-readable case report.

use std::fmt::Write;

use super::EmitError;
use crate::algebra::{Constraint, ConstraintSystem};
use crate::engine::{Case, EdgeKind, Outcome, Setup};

/// The constraints a case adds to the initial system, without the ones
/// the rest imply, as display lines. `a <= x` and `x < b` on the same
/// name share a line.
pub fn case_header(case: &Case, root: &ConstraintSystem, setup: &Setup) -> Result<Vec<String>, EmitError> {
    let mut kept: Vec<Constraint> =
        case.system.constraints().iter().filter(|c| !root.contains(c)).cloned().collect();
    let mut i = 0;
    while i < kept.len() {
        let others = root
            .constraints()
            .iter()
            .chain(kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c))
            .fold(ConstraintSystem::new(), |s, c| s.push(c.clone()));
        if others.implies(&kept[i], &setup.bx, &setup.search)? {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    let order = setup.var_order();
    let mut lines: Vec<String> = kept.iter().map(|c| c.to_string_ordered(&order)).collect();
    let mut k = 0;
    while k < lines.len() {
        let upper = split_rel(&lines[k])
            .map(|(_, _, rhs)| rhs.to_string())
            .filter(|rhs| is_name(rhs))
            .and_then(|x| (0..lines.len()).find(|&j| j != k && split_rel(&lines[j]).is_some_and(|(l, _, _)| l == x)));
        if let Some(j) = upper {
            let (rel, rhs) = split_rel(&lines[j]).map(|(_, r, h)| (r.to_string(), h.to_string())).unwrap();
            lines[k] = format!("{} {rel} {rhs}", lines[k]);
            lines.remove(j);
            if j < k {
                k -= 1;
            }
        }
        k += 1;
    }
    Ok(lines)
}

fn split_rel(line: &str) -> Option<(&str, &str, &str)> {
    for rel in [" <= ", " < ", " = "] {
        if let Some((a, b)) = line.split_once(rel) {
            return Some((a, rel.trim(), b));
        }
    }
    None
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !s.starts_with(|c: char| c.is_ascii_digit())
}

/// Brace layout of a header: one line gets `{`, more get `/`, `|`, `\`.
fn braced(lines: &[String]) -> String {
    let mut out = String::new();
    match lines.len() {
        0 => out.push_str("{ true\n"),
        1 => {
            let _ = writeln!(out, "{{ {}", lines[0]);
        }
        n => {
            for (i, l) in lines.iter().enumerate() {
                let mark = if i == 0 {
                    '/'
                } else if i + 1 == n {
                    '\\'
                } else {
                    '|'
                };
                let _ = writeln!(out, "{mark} {l}");
            }
        }
    }
    out
}

pub fn emit_report(name: &str, setup: &Setup, out: &Outcome, explain: bool) -> Result<String, EmitError> {
    let root = &out.tree.root().state.c;
    let mut r = String::new();
    let _ = writeln!(
        r,
        "{name}: {} case(s), tree height {}, {} dead end(s)",
        out.cases.len(),
        out.tree.height(),
        out.tree.dead_ends
    );
    for c in &out.cases {
        let _ = writeln!(r, "\n== case {} ==", c.index);
        r.push_str(&braced(&case_header(c, root, setup)?));
        let _ = writeln!(r, "trail: {}", c.trail);
        if !c.applied.is_empty() {
            let _ = writeln!(r, "applied: {}", c.applied.join(", "));
        }
        r.push('\n');
        r.push_str(&c.g.to_source());
    }
    if explain {
        let order = setup.var_order();
        r.push_str("\n== counter values ==\n");
        for n in &out.tree.nodes {
            let how = match out.tree.incoming(n.id) {
                None => "root".to_string(),
                Some(e) => match e.kind {
                    EdgeKind::Accept => format!("accept from n{}", e.from),
                    EdgeKind::Refuse => {
                        format!("refuse from n{} by {}", e.from, e.strategy.as_deref().unwrap_or("?"))
                    }
                },
            };
            match (&n.counter, &n.value, n.case) {
                (Some(id), Some(v), _) => {
                    let _ = writeln!(r, "n{} ({how}): {id} = {}", n.id, v.to_string_ordered(&order));
                }
                (_, _, Some(i)) => {
                    let _ = writeln!(r, "n{} ({how}): case {i}", n.id);
                }
                _ => {
                    let _ = writeln!(r, "n{} ({how})", n.id);
                }
            }
        }
    }
    Ok(r)
}
