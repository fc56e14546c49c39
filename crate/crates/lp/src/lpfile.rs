//! LP interchange format.
//!
//! ```text
//! Minimize
//!  obj: 1.0000000000000000e0 x + 2.0000000000000000e0 y
//! Subject To
//!  c1: 1.0000000000000000e0 x - 1.0000000000000000e0 y >= 1.0000000000000000e0
//! Bounds
//!  -inf <= y <= 4.0000000000000000e0
//! Binary
//!  z
//! End
//! ```
//!
//! Numbers are written with 17 significant digits so that a write/read
//! cycle reproduces every coefficient bit for bit. One constraint per line.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::ParseError;
use crate::model::{LinExpr, Model, Sense, VarId, VarKind};

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

fn write_expr(out: &mut String, model: &Model, expr: &LinExpr) {
    let mut first = true;
    for &(v, c) in expr.terms() {
        let name = &model.variable(v).name;
        if first {
            if c < 0.0 {
                let _ = write!(out, "- {} {}", num(-c), name);
            } else {
                let _ = write!(out, "{} {}", num(c), name);
            }
            first = false;
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", num(-c), name);
        } else {
            let _ = write!(out, " + {} {}", num(c), name);
        }
    }
    let k = expr.constant_term();
    if first {
        out.push_str(&num(k));
        if k == 0.0 {
            // an empty objective is written as the literal 0
            out.truncate(out.len() - num(k).len());
            out.push('0');
        }
    } else if k != 0.0 {
        let _ = write!(out, " {} {}", if k < 0.0 { '-' } else { '+' }, num(k.abs()));
    }
}

/// Renders `model` in the LP interchange format.
pub fn emit_model_file(model: &Model) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj: ");
    write_expr(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for con in model.constraints() {
        let _ = write!(out, " {}: ", con.name);
        if con.expr.is_empty() {
            out.push('0');
        } else {
            write_expr(&mut out, model, &con.expr);
        }
        let _ = writeln!(out, " {} {}", con.sense.symbol(), num(con.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables() {
        let default = match v.kind {
            VarKind::Binary => v.lb == 0.0 && v.ub == 1.0,
            VarKind::Continuous => v.lb == 0.0 && v.ub == f64::INFINITY,
        };
        if default {
            // still listed: the Bounds section fixes the variable order and
            // keeps unreferenced variables
            if v.kind == VarKind::Continuous {
                let _ = writeln!(out, " {} >= 0", v.name);
            } else {
                let _ = writeln!(out, " 0 <= {} <= 1", v.name);
            }
            continue;
        }
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lb), v.name, num(v.ub));
        }
    }
    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for b in binaries {
            let _ = writeln!(out, " {}", b);
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok(),
    }
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

struct Builder {
    model: Model,
    pending_bounds: Vec<(String, f64, f64)>,
    binaries: Vec<String>,
}

impl Builder {
    fn var(&mut self, name: &str) -> Result<VarId, ParseError> {
        if let Some(v) = self.model.var_by_name(name) {
            return Ok(v);
        }
        Ok(self.model.add_variable(name, VarKind::Continuous, 0.0, f64::INFINITY)?)
    }

    /// Parses `[-] [coef] var (+|-) ...` into an expression.
    fn expr(&mut self, toks: &[&str], line: usize) -> Result<LinExpr, ParseError> {
        let err = |msg: &str| ParseError::Syntax { line, msg: msg.to_string() };
        let mut e = LinExpr::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for &t in toks {
            match t {
                "+" => {
                    if let Some(c) = coef.take() {
                        e.add_constant(sign * c);
                    }
                    sign = 1.0;
                }
                "-" => {
                    if let Some(c) = coef.take() {
                        e.add_constant(sign * c);
                    }
                    sign = -1.0;
                }
                _ => {
                    if let Some(x) = parse_num(t) {
                        if coef.is_some() {
                            return Err(err("two consecutive numbers"));
                        }
                        coef = Some(x);
                    } else {
                        let v = self.var(t)?;
                        e.add_term(v, sign * coef.take().unwrap_or(1.0));
                        sign = 1.0;
                    }
                }
            }
        }
        if let Some(c) = coef {
            e.add_constant(sign * c);
        }
        Ok(e)
    }
}

/// Parses the LP interchange format back into a model.
pub fn parse_model_file(text: &str) -> Result<Model, ParseError> {
    let mut b = Builder { model: Model::new(), pending_bounds: Vec::new(), binaries: Vec::new() };
    let mut section = Section::None;
    let mut objective = LinExpr::new();
    let mut anon = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            section = s;
            continue;
        }
        let err = |msg: String| ParseError::Syntax { line: line_no, msg };
        match section {
            Section::None => return Err(err(format!("content before a section header: `{line}`"))),
            Section::End => return Err(err("content after End".into())),
            Section::Objective => {
                let body = line.split_once(':').map_or(line, |(_, r)| r);
                let toks: Vec<&str> = body.split_whitespace().collect();
                let e = b.expr(&toks, line_no)?;
                objective.add_scaled(&e, 1.0);
            }
            Section::Constraints => {
                let (name, body) = match line.split_once(':') {
                    Some((n, r)) => (n.trim().to_string(), r),
                    None => {
                        anon += 1;
                        (format!("R{anon}"), line)
                    }
                };
                let toks: Vec<&str> = body.split_whitespace().collect();
                let pos = toks
                    .iter()
                    .position(|t| parse_sense(t).is_some())
                    .ok_or_else(|| err(format!("constraint `{name}` has no sense")))?;
                let sense = parse_sense(toks[pos]).unwrap();
                let rhs_toks = &toks[pos + 1..];
                let rhs = match rhs_toks {
                    [t] => parse_num(t),
                    ["-", t] => parse_num(t).map(|x| -x),
                    _ => None,
                }
                .ok_or_else(|| err(format!("constraint `{name}` has a malformed right-hand side")))?;
                let e = b.expr(&toks[..pos], line_no)?;
                b.model.add_constraint(e, sense, rhs, name)?;
            }
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                match toks.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        b.var(name)?;
                        b.pending_bounds.push((name.to_string(), f64::NEG_INFINITY, f64::INFINITY));
                    }
                    [lo, "<=", name, "<=", hi] => {
                        let lo = parse_num(lo).ok_or_else(|| err("bad lower bound".into()))?;
                        let hi = parse_num(hi).ok_or_else(|| err("bad upper bound".into()))?;
                        b.var(name)?;
                        b.pending_bounds.push((name.to_string(), lo, hi));
                    }
                    [name, op, val] => {
                        let x = parse_num(val).ok_or_else(|| err("bad bound value".into()))?;
                        let v = b.var(name)?;
                        let cur = b.model.variable(v);
                        let (lo, hi) = match *op {
                            ">=" => (x, cur.ub),
                            "<=" => (cur.lb, x),
                            "=" => (x, x),
                            _ => return Err(err(format!("bad bound operator `{op}`"))),
                        };
                        b.pending_bounds.push((name.to_string(), lo, hi));
                    }
                    _ => return Err(err(format!("unrecognized bound `{line}`"))),
                }
            }
            Section::Binary => {
                for t in line.split_whitespace() {
                    b.var(t)?;
                    b.binaries.push(t.to_string());
                }
            }
        }
    }
    // Binary marking needs fresh variables, so rebuild with kinds and bounds
    // resolved. Variables listed under Bounds come first in listing order,
    // the rest keep their first-appearance order.
    let binaries: HashSet<&str> = b.binaries.iter().map(String::as_str).collect();
    let mut bounds: HashMap<&str, (f64, f64)> = HashMap::new();
    let mut order: Vec<VarId> = Vec::with_capacity(b.model.num_vars());
    let mut placed = vec![false; b.model.num_vars()];
    for (n, l, h) in &b.pending_bounds {
        bounds.insert(n.as_str(), (*l, *h));
        let v = b.model.var_by_name(n).expect("bound names are registered");
        if !placed[v.index()] {
            placed[v.index()] = true;
            order.push(v);
        }
    }
    order.extend((0..b.model.num_vars()).filter(|&i| !placed[i]).map(VarId));
    let mut new_id = vec![VarId(0); b.model.num_vars()];
    let mut out = Model::new();
    for v in order {
        let var = b.model.variable(v);
        let is_bin = binaries.contains(var.name.as_str());
        let default = if is_bin { (0.0, 1.0) } else { (var.lb, var.ub) };
        let (lo, hi) = bounds.get(var.name.as_str()).copied().unwrap_or(default);
        let kind = if is_bin { VarKind::Binary } else { VarKind::Continuous };
        new_id[v.index()] = out.add_variable(var.name.clone(), kind, lo, hi)?;
    }
    let remap = |e: &LinExpr| {
        let mut r = LinExpr::from_terms(e.terms().iter().map(|&(v, c)| (new_id[v.index()], c)).collect::<Vec<_>>());
        r.add_constant(e.constant_term());
        r
    };
    for c in b.model.constraints() {
        out.add_constraint(remap(&c.expr), c.sense, c.rhs, c.name.clone())?;
    }
    let objective = remap(&objective);
    out.set_objective(objective)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_sections() {
        let mut m = Model::new();
        let x = m.continuous("x", 0.0, f64::INFINITY).unwrap();
        m.add_constraint(LinExpr::from(x), Sense::Ge, 1.0, "c1").unwrap();
        m.set_objective(LinExpr::from(x)).unwrap();
        let text = emit_model_file(&m);
        assert!(text.contains("Minimize"));
        assert!(text.contains("Subject To"));
        assert!(text.contains("Bounds"));
        assert!(text.contains(" c1: 1.0000000000000000e0 x >= 1.0000000000000000e0"));
    }

    #[test]
    fn empty_objective_is_zero() {
        let mut m = Model::new();
        m.continuous("x", 0.0, 1.0).unwrap();
        let text = emit_model_file(&m);
        assert!(text.contains(" obj: 0\n"), "{text}");
    }

    #[test]
    fn parses_hand_written_file() {
        let text = "\\ comment\nMinimize\n obj: x + 2 y\nSubject To\n c: x - y >= -3\n d: 2 x + y <= 4\nBounds\n y <= 5\n z free\nBinary\n b\nEnd\n";
        let m = parse_model_file(text).unwrap();
        let y = m.var_by_name("y").unwrap();
        assert_eq!(m.variable(y).ub, 5.0);
        let z = m.var_by_name("z").unwrap();
        assert_eq!(m.variable(z).lb, f64::NEG_INFINITY);
        let b = m.var_by_name("b").unwrap();
        assert_eq!(m.variable(b).kind, VarKind::Binary);
        let c = m.constraint(m.con_by_name("c").unwrap());
        assert_eq!(c.rhs, -3.0);
        assert_eq!(c.expr.coefficient(y), -1.0);
    }

    #[test]
    fn missing_sense_is_an_error() {
        let text = "Minimize\n obj: x\nSubject To\n c: x + y 3\nEnd\n";
        assert!(parse_model_file(text).is_err());
    }
}
