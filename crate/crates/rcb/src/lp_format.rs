//! Canonical LP-text writer and parser.
//!
//! The subset is deliberately small: a single objective line (optionally
//! with a diagonal quadratic bracket), one constraint per line, one bounds
//! line per variable in declaration order, then a `Binary` section. All
//! numbers use a fixed 12-significant-digit exponent form so that
//! write -> parse -> write is byte-identical.

use thiserror::Error;

use crate::problem::{Cmp, OptProblem, Sense, VarId, VarKind};

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
}

/// Fixed 12-significant-digit representation used by every file writer.
pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Serializes a problem to the canonical LP-text subset.
pub fn write_lp(problem: &OptProblem) -> String {
    let mut out = String::new();
    out.push_str(&format!("\\ Problem: {}\n", problem.name));
    out.push_str(match problem.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });

    let mut obj = String::from(" obj:");
    let mut first = true;
    for (i, &c) in problem.objective_coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        push_term(&mut obj, &mut first, c, &problem.vars()[i].name);
    }
    if problem.has_quadratic() {
        obj.push_str(if first { " [" } else { " + [" });
        let mut qfirst = true;
        for (i, &q) in problem.quadratic_coeffs().iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            if !qfirst {
                obj.push_str(" +");
            }
            qfirst = false;
            // bracket convention: [ sum 2q x^2 ] / 2 contributes q x^2
            obj.push_str(&format!(" {} {} ^ 2", fmt_num(2.0 * q), problem.vars()[i].name));
        }
        obj.push_str(" ] / 2");
    }
    out.push_str(&obj);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in problem.constraints() {
        let mut line = format!(" {}:", c.name);
        let mut first = true;
        for &(id, coeff) in &c.terms {
            push_term(&mut line, &mut first, coeff, &problem.vars()[id.index()].name);
        }
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        };
        line.push_str(&format!(" {op} {}", fmt_num(c.rhs)));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for v in problem.vars() {
        let line = match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => format!(" {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper)),
            (true, false) => format!(" {} >= {}", v.name, fmt_num(v.lower)),
            (false, true) => format!(" {} <= {}", v.name, fmt_num(v.upper)),
            (false, false) => format!(" {} free", v.name),
        };
        out.push_str(&line);
        out.push('\n');
    }

    let binaries: Vec<&str> = problem
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for b in binaries {
            out.push_str(&format!(" {b}\n"));
        }
    }
    out.push_str("End\n");
    out
}

fn push_term(line: &mut String, first: &mut bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 { "-" } else { "+" };
    if *first {
        if coeff < 0.0 {
            line.push_str(" -");
        }
        *first = false;
    } else {
        line.push_str(&format!(" {sign}"));
    }
    line.push_str(&format!(" {} {}", fmt_num(coeff.abs()), name));
}

#[derive(Debug, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    Done,
}

/// Parses the canonical LP-text subset back into a problem.
pub fn parse_lp(text: &str) -> Result<OptProblem, FormatError> {
    let mut name = String::from("problem");
    let mut sense = None;
    let mut obj_line: Option<(usize, String)> = None;
    let mut constraint_lines: Vec<(usize, String)> = Vec::new();
    let mut bound_lines: Vec<(usize, String)> = Vec::new();
    let mut binary_lines: Vec<(usize, String)> = Vec::new();
    let mut section = Section::Preamble;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem:") {
                name = n.trim().to_string();
            }
            continue;
        }
        match line {
            "Minimize" | "Maximize" => {
                sense = Some(if line == "Minimize" {
                    Sense::Minimize
                } else {
                    Sense::Maximize
                });
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binary" => {
                section = Section::Binary;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => {
                if obj_line.is_some() {
                    return Err(parse_err(lineno, "multiple objective lines"));
                }
                obj_line = Some((lineno, line.to_string()));
            }
            Section::Constraints => constraint_lines.push((lineno, line.to_string())),
            Section::Bounds => bound_lines.push((lineno, line.to_string())),
            Section::Binary => binary_lines.push((lineno, line.to_string())),
            Section::Preamble => return Err(parse_err(lineno, "content before objective sense")),
            Section::Done => return Err(parse_err(lineno, "content after End")),
        }
    }

    let sense = sense.ok_or_else(|| parse_err(1, "missing Minimize/Maximize"))?;
    let mut problem = OptProblem::new(name, sense);

    // Bounds lines declare every variable, in canonical order.
    let mut binaries = std::collections::HashSet::new();
    for (lineno, line) in &binary_lines {
        let name = line.trim();
        if name.split_whitespace().count() != 1 {
            return Err(parse_err(*lineno, "expected one variable name"));
        }
        binaries.insert(name.to_string());
    }
    for (lineno, line) in &bound_lines {
        let (vname, lower, upper) = parse_bound_line(*lineno, line)?;
        let kind = if binaries.contains(&vname) {
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        problem
            .add_var(&vname, lower, upper, kind)
            .map_err(|e| parse_err(*lineno, e.to_string()))?;
    }

    if let Some((lineno, line)) = obj_line {
        let body = line
            .strip_prefix("obj:")
            .ok_or_else(|| parse_err(lineno, "objective must start with 'obj:'"))?
            .trim();
        let (linear_part, quad_part) = split_quadratic(lineno, body)?;
        for (coeff, vname) in parse_terms(lineno, &linear_part)? {
            let id = lookup(&problem, lineno, &vname)?;
            problem.set_objective(id, coeff);
        }
        if let Some(quad) = quad_part {
            for (coeff, vname) in parse_quad_terms(lineno, &quad)? {
                let id = lookup(&problem, lineno, &vname)?;
                problem.set_quadratic(id, coeff / 2.0);
            }
        }
    }

    for (lineno, line) in constraint_lines {
        let colon = line
            .find(':')
            .ok_or_else(|| parse_err(lineno, "constraint missing name"))?;
        let cname = line[..colon].trim().to_string();
        let body = line[colon + 1..].trim();
        let (cmp, op_pos, op_len) = find_relation(lineno, body)?;
        let lhs = &body[..op_pos];
        let rhs: f64 = body[op_pos + op_len..]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, "bad rhs"))?;
        let mut terms = Vec::new();
        for (coeff, vname) in parse_terms(lineno, lhs)? {
            let id = lookup(&problem, lineno, &vname)?;
            terms.push((id, coeff));
        }
        problem.add_constraint(cname, terms, cmp, rhs);
    }

    Ok(problem)
}

fn lookup(problem: &OptProblem, lineno: usize, name: &str) -> Result<VarId, FormatError> {
    problem
        .var_index(name)
        .ok_or_else(|| parse_err(lineno, format!("unknown variable {name}")))
}

fn parse_bound_line(lineno: usize, line: &str) -> Result<(String, f64, f64), FormatError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    match tokens.as_slice() {
        [lo, "<=", name, "<=", hi] => {
            let lo: f64 = lo.parse().map_err(|_| parse_err(lineno, "bad lower bound"))?;
            let hi: f64 = hi.parse().map_err(|_| parse_err(lineno, "bad upper bound"))?;
            Ok((name.to_string(), lo, hi))
        }
        [name, ">=", lo] => {
            let lo: f64 = lo.parse().map_err(|_| parse_err(lineno, "bad lower bound"))?;
            Ok((name.to_string(), lo, f64::INFINITY))
        }
        [name, "<=", hi] => {
            let hi: f64 = hi.parse().map_err(|_| parse_err(lineno, "bad upper bound"))?;
            Ok((name.to_string(), f64::NEG_INFINITY, hi))
        }
        [name, "free"] => Ok((name.to_string(), f64::NEG_INFINITY, f64::INFINITY)),
        _ => Err(parse_err(lineno, format!("unrecognized bounds line: {line}"))),
    }
}

fn find_relation(lineno: usize, body: &str) -> Result<(Cmp, usize, usize), FormatError> {
    if let Some(p) = body.find("<=") {
        Ok((Cmp::Le, p, 2))
    } else if let Some(p) = body.find(">=") {
        Ok((Cmp::Ge, p, 2))
    } else if let Some(p) = body.find(" = ") {
        Ok((Cmp::Eq, p + 1, 1))
    } else {
        Err(parse_err(lineno, "constraint missing relation"))
    }
}

/// Splits `... + [ quad ] / 2` off the objective body.
fn split_quadratic(lineno: usize, body: &str) -> Result<(String, Option<String>), FormatError> {
    match body.find('[') {
        None => Ok((body.to_string(), None)),
        Some(open) => {
            let close = body
                .rfind(']')
                .ok_or_else(|| parse_err(lineno, "unclosed quadratic bracket"))?;
            let tail = body[close + 1..].trim();
            if tail != "/ 2" && tail != "/2" {
                return Err(parse_err(lineno, "quadratic bracket must end with '/ 2'"));
            }
            let mut linear = body[..open].trim().to_string();
            if let Some(stripped) = linear.strip_suffix('+') {
                linear = stripped.trim().to_string();
            }
            Ok((linear, Some(body[open + 1..close].trim().to_string())))
        }
    }
}

/// Parses `c0 x0 + c1 x1 - c2 x2` into signed (coefficient, name) pairs.
fn parse_terms(lineno: usize, text: &str) -> Result<Vec<(f64, String)>, FormatError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i] {
            "+" => {
                sign = 1.0;
                i += 1;
            }
            "-" => {
                sign = -1.0;
                i += 1;
            }
            num => {
                let coeff: f64 = num
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad coefficient {num}")))?;
                let name = tokens
                    .get(i + 1)
                    .ok_or_else(|| parse_err(lineno, "dangling coefficient"))?;
                out.push((sign * coeff, name.to_string()));
                sign = 1.0;
                i += 2;
            }
        }
    }
    Ok(out)
}

/// Parses `c0 x0 ^ 2 + c1 x1 ^ 2` pairs from inside the quadratic bracket.
fn parse_quad_terms(lineno: usize, text: &str) -> Result<Vec<(f64, String)>, FormatError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "+" {
            i += 1;
            continue;
        }
        let coeff: f64 = tokens[i]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad quadratic coefficient {}", tokens[i])))?;
        let name = tokens
            .get(i + 1)
            .ok_or_else(|| parse_err(lineno, "dangling quadratic coefficient"))?;
        if tokens.get(i + 2) != Some(&"^") || tokens.get(i + 3) != Some(&"2") {
            return Err(parse_err(lineno, "quadratic term must end with '^ 2'"));
        }
        out.push((coeff, name.to_string()));
        i += 4;
    }
    Ok(out)
}
