//! Canonical MPS writer and parser (whitespace-separated, one entry per
//! line, INTORG/INTEND markers around binary columns).
//!
//! Quadratic objectives are not representable here; use LP-text for those.

use crate::lp_format::{fmt_num, FormatError};
use crate::problem::{Cmp, OptProblem, Sense, VarKind};

/// Serializes a problem to the canonical MPS subset.
///
/// MPS has no objective-sense record, so the sense is carried in a comment
/// line that the parser understands.
pub fn write_mps(problem: &OptProblem) -> Result<String, FormatError> {
    if problem.has_quadratic() {
        return Err(FormatError::UnsupportedFeature(
            "quadratic objective terms cannot be written to MPS".into(),
        ));
    }
    let mut out = String::new();
    out.push_str(&format!("NAME {}\n", problem.name));
    out.push_str(&format!(
        "* SENSE {}\n",
        match problem.sense {
            Sense::Minimize => "MIN",
            Sense::Maximize => "MAX",
        }
    ));
    out.push_str("ROWS\n N obj\n");
    for c in problem.constraints() {
        let tag = match c.cmp {
            Cmp::Le => "L",
            Cmp::Eq => "E",
            Cmp::Ge => "G",
        };
        out.push_str(&format!(" {tag} {}\n", c.name));
    }

    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker_count = 0;
    for (idx, v) in problem.vars().iter().enumerate() {
        let is_binary = v.kind == VarKind::Binary;
        if is_binary && !in_integer_block {
            out.push_str(&format!(" MARKER{marker_count} 'MARKER' 'INTORG'\n"));
            marker_count += 1;
            in_integer_block = true;
        } else if !is_binary && in_integer_block {
            out.push_str(&format!(" MARKER{marker_count} 'MARKER' 'INTEND'\n"));
            marker_count += 1;
            in_integer_block = false;
        }
        // objective entry always written so every column exists
        out.push_str(&format!(
            " {} obj {}\n",
            v.name,
            fmt_num(problem.objective_coeffs()[idx])
        ));
        for c in problem.constraints() {
            for &(id, coeff) in &c.terms {
                if id.index() == idx {
                    out.push_str(&format!(" {} {} {}\n", v.name, c.name, fmt_num(coeff)));
                }
            }
        }
    }
    if in_integer_block {
        out.push_str(&format!(" MARKER{marker_count} 'MARKER' 'INTEND'\n"));
    }

    out.push_str("RHS\n");
    for c in problem.constraints() {
        out.push_str(&format!(" RHS {} {}\n", c.name, fmt_num(c.rhs)));
    }

    out.push_str("BOUNDS\n");
    for v in problem.vars() {
        if v.kind == VarKind::Binary {
            out.push_str(&format!(" BV BND {}\n", v.name));
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                out.push_str(&format!(" LO BND {} {}\n", v.name, fmt_num(v.lower)));
                out.push_str(&format!(" UP BND {} {}\n", v.name, fmt_num(v.upper)));
            }
            (true, false) => out.push_str(&format!(" LO BND {} {}\n", v.name, fmt_num(v.lower))),
            (false, true) => {
                out.push_str(&format!(" MI BND {}\n", v.name));
                out.push_str(&format!(" UP BND {} {}\n", v.name, fmt_num(v.upper)));
            }
            (false, false) => out.push_str(&format!(" FR BND {}\n", v.name)),
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// Parses the canonical MPS subset back into a problem.
pub fn parse_mps(text: &str) -> Result<OptProblem, FormatError> {
    let mut name = String::from("problem");
    let mut sense = Sense::Minimize;

    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }
    let mut section = Section::None;

    struct RowDef {
        name: String,
        cmp: Cmp,
    }
    let mut rows: Vec<RowDef> = Vec::new();
    // per column: (name, kind, objective coeff, entries per row name)
    struct ColDef {
        name: String,
        kind: VarKind,
        obj: f64,
        entries: Vec<(String, f64)>,
    }
    let mut cols: Vec<ColDef> = Vec::new();
    let mut rhs: Vec<(String, f64)> = Vec::new();
    // bounds recorded in file order: (type, var, value)
    let mut bounds: Vec<(String, String, Option<f64>)> = Vec::new();
    let mut integer_block = false;

    let err = |line: usize, msg: &str| FormatError::Parse {
        line,
        msg: msg.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('*') {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.first() == Some(&"SENSE") {
                sense = match tokens.get(1) {
                    Some(&"MIN") => Sense::Minimize,
                    Some(&"MAX") => Sense::Maximize,
                    _ => return Err(err(lineno, "bad sense comment")),
                };
            }
            continue;
        }
        if let Some(n) = line.strip_prefix("NAME") {
            name = n.trim().to_string();
            continue;
        }
        match line {
            "ROWS" => {
                section = Section::Rows;
                continue;
            }
            "COLUMNS" => {
                section = Section::Columns;
                continue;
            }
            "RHS" => {
                section = Section::Rhs;
                continue;
            }
            "BOUNDS" => {
                section = Section::Bounds;
                continue;
            }
            "ENDATA" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Rows => {
                let [tag, rname] = tokens.as_slice() else {
                    return Err(err(lineno, "bad row line"));
                };
                if *tag == "N" {
                    continue; // objective row
                }
                let cmp = match *tag {
                    "L" => Cmp::Le,
                    "E" => Cmp::Eq,
                    "G" => Cmp::Ge,
                    _ => return Err(err(lineno, "unknown row type")),
                };
                rows.push(RowDef {
                    name: rname.to_string(),
                    cmp,
                });
            }
            Section::Columns => {
                if tokens.len() == 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => integer_block = true,
                        "'INTEND'" => integer_block = false,
                        _ => return Err(err(lineno, "unknown marker")),
                    }
                    continue;
                }
                let [cname, rname, value] = tokens.as_slice() else {
                    return Err(err(lineno, "bad column line"));
                };
                let value: f64 = value.parse().map_err(|_| err(lineno, "bad value"))?;
                if cols.last().map(|c| c.name.as_str()) != Some(*cname) {
                    cols.push(ColDef {
                        name: cname.to_string(),
                        kind: if integer_block {
                            VarKind::Binary
                        } else {
                            VarKind::Continuous
                        },
                        obj: 0.0,
                        entries: Vec::new(),
                    });
                }
                let col = cols.last_mut().unwrap();
                if *rname == "obj" {
                    col.obj = value;
                } else {
                    col.entries.push((rname.to_string(), value));
                }
            }
            Section::Rhs => {
                let [_, rname, value] = tokens.as_slice() else {
                    return Err(err(lineno, "bad rhs line"));
                };
                let value: f64 = value.parse().map_err(|_| err(lineno, "bad value"))?;
                rhs.push((rname.to_string(), value));
            }
            Section::Bounds => match tokens.as_slice() {
                [btype, _, vname, value] => bounds.push((
                    btype.to_string(),
                    vname.to_string(),
                    Some(value.parse().map_err(|_| err(lineno, "bad value"))?),
                )),
                [btype, _, vname] => bounds.push((btype.to_string(), vname.to_string(), None)),
                _ => return Err(err(lineno, "bad bounds line")),
            },
            Section::None => return Err(err(lineno, "content before any section")),
            Section::Done => return Err(err(lineno, "content after ENDATA")),
        }
    }

    // resolve bounds per column
    let mut problem = OptProblem::new(name, sense);
    let mut ids = std::collections::HashMap::new();
    for col in &cols {
        let (mut lo, mut hi) = match col.kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (0.0, f64::INFINITY),
        };
        for (btype, vname, value) in &bounds {
            if vname != &col.name {
                continue;
            }
            match (btype.as_str(), value) {
                ("LO", Some(v)) => lo = *v,
                ("UP", Some(v)) => hi = *v,
                ("FX", Some(v)) => {
                    lo = *v;
                    hi = *v;
                }
                ("MI", None) => lo = f64::NEG_INFINITY,
                ("FR", None) => {
                    lo = f64::NEG_INFINITY;
                    hi = f64::INFINITY;
                }
                ("BV", None) => {
                    lo = 0.0;
                    hi = 1.0;
                }
                _ => {
                    return Err(FormatError::Parse {
                        line: 0,
                        msg: format!("unsupported bound type {btype} for {vname}"),
                    })
                }
            }
        }
        let id = problem
            .add_var(&col.name, lo, hi, col.kind)
            .map_err(|e| FormatError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        problem.set_objective(id, col.obj);
        ids.insert(col.name.clone(), id);
    }

    for row in &rows {
        let mut terms = Vec::new();
        for col in &cols {
            for (rname, value) in &col.entries {
                if rname == &row.name {
                    terms.push((ids[&col.name], *value));
                }
            }
        }
        let rhs_value = rhs
            .iter()
            .find(|(rname, _)| rname == &row.name)
            .map(|&(_, v)| v)
            .unwrap_or(0.0);
        problem.add_constraint(row.name.clone(), terms, row.cmp, rhs_value);
    }

    Ok(problem)
}
