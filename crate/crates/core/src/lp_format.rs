//! Text LP interchange format (CPLEX-style sections).
//!
//! The writer emits `Minimize`, `Subject To`, `Bounds`, `Binaries` and
//! `End`, one row per line, with every token separated by whitespace and
//! row names taken from the model's provenance tags. Rows sharing a tag get
//! a `.2`, `.3`, ... suffix so names stay unique. The reader accepts what
//! the writer produces plus rows wrapped across lines; tokens must be
//! whitespace-separated because identifiers may contain `-`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::formulation::ModelIR;
use crate::lp::{LinearProgram, Relation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpFormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unsupported section '{0}'")]
    Unsupported(String),
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    for &(j, a) in terms {
        if a < 0.0 {
            let _ = write!(out, " - {} {}", num(-a), names[j]);
        } else {
            let _ = write!(out, " + {} {}", num(a), names[j]);
        }
    }
}

/// Renders `model` in LP text form.
pub fn write_lp(model: &ModelIR) -> String {
    let names: Vec<String> = (0..model.num_columns()).map(|j| model.column_name(j)).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ nfvslice model variant={} paths={} columns={} rows={}",
        model.variant.as_str(),
        model.path_budget,
        model.num_columns(),
        model.constraints.len()
    );
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &model.objective, &names);
    if model.objective_constant != 0.0 {
        let c = model.objective_constant;
        let _ = write!(out, " {} {}", if c < 0.0 { "-" } else { "+" }, num(c.abs()));
    }
    out.push_str("\nSubject To\n");
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (r, row) in model.constraints.iter().enumerate() {
        let mut name = model.row_name(r);
        let n = seen.entry(name.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            let _ = write!(name, ".{n}");
        }
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &row.coeffs, &names);
        let _ = writeln!(out, " {} {}", row.relation.symbol(), num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, c) in model.columns.iter().enumerate() {
        let _ = writeln!(out, " {} <= {} <= {}", num(c.lower), names[j], num(c.upper));
    }
    out.push_str("Binaries\n");
    for (j, c) in model.columns.iter().enumerate() {
        if c.is_binary() {
            let _ = writeln!(out, " {}", names[j]);
        }
    }
    out.push_str("End\n");
    out
}

/// Result of parsing an LP text document.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLp {
    pub program: LinearProgram,
    pub column_names: Vec<String>,
    pub row_names: Vec<String>,
    pub binaries: Vec<usize>,
}

impl ParsedLp {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "+inf" | "inf" | "+infinity" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|_| {
            // reject identifiers that happen to parse, e.g. "nan"
            t.chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.'))
        }),
    }
}

fn parse_relation(tok: &str) -> Option<Relation> {
    match tok {
        "<=" | "=<" | "<" => Some(Relation::Le),
        ">=" | "=>" | ">" => Some(Relation::Ge),
        "=" => Some(Relation::Eq),
        _ => None,
    }
}

/// Linear expression accumulator shared by the objective and rows.
#[derive(Default)]
struct Expr {
    terms: Vec<(String, f64)>,
    constant: f64,
    sign: f64,
    coef: Option<f64>,
}

impl Expr {
    fn new() -> Self {
        Expr {
            sign: 1.0,
            ..Default::default()
        }
    }

    fn flush_constant(&mut self) {
        if let Some(c) = self.coef.take() {
            self.constant += self.sign * c;
        }
        self.sign = 1.0;
    }

    fn feed(&mut self, tok: &str) {
        match tok {
            "+" => {
                self.flush_constant();
            }
            "-" => {
                self.flush_constant();
                self.sign = -1.0;
            }
            _ => {
                if let Some(v) = parse_number(tok) {
                    if self.coef.is_some() {
                        self.flush_constant();
                    }
                    self.coef = Some(v);
                } else {
                    let c = self.coef.take().unwrap_or(1.0);
                    self.terms.push((tok.to_string(), self.sign * c));
                    self.sign = 1.0;
                }
            }
        }
    }

    fn finish(mut self) -> (Vec<(String, f64)>, f64) {
        self.flush_constant();
        (self.terms, self.constant)
    }
}

struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    program: LinearProgram,
}

impl Builder {
    fn col(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.program.add_column(0.0, f64::INFINITY, 0.0);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), j);
        j
    }

    fn resolve(&mut self, terms: Vec<(String, f64)>) -> Vec<(usize, f64)> {
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (name, c) in terms {
            let j = self.col(&name);
            match acc.iter_mut().find(|(k, _)| *k == j) {
                Some(t) => t.1 += c,
                None => acc.push((j, c)),
            }
        }
        acc
    }
}

/// Parses LP text into a relaxation plus the list of binary columns.
pub fn read_lp(text: &str) -> Result<ParsedLp, LpFormatError> {
    let mut section = Section::Preamble;
    let mut b = Builder {
        names: Vec::new(),
        index: HashMap::new(),
        program: LinearProgram::default(),
    };
    let mut row_names = Vec::new();
    let mut binaries = Vec::new();
    let mut objective = Expr::new();

    // Pending row state.
    let mut label: Option<String> = None;
    let mut lhs = Expr::new();
    let mut relation: Option<Relation> = None;
    let mut rhs_sign = 1.0;
    let mut started = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_keyword(line) {
            if section == Section::Constraints && started {
                return Err(LpFormatError::Syntax {
                    line: line_no,
                    msg: "row not terminated".into(),
                });
            }
            section = next;
            continue;
        }
        let lower = line.trim().to_ascii_lowercase();
        if ["maximize", "maximise", "maximum", "max"].contains(&lower.as_str()) {
            return Err(LpFormatError::Unsupported(line.trim().into()));
        }
        if lower.starts_with("general") || lower.starts_with("semi") || lower == "sos" {
            return Err(LpFormatError::Unsupported(line.trim().into()));
        }
        match section {
            Section::Preamble => {
                return Err(LpFormatError::Syntax {
                    line: line_no,
                    msg: "content before the objective section".into(),
                })
            }
            Section::End => {}
            Section::Objective => {
                for tok in line.split_whitespace() {
                    if tok.ends_with(':') {
                        continue;
                    }
                    objective.feed(tok);
                }
            }
            Section::Constraints => {
                for tok in line.split_whitespace() {
                    if let Some(rel) = relation {
                        match tok {
                            "+" => {}
                            "-" => rhs_sign = -rhs_sign,
                            _ => {
                                let v = parse_number(tok).ok_or_else(|| LpFormatError::Syntax {
                                    line: line_no,
                                    msg: format!("expected right-hand side, found '{tok}'"),
                                })?;
                                let (terms, constant) = std::mem::replace(&mut lhs, Expr::new()).finish();
                                let coeffs = b.resolve(terms);
                                b.program.add_row(coeffs, rel, rhs_sign * v - constant);
                                row_names.push(label.take().unwrap_or_else(|| format!("R{}", row_names.len())));
                                relation = None;
                                rhs_sign = 1.0;
                                started = false;
                            }
                        }
                        continue;
                    }
                    if !started && label.is_none() && tok.ends_with(':') && tok.len() > 1 {
                        label = Some(tok[..tok.len() - 1].to_string());
                        started = true;
                        continue;
                    }
                    started = true;
                    if let Some(rel) = parse_relation(tok) {
                        relation = Some(rel);
                    } else {
                        lhs.feed(tok);
                    }
                }
            }
            Section::Bounds => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let bad = || LpFormatError::Syntax {
                    line: line_no,
                    msg: format!("unrecognized bound '{}'", line.trim()),
                };
                match toks.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        let j = b.col(name);
                        b.program.columns[j].lower = f64::NEG_INFINITY;
                        b.program.columns[j].upper = f64::INFINITY;
                    }
                    [lo, "<=", name, "<=", hi] => {
                        let (lo, hi) = (parse_number(lo).ok_or_else(bad)?, parse_number(hi).ok_or_else(bad)?);
                        let j = b.col(name);
                        b.program.columns[j].lower = lo;
                        b.program.columns[j].upper = hi;
                    }
                    [a, op, c] => {
                        let rel = parse_relation(op).ok_or_else(bad)?;
                        let (name, value, rel) = match (parse_number(a), parse_number(c)) {
                            (None, Some(v)) => (*a, v, rel),
                            (Some(v), None) => {
                                let flipped = match rel {
                                    Relation::Le => Relation::Ge,
                                    Relation::Ge => Relation::Le,
                                    Relation::Eq => Relation::Eq,
                                };
                                (*c, v, flipped)
                            }
                            _ => return Err(bad()),
                        };
                        let j = b.col(name);
                        match rel {
                            Relation::Le => b.program.columns[j].upper = value,
                            Relation::Ge => b.program.columns[j].lower = value,
                            Relation::Eq => {
                                b.program.columns[j].lower = value;
                                b.program.columns[j].upper = value;
                            }
                        }
                    }
                    _ => return Err(bad()),
                }
            }
            Section::Binaries => {
                for name in line.split_whitespace() {
                    let j = b.col(name);
                    if !binaries.contains(&j) {
                        binaries.push(j);
                    }
                    let c = &mut b.program.columns[j];
                    c.lower = c.lower.max(0.0);
                    c.upper = c.upper.min(1.0);
                }
            }
        }
    }
    if started {
        return Err(LpFormatError::Syntax {
            line: text.lines().count(),
            msg: "row not terminated".into(),
        });
    }
    let (terms, constant) = objective.finish();
    for (j, c) in b.resolve(terms) {
        b.program.columns[j].cost += c;
    }
    b.program.objective_constant = constant;
    binaries.sort_unstable();
    Ok(ParsedLp {
        program: b.program,
        column_names: b.names,
        row_names,
        binaries,
    })
}
