//! MATPOWER case files.
//!
//! Only the subset needed for a lossless DC model is read: `mpc.baseMVA`
//! and the `bus`, `gen`, `branch` and `gencost` matrices. Any other
//! statement in the file (`mpc.version`, `bus_name` cell arrays, the
//! `function` header) is skipped, as are trailing columns that the DC model
//! has no use for.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

/// The IEEE 14-bus system.
pub const CASE14: &str = include_str!("../data/case14.m");
/// The IEEE 39-bus (New England) system.
pub const CASE39: &str = include_str!("../data/case39.m");

/// Looks up one of the bundled cases by name (`"case14"`, `"case39"`).
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "case14" => Some(CASE14),
        "case39" => Some(CASE39),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Reference,
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub load_mw: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series reactance in per unit, as written in the case file.
    pub reactance: f64,
    /// `1 / reactance`, per unit.
    pub susceptance: f64,
    /// Thermal rating; `f64::INFINITY` when the file leaves `rateA` at 0.
    pub flow_limit_mw: f64,
    /// True when the branch is the only connection of a generator bus.
    pub is_generator_stub: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Generator {
    pub bus: u32,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    /// Linear cost coefficient in $/MWh.
    pub cost_linear: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: {message}")]
    Semantic { location: String, message: String },
}

impl CaseError {
    fn semantic(location: impl Into<String>, message: impl Into<String>) -> Self {
        CaseError::Semantic {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl NetworkCase {
    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Index of bus `id` in `buses`.
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn reference_bus(&self) -> Option<u32> {
        self.buses.iter().find(|b| b.kind == BusKind::Reference).map(|b| b.id)
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.load_mw).sum()
    }

    /// Recomputes `is_generator_stub` on every branch from the topology.
    pub fn mark_generator_stubs(&mut self) {
        let mut degree: HashMap<u32, usize> = HashMap::new();
        for br in &self.branches {
            *degree.entry(br.from_bus).or_default() += 1;
            *degree.entry(br.to_bus).or_default() += 1;
        }
        let hosts_generator = |bus: u32| self.generators.iter().any(|g| g.bus == bus);
        let stub: Vec<bool> = self
            .branches
            .iter()
            .map(|br| {
                [br.from_bus, br.to_bus]
                    .into_iter()
                    .any(|b| degree[&b] == 1 && hosts_generator(b))
            })
            .collect();
        for (br, s) in self.branches.iter_mut().zip(stub) {
            br.is_generator_stub = s;
        }
    }
}

/// Parses and validates a case script.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let raw = RawCase::read(text)?;
    let case = raw.into_case()?;
    validate(case)
}

/// Checks every invariant of the grid model, including connectivity.
/// Returns the case unchanged when it is valid.
pub fn validate(case: NetworkCase) -> Result<NetworkCase, CaseError> {
    if !(case.base_mva.is_finite() && case.base_mva > 0.0) {
        return Err(CaseError::semantic("baseMVA", "must be positive"));
    }
    if case.buses.is_empty() {
        return Err(CaseError::semantic("bus", "no buses"));
    }
    let mut index = HashMap::with_capacity(case.buses.len());
    for (i, bus) in case.buses.iter().enumerate() {
        let at = format!("bus {}", bus.id);
        if index.insert(bus.id, i).is_some() {
            return Err(CaseError::semantic(at, "duplicate bus id"));
        }
        if !(bus.load_mw.is_finite() && bus.load_mw >= 0.0) {
            return Err(CaseError::semantic(at, format!("load {} MW must be finite and nonnegative", bus.load_mw)));
        }
    }
    let references: Vec<u32> = case
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Reference)
        .map(|b| b.id)
        .collect();
    match references.as_slice() {
        [] => return Err(CaseError::semantic("bus", "missing reference bus")),
        [_] => {}
        [_, second, ..] => {
            return Err(CaseError::semantic(format!("bus {second}"), "second reference bus"));
        }
    }
    for (i, br) in case.branches.iter().enumerate() {
        let at = format!("branch {} ({}-{})", i + 1, br.from_bus, br.to_bus);
        if br.from_bus == br.to_bus {
            return Err(CaseError::semantic(at, "branch connects a bus to itself"));
        }
        for end in [br.from_bus, br.to_bus] {
            if !index.contains_key(&end) {
                return Err(CaseError::semantic(at, format!("endpoint bus {end} does not exist")));
            }
        }
        if !(br.susceptance.is_finite() && br.susceptance > 0.0) {
            return Err(CaseError::semantic(at, format!("susceptance {} must be finite and positive", br.susceptance)));
        }
        if br.flow_limit_mw.is_nan() || br.flow_limit_mw <= 0.0 {
            return Err(CaseError::semantic(at, "flow limit must be positive"));
        }
    }
    if case.generators.is_empty() {
        return Err(CaseError::semantic("gen", "no in-service generator"));
    }
    for (i, g) in case.generators.iter().enumerate() {
        let at = format!("generator {} (bus {})", i + 1, g.bus);
        if !index.contains_key(&g.bus) {
            return Err(CaseError::semantic(at, format!("bus {} does not exist", g.bus)));
        }
        if g.p_min_mw.is_nan() || g.p_max_mw.is_nan() || g.p_min_mw > g.p_max_mw {
            return Err(CaseError::semantic(at, format!("Pmin {} exceeds Pmax {}", g.p_min_mw, g.p_max_mw)));
        }
        if !g.cost_linear.is_finite() {
            return Err(CaseError::semantic(at, "non-finite cost"));
        }
    }

    // breadth-first search from the first bus
    let mut adjacency = vec![Vec::new(); case.buses.len()];
    for br in &case.branches {
        let (a, b) = (index[&br.from_bus], index[&br.to_bus]);
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; case.buses.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CaseError::semantic(
            format!("bus {}", case.buses[i].id),
            format!("not connected to bus {}", case.buses[0].id),
        ));
    }
    Ok(case)
}

/// Writes `case` back out as a MATPOWER script that [`parse_case`] reads to
/// an identical value.
pub fn serialize_case(case: &NetworkCase) -> String {
    let mut out = String::from("function mpc = exported\nmpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {:?};", case.base_mva);
    out.push_str("\n%\tbus_i\ttype\tPd\nmpc.bus = [\n");
    for b in &case.buses {
        let kind = match b.kind {
            BusKind::Reference => 3,
            BusKind::Generator => 2,
            BusKind::Load => 1,
        };
        let _ = writeln!(out, "\t{}\t{}\t{:?};", b.id, kind, b.load_mw);
    }
    out.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for g in &case.generators {
        let _ = writeln!(out, "\t{}\t0\t0\t0\t0\t1\t{:?}\t1\t{:?}\t{:?};", g.bus, case.base_mva, g.p_max_mw, g.p_min_mw);
    }
    out.push_str("];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n");
    for br in &case.branches {
        let rate = if br.flow_limit_mw.is_finite() { br.flow_limit_mw } else { 0.0 };
        let _ = writeln!(out, "\t{}\t{}\t0\t{:?}\t0\t{:?}\t0\t0\t0\t0\t1;", br.from_bus, br.to_bus, br.reactance, rate);
    }
    out.push_str("];\n\n%\t2\tstartup\tshutdown\tn\tc1\tc0\nmpc.gencost = [\n");
    for g in &case.generators {
        let _ = writeln!(out, "\t2\t0\t0\t2\t{:?}\t0;", g.cost_linear);
    }
    out.push_str("];\n");
    out
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

#[derive(Default)]
struct RawCase {
    base_mva: Option<f64>,
    bus: Option<Vec<Row>>,
    gen: Option<Vec<Row>>,
    branch: Option<Vec<Row>>,
    gencost: Option<Vec<Row>>,
}

impl RawCase {
    fn read(text: &str) -> Result<Self, CaseError> {
        let mut lexer = Lexer::new(text);
        let mut raw = RawCase::default();
        while let Some((line, column)) = lexer.next_statement() {
            if !lexer.eat_str("mpc.") {
                lexer.skip_statement();
                continue;
            }
            let name = lexer.ident();
            lexer.skip_blanks();
            if !lexer.eat_str("=") {
                return Err(lexer.error(format!("expected '=' after mpc.{name}")));
            }
            lexer.skip_blanks();
            let slot = match name.as_str() {
                "baseMVA" => {
                    let v = lexer.number()?;
                    lexer.skip_blanks();
                    lexer.expect(';')?;
                    raw.base_mva = Some(v);
                    continue;
                }
                "bus" => &mut raw.bus,
                "gen" => &mut raw.gen,
                "branch" => &mut raw.branch,
                "gencost" => &mut raw.gencost,
                _ => {
                    lexer.skip_statement();
                    continue;
                }
            };
            if slot.is_some() {
                return Err(CaseError::Syntax {
                    line,
                    column,
                    message: format!("mpc.{name} assigned twice"),
                });
            }
            *slot = Some(lexer.matrix()?);
        }
        Ok(raw)
    }

    fn into_case(self) -> Result<NetworkCase, CaseError> {
        let missing = |what: &str| CaseError::semantic(what, "matrix not found");
        let base_mva = self.base_mva.ok_or_else(|| missing("baseMVA"))?;
        let bus_rows = self.bus.ok_or_else(|| missing("mpc.bus"))?;
        let gen_rows = self.gen.ok_or_else(|| missing("mpc.gen"))?;
        let branch_rows = self.branch.ok_or_else(|| missing("mpc.branch"))?;
        let cost_rows = self.gencost.ok_or_else(|| missing("mpc.gencost"))?;

        let need = |row: &Row, what: &str, n: usize| -> Result<(), CaseError> {
            if row.values.len() < n {
                Err(CaseError::Syntax {
                    line: row.line,
                    column: 1,
                    message: format!("{what} row has {} columns, expected at least {n}", row.values.len()),
                })
            } else {
                Ok(())
            }
        };
        let id = |row: &Row, col: usize, what: &str| -> Result<u32, CaseError> {
            let v = row.values[col];
            if v.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&v) {
                return Err(CaseError::Syntax {
                    line: row.line,
                    column: 1,
                    message: format!("{what} {v} is not a positive integer"),
                });
            }
            Ok(v as u32)
        };

        let mut buses = Vec::with_capacity(bus_rows.len());
        for row in &bus_rows {
            need(row, "bus", 3)?;
            let kind = match row.values[1] as i64 {
                3 => BusKind::Reference,
                2 => BusKind::Generator,
                1 => BusKind::Load,
                t => {
                    return Err(CaseError::semantic(
                        format!("line {}", row.line),
                        format!("unsupported bus type {t}"),
                    ))
                }
            };
            buses.push(Bus {
                id: id(row, 0, "bus id")?,
                kind,
                load_mw: row.values[2],
            });
        }

        if cost_rows.len() < gen_rows.len() {
            return Err(CaseError::semantic(
                "mpc.gencost",
                format!("{} rows for {} generators", cost_rows.len(), gen_rows.len()),
            ));
        }
        let mut generators = Vec::with_capacity(gen_rows.len());
        for (row, cost) in gen_rows.iter().zip(&cost_rows) {
            need(row, "gen", 10)?;
            need(cost, "gencost", 4)?;
            if row.values[7] == 0.0 {
                continue;
            }
            if cost.values[0] != 2.0 {
                return Err(CaseError::semantic(
                    format!("line {}", cost.line),
                    "only polynomial cost (model 2) is supported",
                ));
            }
            let terms = cost.values[3] as usize;
            need(cost, "gencost", 4 + terms)?;
            let cost_linear = if terms >= 2 { cost.values[4 + terms - 2] } else { 0.0 };
            generators.push(Generator {
                bus: id(row, 0, "generator bus")?,
                p_max_mw: row.values[8],
                p_min_mw: row.values[9],
                cost_linear,
            });
        }

        let mut branches = Vec::with_capacity(branch_rows.len());
        for row in &branch_rows {
            need(row, "branch", 11)?;
            if row.values[10] == 0.0 {
                continue;
            }
            let reactance = row.values[3];
            let rate = row.values[5];
            branches.push(Branch {
                from_bus: id(row, 0, "from bus")?,
                to_bus: id(row, 1, "to bus")?,
                reactance,
                susceptance: 1.0 / reactance,
                flow_limit_mw: if rate == 0.0 { f64::INFINITY } else { rate },
                is_generator_stub: false,
            });
        }

        let mut case = NetworkCase {
            base_mva,
            buses,
            branches,
            generators,
        };
        case.mark_generator_stubs();
        Ok(case)
    }
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.text[self.line_start..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> CaseError {
        CaseError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    /// Spaces, tabs and comments, but not newlines.
    fn skip_blanks(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '%' => self.skip_comment(),
                '.' if self.rest().starts_with("...") => {
                    // line continuation
                    self.skip_comment();
                    self.bump();
                }
                _ => break,
            }
        }
    }

    /// Advances to the first character of the next statement and returns
    /// its position, or `None` at end of input.
    fn next_statement(&mut self) -> Option<(usize, usize)> {
        loop {
            self.skip_blanks();
            match self.peek()? {
                '\n' | ';' | ',' => {
                    self.bump();
                }
                _ => return Some((self.line, self.column())),
            }
        }
    }

    fn skip_statement(&mut self) {
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            match c {
                '%' => {
                    self.skip_comment();
                    continue;
                }
                '\'' | '"' => {
                    self.bump();
                    while let Some(q) = self.bump() {
                        if q == c || q == '\n' {
                            break;
                        }
                    }
                    continue;
                }
                '[' | '{' | '(' => depth += 1,
                ']' | '}' | ')' => depth = depth.saturating_sub(1),
                ';' | '\n' if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), CaseError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        self.text[start..self.pos].to_string()
    }

    fn number(&mut self) -> Result<f64, CaseError> {
        let (line, column) = (self.line, self.column());
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || matches!(c, '.' | '+' | '-')) {
            // a sign is only part of the token at the start or after an exponent
            if matches!(self.peek(), Some('+' | '-')) && self.pos > start {
                let prev = self.text.as_bytes()[self.pos - 1];
                if prev != b'e' && prev != b'E' {
                    break;
                }
            }
            self.bump();
        }
        let token = &self.text[start..self.pos];
        let value = match token {
            "Inf" | "inf" | "+Inf" => Some(f64::INFINITY),
            "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
            _ => token.parse::<f64>().ok().filter(|v| v.is_finite()),
        };
        value.ok_or_else(|| CaseError::Syntax {
            line,
            column,
            message: if token.is_empty() {
                "expected a number".to_string()
            } else {
                format!("invalid number '{token}'")
            },
        })
    }

    /// `[ v v v; v v v ... ];` with rows split on `;` or newlines.
    fn matrix(&mut self) -> Result<Vec<Row>, CaseError> {
        self.expect('[')?;
        let mut rows = Vec::new();
        let mut current = Row {
            line: self.line,
            values: Vec::new(),
        };
        loop {
            self.skip_blanks();
            match self.peek() {
                None => return Err(self.error("unterminated matrix, expected ']'")),
                Some(']') => {
                    self.bump();
                    break;
                }
                Some(';' | '\n') => {
                    self.bump();
                    if !current.values.is_empty() {
                        rows.push(std::mem::replace(
                            &mut current,
                            Row {
                                line: self.line,
                                values: Vec::new(),
                            },
                        ));
                    } else {
                        current.line = self.line;
                    }
                }
                Some(',') => {
                    self.bump();
                }
                Some(_) => {
                    if current.values.is_empty() {
                        current.line = self.line;
                    }
                    current.values.push(self.number()?);
                }
            }
        }
        if !current.values.is_empty() {
            rows.push(current);
        }
        if let Some(first) = rows.first() {
            let width = first.values.len();
            if let Some(bad) = rows.iter().find(|r| r.values.len() != width) {
                return Err(CaseError::Syntax {
                    line: bad.line,
                    column: 1,
                    message: format!("row has {} columns, previous rows have {width}", bad.values.len()),
                });
            }
        }
        self.skip_blanks();
        self.expect(';')?;
        Ok(rows)
    }
}
