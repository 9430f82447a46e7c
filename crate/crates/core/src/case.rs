//! Static network description and its tabular text format.
//!
//! A case file is line oriented. `#` starts a comment, header directives
//! (`name`, `base_mva`, `units`) come before the first section, and each
//! `[bus]`, `[branch]`, `[gen]` and `[load]` section holds whitespace
//! separated rows. The full grammar lives in `docs/formats.md`.
//!
//! All quantities are stored per unit on `base_mva`. Files declaring
//! `units mw` give device powers and shunts in MW/MVAr and are divided by
//! the base at parse time; [`NetworkCase::to_case_text`] always writes `units pu`,
//! so re-parsing an emitted case is the identity.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::CaseError;

/// Text of the bundled IEEE 14-bus case.
pub const IEEE14_CASE: &str = include_str!("../data/ieee14.case");

/// Text of the bundled two-bus case: a 1 pu source behind `x = 0.1` feeding
/// a 1 pu unity-power-factor load.
pub const TWO_BUS_CASE: &str = include_str!("../data/two_bus.case");

/// Bundled case text by name (`ieee14`, `two_bus`).
pub fn bundled_case(name: &str) -> Option<&'static str> {
    match name {
        "ieee14" => Some(IEEE14_CASE),
        "two_bus" => Some(TWO_BUS_CASE),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

impl BusKind {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slack" | "ref" => Some(BusKind::Slack),
            "pv" => Some(BusKind::Pv),
            "pq" => Some(BusKind::Pq),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            BusKind::Slack => "slack",
            BusKind::Pv => "pv",
            BusKind::Pq => "pq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// Voltage set point (pu); present for slack and PV buses.
    pub v_set: Option<f64>,
    /// Nominal voltage used by voltage-dependent loads (pu).
    pub v0: f64,
    /// Shunt admittance at 1 pu voltage (pu).
    pub shunt: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b: f64,
    /// Off-nominal turns ratio on the `from` side.
    pub tap: f64,
}

impl Branch {
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub bus: u32,
    /// Scheduled active power (pu).
    pub p: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqLoadSpec {
    pub bus: u32,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<GenSpec>,
    pub static_loads: Vec<PqLoadSpec>,
}

impl NetworkCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Position of bus `id` in [`NetworkCase::buses`].
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    /// Total static load at bus `id` (pu).
    pub fn static_load_at(&self, id: u32) -> (f64, f64) {
        self.static_loads
            .iter()
            .filter(|l| l.bus == id)
            .fold((0.0, 0.0), |(p, q), l| (p + l.p, q + l.q))
    }

    /// Scheduled generation at bus `id` (pu).
    pub fn scheduled_generation_at(&self, id: u32) -> f64 {
        self.generators.iter().filter(|g| g.bus == id).map(|g| g.p).sum()
    }

    /// Serialize in the case format, per unit, such that
    /// `parse_case(&case.to_case_text()) == Ok(case)`.
    pub fn to_case_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "base_mva {}", self.base_mva);
        let _ = writeln!(out, "units pu");
        let _ = writeln!(out, "\n[bus]\n# id kind v_set v0 gs bs");
        for b in &self.buses {
            let vset = b.v_set.map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                b.id,
                b.kind.as_str(),
                vset,
                b.v0,
                b.shunt.re,
                b.shunt.im
            );
        }
        let _ = writeln!(out, "\n[branch]\n# from to r x b tap");
        for br in &self.branches {
            let _ = writeln!(out, "{} {} {} {} {} {}", br.from, br.to, br.r, br.x, br.b, br.tap);
        }
        let _ = writeln!(out, "\n[gen]\n# bus p q_min q_max");
        for g in &self.generators {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                g.bus,
                g.p,
                fmt_limit(g.q_min),
                fmt_limit(g.q_max)
            );
        }
        let _ = writeln!(out, "\n[load]\n# bus p q");
        for l in &self.static_loads {
            let _ = writeln!(out, "{} {} {}", l.bus, l.p, l.q);
        }
        out
    }
}

fn fmt_limit(v: f64) -> String {
    if v.is_infinite() {
        "-".to_string()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Header,
    Bus,
    Branch,
    Gen,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Units {
    Pu,
    Mw,
}

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    fn err(&self, msg: impl Into<String>) -> CaseError {
        CaseError::Syntax {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn arity(&self, min: usize, max: usize, what: &str) -> Result<(), CaseError> {
        let n = self.fields.len();
        if n < min || n > max {
            let expected = if min == max {
                min.to_string()
            } else {
                format!("{min} to {max}")
            };
            return Err(self.err(format!("{what} row has {n} fields, expected {expected}")));
        }
        Ok(())
    }

    fn id(&self, i: usize) -> Result<u32, CaseError> {
        self.fields[i]
            .parse::<u32>()
            .map_err(|_| self.err(format!("expected bus id, found `{}`", self.fields[i])))
    }

    fn num(&self, i: usize) -> Result<f64, CaseError> {
        let v = self.fields[i]
            .parse::<f64>()
            .map_err(|_| self.err(format!("expected number, found `{}`", self.fields[i])))?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value `{}`", self.fields[i])));
        }
        Ok(v)
    }

    fn opt_num(&self, i: usize) -> Result<Option<f64>, CaseError> {
        match self.fields.get(i) {
            None | Some(&"-") => Ok(None),
            Some(_) => self.num(i).map(Some),
        }
    }
}

/// Parse and validate a case file.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let mut section = Section::Header;
    let mut name = String::from("unnamed");
    let mut base_mva: Option<f64> = None;
    let mut units = Units::Pu;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut generators = Vec::new();
    let mut loads = Vec::new();
    let mut saw_section = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let Some(tag) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
                return Err(CaseError::Syntax {
                    line,
                    msg: format!("malformed section header `{content}`"),
                });
            };
            section = match tag.trim().to_ascii_lowercase().as_str() {
                "bus" => Section::Bus,
                "branch" => Section::Branch,
                "gen" => Section::Gen,
                "load" => Section::Load,
                other => {
                    return Err(CaseError::Syntax {
                        line,
                        msg: format!("unknown section `{other}`"),
                    })
                }
            };
            saw_section = true;
            continue;
        }
        let row = Row {
            line,
            fields: content.split_whitespace().collect(),
        };
        match section {
            Section::Header => {
                row.arity(2, 2, "header directive")?;
                match row.fields[0] {
                    "name" => name = row.fields[1].to_string(),
                    "base_mva" => base_mva = Some(row.num(1)?),
                    "units" => {
                        units = match row.fields[1].to_ascii_lowercase().as_str() {
                            "pu" => Units::Pu,
                            "mw" => Units::Mw,
                            other => return Err(row.err(format!("unknown units `{other}`"))),
                        }
                    }
                    other => return Err(row.err(format!("unknown directive `{other}`"))),
                }
            }
            Section::Bus => {
                row.arity(6, 6, "bus")?;
                let kind = BusKind::parse(row.fields[1])
                    .ok_or_else(|| row.err(format!("unknown bus kind `{}`", row.fields[1])))?;
                buses.push((
                    row.line,
                    Bus {
                        id: row.id(0)?,
                        kind,
                        v_set: row.opt_num(2)?,
                        v0: row.num(3)?,
                        shunt: Complex64::new(row.num(4)?, row.num(5)?),
                    },
                ));
            }
            Section::Branch => {
                row.arity(5, 6, "branch")?;
                let tap = match row.opt_num(5)? {
                    // MATPOWER convention: a zero ratio means no transformer.
                    None => 1.0,
                    Some(0.0) => 1.0,
                    Some(t) => t,
                };
                branches.push(Branch {
                    from: row.id(0)?,
                    to: row.id(1)?,
                    r: row.num(2)?,
                    x: row.num(3)?,
                    b: row.num(4)?,
                    tap,
                });
            }
            Section::Gen => {
                row.arity(2, 4, "gen")?;
                generators.push(GenSpec {
                    bus: row.id(0)?,
                    p: row.num(1)?,
                    q_min: row.opt_num(2)?.unwrap_or(f64::NEG_INFINITY),
                    q_max: row.opt_num(3)?.unwrap_or(f64::INFINITY),
                });
            }
            Section::Load => {
                row.arity(3, 3, "load")?;
                loads.push(PqLoadSpec {
                    bus: row.id(0)?,
                    p: row.num(1)?,
                    q: row.num(2)?,
                });
            }
        }
    }

    if !saw_section {
        return Err(CaseError::Syntax {
            line: text.lines().count().max(1),
            msg: "no [bus] section found".into(),
        });
    }
    let base_mva = base_mva.ok_or(CaseError::Syntax {
        line: 1,
        msg: "missing `base_mva` directive".into(),
    })?;
    if base_mva <= 0.0 {
        return Err(CaseError::Invalid(format!("base_mva must be positive, got {base_mva}")));
    }

    let scale = match units {
        Units::Pu => 1.0,
        Units::Mw => 1.0 / base_mva,
    };

    let mut seen = HashSet::new();
    for (line, b) in &buses {
        if !seen.insert(b.id) {
            return Err(CaseError::DuplicateBus(b.id));
        }
        if b.v0 <= 0.0 {
            return Err(CaseError::Syntax {
                line: *line,
                msg: format!("bus {}: v0 must be positive", b.id),
            });
        }
        match (b.kind, b.v_set) {
            (BusKind::Slack | BusKind::Pv, None) => {
                return Err(CaseError::Syntax {
                    line: *line,
                    msg: format!("bus {}: voltage set point required for {} bus", b.id, b.kind.as_str()),
                })
            }
            (_, Some(v)) if v <= 0.0 => {
                return Err(CaseError::Syntax {
                    line: *line,
                    msg: format!("bus {}: v_set must be positive", b.id),
                })
            }
            _ => {}
        }
    }
    let mut buses: Vec<Bus> = buses.into_iter().map(|(_, b)| b).collect();
    for b in &mut buses {
        if b.kind == BusKind::Pq {
            b.v_set = None;
        }
        b.shunt *= scale;
    }

    let slack_count = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
    match slack_count {
        0 => return Err(CaseError::NoSlack),
        1 => {}
        n => return Err(CaseError::MultipleSlack(n)),
    }

    let kinds: HashMap<u32, BusKind> = buses.iter().map(|b| (b.id, b.kind)).collect();
    for br in &branches {
        for end in [br.from, br.to] {
            if !kinds.contains_key(&end) {
                return Err(CaseError::DanglingBus { what: "branch", bus: end });
            }
        }
        if br.from == br.to {
            return Err(CaseError::Invalid(format!("branch {}-{} is a self loop", br.from, br.to)));
        }
        if br.r == 0.0 && br.x == 0.0 {
            return Err(CaseError::Invalid(format!(
                "branch {}-{} has zero series impedance",
                br.from, br.to
            )));
        }
        if br.tap <= 0.0 {
            return Err(CaseError::Invalid(format!("branch {}-{} has tap {}", br.from, br.to, br.tap)));
        }
    }
    for g in &mut generators {
        match kinds.get(&g.bus) {
            None => return Err(CaseError::DanglingBus { what: "generator", bus: g.bus }),
            Some(BusKind::Pq) => {
                return Err(CaseError::Invalid(format!(
                    "generator at bus {} which is not a slack or PV bus",
                    g.bus
                )))
            }
            Some(_) => {}
        }
        g.p *= scale;
        g.q_min *= scale;
        g.q_max *= scale;
        if g.q_min > g.q_max {
            return Err(CaseError::Invalid(format!("generator at bus {}: q_min > q_max", g.bus)));
        }
    }
    for l in &mut loads {
        if !kinds.contains_key(&l.bus) {
            return Err(CaseError::DanglingBus { what: "load", bus: l.bus });
        }
        l.p *= scale;
        l.q *= scale;
    }

    let case = NetworkCase {
        name,
        base_mva,
        buses,
        branches,
        generators,
        static_loads: loads,
    };
    check_connected(&case)?;
    Ok(case)
}

fn check_connected(case: &NetworkCase) -> Result<(), CaseError> {
    let n = case.n_buses();
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        let (i, j) = (case.index_of(br.from).unwrap(), case.index_of(br.to).unwrap());
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![case.slack_index()];
    seen[stack[0]] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CaseError::Invalid(format!(
            "bus {} is not connected to the slack bus",
            case.buses[i].id
        )));
    }
    Ok(())
}

/// Bundled IEEE 14-bus system.
pub fn ieee14() -> NetworkCase {
    parse_case(IEEE14_CASE).expect("bundled case parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
name two_bus
base_mva 100
units pu
[bus]
1 slack 1.0 1.0 0 0
2 pq - 1.0 0 0
[branch]
1 2 0 0.1 0
[gen]
1 0
[load]
2 1.0 0.0
";

    #[test]
    fn bundled_two_bus_matches_inline_text() {
        assert_eq!(parse_case(bundled_case("two_bus").unwrap()).unwrap(), parse_case(TWO_BUS).unwrap());
        assert!(bundled_case("ieee30").is_none());
    }

    #[test]
    fn bundled_ieee14_parses() {
        let case = ieee14();
        assert_eq!(case.n_buses(), 14);
        assert_eq!(case.branches.len(), 20);
        assert_eq!(case.buses.iter().filter(|b| b.kind == BusKind::Slack).count(), 1);
        assert_eq!(case.buses[case.slack_index()].id, 1);
        // 47.8 MW at bus 4 on a 100 MVA base
        let (p4, q4) = case.static_load_at(4);
        assert!((p4 - 0.478).abs() < 1e-15);
        assert!((q4 + 0.039).abs() < 1e-15);
        // bus 9 capacitor: 19 MVAr
        assert!((case.bus(9).unwrap().shunt.im - 0.19).abs() < 1e-15);
    }

    #[test]
    fn empty_text_is_a_syntax_error() {
        assert!(matches!(parse_case(""), Err(CaseError::Syntax { .. })));
        assert!(matches!(parse_case("# only a comment\n"), Err(CaseError::Syntax { .. })));
    }

    #[test]
    fn two_bus_case() {
        let case = parse_case(TWO_BUS).unwrap();
        assert_eq!(case.n_buses(), 2);
        assert_eq!(case.branches[0].tap, 1.0);
        assert_eq!(case.static_load_at(2), (1.0, 0.0));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "base_mva 100\n[bus]\n1 slack 1.0 1.0 0 0\n2 pq - one 0 0\n";
        match parse_case(text) {
            Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "base_mva 100\n[bus]\n1 slack 1.0 1.0 0 0\n[shunts]\n";
        assert!(matches!(parse_case(text), Err(CaseError::Syntax { line: 4, .. })));
    }

    #[test]
    fn semantic_errors() {
        let dup = "base_mva 100\n[bus]\n1 slack 1 1 0 0\n1 pq - 1 0 0\n";
        assert_eq!(parse_case(dup), Err(CaseError::DuplicateBus(1)));

        let dangling = "base_mva 100\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 0\n[branch]\n1 3 0 0.1 0\n";
        assert_eq!(
            parse_case(dangling),
            Err(CaseError::DanglingBus { what: "branch", bus: 3 })
        );

        let no_slack = "base_mva 100\n[bus]\n1 pv 1 1 0 0\n2 pq - 1 0 0\n[branch]\n1 2 0 0.1 0\n";
        assert_eq!(parse_case(no_slack), Err(CaseError::NoSlack));

        let zero_z = "base_mva 100\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 0\n[branch]\n1 2 0 0 0\n";
        assert!(matches!(parse_case(zero_z), Err(CaseError::Invalid(_))));

        let island = "base_mva 100\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 0\n3 pq - 1 0 0\n[branch]\n1 2 0 0.1 0\n";
        assert!(matches!(parse_case(island), Err(CaseError::Invalid(_))));
    }

    #[test]
    fn mw_units_are_normalized_once() {
        let text = "base_mva 50\nunits mw\n[bus]\n1 slack 1 1 0 0\n2 pq - 1 0 10\n[branch]\n1 2 0 0.1 0\n[load]\n2 25 5\n";
        let case = parse_case(text).unwrap();
        assert_eq!(case.static_load_at(2), (0.5, 0.1));
        assert!((case.buses[1].shunt.im - 0.2).abs() < 1e-15);
        let again = parse_case(&case.to_case_text()).unwrap();
        assert_eq!(again, case);
        let thrice = parse_case(&again.to_case_text()).unwrap();
        assert_eq!(thrice, case);
    }

    #[test]
    fn emitted_ieee14_reparses_identically() {
        let case = ieee14();
        assert_eq!(parse_case(&case.to_case_text()).unwrap(), case);
    }
}
