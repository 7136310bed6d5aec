//! Readers for MATPOWER `.m` case files and the native JSON case format.

use crate::error::{Error, Result};
use crate::grid::{Branch, BranchKind, Bus, GridCase};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseFormat {
    Matpower,
    NativeJson,
}

impl CaseFormat {
    /// `.m` is MATPOWER, `.json` is native; anything else is ambiguous.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "m" => Some(Self::Matpower),
            "json" => Some(Self::NativeJson),
            _ => None,
        }
    }
}

impl FromStr for CaseFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matpower" | "matpower-m" | "m" => Ok(Self::Matpower),
            "json" | "native-json" | "native" => Ok(Self::NativeJson),
            other => Err(Error::Config(format!("unknown case format `{other}`"))),
        }
    }
}

pub fn load_case(path: &Path, format: CaseFormat) -> Result<GridCase> {
    let text = std::fs::read_to_string(path)?;
    match format {
        CaseFormat::Matpower => parse_matpower(&text),
        CaseFormat::NativeJson => parse_native_json(&text),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NativeCase {
    pub base_mva: f64,
    pub slack_bus: usize,
    pub buses: Vec<NativeBus>,
    pub branches: Vec<NativeBranch>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NativeBus {
    pub id: usize,
    pub load_mw: f64,
    pub gen_mw: f64,
    pub gen_max_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NativeBranch {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub x_pu: f64,
    pub rating_mw: f64,
    pub kind: BranchKind,
}

pub fn parse_native_json(text: &str) -> Result<GridCase> {
    let raw: NativeCase = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut buses: Vec<Bus> = raw
        .buses
        .iter()
        .map(|b| Bus { id: b.id, load: b.load_mw, gen: b.gen_mw, gen_max: b.gen_max_mw })
        .collect();
    buses.sort_by_key(|b| b.id);
    let mut branches: Vec<Branch> = raw
        .branches
        .iter()
        .map(|b| Branch {
            id: b.id,
            from_bus: b.from,
            to_bus: b.to,
            reactance: b.x_pu,
            rating: b.rating_mw,
            kind: b.kind,
            in_service: true,
        })
        .collect();
    branches.sort_by_key(|b| b.id);
    GridCase::new(buses, branches, raw.slack_bus, raw.base_mva)
}

pub fn to_native_json(case: &GridCase) -> Result<String> {
    let raw = NativeCase {
        base_mva: case.base_mva,
        slack_bus: case.slack_bus,
        buses: case
            .buses
            .iter()
            .map(|b| NativeBus { id: b.id, load_mw: b.load, gen_mw: b.gen, gen_max_mw: b.gen_max })
            .collect(),
        branches: case
            .branches
            .iter()
            .map(|b| NativeBranch {
                id: b.id,
                from: b.from_bus,
                to: b.to_bus,
                x_pu: b.reactance,
                rating_mw: b.rating,
                kind: b.kind,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

/// Extracts `mpc.<name> = [ ... ];` numeric blocks and `mpc.<name> = value;`
/// scalars. Cell arrays, strings and comments are skipped.
fn matpower_blocks(text: &str) -> Result<(HashMap<String, Vec<Vec<f64>>>, HashMap<String, f64>)> {
    let mut matrices = HashMap::new();
    let mut scalars = HashMap::new();
    let mut lines = text.lines().map(strip_comment);
    while let Some(line) = lines.next() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix("mpc.") else { continue };
        let Some((name, rhs)) = rest.split_once('=') else { continue };
        let name = name.trim().to_string();
        let rhs = rhs.trim();
        if let Some(body) = rhs.strip_prefix('[') {
            let mut rows = Vec::new();
            let mut chunk = body.to_string();
            loop {
                let done = chunk.contains(']');
                let part = chunk.split(']').next().unwrap_or("");
                for row in part.split(';') {
                    let vals: std::result::Result<Vec<f64>, _> =
                        row.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).map(f64::from_str).collect();
                    let vals = vals.map_err(|e| Error::Parse(format!("mpc.{name}: {e}")))?;
                    if !vals.is_empty() {
                        rows.push(vals);
                    }
                }
                if done {
                    break;
                }
                chunk = lines
                    .next()
                    .ok_or_else(|| Error::Parse(format!("unterminated matrix mpc.{name}")))?
                    .to_string();
            }
            matrices.insert(name, rows);
        } else if !rhs.starts_with('{') && !rhs.starts_with('\'') {
            let v = rhs.trim_end_matches(';').trim();
            if let Ok(v) = f64::from_str(v) {
                scalars.insert(name, v);
            }
        }
    }
    Ok((matrices, scalars))
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a MATPOWER version-2 case. Only bus demand, generator output and
/// limits, branch reactance, rating, tap ratio and status are used. Bus
/// numbers are mapped to contiguous ids in file order.
pub fn parse_matpower(text: &str) -> Result<GridCase> {
    let (m, s) = matpower_blocks(text)?;
    let base_mva = *s.get("baseMVA").ok_or_else(|| Error::Parse("missing mpc.baseMVA".into()))?;
    let get = |name: &str, min_cols: usize| -> Result<&Vec<Vec<f64>>> {
        let rows = m.get(name).ok_or_else(|| Error::Parse(format!("missing mpc.{name}")))?;
        if let Some(r) = rows.iter().find(|r| r.len() < min_cols) {
            return Err(Error::Parse(format!("mpc.{name} row has {} columns, need {min_cols}", r.len())));
        }
        Ok(rows)
    };
    let bus_rows = get("bus", 3)?;
    let gen_rows = get("gen", 10)?;
    let branch_rows = get("branch", 11)?;

    let mut index = HashMap::new();
    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut slack = None;
    for (i, r) in bus_rows.iter().enumerate() {
        let number = r[0] as i64;
        if index.insert(number, i).is_some() {
            return Err(Error::Parse(format!("duplicate bus number {number}")));
        }
        if r[1] as i64 == 3 {
            slack = Some(i);
        }
        buses.push(Bus { id: i, load: r[2], gen: 0.0, gen_max: 0.0 });
    }
    let lookup = |n: f64| -> Result<usize> {
        index.get(&(n as i64)).copied().ok_or_else(|| Error::Parse(format!("unknown bus number {n}")))
    };
    for r in gen_rows {
        if r[7] <= 0.0 {
            continue;
        }
        let b = lookup(r[0])?;
        buses[b].gen += r[1].max(0.0);
        buses[b].gen_max += r[8].max(0.0);
    }
    for b in &mut buses {
        b.gen = b.gen.min(b.gen_max);
    }
    let mut branches = Vec::with_capacity(branch_rows.len());
    for (i, r) in branch_rows.iter().enumerate() {
        branches.push(Branch {
            id: i,
            from_bus: lookup(r[0])?,
            to_bus: lookup(r[1])?,
            reactance: r[3],
            rating: if r[5] > 0.0 { r[5] } else { f64::INFINITY },
            kind: if r[8] != 0.0 { BranchKind::Transformer } else { BranchKind::Line },
            in_service: r[10] > 0.0,
        });
    }
    let slack = slack.ok_or_else(|| Error::Validation("no reference (type 3) bus".into()))?;
    GridCase::new(buses, branches, slack, base_mva)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
	1	3	0	0	0	0	1	1	0	345	1	1.1	0.9;
	2	1	30	0	0	0	1	1	0	345	1	1.1	0.9;   % load bus
	5	1	20	0	0	0	1	1	0	345	1	1.1	0.9;
];
mpc.gen = [
	1	60	0	300	-300	1	100	1	80	0;
	5	0	0	300	-300	1	100	0	50	0;
];
mpc.branch = [
	1	2	0	0.1	0	100	0	0	0	0	1	-360	360;
	2	5	0	0.2	0	0	0	0	1.05	0	1	-360	360;
];
mpc.bus_name = {
	'A';
};
"#;

    #[test]
    fn parses_minimal_matpower_case() {
        let c = parse_matpower(TINY).unwrap();
        assert_eq!(c.n_buses(), 3);
        assert_eq!(c.n_branches(), 2);
        assert_eq!(c.slack_bus, 0);
        assert_eq!(c.buses[0].gen_max, 80.0);
        // out-of-service generator contributes nothing
        assert_eq!(c.buses[2].gen_max, 0.0);
        assert!((c.total_gen() - 50.0).abs() < 1e-12);
        assert_eq!(c.branches[1].kind, BranchKind::Transformer);
        assert_eq!(c.branches[1].rating, f64::INFINITY);
        assert_eq!((c.branches[1].from_bus, c.branches[1].to_bus), (1, 2));
    }

    #[test]
    fn malformed_matpower_is_a_parse_error() {
        assert!(matches!(parse_matpower("mpc.baseMVA = 100;\nmpc.bus = [\n1 3 x;\n];"), Err(Error::Parse(_))));
        assert!(matches!(parse_matpower("mpc.bus = [\n];"), Err(Error::Parse(_))));
    }

    #[test]
    fn native_json_round_trip() {
        let text = r#"{"base_mva":100,"slack_bus":0,
            "buses":[{"id":0,"load_mw":0,"gen_mw":100,"gen_max_mw":100},
                     {"id":1,"load_mw":50,"gen_mw":0,"gen_max_mw":0},
                     {"id":2,"load_mw":50,"gen_mw":0,"gen_max_mw":0}],
            "branches":[{"id":0,"from":0,"to":1,"x_pu":0.1,"rating_mw":100,"kind":"line"},
                        {"id":1,"from":0,"to":2,"x_pu":0.1,"rating_mw":100,"kind":"line"},
                        {"id":2,"from":1,"to":2,"x_pu":0.1,"rating_mw":100,"kind":"transformer"}]}"#;
        let c = parse_native_json(text).unwrap();
        assert_eq!(c.total_load(), 100.0);
        assert_eq!(c.total_gen(), 100.0);
        let again = parse_native_json(&to_native_json(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert!(matches!(parse_native_json("{"), Err(Error::Parse(_))));
    }
}
