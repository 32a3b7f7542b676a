//! Case-file ingestion.
//!
//! The canonical grid file is JSON:
//!
//! ```json
//! { "name": "case30", "base_mva": 100.0,
//!   "buses": [{"id": 1, "p_base": 0.25, "load": 0.0}],
//!   "lines": [{"id": 1, "from": 1, "to": 2, "reactance": 0.06}] }
//! ```
//!
//! MATPOWER `.m` text is converted into that form. Only `baseMVA`, `bus`,
//! `gen` and `branch` are read; from those only bus id and `Pd`, generator
//! bus, `Pg` and status, and branch ends, `x` and status.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Bus, BusId, GridTopology, Line, LineId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalBus {
    pub id: u32,
    pub p_base: f64,
    #[serde(default)]
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalLine {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub reactance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalGrid {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    pub buses: Vec<CanonicalBus>,
    pub lines: Vec<CanonicalLine>,
}

fn default_base_mva() -> f64 {
    100.0
}

impl CanonicalGrid {
    pub fn into_topology(self) -> Result<GridTopology> {
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus {
                id: BusId(b.id),
                p_base: b.p_base,
                load: b.load,
            })
            .collect();
        let lines = self
            .lines
            .into_iter()
            .map(|l| Line {
                id: LineId(l.id),
                from: BusId(l.from),
                to: BusId(l.to),
                reactance: l.reactance,
            })
            .collect();
        GridTopology::new(self.name, buses, lines)
    }

    pub fn from_topology(grid: &GridTopology) -> Self {
        CanonicalGrid {
            name: grid.name().to_string(),
            base_mva: default_base_mva(),
            buses: grid
                .buses()
                .iter()
                .map(|b| CanonicalBus {
                    id: b.id.0,
                    p_base: b.p_base,
                    load: b.load,
                })
                .collect(),
            lines: grid
                .lines()
                .iter()
                .map(|l| CanonicalLine {
                    id: l.id.0,
                    from: l.from.0,
                    to: l.to.0,
                    reactance: l.reactance,
                })
                .collect(),
        }
    }
}

/// Parses either a canonical JSON grid or MATPOWER case text.
pub fn parse_case_file(text: &str) -> Result<GridTopology> {
    if text.trim_start().starts_with('{') {
        let canonical: CanonicalGrid = serde_json::from_str(text)?;
        canonical.into_topology()
    } else {
        parse_matpower(text, "")?.into_topology()
    }
}

struct Table {
    rows: Vec<(usize, Vec<f64>)>,
}

/// Converts MATPOWER case text into the canonical form.
///
/// Generation is rescaled so total generation equals total load: the DC model
/// is lossless and needs balanced injections. Out-of-service generators and
/// branches are dropped; branch ids are the 1-based row numbers of the branch
/// table.
pub fn parse_matpower(text: &str, fallback_name: &str) -> Result<CanonicalGrid> {
    let (name, base_mva, tables) = scan_matpower(text)?;
    let name = name.unwrap_or_else(|| fallback_name.to_string());
    let bus = tables.get("bus").ok_or(Error::MissingTable("bus"))?;
    let branch = tables.get("branch").ok_or(Error::MissingTable("branch"))?;

    let mut buses: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (line, row) in &bus.rows {
        if row.len() < 3 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("bus row needs at least 3 columns, found {}", row.len()),
            });
        }
        let id = as_id(row[0], *line)?;
        if buses.insert(id, (row[2], 0.0)).is_some() {
            return Err(Error::DuplicateBus(id));
        }
    }

    if let Some(gen) = tables.get("gen") {
        for (line, row) in &gen.rows {
            if row.len() < 2 {
                return Err(Error::Parse {
                    line: *line,
                    msg: "gen row needs at least 2 columns".into(),
                });
            }
            let in_service = row.get(7).is_none_or(|&s| s > 0.0);
            if !in_service {
                continue;
            }
            let id = as_id(row[0], *line)?;
            let entry = buses.get_mut(&id).ok_or(Error::UnknownBus(id))?;
            entry.1 += row[1];
        }
    }

    let total_load: f64 = buses.values().map(|b| b.0).sum();
    let total_gen: f64 = buses.values().map(|b| b.1).sum();
    let gen_scale = if total_gen.abs() > 0.0 {
        total_load / total_gen
    } else if total_load.abs() > 0.0 {
        return Err(Error::Parse {
            line: 0,
            msg: "case has load but no in-service generation".into(),
        });
    } else {
        0.0
    };

    let buses = buses
        .into_iter()
        .map(|(id, (pd, pg))| CanonicalBus {
            id,
            p_base: (pg * gen_scale - pd) / base_mva,
            load: pd / base_mva,
        })
        .collect();

    let mut lines = Vec::new();
    for (k, (line, row)) in branch.rows.iter().enumerate() {
        if row.len() < 4 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("branch row needs at least 4 columns, found {}", row.len()),
            });
        }
        let in_service = row.get(10).is_none_or(|&s| s > 0.0);
        if !in_service {
            continue;
        }
        lines.push(CanonicalLine {
            id: k as u32 + 1,
            from: as_id(row[0], *line)?,
            to: as_id(row[1], *line)?,
            reactance: row[3],
        });
    }

    Ok(CanonicalGrid {
        name,
        base_mva,
        buses,
        lines,
    })
}

fn as_id(v: f64, line: usize) -> Result<u32> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            msg: format!("`{v}` is not a bus id"),
        });
    }
    Ok(v as u32)
}

type Scanned = (Option<String>, f64, BTreeMap<String, Table>);

fn scan_matpower(text: &str) -> Result<Scanned> {
    let mut name = None;
    let mut base_mva = 100.0;
    let mut tables = BTreeMap::new();
    let mut open: Option<(String, Table)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let code = raw.split('%').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }

        if let Some((tname, mut table)) = open.take() {
            let (body, closed) = match code.find(']') {
                Some(pos) => (&code[..pos], true),
                None => (code, false),
            };
            push_rows(&mut table, body, lineno)?;
            if closed {
                tables.insert(tname, table);
            } else {
                open = Some((tname, table));
            }
            continue;
        }

        if let Some(rest) = code.strip_prefix("function") {
            if let Some(eq) = rest.find('=') {
                name = Some(rest[eq + 1..].trim().to_string());
            }
            continue;
        }

        let Some(rest) = code.strip_prefix("mpc.") else {
            continue;
        };
        let Some(eq) = rest.find('=') else {
            continue;
        };
        let field = rest[..eq].trim().to_string();
        let value = rest[eq + 1..].trim();
        if field == "baseMVA" {
            base_mva = value
                .trim_end_matches(';')
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad baseMVA `{value}`"),
                })?;
            if !(base_mva > 0.0) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "baseMVA must be positive".into(),
                });
            }
        } else if let Some(body) = value.strip_prefix('[') {
            let mut table = Table { rows: Vec::new() };
            match body.find(']') {
                Some(pos) => {
                    push_rows(&mut table, &body[..pos], lineno)?;
                    tables.insert(field, table);
                }
                None => {
                    push_rows(&mut table, body, lineno)?;
                    open = Some((field, table));
                }
            }
        }
    }
    if let Some((tname, _)) = open {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("table `{tname}` is not closed"),
        });
    }
    Ok((name, base_mva, tables))
}

fn push_rows(table: &mut Table, body: &str, lineno: usize) -> Result<()> {
    for row in body.split(';') {
        let cells: Vec<&str> = row
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if cells.is_empty() {
            continue;
        }
        let values = cells
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("`{c}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        table.rows.push((lineno, values));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0;
  2 1 50 0;
];
mpc.gen = [
  1 50 0 0 0 1 100 1;
];
mpc.branch = [
  1 2 0.01 1.0 0 0 0 0 0 0 1;
];
";

    #[test]
    fn minimal_two_bus_case() {
        let grid = parse_case_file(TWO_BUS).unwrap();
        assert_eq!(grid.name(), "tiny");
        assert_eq!(grid.n_buses(), 2);
        assert_eq!(grid.n_lines(), 1);
        assert_eq!(grid.lines()[0].reactance, 1.0);
        assert_eq!(grid.base_injections(), vec![0.5, -0.5]);
        assert_eq!(grid.base_loads(), vec![0.0, 0.5]);
    }

    #[test]
    fn missing_branch_table_is_an_error() {
        let text = TWO_BUS.split("mpc.branch").next().unwrap();
        assert!(matches!(
            parse_case_file(text),
            Err(Error::MissingTable("branch"))
        ));
    }

    #[test]
    fn malformed_rows_and_values() {
        let bad = TWO_BUS.replace("2 1 50 0;", "2 1 fifty 0;");
        assert!(matches!(parse_case_file(&bad), Err(Error::Parse { .. })));

        let dup = TWO_BUS.replace("2 1 50 0;", "1 1 50 0;");
        assert!(matches!(parse_case_file(&dup), Err(Error::DuplicateBus(1))));

        let neg = TWO_BUS.replace("0.01 1.0", "0.01 -1.0");
        assert!(matches!(
            parse_case_file(&neg),
            Err(Error::InvalidLine { .. })
        ));

        let unclosed = TWO_BUS.replace("1 2 0.01 1.0 0 0 0 0 0 0 1;\n];", "1 2 0.01 1.0;");
        assert!(matches!(parse_case_file(&unclosed), Err(Error::Parse { .. })));
    }

    #[test]
    fn disconnected_case_is_rejected() {
        let text = TWO_BUS.replace("  2 1 50 0;\n", "  2 1 50 0;\n  3 1 0 0;\n");
        assert!(matches!(
            parse_case_file(&text),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn out_of_service_branch_is_skipped_but_keeps_numbering() {
        let text = TWO_BUS.replace(
            "  1 2 0.01 1.0 0 0 0 0 0 0 1;\n",
            "  1 2 0.01 2.0 0 0 0 0 0 0 0;\n  1 2 0.01 1.0 0 0 0 0 0 0 1;\n",
        );
        let grid = parse_case_file(&text).unwrap();
        assert_eq!(grid.n_lines(), 1);
        assert_eq!(grid.lines()[0].id, LineId(2));
    }

    #[test]
    fn canonical_json_round_trip() {
        let grid = parse_case_file(TWO_BUS).unwrap();
        let json = serde_json::to_string(&CanonicalGrid::from_topology(&grid)).unwrap();
        let back = parse_case_file(&json).unwrap();
        assert_eq!(back.buses(), grid.buses());
        assert_eq!(back.lines(), grid.lines());
    }

    #[test]
    fn single_line_tables_and_commas() {
        let text = "mpc.bus = [1 3 0 0; 2 1 10 0];\nmpc.gen = [1, 10];\nmpc.branch = [1, 2, 0, 0.5];\n";
        let grid = parse_case_file(text).unwrap();
        assert_eq!(grid.n_buses(), 2);
        assert_eq!(grid.lines()[0].reactance, 0.5);
        assert!((grid.base_injections()[0] - 0.1).abs() < 1e-15);
    }
}
