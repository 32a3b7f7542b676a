//! Bundled test systems (MATPOWER `case30` and `case118`).

use crate::error::{Error, Result};
use crate::grid::{parse_matpower, GridTopology};

pub const CASE30: &str = include_str!("../data/case30.m");
pub const CASE118: &str = include_str!("../data/case118.m");

pub fn ieee30() -> GridTopology {
    parse_matpower(CASE30, "case30")
        .and_then(|c| c.into_topology())
        .expect("bundled case30 is valid")
}

pub fn ieee118() -> GridTopology {
    parse_matpower(CASE118, "case118")
        .and_then(|c| c.into_topology())
        .expect("bundled case118 is valid")
}

/// Resolves `ieee30` / `ieee118` (and the `case30` / `case118` aliases) to a
/// bundled grid, anything else to a file path.
pub fn load_grid(spec: &str) -> Result<GridTopology> {
    match spec {
        "ieee30" | "case30" => Ok(ieee30()),
        "ieee118" | "case118" => Ok(ieee118()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read grid `{path}`: {e}")))?;
            if text.trim_start().starts_with('{') {
                crate::grid::parse_case_file(&text)
            } else {
                let stem = std::path::Path::new(path)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("");
                parse_matpower(&text, stem)?.into_topology()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_rows(text: &str, table: &str) -> usize {
        let start = text.find(&format!("mpc.{table} = [")).unwrap();
        let body = &text[start..];
        let end = body.find("];").unwrap();
        body[..end].lines().skip(1).filter(|l| !l.trim().is_empty()).count()
    }

    #[test]
    fn case30_sizes() {
        let g = ieee30();
        assert_eq!(g.n_buses(), 30);
        assert_eq!(g.n_lines(), count_rows(CASE30, "branch"));
        assert_eq!(g.n_lines(), 41);
    }

    #[test]
    fn case118_sizes() {
        let g = ieee118();
        assert_eq!(g.n_buses(), 118);
        assert_eq!(g.n_lines(), count_rows(CASE118, "branch"));
    }

    #[test]
    fn bundled_injections_balance() {
        for g in [ieee30(), ieee118()] {
            let total: f64 = g.base_injections().iter().sum();
            assert!(total.abs() < 1e-9, "{} imbalance {total}", g.name());
        }
    }
}
