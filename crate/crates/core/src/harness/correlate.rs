use std::collections::BTreeMap;
use std::fmt;

use crate::error::Result;
use crate::stats::{pearson, spearman, CorrelationResult};

use super::RunResult;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    /// `field/activation/layer`, or `pooled`.
    pub stratum: String,
    pub property: &'static str,
    pub spearman: CorrelationResult,
    pub pearson: CorrelationResult,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrelationTable {
    pub rows: Vec<CorrelationRow>,
    /// Strata skipped for having fewer than 3 usable rows.
    pub notices: Vec<String>,
}

type Extract = fn(&RunResult) -> Option<f64>;

const PROPERTIES: [(&str, Extract); 5] = [
    ("delta_m", |r| r.delta_m),
    ("delta_s_gnn", |r| r.delta_s_gnn),
    ("homophily", |r| Some(r.homophily)),
    ("feature_dim", |r| Some(r.feature_dim as f64)),
    ("s_wl", |r| Some(r.s_wl)),
];

fn analyse(stratum: &str, rows: &[&RunResult], table: &mut CorrelationTable) -> Result<()> {
    let usable: Vec<&RunResult> = rows.iter().copied().filter(|r| r.delta_exp.is_some()).collect();
    if usable.len() < 3 {
        table.notices.push(format!(
            "stratum {stratum}: {} usable rows, need at least 3; skipped",
            usable.len()
        ));
        return Ok(());
    }
    let y: Vec<f64> = usable.iter().map(|r| r.delta_exp.expect("filtered")).collect();
    for (property, extract) in PROPERTIES {
        let x: Vec<f64> = usable.iter().map(|r| extract(r).unwrap_or(f64::NAN)).collect();
        if x.iter().any(|v| v.is_nan()) {
            table.notices.push(format!("stratum {stratum}: {property} missing; skipped"));
            continue;
        }
        table.rows.push(CorrelationRow {
            stratum: stratum.to_string(),
            property,
            spearman: spearman(&x, &y)?,
            pearson: pearson(&x, &y)?,
        });
    }
    Ok(())
}

/// Spearman and Pearson of each property against `ΔExp`, per
/// `(field, activation, layer)` stratum and pooled over all rows.
pub fn correlate_results(results: &[RunResult]) -> Result<CorrelationTable> {
    let mut strata: BTreeMap<String, Vec<&RunResult>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        strata
            .entry(format!("{}/{}/{}", r.field, r.activation, r.layer))
            .or_default()
            .push(r);
    }
    let mut table = CorrelationTable::default();
    for (name, rows) in &strata {
        analyse(name, rows, &mut table)?;
    }
    let all: Vec<&RunResult> = results.iter().filter(|r| r.is_ok()).collect();
    analyse("pooled", &all, &mut table)?;
    Ok(table)
}

fn cell(v: Option<f64>, sci: bool) -> String {
    match v {
        None => "undefined".to_string(),
        Some(v) if sci => format!("{v:.3e}"),
        Some(v) => format!("{v:.4}"),
    }
}

impl fmt::Display for CorrelationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:<12} {:>5} {:>10} {:>10} {:>10} {:>10}",
            "stratum", "vs delta_exp", "n", "spearman", "p", "pearson", "p"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<28} {:<12} {:>5} {:>10} {:>10} {:>10} {:>10}",
                r.stratum,
                r.property,
                r.spearman.n,
                cell(r.spearman.coefficient, false),
                cell(r.spearman.p_value, true),
                cell(r.pearson.coefficient, false),
                cell(r.pearson.p_value, true),
            )?;
        }
        for n in &self.notices {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
