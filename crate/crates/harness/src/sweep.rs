//! Grid sweeps: the cartesian product of per-key value lists over a base config.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compare::{run_grid, summarize, Arm, ComparisonReport, Metric, RunOutcome};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

/// One swept key, e.g. `priority.beta=0.5,0.7,0.9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

impl Axis {
    /// Parse `dotted.key=v1,v2,...`. Values are read as TOML scalars, with
    /// bare words taken as strings.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, values) = text
            .split_once('=')
            .ok_or_else(|| HarnessError::config("set", format!("expected KEY=V1,V2,... in `{text}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(HarnessError::config("set", "empty key"));
        }
        let values = values.split(',').map(|v| parse_scalar(v.trim())).collect::<Vec<_>>();
        if values.is_empty() {
            return Err(HarnessError::config(key, "no values to sweep"));
        }
        Ok(Self { key: key.to_owned(), values })
    }
}

fn parse_scalar(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_owned()),
    }
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Copy of `base` with `key` (dotted path) set to `value`.
pub fn apply_override(base: &RunConfig, key: &str, value: &toml::Value) -> Result<RunConfig> {
    let mut root = toml::Value::try_from(base).map_err(|e| HarnessError::config(key, e.to_string()))?;
    let mut node = &mut root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| HarnessError::config(key, "not a table"))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| HarnessError::config(key, "not a table"))?
        .insert(parts[parts.len() - 1].to_owned(), value.clone());
    let config: RunConfig = root.try_into().map_err(|e: toml::de::Error| HarnessError::config(key, e.to_string()))?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// `key=value` pairs joined by `,`, used as the arm label.
    pub label: String,
    pub config: RunConfig,
}

/// Every combination of axis values, first axis varying slowest.
pub fn expand(base: &RunConfig, axes: &[Axis]) -> Result<Vec<Cell>> {
    let mut cells = vec![Cell { label: String::new(), config: base.clone() }];
    for axis in axes {
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for cell in &cells {
            for value in &axis.values {
                let config = apply_override(&cell.config, &axis.key, value)?;
                let part = format!("{}={}", axis.key, display_value(value));
                let label = if cell.label.is_empty() { part } else { format!("{},{part}", cell.label) };
                next.push(Cell { label, config });
            }
        }
        cells = next;
    }
    for cell in &cells {
        cell.config.validate().map_err(|e| match e {
            HarnessError::Config { field, message } => {
                HarnessError::config(field, format!("{message} (in sweep cell {})", cell.label))
            }
            other => other,
        })?;
    }
    Ok(cells)
}

/// Run every cell for every seed and summarize `metric` per cell.
pub fn sweep(
    base: &RunConfig,
    axes: &[Axis],
    seeds: &[u64],
    metric: Metric,
    out_dir: Option<&Path>,
) -> Result<(ComparisonReport, Vec<RunOutcome>)> {
    if seeds.is_empty() {
        return Err(HarnessError::config("seeds", "need at least one seed"));
    }
    let cells = expand(base, axes)?;
    let arms: Vec<Arm> = cells
        .into_iter()
        .map(|c| Arm::new(if c.label.is_empty() { "base".to_owned() } else { c.label }, c.config))
        .collect();
    let labels: Vec<String> = arms.iter().map(|a| a.label.clone()).collect();
    let outcomes = run_grid(&arms, seeds, out_dir)?;
    let report = summarize(metric, &labels, seeds, &outcomes);
    if let Some(dir) = out_dir {
        crate::compare::write_report(&report, dir)?;
    }
    Ok((report, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use curious_replay::Strategy;

    #[test]
    fn axis_parsing() {
        let a = Axis::parse("priority.beta=0.5,0.9").unwrap();
        assert_eq!(a.key, "priority.beta");
        assert_eq!(a.values, vec![toml::Value::Float(0.5), toml::Value::Float(0.9)]);
        let b = Axis::parse("priority.strategy=uniform,curious").unwrap();
        assert_eq!(b.values[0], toml::Value::String("uniform".into()));
        assert_eq!(Axis::parse("agent.batch_size=8").unwrap().values, vec![toml::Value::Integer(8)]);
        assert!(Axis::parse("nokey").is_err());
    }

    #[test]
    fn cartesian_product() {
        let axes = [
            Axis::parse("priority.strategy=uniform,curious").unwrap(),
            Axis::parse("agent.batch_size=8,16,32").unwrap(),
        ];
        let cells = expand(&RunConfig::default(), &axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].label, "priority.strategy=uniform,agent.batch_size=8");
        assert_eq!(cells[5].config.strategy(), Strategy::Curious);
        assert_eq!(cells[5].config.agent.batch_size, 32);
    }

    #[test]
    fn bad_override_names_key() {
        let err = expand(&RunConfig::default(), &[Axis::parse("agent.batch_size=abc").unwrap()]).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref field, .. } if field == "agent.batch_size"), "{err}");
        let err = expand(&RunConfig::default(), &[Axis::parse("agent.batch_size=0").unwrap()]).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref field, .. } if field == "agent"), "{err}");
    }
}
