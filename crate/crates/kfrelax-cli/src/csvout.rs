//! Long-format CSV emission and parsing.
//!
//! Schema is pinned for reproducibility: header `step,metric,value,seed,estimator`,
//! one metric per row, UTF-8 with `\n` line endings, values printed with 17
//! significant digits so an `f64` round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const CSV_HEADER: &str = "step,metric,value,seed,estimator";

/// One logged metric value.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

/// All rows of a run, with the run-constant columns factored out.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<Row>,
    pub seed: u64,
    pub estimator: String,
    /// Wall-clock of the run in seconds. Reported on stderr only; never
    /// written to the CSV, which must be byte-identical across reruns.
    pub elapsed_secs: f64,
}

impl RunRecord {
    pub fn new(seed: u64, estimator: impl Into<String>) -> Self {
        RunRecord {
            rows: Vec::new(),
            seed,
            estimator: estimator.into(),
            elapsed_secs: 0.0,
        }
    }

    pub fn push(&mut self, step: u64, metric: &str, value: f64) {
        assert!(value.is_finite(), "non-finite {metric} at step {step}");
        if let Some(last) = self.rows.last() {
            assert!(last.step <= step, "step column must be monotone");
        }
        self.rows.push(Row {
            step,
            metric: metric.to_owned(),
            value,
        });
    }

    /// Renders the record to CSV text (17 significant digits, `\n` endings).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.rows.len() + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{},{}",
                row.step, row.metric, row.value, self.seed, self.estimator
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, self.to_csv())
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// A parsed CSV file (for `plot`).
#[derive(Clone, Debug)]
pub struct ParsedCsv {
    pub rows: Vec<(u64, String, f64, u64, String)>,
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => bail!("unexpected CSV header: {h}"),
        None => bail!("empty CSV"),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("line {}: expected 5 fields, got {}", i + 2, fields.len());
        }
        rows.push((
            fields[0].parse().with_context(|| format!("line {}: step", i + 2))?,
            fields[1].to_owned(),
            fields[2].parse().with_context(|| format!("line {}: value", i + 2))?,
            fields[3].parse().with_context(|| format!("line {}: seed", i + 2))?,
            fields[4].to_owned(),
        ));
    }
    Ok(ParsedCsv { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_values_exactly() {
        let mut rec = RunRecord::new(7, "relax");
        rec.push(0, "loss", 0.1 + 0.2);
        rec.push(1, "loss", -1.0 / 3.0);
        rec.push(1, "log10_variance", core::f64::consts::PI);
        let text = rec.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), 3);
        assert_eq!(parsed.rows[0].2, 0.1 + 0.2);
        assert_eq!(parsed.rows[1].2, -1.0 / 3.0);
        assert_eq!(parsed.rows[2].2, core::f64::consts::PI);
        assert_eq!(parsed.rows[2].3, 7);
        assert_eq!(parsed.rows[2].4, "relax");
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut a = RunRecord::new(1, "reinforce");
        let mut b = RunRecord::new(1, "reinforce");
        for k in 0..100u64 {
            let v = (k as f64).sin() * 1e-3;
            a.push(k, "loss", v);
            b.push(k, "loss", v);
        }
        a.elapsed_secs = 1.0;
        b.elapsed_secs = 99.0; // wall-clock must not leak into the bytes
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
