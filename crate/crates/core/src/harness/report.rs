//! Result files written by the harness.
//!
//! * `results.csv`: one row per configuration with `label, algorithm, mean,
//!   sd, solved, runs` and one `seed_<s>` column per repeat. Cells hold the
//!   episodes to solve; a trailing `*` marks an unsolved run (counted at the
//!   full budget), a trailing `!` a run that failed.
//! * `stats.json`: Kruskal-Wallis statistic and Conover p-value matrix.
//! * `convergence/<label>.csv`: `iteration, mean_reward, sd_reward`.
//! * `runs/<label>/seed_<s>.json`: per-run results.

use std::fs;
use std::path::{Path, PathBuf};

use crate::envs::csv_err;
use crate::error::{Error, Result};

use super::{ConfigResult, ResultTable, RunCell, StatsSummary};

/// File-system friendly version of a configuration label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

fn cell(config: &ConfigResult, j: usize) -> String {
    match &config.runs[j] {
        RunCell::Failed(_) => format!("{}!", config.episodes[j]),
        RunCell::Done(r) if !r.solved => format!("{}*", config.episodes[j]),
        RunCell::Done(_) => config.episodes[j].to_string(),
    }
}

/// Renders `results.csv`.
pub fn results_csv(table: &ResultTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["label", "algorithm", "mean", "sd", "solved", "runs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(table.seeds.iter().map(|s| format!("seed_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for c in &table.configs {
        let mut row = vec![
            c.label.clone(),
            c.algorithm.id().to_string(),
            format!("{:.2}", c.mean),
            format!("{:.2}", c.sd),
            c.solved_count().to_string(),
            c.episodes.len().to_string(),
        ];
        row.extend((0..c.episodes.len()).map(|j| cell(c, j)));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        what: "csv",
        detail: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes all result files below `dir`, replacing earlier ones.
pub fn emit_results(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    mkdir(dir)?;
    let mut written = Vec::new();

    let results = dir.join("results.csv");
    write(&results, &results_csv(table)?)?;
    written.push(results);

    if let Some(stats) = &table.stats {
        let path = dir.join("stats.json");
        write(&path, &serde_json::to_string_pretty(stats)?)?;
        written.push(path);
    }

    let conv_dir = dir.join("convergence");
    mkdir(&conv_dir)?;
    for c in &table.configs {
        let path = conv_dir.join(format!("{}.csv", slug(&c.label)));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "mean_reward", "sd_reward"])
            .map_err(csv_err)?;
        for p in c.convergence() {
            w.write_record([
                p.iteration.to_string(),
                format!("{:.4}", p.mean_reward),
                format!("{:.4}", p.sd_reward),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse {
            what: "csv",
            detail: e.to_string(),
        })?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    for c in &table.configs {
        let run_dir = dir.join("runs").join(slug(&c.label));
        mkdir(&run_dir)?;
        for (j, run) in c.runs.iter().enumerate() {
            let path = run_dir.join(format!("seed_{}.json", table.seeds[j]));
            let body = match run {
                RunCell::Done(r) => r.to_json()?,
                RunCell::Failed(e) => serde_json::to_string_pretty(&serde_json::json!({
                    "seed": table.seeds[j],
                    "error": e,
                }))?,
            };
            write(&path, &body)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Per-configuration episode counts read back from `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredResults {
    pub labels: Vec<String>,
    pub episodes: Vec<Vec<f64>>,
    pub solved: Vec<Vec<bool>>,
}

impl StoredResults {
    pub fn stats(&self) -> Result<StatsSummary> {
        StatsSummary::compute(self.labels.clone(), &self.episodes)
    }
}

pub fn read_results_csv(path: &Path) -> Result<StoredResults> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let first_seed = headers
        .iter()
        .position(|h| h.starts_with("seed_"))
        .ok_or_else(|| Error::Parse {
            what: "results.csv",
            detail: "no seed columns".into(),
        })?;
    let mut out = StoredResults {
        labels: Vec::new(),
        episodes: Vec::new(),
        solved: Vec::new(),
    };
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        out.labels.push(record[0].to_string());
        let mut eps = Vec::new();
        let mut solved = Vec::new();
        for cell in record.iter().skip(first_seed) {
            let trimmed = cell.trim_end_matches(['*', '!']);
            let value: f64 = trimmed.parse().map_err(|_| Error::Parse {
                what: "results.csv",
                detail: format!("bad cell {cell:?}"),
            })?;
            eps.push(value);
            solved.push(trimmed.len() == cell.len());
        }
        out.episodes.push(eps);
        out.solved.push(solved);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("SMBNE DynSet 10"), "SMBNE_DynSet_10");
        assert_eq!(slug("CGP MutRate 5%"), "CGP_MutRate_5");
    }
}
