//! Output directory layout:
//!
//! ```text
//! <out>/config.json        input and resolved config, version tag
//! <out>/summary.json       variances, bounds, standard errors
//! <out>/runs/run_####.csv  per-run series
//! <out>/sweep.csv          one row per sweep point
//! ```
//!
//! CSV files start with `#` lines carrying the version tag and the resolved
//! config as compact JSON.

use super::{HarnessError, ResolvedConfig, RunRecord, ScenarioConfig, SweepResult};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    version: &'static str,
    config: &'a ResolvedConfig,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ConfigBody<'a> {
    input: &'a ScenarioConfig,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    result: &'a T,
}

pub struct OutputDir {
    root: PathBuf,
    resolved: ResolvedConfig,
}

impl OutputDir {
    /// Creates `root` if needed and writes `config.json`.
    pub fn create(root: &Path, cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        fs::create_dir_all(root)?;
        let out = Self { root: root.to_path_buf(), resolved: cfg.resolved()? };
        out.write_document("config.json", ConfigBody { input: cfg })?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_document<T: Serialize>(&self, name: &str, body: T) -> Result<PathBuf, HarnessError> {
        let path = self.root.join(name);
        let doc = Document { version: VERSION, config: &self.resolved, body };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Writes `{version, config, result}` to `name`.
    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf, HarnessError> {
        self.write_document(name, Wrapped { result })
    }

    /// Opens a CSV under the output root with the provenance lines written.
    pub fn csv(&self, relative: &str) -> Result<BufWriter<File>, HarnessError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# {VERSION}")?;
        writeln!(w, "# config {}", serde_json::to_string(&self.resolved)?)?;
        Ok(w)
    }

    pub fn write_runs(&self, records: &[RunRecord]) -> Result<(), HarnessError> {
        for r in records {
            let mut w = self.csv(&format!("runs/run_{:04}.csv", r.run))?;
            writeln!(w, "bin_index,t_s,x_true_rad_s,count,est_avg,est_simple,est_ou")?;
            for n in 0..r.counts.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    n,
                    r.counts.bin_time(n),
                    r.truth.samples[n],
                    r.counts.counts[n],
                    r.average.estimates[n],
                    r.simple.estimates[n],
                    r.ou.estimates[n]
                )?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn write_sweep(&self, sweep: &SweepResult, name: &str) -> Result<(), HarnessError> {
        let mut w = self.csv(name)?;
        let mut header: Vec<String> = sweep.parameters.clone();
        header.extend(
            [
                "seed",
                "runs",
                "var_avg",
                "var_avg_se",
                "var_simple",
                "var_simple_se",
                "var_ou",
                "var_ou_se",
                "sigma_sq",
                "crlb_full",
                "crlb_causal",
                "info_product",
            ]
            .map(String::from),
        );
        writeln!(w, "{}", header.join(","))?;
        for p in &sweep.points {
            let mut row: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
            row.push(p.seed.to_string());
            row.push(p.runs.to_string());
            for v in [&p.var_average, &p.var_simple, &p.var_ou] {
                row.push(v.mean.to_string());
                row.push(v.std_error.to_string());
            }
            row.extend([p.bath_variance, p.crlb.var_full, p.crlb.var_causal, p.crlb.info_product].map(|v| v.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_scenario;

    #[test]
    fn layout_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig { runs: 2, ..ScenarioConfig::default() };
        cfg.sim.duration_s = 1e-3;
        cfg.sim.t_discard_s = 0.0;
        let out = OutputDir::create(dir.path(), &cfg).unwrap();
        let res = run_scenario(&cfg).unwrap();
        out.write_runs(&res.records).unwrap();
        out.write_json("summary.json", &res.summary).unwrap();

        let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
        assert_eq!(config["version"], VERSION);
        assert_eq!(config["input"]["runs"], 2);
        assert!(config["config"]["rabi_rad_s"].as_f64().unwrap() > 1e7);

        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(summary["result"]["var_ou"]["mean"].as_f64().unwrap() >= 0.0);

        let run = fs::read_to_string(dir.path().join("runs/run_0001.csv")).unwrap();
        let lines: Vec<&str> = run.lines().collect();
        assert!(lines[0].starts_with("# cptsense"));
        assert!(lines[1].starts_with("# config {"));
        assert_eq!(lines[2], "bin_index,t_s,x_true_rad_s,count,est_avg,est_simple,est_ou");
        assert_eq!(lines.len(), 3 + 100);
        assert!(lines[3..].iter().all(|l| l.split(',').count() == 7));
    }
}
