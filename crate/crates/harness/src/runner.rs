//! Runs an experiment and writes its files as each stage completes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiments::{self, ExperimentReport};
use crate::output::{emit_plot_data, write_sweep};
use crate::verify;

struct Recorder {
    dir: PathBuf,
    report: ExperimentReport,
}

impl Recorder {
    fn new(dir: &Path, kind: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Recorder { dir: dir.to_path_buf(), report: ExperimentReport::new(kind) })
    }

    /// Flushes the new stage's sweeps and series, then the cumulative results.json.
    fn stage(&mut self, part: ExperimentReport) -> Result<()> {
        for s in &part.sweeps {
            let f = std::fs::File::create(self.dir.join(format!("sweep_{}.csv", s.name)))?;
            write_sweep(s, std::io::BufWriter::new(f))?;
        }
        for s in &part.series {
            emit_plot_data(&self.dir, s)?;
        }
        self.report.merge(part);
        self.write_json()
    }

    fn write_json(&self) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(self.dir.join("results.json"))?);
        serde_json::to_writer_pretty(&mut f, &self.report)?;
        writeln!(f)?;
        Ok(())
    }
}

fn single(name: &str, sweep: crate::output::Sweep) -> ExperimentReport {
    let mut r = ExperimentReport::new(name);
    r.add_sweep(sweep);
    r
}

/// Executes `cfg.experiment`, writing results.json, sweep_*.csv, series_*.csv and plots/*.svg into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let kind = cfg.experiment;
    let mut rec = Recorder::new(out, kind.name())?;
    match kind {
        ExperimentKind::Localization => {
            rec.stage(experiments::energy_localization(cfg)?)?;
            rec.stage(experiments::minimizer_convergence(cfg)?)?;
        }
        ExperimentKind::Regimes => rec.stage(experiments::regimes(cfg)?)?,
        ExperimentKind::Discrete => rec.stage(experiments::discrete(cfg)?)?,
        ExperimentKind::Verify => {
            let v = &cfg.verify;
            rec.stage(single("verify", verify::kernel_normalization()?))?;
            rec.stage(single("verify", verify::linear_exactness(v)?))?;
            let (h, max_ratio) = verify::hardy(v, cfg.seed)?;
            let mut part = single("verify", h);
            part.summary.insert("hardy_max_bump_ratio".into(), max_ratio);
            rec.stage(part)?;
            rec.stage(single("verify", verify::convolution(v, cfg.seed)?))?;
            rec.stage(single("verify", verify::seminorm_structure(v, cfg.seed)?))?;
            rec.stage(single("verify", verify::predicates()?))?;
        }
        ExperimentKind::Solve => {
            let (rep, sol, nodes) = experiments::solve(cfg)?;
            let mut w = csv::Writer::from_path(out.join("solution.csv"))?;
            let d = cfg.d();
            let names = ["x", "y", "z"];
            let mut header: Vec<&str> = names[..d].to_vec();
            header.push("u");
            w.write_record(&header)?;
            for (x, u) in nodes.iter().zip(&sol.values) {
                let mut row: Vec<String> = x[..d].iter().map(|c| format!("{c:e}")).collect();
                row.push(format!("{u:e}"));
                w.write_record(&row)?;
            }
            w.flush()?;
            rec.stage(rep)?;
        }
    }
    Ok(rec.report)
}
