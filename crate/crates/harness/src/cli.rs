//! Command-line interface: `solve`, `experiment <kind>`, `verify`, `validate`.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiments::ExperimentReport;
use crate::runner;
use crate::validate::{has_errors, validate, Severity};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wplap", about = "Weighted nonlocal p-Laplacian experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for inner evaluations (default 1, or THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides OUTPUT_DIR and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single Dirichlet solve.
    Solve,
    /// Run one experiment.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
    /// All verification suites.
    Verify,
    /// Print diagnostics for a configuration.
    Validate,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os("OUTPUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn threads(common: &Common) -> std::result::Result<usize, String> {
    match common.threads {
        Some(t) => Ok(t),
        None => match std::env::var("THREADS") {
            Ok(v) => v.parse().map_err(|_| format!("THREADS='{v}' is not a positive integer")),
            Err(_) => Ok(1),
        },
    }
    .and_then(|t| if t == 0 { Err("thread count must be positive".into()) } else { Ok(t) })
}

fn print_report(rep: &ExperimentReport) {
    for s in &rep.sweeps {
        let failed = s.rows.iter().filter(|r| !r.pass).count();
        println!("{:<28} {:>4} rows  {}", s.name, s.rows.len(), if failed == 0 { "pass".to_string() } else { format!("FAIL ({failed})") });
    }
    for (k, v) in &rep.summary {
        println!("{k} = {v:e}");
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    println!("{}: {}", rep.kind, if rep.pass { "pass" } else { "FAIL" });
}

fn report_diagnostics(cfg: &ExperimentConfig) -> bool {
    let diags = validate(cfg);
    for d in &diags {
        eprintln!("{d}");
    }
    !has_errors(&diags)
}

fn execute(cfg: ExperimentConfig, common: &Common) -> i32 {
    if !report_diagnostics(&cfg) {
        return EXIT_CONFIG;
    }
    let out = out_dir(common, &cfg);
    let n = match threads(common) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    };
    match pool.install(|| runner::run(&cfg, &out)) {
        Ok(rep) => {
            print_report(&rep);
            println!("results written to {}", out.display());
            if rep.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_FAIL
            }
        }
    }
}

/// Entry point; `args[0]` is the program name. Returns the process exit code.
pub fn run_cli<S: AsRef<str>>(args: &[S]) -> i32 {
    let cli = match Cli::try_parse_from(args.iter().map(|s| s.as_ref())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match load(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match cli.command {
        Command::Validate => {
            let diags = validate(&cfg);
            for d in &diags {
                println!("{d}");
            }
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            println!("{} diagnostics, {errors} errors", diags.len());
            if errors > 0 {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            }
        }
        Command::Solve => execute(ExperimentConfig { experiment: ExperimentKind::Solve, ..cfg }, &cli.common),
        Command::Verify => execute(ExperimentConfig { experiment: ExperimentKind::Verify, ..cfg }, &cli.common),
        Command::Experiment { kind } => execute(ExperimentConfig { experiment: kind, ..cfg }, &cli.common),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn write_config(dir: &Path, name: &str, json: &str) -> String {
        let p = dir.join(name);
        std::fs::write(&p, json).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn cli(args: &[&str]) -> i32 {
        let mut v = vec!["wplap"];
        v.extend_from_slice(args);
        run_cli(&v)
    }

    #[test]
    fn beta_outside_range_is_fatal_only_outside_regimes() {
        let dir = tempfile::tempdir().unwrap();
        let solve = write_config(dir.path(), "a.json", r#"{"experiment":"solve","energy":{"beta":2.5}}"#);
        let regimes = write_config(dir.path(), "b.json", r#"{"experiment":"regimes","energy":{"beta":2.5}}"#);
        assert_eq!(cli(&["validate", "--config", &solve]), EXIT_CONFIG);
        assert_eq!(cli(&["validate", "--config", &regimes]), EXIT_PASS);
    }

    #[test]
    fn config_problems_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let unknown = write_config(dir.path(), "u.json", r#"{"energy":{"gamma":1}}"#);
        let broken = write_config(dir.path(), "b.json", "{ not json");
        let out = dir.path().join("o").to_string_lossy().into_owned();
        assert_eq!(cli(&["validate", "--config", &unknown]), EXIT_CONFIG);
        assert_eq!(cli(&["solve", "--config", &broken, "--out", &out]), EXIT_CONFIG);
        assert_eq!(cli(&["solve", "--config", "/nonexistent/x.json"]), EXIT_CONFIG);
        assert_eq!(cli(&["frobnicate"]), EXIT_CONFIG);
        assert_eq!(cli(&["solve", "--threads", "0", "--out", &out]), EXIT_CONFIG);
        assert!(!dir.path().join("o").exists());
    }

    #[test]
    fn solve_writes_results_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "s.json", r#"{"ladders":{"resolution":16},"energy":{"delta":0.2}}"#);
        let out = dir.path().join("out");
        assert_eq!(cli(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_PASS);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
        assert_eq!(json["kind"], "solve");
        assert_eq!(json["pass"], true);
        let sol = std::fs::read_to_string(out.join("solution.csv")).unwrap();
        assert_eq!(sol.lines().next().unwrap(), "x,y,u");
        assert!(std::fs::read_to_string(out.join("sweep_solve.csv")).unwrap().starts_with("# wplap-sweep v1"));
    }

    #[test]
    fn same_config_and_seed_give_identical_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "d.json",
            r#"{"labels":[{"kind":"point","at":[0.5,0.5],"value":1.0}],"energy":{"delta":0.3},
                "ladders":{"n":[64,128],"seeds":2},"discrete":{"reference_resolution":32}}"#,
        );
        let run = |name: &str, seed: &str| {
            let out = dir.path().join(name);
            cli(&["experiment", "discrete", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
            std::fs::read(out.join("sweep_discrete_error.csv")).unwrap()
        };
        let a = run("a", "7");
        let b = run("b", "7");
        let c = run("c", "8");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn failing_checks_exit_with_one() {
        let dir = tempfile::tempdir().unwrap();
        // An error bound the tiny ladder cannot meet.
        let cfg = write_config(
            dir.path(),
            "f.json",
            r#"{"labels":[{"kind":"point","at":[0.5,0.5],"value":1.0}],"energy":{"delta":0.3},
                "ladders":{"n":[64],"seeds":1},"discrete":{"reference_resolution":32,"final_tolerance":1e-6}}"#,
        );
        let out = dir.path().join("f");
        assert_eq!(cli(&["experiment", "discrete", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_FAIL);
        assert!(out.join("results.json").exists());
    }
}
