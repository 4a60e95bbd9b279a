//! Command-line front end: `run`, `sweep` and `baseline`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{Number, Value};
use thiserror::Error;

use crate::sim::{self, ScenarioConfig, ScenarioFile, SimError, SimulationReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("parameter {path} expects an integer, got {value}")]
    NotAnInteger { path: String, value: f64 },
    #[error("no sweep values given")]
    NoValues,
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

#[derive(Debug, Parser)]
#[command(name = "stakesim", version, about = "Staked data-marketplace simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write report.json and timeline.csv
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one scenario per value of a single parameter
    Sweep {
        config: PathBuf,
        /// Dotted config path, e.g. `num_words`, `contract.submission_cost`, `agents[0].mean_deposit`
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the accuracy of the clean all-data baseline
    Baseline { config: PathBuf },
}

/// One parameter and the values to try for it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Option<Vec<Segment>> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return None;
        }
        out.push(Segment::Key(key.to_owned()));
        while !rest.is_empty() {
            let close = rest.find(']')?;
            out.push(Segment::Index(rest.get(1..close)?.parse().ok()?));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return None;
            }
        }
    }
    Some(out)
}

/// Returns a copy of `file` with the numeric field at `path` set to `value`.
pub fn apply_override(file: &ScenarioFile, path: &str, value: f64) -> Result<ScenarioFile, CliError> {
    let unknown = || CliError::UnknownParameter(path.to_owned());
    let segments = parse_path(path).ok_or_else(unknown)?;
    let mut root = serde_json::to_value(file).expect("config serializes");
    let mut slot = &mut root;
    for seg in &segments {
        slot = match seg {
            Segment::Key(k) => slot.get_mut(k.as_str()),
            Segment::Index(i) => slot.get_mut(*i),
        }
        .ok_or_else(unknown)?;
    }
    let integer = match slot {
        Value::Number(n) => n.is_u64() || n.is_i64(),
        Value::Null if path == "max_virtual_time_s" => true,
        _ => return Err(unknown()),
    };
    *slot = if integer {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(CliError::NotAnInteger {
                path: path.to_owned(),
                value,
            });
        }
        Value::Number(Number::from(value as u64))
    } else {
        Value::Number(Number::from_f64(value).ok_or_else(unknown)?)
    };
    Ok(serde_json::from_value(root).map_err(|e| SimError::InvalidConfig(format!("{path}: {e}")))?)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Write {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Write {
        path: dir.to_owned(),
        message: e.to_string(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|d| format!("{d:.6}")).unwrap_or_default()
}

pub fn summary_line(report: &SimulationReport) -> String {
    let drains: Vec<String> = report
        .drain_time_days
        .iter()
        .map(|(name, d)| {
            format!(
                "drain_days[{name}]={}",
                d.map(|d| format!("{d:.6}")).unwrap_or_else(|| "never".into())
            )
        })
        .collect();
    let mut line = format!(
        "accuracy={:.6} accuracy_all={:.6} gap={:.6}",
        report.final_accuracy, report.accuracy_all, report.gap
    );
    for d in drains {
        line.push(' ');
        line.push_str(&d);
    }
    line
}

pub fn cmd_run(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let mut file = ScenarioFile::load(config_path)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    let config = ScenarioConfig::try_from(file)?;
    let report = sim::run(&config)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("report.json"), report.to_json().as_bytes())?;
    write_file(&out_dir.join("timeline.csv"), report.timeline_csv().as_bytes())?;
    Ok(summary_line(&report))
}

fn sweep_row(value: f64, r: &SimulationReport) -> Vec<String> {
    vec![
        value.to_string(),
        format!("{:.6}", r.final_accuracy),
        format!("{:.6}", r.accuracy_all),
        format!("{:.6}", r.gap),
        fmt_opt(r.first_drain_days()),
    ]
}

/// Runs every sweep point; results come back in the order of `spec.values`.
pub fn run_sweep(
    base: &ScenarioFile,
    spec: &SweepSpec,
    jobs: usize,
) -> Result<Vec<SimulationReport>, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::NoValues);
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| Ok(ScenarioConfig::try_from(apply_override(base, &spec.parameter, v)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let reports: Vec<Result<SimulationReport, SimError>> =
        pool.install(|| configs.par_iter().map(sim::run).collect());
    Ok(reports.into_iter().collect::<Result<Vec<_>, _>>()?)
}

pub fn cmd_sweep(config_path: &Path, spec: &SweepSpec, out_dir: &Path, jobs: usize) -> Result<String, CliError> {
    let base = ScenarioFile::load(config_path)?;
    let reports = run_sweep(&base, spec, jobs)?;
    ensure_dir(out_dir)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Write {
        path: out_dir.join("sweep.csv"),
        message: e.to_string(),
    };
    w.write_record(["value", "accuracy_pct", "accuracy_all_pct", "gap_pct", "drain_days"])
        .map_err(io)?;
    for (value, report) in spec.values.iter().zip(&reports) {
        w.write_record(sweep_row(*value, report)).map_err(io)?;
        write_file(
            &out_dir.join(format!("timeline_{value}.csv")),
            report.timeline_csv().as_bytes(),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Write {
        path: out_dir.join("sweep.csv"),
        message: e.to_string(),
    })?;
    write_file(&out_dir.join("sweep.csv"), &bytes)?;
    Ok(format!("{} points written to {}", reports.len(), out_dir.display()))
}

pub fn cmd_baseline(config_path: &Path) -> Result<String, CliError> {
    let config = ScenarioConfig::load(config_path)?;
    Ok(format!("{:.6}", sim::baseline_accuracy(&config)?))
}

/// Dispatches a parsed command line; the `Ok` string goes to stdout.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed),
        Command::Sweep {
            config,
            param,
            values,
            out,
            jobs,
        } => cmd_sweep(
            &config,
            &SweepSpec {
                parameter: param,
                values,
            },
            &out,
            jobs,
        ),
        Command::Baseline { config } => cmd_baseline(&config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_parsing() {
        assert_eq!(parse_path("num_words"), Some(vec![Segment::Key("num_words".into())]));
        assert_eq!(
            parse_path("agents[1].mean_deposit"),
            Some(vec![
                Segment::Key("agents".into()),
                Segment::Index(1),
                Segment::Key("mean_deposit".into())
            ])
        );
        assert_eq!(parse_path("agents[x].a"), None);
        assert_eq!(parse_path(".a"), None);
        assert_eq!(parse_path("a[1]b"), None);
    }

    #[test]
    fn overrides_hit_the_right_field() {
        let f = ScenarioFile::default();
        let g = apply_override(&f, "contract.submission_cost", 25.0).unwrap();
        assert_eq!(g.contract.submission_cost, 25);
        let g = apply_override(&f, "agents[0].mean_deposit", 0.5).unwrap();
        assert_eq!(g.agents[0].mean_deposit, 0.5);
        assert_eq!(g.agents[1].mean_deposit, 100.0);
        let g = apply_override(&f, "num_words", 800.0).unwrap();
        assert_eq!(g.num_words, 800);
        let g = apply_override(&f, "max_virtual_time_s", 86400.0).unwrap();
        assert_eq!(g.max_virtual_time_s, Some(86400));
        let g = apply_override(&f, "train_size", 0.32).unwrap();
        assert_eq!(g.train_size, 0.32);
    }

    #[test]
    fn override_errors() {
        let f = ScenarioFile::default();
        for bad in ["nope", "contract.nope", "agents[5].mean_deposit", "agents[0].id", "dataset"] {
            let err = apply_override(&f, bad, 1.0).unwrap_err();
            assert_eq!(err.to_string(), format!("unknown parameter {bad}"));
        }
        assert!(matches!(
            apply_override(&f, "num_words", 1.5),
            Err(CliError::NotAnInteger { .. })
        ));
    }

    #[test]
    fn cli_parses_value_lists() {
        let cli = Cli::try_parse_from([
            "stakesim", "sweep", "c.toml", "--param", "num_words", "--values", "100,200,300", "--out", "o",
            "--jobs", "3",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep { values, jobs, .. } => {
                assert_eq!(values, vec![100.0, 200.0, 300.0]);
                assert_eq!(jobs, 3);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
