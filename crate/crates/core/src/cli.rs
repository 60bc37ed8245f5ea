//! Command-line front end.
//!
//! Every command loads a model file, normalizes by the critical constant and
//! writes its artifacts into the output directory. Exit status is 0 on
//! success, 2 for invalid input, 3 when a hypothesis fails ((l4) or
//! non-convergence) and 1 for internal errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::classical::aubry_set;
use crate::discounted::{solve_discounted_with, SolveOptions};
use crate::error::{Error, Result};
use crate::experiments::{
    default_grid, geometric_grid, random_starts, sweep_prepared, uniqueness_prepared, SweepReport,
    DEFAULT_CONV_TOL, DEFAULT_GRID_STEPS,
};
use crate::limit::{prepare, require_l4, u0_from, Analysis};
use crate::mather::{mather_value_lp, MeasureRecord};
use crate::model::CostModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Critical constant c0
    Critical,
    /// Peierls barrier and Aubry set
    Barrier,
    /// Mather value and polytope vertices
    Mather,
    /// Hypotheses (l1)-(l4)
    Check,
    /// Discounted fixed point u_lambda
    Solve,
    /// Vanishing-discount limit u0 by both formulas
    Limit,
    /// ||u_lambda - u0|| over a lambda grid
    Sweep,
    /// Multi-start uniqueness probe
    Uniqueness,
}

#[derive(Debug, Parser)]
#[command(
    name = "weakkam",
    version,
    about = "Discrete weak KAM and vanishing-discount solver"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Model JSON file
    pub model: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// First grid point (default 0.5 * lambda_max)
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_ratio: Option<f64>,
    #[arg(long)]
    pub grid_steps: Option<usize>,
    /// Fixed-point tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Random starts added to the uniqueness probe
    #[arg(long, default_value_t = 1)]
    pub random_starts: usize,
    #[arg(long, default_value_t = 20261016)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub start: Option<f64>,
    pub ratio: f64,
    pub steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: None,
            ratio: 0.5,
            steps: DEFAULT_GRID_STEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model_path: PathBuf,
    pub command: Command,
    pub lambda: Option<f64>,
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    pub tol_fp: Option<f64>,
    pub random_starts: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let needs_lambda = matches!(cli.command, Command::Solve | Command::Uniqueness);
        if needs_lambda && cli.lambda.is_none() {
            return Err(Error::InvalidModel(
                format!("--lambda is required for {:?}", cli.command).to_lowercase(),
            ));
        }
        if !needs_lambda && cli.lambda.is_some() {
            return Err(Error::InvalidModel(
                "--lambda only applies to solve and uniqueness".into(),
            ));
        }
        let grid_given =
            cli.grid_start.is_some() || cli.grid_ratio.is_some() || cli.grid_steps.is_some();
        if grid_given && cli.command != Command::Sweep {
            return Err(Error::InvalidGrid("grid flags only apply to sweep".into()));
        }
        if let Some(t) = cli.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidModel(format!("--tol {t} must be positive")));
            }
        }
        let defaults = GridSpec::default();
        Ok(Self {
            model_path: cli.model,
            command: cli.command,
            lambda: cli.lambda,
            grid: GridSpec {
                start: cli.grid_start,
                ratio: cli.grid_ratio.unwrap_or(defaults.ratio),
                steps: cli.grid_steps.unwrap_or(defaults.steps),
            },
            output_dir: cli.out,
            tol_fp: cli.tol,
            random_starts: cli.random_starts,
            seed: cli.seed,
        })
    }

    fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::default();
        if let Some(t) = self.tol_fp {
            opts.tol_fp = t;
        }
        opts
    }
}

/// Result of a command that ran to completion.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// Human-readable summary for stdout.
    pub summary: String,
    /// Diagnostics for stderr.
    pub diagnostics: Vec<String>,
    pub written: Vec<PathBuf>,
}

pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_hypothesis_failure() {
        return EXIT_HYPOTHESIS;
    }
    match err {
        Error::InvalidModel(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::Dimension { .. }
        | Error::InvalidLambda { .. }
        | Error::InvalidKappa { .. }
        | Error::InvalidGrid(_)
        | Error::CycleCapExceeded { .. } => EXIT_INVALID,
        _ => EXIT_INTERNAL,
    }
}

pub fn load_model(path: &Path) -> Result<CostModel> {
    let text = fs::read_to_string(path)?;
    CostModel::from_json_str(&text)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let model = load_model(&config.model_path)?;
    fs::create_dir_all(&config.output_dir)?;
    let mut w = Writer {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };
    let analysis = prepare(&model)?;
    let labels = analysis.normalized.space().labels().to_vec();
    let mut summary = String::new();
    let mut diagnostics = Vec::new();
    let mut exit_code = EXIT_OK;

    match config.command {
        Command::Critical => {
            w.json("c0.json", &json!({ "c0": analysis.c0 }))?;
            writeln!(summary, "c0 = {}", num(analysis.c0)).unwrap();
        }
        Command::Barrier => {
            let h = &analysis.barrier.h;
            let mut csv = format!("state,{}\n", labels.join(","));
            for (z, l) in labels.iter().enumerate() {
                let row: Vec<String> = h.row(z).iter().map(|&v| num(v)).collect();
                writeln!(csv, "{l},{}", row.join(",")).unwrap();
            }
            w.text("h.csv", &csv)?;
            let aubry = aubry_set(&analysis.barrier)?;
            let names: Vec<&str> = aubry.iter().map(|&i| labels[i].as_str()).collect();
            w.json(
                "aubry.json",
                &json!({ "c0": analysis.c0, "aubry": names, "indices": aubry }),
            )?;
            summary.push_str(&csv);
            writeln!(summary, "Aubry set: {{{}}}", names.join(", ")).unwrap();
        }
        Command::Mather => {
            let space = analysis.normalized.space();
            let records: Vec<MeasureRecord> = analysis
                .polytope
                .vertices
                .iter()
                .map(|mu| MeasureRecord::new(mu, space))
                .collect();
            w.json("vertices.json", &records)?;
            let (lp_value, _) = mather_value_lp(model.base())?;
            w.json(
                "value.json",
                &json!({
                    "value": lp_value,
                    "cycle_value": analysis.polytope.value - analysis.c0,
                    "c0": analysis.c0,
                }),
            )?;
            writeln!(summary, "Mather value = {}", num(lp_value)).unwrap();
            for r in &records {
                writeln!(summary, "  {}", r.description).unwrap();
            }
        }
        Command::Check => {
            let report = &analysis.assumptions;
            let vertices: Vec<String> = analysis
                .polytope
                .vertices
                .iter()
                .map(|mu| mu.describe(analysis.normalized.space()))
                .collect();
            w.json(
                "assumptions.json",
                &json!({ "report": report, "vertices": vertices, "c0": analysis.c0 }),
            )?;
            writeln!(
                summary,
                "kappa_u = {}, kappa_v = {}, lambda_max = {}",
                report.kappa_u,
                report.kappa_v,
                analysis.normalized.lambda_max()
            )
            .unwrap();
            for (v, value) in vertices.iter().zip(&report.l4_values) {
                writeln!(summary, "  {v}: integral of Lambda = {}", num(*value)).unwrap();
            }
            writeln!(
                summary,
                "(l4) {}",
                if report.l4_ok { "holds" } else { "fails" }
            )
            .unwrap();
            diagnostics.extend(report.messages.iter().cloned());
            if !report.l4_ok {
                exit_code = EXIT_HYPOTHESIS;
            }
        }
        Command::Solve => {
            let lambda = config.lambda.expect("validated");
            require_l4(&analysis.normalized, &analysis.polytope.vertices)?;
            let sol = solve_discounted_with(
                &analysis.normalized,
                &analysis.barrier,
                lambda,
                &config.solve_options(),
            )?;
            let mut csv = String::from("state,u_lambda,residual\n");
            for (x, l) in labels.iter().enumerate() {
                writeln!(csv, "{l},{},{}", num(sol.u[x]), num(sol.residual)).unwrap();
            }
            w.text("u_lambda.csv", &csv)?;
            w.json(
                "solve.json",
                &json!({
                    "lambda": lambda,
                    "c0": analysis.c0,
                    "u_lambda": sol.u,
                    "u_from_above": sol.u_from_above,
                    "residual": sol.residual,
                    "iterations": sol.iterations,
                    "lower_bound_ok": sol.lower_bound_ok,
                    "upper_bound_ok": sol.upper_bound_ok,
                    "gap": sol.gap,
                    "unique": sol.unique,
                }),
            )?;
            summary.push_str(&csv);
            if !sol.unique {
                diagnostics.push(format!(
                    "iterations from below and above differ by {:e}",
                    sol.gap
                ));
            }
        }
        Command::Limit => {
            let r = u0_from(&analysis)?;
            let mut csv = String::from("state,u0_sup,u0_mather,gap\n");
            for (x, l) in labels.iter().enumerate() {
                writeln!(
                    csv,
                    "{l},{},{},{}",
                    num(r.u0[x]),
                    num(r.u0_mather[x]),
                    num((r.u0[x] - r.u0_mather[x]).abs())
                )
                .unwrap();
            }
            w.text("u0.csv", &csv)?;
            summary.push_str(&csv);
            writeln!(summary, "c0 = {}, formula gap = {:e}", num(r.c0), r.gap).unwrap();
        }
        Command::Sweep => {
            let grid = sweep_grid(config, &analysis)?;
            let report =
                sweep_prepared(&analysis, &grid, &config.solve_options(), DEFAULT_CONV_TOL)?;
            let csv = report.to_csv();
            w.text("sweep.csv", &csv)?;
            w.text("sweep.gp", &SweepReport::gnuplot_script("sweep.csv"))?;
            summary.push_str(&csv);
            writeln!(summary, "converged: {}", report.converged).unwrap();
            if !report.converged {
                diagnostics.push("sweep did not meet the convergence criterion".into());
            }
        }
        Command::Uniqueness => {
            let lambda = config.lambda.expect("validated");
            require_l4(&analysis.normalized, &analysis.polytope.vertices)?;
            let extra = random_starts(
                analysis.normalized.len(),
                config.random_starts,
                start_scale(&analysis),
                config.seed,
            );
            let report = uniqueness_prepared(&analysis, lambda, &extra, &config.solve_options())?;
            w.json("uniqueness.json", &report)?;
            writeln!(
                summary,
                "lambda = {}, max pairwise gap = {:e}, unique = {}",
                num(lambda),
                report.max_pairwise_gap,
                report.unique
            )
            .unwrap();
            for s in &report.starts {
                if let Some(e) = &s.error {
                    diagnostics.push(format!("start {}: {e}", s.start));
                }
            }
            if !report.all_converged() {
                exit_code = EXIT_HYPOTHESIS;
            }
        }
    }
    Ok(Outcome {
        exit_code,
        summary,
        diagnostics,
        written: w.written,
    })
}

fn sweep_grid(config: &RunConfig, analysis: &Analysis) -> Result<Vec<f64>> {
    let lambda_max = analysis.normalized.lambda_max();
    let g = &config.grid;
    if g == &GridSpec::default() {
        return Ok(default_grid(lambda_max));
    }
    geometric_grid(
        g.start.unwrap_or(0.5 * lambda_max),
        g.ratio,
        g.steps,
        lambda_max,
    )
}

/// Random starts range over twice the spread of the barrier.
fn start_scale(analysis: &Analysis) -> f64 {
    let h = &analysis.barrier.h;
    2.0 * (1.0 + h.max().abs().max(h.min().abs()))
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|config| run(&config));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for d in &outcome.diagnostics {
                eprintln!("{d}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code_for(&Error::InvalidModel("x".into())),
            EXIT_INVALID
        );
        assert_eq!(exit_code_for(&Error::Unbounded), EXIT_HYPOTHESIS);
        let nested = Error::AtLambda {
            lambda: 0.1,
            source: Box::new(Error::NonConvergence {
                lambda: 0.1,
                iterations: 3,
                residual: 1.0,
            }),
        };
        assert_eq!(exit_code_for(&nested), EXIT_HYPOTHESIS);
        assert_eq!(exit_code_for(&Error::EmptyAubrySet), EXIT_INTERNAL);
    }

    #[test]
    fn config_validation() {
        let parse = |args: &[&str]| RunConfig::from_cli(Cli::try_parse_from(args).unwrap());
        assert!(parse(&["weakkam", "solve", "m.json"]).is_err());
        assert!(parse(&["weakkam", "solve", "m.json", "--lambda", "0.1"]).is_ok());
        assert!(parse(&["weakkam", "limit", "m.json", "--lambda", "0.1"]).is_err());
        assert!(parse(&["weakkam", "limit", "m.json", "--grid-steps", "4"]).is_err());
        assert!(parse(&["weakkam", "sweep", "m.json", "--tol=-1"]).is_err());
        let c = parse(&["weakkam", "sweep", "m.json", "--grid-ratio", "0.25"]).unwrap();
        assert_eq!(c.grid.ratio, 0.25);
        assert_eq!(c.grid.steps, DEFAULT_GRID_STEPS);
    }
}
