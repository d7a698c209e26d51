use std::path::PathBuf;

use anyhow::{bail, Context};
use blitz_harness::bench::{
    build_instance, cached_reference, init_threads, load_data, prepare, run_arm, run_benchmark, screen_report,
    summary_table, Arm, ArmOptions, DataSource, Reg, RunConfig, Task,
};
use blitz_harness::fixtures::{make_fixture, write_fixture, FixtureKind, FixtureSpec};
use blitz_harness::preprocess::PreprocessOptions;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "blitz", version, about = "Working-set and screening solvers for piecewise objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the coefficients as JSON.
    Solve {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_enum, default_value = "blitzws")]
        arm: Arm,
        #[command(flatten)]
        run: RunArgs,
        /// Solution file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare Blitz and GapSafe screening from one certificate.
    Screen {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Unscreened passes before the certificate is taken.
        #[arg(long, default_value_t = 20)]
        passes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run benchmark arms against a cached reference optimum.
    Bench {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Arm to run; all four when absent. Repeatable.
        #[arg(long, value_enum)]
        arm: Vec<Arm>,
        #[command(flatten)]
        run: RunArgs,
        /// Directory for the JSONL logs and summaries.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Write a seeded synthetic dataset.
    Fixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        #[arg(long, default_value_t = 1000)]
        cols: usize,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        support: Option<f64>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, value_enum)]
    task: Task,
    /// libsvm file, or `synthetic:<lasso|logreg|group|svm>`.
    #[arg(long)]
    data: String,
    /// Group file (one line of 1-based features per group); defaults to
    /// `<data>.groups` with the extension replaced.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, group = "reg")]
    lambda: Option<f64>,
    /// λ as a fraction of λ_max.
    #[arg(long, group = "reg")]
    lambda_ratio: Option<f64>,
    #[arg(long = "C", group = "reg")]
    c: Option<f64>,
    /// Seed for synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 1000)]
    cols: usize,
    /// Unpenalized intercept.
    #[arg(long)]
    bias: bool,
    #[arg(long, default_value_t = 10)]
    min_nnz: usize,
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Relative certified gap at which a run stops.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 600.0)]
    max_seconds: f64,
}

impl InstanceArgs {
    fn reg(&self) -> anyhow::Result<Reg> {
        Ok(match (self.lambda, self.lambda_ratio, self.c) {
            (Some(l), None, None) => Reg::Lambda(l),
            (None, Some(r), None) => Reg::Ratio(r),
            (None, None, Some(c)) => Reg::C(c),
            (None, None, None) if self.task == Task::Svm => Reg::C(1.0),
            (None, None, None) => Reg::Ratio(0.1),
            _ => bail!("give at most one of --lambda, --lambda-ratio, --C"),
        })
    }

    fn source(&self) -> anyhow::Result<DataSource> {
        if let Some(kind) = self.data.strip_prefix("synthetic:") {
            let kind = <FixtureKind as clap::ValueEnum>::from_str(kind, true)
                .map_err(|e| anyhow::anyhow!("unknown synthetic kind {kind:?}: {e}"))?;
            return Ok(DataSource::Synthetic(FixtureSpec::new(kind, self.seed, self.rows, self.cols)));
        }
        let path = PathBuf::from(&self.data);
        let groups = self.groups.clone().or_else(|| {
            let side = path.with_extension("groups");
            (self.task == Task::Grouplasso && side.exists()).then_some(side)
        });
        Ok(DataSource::File { path, groups })
    }

    fn preprocess(&self) -> PreprocessOptions {
        PreprocessOptions { min_nnz: self.min_nnz, standardize: !self.no_standardize, bias_column: false }
    }
}

#[derive(Serialize)]
struct Solution {
    task: Task,
    arm: Arm,
    value: f64,
    lambda_max: Option<f64>,
    objective: f64,
    gap: f64,
    converged: bool,
    /// Coefficients on the original columns.
    w: Vec<f64>,
    bias: f64,
    nonzeros: usize,
}

fn emit(out: Option<&PathBuf>, text: String) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    match Cli::parse().command {
        Command::Solve { inst, arm, run, out } => {
            let (ds, groups) = load_data(&inst.source()?)?;
            let prep = prepare(inst.task, &ds, groups.as_deref(), inst.preprocess(), inst.bias)?;
            let instance = build_instance(&prep, inst.reg()?)?;
            let reference = cached_reference(&instance, None)?;
            let opts = ArmOptions { tol: run.tol, max_seconds: run.max_seconds, ..Default::default() };
            let r = run_arm(&instance, &reference, arm, &opts)?;
            let mut w = vec![0.0; prep.n_original];
            for (k, &j) in prep.kept.iter().enumerate() {
                w[j] = r.w[k] * prep.scales[k];
            }
            let sol = Solution {
                task: inst.task,
                arm,
                value: instance.value,
                lambda_max: instance.lambda_max,
                objective: r.summary.objective,
                gap: r.summary.gap,
                converged: r.summary.converged,
                nonzeros: w.iter().filter(|v| **v != 0.0).count(),
                w,
                bias: r.bias,
            };
            emit(out.as_ref(), serde_json::to_string_pretty(&sol)? + "\n")?;
            eprint!("{}", summary_table(&[r.summary]));
        }
        Command::Screen { inst, passes, out } => {
            let (ds, groups) = load_data(&inst.source()?)?;
            let prep = prepare(inst.task, &ds, groups.as_deref(), inst.preprocess(), inst.bias)?;
            let instance = build_instance(&prep, inst.reg()?)?;
            let rep = screen_report(&instance, passes)?;
            emit(out.as_ref(), serde_json::to_string_pretty(&rep)? + "\n")?;
        }
        Command::Bench { inst, arm, run, out, cache_dir } => {
            let cfg = RunConfig {
                task: inst.task,
                data: inst.source()?,
                reg: inst.reg()?,
                arms: if arm.is_empty() { Arm::ALL.to_vec() } else { arm },
                options: ArmOptions { tol: run.tol, max_seconds: run.max_seconds, ..Default::default() },
                preprocess: inst.preprocess(),
                bias: inst.bias,
                out,
                cache_dir,
            };
            let res = run_benchmark(&cfg)?;
            print!("{}", summary_table(&res.summaries()));
        }
        Command::Fixture { kind, seed, rows, cols, density, support, name, out } => {
            let mut spec = FixtureSpec::new(kind, seed, rows, cols);
            if let Some(d) = density {
                spec.density = d;
            }
            if let Some(s) = support {
                spec.support = s;
            }
            let fx = make_fixture(&spec)?;
            for p in write_fixture(&out, name.as_deref(), &fx)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
