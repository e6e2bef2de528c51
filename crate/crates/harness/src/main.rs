use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use s2cd::data::write_libsvm;
use s2cd::solvers::Method;
use s2cd::{LossKind, Problem, RegMode};
use s2cd_harness::compare::{compare, render};
use s2cd_harness::diagnose::{diagnose, DiagnoseOptions};
use s2cd_harness::run::run;
use s2cd_harness::{ExperimentSpec, HarnessError, Overrides, ProblemSource, Result, TraceFile};

#[derive(Parser)]
#[command(name = "s2cd", version, about = "Semi-stochastic coordinate descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run solvers and write a JSON-lines trace.
    Run(RunArgs),
    /// Summarize trace files on the effective-pass axis.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Condition numbers plus estimator and inequality audits.
    Diagnose(DiagnoseArgs),
    /// Write a generated instance in LibSVM format.
    Generate {
        #[arg(long, value_name = "N,D,DENSITY,SCALE")]
        generate: String,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        #[arg(long, default_value = "squared")]
        loss: LossKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// LibSVM file.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    data: Option<PathBuf>,
    /// Generate `n,d,density,scale` instead of reading a file.
    #[arg(long, value_name = "N,D,DENSITY,SCALE")]
    generate: Option<String>,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value = "squared")]
    loss: LossKind,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value = "support")]
    reg_mode: RegMode,
}

impl ProblemArgs {
    fn source(&self) -> Result<ProblemSource> {
        match (&self.data, &self.generate) {
            (Some(path), None) => Ok(ProblemSource::File(path.clone())),
            (None, Some(g)) => ProblemSource::parse_generator(g, self.loss, self.data_seed),
            _ => Err(HarnessError::usage("exactly one of --data and --generate is required")),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "s2cd")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    budget_passes: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run(args) => {
            let spec = ExperimentSpec {
                source: args.problem.source()?,
                loss: args.problem.loss,
                mu: args.problem.mu,
                reg_mode: args.problem.reg_mode,
                methods: args.methods,
                epsilon: args.epsilon,
                overrides: Overrides { h: args.h, m: args.m, epochs: args.epochs },
                seeds: args.seeds,
                budget_passes: args.budget_passes,
                out: args.out,
            };
            let trace = run(&spec)?;
            println!("wrote {} epoch records to {}", trace.epochs.len(), spec.out.display());
            Ok(true)
        }
        Command::Compare { files } => {
            let traces = files.iter().map(|f| TraceFile::read(f)).collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
            print!("{}", render(&compare(&traces, &names)?));
            Ok(true)
        }
        Command::Diagnose(args) => {
            let problem = Problem::new(args.problem.source()?.load()?, args.problem.loss, args.problem.mu, args.problem.reg_mode)?;
            let options = DiagnoseOptions { probes: args.probes, seed: args.seed, ..Default::default() };
            let diagnosis = diagnose(&problem, &options)?;
            print!("{}", diagnosis.text);
            Ok(diagnosis.all_passed())
        }
        Command::Generate { generate, data_seed, loss, out } => {
            let dataset = ProblemSource::parse_generator(&generate, loss, data_seed)?.load()?;
            let file = File::create(&out).map_err(|e| HarnessError::io(&out, e))?;
            write_libsvm(&dataset, BufWriter::new(file))?;
            println!("wrote {} x {} instance to {}", dataset.n(), dataset.d(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
