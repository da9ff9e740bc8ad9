use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ensemble_shapley::experiments::{
    adversarial_study, default_adversarial_set, forward_selection, generate_synthetic, runtime_sweep, SyntheticSpec,
};
use ensemble_shapley::io::{self as data_io, Format};
use ensemble_shapley::solvers::{compare_solvers, SolverComparison, SolverConfig, SolverTag};
use ensemble_shapley::valuation::{bound_report, troupe, PointValuation, ValuationReport, SCHEMA};
use ensemble_shapley::{PredictionDataset, SimplifiedGame};

#[derive(Parser)]
#[command(
    name = "ensemble-shapley",
    version,
    about = "Shapley-value valuation of classifiers in voting ensembles"
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Cutoff of the ensemble vote
    #[arg(long, global = true, default_value_t = 0.5)]
    gamma: f64,
    /// Variance floor of the Gaussian solvers
    #[arg(long, global = true, default_value_t = 1e-9)]
    delta: f64,
    #[arg(long, global = true, value_enum, default_value_t = SolverArg::Emc)]
    solver: SolverArg,
    /// Sampled permutations of the MC solver
    #[arg(long, global = true, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Report raw solver values instead of values normalized to sum to one
    #[arg(long, global = true)]
    no_normalize: bool,
    /// Output path (standard output when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            permutations: self.permutations,
            stability: self.delta,
            seed: self.seed,
            normalize: !self.no_normalize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Mc,
    Mle,
    Emc,
}

impl From<SolverArg> for SolverTag {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exact => SolverTag::Exact,
            SolverArg::Mc => SolverTag::Mc,
            SolverArg::Mle => SolverTag::Mle,
            SolverArg::Emc => SolverTag::Emc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct Input {
    /// Prediction matrix (CSV or JSON)
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension when absent
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl Input {
    fn load(&self) -> Result<PredictionDataset> {
        Ok(data_io::load_predictions(&self.input, self.format.map(Into::into))?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Value every model on a labeled dataset
    Value {
        #[command(flatten)]
        input: Input,
        /// Include per-point Shapley vectors
        #[arg(long)]
        points: bool,
    },
    /// Shapley entropy of the averaged conditional values
    Entropy {
        #[command(flatten)]
        input: Input,
    },
    /// Forward ensemble selection by Shapley ordering
    Select {
        /// Split used to value the models
        #[arg(long)]
        value_input: PathBuf,
        /// Split used to score the subensembles
        #[arg(long)]
        test_input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        table: FormatArg,
    },
    /// Approximation errors of MC, MLE and EMC against exact enumeration
    Compare {
        /// Individual model weights of one game
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// Sample-size and concentration-bound calculators
    Bound {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also evaluate the tail bound at this dataset size
        #[arg(long)]
        n: Option<usize>,
    },
    /// Generate a synthetic ensemble
    Simulate {
        #[arg(long)]
        n: usize,
        /// Per-model noise ratios; overrides --m and --noise-ratio
        #[arg(long, value_delimiter = ',')]
        noise_ratios: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_ratio: f64,
        #[arg(long, default_value_t = 0.8)]
        signal: f64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Valuation of adversarial models under growing noise
    Adversarial {
        #[command(flatten)]
        input: Input,
        /// Adversarial model indices (0-based); defaults to the first half
        #[arg(long, value_delimiter = ',')]
        adversarial: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        ratios: Vec<f64>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        table: FormatArg,
    },
    /// Mean pipeline runtime over a grid of sizes
    Bench {
        /// Sizes as NxM, comma separated
        #[arg(long, value_delimiter = ',', default_value = "100x25,100x50,200x50")]
        sizes: Vec<String>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "emc,mle")]
        solvers: Vec<SolverArg>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        table: FormatArg,
    },
}

#[derive(Serialize)]
struct ValueOutput<'a> {
    #[serde(flatten)]
    report: &'a ValuationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<&'a [PointValuation]>,
}

#[derive(Serialize)]
struct EntropyOutput {
    schema: &'static str,
    solver: SolverTag,
    n_models: usize,
    max_entropy: f64,
    n_positive: usize,
    n_negative: usize,
    entropy_positive: Option<f64>,
    entropy_negative: Option<f64>,
}

#[derive(Serialize)]
struct CompareOutput {
    schema: &'static str,
    #[serde(flatten)]
    comparison: SolverComparison,
}

#[derive(Serialize)]
struct Table<T> {
    schema: &'static str,
    rows: T,
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_csv<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = open_output(out)?;
    data_io::write_table(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (n, m) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("size `{s}` is not of the form NxM"))?;
    Ok((n.trim().parse()?, m.trim().parse()?))
}

fn run(cli: Cli) -> Result<()> {
    let run = &cli.run;
    let config = run.solver_config();
    let solver: SolverTag = run.solver.into();
    match cli.command {
        Command::Value { input, points } => {
            let valuation = troupe(&input.load()?, run.gamma, &config, solver)?;
            let output = ValueOutput {
                report: &valuation.report,
                points: points.then_some(valuation.points.as_slice()),
            };
            emit_json(&run.out, &output)
        }
        Command::Entropy { input } => {
            let dataset = input.load()?;
            let report = troupe(&dataset, run.gamma, &config, solver)?.report;
            emit_json(
                &run.out,
                &EntropyOutput {
                    schema: SCHEMA,
                    solver,
                    n_models: dataset.n_models(),
                    max_entropy: (dataset.n_models() as f64).ln(),
                    n_positive: report.n_positive,
                    n_negative: report.n_negative,
                    entropy_positive: report.entropy_positive,
                    entropy_negative: report.entropy_negative,
                },
            )
        }
        Command::Select {
            value_input,
            test_input,
            table,
        } => {
            let value = data_io::load_predictions(&value_input, None)?;
            let test = data_io::load_predictions(&test_input, None)?;
            let trace = forward_selection(&value, &test, run.gamma, &config, solver)?;
            match table {
                FormatArg::Json => emit_json(&run.out, &trace),
                FormatArg::Csv => emit_csv(&run.out, &data_io::selection_rows(&trace)),
            }
        }
        Command::Compare { weights } => {
            let game = SimplifiedGame::new(weights, run.gamma)?;
            let comparison = compare_solvers(&game, &config)?;
            emit_json(
                &run.out,
                &CompareOutput {
                    schema: SCHEMA,
                    comparison,
                },
            )
        }
        Command::Bound { m, epsilon, alpha, n } => emit_json(&run.out, &bound_report(m, epsilon, alpha, n)?),
        Command::Simulate {
            n,
            noise_ratios,
            m,
            noise_ratio,
            signal,
            format,
        } => {
            let spec = SyntheticSpec {
                n_points: n,
                quality_mix: noise_ratios.unwrap_or_else(|| vec![noise_ratio; m]),
                base_signal: signal,
                seed: run.seed,
            };
            let dataset = generate_synthetic(&spec)?;
            let mut w = open_output(&run.out)?;
            match format {
                FormatArg::Csv => data_io::write_csv(&dataset, &mut w)?,
                FormatArg::Json => {
                    data_io::write_json(&dataset, &mut w)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::Adversarial {
            input,
            adversarial,
            ratios,
            table,
        } => {
            let dataset = input.load()?;
            let adversarial = adversarial.unwrap_or_else(|| default_adversarial_set(dataset.n_models()));
            let study = adversarial_study(&dataset, &adversarial, &ratios, run.gamma, &config, solver)?;
            match table {
                FormatArg::Json => emit_json(&run.out, &study),
                FormatArg::Csv => emit_csv(&run.out, &data_io::adversarial_rows(&study)),
            }
        }
        Command::Bench {
            sizes,
            solvers,
            runs,
            table,
        } => {
            let sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
            if sizes.is_empty() {
                bail!("no sizes given");
            }
            let solvers: Vec<SolverTag> = solvers.into_iter().map(Into::into).collect();
            let rows = runtime_sweep(&sizes, &solvers, &config, runs)?;
            match table {
                FormatArg::Json => emit_json(&run.out, &Table { schema: SCHEMA, rows }),
                FormatArg::Csv => emit_csv(&run.out, &rows),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
