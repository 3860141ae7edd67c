use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wgan1d::error::Error;
use wgan1d::experiment::{self, ExperimentSpec};

/// One-dimensional Wasserstein GAN lab: series-reparameterized critics,
/// a gradient-penalty baseline, and EMD evaluation.
#[derive(Parser)]
#[command(name = "wgan1d", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment plan file and write run artifacts + summaries.
    Train {
        /// Path to the plan file.
        plan: PathBuf,
        /// Override the plan's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker pool size for the grid.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Cities CSV path (required by cells using the cities source).
        #[arg(long)]
        cities_csv: Option<PathBuf>,
        /// Population column index when the CSV lacks a 'Population' header.
        #[arg(long)]
        population_column: Option<usize>,
        /// Size preset: 'desk' (3x64 generator, 20k iterations) or 'full'
        /// (3x500, 100k).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        eval_every: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        n_terms: Option<usize>,
        #[arg(long)]
        noise_dim: Option<usize>,
        #[arg(long)]
        critic_steps: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
        /// Comma-separated hidden widths, e.g. 64,64,64.
        #[arg(long, value_delimiter = ',')]
        gen_widths: Option<Vec<usize>>,
    },
    /// Write a histogram CSV for a data source (1,000,000 draws) or for
    /// the best generator stored in a run artifact.
    EmitHist {
        /// sawtooth | discrete | mixture | cities, or a .run artifact path.
        source: String,
        /// Output CSV path.
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        cities_csv: Option<PathBuf>,
        #[arg(long)]
        population_column: Option<usize>,
    },
    /// Cross-check the closed-form critic optimum against gradient ascent
    /// and the cumulative-sum EMD against the transport oracle.
    OracleCheck {
        /// Random (objective, bounds) instances for the ascent check.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Negative-control hook: skew the bounds so the check must fail.
        #[arg(long, hide = true)]
        corrupt_bounds: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage text
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> wgan1d::Result<ExitCode> {
    match cli.command {
        Command::Train {
            plan,
            output_dir,
            parallelism,
            cities_csv,
            population_column,
            preset,
            iterations,
            eval_every,
            batch_size,
            n_terms,
            noise_dim,
            critic_steps,
            lambda,
            learning_rate,
            beta1,
            beta2,
            bins,
            gen_widths,
        } => {
            let mut spec = ExperimentSpec::load(&plan)?;
            if let Some(dir) = output_dir {
                spec.output_dir = dir;
            }
            if let Some(p) = parallelism {
                if p == 0 {
                    return Err(Error::Plan("parallelism must be >= 1".to_string()));
                }
                spec.parallelism = p;
            }
            if cities_csv.is_some() {
                spec.cities_csv = cities_csv;
            }
            if population_column.is_some() {
                spec.population_column = population_column;
            }
            match preset.as_deref() {
                None => {}
                Some("desk") => spec.overrides.full_scale = false,
                Some("full") => spec.overrides.full_scale = true,
                Some(other) => {
                    return Err(Error::Plan(format!("preset must be desk|full, got '{other}'")))
                }
            }
            let o = &mut spec.overrides;
            o.iterations = iterations.or(o.iterations);
            o.eval_every = eval_every.or(o.eval_every);
            o.batch_size = batch_size.or(o.batch_size);
            o.n_terms = n_terms.or(o.n_terms);
            o.noise_dim = noise_dim.or(o.noise_dim);
            o.critic_steps = critic_steps.or(o.critic_steps);
            o.lambda = lambda.or(o.lambda);
            o.learning_rate = learning_rate.or(o.learning_rate);
            o.beta1 = beta1.or(o.beta1);
            o.beta2 = beta2.or(o.beta2);
            o.bins = bins.or(o.bins);
            o.gen_widths = gen_widths.or(o.gen_widths.take());

            let outcome = experiment::run_experiment(&spec)?;
            println!(
                "{} cells -> {}",
                outcome.results.len(),
                spec.output_dir.display()
            );
            print!("{}", std::fs::read_to_string(&outcome.summary_table)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitHist {
            source,
            out,
            seed,
            cities_csv,
            population_column,
        } => {
            experiment::emit_hist(&source, &out, seed, cities_csv.as_deref(), population_column)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck {
            instances,
            seed,
            corrupt_bounds,
        } => {
            let report = experiment::oracle_check(instances, seed, corrupt_bounds)?;
            println!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
