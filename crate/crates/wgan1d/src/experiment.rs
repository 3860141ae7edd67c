//! Experiment plans: parse a plan file, run its (model, data, seed) grid
//! on a bounded worker pool, and emit run artifacts plus summary tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::artifact;
use crate::critic::{ascend_fixed_objective, optimal_critic_closed_form};
use crate::data::{load_cities, DataKind, DataSource, TRAINING_SET_SIZE};
use crate::error::{Error, Result};
use crate::metrics::{emd_1d, emd_lp_oracle, Histogram};
use crate::optim::AdamHyper;
use crate::rng::{stream_rng, streams};
use crate::training::{train, ModelKind, RunResult, TrainConfig};
use crate::SeriesBasis;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "WGAN1D_OUT_DIR";

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub model: ModelKind,
    pub data: DataKind,
    pub seed: u64,
}

/// Optional overrides applied on top of the preset when building each
/// cell's `TrainConfig`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub full_scale: bool,
    pub n_terms: Option<usize>,
    pub gen_widths: Option<Vec<usize>>,
    pub noise_dim: Option<usize>,
    pub batch_size: Option<usize>,
    pub critic_steps: Option<usize>,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub iterations: Option<u64>,
    pub eval_every: Option<u64>,
    pub bins: Option<usize>,
}

impl ConfigOverrides {
    pub fn build(&self, cell: Cell) -> TrainConfig {
        let mut config = if self.full_scale {
            TrainConfig::full_scale(cell.model, cell.data, cell.seed)
        } else {
            TrainConfig::desk(cell.model, cell.data, cell.seed)
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    config.$field = v.clone();
                }
            };
        }
        set!(n_terms);
        set!(gen_widths);
        set!(noise_dim);
        set!(batch_size);
        set!(critic_steps);
        set!(lambda);
        set!(learning_rate);
        set!(beta1);
        set!(beta2);
        set!(iterations);
        set!(eval_every);
        set!(bins);
        config
    }
}

/// A parsed experiment plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub cities_csv: Option<PathBuf>,
    pub population_column: Option<usize>,
    pub overrides: ConfigOverrides,
    pub cells: Vec<Cell>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec {
            output_dir: default_output_dir(),
            parallelism: 1,
            cities_csv: None,
            population_column: None,
            overrides: ConfigOverrides::default(),
            cells: Vec::new(),
        };
        #[derive(PartialEq)]
        enum Section {
            Top,
            Defaults,
            Cells,
        }
        let mut section = Section::Top;
        let mut group_models: Vec<ModelKind> = Vec::new();
        let mut group_data: Vec<DataKind> = Vec::new();
        let mut group_seeds: Vec<u64> = Vec::new();
        let mut group_line = 0usize;

        let flush_group = |spec: &mut ExperimentSpec,
                               models: &mut Vec<ModelKind>,
                               data: &mut Vec<DataKind>,
                               seeds: &mut Vec<u64>,
                               line: usize|
         -> Result<()> {
            if models.is_empty() && data.is_empty() && seeds.is_empty() {
                return Ok(());
            }
            if models.is_empty() || data.is_empty() || seeds.is_empty() {
                return Err(Error::Plan(format!(
                    "line {line}: a [cells] group needs models, data, and seeds"
                )));
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return Err(Error::Plan(format!(
                    "line {line}: seeds within a [cells] group must be distinct"
                )));
            }
            for &model in models.iter() {
                for &d in data.iter() {
                    for &seed in seeds.iter() {
                        spec.cells.push(Cell {
                            model,
                            data: d,
                            seed,
                        });
                    }
                }
            }
            models.clear();
            data.clear();
            seeds.clear();
            Ok(())
        };

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') {
                flush_group(&mut spec, &mut group_models, &mut group_data, &mut group_seeds, group_line)?;
                section = match body {
                    "[defaults]" => Section::Defaults,
                    "[cells]" => {
                        group_line = line;
                        Section::Cells
                    }
                    other => return Err(Error::Plan(format!("line {line}: unknown section {other}"))),
                };
                continue;
            }
            let (key, rest) = match body.split_once(char::is_whitespace) {
                Some((k, r)) => (k, r.trim()),
                None => (body, ""),
            };
            let values: Vec<&str> = rest.split_whitespace().collect();
            let one = |what: &str| -> Result<&str> {
                values
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Plan(format!("line {line}: '{what}' needs a value")))
            };
            match section {
                Section::Top => match key {
                    "output_dir" => spec.output_dir = PathBuf::from(one("output_dir")?),
                    "parallelism" => {
                        spec.parallelism = parse(one("parallelism")?, line)?;
                        if spec.parallelism == 0 {
                            return Err(Error::Plan(format!("line {line}: parallelism must be >= 1")));
                        }
                    }
                    "cities_csv" => spec.cities_csv = Some(PathBuf::from(one("cities_csv")?)),
                    "population_column" => {
                        spec.population_column = Some(parse(one("population_column")?, line)?)
                    }
                    other => {
                        return Err(Error::Plan(format!(
                            "line {line}: unknown top-level key '{other}'"
                        )))
                    }
                },
                Section::Defaults => {
                    let o = &mut spec.overrides;
                    match key {
                        "preset" => match one("preset")? {
                            "desk" => o.full_scale = false,
                            "full" => o.full_scale = true,
                            other => {
                                return Err(Error::Plan(format!(
                                    "line {line}: preset must be desk|full, got '{other}'"
                                )))
                            }
                        },
                        "n_terms" => o.n_terms = Some(parse(one(key)?, line)?),
                        "gen_widths" => {
                            o.gen_widths = Some(
                                values
                                    .iter()
                                    .map(|v| parse(v, line))
                                    .collect::<Result<Vec<usize>>>()?,
                            )
                        }
                        "noise_dim" => o.noise_dim = Some(parse(one(key)?, line)?),
                        "batch_size" => o.batch_size = Some(parse(one(key)?, line)?),
                        "critic_steps" => o.critic_steps = Some(parse(one(key)?, line)?),
                        "lambda" => o.lambda = Some(parse(one(key)?, line)?),
                        "learning_rate" => o.learning_rate = Some(parse(one(key)?, line)?),
                        "beta1" => o.beta1 = Some(parse(one(key)?, line)?),
                        "beta2" => o.beta2 = Some(parse(one(key)?, line)?),
                        "iterations" => o.iterations = Some(parse(one(key)?, line)?),
                        "eval_every" => o.eval_every = Some(parse(one(key)?, line)?),
                        "bins" => o.bins = Some(parse(one(key)?, line)?),
                        other => {
                            return Err(Error::Plan(format!(
                                "line {line}: unknown default '{other}'"
                            )))
                        }
                    }
                }
                Section::Cells => match key {
                    "models" => {
                        for v in &values {
                            group_models.push(v.parse().map_err(|e| plan_at(e, line))?);
                        }
                    }
                    "data" => {
                        for v in &values {
                            group_data.push(v.parse().map_err(|e| plan_at(e, line))?);
                        }
                    }
                    "seeds" => {
                        for v in &values {
                            group_seeds.push(parse(v, line)?);
                        }
                    }
                    other => {
                        return Err(Error::Plan(format!(
                            "line {line}: unknown cells key '{other}'"
                        )))
                    }
                },
            }
        }
        flush_group(&mut spec, &mut group_models, &mut group_data, &mut group_seeds, group_line)?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Plan(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Plan(msg) => Error::Plan(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Plan(format!("line {line}: cannot parse '{s}'")))
}

fn plan_at(e: Error, line: usize) -> Error {
    Error::Plan(format!("line {line}: {e}"))
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Outcome of one executed plan.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub results: Vec<(Cell, RunResult)>,
    pub summary_csv: PathBuf,
    pub summary_table: PathBuf,
}

pub fn artifact_file_name(cell: Cell) -> String {
    format!("{}_{}_seed{}.run", cell.model, cell.data, cell.seed)
}

/// Execute every cell of a plan, write one artifact per cell plus the
/// best-generator histogram CSVs and the summary files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    fs::create_dir_all(&spec.output_dir)?;
    let cities_values = match spec
        .cells
        .iter()
        .any(|c| c.data == DataKind::Cities)
    {
        true => {
            let path = spec.cities_csv.as_ref().ok_or_else(|| {
                Error::Plan("plan uses cities data but sets no cities_csv".to_string())
            })?;
            Some(load_cities(path, spec.population_column)?.values)
        }
        false => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let results: Result<Vec<(Cell, RunResult)>> = pool.install(|| {
        spec.cells
            .par_iter()
            .map(|&cell| {
                let data = match cell.data {
                    DataKind::Cities => {
                        let values = cities_values.as_ref().expect("checked above");
                        let mut rng = stream_rng(cell.seed, streams::DATA);
                        use rand::Rng;
                        DataSource {
                            kind: DataKind::Cities,
                            samples: (0..TRAINING_SET_SIZE)
                                .map(|_| values[rng.gen_range(0..values.len())])
                                .collect(),
                            seed: cell.seed,
                        }
                    }
                    kind => DataSource::synthetic(kind, cell.seed)?,
                };
                let config = spec.overrides.build(cell);
                let result = train(&config, &data)?;
                Ok((cell, result))
            })
            .collect()
    });
    let results = results?;

    for (cell, result) in &results {
        let run_path = spec.output_dir.join(artifact_file_name(*cell));
        artifact::save_run(result, &run_path)?;
        let hist_path = spec
            .output_dir
            .join(format!("{}_{}_seed{}_best_hist.csv", cell.model, cell.data, cell.seed));
        let mut file = fs::File::create(hist_path)?;
        result.best_hist.write_csv(&mut file)?;
    }

    let summary_csv = spec.output_dir.join("summary.csv");
    let summary_table = spec.output_dir.join("summary.txt");
    write_summary_csv(&results, &summary_csv)?;
    write_summary_table(&results, &summary_table)?;
    Ok(ExperimentOutcome {
        results,
        summary_csv,
        summary_table,
    })
}

fn write_summary_csv(results: &[(Cell, RunResult)], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "model,data,seed,best_emd,status")?;
    for (cell, result) in results {
        let status = if result.status.failed() { "diverged" } else { "completed" };
        writeln!(
            file,
            "{},{},{},{},{status}",
            cell.model, cell.data, cell.seed, result.best_emd
        )?;
    }
    Ok(())
}

/// Mean best EMD per (model, data) over the seeds that completed.
pub fn summary_means(results: &[(Cell, RunResult)]) -> BTreeMap<(String, String), f64> {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for (cell, result) in results {
        if result.status.failed() {
            continue;
        }
        let entry = acc
            .entry((cell.model.to_string(), cell.data.to_string()))
            .or_insert((0.0, 0));
        entry.0 += result.best_emd;
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

fn write_summary_table(results: &[(Cell, RunResult)], path: &Path) -> Result<()> {
    let means = summary_means(results);
    let mut models: Vec<String> = Vec::new();
    let mut domains: Vec<String> = Vec::new();
    for (cell, _) in results {
        let m = cell.model.to_string();
        let d = cell.data.to_string();
        if !models.contains(&m) {
            models.push(m);
        }
        if !domains.contains(&d) {
            domains.push(d);
        }
    }
    let mut file = fs::File::create(path)?;
    writeln!(file, "mean best EMD over completed seeds")?;
    write!(file, "{:<16}", "model")?;
    for d in &domains {
        write!(file, "{d:>12}")?;
    }
    writeln!(file)?;
    for m in &models {
        write!(file, "{m:<16}")?;
        for d in &domains {
            match means.get(&(m.clone(), d.clone())) {
                Some(v) => write!(file, "{v:>12.4}")?,
                None => write!(file, "{:>12}", "-")?,
            }
        }
        writeln!(file)?;
    }
    writeln!(file)?;
    writeln!(file, "per-seed best EMD")?;
    for (cell, result) in results {
        writeln!(
            file,
            "{:<16}{:<10} seed {:<4} {:.6}{}",
            cell.model.to_string(),
            cell.data.to_string(),
            cell.seed,
            result.best_emd,
            if result.status.failed() { "  [diverged]" } else { "" }
        )?;
    }
    Ok(())
}

/// Draw 1,000,000 samples of a data source and write its 100-bin
/// histogram CSV, or extract the stored best-generator histogram from a
/// run artifact.
pub fn emit_hist(
    source: &str,
    out_path: &Path,
    seed: u64,
    cities_csv: Option<&Path>,
    population_column: Option<usize>,
) -> Result<()> {
    const DRAWS: usize = 1_000_000;
    let hist = if let Ok(kind) = source.parse::<DataKind>() {
        let mut rng = stream_rng(seed, streams::DATA);
        let samples = match kind {
            DataKind::Sawtooth => crate::data::sample_sawtooth(&mut rng, DRAWS),
            DataKind::Discrete => crate::data::sample_discrete(&mut rng, DRAWS),
            DataKind::Mixture => crate::data::sample_mixture(&mut rng, DRAWS),
            DataKind::Cities => {
                let path = cities_csv
                    .ok_or_else(|| Error::invalid("cities histogram needs --cities-csv"))?;
                let values = load_cities(path, population_column)?.values;
                use rand::Rng;
                (0..DRAWS)
                    .map(|_| values[rng.gen_range(0..values.len())])
                    .collect()
            }
        };
        Histogram::build(&samples, 100, -1.0, 1.0)?
    } else {
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::invalid(format!(
                "'{source}' is neither a data source (sawtooth|discrete|mixture|cities) nor a run artifact path"
            )));
        }
        artifact::load_run(path)?.best_hist
    };
    let mut file = fs::File::create(out_path)?;
    hist.write_csv(&mut file)?;
    Ok(())
}

/// Self-test report: closed-form optimum vs penalized ascent, and the
/// cumulative-sum EMD vs the transport oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    pub ascent_instances: usize,
    pub worst_ascent_gap: f64,
    pub emd_instances: usize,
    pub worst_emd_deviation: f64,
}

impl OracleReport {
    pub fn ascent_ok(&self) -> bool {
        self.worst_ascent_gap < 0.01
    }

    pub fn emd_ok(&self) -> bool {
        self.worst_emd_deviation < 1e-9
    }

    pub fn passed(&self) -> bool {
        self.ascent_ok() && self.emd_ok()
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "ascent vs closed form : {} ({} instances, worst relative gap {:.3e}, limit 1e-2)",
            if self.ascent_ok() { "PASS" } else { "FAIL" },
            self.ascent_instances,
            self.worst_ascent_gap
        )?;
        write!(
            f,
            "emd vs transport LP   : {} ({} instances, worst deviation {:.3e}, limit 1e-9)",
            if self.emd_ok() { "PASS" } else { "FAIL" },
            self.emd_instances,
            self.worst_emd_deviation
        )
    }
}

/// Run the oracle cross-checks on `instances` random problems per family.
/// `corrupt_bounds` deliberately skews the bounds fed to the ascent (a
/// negative control: the report must then fail).
pub fn oracle_check(instances: usize, seed: u64, corrupt_bounds: bool) -> Result<OracleReport> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 90);
    let mut worst_gap = 0.0f64;
    let taylor = SeriesBasis::taylor(20)?;
    let fourier = SeriesBasis::fourier(20)?;
    for i in 0..instances {
        let basis = if i % 2 == 0 { &taylor } else { &fourier };
        let mut bounds = basis.derivative_bounds();
        let c: Vec<f64> = (0..bounds.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, v_star) = optimal_critic_closed_form(&c, &bounds)?;
        if corrupt_bounds {
            bounds[0] *= 0.25;
        }
        let (_, v) = ascend_fixed_objective(&c, &bounds, 10.0, crate::critic::ASCENT_ORACLE_STEPS, crate::critic::ascent_oracle_hyper())?;
        let gap = (v - v_star).abs() / v_star.abs().max(1e-12);
        worst_gap = worst_gap.max(gap);
    }

    let mut worst_emd = 0.0f64;
    let emd_instances = 500;
    for _ in 0..emd_instances {
        let bins = rng.gen_range(1..=16);
        let p = random_histogram(&mut rng, bins);
        let q = random_histogram(&mut rng, bins);
        let a = emd_1d(&p, &q)?;
        let b = emd_lp_oracle(&p, &q)?;
        worst_emd = worst_emd.max((a - b).abs());
    }

    Ok(OracleReport {
        ascent_instances: instances,
        worst_ascent_gap: worst_gap,
        emd_instances,
        worst_emd_deviation: worst_emd,
    })
}

fn random_histogram<R: rand::Rng>(rng: &mut R, bins: usize) -> Histogram {
    let mut masses: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = masses.iter().sum();
    if total == 0.0 {
        masses[0] = 1.0;
    } else {
        masses.iter_mut().for_each(|m| *m /= total);
    }
    let total: f64 = masses.iter().sum();
    let last = masses.len() - 1;
    masses[last] += 1.0 - total;
    Histogram::from_masses(masses, -1.0, 1.0).expect("normalized masses")
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = "\
# demo plan
output_dir {dir}
parallelism 2

[defaults]
iterations 20
eval_every 10
batch_size 16
gen_widths 8 8
noise_dim 4
n_terms 3

[cells]
models taylor fourier
data discrete
seeds 1 2
";

    #[test]
    fn plan_parses_into_a_grid() {
        let spec = ExperimentSpec::parse(&PLAN.replace("{dir}", "out")).unwrap();
        assert_eq!(spec.parallelism, 2);
        assert_eq!(spec.cells.len(), 4);
        assert_eq!(spec.overrides.iterations, Some(20));
        assert_eq!(spec.overrides.gen_widths, Some(vec![8, 8]));
        assert_eq!(
            spec.cells[0],
            Cell {
                model: ModelKind::TaylorCritic,
                data: DataKind::Discrete,
                seed: 1
            }
        );
    }

    #[test]
    fn plan_errors_carry_line_numbers() {
        let err = ExperimentSpec::parse("bogus_key 3\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = ExperimentSpec::parse("[cells]\nmodels taylor\nseeds 1 1\ndata mixture\n").unwrap_err();
        assert!(err.to_string().contains("distinct"), "{err}");
        let err = ExperimentSpec::parse("[cells]\nmodels warp\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_plan_runs_to_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::parse(&format!("output_dir {}\n", dir.path().display())).unwrap();
        let outcome = run_experiment(&spec).unwrap();
        assert!(outcome.results.is_empty());
        let csv = fs::read_to_string(outcome.summary_csv).unwrap();
        assert_eq!(csv.lines().count(), 1); // header only
    }

    #[test]
    fn experiment_writes_artifacts_and_consistent_summary() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::parse(&PLAN.replace("{dir}", &dir.path().display().to_string())).unwrap();
        let outcome = run_experiment(&spec).unwrap();
        assert_eq!(outcome.results.len(), 4);
        for (cell, result) in &outcome.results {
            let path = dir.path().join(artifact_file_name(*cell));
            let loaded = artifact::load_run(&path).unwrap();
            assert_eq!(loaded.best_emd.to_bits(), result.best_emd.to_bits());
        }
        // summary means are the arithmetic means of the per-seed values
        let means = summary_means(&outcome.results);
        for ((model, data), mean) in &means {
            let values: Vec<f64> = outcome
                .results
                .iter()
                .filter(|(c, _)| c.model.to_string() == *model && c.data.to_string() == *data)
                .map(|(_, r)| r.best_emd)
                .collect();
            let expected = values.iter().sum::<f64>() / values.len() as f64;
            assert!((mean - expected).abs() < 1e-15);
        }
        let csv = fs::read_to_string(&outcome.summary_csv).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(fs::read_to_string(&outcome.summary_table).unwrap().contains("taylor-critic"));
    }

    #[test]
    fn rerunning_a_plan_reproduces_artifacts_byte_for_byte() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let plan_small = "\
[defaults]
iterations 15
eval_every 5
batch_size 16
gen_widths 8
noise_dim 4
n_terms 3

[cells]
models fourier
data mixture
seeds 3
";
        for dir in [&dir_a, &dir_b] {
            let spec = ExperimentSpec::parse(&format!(
                "output_dir {}\n{}",
                dir.path().display(),
                plan_small
            ))
            .unwrap();
            run_experiment(&spec).unwrap();
        }
        let name = artifact_file_name(Cell {
            model: ModelKind::FourierCritic,
            data: DataKind::Mixture,
            seed: 3,
        });
        let a = fs::read_to_string(dir_a.path().join(&name)).unwrap();
        let b = fs::read_to_string(dir_b.path().join(&name)).unwrap();
        assert_eq!(artifact::stable_view(&a), artifact::stable_view(&b));
    }

    #[test]
    fn emit_hist_writes_source_histograms() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sawtooth.csv");
        emit_hist("sawtooth", &out, 1, None, None).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let rows: Vec<(f64, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let (c, m) = l.split_once(',').unwrap();
                (c.parse().unwrap(), m.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 100);
        // ramp on [-1, 0]: later bins carry more mass; ~zero mass above 0
        let lower: f64 = rows.iter().filter(|(c, _)| *c < 0.0).map(|(_, m)| m).sum();
        assert!(lower > 0.999);
        assert!(rows[10].1 < rows[40].1);

        let out = dir.path().join("discrete.csv");
        emit_hist("discrete", &out, 1, None, None).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let masses: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
            .collect();
        let occupied: Vec<(usize, f64)> = masses
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, m)| *m > 0.0)
            .collect();
        assert_eq!(occupied.len(), 3);
        assert!((occupied[0].1 - 0.25).abs() < 0.01);
        assert!((occupied[1].1 - 0.5).abs() < 0.01);
        assert!((occupied[2].1 - 0.25).abs() < 0.01);

        let out = dir.path().join("mixture.csv");
        emit_hist("mixture", &out, 1, None, None).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let rows: Vec<(f64, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let (c, m) = l.split_once(',').unwrap();
                (c.parse().unwrap(), m.parse().unwrap())
            })
            .collect();
        let peak_lo = rows
            .iter()
            .filter(|(c, _)| *c < 0.0)
            .cloned()
            .fold((0.0, 0.0), |acc, r| if r.1 > acc.1 { r } else { acc });
        let peak_hi = rows
            .iter()
            .filter(|(c, _)| *c > 0.0)
            .cloned()
            .fold((0.0, 0.0), |acc, r| if r.1 > acc.1 { r } else { acc });
        assert!((peak_lo.0 + 0.5).abs() < 0.05, "low bump at {}", peak_lo.0);
        assert!((peak_hi.0 - 0.5).abs() < 0.05, "high bump at {}", peak_hi.0);
    }

    #[test]
    fn emit_hist_rejects_unknown_sources() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        assert!(emit_hist("norbert", &out, 1, None, None).is_err());
    }

    #[test]
    fn oracle_check_passes_and_corruption_fails_it() {
        let report = oracle_check(20, 7, false).unwrap();
        assert!(report.passed(), "{report}");
        let corrupted = oracle_check(20, 7, true).unwrap();
        assert!(!corrupted.passed(), "{corrupted}");
    }
}
