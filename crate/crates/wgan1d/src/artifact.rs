//! Run-result artifacts: one self-describing text document per run.
//!
//! Every float is written as its IEEE-754 bit pattern in hex (with a
//! human-readable decimal comment where it helps), so parsing an artifact
//! reproduces the in-memory run bit for bit. The only volatile line is
//! `wall_clock_seconds`; byte-level comparisons between reruns should drop
//! it and nothing else.

use std::fs;
use std::path::Path;

use crate::data::DataKind;
use crate::error::{Error, Result};
use crate::metrics::Histogram;
use crate::training::{ModelKind, RunResult, RunStatus, TrainConfig};

const MAGIC: &str = "wgan1d-run v1";
const PARAMS_PER_LINE: usize = 8;

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unhex(s: &str, line: usize) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Plan(format!("line {line}: bad float bits '{s}'")))
}

/// Serialize a run to the artifact text format.
pub fn write_run(result: &RunResult) -> String {
    let mut out = String::new();
    let cfg = &result.config;
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(&mut out, MAGIC.to_string());
    push(&mut out, format!("model {}", cfg.model));
    push(&mut out, format!("data {}", cfg.data));
    push(&mut out, format!("seed {}", cfg.seed));
    push(&mut out, format!("n_terms {}", cfg.n_terms));
    push(
        &mut out,
        format!(
            "gen_widths {}",
            cfg.gen_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ")
        ),
    );
    push(&mut out, format!("noise_dim {}", cfg.noise_dim));
    push(&mut out, format!("batch_size {}", cfg.batch_size));
    push(&mut out, format!("critic_steps {}", cfg.critic_steps));
    push(&mut out, format!("lambda {} # {}", hex(cfg.lambda), cfg.lambda));
    push(
        &mut out,
        format!("learning_rate {} # {}", hex(cfg.learning_rate), cfg.learning_rate),
    );
    push(&mut out, format!("beta1 {} # {}", hex(cfg.beta1), cfg.beta1));
    push(&mut out, format!("beta2 {} # {}", hex(cfg.beta2), cfg.beta2));
    push(&mut out, format!("iterations {}", cfg.iterations));
    push(&mut out, format!("eval_every {}", cfg.eval_every));
    push(&mut out, format!("bins {}", cfg.bins));
    match result.status {
        RunStatus::Completed => push(&mut out, "status completed".to_string()),
        RunStatus::Diverged { iteration } => {
            push(&mut out, format!("status diverged {iteration}"))
        }
    }
    push(
        &mut out,
        format!(
            "wall_clock_seconds {} # {}",
            hex(result.wall_clock_seconds),
            result.wall_clock_seconds
        ),
    );
    push(
        &mut out,
        format!("best_emd {} # {}", hex(result.best_emd), result.best_emd),
    );
    push(&mut out, format!("best_iteration {}", result.best_iteration));
    push(&mut out, format!("trajectory {}", result.trajectory.len()));
    for (iter, emd) in &result.trajectory {
        push(&mut out, format!("t {iter} {} # {emd}", hex(*emd)));
    }
    push(&mut out, format!("surrogates {}", result.surrogates.len()));
    for (iter, l) in &result.surrogates {
        push(&mut out, format!("s {iter} {} # {l}", hex(*l)));
    }
    let (lo, hi) = result.best_hist.range();
    push(
        &mut out,
        format!(
            "best_hist {} {} {}",
            result.best_hist.bin_count(),
            hex(lo),
            hex(hi)
        ),
    );
    for chunk in result.best_hist.masses().chunks(PARAMS_PER_LINE) {
        push(
            &mut out,
            format!("h {}", chunk.iter().map(|v| hex(*v)).collect::<Vec<_>>().join(" ")),
        );
    }
    for (tag, params) in [("gen_params", &result.gen_params), ("critic_params", &result.critic_params)] {
        push(&mut out, format!("{tag} {}", params.len()));
        for chunk in params.chunks(PARAMS_PER_LINE) {
            push(
                &mut out,
                format!("p {}", chunk.iter().map(|v| hex(*v)).collect::<Vec<_>>().join(" ")),
            );
        }
    }
    push(&mut out, "end".to_string());
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    /// Next line as (1-based number, comment-stripped fields).
    fn next_fields(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (idx, raw) in self.iter.by_ref() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            return Ok((idx + 1, body.split_whitespace().collect()));
        }
        Err(Error::Plan("unexpected end of artifact".to_string()))
    }

    fn expect_key(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, fields) = self.next_fields()?;
        if fields[0] != key {
            return Err(Error::Plan(format!(
                "line {line}: expected '{key}', found '{}'",
                fields[0]
            )));
        }
        Ok((line, fields))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Plan(format!("line {line}: bad {what} '{s}'")))
}

fn scalar(lines: &mut Lines<'_>, key: &str) -> Result<(usize, String)> {
    let (line, fields) = lines.expect_key(key)?;
    if fields.len() < 2 {
        return Err(Error::Plan(format!("line {line}: '{key}' needs a value")));
    }
    Ok((line, fields[1].to_string()))
}

fn param_block(lines: &mut Lines<'_>, key: &str) -> Result<Vec<f64>> {
    let (line, fields) = lines.expect_key(key)?;
    let count: usize = parse_num(fields[1], line, "count")?;
    let mut params = Vec::with_capacity(count);
    while params.len() < count {
        let (line, fields) = lines.expect_key("p")?;
        for s in &fields[1..] {
            params.push(unhex(s, line)?);
        }
    }
    if params.len() != count {
        return Err(Error::Plan(format!("'{key}' count mismatch")));
    }
    Ok(params)
}

/// Parse an artifact produced by [`write_run`].
pub fn read_run(text: &str) -> Result<RunResult> {
    let mut lines = Lines::new(text);
    let (line, fields) = lines.next_fields()?;
    if fields.join(" ") != MAGIC {
        return Err(Error::Plan(format!("line {line}: not a run artifact")));
    }

    let lines = &mut lines;
    let (line, model) = scalar(lines, "model")?;
    let model: ModelKind = model.parse().map_err(|e| at_line(e, line))?;
    let (line, data) = scalar(lines, "data")?;
    let data: DataKind = data.parse().map_err(|e| at_line(e, line))?;
    let (line, seed) = scalar(lines, "seed")?;
    let seed: u64 = parse_num(&seed, line, "seed")?;
    let (line, n_terms) = scalar(lines, "n_terms")?;
    let n_terms: usize = parse_num(&n_terms, line, "n_terms")?;

    let (line, fields) = lines.expect_key("gen_widths")?;
    let gen_widths: Vec<usize> = fields[1..]
        .iter()
        .map(|s| parse_num(s, line, "width"))
        .collect::<Result<_>>()?;

    let (line, noise_dim) = scalar(lines, "noise_dim")?;
    let noise_dim: usize = parse_num(&noise_dim, line, "noise_dim")?;
    let (line, batch_size) = scalar(lines, "batch_size")?;
    let batch_size: usize = parse_num(&batch_size, line, "batch_size")?;
    let (line, critic_steps) = scalar(lines, "critic_steps")?;
    let critic_steps: usize = parse_num(&critic_steps, line, "critic_steps")?;
    let (line, lambda) = scalar(lines, "lambda")?;
    let lambda = unhex(&lambda, line)?;
    let (line, learning_rate) = scalar(lines, "learning_rate")?;
    let learning_rate = unhex(&learning_rate, line)?;
    let (line, beta1) = scalar(lines, "beta1")?;
    let beta1 = unhex(&beta1, line)?;
    let (line, beta2) = scalar(lines, "beta2")?;
    let beta2 = unhex(&beta2, line)?;
    let (line, iterations) = scalar(lines, "iterations")?;
    let iterations: u64 = parse_num(&iterations, line, "iterations")?;
    let (line, eval_every) = scalar(lines, "eval_every")?;
    let eval_every: u64 = parse_num(&eval_every, line, "eval_every")?;
    let (line, bins) = scalar(lines, "bins")?;
    let bins: usize = parse_num(&bins, line, "bins")?;

    let (line, fields) = lines.expect_key("status")?;
    let status = match fields.get(1) {
        Some(&"completed") => RunStatus::Completed,
        Some(&"diverged") => {
            let iter = fields
                .get(2)
                .ok_or_else(|| Error::Plan(format!("line {line}: diverged needs an iteration")))?;
            RunStatus::Diverged {
                iteration: parse_num(iter, line, "iteration")?,
            }
        }
        _ => return Err(Error::Plan(format!("line {line}: bad status"))),
    };

    let (line, wall) = scalar(lines, "wall_clock_seconds")?;
    let wall_clock_seconds = unhex(&wall, line)?;
    let (line, best) = scalar(lines, "best_emd")?;
    let best_emd = unhex(&best, line)?;
    let (line, best_iter) = scalar(lines, "best_iteration")?;
    let best_iteration: u64 = parse_num(&best_iter, line, "best_iteration")?;

    let (line, fields) = lines.expect_key("trajectory")?;
    let count: usize = parse_num(fields[1], line, "count")?;
    let mut trajectory = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, fields) = lines.expect_key("t")?;
        if fields.len() != 3 {
            return Err(Error::Plan(format!("line {line}: trajectory rows are 't iter bits'")));
        }
        trajectory.push((parse_num(fields[1], line, "iteration")?, unhex(fields[2], line)?));
    }

    let (line, fields) = lines.expect_key("surrogates")?;
    let count: usize = parse_num(fields[1], line, "count")?;
    let mut surrogates = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, fields) = lines.expect_key("s")?;
        if fields.len() != 3 {
            return Err(Error::Plan(format!("line {line}: surrogate rows are 's iter bits'")));
        }
        surrogates.push((parse_num(fields[1], line, "iteration")?, unhex(fields[2], line)?));
    }

    let (line, fields) = lines.expect_key("best_hist")?;
    if fields.len() != 4 {
        return Err(Error::Plan(format!("line {line}: best_hist is 'best_hist bins lo hi'")));
    }
    let bin_count: usize = parse_num(fields[1], line, "bin count")?;
    let lo = unhex(fields[2], line)?;
    let hi = unhex(fields[3], line)?;
    let mut masses = Vec::with_capacity(bin_count);
    while masses.len() < bin_count {
        let (line, fields) = lines.expect_key("h")?;
        for s in &fields[1..] {
            masses.push(unhex(s, line)?);
        }
    }
    if masses.len() != bin_count {
        return Err(Error::Plan("histogram mass count mismatch".to_string()));
    }
    let best_hist = Histogram::from_masses(masses, lo, hi)?;

    let gen_params = param_block(lines, "gen_params")?;
    let critic_params = param_block(lines, "critic_params")?;
    lines.expect_key("end")?;

    Ok(RunResult {
        config: TrainConfig {
            model,
            data,
            seed,
            n_terms,
            gen_widths,
            noise_dim,
            batch_size,
            critic_steps,
            lambda,
            learning_rate,
            beta1,
            beta2,
            iterations,
            eval_every,
            bins,
        },
        status,
        trajectory,
        surrogates,
        best_emd,
        best_iteration,
        best_hist,
        wall_clock_seconds,
        gen_params,
        critic_params,
    })
}

pub fn save_run(result: &RunResult, path: &Path) -> Result<()> {
    fs::write(path, write_run(result))?;
    Ok(())
}

pub fn load_run(path: &Path) -> Result<RunResult> {
    let text = fs::read_to_string(path)?;
    read_run(&text).map_err(|e| match e {
        Error::Plan(msg) => Error::Plan(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn at_line(e: Error, line: usize) -> Error {
    Error::Plan(format!("line {line}: {e}"))
}

/// The artifact text with the volatile wall-clock line removed; byte
/// equality of two runs is defined over this view.
pub fn stable_view(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("wall_clock_seconds"))
        .collect::<Vec<_>>()
        .join("\n")
}
