//! Algorithm dispatch, single runs, and space sweeps with CSV output.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{fixed_baseline, BaselineConfig, BaselineVariant};
use crate::dp::optimal_histogram_exact;
use crate::error::{bad_params, Error, Result};
use crate::hashing::derive_seed;
use crate::histogram::{domain_error, support_error, Histogram};
use crate::onepass::{onepass_run, OnePassConfig};
use crate::stream::{ExactDistribution, StreamSource};
use crate::twopass::{twopass_run, HhhMode, TwoPassConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Onepass,
    Twopass,
    FixedSupport,
    FixedDomain,
    /// Exact optimal `k`-piece histogram (needs the whole distribution).
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Onepass,
        Algorithm::Twopass,
        Algorithm::FixedSupport,
        Algorithm::FixedDomain,
        Algorithm::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Onepass => "onepass",
            Algorithm::Twopass => "twopass",
            Algorithm::FixedSupport => "fixed-support",
            Algorithm::FixedDomain => "fixed-domain",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| bad_params(format!("unknown algorithm {s:?}")))
    }
}

/// Parameters shared by all algorithms.
///
/// With `space` set, the one- and two-pass algorithms use their budgeted
/// (experimental) parameterization; otherwise `eps` drives the worst-case one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    pub k: usize,
    pub eps: f64,
    pub space: Option<u64>,
    /// Baselines use `k = space / scale_k` pieces when set.
    pub scale_k: Option<u64>,
    /// Two-pass: exact hierarchical heavy hitters instead of sketches.
    pub exact_hhh: bool,
    pub seed: u64,
}

impl RunParams {
    pub fn new(k: usize, eps: f64, seed: u64) -> Self {
        Self {
            k,
            eps,
            space: None,
            scale_k: None,
            exact_hhh: false,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub config: serde_json::Value,
    pub seed: u64,
    pub histogram: Histogram,
    /// Samples plus stored heavy entries.
    pub space: u64,
    /// Words held by sketches and counters.
    pub words: u64,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

/// Runs one algorithm. `exact` is needed only by the oracle; it is computed
/// from `source` when absent.
pub fn run_algorithm(
    source: &dyn StreamSource,
    exact: Option<&ExactDistribution>,
    algo: Algorithm,
    params: &RunParams,
) -> Result<RunOutput> {
    let n = source.domain_size();
    let (config, histogram, space, words) = match algo {
        Algorithm::Onepass => {
            let cfg = match params.space {
                Some(s) => OnePassConfig::experimental(n, params.k, s, params.seed),
                None => OnePassConfig::theoretical(n, params.k, params.eps, params.seed),
            };
            let out = onepass_run(source, &cfg)?;
            (to_json(&cfg), out.histogram, out.space, out.words)
        }
        Algorithm::Twopass => {
            let mut cfg = match params.space {
                Some(s) => TwoPassConfig::experimental(n, params.k, s, params.seed),
                None => TwoPassConfig::new(n, params.k, params.eps, params.seed),
            };
            if params.exact_hhh {
                cfg.hhh = HhhMode::ExactOracle;
            }
            let out = twopass_run(source, &cfg)?;
            (to_json(&cfg), out.histogram, out.space, out.words)
        }
        Algorithm::FixedSupport | Algorithm::FixedDomain => {
            let variant = if algo == Algorithm::FixedSupport {
                BaselineVariant::Support
            } else {
                BaselineVariant::Domain
            };
            let s = params
                .space
                .ok_or_else(|| bad_params("baselines need a space budget"))?;
            let cfg = match params.scale_k {
                Some(d) => BaselineConfig::scaled(n, s, d, params.seed, variant),
                None => BaselineConfig::new(n, params.k, s, params.seed, variant),
            };
            let out = fixed_baseline(source, &cfg)?;
            (to_json(&cfg), out.histogram, out.space, out.words)
        }
        Algorithm::Oracle => {
            let owned;
            let p = match exact {
                Some(p) => p,
                None => {
                    owned = ExactDistribution::from_source(source)?;
                    &owned
                }
            };
            let fit = optimal_histogram_exact(p, params.k)?;
            let words = 2 * p.support_size() as u64;
            (
                serde_json::json!({ "n": n, "k": params.k }),
                fit.histogram,
                p.support_size() as u64,
                words,
            )
        }
    };
    Ok(RunOutput {
        algorithm: algo,
        config,
        seed: params.seed,
        histogram,
        space,
        words,
    })
}

/// One row of the detail CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: &'static str,
    pub space_budget: u64,
    pub trial: u64,
    pub seed: u64,
    pub space: u64,
    pub words: u64,
    pub pieces: usize,
    pub support_error: f64,
    pub domain_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

/// One row of the summary CSV (sample standard deviation; 0 for one trial).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: &'static str,
    pub space_budget: u64,
    pub trials: usize,
    pub mean_support_error: f64,
    pub std_support_error: f64,
    pub mean_domain_error: f64,
    pub std_domain_error: f64,
    pub mean_space: f64,
    pub mean_words: f64,
}

pub const DETAIL_COLUMNS: &str =
    "algorithm,space_budget,trial,seed,space,words,pieces,support_error,domain_error[,wall_ms]";
pub const SUMMARY_COLUMNS: &str = "algorithm,space_budget,trials,mean_support_error,std_support_error,mean_domain_error,std_domain_error,mean_space,mean_words";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub space_grid: Vec<u64>,
    pub k: usize,
    pub eps: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub scale_k: Option<u64>,
    /// Record wall-clock time per run (makes the output non-reproducible).
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub detail: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Per-trial seed; independent of the grid and of how many trials run.
pub fn trial_seed(master: u64, space: u64, trial: u64) -> u64 {
    derive_seed(master, &[space, trial])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn sweep(source: &dyn StreamSource, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.trials == 0 || cfg.algorithms.is_empty() || cfg.space_grid.is_empty() {
        return Err(bad_params("need at least one algorithm, space and trial"));
    }
    if !source.is_replayable() {
        return Err(Error::NonReplayableSource);
    }
    let p = ExactDistribution::from_source(source)?;
    if p.total() == 0 {
        return Err(Error::EmptyStream);
    }
    let jobs: Vec<(Algorithm, u64, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| {
            cfg.space_grid
                .iter()
                .flat_map(move |&s| (0..cfg.trials).map(move |t| (a, s, t)))
        })
        .collect();
    let detail: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(algo, space, trial)| {
            let seed = trial_seed(cfg.master_seed, space, trial);
            let params = RunParams {
                k: cfg.k,
                eps: cfg.eps,
                space: Some(space),
                scale_k: cfg.scale_k,
                exact_hhh: false,
                seed,
            };
            let start = Instant::now();
            let out = run_algorithm(source, Some(&p), algo, &params)?;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            Ok(RunRecord {
                algorithm: algo.name(),
                space_budget: space,
                trial,
                seed,
                space: out.space,
                words: out.words,
                pieces: out.histogram.nonempty_piece_count(),
                support_error: support_error(&p, &out.histogram)?,
                domain_error: domain_error(&p, &out.histogram)?,
                wall_ms: cfg.timing.then_some(wall),
            })
        })
        .collect::<Result<_>>()?;
    let summary = detail
        .chunks(cfg.trials as usize)
        .map(|rows| {
            let sup: Vec<f64> = rows.iter().map(|r| r.support_error).collect();
            let dom: Vec<f64> = rows.iter().map(|r| r.domain_error).collect();
            let (ms, ss) = mean_std(&sup);
            let (md, sd) = mean_std(&dom);
            let count = rows.len() as f64;
            SummaryRow {
                algorithm: rows[0].algorithm,
                space_budget: rows[0].space_budget,
                trials: rows.len(),
                mean_support_error: ms,
                std_support_error: ss,
                mean_domain_error: md,
                std_domain_error: sd,
                mean_space: rows.iter().map(|r| r.space as f64).sum::<f64>() / count,
                mean_words: rows.iter().map(|r| r.words as f64).sum::<f64>() / count,
            }
        })
        .collect();
    Ok(SweepResult { detail, summary })
}

fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_detail_csv<W: Write>(rows: &[RunRecord], out: W) -> Result<()> {
    write_csv(rows, out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    write_csv(rows, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::VecStream;

    fn stream() -> VecStream {
        let n = 2048;
        VecStream::from_items(n, (0..4000u64).map(|t| 1 + (t * t * 31 + t) % 700 * 2)).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bogus".parse::<Algorithm>().is_err());
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let s = stream();
        let cfg = SweepConfig {
            algorithms: vec![Algorithm::FixedDomain, Algorithm::Oracle],
            space_grid: vec![100, 300, 1000],
            k: 5,
            eps: 0.25,
            trials: 10,
            master_seed: 42,
            scale_k: None,
            timing: false,
        };
        let a = sweep(&s, &cfg).unwrap();
        assert_eq!(a.detail.len(), 60);
        assert_eq!(a.summary.len(), 6);
        let b = sweep(&s, &cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_detail_csv(&a.detail, &mut ca).unwrap();
        write_detail_csv(&b.detail, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let header = String::from_utf8(ca).unwrap();
        assert!(header.starts_with("algorithm,space_budget,trial,seed,space,words,pieces,support_error,domain_error\n"));
        let oracle: Vec<f64> = a.summary.iter().filter(|r| r.algorithm == "oracle").map(|r| r.mean_support_error).collect();
        assert!(oracle.windows(2).all(|w| w[0] == w[1]));
        for row in &a.summary {
            let rows: Vec<&RunRecord> = a
                .detail
                .iter()
                .filter(|r| r.algorithm == row.algorithm && r.space_budget == row.space_budget)
                .collect();
            let mean = rows.iter().map(|r| r.support_error).sum::<f64>() / rows.len() as f64;
            assert!((mean - row.mean_support_error).abs() < 1e-12);
        }
    }

    #[test]
    fn adding_trials_keeps_earlier_ones() {
        let s = stream();
        let mut cfg = SweepConfig {
            algorithms: vec![Algorithm::Onepass],
            space_grid: vec![50],
            k: 3,
            eps: 0.25,
            trials: 2,
            master_seed: 7,
            scale_k: None,
            timing: false,
        };
        let a = sweep(&s, &cfg).unwrap();
        cfg.trials = 3;
        let b = sweep(&s, &cfg).unwrap();
        assert_eq!(a.detail[..], b.detail[..2]);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }
}
