//! Batch command-line interface: ingest, detect, segment, power, selftest.
//!
//! Every command is deterministic given `--seed`; result files embed a run
//! manifest (resolved configuration, seed, library version, input digests,
//! wall-clock duration). Exit codes: 0 success, 1 self-test failure,
//! 2 input/validation error. Thread count follows `RAYON_NUM_THREADS`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cpstat::StatConfig;
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelConfig, KernelGram};
use crate::pipeline::{self, Grouping};
use crate::resample::{self, PValueMode, ResampleConfig};
use crate::segment::{binary_segmentation, SegmentationConfig, SplitMode};
use crate::specfun::TruncationPolicy;

#[derive(Parser)]
#[command(
    name = "hankel-cpd",
    version,
    about = "Change-point analysis for sequences of SPD matrices",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest price CSVs into a covariance matrix series (JSON)
    Ingest {
        /// Price CSV file (repeatable; one per symbol)
        #[arg(long = "prices", required = true)]
        prices: Vec<PathBuf>,
        /// day, hour, or count:N
        #[arg(long, default_value = "day")]
        grouping: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test a matrix series for a single change point
    Detect {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Number of bootstrap permutations
        #[arg(long, default_value_t = 500)]
        nb: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// add_one or paper_strict
        #[arg(long = "pvalue-mode", default_value = "add_one")]
        pvalue_mode: String,
        /// Include the full permutation null sample in the output
        #[arg(long = "emit-null")]
        emit_null: bool,
        /// Common scaling factor applied to every matrix
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long = "max-degree", hide = true, default_value_t = 60)]
        max_degree: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recursive binary segmentation for multiple change points
    Segment {
        #[arg(long)]
        series: PathBuf,
        /// Minimum segment length that is still tested
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 500)]
        nb: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// paper_mid or at_changepoint
        #[arg(long = "split-mode", default_value = "paper_mid")]
        split_mode: String,
        /// add_one or paper_strict
        #[arg(long = "pvalue-mode", default_value = "add_one")]
        pvalue_mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long = "max-degree", hide = true, default_value_t = 60)]
        max_degree: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Warp-speed rejection-rate table over configured distribution pairs
    Power {
        /// JSON experiment config: {"cells":[{"left":...,"right":...,"n":..,"k":..,"gamma":..}]}
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 500)]
        replicates: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in numerical self-checks
    Selftest {
        #[arg(long = "max-degree", hide = true, default_value_t = 60)]
        max_degree: usize,
    },
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Value,
    seed: u64,
    version: String,
    input_digests: Vec<InputDigest>,
    duration_seconds: f64,
}

fn sha256_hex(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest(
    command: &str,
    config: Value,
    seed: u64,
    inputs: &[&Path],
    started: Instant,
) -> Result<RunManifest> {
    let mut input_digests = Vec::new();
    for path in inputs {
        input_digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
    }
    Ok(RunManifest {
        command: command.to_string(),
        config,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        input_digests,
        duration_seconds: started.elapsed().as_secs_f64(),
    })
}

fn write_result(path: &Path, mut body: Value, manifest: RunManifest) -> Result<()> {
    let obj = body
        .as_object_mut()
        .ok_or_else(|| Error::InvalidInput("result body must be a JSON object".into()))?;
    obj.insert("manifest".into(), serde_json::to_value(&manifest)?);
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, &body)?;
    Ok(())
}

fn parse_pvalue_mode(raw: &str) -> Result<PValueMode> {
    match raw {
        "add_one" => Ok(PValueMode::AddOne),
        "paper_strict" => Ok(PValueMode::PaperStrict),
        other => Err(Error::InvalidConfig(format!(
            "unknown p-value mode {other:?}; expected add_one or paper_strict"
        ))),
    }
}

fn parse_split_mode(raw: &str) -> Result<SplitMode> {
    match raw {
        "paper_mid" => Ok(SplitMode::PaperMid),
        "at_changepoint" => Ok(SplitMode::AtChangepoint),
        other => Err(Error::InvalidConfig(format!(
            "unknown split mode {other:?}; expected paper_mid or at_changepoint"
        ))),
    }
}

fn load_gram(series_path: &Path, kernel_cfg: &KernelConfig) -> Result<(KernelGram, usize)> {
    let series = pipeline::load_matrix_series(series_path)?;
    if series.is_empty() {
        return Err(Error::InvalidInput("series has no matrices".into()));
    }
    let matrices = series.matrices();
    let g = gram(&matrices, kernel_cfg)?;
    if g.any_truncated() {
        log::warn!(
            "{} Gram entries hit the series degree cap; consider --scale to shrink traces",
            g.truncated_entries()
        );
    }
    Ok((g, series.dim()))
}

fn cmd_ingest(prices: &[PathBuf], grouping: &str, out: &Path) -> Result<()> {
    let started = Instant::now();
    let grouping_parsed = Grouping::parse(grouping)?;
    let mut series_list = Vec::new();
    for path in prices {
        series_list.push(pipeline::load_prices(path)?);
    }
    let panel = pipeline::log_returns(&series_list)?;
    let outcome = pipeline::windowed_covariance_detailed(&panel, grouping_parsed)?;

    let config = json!({
        "prices": prices.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "grouping": grouping,
        "out": out.display().to_string(),
        "covariance_denominator": "n-1",
    });
    let inputs: Vec<&Path> = prices.iter().map(|p| p.as_path()).collect();
    let m = manifest("ingest", config, 0, &inputs, started)?;
    let body = serde_json::to_value(&outcome.series)?;
    write_result(out, body, m)?;

    println!(
        "ingested {} series -> n={} covariance matrices of dim {} ({} short groups dropped, {} remainder rows dropped)",
        prices.len(),
        outcome.series.len(),
        outcome.series.dim(),
        outcome.dropped_groups,
        outcome.dropped_rows,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_detect(
    series: &Path,
    gamma: f64,
    nu: f64,
    nb: usize,
    alpha: f64,
    seed: u64,
    pvalue_mode: &str,
    emit_null: bool,
    scale: f64,
    max_degree: usize,
    out: &Path,
) -> Result<()> {
    let started = Instant::now();
    let mode = parse_pvalue_mode(pvalue_mode)?;
    let kernel_cfg = KernelConfig {
        nu,
        truncation: TruncationPolicy {
            max_degree,
            ..TruncationPolicy::default()
        },
        scale,
    };
    let (g, dim) = load_gram(series, &kernel_cfg)?;
    let stat_cfg = StatConfig { gamma };
    let rs_cfg = ResampleConfig {
        nb,
        alpha,
        seed,
        pvalue_mode: mode,
    };
    let det = resample::permutation_pvalue(&g, &stat_cfg, &rs_cfg)?;

    if det.p_value <= alpha {
        println!(
            "change point at k = {} (statistic {:.6e}, p = {:.4})",
            det.k_hat, det.statistic, det.p_value
        );
    } else {
        println!(
            "no change point (statistic {:.6e}, p = {:.4})",
            det.statistic, det.p_value
        );
    }

    let config = json!({
        "series": series.display().to_string(),
        "dim": dim,
        "gamma": gamma,
        "nu": nu,
        "nb": nb,
        "alpha": alpha,
        "seed": seed,
        "pvalue_mode": pvalue_mode,
        "emit_null": emit_null,
        "scale": scale,
        "max_degree": max_degree,
    });
    let m = manifest("detect", config, seed, &[series], started)?;
    let mut body = serde_json::to_value(&det)?;
    if !emit_null {
        body.as_object_mut().unwrap().remove("null_stats");
    }
    write_result(out, body, m)
}

#[allow(clippy::too_many_arguments)]
fn cmd_segment(
    series: &Path,
    window: usize,
    nb: usize,
    alpha: f64,
    gamma: f64,
    nu: f64,
    split_mode: &str,
    pvalue_mode: &str,
    seed: u64,
    scale: f64,
    max_degree: usize,
    out: &Path,
) -> Result<()> {
    let started = Instant::now();
    let cfg = SegmentationConfig {
        window,
        nb,
        alpha,
        seed,
        gamma,
        pvalue_mode: parse_pvalue_mode(pvalue_mode)?,
        split_mode: parse_split_mode(split_mode)?,
    };
    let kernel_cfg = KernelConfig {
        nu,
        truncation: TruncationPolicy {
            max_degree,
            ..TruncationPolicy::default()
        },
        scale,
    };
    let (g, dim) = load_gram(series, &kernel_cfg)?;
    let report = binary_segmentation(&g, &cfg)?;

    println!(
        "{} change point(s): {:?}",
        report.change_points.len(),
        report.change_points
    );

    let config = json!({
        "series": series.display().to_string(),
        "dim": dim,
        "window": window,
        "nb": nb,
        "alpha": alpha,
        "gamma": gamma,
        "nu": nu,
        "split_mode": split_mode,
        "pvalue_mode": pvalue_mode,
        "seed": seed,
        "scale": scale,
        "max_degree": max_degree,
    });
    let m = manifest("segment", config, seed, &[series], started)?;
    write_result(out, serde_json::to_value(&report)?, m)
}

#[derive(serde::Deserialize)]
struct PowerConfigFile {
    #[serde(default)]
    cells: Vec<PowerCell>,
}

#[derive(Clone, serde::Deserialize, Serialize)]
struct PowerCell {
    left: DistributionSpec,
    right: DistributionSpec,
    n: usize,
    k: usize,
    #[serde(default = "default_gamma")]
    gamma: f64,
}

fn default_gamma() -> f64 {
    0.5
}

fn cmd_power(config_path: &Path, replicates: usize, alpha: f64, seed: u64, out: &Path) -> Result<()> {
    let started = Instant::now();
    let raw = std::fs::read_to_string(config_path)?;
    let parsed: PowerConfigFile = serde_json::from_str(&raw)?;

    let mut cells_out = Vec::new();
    for (idx, cell) in parsed.cells.iter().enumerate() {
        let describe =
            |e: Error| Error::InvalidConfig(format!("cell {idx} (n={}, k={}): {e}", cell.n, cell.k));
        cell.left.validate().map_err(describe)?;
        cell.right.validate().map_err(describe)?;
        let est = resample::warp_speed_power(
            &cell.left,
            &cell.right,
            cell.n,
            cell.k,
            &StatConfig { gamma: cell.gamma },
            &KernelConfig::default(),
            &ResampleConfig {
                alpha,
                seed: crate::seeding::derive_seed(seed, &[idx as u64]),
                ..ResampleConfig::default()
            },
            replicates,
        )
        .map_err(describe)?;
        println!(
            "cell {idx}: n={} k={} gamma={} -> rejection rate {:.3}",
            cell.n, cell.k, cell.gamma, est.rejection_rate
        );
        let mut value = serde_json::to_value(cell)?;
        let obj = value.as_object_mut().unwrap();
        obj.insert("rate".into(), json!(est.rejection_rate));
        obj.insert("critical_value".into(), json!(est.critical_value));
        obj.insert("replicates".into(), json!(est.n_replicates));
        cells_out.push(value);
    }

    let config = json!({
        "config": config_path.display().to_string(),
        "replicates": replicates,
        "alpha": alpha,
        "seed": seed,
    });
    let m = manifest("power", config, seed, &[config_path], started)?;
    write_result(out, json!({ "cells": cells_out }), m)
}

mod selftest {
    //! Built-in numerical checks runnable from the CLI.

    use super::*;
    use crate::kernel::{kernel_h, SpdMatrix};
    use crate::specfun::{zonal_table, TruncationPolicy};
    use rand::Rng;

    /// Scalar reference: e^(-x-y) * sum_k (xy)^k / (k! (nu+1)_k).
    fn scalar_kernel_reference(nu: f64, x: f64, y: f64) -> f64 {
        let arg = x * y;
        let mut term = 1.0;
        let mut total = term;
        for k in 1..500 {
            let kf = k as f64;
            term *= arg / (kf * (nu + kf));
            total += term;
            if term < 1e-17 * total {
                break;
            }
        }
        total * (-x - y).exp()
    }

    fn check_scalar_oracle(policy: &TruncationPolicy) -> std::result::Result<(), String> {
        let mut rng = crate::seeding::stream(0xbe55e1, &[]);
        for &nu in &[0.5, 1.0, 2.0] {
            let cfg = KernelConfig {
                nu,
                truncation: policy.clone(),
                scale: 1.0,
            };
            for i in 0..200 {
                let x: f64 = rng.random_range(1e-6..10.0);
                let y: f64 = rng.random_range(1e-6..10.0);
                let sx = SpdMatrix::from_rows(&[vec![x]]).map_err(|e| e.to_string())?;
                let sy = SpdMatrix::from_rows(&[vec![y]]).map_err(|e| e.to_string())?;
                let h = kernel_h(&sx, &sy, &cfg).map_err(|e| e.to_string())?;
                let reference = scalar_kernel_reference(nu, x, y);
                let rel = (h.value - reference).abs() / reference.abs().max(1e-300);
                if rel > 1e-8 {
                    return Err(format!(
                        "nu={nu} sample {i}: relative error {rel:.2e} at (x,y)=({x:.4},{y:.4})"
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_zonal_normalization() -> std::result::Result<(), String> {
        let mut rng = crate::seeding::stream(0x20a1, &[]);
        for m in 1..=3usize {
            let table = zonal_table(m);
            for k in 0..=6usize {
                let deg = table.degree(k);
                for _ in 0..20 {
                    let eigs: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
                    let powers: Vec<Vec<f64>> = eigs
                        .iter()
                        .map(|&x| (0..=k).map(|e| x.powi(e as i32)).collect())
                        .collect();
                    let total: f64 = deg.evaluate_all(m, &powers).iter().sum();
                    let trace: f64 = eigs.iter().sum();
                    let expected = trace.powi(k as i32);
                    let rel = (total - expected).abs() / expected.abs().max(1e-300);
                    if rel > 1e-10 {
                        return Err(format!("m={m} k={k}: relative error {rel:.2e}"));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_gram_psd(policy: &TruncationPolicy) -> std::result::Result<(), String> {
        let sampler = crate::distributions::Sampler::new(DistributionSpec::wishart(2, 2.5))
            .map_err(|e| e.to_string())?;
        let mut rng = crate::seeding::stream(0x6d5d, &[]);
        let sample = sampler.sample_n(15, &mut rng);
        let cfg = KernelConfig {
            nu: 1.0,
            truncation: policy.clone(),
            scale: 1.0,
        };
        let g = gram(&sample, &cfg).map_err(|e| e.to_string())?;
        let min = g.min_eigenvalue();
        let trace = g.values().trace();
        if min < -1e-8 * trace {
            return Err(format!("min Gram eigenvalue {min:.3e} below -1e-8 * trace {trace:.3e}"));
        }
        Ok(())
    }

    fn check_profile_against_naive() -> std::result::Result<(), String> {
        let mut rng = crate::seeding::stream(0x9a1e, &[]);
        let sample: Vec<SpdMatrix> = (0..10)
            .map(|_| SpdMatrix::from_rows(&[vec![rng.random_range(0.05..3.0)]]).unwrap())
            .collect();
        let g = gram(&sample, &KernelConfig::default()).map_err(|e| e.to_string())?;
        let profile = crate::cpstat::statistic_profile(&g, &StatConfig::default())
            .map_err(|e| e.to_string())?;
        let n = g.n();
        let nf = n as f64;
        for k in 1..n {
            let (mut top, mut bottom, mut cross) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let v = g.value(i, j);
                    if i < k && j < k {
                        top += v;
                    } else if i >= k && j >= k {
                        bottom += v;
                    } else if i < k {
                        cross += v;
                    }
                }
            }
            let kf = k as f64;
            let rf = (n - k) as f64;
            let bracket = top / (kf * kf) + bottom / (rf * rf) - 2.0 * cross / (kf * rf);
            let weighted = (kf * rf / (nf * nf)).powf(0.5) * (kf * rf / nf) * bracket;
            if (profile.weighted[k - 1] - weighted).abs() > 1e-12 {
                return Err(format!(
                    "k={k}: prefix-sum {} vs naive {weighted}",
                    profile.weighted[k - 1]
                ));
            }
        }
        Ok(())
    }

    /// Run all checks, print one PASS/FAIL line each, and report overall
    /// success.
    pub fn run(max_degree: usize) -> bool {
        let policy = TruncationPolicy {
            max_degree,
            ..TruncationPolicy::default()
        };
        let checks: Vec<(&str, std::result::Result<(), String>)> = vec![
            ("scalar-bessel-oracle", check_scalar_oracle(&policy)),
            ("zonal-normalization", check_zonal_normalization()),
            ("gram-psd", check_gram_psd(&policy)),
            ("profile-vs-naive", check_profile_against_naive()),
        ];
        let mut all_ok = true;
        for (name, outcome) in checks {
            match outcome {
                Ok(()) => println!("PASS {name}"),
                Err(msg) => {
                    all_ok = false;
                    println!("FAIL {name}: {msg}");
                }
            }
        }
        all_ok
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ingest {
            prices,
            grouping,
            out,
        } => {
            cmd_ingest(&prices, &grouping, &out)?;
            Ok(0)
        }
        Command::Detect {
            series,
            gamma,
            nu,
            nb,
            alpha,
            seed,
            pvalue_mode,
            emit_null,
            scale,
            max_degree,
            out,
        } => {
            cmd_detect(
                &series,
                gamma,
                nu,
                nb,
                alpha,
                seed,
                &pvalue_mode,
                emit_null,
                scale,
                max_degree,
                &out,
            )?;
            Ok(0)
        }
        Command::Segment {
            series,
            window,
            nb,
            alpha,
            gamma,
            nu,
            split_mode,
            pvalue_mode,
            seed,
            scale,
            max_degree,
            out,
        } => {
            cmd_segment(
                &series,
                window,
                nb,
                alpha,
                gamma,
                nu,
                &split_mode,
                &pvalue_mode,
                seed,
                scale,
                max_degree,
                &out,
            )?;
            Ok(0)
        }
        Command::Power {
            config,
            replicates,
            alpha,
            seed,
            out,
        } => {
            cmd_power(&config, replicates, alpha, seed, &out)?;
            Ok(0)
        }
        Command::Selftest { max_degree } => {
            if selftest::run(max_degree) {
                Ok(0)
            } else {
                Ok(1)
            }
        }
    }
}

/// Parse and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// CLI entry point for the binary.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    run_from(std::env::args_os())
}
