//! Runs configured experiments and writes their artifacts.
//!
//! Every (seed, method) pair is an independent task. Tasks fan out over a
//! rayon pool and results are reduced in (method, seed) order, so output
//! bytes do not depend on the number of threads.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dppmc::distributions::sample_isotropic_gaussian;
use dppmc::dpp::{
    enumerate_dpp_distribution, enumerate_k_dpp_distribution, sample_dpp_l, sample_k_dpp, LEnsemble,
    DPP_ENUMERATION_CAP, K_DPP_ENUMERATION_CAP,
};
use dppmc::es::{
    benchmark_function, run_cmaes, run_guided_es, run_trust_region_es, Benchmark, Blackbox, CmaRun, Noise,
};
use dppmc::kernels::{
    empirical_mse, load_pair_dataset, random_mixture, random_pairs, synthetic_blobs, GaussianMixtureKernel, Method,
    MseRow,
};
use dppmc::rng::substream;
use dppmc::theory::{verify_variance_reduction, DownsampledEstimatorSpec, VarianceReductionReport};
use dppmc::{DppmcConfig, RunRecord, RunRow};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{summarize, write_summary, SummaryRow};
use crate::config::{ExperimentConfig, ExperimentKind, RhoAblationParams, Variant};
use crate::svg::{render_curves, PlotOptions, Scale};
use crate::CliError;

/// Substream reserved for starting points, shared by all variants of a seed.
const X0_STREAM: u64 = 7_919;

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Per-task failures; results of the other tasks are still written.
    pub failures: Vec<String>,
}

/// Seeded Gaussian starting point, identical across methods for a seed.
pub fn initial_point(seed: u64, dim: usize, scale: f64) -> DVector<f64> {
    let pool = sample_isotropic_gaussian(dim, 1, &mut substream(seed, X0_STREAM));
    pool.get(0) * scale
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

type Task<'a> = (
    String,
    u64,
    Box<dyn Fn() -> Result<RunRecord, CliError> + Send + Sync + 'a>,
);

fn run_tasks(tasks: Vec<Task<'_>>, output: &mut ExperimentOutput) {
    let results: Vec<(String, u64, Result<RunRecord, CliError>)> = tasks
        .into_par_iter()
        .map(|(method, seed, task)| {
            let result = task();
            (method, seed, result)
        })
        .collect();
    let mut ordered: BTreeMap<(String, u64), Result<RunRecord, CliError>> = BTreeMap::new();
    for (method, seed, result) in results {
        ordered.insert((method, seed), result);
    }
    for ((method, seed), result) in ordered {
        match result {
            Ok(rec) => output.records.push(rec),
            Err(e) => output.failures.push(format!("method {method}, seed {seed}: {e}")),
        }
    }
}

fn method_label(base: &str, variant: Variant) -> String {
    match variant {
        Variant::Baseline => base.to_string(),
        Variant::Dppmc => format!("{base}-dppmc"),
    }
}

fn noisy(f: Blackbox, level: f64, seed: u64) -> Result<Blackbox, CliError> {
    if level == 0.0 {
        return Ok(f);
    }
    Ok(f.with_noise(Noise::Relative(level), seed)?)
}

/// Runs `cfg`, writing every artifact under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let digest = cfg.digest();
    let mut output = ExperimentOutput::default();
    fs::create_dir_all(out_dir)?;

    let trajectories = match cfg.kind {
        ExperimentKind::Cmaes => {
            if cfg.budget == 0 {
                output
                    .warnings
                    .push("budget is 0: no generations run, records are empty".into());
            } else {
                with_pool(jobs, || run_tasks(cmaes_tasks(cfg), &mut output))?;
            }
            Some(Scale::Log)
        }
        ExperimentKind::GuidedEs => {
            with_pool(jobs, || run_tasks(guided_tasks(cfg), &mut output))?;
            Some(Scale::Log)
        }
        ExperimentKind::TrustRegionEs => {
            with_pool(jobs, || run_tasks(trust_region_tasks(cfg), &mut output))?;
            Some(Scale::Log)
        }
        ExperimentKind::KernelMse => {
            let rows = with_pool(jobs, || kernel_mse(cfg, &mut output))??;
            let path = out_dir.join("mse.csv");
            write_with_digest(&path, &digest, |out| {
                writeln!(out, "seed,q,ratio,method,mse,stderr,trials")?;
                for (seed, q, r) in &rows {
                    writeln!(
                        out,
                        "{seed},{q},{},{},{},{},{}",
                        r.ratio, r.method, r.mse, r.stderr, r.trials
                    )?;
                }
                Ok(())
            })?;
            output.files.push(path);
            Some(Scale::Log)
        }
        ExperimentKind::RhoAblation => {
            let p = cfg.rho_ablation.clone().unwrap_or_default();
            let (rows, records) = with_pool(jobs, || rho_ablation(&p, &cfg.seeds, cfg.budget))??;
            output.records = records;
            let path = out_dir.join("rho_ablation.csv");
            write_with_digest(&path, &digest, |out| write_ablation(&rows, out))?;
            output.files.push(path);
            Some(Scale::Log)
        }
        ExperimentKind::TheoryCheck => {
            let reports = theory_check(cfg, &mut output)?;
            let path = out_dir.join("theory_summary.csv");
            write_with_digest(&path, &digest, |out| {
                writeln!(out, "seed,var_iid,var_dpp_closed_form,var_dpp_empirical,epsilon,passed")?;
                for (seed, r) in &reports {
                    writeln!(
                        out,
                        "{seed},{},{},{},{},{}",
                        r.var_iid, r.var_dpp_closed_form, r.var_dpp_empirical, r.epsilon, r.passed
                    )?;
                }
                Ok(())
            })?;
            output.files.push(path);
            let json_path = out_dir.join("theory.json");
            let json = serde_json::to_string_pretty(&TheoryFile {
                config_digest: &digest,
                reports: &reports,
            })
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            fs::write(&json_path, json + "\n")?;
            output.files.push(json_path);
            None
        }
        ExperimentKind::DppSample => {
            let laws = with_pool(jobs, || dpp_sample(cfg))??;
            let path = out_dir.join("dpp_law.csv");
            write_with_digest(&path, &digest, |out| {
                writeln!(out, "seed,subset,empirical,exact")?;
                for law in &laws {
                    for (subset, (emp, exact)) in &law.rows {
                        let exact = exact.map(|e| e.to_string()).unwrap_or_default();
                        writeln!(out, "{},{},{emp},{exact}", law.seed, subset_label(subset))?;
                    }
                }
                Ok(())
            })?;
            output.files.push(path);
            let summary_path = out_dir.join("dpp_summary.csv");
            write_with_digest(&summary_path, &digest, |out| {
                writeln!(out, "seed,draws,total_variation")?;
                for law in &laws {
                    let tv = law.total_variation.map(|t| t.to_string()).unwrap_or_default();
                    writeln!(out, "{},{},{tv}", law.seed, cfg.budget)?;
                }
                Ok(())
            })?;
            output.files.push(summary_path);
            None
        }
    };

    if let Some(scale) = trajectories {
        for rec in &mut output.records {
            rec.config_digest = Some(digest.clone());
        }
        let records_path = out_dir.join("records.csv");
        write_with_digest(&records_path, &digest, |out| write_records(&output.records, out))?;
        output.files.push(records_path);

        output.summary = summarize(&output.records);
        let summary_path = out_dir.join("summary.csv");
        let summary = &output.summary;
        write_with_digest_raw(&summary_path, |out| write_summary(summary, &digest, out))?;
        output.files.push(summary_path);

        if !output.summary.is_empty() {
            let svg = render_curves(
                &output.summary,
                &PlotOptions {
                    title: cfg.kind.name().to_string(),
                    y_scale: scale,
                    digest: Some(digest.clone()),
                },
            )?;
            let svg_path = out_dir.join("curves.svg");
            fs::write(&svg_path, svg)?;
            output.files.push(svg_path);
        }
    }
    Ok(output)
}

#[derive(Serialize)]
struct TheoryFile<'a> {
    config_digest: &'a str,
    reports: &'a [(u64, VarianceReductionReport)],
}

fn write_with_digest_raw(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_with_digest(
    path: &Path,
    digest: &str,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    write_with_digest_raw(path, |out| {
        writeln!(out, "# config_digest={digest}")?;
        body(out)
    })
}

/// All records as one CSV body (header included), in the given order.
pub fn write_records<W: Write>(records: &[RunRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", dppmc::record::RUN_RECORD_HEADER)?;
    for rec in records {
        rec.write_csv(&mut out, false)?;
    }
    Ok(())
}

/// Reads rows written by [`write_records`], skipping `#` comment lines.
pub fn read_records(text: &str) -> Result<Vec<RunRecord>, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == dppmc::record::RUN_RECORD_HEADER => {}
        _ => {
            return Err(CliError::Validation(format!(
                "expected header `{}`",
                dppmc::record::RUN_RECORD_HEADER
            )))
        }
    }
    let mut grouped: BTreeMap<(String, u64), RunRecord> = BTreeMap::new();
    for (no, line) in lines {
        let bad = |what: &str| CliError::Validation(format!("line {}: invalid {what}", no + 1));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(bad("row"));
        }
        let row = RunRow {
            iteration: cells[0].trim().parse().map_err(|_| bad("iteration"))?,
            cumulative_evals: cells[1].trim().parse().map_err(|_| bad("cumulative_evals"))?,
            objective: cells[2].trim().parse().map_err(|_| bad("objective"))?,
            seed: cells[3].trim().parse().map_err(|_| bad("seed"))?,
            method: cells[4].trim().to_string(),
        };
        grouped.entry((row.method.clone(), row.seed)).or_default().push(row);
    }
    Ok(grouped.into_values().collect())
}

fn cmaes_tasks(cfg: &ExperimentConfig) -> Vec<Task<'_>> {
    let p = cfg.cmaes.clone().unwrap_or_default();
    let mut tasks: Vec<Task<'_>> = Vec::new();
    for &variant in &p.variants {
        for &seed in &cfg.seeds {
            let p = p.clone();
            let label = method_label("cmaes", variant);
            let method = label.clone();
            tasks.push((
                label,
                seed,
                Box::new(move || {
                    let f = benchmark_function(p.function, p.dim)?;
                    let run = CmaRun {
                        x0: initial_point(seed, p.dim, p.x0_scale),
                        sigma0: p.sigma0,
                        lambda: p.lambda,
                        generations: cfg.budget,
                        dppmc: (variant == Variant::Dppmc).then(|| p.dppmc.config(p.lambda)),
                    };
                    Ok(run_cmaes(&f, &run, seed, &method)?)
                }),
            ));
        }
    }
    tasks
}

fn guided_tasks(cfg: &ExperimentConfig) -> Vec<Task<'_>> {
    let p = cfg.guided_es.clone().unwrap_or_default();
    let mut tasks: Vec<Task<'_>> = Vec::new();
    for &variant in &p.variants {
        for &seed in &cfg.seeds {
            let p = p.clone();
            let label = method_label("guided-es", variant);
            let method = label.clone();
            tasks.push((
                label,
                seed,
                Box::new(move || {
                    let m = p.m.unwrap_or(p.dim);
                    let f = noisy(benchmark_function(p.function, p.dim)?, p.noise, seed)?;
                    let dppmc = (variant == Variant::Dppmc).then(|| p.dppmc.config(m));
                    Ok(run_guided_es(
                        &f,
                        initial_point(seed, p.dim, p.x0_scale),
                        p.optimizer.clone(),
                        m,
                        cfg.budget,
                        dppmc.as_ref(),
                        seed,
                        &method,
                    )?)
                }),
            ));
        }
    }
    tasks
}

fn trust_region_tasks(cfg: &ExperimentConfig) -> Vec<Task<'_>> {
    let p = cfg.trust_region_es.clone().unwrap_or_default();
    let mut tasks: Vec<Task<'_>> = Vec::new();
    for &variant in &p.variants {
        for &seed in &cfg.seeds {
            let p = p.clone();
            let label = method_label("trust-region-es", variant);
            let method = label.clone();
            tasks.push((
                label,
                seed,
                Box::new(move || {
                    let f = noisy(benchmark_function(p.function, p.dim)?, p.noise, seed)?;
                    Ok(run_trust_region_es(
                        &f,
                        initial_point(seed, p.dim, p.x0_scale),
                        p.optimizer.clone(),
                        p.m.unwrap_or(p.dim),
                        cfg.budget,
                        variant == Variant::Dppmc,
                        seed,
                        &method,
                    )?)
                }),
            ));
        }
    }
    tasks
}

/// MSE rows keyed by (seed, Q); trajectories use the ratio index as the
/// iteration and m as the evaluation count.
fn kernel_mse(cfg: &ExperimentConfig, output: &mut ExperimentOutput) -> Result<Vec<(u64, usize, MseRow)>, CliError> {
    let p = cfg.kernel_mse.clone().unwrap_or_default();
    let mut jobs: Vec<(u64, usize, Method)> = Vec::new();
    for &seed in &cfg.seeds {
        for &q in &p.components {
            for &method in &p.methods {
                jobs.push((seed, q, method));
            }
        }
    }
    type CellResult = ((u64, usize, Method), Result<Vec<MseRow>, CliError>);
    let results: Vec<CellResult> = jobs
        .into_par_iter()
        .map(|(seed, q, method)| {
            let run = || -> Result<Vec<MseRow>, CliError> {
                let pairs = match &p.data {
                    Some(path) => load_pair_dataset(path, &mut substream(seed, 2))?,
                    None => {
                        let pts = synthetic_blobs(p.points, p.dim, p.blobs, &mut substream(seed, 1));
                        random_pairs(&pts, &mut substream(seed, 2))
                    }
                };
                let dim = pairs
                    .first()
                    .map(|(x, _)| x.len())
                    .ok_or_else(|| CliError::Validation("key `kernel_mse.data`: fewer than two rows".into()))?;
                let gm = random_mixture(q, dim, p.mean_scale, p.std_scale, &mut substream(seed, 10 + q as u64))?;
                let kernel = GaussianMixtureKernel::new(gm)?;
                p.ratios
                    .iter()
                    .map(|&r| {
                        Ok(empirical_mse(
                            &kernel,
                            method,
                            r * dim,
                            &pairs,
                            cfg.budget,
                            &p.estimator,
                            seed,
                        )?)
                    })
                    .collect()
            };
            ((seed, q, method), run())
        })
        .collect();

    let mut rows = Vec::new();
    let mut records: BTreeMap<(String, u64), RunRecord> = BTreeMap::new();
    for ((seed, q, method), result) in results {
        match result {
            Ok(mse_rows) => {
                let label = format!("{method}-q{q}");
                let rec = records.entry((label.clone(), seed)).or_default();
                for (i, r) in mse_rows.iter().enumerate() {
                    rec.push(RunRow {
                        iteration: i,
                        cumulative_evals: (r.ratio * p.dim as f64).round() as u64,
                        objective: r.mse,
                        seed,
                        method: label.clone(),
                    });
                }
                rows.extend(mse_rows.into_iter().map(|r| (seed, q, r)));
            }
            Err(e) => output
                .failures
                .push(format!("method {method}, q {q}, seed {seed}: {e}")),
        }
    }
    output.records = records.into_values().collect();
    Ok(rows)
}

fn theory_check(
    cfg: &ExperimentConfig,
    output: &mut ExperimentOutput,
) -> Result<Vec<(u64, VarianceReductionReport)>, CliError> {
    let p = cfg.theory_check.clone().unwrap_or_default();
    let spec = DownsampledEstimatorSpec::scalar(&p.values, p.probabilities.clone())?;
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        match verify_variance_reduction(&spec, cfg.budget, seed) {
            Ok(r) => reports.push((seed, r)),
            Err(e) => output.failures.push(format!("seed {seed}: {e}")),
        }
    }
    Ok(reports)
}

struct SampledLaw {
    seed: u64,
    rows: BTreeMap<Vec<usize>, (f64, Option<f64>)>,
    total_variation: Option<f64>,
}

fn subset_label(subset: &[usize]) -> String {
    if subset.is_empty() {
        "{}".into()
    } else {
        subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Random L = A Aᵀ / n with standard-normal A.
pub fn random_l_ensemble(n: usize, seed: u64) -> Result<LEnsemble, CliError> {
    let a = sample_isotropic_gaussian(n, n, &mut substream(seed, 0));
    let a = DMatrix::from_columns(a.vectors());
    Ok(LEnsemble::new(&a * a.transpose() / n as f64)?)
}

fn dpp_sample(cfg: &ExperimentConfig) -> Result<Vec<SampledLaw>, CliError> {
    let p = cfg.dpp_sample.clone().unwrap_or_default();
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let l = match &p.l_matrix {
                Some(rows) => {
                    let n = rows.len();
                    LEnsemble::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
                }
                None => random_l_ensemble(p.n_items, seed)?,
            };
            let mut rng = substream(seed, 1);
            let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for _ in 0..cfg.budget {
                let mut s = match p.k {
                    Some(k) => sample_k_dpp(&l, k, &mut rng)?,
                    None => sample_dpp_l(&l, &mut rng),
                };
                s.sort_unstable();
                *counts.entry(s).or_default() += 1;
            }
            let exact = match p.k {
                Some(k) if l.n_items() <= K_DPP_ENUMERATION_CAP => Some(enumerate_k_dpp_distribution(&l, k)?),
                None if l.n_items() <= DPP_ENUMERATION_CAP => Some(enumerate_dpp_distribution(&l)?),
                _ => None,
            };
            let draws = cfg.budget as f64;
            let mut rows: BTreeMap<Vec<usize>, (f64, Option<f64>)> =
                counts.into_iter().map(|(s, c)| (s, (c as f64 / draws, None))).collect();
            let total_variation = exact.map(|law| {
                for (s, prob) in law {
                    rows.entry(s).or_insert((0.0, None)).1 = Some(prob);
                }
                0.5 * rows.values().map(|(e, x)| (e - x.unwrap_or(0.0)).abs()).sum::<f64>()
            });
            Ok(SampledLaw {
                seed,
                rows,
                total_variation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub function: Benchmark,
    pub rho: f64,
    pub mean_final_objective: f64,
    pub seeds: usize,
}

/// CMA-ES with DPPMC for every (function, ρ, seed); reports the mean final
/// objective across seeds per (function, ρ).
pub fn rho_ablation(
    p: &RhoAblationParams,
    seeds: &[u64],
    generations: usize,
) -> Result<(Vec<AblationRow>, Vec<RunRecord>), CliError> {
    crate::config::validate_rho_list(&p.rho_list)?;
    if seeds.is_empty() || generations == 0 {
        return Err(CliError::Validation(
            "rho ablation needs seeds and a positive budget".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &function in &p.functions {
        for (ri, &rho) in p.rho_list.iter().enumerate() {
            for &seed in seeds {
                jobs.push((function, ri, rho, seed));
            }
        }
    }
    let results: Vec<RunRecord> = jobs
        .into_par_iter()
        .map(|(function, _, rho, seed)| {
            let f = benchmark_function(function, p.dim)?;
            let run = CmaRun {
                x0: initial_point(seed, p.dim, p.x0_scale),
                sigma0: p.sigma0,
                lambda: p.lambda,
                generations,
                dppmc: Some(DppmcConfig {
                    m: p.lambda,
                    rho,
                    renormalize: p.renormalize,
                    sigma: p.dpp_sigma,
                }),
            };
            Ok(run_cmaes(&f, &run, seed, &format!("{function}-rho{rho}"))?)
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows = Vec::new();
    let mut idx = 0;
    for &function in &p.functions {
        for &rho in &p.rho_list {
            let finals: Vec<f64> = results[idx..idx + seeds.len()]
                .iter()
                .map(|r| r.final_objective().unwrap_or(f64::NAN))
                .collect();
            idx += seeds.len();
            rows.push(AblationRow {
                function,
                rho,
                mean_final_objective: finals.iter().sum::<f64>() / finals.len() as f64,
                seeds: finals.len(),
            });
        }
    }
    Ok((rows, results))
}

/// Functions whose mean final objective does not increase along the ρ list.
pub fn nonincreasing_functions(rows: &[AblationRow]) -> Vec<Benchmark> {
    let mut by_function: BTreeMap<Benchmark, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_function.entry(r.function).or_default().push(r.mean_final_objective);
    }
    by_function
        .into_iter()
        .filter(|(_, v)| v.windows(2).all(|w| w[1] <= w[0]))
        .map(|(f, _)| f)
        .collect()
}

pub fn write_ablation<W: Write>(rows: &[AblationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "function,rho,mean_final_objective,seeds")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.function, r.rho, r.mean_final_objective, r.seeds)?;
    }
    Ok(())
}
