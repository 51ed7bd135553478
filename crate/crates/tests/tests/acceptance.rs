//! Acceptance checks. Runs as a plain binary (`harness = false`) so every
//! criterion prints its PASS/FAIL line, then exits non-zero if any failed.

use std::collections::BTreeMap;
use std::time::Instant;

use dppmc::distributions::sample_isotropic_gaussian;
use dppmc::dpp::{all_subsets, combinations, sample_dpp_l, sample_k_dpp};
use dppmc::es::{
    benchmark_function, es_gradient, ridge_gradient, run_cmaes, trust_region_es_step, Benchmark, Blackbox, CmaRun,
    TrustRegionConfig, TrustRegionState,
};
use dppmc::kernels::{
    empirical_mse, random_mixture, random_pairs, synthetic_blobs, EstimatorSettings, GaussianMixtureKernel, Method,
};
use dppmc::rng::substream;
use dppmc::theory::{
    construct_variance_reducing_kernel, es_gradient_terms, planted_orthogonal_features, verify_es_variance_reduction,
    verify_orthogonality_argmax, verify_variance_reduction, DownsampledEstimatorSpec,
};
use dppmc::{DppmcConfig, LEnsemble, Provenance, SamplePool};
use dppmc_cli::config::RhoAblationParams;
use dppmc_cli::runner::{initial_point, nonincreasing_functions, rho_ablation};
use nalgebra::{DMatrix, DVector};

struct Outcome {
    passed: bool,
    detail: String,
}

fn det_of(m: &DMatrix<f64>, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(subset.len(), subset.len(), |a, b| m[(subset[a], subset[b])]).determinant()
}

fn total_variation(counts: &BTreeMap<Vec<usize>, usize>, exact: &BTreeMap<Vec<usize>, f64>, draws: usize) -> f64 {
    let mut keys: Vec<&Vec<usize>> = exact.keys().collect();
    keys.extend(counts.keys().filter(|s| !exact.contains_key(*s)));
    0.5 * keys
        .into_iter()
        .map(|s| {
            let e = counts.get(s).copied().unwrap_or(0) as f64 / draws as f64;
            (e - exact.get(s).copied().unwrap_or(0.0)).abs()
        })
        .sum::<f64>()
}

fn dpp_law() -> Outcome {
    const DRAWS: usize = 200_000;
    let mut worst_tv: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for case in 0..20u64 {
        let n = 3 + (case % 4) as usize;
        let scale = [0.5, 1.0, 2.0, 4.0][(case / 4 % 4) as usize];
        let a = sample_isotropic_gaussian(n, n, &mut substream(1000 + case, 0));
        let a = DMatrix::from_columns(a.vectors());
        let m = &a * a.transpose() * (scale / n as f64);
        let l = LEnsemble::new(m.clone()).expect("valid ensemble");

        let normalizer = (&m + DMatrix::identity(n, n)).determinant();
        let subsets = all_subsets(n);
        let total: f64 = subsets.iter().map(|s| det_of(&m, s)).sum();
        worst_norm = worst_norm.max((total - normalizer).abs() / normalizer);

        let exact: BTreeMap<Vec<usize>, f64> = subsets
            .iter()
            .map(|s| (s.clone(), det_of(&m, s) / normalizer))
            .collect();
        let mut rng = substream(1000 + case, 1);
        let mut counts = BTreeMap::new();
        for _ in 0..DRAWS {
            let mut s = sample_dpp_l(&l, &mut rng);
            s.sort_unstable();
            *counts.entry(s).or_insert(0) += 1;
        }
        worst_tv = worst_tv.max(total_variation(&counts, &exact, DRAWS));

        let k = 1 + (case as usize % n);
        let size_k = combinations(n, k);
        let e_k: f64 = size_k.iter().map(|s| det_of(&m, s)).sum();
        let exact_k: BTreeMap<Vec<usize>, f64> = size_k.iter().map(|s| (s.clone(), det_of(&m, s) / e_k)).collect();
        let mut counts = BTreeMap::new();
        for _ in 0..DRAWS {
            let mut s = sample_k_dpp(&l, k, &mut rng).expect("k within rank");
            s.sort_unstable();
            *counts.entry(s).or_insert(0) += 1;
        }
        worst_tv = worst_tv.max(total_variation(&counts, &exact_k, DRAWS));
    }
    Outcome {
        passed: worst_tv <= 0.01 && worst_norm <= 1e-9,
        detail: format!(
            "20 ensembles, max TV {worst_tv:.4} (<= 0.01), max normalization error {worst_norm:.2e} (<= 1e-9)"
        ),
    }
}

/// Mean vector and trace variance of (1/N) Σ_{i∈S} a_i/p_i under an
/// explicit subset law.
fn moments(spec: &DownsampledEstimatorSpec, law: impl Fn(&[usize]) -> f64) -> (DVector<f64>, f64) {
    let n = spec.values.len();
    let d = spec.values[0].len();
    let mut mean = DVector::zeros(d);
    let mut second = 0.0;
    for s in all_subsets(n) {
        let prob = law(&s);
        let mut est = DVector::zeros(d);
        for &i in &s {
            est += &spec.values[i] / (spec.probabilities[i] * n as f64);
        }
        second += prob * est.norm_squared();
        mean += est * prob;
    }
    let var = second - mean.norm_squared();
    (mean, var)
}

fn independent_law(p: &[f64], s: &[usize]) -> f64 {
    (0..p.len())
        .map(|i| if s.contains(&i) { p[i] } else { 1.0 - p[i] })
        .product()
}

/// P(S) = |det(K − I_{S̄})|.
fn marginal_law(k: &DMatrix<f64>, s: &[usize]) -> f64 {
    let mut m = k.clone();
    for i in 0..k.nrows() {
        if !s.contains(&i) {
            m[(i, i)] -= 1.0;
        }
    }
    m.determinant().abs()
}

fn variance_reduction() -> Outcome {
    const TRIALS: usize = 100_000;
    let ones = DownsampledEstimatorSpec::scalar(&[1.0; 4], vec![0.5; 4]).unwrap();
    let scalar = verify_variance_reduction(&ones, TRIALS, 0).unwrap();
    let eps = scalar.epsilon;
    let kernel = construct_variance_reducing_kernel(&ones, None).unwrap();
    let (_, var_iid_enum) = moments(&ones, |s| independent_law(&ones.probabilities, s));
    let (_, var_dpp_enum) = moments(&ones, |s| marginal_law(kernel.kernel.matrix(), s));
    let expected = 0.25 - 3.0 * eps * eps;
    let scalar_ok = eps > 0.0
        && (scalar.var_iid - 0.25).abs() <= 1e-12
        && (var_iid_enum - 0.25).abs() <= 1e-12
        && (scalar.var_dpp_closed_form - expected).abs() <= 1e-12
        && (var_dpp_enum - expected).abs() <= 1e-12
        && (scalar.var_dpp_empirical - expected).abs() <= 3.0 * scalar.var_dpp_empirical_stderr;

    let mut vector_ok = 0;
    let mut empirical_ok = 0;
    let cases = 20u64;
    let mut worst_ratio: f64 = 0.0;
    for case in 0..cases {
        let f = if case % 2 == 0 {
            Benchmark::Sphere
        } else {
            Benchmark::Rosenbrock
        };
        let theta = initial_point(case, 2, 1.0);
        let report = verify_es_variance_reduction(2, 5, f, &theta, 0.5, 0.5, TRIALS, case).unwrap();
        let terms = es_gradient_terms(f, &theta, 0.5, 5, &mut substream(case, 100));
        let spec = DownsampledEstimatorSpec::unbiased(terms, vec![0.5; 5]).unwrap();
        let k = construct_variance_reducing_kernel(&spec, None).unwrap();
        let (mean_iid, var_iid) = moments(&spec, |s| independent_law(&spec.probabilities, s));
        let (mean_dpp, var_dpp) = moments(&spec, |s| marginal_law(k.kernel.matrix(), s));
        let full = spec.values.iter().fold(DVector::zeros(2), |acc, v| acc + v) / 5.0;
        let tol = 1e-10 * full.norm().max(1.0);
        let closed_form_match = (report.reduction.var_dpp_closed_form - var_dpp).abs() <= 1e-10 * var_dpp.max(1.0)
            && (report.reduction.var_iid - var_iid).abs() <= 1e-10 * var_iid.max(1.0);
        if var_dpp < var_iid
            && (&mean_iid - &full).norm() <= tol
            && (&mean_dpp - &full).norm() <= tol
            && closed_form_match
        {
            vector_ok += 1;
        }
        if (report.reduction.var_dpp_empirical - var_dpp).abs() <= 3.0 * report.reduction.var_dpp_empirical_stderr {
            empirical_ok += 1;
        }
        worst_ratio = worst_ratio.max(var_dpp / var_iid);
    }
    Outcome {
        passed: scalar_ok && vector_ok == cases && empirical_ok == cases,
        detail: format!(
            "scalar eps={eps:.6} var_iid={:.6} var_dpp={:.6} (0.25-3eps^2={expected:.6}; literal 0.25-48eps^2={:.6}) empirical={:.6}+-{:.6}; vector cases {vector_ok}/{cases} strict with exact means, empirical within 3 SE {empirical_ok}/{cases}, max var ratio {worst_ratio:.4}",
            scalar.var_iid,
            scalar.var_dpp_closed_form,
            0.25 - 48.0 * eps * eps,
            scalar.var_dpp_empirical,
            scalar.var_dpp_empirical_stderr,
        ),
    }
}

/// Exact argmax of det over size-k Gram minors versus the pairwise-orthogonal
/// k-subsets, computed here from scratch.
fn orthogonality_instance(features: &[DVector<f64>], k: usize) -> (bool, f64) {
    let n = features.len();
    let gram = DMatrix::from_fn(n, n, |i, j| features[i].dot(&features[j]));
    let subsets = combinations(n, k);
    let dets: Vec<f64> = subsets.iter().map(|s| det_of(&gram, s)).collect();
    let max = dets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let maximizers: Vec<&Vec<usize>> = subsets
        .iter()
        .zip(&dets)
        .filter(|(_, d)| max - **d <= 1e-9)
        .map(|(s, _)| s)
        .collect();
    let orthogonal: Vec<&Vec<usize>> = subsets
        .iter()
        .filter(|s| {
            s.iter()
                .all(|&i| s.iter().all(|&j| i == j || gram[(i, j)].abs() <= 1e-9))
        })
        .collect();
    let bound = dets.iter().all(|&d| d.max(0.0).powf(1.0 / k as f64) <= 1.0 + 1e-12);
    let library = verify_orthogonality_argmax(features, k).unwrap();
    let ok = !orthogonal.is_empty()
        && maximizers == orthogonal
        && (max - 1.0).abs() <= 1e-9
        && bound
        && library.passed
        && library.maximizers.iter().collect::<Vec<_>>() == maximizers;
    (ok, max)
}

fn orthogonality() -> Outcome {
    let s = 0.5f64.sqrt();
    let example = vec![
        DVector::from_vec(vec![1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0, 0.0]),
        DVector::from_vec(vec![0.0, 0.0, 1.0]),
        DVector::from_vec(vec![s, s, 0.0]),
    ];
    let (example_ok, _) = orthogonality_instance(&example, 2);
    let mut rng = substream(2024, 0);
    let mut planted_ok = 0;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = 6 + i % 7;
        let k = 2 + i % 3;
        let features = planted_orthogonal_features(n, 6, k, &mut rng);
        let (ok, max) = orthogonality_instance(&features, k);
        worst = worst.max((max - 1.0).abs());
        if ok {
            planted_ok += 1;
        }
    }
    Outcome {
        passed: example_ok && planted_ok == 20,
        detail: format!(
            "example {}, planted {planted_ok}/20 (N 6..12, k 2..4), max |max det - 1| {worst:.1e}",
            if example_ok { "ok" } else { "wrong" }
        ),
    }
}

fn kernel_mse() -> Outcome {
    let seed = 0;
    let dim = 8;
    let points = synthetic_blobs(400, dim, 4, &mut substream(seed, 1));
    let pairs = random_pairs(&points, &mut substream(seed, 2));
    let settings = EstimatorSettings {
        rho: 10.0,
        sigma: 0.5,
        renormalize: true,
    };
    let mut wins = 0;
    let mut cells = 0;
    let mut scaling_ok = true;
    let mut spreads = Vec::new();
    for q in 2..=5usize {
        let gm = random_mixture(q, dim, 0.1, 0.05, &mut substream(seed, 10 + q as u64)).unwrap();
        let kernel = GaussianMixtureKernel::new(gm).unwrap();
        let mut scaled = Vec::new();
        for ratio in 1..=3usize {
            let m = ratio * dim;
            let iid = empirical_mse(&kernel, Method::Iid, m, &pairs, 500, &settings, seed).unwrap();
            let dpp = empirical_mse(&kernel, Method::Dppmc, m, &pairs, 500, &settings, seed).unwrap();
            cells += 1;
            if dpp.mse <= iid.mse {
                wins += 1;
            }
            scaled.push(m as f64 * iid.mse);
        }
        let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        scaling_ok &= hi / lo <= 2.0;
        spreads.push(format!("{:.2}", hi / lo));
    }
    Outcome {
        passed: wins * 5 >= cells * 4 && scaling_ok,
        detail: format!(
            "DPPMC <= IID in {wins}/{cells} cells (need 80%), IID m*MSE max/min per Q [{}] (<= 2)",
            spreads.join(", ")
        ),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn cmaes() -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for bench in Benchmark::ALL {
        let f = benchmark_function(bench, 16).unwrap();
        let mut finals = [Vec::new(), Vec::new()];
        for seed in 0..5u64 {
            for (slot, dppmc) in [
                None,
                Some(DppmcConfig {
                    m: 16,
                    rho: 10.0,
                    renormalize: true,
                    sigma: 0.5,
                }),
            ]
            .into_iter()
            .enumerate()
            {
                let run = CmaRun {
                    x0: initial_point(seed, 16, 1.0),
                    sigma0: 0.5,
                    lambda: 16,
                    generations: 100,
                    dppmc,
                };
                let rec = run_cmaes(&f, &run, seed, "cmaes").unwrap();
                finals[slot].push(rec.final_objective().unwrap());
            }
        }
        let [base, dpp] = finals.map(median);
        if dpp <= base {
            wins += 1;
        }
        parts.push(format!("{bench} {dpp:.3e} vs {base:.3e}"));
    }
    Outcome {
        passed: wins >= 3,
        detail: format!("DPPMC median <= baseline on {wins}/4 (need 3): {}", parts.join("; ")),
    }
}

fn rho_shape() -> Outcome {
    let params = RhoAblationParams::default();
    let (rows, _) = rho_ablation(&params, &[0, 1, 2], 100).unwrap();
    let monotone = nonincreasing_functions(&rows);
    let mut parts = Vec::new();
    for bench in &params.functions {
        let means: Vec<String> = rows
            .iter()
            .filter(|r| r.function == *bench)
            .map(|r| format!("{:.3e}", r.mean_final_objective))
            .collect();
        parts.push(format!("{bench} {}", means.join("/")));
    }
    Outcome {
        passed: monotone.len() >= 3,
        detail: format!(
            "nonincreasing in rho {:?} on {}/4 (need 3): {}",
            params.rho_list,
            monotone.len(),
            parts.join("; ")
        ),
    }
}

fn trust_region() -> Outcome {
    let d = 5;
    let c = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -0.25]);
    let cc = c.clone();
    let linear = move |x: &[f64]| 4.0 + cc.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let config = TrustRegionConfig {
        delta: 0.2,
        lambda: 1e-12,
        ..TrustRegionConfig::default()
    };
    let mut counts = Vec::new();
    let mut grad_err: f64 = 0.0;
    for dppmc in [false, true] {
        let f = Blackbox::new("linear", d, linear.clone());
        let mut state = TrustRegionState::new(DVector::from_element(d, 0.3), config.clone());
        let mut rng = substream(7, dppmc as u64);
        trust_region_es_step(&mut state, &f, 10, dppmc, &mut rng).unwrap();
        let step = trust_region_es_step(&mut state, &f, 10, dppmc, &mut rng).unwrap();
        grad_err = grad_err.max((&step.gradient - &c).amax());
        counts.push(step);
    }
    let base = &counts[0];
    let dpp = &counts[1];
    let base_ok = base.reused == 2 && base.fresh_sampled == 8 && base.pool_size == 10 && base.selected == 10;
    let dpp_ok = dpp.reused == 2 && dpp.fresh_sampled == 9 && dpp.pool_size == 11 && dpp.selected == 10;

    let dirs = sample_isotropic_gaussian(d, 10, &mut substream(8, 0)).into_vectors();
    let dirs: Vec<DVector<f64>> = dirs.into_iter().map(|g| g * 0.1).collect();
    let diffs: Vec<f64> = dirs.iter().map(|e| c.dot(e)).collect();
    let ridge = ridge_gradient(&dirs, &diffs, 1e-12).unwrap();
    grad_err = grad_err.max((&ridge - &c).amax());
    Outcome {
        passed: base_ok && dpp_ok && grad_err <= 1e-6,
        detail: format!(
            "baseline reuse {} sample {} pool {} select {}; DPPMC reuse {} sample {} pool {} select {}; ridge gradient error {grad_err:.1e} (<= 1e-6)",
            base.reused, base.fresh_sampled, base.pool_size, base.selected, dpp.reused, dpp.fresh_sampled, dpp.pool_size, dpp.selected
        ),
    }
}

fn es_exactness() -> Outcome {
    let d = 6;
    let c = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0, 1.5, -0.75]);
    let cc = c.clone();
    let affine = Blackbox::new("affine", d, move |x: &[f64]| {
        10.0 + cc.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    });
    let theta = initial_point(3, d, 1.0);

    // Random directions: the estimate must equal (1/m) Σ g gᵀ c exactly.
    let pool = sample_isotropic_gaussian(d, 50, &mut substream(9, 0));
    let est = es_gradient(&affine, &theta, 0.3, &pool, true).unwrap().gradient;
    let oracle = pool
        .vectors()
        .iter()
        .fold(DVector::zeros(d), |acc, g| acc + g * g.dot(&c))
        / 50.0;
    let random_err = (&est - &oracle).norm() / oracle.norm();
    // Scaled coordinate directions have (1/m) Σ g gᵀ = I, so the estimate is c.
    let basis: Vec<DVector<f64>> = (0..d)
        .map(|i| DVector::from_fn(d, |j, _| if i == j { (d as f64).sqrt() } else { 0.0 }))
        .collect();
    let basis = SamplePool::uniform(d, basis, Provenance::Fresh).unwrap();
    let est = es_gradient(&affine, &theta, 0.3, &basis, true).unwrap().gradient;
    let basis_err = (&est - &c).norm() / c.norm();

    let quad = Blackbox::new("quadratic", 2, |x: &[f64]| x.iter().map(|v| v * v).sum());
    let theta = DVector::from_vec(vec![1.0, 0.0]);
    let runs = 10_000;
    let estimates: Vec<DVector<f64>> = (0..runs as u64)
        .map(|r| {
            let pool = sample_isotropic_gaussian(2, 10, &mut substream(10, r));
            es_gradient(&quad, &theta, 0.1, &pool, false).unwrap().gradient
        })
        .collect();
    let mean = estimates.iter().fold(DVector::zeros(2), |acc, e| acc + e) / runs as f64;
    let mut quad_ok = true;
    let mut z = Vec::new();
    for i in 0..2 {
        let var = estimates.iter().map(|e| (e[i] - mean[i]).powi(2)).sum::<f64>() / (runs as f64 - 1.0);
        let se = (var / runs as f64).sqrt();
        let score = (mean[i] - 2.0 * theta[i]) / se;
        quad_ok &= score.abs() <= 3.0;
        z.push(format!("{score:.2}"));
    }
    Outcome {
        passed: random_err <= 1e-12 && basis_err <= 1e-12 && quad_ok,
        detail: format!(
            "affine relative error {random_err:.1e} (random) {basis_err:.1e} (basis), both <= 1e-12; quadratic mean ({:.4}, {:.4}) vs 2*theta, z-scores [{}] (|z| <= 3)",
            mean[0],
            mean[1],
            z.join(", ")
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("DPP law", dpp_law),
        ("strict variance reduction", variance_reduction),
        ("orthogonality argmax", orthogonality),
        ("kernel MSE ordering", kernel_mse),
        ("CMA-ES with DPPMC", cmaes),
        ("rho ablation shape", rho_shape),
        ("trust-region accounting", trust_region),
        ("ES gradient exactness", es_exactness),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {}: {name} [{:.1}s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
