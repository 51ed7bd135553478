//! The fixed battery behind `dppmc theory-check`.

use dppmc::es::Benchmark;
use dppmc::rng::substream;
use dppmc::theory::{
    planted_orthogonal_features, verify_biased_estimator, verify_es_variance_reduction,
    verify_negative_correlation_bound, verify_orthogonality_argmax, verify_variance_reduction,
    DownsampledEstimatorSpec,
};
use nalgebra::DVector;
use serde::Serialize;

use crate::runner::initial_point;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub report: serde_json::Value,
}

fn check<T: Serialize>(name: &str, passed: bool, detail: String, report: &T) -> Result<CheckResult, CliError> {
    Ok(CheckResult {
        name: name.into(),
        passed,
        detail,
        report: serde_json::to_value(report).map_err(|e| CliError::Runtime(e.to_string()))?,
    })
}

fn unit(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v).normalize()
}

/// Runs every check with `trials` sampled draws where sampling is involved.
pub fn run_suite(seed: u64, trials: usize) -> Result<Vec<CheckResult>, CliError> {
    let mut out = Vec::new();

    let ones = DownsampledEstimatorSpec::scalar(&[1.0; 4], vec![0.5; 4])?;
    let r = verify_variance_reduction(&ones, trials, seed)?;
    out.push(check(
        "variance reduction, scalar a=(1,1,1,1), p=0.5",
        r.passed,
        format!(
            "var_iid={:.6} var_dpp={:.6} eps={:.6}",
            r.var_iid, r.var_dpp_closed_form, r.epsilon
        ),
        &r,
    )?);

    for (i, f) in [Benchmark::Sphere, Benchmark::Rosenbrock].into_iter().enumerate() {
        let case_seed = seed.wrapping_add(i as u64);
        let theta = initial_point(case_seed, 2, 1.0);
        let r = verify_es_variance_reduction(2, 5, f, &theta, 0.5, 0.5, trials, case_seed)?;
        out.push(check(
            &format!("variance reduction, ES gradient terms on {f}"),
            r.passed,
            format!(
                "var_iid={:.4e} var_dpp={:.4e}",
                r.reduction.var_iid, r.reduction.var_dpp_closed_form
            ),
            &r,
        )?);
    }

    let values = [1.0, 2.0, 0.5, 3.0];
    let biased = DownsampledEstimatorSpec::biased(
        values.iter().map(|&a| DVector::from_element(1, a)).collect(),
        vec![0.5; 4],
        vec![1.0; 4],
    )?;
    let r = verify_biased_estimator(&biased)?;
    out.push(check(
        "biased estimator, equal bias and lower MSE",
        r.passed,
        format!("mse_iid={:.6} mse_dpp={:.6}", r.mse_iid, r.mse_dpp),
        &r,
    )?);

    for d in 1..=4 {
        let r = verify_negative_correlation_bound(d, 10_000, seed.wrapping_add(d as u64))?;
        out.push(check(
            &format!("at most d+1 pairwise-negative vectors, d={d}"),
            r.passed,
            format!("simplex max dot={:.4} violations={}", r.simplex_max_dot, r.violations),
            &r,
        )?);
    }

    let features = vec![
        unit(&[1.0, 0.0, 0.0]),
        unit(&[0.0, 1.0, 0.0]),
        unit(&[0.0, 0.0, 1.0]),
        unit(&[1.0, 1.0, 0.0]),
    ];
    let r = verify_orthogonality_argmax(&features, 2)?;
    out.push(check(
        "orthogonal subsets maximize det, e1/e2/e3/(e1+e2)",
        r.passed,
        format!("max det={:.6} maximizers={:?}", r.max_det, r.maximizers),
        &r,
    )?);
    let mut rng = substream(seed, 31);
    let mut planted_ok = 0;
    let planted_total = 5;
    for i in 0..planted_total {
        let k = 2 + i % 3;
        let features = planted_orthogonal_features(8 + i, 6, k, &mut rng);
        if verify_orthogonality_argmax(&features, k)?.passed {
            planted_ok += 1;
        }
    }
    out.push(check(
        "orthogonal subsets maximize det, planted instances",
        planted_ok == planted_total,
        format!("{planted_ok}/{planted_total} instances"),
        &planted_ok,
    )?);
    Ok(out)
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{status}  {:width$}  {}\n", r.name, r.detail));
    }
    s
}
