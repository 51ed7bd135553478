//! Experiment configuration files.
//!
//! A config is a TOML document with a few top-level keys and one optional
//! table for the chosen experiment kind:
//!
//! ```toml
//! kind = "cmaes"
//! seeds = [0, 1, 2, 3, 4]
//! budget = 100
//! output = "out/cmaes"
//!
//! [cmaes]
//! function = "rastrigin"
//! dim = 16
//! ```
//!
//! Unknown keys anywhere are errors, as are tables for a different kind.

use std::path::{Path, PathBuf};

use dppmc::es::{Benchmark, GradientMode, GuidedEsConfig, TrustRegionConfig};
use dppmc::kernels::{EstimatorSettings, Method};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KernelMse,
    GuidedEs,
    TrustRegionEs,
    Cmaes,
    TheoryCheck,
    DppSample,
    RhoAblation,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::KernelMse => "kernel-mse",
            ExperimentKind::GuidedEs => "guided-es",
            ExperimentKind::TrustRegionEs => "trust-region-es",
            ExperimentKind::Cmaes => "cmaes",
            ExperimentKind::TheoryCheck => "theory-check",
            ExperimentKind::DppSample => "dpp-sample",
            ExperimentKind::RhoAblation => "rho-ablation",
        }
    }

    pub fn table(&self) -> &'static str {
        match self {
            ExperimentKind::KernelMse => "kernel_mse",
            ExperimentKind::GuidedEs => "guided_es",
            ExperimentKind::TrustRegionEs => "trust_region_es",
            ExperimentKind::Cmaes => "cmaes",
            ExperimentKind::TheoryCheck => "theory_check",
            ExperimentKind::DppSample => "dpp_sample",
            ExperimentKind::RhoAblation => "rho_ablation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    /// Iterations, generations, repetitions or draws, depending on the kind.
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_mse: Option<KernelMseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guided_es: Option<GuidedEsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_region_es: Option<TrustRegionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmaes: Option<CmaesParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_check: Option<TheoryCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpp_sample: Option<DppSampleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_ablation: Option<RhoAblationParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelMseParams {
    pub dim: usize,
    /// Synthetic data size; ignored when `data` is set.
    pub points: usize,
    pub blobs: usize,
    /// Optional CSV of points; pairs are drawn from its rows.
    pub data: Option<PathBuf>,
    pub components: Vec<usize>,
    /// m / d values.
    pub ratios: Vec<usize>,
    pub mean_scale: f64,
    pub std_scale: f64,
    pub methods: Vec<Method>,
    pub estimator: EstimatorSettings,
}

impl Default for KernelMseParams {
    fn default() -> Self {
        Self {
            dim: 8,
            points: 400,
            blobs: 4,
            data: None,
            components: vec![2, 3, 4, 5],
            ratios: vec![1, 2, 3],
            mean_scale: 0.1,
            std_scale: 0.05,
            methods: vec![Method::Iid, Method::Qmc, Method::Dppmc],
            estimator: EstimatorSettings {
                renormalize: true,
                ..EstimatorSettings::default()
            },
        }
    }
}

/// Settings of the DPPMC variant of an optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DppmcParams {
    pub rho: f64,
    pub sigma: f64,
    pub renormalize: bool,
}

impl Default for DppmcParams {
    fn default() -> Self {
        Self {
            rho: dppmc::dppmc::DEFAULT_RHO,
            sigma: dppmc::dppmc::DEFAULT_RBF_SIGMA,
            renormalize: true,
        }
    }
}

impl DppmcParams {
    pub fn config(&self, m: usize) -> dppmc::DppmcConfig {
        dppmc::DppmcConfig {
            m,
            rho: self.rho,
            renormalize: self.renormalize,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Baseline,
    Dppmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidedEsParams {
    pub function: Benchmark,
    pub dim: usize,
    /// Perturbations per iteration; defaults to `dim`.
    pub m: Option<usize>,
    /// Scale of the Gaussian starting point.
    pub x0_scale: f64,
    /// Relative observation noise std.
    pub noise: f64,
    pub variants: Vec<Variant>,
    pub optimizer: GuidedEsConfig,
    pub dppmc: DppmcParams,
}

impl Default for GuidedEsParams {
    fn default() -> Self {
        Self {
            function: Benchmark::Sphere,
            dim: 16,
            m: None,
            x0_scale: 1.0,
            noise: 0.0,
            variants: vec![Variant::Baseline, Variant::Dppmc],
            optimizer: GuidedEsConfig::default(),
            dppmc: DppmcParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustRegionParams {
    pub function: Benchmark,
    pub dim: usize,
    pub m: Option<usize>,
    pub x0_scale: f64,
    pub noise: f64,
    pub variants: Vec<Variant>,
    pub optimizer: TrustRegionConfig,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            function: Benchmark::Sphere,
            dim: 16,
            m: None,
            x0_scale: 1.0,
            noise: 0.0,
            variants: vec![Variant::Baseline, Variant::Dppmc],
            optimizer: TrustRegionConfig {
                mode: GradientMode::Ridge,
                ..TrustRegionConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmaesParams {
    pub function: Benchmark,
    pub dim: usize,
    pub lambda: usize,
    pub sigma0: f64,
    pub x0_scale: f64,
    pub variants: Vec<Variant>,
    pub dppmc: DppmcParams,
}

impl Default for CmaesParams {
    fn default() -> Self {
        Self {
            function: Benchmark::Sphere,
            dim: 16,
            lambda: 16,
            sigma0: 0.5,
            x0_scale: 1.0,
            variants: vec![Variant::Baseline, Variant::Dppmc],
            dppmc: DppmcParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryCheckParams {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Default for TheoryCheckParams {
    fn default() -> Self {
        Self {
            values: vec![1.0; 4],
            probabilities: vec![0.5; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DppSampleParams {
    /// Explicit L-ensemble; a random one of size `n_items` otherwise.
    pub l_matrix: Option<Vec<Vec<f64>>>,
    pub n_items: usize,
    /// Sample a k-DPP instead of the full DPP.
    pub k: Option<usize>,
}

impl Default for DppSampleParams {
    fn default() -> Self {
        Self {
            l_matrix: None,
            n_items: 5,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RhoAblationParams {
    pub functions: Vec<Benchmark>,
    pub rho_list: Vec<f64>,
    pub dim: usize,
    pub lambda: usize,
    pub sigma0: f64,
    pub x0_scale: f64,
    pub dpp_sigma: f64,
    pub renormalize: bool,
}

impl Default for RhoAblationParams {
    fn default() -> Self {
        Self {
            functions: Benchmark::ALL.to_vec(),
            rho_list: vec![2.0, 5.0, 10.0, 20.0],
            dim: 16,
            lambda: 16,
            sigma0: 0.5,
            x0_scale: 1.0,
            dpp_sigma: dppmc::dppmc::DEFAULT_RBF_SIGMA,
            renormalize: true,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks seeds, budget and that only the table for `kind` is present.
    ///
    /// A zero budget is accepted for `cmaes` only, which then produces empty
    /// records.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(invalid("key `seeds`: at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("key `seeds`: duplicate seed {}", w[0])));
        }
        if self.budget == 0 && self.kind != ExperimentKind::Cmaes {
            return Err(invalid("key `budget`: must be positive"));
        }
        let present = [
            ("kernel_mse", self.kernel_mse.is_some()),
            ("guided_es", self.guided_es.is_some()),
            ("trust_region_es", self.trust_region_es.is_some()),
            ("cmaes", self.cmaes.is_some()),
            ("theory_check", self.theory_check.is_some()),
            ("dpp_sample", self.dpp_sample.is_some()),
            ("rho_ablation", self.rho_ablation.is_some()),
        ];
        for (table, is_present) in present {
            if is_present && table != self.kind.table() {
                return Err(invalid(format!(
                    "table `[{table}]` does not apply to kind `{}`",
                    self.kind.name()
                )));
            }
        }
        match self.kind {
            ExperimentKind::KernelMse => {
                let p = self.kernel_mse.clone().unwrap_or_default();
                if p.data.is_none() && p.points < 2 {
                    return Err(invalid("key `kernel_mse.points`: need at least 2 points"));
                }
                if p.components.is_empty() || p.components.contains(&0) {
                    return Err(invalid("key `kernel_mse.components`: need positive component counts"));
                }
                if p.ratios.is_empty() || p.ratios.contains(&0) {
                    return Err(invalid("key `kernel_mse.ratios`: need positive ratios"));
                }
                if p.methods.is_empty() {
                    return Err(invalid("key `kernel_mse.methods`: need at least one method"));
                }
                if self.budget < 2 {
                    return Err(invalid("key `budget`: kernel-mse needs at least 2 repetitions"));
                }
            }
            ExperimentKind::GuidedEs => {
                let p = self.guided_es.clone().unwrap_or_default();
                if p.variants.is_empty() {
                    return Err(invalid("key `guided_es.variants`: need at least one variant"));
                }
            }
            ExperimentKind::TrustRegionEs => {
                let p = self.trust_region_es.clone().unwrap_or_default();
                if p.variants.is_empty() {
                    return Err(invalid("key `trust_region_es.variants`: need at least one variant"));
                }
                p.optimizer
                    .validate(p.m.unwrap_or(p.dim))
                    .map_err(|e| invalid(format!("table `[trust_region_es.optimizer]`: {e}")))?;
            }
            ExperimentKind::Cmaes => {
                let p = self.cmaes.clone().unwrap_or_default();
                if p.variants.is_empty() {
                    return Err(invalid("key `cmaes.variants`: need at least one variant"));
                }
            }
            ExperimentKind::TheoryCheck => {
                let p = self.theory_check.clone().unwrap_or_default();
                if p.values.len() != p.probabilities.len() {
                    return Err(invalid(
                        "keys `theory_check.values` and `theory_check.probabilities` differ in length",
                    ));
                }
                if self.budget < 2 {
                    return Err(invalid("key `budget`: theory-check needs at least 2 draws"));
                }
            }
            ExperimentKind::DppSample => {
                let p = self.dpp_sample.clone().unwrap_or_default();
                let n = p.l_matrix.as_ref().map_or(p.n_items, |m| m.len());
                if n == 0 {
                    return Err(invalid("key `dpp_sample.n_items`: need at least one item"));
                }
                if let Some(rows) = &p.l_matrix {
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(invalid("key `dpp_sample.l_matrix`: matrix must be square"));
                    }
                }
                if p.k.is_some_and(|k| k > n) {
                    return Err(invalid("key `dpp_sample.k`: larger than the ground set"));
                }
            }
            ExperimentKind::RhoAblation => {
                let p = self.rho_ablation.clone().unwrap_or_default();
                validate_rho_list(&p.rho_list)?;
                if p.functions.is_empty() {
                    return Err(invalid("key `rho_ablation.functions`: need at least one function"));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form (keys sorted, defaults omitted
    /// only where the file omitted them). The output directory is left out,
    /// so the same experiment written elsewhere keeps its digest.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let canonical = serde_json::to_string(&value).expect("json serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn validate_rho_list(rho_list: &[f64]) -> Result<(), CliError> {
    if rho_list.is_empty() {
        return Err(invalid("key `rho_ablation.rho_list`: must not be empty"));
    }
    if let Some(r) = rho_list.iter().find(|r| r.is_nan() || **r <= 1.0 || !r.is_finite()) {
        return Err(invalid(format!(
            "key `rho_ablation.rho_list`: rho must exceed 1, got {r}"
        )));
    }
    for (i, a) in rho_list.iter().enumerate() {
        if rho_list[..i].contains(a) {
            return Err(invalid(format!("key `rho_ablation.rho_list`: duplicate rho {a}")));
        }
    }
    Ok(())
}

/// Parses `1,2,3` into distinct seeds.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, CliError> {
    let seeds = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|_| invalid(format!("invalid seed `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(invalid("empty seed list"));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1, 2]\nbudget = 10\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Cmaes);
        assert!(cfg.cmaes.is_none());
        assert_eq!(cfg.output_dir(), PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let top = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 1\nbudgte = 2\n");
        assert!(top.is_err());
        let nested = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 1\n[cmaes]\nlamda = 3\n");
        let msg = nested.unwrap_err().to_string();
        assert!(msg.contains("lamda"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn seed_and_budget_rules() {
        assert!(ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = []\nbudget = 1\n").is_err());
        let dup = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [3, 1, 3]\nbudget = 1\n");
        assert!(dup.unwrap_err().to_string().contains("duplicate seed 3"));
        assert!(ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 0\n").is_ok());
        assert!(ExperimentConfig::from_toml("kind = \"guided-es\"\nseeds = [1]\nbudget = 0\n").is_err());
    }

    #[test]
    fn foreign_tables_are_rejected() {
        let err = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 1\n[guided_es]\ndim = 4\n")
            .unwrap_err();
        assert!(err.to_string().contains("guided_es"));
    }

    #[test]
    fn rho_list_rules() {
        assert!(validate_rho_list(&[2.0, 5.0]).is_ok());
        assert!(validate_rho_list(&[]).is_err());
        assert!(validate_rho_list(&[2.0, 2.0]).is_err());
        assert!(validate_rho_list(&[1.0]).is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 5\n").unwrap();
        let b = ExperimentConfig::from_toml("budget = 5\nseeds = [1]\nkind = \"cmaes\"\n").unwrap();
        let c = ExperimentConfig::from_toml("kind = \"cmaes\"\nseeds = [1]\nbudget = 6\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seed_list("").is_err());
        assert!(parse_seed_list("x").is_err());
    }
}
