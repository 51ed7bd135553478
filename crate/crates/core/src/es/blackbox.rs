use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{seeded, Stream};
use crate::{Error, Result};

/// Additive Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "std")]
pub enum Noise {
    #[default]
    None,
    /// Fixed standard deviation.
    Absolute(f64),
    /// Standard deviation proportional to |f(x)|.
    Relative(f64),
}

type Objective = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A counted objective R^d → R.
pub struct Blackbox {
    name: String,
    dim: usize,
    func: Arc<Objective>,
    evaluations: AtomicU64,
    noise: Noise,
    noise_rng: Mutex<Stream>,
}

impl fmt::Debug for Blackbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Blackbox")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("evaluations", &self.evaluations())
            .field("noise", &self.noise)
            .finish()
    }
}

impl Blackbox {
    pub fn new<F>(name: impl Into<String>, dim: usize, func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            func: Arc::new(func),
            evaluations: AtomicU64::new(0),
            noise: Noise::None,
            noise_rng: Mutex::new(seeded(0)),
        }
    }

    pub fn with_noise(mut self, noise: Noise, seed: u64) -> Result<Self> {
        let std = match noise {
            Noise::None => 0.0,
            Noise::Absolute(s) | Noise::Relative(s) => s,
        };
        if !(std >= 0.0) || !std.is_finite() {
            return Err(Error::InvalidConfig(format!("noise std must be >= 0, got {std}")));
        }
        self.noise = noise;
        self.noise_rng = Mutex::new(seeded(seed));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    /// One counted, possibly noisy, query.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        let value = (self.func)(x.as_slice());
        let std = match self.noise {
            Noise::None => return value,
            Noise::Absolute(s) => s,
            Noise::Relative(s) => s * value.abs(),
        };
        let z: f64 = StandardNormal.sample(&mut *self.noise_rng.lock().expect("noise stream"));
        value + std * z
    }

    /// Noise-free objective, not counted as a query. Used to measure progress,
    /// never by the optimizers themselves.
    pub fn true_value(&self, x: &DVector<f64>) -> f64 {
        (self.func)(x.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Cigar,
    Sphere,
    Rosenbrock,
    Rastrigin,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Cigar,
        Benchmark::Sphere,
        Benchmark::Rosenbrock,
        Benchmark::Rastrigin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Cigar => "cigar",
            Benchmark::Sphere => "sphere",
            Benchmark::Rosenbrock => "rosenbrock",
            Benchmark::Rastrigin => "rastrigin",
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Sphere => x.iter().map(|v| v * v).sum(),
            Benchmark::Cigar => x[0] * x[0] + 1e6 * x[1..].iter().map(|v| v * v).sum::<f64>(),
            Benchmark::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            Benchmark::Rastrigin => {
                10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cigar" => Ok(Benchmark::Cigar),
            "sphere" => Ok(Benchmark::Sphere),
            "rosenbrock" => Ok(Benchmark::Rosenbrock),
            "rastrigin" => Ok(Benchmark::Rastrigin),
            other => Err(Error::InvalidConfig(format!("unknown benchmark {other:?}"))),
        }
    }
}

pub fn benchmark_function(bench: Benchmark, dim: usize) -> Result<Blackbox> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!("benchmarks need d >= 2, got {dim}")));
    }
    Ok(Blackbox::new(bench.name(), dim, move |x| bench.value(x)))
}
