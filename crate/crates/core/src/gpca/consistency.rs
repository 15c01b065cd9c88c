//! Monte Carlo check that empirical barycenters and geodesic costs settle
//! as the sample size grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gpca_fit, GpcaOptions};
use crate::cpca::SolverOptions;
use crate::exec::Execution;
use crate::geometry::frechet_mean;
use crate::measures::{
    quantile_from_location_scale, wasserstein_distance, GridConfig, QuantileGrid,
};
use crate::{Error, Result};

/// Source of random measures.
pub trait MeasureSampler: Sync {
    fn grid(&self) -> &GridConfig;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<QuantileGrid>;
    fn population_barycenter(&self) -> Result<QuantileGrid>;
}

/// Always returns the same measure.
pub struct FixedSampler(pub QuantileGrid);

impl MeasureSampler for FixedSampler {
    fn grid(&self) -> &GridConfig {
        self.0.grid()
    }

    fn sample(&self, _rng: &mut ChaCha8Rng) -> Result<QuantileGrid> {
        Ok(self.0.clone())
    }

    fn population_barycenter(&self) -> Result<QuantileGrid> {
        Ok(self.0.clone())
    }
}

/// `x -> a x + b` images of a base measure with `a ~ U[a_lo, a_hi]`,
/// `b ~ U[b_lo, b_hi]`.
pub struct LocationScaleSampler {
    pub base: QuantileGrid,
    pub scale: (f64, f64),
    pub shift: (f64, f64),
}

impl MeasureSampler for LocationScaleSampler {
    fn grid(&self) -> &GridConfig {
        self.base.grid()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<QuantileGrid> {
        let a = rng.random_range(self.scale.0..=self.scale.1);
        let b = rng.random_range(self.shift.0..=self.shift.1);
        quantile_from_location_scale(&self.base, a, b)
    }

    fn population_barycenter(&self) -> Result<QuantileGrid> {
        // quantiles are affine in (a, b), so the mean law is the base at (E a, E b)
        let a = 0.5 * (self.scale.0 + self.scale.1);
        let b = 0.5 * (self.shift.0 + self.shift.1);
        quantile_from_location_scale(&self.base, a, b)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsistencyConfig {
    pub schedule: Vec<usize>,
    pub trials: usize,
    pub k: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Parallelism across trials.
    pub execution: Execution,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            schedule: vec![25, 100, 400],
            trials: 50,
            k: 1,
            seed: 0,
            solver: SolverOptions {
                execution: Execution::Serial,
                ..SolverOptions::default()
            },
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub median_barycenter_error: f64,
    pub median_cost: f64,
    pub barycenter_errors: Vec<f64>,
    pub costs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
}

fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    // splitmix64 over the triple
    let mut z = seed
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// For each `n` in the schedule, fits `trials` independent samples of `n`
/// measures and records the barycenter error and the empirical cost.
pub fn consistency_experiment(
    sampler: &dyn MeasureSampler,
    cfg: &ConsistencyConfig,
) -> Result<ConsistencyReport> {
    if cfg.trials == 0 || cfg.schedule.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one trial and one sample size".into(),
        ));
    }
    let population = sampler.population_barycenter()?;
    let opts = GpcaOptions {
        solver: cfg.solver.clone(),
        ..GpcaOptions::default()
    };
    let mut rows = Vec::with_capacity(cfg.schedule.len());
    for &n in &cfg.schedule {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sample size {n} < 2")));
        }
        let results = cfg
            .execution
            .map_range(cfg.trials, |trial| -> Result<(f64, f64)> {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, n, trial));
                let data = (0..n)
                    .map(|_| sampler.sample(&mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let bary = frechet_mean(&data)?;
                let err = wasserstein_distance(&bary, &population)?;
                let cost = match gpca_fit(&data, cfg.k, &opts) {
                    Ok(gc) => gc.pcs.residual_cost,
                    // identical draws: the barycenter alone has zero cost
                    Err(Error::Degenerate(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                Ok((err, cost))
            });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let (barycenter_errors, costs): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
        rows.push(ConsistencyRow {
            n,
            median_barycenter_error: median(&barycenter_errors),
            median_cost: median(&costs),
            barycenter_errors,
            costs,
        });
    }
    Ok(ConsistencyReport { rows })
}
