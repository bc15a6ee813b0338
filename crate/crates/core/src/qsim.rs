//! Discrete-event simulation of the single mobile server on a fixed path.
//!
//! Demands arrive as a Poisson process, wait in one FCFS queue at the path and
//! are served one at a time. The wait of each demand follows from the FCFS
//! recursion `start = max(arrival, previous departure)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, SqcError};
use crate::fmt_num;
use crate::instance::TreeInstance;
use crate::metrics::decompose;
use crate::path::PathLocus;

pub const RNG_NAME: &str = "ChaCha8 (seed_from_u64, stream = replication)";

/// How a service time is drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum ServiceModel {
    /// Service of a demand from `i` is d̄(gate(i))/vt + G_i: the travel leg
    /// is the mean over server positions. Its moments are exactly S̄ and S̄²
    /// of the analytic model.
    #[default]
    MeanTravel,
    /// The server position is drawn afresh from Prob_P for every service and
    /// the travel leg is d(û, gate(i))/vt. Same mean, larger second moment.
    SampledPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub arrivals: u64,
    pub warmup: u64,
    pub seed: u64,
    pub replications: u32,
    pub model: ServiceModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            arrivals: 1_000_000,
            warmup: 10_000,
            seed: 1,
            replications: 5,
            model: ServiceModel::MeanTravel,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arrivals <= self.warmup {
            return Err(SqcError::InvalidSimConfig(format!(
                "arrivals ({}) must exceed warmup ({})",
                self.arrivals, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(SqcError::InvalidSimConfig(
                "at least one replication is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub mean_wait: f64,
    pub utilization: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean_wait: f64,
    pub ci_half_width: f64,
    pub std_error: f64,
    pub utilization: f64,
    pub samples: u64,
    /// Mean and second moment of the simulated service-time distribution.
    pub service_mean: f64,
    pub service_second_moment: f64,
    pub lambda: f64,
    pub model: ServiceModel,
    pub rng: &'static str,
    pub replications: Vec<ReplicationStats>,
}

impl SimResult {
    /// Pollaczek–Khinchine delay of the simulated service distribution.
    pub fn model_delay(&self) -> f64 {
        crate::metrics::queue_delay(self.lambda, self.service_mean, self.service_second_moment)
            .unwrap()
    }

    pub const CSV_HEADER: &'static str = "replication,mean_wait,utilization,samples";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, r) in self.replications.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i,
                fmt_num(r.mean_wait),
                fmt_num(r.utilization),
                r.samples
            ));
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "mean_wait={} ci95=±{} utilization={} samples={} rng={}",
            fmt_num(self.mean_wait),
            fmt_num(self.ci_half_width),
            fmt_num(self.utilization),
            self.samples,
            self.rng
        )
    }
}

/// Discrete sampler of (service time) per demand.
struct ServiceSampler {
    origin: WeightedIndex<f64>,
    server: WeightedIndex<f64>,
    // Per origin vertex: gate point and fixed service under the mean model.
    gate: Vec<usize>,
    g: Vec<f64>,
    mean_service: Vec<f64>,
    // Travel time between anchor points.
    travel: Vec<Vec<f64>>,
    model: ServiceModel,
}

impl ServiceSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let i = self.origin.sample(rng);
        match self.model {
            ServiceModel::MeanTravel => self.mean_service[i],
            ServiceModel::SampledPosition => {
                let p = self.server.sample(rng);
                self.travel[p][self.gate[i]] + self.g[i]
            }
        }
    }
}

fn t_quantile(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975)
}

/// Mean, 95% half-width and standard error of `xs` treated as iid.
fn interval(xs: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, f64::INFINITY, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    (mean, t_quantile(k - 1.0) * se, se)
}

const BATCHES: usize = 10;

struct RunOutput {
    stats: ReplicationStats,
    batch_means: Vec<f64>,
}

fn run_replication(
    sampler: &ServiceSampler,
    lambda: f64,
    config: &SimConfig,
    rep: u32,
) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep as u64);
    let gaps = Exp::new(lambda).unwrap();
    let measured = config.arrivals - config.warmup;
    let batch_len = (measured / BATCHES as u64).max(1);
    let mut batch_sums = vec![0.0; BATCHES];
    let mut batch_counts = vec![0u64; BATCHES];

    let (mut t, mut free) = (0.0f64, 0.0f64);
    let (mut wait_sum, mut busy, mut t0) = (0.0, 0.0, 0.0);
    for k in 0..config.arrivals {
        t += gaps.sample(&mut rng);
        let start = t.max(free);
        let s = sampler.sample(&mut rng);
        free = start + s;
        if k == config.warmup {
            t0 = t;
        }
        if k >= config.warmup {
            let wait = start - t;
            wait_sum += wait;
            busy += s;
            let b = (((k - config.warmup) / batch_len) as usize).min(BATCHES - 1);
            batch_sums[b] += wait;
            batch_counts[b] += 1;
        }
    }
    let span = free.max(t) - t0;
    RunOutput {
        stats: ReplicationStats {
            mean_wait: wait_sum / measured as f64,
            utilization: if span > 0.0 { (busy / span).min(1.0) } else { 0.0 },
            samples: measured,
        },
        batch_means: batch_sums
            .iter()
            .zip(&batch_counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect(),
    }
}

/// Simulates the queue of `path`. The confidence interval is taken across
/// replication means, or across ten batch means for a single replication.
pub fn simulate_path(inst: &TreeInstance, path: &PathLocus, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let lambda = inst.lambda_total();
    if lambda <= 0.0 {
        return Err(SqcError::ZeroDemand);
    }
    let decomp = decompose(inst, path)?;
    let vt = inst.vt();
    let k = decomp.points().len();
    let travel: Vec<Vec<f64>> = (0..k)
        .map(|p| (0..k).map(|q| decomp.anchor_distance(p, q) / vt).collect())
        .collect();
    let pi = decomp.server_distribution();
    let gate: Vec<usize> = (0..inst.len()).map(|v| decomp.gate(v)).collect();
    let g: Vec<f64> = (0..inst.len()).map(|v| inst.handling_time(v)).collect();
    let dbar: Vec<f64> = (0..k)
        .map(|p| (0..k).map(|q| pi[q] * travel[q][p]).sum())
        .collect();
    let mean_service: Vec<f64> = (0..inst.len()).map(|v| dbar[gate[v]] + g[v]).collect();

    let w = inst.weights();
    let (mut es, mut es2) = (0.0, 0.0);
    for v in 0..inst.len() {
        match config.model {
            ServiceModel::MeanTravel => {
                es += w[v] * mean_service[v];
                es2 += w[v] * mean_service[v].powi(2);
            }
            ServiceModel::SampledPosition => {
                for (q, &pq) in pi.iter().enumerate() {
                    let s = travel[q][gate[v]] + g[v];
                    es += w[v] * pq * s;
                    es2 += w[v] * pq * s * s;
                }
            }
        }
    }

    let origin = WeightedIndex::new(w)
        .map_err(|e| SqcError::InvalidSimConfig(format!("origin weights: {e}")))?;
    let server = WeightedIndex::new(pi)
        .map_err(|e| SqcError::InvalidSimConfig(format!("server distribution: {e}")))?;
    let sampler = ServiceSampler {
        origin,
        server,
        gate,
        g,
        mean_service,
        travel,
        model: config.model,
    };

    let runs: Vec<RunOutput> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(&sampler, lambda, config, rep))
        .collect();

    let means: Vec<f64> = runs.iter().map(|r| r.stats.mean_wait).collect();
    let (mean_wait, ci_half_width, std_error) = if runs.len() >= 2 {
        interval(&means)
    } else {
        let (_, ci, se) = interval(&runs[0].batch_means);
        (means[0], ci, se)
    };
    let samples = runs.iter().map(|r| r.stats.samples).sum();
    let utilization =
        runs.iter().map(|r| r.stats.utilization).sum::<f64>() / runs.len() as f64;
    Ok(SimResult {
        mean_wait,
        ci_half_width,
        std_error,
        utilization,
        samples,
        service_mean: es,
        service_second_moment: es2,
        lambda,
        model: config.model,
        rng: RNG_NAME,
        replications: runs.into_iter().map(|r| r.stats).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    Pass { z: f64 },
    Fail { z: f64 },
    Unstable,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass { .. } => "pass",
            Verdict::Fail { .. } => "fail",
            Verdict::Unstable => "unstable",
        }
    }
}

/// Pass iff the simulated mean lies within three CI half-widths of `qbar`.
pub fn compare_analytic(sim: &SimResult, qbar: f64) -> Verdict {
    if !qbar.is_finite() {
        return Verdict::Unstable;
    }
    let diff = sim.mean_wait - qbar;
    let z = if diff == 0.0 {
        0.0
    } else if sim.std_error > 0.0 {
        diff / sim.std_error
    } else {
        diff.signum() * f64::INFINITY
    };
    if diff.abs() <= 3.0 * sim.ci_half_width {
        Verdict::Pass { z }
    } else {
        Verdict::Fail { z }
    }
}
