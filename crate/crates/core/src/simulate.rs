//! Seeded Monte Carlo simulation of the same designs.
//!
//! Outcomes are drawn at random, but every interim and final decision goes
//! through the exact engine's decision code. Replicate `i` draws from its
//! own ChaCha stream `(seed, i)`, and replicates are reduced in fixed-size
//! blocks in index order, so results are bitwise reproducible for any
//! number of worker threads.

use arrayvec::ArrayVec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::design::{BasketStatus, DesignSpec, Obs, WeightConfig, MAX_BASKETS};
use crate::engine::{Estimate, ExactEngine, InterimAction, InterimConfig, OCResult, StageLayout, TrueScenario};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub replicates: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(replicates: u64, seed: u64) -> Result<Self> {
        if replicates == 0 {
            return invalid("simulation config", "needs at least one replicate");
        }
        Ok(Self { replicates, seed })
    }
}

/// Empirical operating characteristics and the standard error of every field.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub estimate: OCResult,
    pub se: OCResult,
    pub replicates: u64,
}

// Metric layout of one replicate.
const FWER: usize = 0;
const FAMILY_POWER: usize = 1;
const ECD: usize = 2;
const ESS_TOTAL: usize = 3;
const REJECT: usize = 4;
const ESS: usize = REJECT + MAX_BASKETS;
const MEAN: usize = ESS + MAX_BASKETS;
const SQ_ERR: usize = MEAN + MAX_BASKETS;
const METRICS: usize = SQ_ERR + MAX_BASKETS;

const BLOCK: u64 = 4096;

#[derive(Clone, Copy)]
struct Moments {
    sum: [f64; METRICS],
    sum_sq: [f64; METRICS],
}

impl Moments {
    fn zero() -> Self {
        Self {
            sum: [0.0; METRICS],
            sum_sq: [0.0; METRICS],
        }
    }

    fn push(&mut self, x: &[f64; METRICS]) {
        for i in 0..METRICS {
            self.sum[i] += x[i];
            self.sum_sq[i] += x[i] * x[i];
        }
    }

    fn merge(&mut self, other: &Moments) {
        for i in 0..METRICS {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }
}

/// Simulates `sim.replicates` trials and summarizes them like [`OCResult`].
pub fn simulate_oc(
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
    interim: Option<&InterimConfig>,
    scenario: &TrueScenario,
    sim: &SimConfig,
) -> Result<SimResult> {
    if scenario.p().len() != design.k() {
        return invalid("scenario", "length does not match the number of baskets");
    }
    let engine = ExactEngine::new(*design, *layout, *config, interim.copied(), lambda)?;
    let k = design.k();
    let p = scenario.p();
    let n = layout.n();
    let stages: Vec<(u32, Vec<Binomial>)> = match layout.n1() {
        None => vec![(n, binomials(n, p))],
        Some(n1) => vec![(n1, binomials(n1, p)), (n - n1, binomials(n - n1, p))],
    };

    let one = |index: u64| -> [f64; METRICS] {
        let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
        rng.set_stream(index);
        let (first_n, first) = &stages[0];
        let mut obs: ArrayVec<Obs, MAX_BASKETS> =
            first.iter().map(|d| Obs::new(*first_n, d.sample(&mut rng) as u32)).collect();
        let mut status = [BasketStatus::Active; MAX_BASKETS];
        let mut enrolled = [*first_n as f64; MAX_BASKETS];
        if let Some((m, second)) = stages.get(1) {
            let actions = engine.interim_actions(&obs);
            for i in 0..k {
                match actions[i] {
                    InterimAction::Continue => {
                        obs[i] = Obs::new(n, obs[i].r + second[i].sample(&mut rng) as u32);
                        enrolled[i] += *m as f64;
                    }
                    InterimAction::StopFutility => status[i] = BasketStatus::StoppedFutility,
                    InterimAction::StopEfficacy => status[i] = BasketStatus::StoppedEfficacy,
                }
            }
        }
        let fin = engine.final_analysis(&obs, &status[..k], scenario);
        let mut x = [0.0; METRICS];
        x[FWER] = fin.fwer;
        x[FAMILY_POWER] = fin.any_alt;
        for i in 0..k {
            let correct = if scenario.is_null(i, design.p0()) {
                1.0 - fin.reject[i]
            } else {
                fin.reject[i]
            };
            x[ECD] += correct;
            x[ESS_TOTAL] += enrolled[i];
            x[REJECT + i] = fin.reject[i];
            x[ESS + i] = enrolled[i];
            x[MEAN + i] = fin.mean[i];
            x[SQ_ERR + i] = fin.sq_err[i];
        }
        x
    };

    let blocks = sim.replicates.div_ceil(BLOCK);
    let partial: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::zero();
            let end = ((b + 1) * BLOCK).min(sim.replicates);
            for index in b * BLOCK..end {
                m.push(&one(index));
            }
            m
        })
        .collect();
    let mut total = Moments::zero();
    for m in &partial {
        total.merge(m);
    }

    let reps = sim.replicates as f64;
    let mut mean = [0.0; METRICS];
    let mut se = [0.0; METRICS];
    for i in 0..METRICS {
        mean[i] = total.sum[i] / reps;
        se[i] = if sim.replicates > 1 {
            let var = ((total.sum_sq[i] - reps * mean[i] * mean[i]) / (reps - 1.0)).max(0.0);
            (var / reps).sqrt()
        } else {
            0.0
        };
    }
    Ok(SimResult {
        estimate: unpack(&mean, k),
        se: unpack(&se, k),
        replicates: sim.replicates,
    })
}

fn binomials(n: u32, p: &[f64]) -> Vec<Binomial> {
    p.iter()
        .map(|&p| Binomial::new(n as u64, p).expect("validated response rate"))
        .collect()
}

fn unpack(v: &[f64; METRICS], k: usize) -> OCResult {
    OCResult {
        rejection_prob: v[REJECT..REJECT + k].to_vec(),
        fwer: v[FWER],
        family_power: v[FAMILY_POWER],
        ecd: v[ECD],
        ess: v[ESS..ESS + k].to_vec(),
        ess_total: v[ESS_TOTAL],
        estim: (0..k)
            .map(|i| Estimate {
                mean_posterior_mean: v[MEAN + i],
                mse: v[SQ_ERR + i],
            })
            .collect(),
        total_mass: 1.0,
    }
}
