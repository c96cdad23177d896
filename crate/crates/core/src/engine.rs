//! Exact operating characteristics of single-stage and two-stage designs.
//!
//! Every outcome vector is visited once per symmetry class (see
//! [`crate::enumerate`]); per-basket quantities are averaged over the
//! baskets a class permutes, which is exact because the decision rule is
//! equivariant under relabelling of baskets with equal data.

use std::sync::Arc;

use arrayvec::ArrayVec;
use rayon::prelude::*;

use crate::design::{check_lambda, BasketStatus, DesignSpec, Model, Obs, TrialState, WeightConfig, MAX_BASKETS};
use crate::enumerate::{group_by_key, OutcomeClasses};
use crate::error::{invalid, Result};
use crate::special::{beta_binom_pmf_raw, beta_tail_raw, binom_pmf_unchecked, BetaParams};

/// Planned per-basket sample sizes: `n` in total, `n1` at the interim analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLayout {
    n: u32,
    n1: Option<u32>,
}

impl StageLayout {
    pub fn single(n: u32) -> Result<Self> {
        if n == 0 {
            return invalid("layout", "n must be at least 1");
        }
        Ok(Self { n, n1: None })
    }

    pub fn two_stage(n: u32, n1: u32) -> Result<Self> {
        if n1 == 0 || n1 >= n {
            return invalid("layout", format!("needs 1 <= n1 < n, got n1 = {n1}, n = {n}"));
        }
        Ok(Self { n, n1: Some(n1) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn n1(&self) -> Option<u32> {
        self.n1
    }

    /// Sample sizes at which weights are needed.
    fn sizes(&self) -> Vec<u32> {
        match self.n1 {
            Some(n1) => vec![n1, self.n],
            None => vec![self.n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterimKind {
    /// Posterior predictive probability of a final rejection.
    PostPred,
    /// Shared posterior probability `P(p_k > p0)` at the interim.
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterimConfig {
    pub kind: InterimKind,
    pub prob_futstop: f64,
    pub prob_effstop: f64,
}

impl InterimConfig {
    pub fn new(kind: InterimKind, prob_futstop: f64, prob_effstop: f64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !unit.contains(&prob_futstop) || !unit.contains(&prob_effstop) {
            return invalid("interim config", "stopping boundaries must lie in [0, 1]");
        }
        if prob_futstop > prob_effstop {
            return invalid(
                "interim config",
                format!("futility boundary {prob_futstop} exceeds efficacy boundary {prob_effstop}"),
            );
        }
        Ok(Self {
            kind,
            prob_futstop,
            prob_effstop,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterimAction {
    Continue,
    StopFutility,
    StopEfficacy,
}

impl InterimAction {
    fn status(self) -> BasketStatus {
        match self {
            InterimAction::Continue => BasketStatus::Active,
            InterimAction::StopFutility => BasketStatus::StoppedFutility,
            InterimAction::StopEfficacy => BasketStatus::StoppedEfficacy,
        }
    }
}

/// True response rates of the baskets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueScenario {
    p: Vec<f64>,
}

impl TrueScenario {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() > MAX_BASKETS {
            return invalid("scenario", format!("needs 1..={MAX_BASKETS} response rates"));
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return invalid("scenario", format!("response rate {bad} is outside [0, 1]"));
        }
        Ok(Self { p })
    }

    /// All baskets at `p0`.
    pub fn global_null(design: &DesignSpec) -> Self {
        Self {
            p: vec![design.p0(); design.k()],
        }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn is_null(&self, basket: usize, p0: f64) -> bool {
        self.p[basket] <= p0
    }

    fn check_against(&self, design: &DesignSpec) -> Result<()> {
        if self.p.len() != design.k() {
            return invalid(
                "scenario",
                format!("has {} rates but the design has {} baskets", self.p.len(), design.k()),
            );
        }
        Ok(())
    }
}

/// Mean of the posterior means and mean squared error of one basket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean_posterior_mean: f64,
    pub mse: f64,
}

/// Operating characteristics of a design under one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct OCResult {
    pub rejection_prob: Vec<f64>,
    pub fwer: f64,
    /// Probability of rejecting at least one basket whose alternative is true.
    pub family_power: f64,
    pub ecd: f64,
    pub ess: Vec<f64>,
    pub ess_total: f64,
    pub estim: Vec<Estimate>,
    /// Total probability visited by the enumeration; one up to rounding.
    pub total_mass: f64,
}

/// Expected correct decisions from per-basket rejection probabilities.
pub fn ecd_from_rejections(rejection_prob: &[f64], scenario: &TrueScenario, p0: f64) -> f64 {
    rejection_prob
        .iter()
        .enumerate()
        .map(|(k, &rp)| if scenario.is_null(k, p0) { 1.0 - rp } else { rp })
        .sum()
}

/// Posterior mean and squared error against the truth, per basket.
pub fn estim_components(posteriors: &[BetaParams], scenario: &TrueScenario) -> Vec<(f64, f64)> {
    posteriors
        .iter()
        .zip(scenario.p())
        .map(|(post, &p)| {
            let m = post.mean();
            (m, (m - p) * (m - p))
        })
        .collect()
}

/// How the outcome space is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Enumeration {
    /// One representative per permutation class.
    #[default]
    Symmetric,
    /// Every outcome vector separately.
    Naive,
}

type Row = [f64; MAX_BASKETS];

/// Probability-weighted sums gathered over outcomes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    pub(crate) mass: f64,
    pub(crate) fwer: f64,
    pub(crate) any_alt: f64,
    pub(crate) reject: Row,
    pub(crate) cont: Row,
    pub(crate) mean: Row,
    pub(crate) sq_err: Row,
}

impl Acc {
    fn add_scaled(&mut self, other: &Acc, scale: f64) {
        self.mass += scale * other.mass;
        self.fwer += scale * other.fwer;
        self.any_alt += scale * other.any_alt;
        for k in 0..MAX_BASKETS {
            self.reject[k] += scale * other.reject[k];
            self.cont[k] += scale * other.cont[k];
            self.mean[k] += scale * other.mean[k];
            self.sq_err[k] += scale * other.sq_err[k];
        }
    }

    /// Replaces every per-basket entry by its average over the basket's group.
    fn symmetrize(&mut self, groups: &[Vec<usize>]) {
        for g in groups.iter().filter(|g| g.len() > 1) {
            for row in [&mut self.reject, &mut self.cont, &mut self.mean, &mut self.sq_err] {
                let avg = g.iter().map(|&i| row[i]).sum::<f64>() / g.len() as f64;
                for &i in g {
                    row[i] = avg;
                }
            }
        }
    }
}

const CHUNK: usize = 2048;

/// Sums `f` over a class stream, in parallel within fixed-size chunks and
/// in stream order across them, so the result does not depend on the
/// number of worker threads.
fn sum_classes<F>(classes: OutcomeClasses, f: F) -> Acc
where
    F: Fn(&ArrayVec<u32, MAX_BASKETS>, u64) -> Acc + Sync,
{
    let mut total = Acc::default();
    let mut classes = classes.peekable();
    let mut chunk = Vec::with_capacity(CHUNK);
    while classes.peek().is_some() {
        chunk.clear();
        chunk.extend(classes.by_ref().take(CHUNK));
        let parts: Vec<Acc> = chunk.par_iter().map(|c| f(&c.outcome, c.multiplicity)).collect();
        for part in &parts {
            total.add_scaled(part, 1.0);
        }
    }
    total
}

/// Exact evaluator for one design, layout, threshold and interim rule.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    model: Arc<Model>,
    /// Tail of the unshared posterior after `r` responses in `n`, for `r = 0..=n`.
    own_final_tail: Arc<Vec<f64>>,
    layout: StageLayout,
    lambda: f64,
    interim: Option<InterimConfig>,
    enumeration: Enumeration,
}

impl ExactEngine {
    pub fn new(
        design: DesignSpec,
        layout: StageLayout,
        config: WeightConfig,
        interim: Option<InterimConfig>,
        lambda: f64,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        match (layout.n1, interim) {
            (Some(_), None) => return invalid("interim config", "a two-stage layout needs an interim rule"),
            (None, Some(_)) => return invalid("interim config", "a single-stage layout has no interim analysis"),
            _ => {}
        }
        let model = Model::new(design, config, &layout.sizes())?;
        Ok(Self {
            model: Arc::new(model),
            own_final_tail: Arc::new(own_final_tails(&design, layout.n)),
            layout,
            lambda,
            interim,
            enumeration: Enumeration::Symmetric,
        })
    }

    /// Same design and cached weights, different threshold.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn with_enumeration(mut self, enumeration: Enumeration) -> Self {
        self.enumeration = enumeration;
        self
    }

    pub fn design(&self) -> &DesignSpec {
        self.model.design()
    }

    pub fn layout(&self) -> StageLayout {
        self.layout
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn interim(&self) -> Option<InterimConfig> {
        self.interim
    }

    fn classes<K: PartialEq>(&self, m: u32, keys: &[K]) -> OutcomeClasses {
        let groups = match self.enumeration {
            Enumeration::Symmetric => group_by_key(keys),
            Enumeration::Naive => (0..keys.len()).map(|i| vec![i]).collect(),
        };
        OutcomeClasses::new(m, groups)
    }

    /// Operating characteristics under `scenario`.
    pub fn oc(&self, scenario: &TrueScenario) -> Result<OCResult> {
        scenario.check_against(self.design())?;
        let acc = match self.layout.n1 {
            None => self.single_stage(scenario),
            Some(n1) => self.two_stage(scenario, n1),
        };
        Ok(self.finish(acc, scenario))
    }

    fn finish(&self, acc: Acc, scenario: &TrueScenario) -> OCResult {
        let k = self.design().k();
        let p0 = self.design().p0();
        let n = self.layout.n as f64;
        let rejection_prob: Vec<f64> = acc.reject[..k].to_vec();
        let ess: Vec<f64> = match self.layout.n1 {
            None => vec![n; k],
            Some(n1) => acc.cont[..k]
                .iter()
                .map(|&c| n1 as f64 + (n - n1 as f64) * c)
                .collect(),
        };
        let estim = (0..k)
            .map(|i| Estimate {
                mean_posterior_mean: acc.mean[i],
                mse: acc.sq_err[i],
            })
            .collect();
        OCResult {
            ecd: ecd_from_rejections(&rejection_prob, scenario, p0),
            rejection_prob,
            fwer: acc.fwer,
            family_power: acc.any_alt,
            ess_total: ess.iter().sum(),
            ess,
            estim,
            total_mass: acc.mass,
        }
    }

    /// Per-basket rejections, means and squared errors of one final state.
    pub(crate) fn final_analysis(&self, obs: &[Obs], status: &[BasketStatus], scenario: &TrueScenario) -> Acc {
        let p0 = self.design().p0();
        let mut out = Acc {
            mass: 1.0,
            ..Acc::default()
        };
        let mut any_null_rejected = false;
        let mut any_alt_rejected = false;
        for k in 0..obs.len() {
            let (a, b) = self.model.shape(obs, k);
            let reject = match status[k] {
                BasketStatus::StoppedEfficacy => true,
                BasketStatus::StoppedFutility => false,
                BasketStatus::Active => beta_tail_raw(a, b, p0) >= self.lambda,
            };
            if reject {
                out.reject[k] = 1.0;
                if scenario.is_null(k, p0) {
                    any_null_rejected = true;
                } else {
                    any_alt_rejected = true;
                }
            }
            let mean = a / (a + b);
            let err = mean - scenario.p[k];
            out.mean[k] = mean;
            out.sq_err[k] = err * err;
        }
        out.fwer = if any_null_rejected { 1.0 } else { 0.0 };
        out.any_alt = if any_alt_rejected { 1.0 } else { 0.0 };
        out
    }

    fn single_stage(&self, scenario: &TrueScenario) -> Acc {
        let n = self.layout.n;
        let k = self.design().k();
        let classes = self.classes(n, &scenario.p);
        let groups = classes.groups().to_vec();
        let status = [BasketStatus::Active; MAX_BASKETS];
        sum_classes(classes, |outcome, mult| {
            let obs: ArrayVec<Obs, MAX_BASKETS> = outcome.iter().map(|&r| Obs::new(n, r)).collect();
            let prob: f64 = outcome
                .iter()
                .zip(&scenario.p)
                .map(|(&r, &p)| binom_pmf_unchecked(n, r, p))
                .product();
            let mut part = self.final_analysis(&obs, &status[..k], scenario);
            part.symmetrize(&groups);
            let mut scaled = Acc::default();
            scaled.add_scaled(&part, mult as f64 * prob);
            scaled
        })
    }

    fn two_stage(&self, scenario: &TrueScenario, n1: u32) -> Acc {
        let n = self.layout.n;
        let m = n - n1;
        let k = self.design().k();
        let classes = self.classes(n1, &scenario.p);
        let groups = classes.groups().to_vec();
        sum_classes(classes, |r1, mult| {
            let prob: f64 = r1
                .iter()
                .zip(&scenario.p)
                .map(|(&r, &p)| binom_pmf_unchecked(n1, r, p))
                .product();
            if prob == 0.0 {
                return Acc::default();
            }
            let obs1: ArrayVec<Obs, MAX_BASKETS> = r1.iter().map(|&r| Obs::new(n1, r)).collect();
            let actions = self.interim_actions(&obs1);
            let status: ArrayVec<BasketStatus, MAX_BASKETS> = actions.iter().map(|a| a.status()).collect();
            let continuing: ArrayVec<usize, MAX_BASKETS> =
                (0..k).filter(|&i| actions[i] == InterimAction::Continue).collect();

            let mut cond = if continuing.is_empty() {
                self.final_analysis(&obs1, &status, scenario)
            } else {
                let keys: Vec<(u64, u32)> = continuing
                    .iter()
                    .map(|&i| (scenario.p[i].to_bits(), r1[i]))
                    .collect();
                let stage2 = self.classes(m, &keys);
                let local_groups: Vec<Vec<usize>> = stage2
                    .groups()
                    .iter()
                    .map(|g| g.iter().map(|&j| continuing[j]).collect())
                    .collect();
                let mut cond = Acc::default();
                let mut obs = obs1.clone();
                for class in stage2 {
                    let mut prob2 = class.multiplicity as f64;
                    for (j, &x) in class.outcome.iter().enumerate() {
                        let i = continuing[j];
                        prob2 *= binom_pmf_unchecked(m, x, scenario.p[i]);
                        obs[i] = Obs::new(n, r1[i] + x);
                    }
                    if prob2 == 0.0 {
                        continue;
                    }
                    let mut part = self.final_analysis(&obs, &status, scenario);
                    part.symmetrize(&local_groups);
                    cond.add_scaled(&part, prob2);
                }
                cond
            };
            for &i in &continuing {
                cond.cont[i] = cond.mass;
            }
            cond.symmetrize(&groups);
            let mut scaled = Acc::default();
            scaled.add_scaled(&cond, mult as f64 * prob);
            scaled
        })
    }

    /// Interim decisions for all baskets, every basket at its interim data.
    pub(crate) fn interim_actions(&self, obs1: &[Obs]) -> ArrayVec<InterimAction, MAX_BASKETS> {
        let interim = self.interim.expect("interim rule required for two-stage evaluation");
        (0..obs1.len())
            .map(|k| {
                let score = match interim.kind {
                    InterimKind::Posterior => self.model.tail(obs1, k),
                    InterimKind::PostPred => self.ppp_obs(obs1, k),
                };
                if score < interim.prob_futstop {
                    InterimAction::StopFutility
                } else if score > interim.prob_effstop {
                    InterimAction::StopEfficacy
                } else {
                    InterimAction::Continue
                }
            })
            .collect()
    }

    /// Posterior predictive probability that basket `k` is rejected at the
    /// end. The remaining responses of basket `k` are predicted from its
    /// shared interim posterior; each predicted final result is judged on
    /// the basket's own posterior (prior plus its own data).
    pub(crate) fn ppp_obs(&self, obs1: &[Obs], k: usize) -> f64 {
        let n = self.layout.n;
        let own = obs1[k];
        let m = n - own.n;
        let (a, b) = self.model.shape(obs1, k);
        let mut total = 0.0;
        for x in 0..=m {
            if self.own_final_tail[(own.r + x) as usize] >= self.lambda {
                total += if m == 0 { 1.0 } else { beta_binom_pmf_raw(m, x, a, b) };
            }
        }
        total.min(1.0)
    }

    /// Global-null FWER at the engine's threshold.
    pub fn fwer_global_null(&self) -> f64 {
        let scenario = TrueScenario::global_null(self.design());
        let acc = match self.layout.n1 {
            None => self.single_stage(&scenario),
            Some(n1) => self.two_stage(&scenario, n1),
        };
        acc.fwer
    }
}

fn own_final_tails(design: &DesignSpec, n: u32) -> Vec<f64> {
    let prior = design.prior();
    (0..=n)
        .map(|r| beta_tail_raw(prior.alpha + r as f64, prior.beta + (n - r) as f64, design.p0()))
        .collect()
}

fn check_interim_state(state: &TrialState, design: &DesignSpec, layout: &StageLayout) -> Result<()> {
    state.check_against(design)?;
    if state.baskets().iter().any(|b| b.status != BasketStatus::Active) {
        return invalid("trial state", "interim decisions need every basket active");
    }
    let n1 = state.baskets()[0].n;
    if state.baskets().iter().any(|b| b.n != n1) || n1 > layout.n() {
        return invalid("trial state", "interim baskets need a common sample size not above n");
    }
    Ok(())
}

/// Interim decision of every basket.
pub fn interim_decision(
    state: &TrialState,
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
    interim: &InterimConfig,
) -> Result<Vec<InterimAction>> {
    check_interim_state(state, design, layout)?;
    let engine = state_engine(state, design, layout, lambda, config, Some(*interim))?;
    Ok(engine.interim_actions(&state.obs()).to_vec())
}

/// Posterior predictive probability of a final rejection of basket `k`.
pub fn ppp(
    k: usize,
    state: &TrialState,
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
) -> Result<f64> {
    check_interim_state(state, design, layout)?;
    if k >= design.k() {
        return invalid("basket index", format!("{k} is out of range"));
    }
    let engine = state_engine(state, design, layout, lambda, config, None)?;
    Ok(engine.ppp_obs(&state.obs(), k))
}

fn state_engine(
    state: &TrialState,
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
    interim: Option<InterimConfig>,
) -> Result<ExactEngine> {
    check_lambda(lambda)?;
    let n1 = state.baskets()[0].n;
    let mut sizes = vec![n1, layout.n()];
    sizes.dedup();
    let model = Model::new(*design, *config, &sizes)?;
    Ok(ExactEngine {
        model: Arc::new(model),
        own_final_tail: Arc::new(own_final_tails(design, layout.n())),
        layout: *layout,
        lambda,
        interim,
        enumeration: Enumeration::Symmetric,
    })
}

/// Exact operating characteristics of a single-stage design.
pub fn single_stage_oc(
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
    scenario: &TrueScenario,
) -> Result<OCResult> {
    if layout.n1().is_some() {
        return invalid("layout", "single-stage evaluation takes a layout without n1");
    }
    ExactEngine::new(*design, *layout, *config, None, lambda)?.oc(scenario)
}

/// Exact operating characteristics of a two-stage design.
pub fn two_stage_oc(
    design: &DesignSpec,
    layout: &StageLayout,
    lambda: f64,
    config: &WeightConfig,
    interim: &InterimConfig,
    scenario: &TrueScenario,
) -> Result<OCResult> {
    ExactEngine::new(*design, *layout, *config, Some(*interim), lambda)?.oc(scenario)
}
