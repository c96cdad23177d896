//! Sharing weights, shared posteriors and rejection decisions.
//!
//! Every basket starts from the same beta prior. Basket `k` borrows the data
//! of basket `i` in proportion to a weight in [0, 1]; with the prior shared
//! (Fujikawa mode) the prior shapes enter the weighted sums as well.

use arrayvec::ArrayVec;

use crate::error::{invalid, Result};
use crate::special::{beta_tail_raw, jsd_beta, BetaParams};

/// Largest supported number of baskets.
pub const MAX_BASKETS: usize = 5;

/// Immutable trial design: basket count, common prior and null response rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    k: usize,
    prior: BetaParams,
    p0: f64,
}

impl DesignSpec {
    pub fn new(k: usize, prior: BetaParams, p0: f64) -> Result<Self> {
        if !(2..=MAX_BASKETS).contains(&k) {
            return invalid("design", format!("basket count must be in 2..={MAX_BASKETS}, got {k}"));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return invalid("design", format!("p0 must lie strictly inside (0, 1), got {p0}"));
        }
        Ok(Self { k, prior, p0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn prior(&self) -> BetaParams {
        self.prior
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }
}

/// How pairwise sharing weights are derived from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMethod {
    /// Calibrated power prior: logistic transform of the difference in response rates.
    Cpp { a: f64, b: f64 },
    /// One minus the Jensen-Shannon divergence of the individual posteriors,
    /// raised to `epsilon` and zeroed at or below `tau`.
    Jsd { epsilon: f64, tau: f64 },
    /// No borrowing: every off-diagonal weight is zero.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    pub method: WeightMethod,
    /// `true` puts the prior shapes inside the weighted sums (Fujikawa mode).
    pub share_prior: bool,
}

impl WeightConfig {
    pub fn new(method: WeightMethod, share_prior: bool) -> Result<Self> {
        match method {
            WeightMethod::Cpp { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return invalid("weight config", "CPP parameters must be finite");
                }
            }
            WeightMethod::Jsd { epsilon, tau } => {
                if !(epsilon >= 0.0 && epsilon.is_finite()) {
                    return invalid("weight config", format!("epsilon must be >= 0, got {epsilon}"));
                }
                if !(0.0..1.0).contains(&tau) {
                    return invalid("weight config", format!("tau must lie in [0, 1), got {tau}"));
                }
            }
            WeightMethod::Independent => {}
        }
        Ok(Self {
            method,
            share_prior,
        })
    }

    pub fn cpp(a: f64, b: f64) -> Result<Self> {
        Self::new(WeightMethod::Cpp { a, b }, false)
    }

    pub fn jsd(epsilon: f64, tau: f64, share_prior: bool) -> Result<Self> {
        Self::new(WeightMethod::Jsd { epsilon, tau }, share_prior)
    }

    pub fn independent() -> Self {
        Self {
            method: WeightMethod::Independent,
            share_prior: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasketStatus {
    Active,
    StoppedFutility,
    StoppedEfficacy,
}

/// Observations of one basket: `r` responses among `n` patients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Obs {
    pub n: u32,
    pub r: u32,
}

impl Obs {
    pub fn new(n: u32, r: u32) -> Self {
        debug_assert!(r <= n);
        Self { n, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasketState {
    pub n: u32,
    pub r: u32,
    pub status: BasketStatus,
}

impl BasketState {
    pub fn obs(&self) -> Obs {
        Obs { n: self.n, r: self.r }
    }
}

/// Per-basket data and stop status at an analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialState {
    baskets: Vec<BasketState>,
}

impl TrialState {
    pub fn new(baskets: Vec<BasketState>) -> Result<Self> {
        if baskets.is_empty() || baskets.len() > MAX_BASKETS {
            return invalid("trial state", format!("needs 1..={MAX_BASKETS} baskets, got {}", baskets.len()));
        }
        if let Some(b) = baskets.iter().find(|b| b.r > b.n) {
            return invalid("trial state", format!("r = {} exceeds n = {}", b.r, b.n));
        }
        Ok(Self { baskets })
    }

    /// All baskets active with the given counts.
    pub fn active(n: &[u32], r: &[u32]) -> Result<Self> {
        if n.len() != r.len() {
            return invalid("trial state", "n and r differ in length");
        }
        Self::new(
            n.iter()
                .zip(r)
                .map(|(&n, &r)| BasketState {
                    n,
                    r,
                    status: BasketStatus::Active,
                })
                .collect(),
        )
    }

    pub fn baskets(&self) -> &[BasketState] {
        &self.baskets
    }

    pub fn len(&self) -> usize {
        self.baskets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baskets.is_empty()
    }

    pub(crate) fn obs(&self) -> ArrayVec<Obs, MAX_BASKETS> {
        self.baskets.iter().map(BasketState::obs).collect()
    }

    pub(crate) fn check_against(&self, design: &DesignSpec) -> Result<()> {
        if self.baskets.len() != design.k() {
            return invalid(
                "trial state",
                format!("has {} baskets but the design has {}", self.baskets.len(), design.k()),
            );
        }
        if self.baskets.iter().any(|b| b.n == 0) {
            return invalid("trial state", "every basket needs at least one observation");
        }
        Ok(())
    }
}

/// Symmetric k x k matrix of sharing weights with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Self { k, data }
    }

    /// Builds a matrix from its rows; checks symmetry, the unit diagonal and the [0, 1] range.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return invalid("weight matrix", "rows must form a square matrix");
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        for i in 0..k {
            if data[i * k + i] != 1.0 {
                return invalid("weight matrix", format!("diagonal entry {i} is not 1"));
            }
            for j in 0..k {
                let w = data[i * k + j];
                if !(0.0..=1.0).contains(&w) {
                    return invalid("weight matrix", format!("entry ({i}, {j}) = {w} is outside [0, 1]"));
                }
                if w != data[j * k + i] {
                    return invalid("weight matrix", format!("not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.k + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.k..(row + 1) * self.k]
    }
}

/// CPP weight between two baskets.
///
/// Identical response rates give weight one, the limit of the logistic
/// formula as the log-difference tends to minus infinity.
pub fn cpp_weight(r_k: u32, n_k: u32, r_i: u32, n_i: u32, a: f64, b: f64) -> f64 {
    let d = (r_k as f64 / n_k as f64 - r_i as f64 / n_i as f64).abs();
    if d == 0.0 {
        return 1.0;
    }
    let scale = (n_k.max(n_i) as f64).powf(0.25);
    1.0 / (1.0 + (a + b * (d * scale).ln()).exp())
}

/// JSD weight between two individual posteriors.
pub fn jsd_weight(post_k: BetaParams, post_i: BetaParams, epsilon: f64, tau: f64) -> Result<f64> {
    let w = (1.0 - jsd_beta(post_k, post_i)?).powf(epsilon);
    Ok(if w > tau { w } else { 0.0 })
}

fn individual_posterior(prior: BetaParams, obs: Obs) -> BetaParams {
    BetaParams {
        alpha: prior.alpha + obs.r as f64,
        beta: prior.beta + (obs.n - obs.r) as f64,
    }
}

/// Weight between two baskets under the configured method.
pub fn pair_weight(design: &DesignSpec, config: &WeightConfig, k: Obs, i: Obs) -> Result<f64> {
    match config.method {
        WeightMethod::Cpp { a, b } => Ok(cpp_weight(k.r, k.n, i.r, i.n, a, b)),
        WeightMethod::Jsd { epsilon, tau } => {
            let prior = design.prior();
            jsd_weight(
                individual_posterior(prior, k),
                individual_posterior(prior, i),
                epsilon,
                tau,
            )
        }
        WeightMethod::Independent => Ok(0.0),
    }
}

/// Source of pairwise weights for the hot evaluation loops.
pub trait PairWeights {
    fn weight(&self, k: Obs, i: Obs) -> f64;
}

/// Precomputed weights for every pair of observations whose sample sizes
/// lie in a fixed set.
#[derive(Debug, Clone)]
pub struct WeightTable {
    slot_of_n: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
    values: Vec<f64>,
}

impl WeightTable {
    pub fn new(design: &DesignSpec, config: &WeightConfig, sizes: &[u32]) -> Result<Self> {
        let mut sizes: Vec<u32> = sizes.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.first() == Some(&0) {
            return invalid("weight table", "sample sizes must be positive");
        }
        let max_n = *sizes.last().unwrap_or(&0) as usize;
        let mut slot_of_n = vec![usize::MAX; max_n + 1];
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut all_obs = Vec::new();
        for (slot, &n) in sizes.iter().enumerate() {
            slot_of_n[n as usize] = slot;
            offsets.push(all_obs.len());
            all_obs.extend((0..=n).map(|r| Obs { n, r }));
        }
        let dim = all_obs.len();
        let mut values = vec![0.0; dim * dim];
        for u in 0..dim {
            for v in u..dim {
                let w = pair_weight(design, config, all_obs[u], all_obs[v])?;
                values[u * dim + v] = w;
                values[v * dim + u] = w;
            }
        }
        Ok(Self {
            slot_of_n,
            offsets,
            dim,
            values,
        })
    }

    #[inline]
    fn index(&self, obs: Obs) -> usize {
        let slot = self.slot_of_n[obs.n as usize];
        debug_assert!(slot != usize::MAX, "sample size {} not in weight table", obs.n);
        self.offsets[slot] + obs.r as usize
    }
}

impl PairWeights for WeightTable {
    #[inline]
    fn weight(&self, k: Obs, i: Obs) -> f64 {
        self.values[self.index(k) * self.dim + self.index(i)]
    }
}

/// A design, a weight configuration and cached weights for the sample sizes
/// reachable in one layout: the shared decision semantics used by both the
/// exact engine and the simulator.
#[derive(Debug, Clone)]
pub struct Model {
    design: DesignSpec,
    config: WeightConfig,
    table: WeightTable,
}

impl Model {
    pub fn new(design: DesignSpec, config: WeightConfig, sizes: &[u32]) -> Result<Self> {
        let table = WeightTable::new(&design, &config, sizes)?;
        Ok(Self {
            design,
            config,
            table,
        })
    }

    pub fn design(&self) -> &DesignSpec {
        &self.design
    }

    pub fn config(&self) -> &WeightConfig {
        &self.config
    }

    /// Shared posterior shapes of basket `k`.
    #[inline]
    pub(crate) fn shape(&self, obs: &[Obs], k: usize) -> (f64, f64) {
        let own = obs[k];
        shared_shape(self.design.prior(), self.config.share_prior, obs, k, |i| {
            self.table.weight(own, obs[i])
        })
    }

    /// Shared posterior tail probability `P(p_k > p0)`.
    #[inline]
    pub(crate) fn tail(&self, obs: &[Obs], k: usize) -> f64 {
        let (a, b) = self.shape(obs, k);
        beta_tail_raw(a, b, self.design.p0())
    }
}

/// Shared posterior shapes of basket `k`, where `weight_of(i)` is the
/// weight basket `k` gives to basket `i` (the diagonal is forced to one).
#[inline]
pub(crate) fn shared_shape<F: Fn(usize) -> f64>(
    prior: BetaParams,
    share_prior: bool,
    obs: &[Obs],
    k: usize,
    weight_of: F,
) -> (f64, f64) {
    let (mut a, mut b) = if share_prior {
        (0.0, 0.0)
    } else {
        (prior.alpha, prior.beta)
    };
    for (i, &other) in obs.iter().enumerate() {
        let w = if i == k { 1.0 } else { weight_of(i) };
        if share_prior {
            a += w * (prior.alpha + other.r as f64);
            b += w * (prior.beta + (other.n - other.r) as f64);
        } else {
            a += w * other.r as f64;
            b += w * (other.n - other.r) as f64;
        }
    }
    (a, b)
}

/// Pairwise weight matrix for the current data.
pub fn weight_matrix(state: &TrialState, design: &DesignSpec, config: &WeightConfig) -> Result<WeightMatrix> {
    state.check_against(design)?;
    let obs = state.obs();
    let k = obs.len();
    let mut m = WeightMatrix::identity(k);
    for row in 0..k {
        for col in (row + 1)..k {
            let w = pair_weight(design, config, obs[row], obs[col])?;
            m.data[row * k + col] = w;
            m.data[col * k + row] = w;
        }
    }
    Ok(m)
}

/// Shared posteriors of all baskets given a weight matrix.
pub fn shared_posterior(
    state: &TrialState,
    weights: &WeightMatrix,
    design: &DesignSpec,
    config: &WeightConfig,
) -> Result<Vec<BetaParams>> {
    state.check_against(design)?;
    if weights.k() != design.k() {
        return invalid("weight matrix", "dimension does not match the design");
    }
    let obs = state.obs();
    let prior = design.prior();
    (0..obs.len())
        .map(|k| {
            let (alpha, beta) = shared_shape(prior, config.share_prior, &obs, k, |i| weights.get(k, i));
            BetaParams::new(alpha, beta)
        })
        .collect()
}

/// Rejection flags of the final analysis.
///
/// Baskets stopped at an interim keep the decision taken there.
pub fn final_decision(
    state: &TrialState,
    design: &DesignSpec,
    config: &WeightConfig,
    lambda: f64,
) -> Result<Vec<bool>> {
    check_lambda(lambda)?;
    let weights = weight_matrix(state, design, config)?;
    let post = shared_posterior(state, &weights, design, config)?;
    Ok(state
        .baskets()
        .iter()
        .zip(post)
        .map(|(b, post)| match b.status {
            BasketStatus::StoppedEfficacy => true,
            BasketStatus::StoppedFutility => false,
            BasketStatus::Active => beta_tail_raw(post.alpha, post.beta, design.p0()) >= lambda,
        })
        .collect())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid("lambda", format!("must lie strictly inside (0, 1), got {lambda}"));
    }
    Ok(())
}

/// Weight between a basket with `r1` of `n` responses and one with `r2` of
/// `n`, for every `r2` in `0..=n`.
pub fn weight_curve(n: u32, r1: u32, design: &DesignSpec, config: &WeightConfig) -> Result<Vec<(u32, f64)>> {
    if n == 0 || r1 > n {
        return invalid("weight curve", format!("needs 0 <= r1 <= n and n >= 1, got r1 = {r1}, n = {n}"));
    }
    (0..=n)
        .map(|r2| Ok((r2, pair_weight(design, config, Obs::new(n, r1), Obs::new(n, r2))?)))
        .collect()
}
