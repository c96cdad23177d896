//! Threshold calibration under FWER control, default scenarios and ECD-based
//! selection of weight tuning parameters.

use rayon::prelude::*;

use crate::design::{DesignSpec, WeightConfig};
use crate::engine::{ExactEngine, InterimConfig, StageLayout, TrueScenario};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRequest {
    /// FWER budget under the global null.
    pub alpha: f64,
    /// Decimal places of lambda.
    pub prec_digits: u32,
}

impl CalibrationRequest {
    pub fn new(alpha: f64, prec_digits: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid("calibration request", format!("alpha must lie in (0, 1), got {alpha}"));
        }
        if !(1..=9).contains(&prec_digits) {
            return invalid("calibration request", format!("prec_digits must be in 1..=9, got {prec_digits}"));
        }
        Ok(Self { alpha, prec_digits })
    }

    fn grid_size(&self) -> u64 {
        10u64.pow(self.prec_digits)
    }

    /// `i / 10^d`.
    pub fn grid_lambda(&self, i: u64) -> f64 {
        i as f64 / self.grid_size() as f64
    }
}

/// Smallest threshold on the grid `{i / 10^d : 1 <= i < 10^d}` whose
/// global-null FWER is at most `alpha`, together with that FWER.
///
/// Bisection relies on the FWER being non-increasing in lambda.
pub fn adjust_lambda(
    design: &DesignSpec,
    layout: &StageLayout,
    config: &WeightConfig,
    interim: Option<&InterimConfig>,
    request: &CalibrationRequest,
) -> Result<(f64, f64)> {
    let engine = ExactEngine::new(*design, *layout, *config, interim.copied(), 0.5)?;
    adjust_lambda_with(&engine, request)
}

pub(crate) fn adjust_lambda_with(engine: &ExactEngine, request: &CalibrationRequest) -> Result<(f64, f64)> {
    let fwer_at = |i: u64| -> Result<f64> { Ok(engine.with_lambda(request.grid_lambda(i))?.fwer_global_null()) };
    let mut hi = request.grid_size() - 1;
    let fwer_hi = fwer_at(hi)?;
    if fwer_hi > request.alpha {
        return Err(Error::Infeasible {
            alpha: request.alpha,
            prec_digits: request.prec_digits,
            lambda_max: request.grid_lambda(hi),
            fwer_at_max: fwer_hi,
        });
    }
    let mut lo = 1;
    let fwer_lo = fwer_at(lo)?;
    if fwer_lo <= request.alpha {
        return Ok((request.grid_lambda(lo), fwer_lo));
    }
    // fwer(lo) > alpha >= fwer(hi)
    let mut best = fwer_hi;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let f = fwer_at(mid)?;
        if f <= request.alpha {
            hi = mid;
            best = f;
        } else {
            lo = mid;
        }
    }
    Ok((request.grid_lambda(hi), best))
}

/// Response-rate scenarios with 0..=k active baskets; column `j` has its
/// last `j` baskets at `p1` and the rest at `p0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    k: usize,
    columns: Vec<Vec<f64>>,
}

impl ScenarioMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Column labels "0 Active" .. "k Active".
    pub fn labels(&self) -> Vec<String> {
        (0..self.columns.len()).map(|j| format!("{j} Active")).collect()
    }

    pub fn get(&self, basket: usize, scenario: usize) -> f64 {
        self.columns[scenario][basket]
    }

    pub fn scenarios(&self) -> Result<Vec<TrueScenario>> {
        self.columns.iter().map(|c| TrueScenario::new(c.clone())).collect()
    }

    /// Arbitrary scenario columns, each of length `k`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let k = columns.first().map(Vec::len).unwrap_or(0);
        if columns.is_empty() || columns.iter().any(|c| c.len() != k) {
            return invalid("scenario matrix", "needs at least one column, all of equal length");
        }
        for c in &columns {
            TrueScenario::new(c.clone())?;
        }
        Ok(Self { k, columns })
    }
}

pub fn get_scenarios(design: &DesignSpec, p1: f64) -> Result<ScenarioMatrix> {
    let p0 = design.p0();
    if !(p1 > p0 && p1 <= 1.0) {
        return invalid("p1", format!("must exceed p0 = {p0} and be at most 1, got {p1}"));
    }
    let k = design.k();
    let columns = (0..=k)
        .map(|active| (0..k).map(|b| if b >= k - active { p1 } else { p0 }).collect())
        .collect();
    Ok(ScenarioMatrix { k, columns })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    /// Position in the input grid.
    pub index: usize,
    pub config: WeightConfig,
    pub lambda: f64,
    pub fwer: f64,
    pub ecd: Vec<f64>,
    pub mean_ecd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedRow {
    pub index: usize,
    pub config: WeightConfig,
    pub error: Error,
}

/// Grid points ranked by mean ECD, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDesignTable {
    pub scenario_labels: Vec<String>,
    pub rows: Vec<DesignRow>,
    pub failed: Vec<FailedRow>,
}

/// Calibrates lambda for every grid point, evaluates the ECD of each
/// scenario at that lambda and sorts by mean ECD (stable for ties).
pub fn opt_design(
    design: &DesignSpec,
    layout: &StageLayout,
    grid: &[WeightConfig],
    interim: Option<&InterimConfig>,
    scenarios: &ScenarioMatrix,
    request: &CalibrationRequest,
) -> Result<RankedDesignTable> {
    if grid.is_empty() {
        return invalid("tuning grid", "is empty");
    }
    if scenarios.k() != design.k() {
        return invalid("scenario matrix", "row count does not match the number of baskets");
    }
    let truths = scenarios.scenarios()?;
    let outcomes: Vec<Result<std::result::Result<DesignRow, FailedRow>>> = grid
        .par_iter()
        .enumerate()
        .map(|(index, config)| {
            let engine = ExactEngine::new(*design, *layout, *config, interim.copied(), 0.5)?;
            match adjust_lambda_with(&engine, request) {
                Ok((lambda, fwer)) => {
                    let at = engine.with_lambda(lambda)?;
                    let ecd = truths.iter().map(|s| Ok(at.oc(s)?.ecd)).collect::<Result<Vec<f64>>>()?;
                    let mean_ecd = ecd.iter().sum::<f64>() / ecd.len() as f64;
                    Ok(Ok(DesignRow {
                        index,
                        config: *config,
                        lambda,
                        fwer,
                        ecd,
                        mean_ecd,
                    }))
                }
                Err(error @ Error::Infeasible { .. }) => Ok(Err(FailedRow {
                    index,
                    config: *config,
                    error,
                })),
                Err(other) => Err(other),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(row) => rows.push(row),
            Err(f) => failed.push(f),
        }
    }
    rows.sort_by(|a, b| b.mean_ecd.total_cmp(&a.mean_ecd));
    Ok(RankedDesignTable {
        scenario_labels: scenarios.labels(),
        rows,
        failed,
    })
}
