//! Builds library inputs from flags and runs one subcommand.

use basket_core::{
    adjust_lambda, get_scenarios, opt_design, simulate_oc, weight_curve, CalibrationRequest, DesignSpec, ExactEngine,
    InterimConfig, InterimKind, OCResult, SimConfig, StageLayout, TrueScenario, WeightConfig, WeightMethod, BetaParams,
};

use crate::args::{parse_grid, Command, Common, InterimArg, ResultsArg, WeightsArg};
use crate::error::CliError;
use crate::report::{Cell, Report};
use crate::svg::{self, Series};

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn required<T: Copy>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| input(format!("--{flag} is required for this command")))
}

fn design(c: &Common) -> Result<DesignSpec, CliError> {
    let prior = BetaParams::new(c.shape1, c.shape2)?;
    Ok(DesignSpec::new(required(c.k, "k")?, prior, required(c.p0, "p0")?)?)
}

fn layout(c: &Common) -> Result<StageLayout, CliError> {
    let n = required(c.n, "n")?;
    Ok(match c.n1 {
        Some(n1) => StageLayout::two_stage(n, n1)?,
        None => StageLayout::single(n)?,
    })
}

fn interim(c: &Common, layout: &StageLayout) -> Result<Option<InterimConfig>, CliError> {
    if layout.n1().is_none() {
        return Ok(None);
    }
    let kind = match c.interim {
        InterimArg::Posterior => InterimKind::Posterior,
        InterimArg::Postpred => InterimKind::PostPred,
        InterimArg::None => return Err(input("--n1 needs an interim rule (--interim posterior|postpred)")),
    };
    Ok(Some(InterimConfig::new(kind, required(c.fut, "fut")?, required(c.eff, "eff")?)?))
}

fn grid_flag(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(text).map_err(|e| input(format!("--{flag}: {e}")))
}

fn weight_grid(c: &Common) -> Result<Vec<WeightConfig>, CliError> {
    let mut out = Vec::new();
    match c.weights {
        WeightsArg::Cpp => {
            for a in grid_flag(&c.a, "a")? {
                for b in grid_flag(&c.b, "b")? {
                    out.push(WeightConfig::new(WeightMethod::Cpp { a, b }, c.share_prior)?);
                }
            }
        }
        WeightsArg::Jsd => {
            for epsilon in grid_flag(&c.epsilon, "epsilon")? {
                for tau in grid_flag(&c.tau, "tau")? {
                    out.push(WeightConfig::jsd(epsilon, tau, c.share_prior)?);
                }
            }
        }
        WeightsArg::None => out.push(WeightConfig::independent()),
    }
    Ok(out)
}

fn weight_config(c: &Common) -> Result<WeightConfig, CliError> {
    let grid = weight_grid(c)?;
    match grid.as_slice() {
        [one] => Ok(*one),
        _ => Err(input("this command takes a single value for each weight parameter")),
    }
}

fn scenario(c: &Common, design: &DesignSpec) -> Result<TrueScenario, CliError> {
    Ok(match &c.p_true {
        Some(p) => TrueScenario::new(p.clone())?,
        None => TrueScenario::global_null(design),
    })
}

/// Weight-parameter columns for a grid report.
fn param_columns(c: &Common) -> Vec<&'static str> {
    match c.weights {
        WeightsArg::Cpp => vec!["a", "b"],
        WeightsArg::Jsd => vec!["epsilon", "tau"],
        WeightsArg::None => vec![],
    }
}

fn param_cells(config: &WeightConfig) -> Vec<Cell> {
    match config.method {
        WeightMethod::Cpp { a, b } => vec![a.into(), b.into()],
        WeightMethod::Jsd { epsilon, tau } => vec![epsilon.into(), tau.into()],
        WeightMethod::Independent => vec![],
    }
}

fn param_label(config: &WeightConfig) -> String {
    match config.method {
        WeightMethod::Cpp { a, b } => format!("a={a}, b={b}"),
        WeightMethod::Jsd { epsilon, tau } => format!("epsilon={epsilon}, tau={tau}"),
        WeightMethod::Independent => "no borrowing".into(),
    }
}

fn exact_oc(c: &Common) -> Result<(DesignSpec, TrueScenario, OCResult), CliError> {
    let d = design(c)?;
    let l = layout(c)?;
    let engine = ExactEngine::new(d, l, weight_config(c)?, interim(c, &l)?, required(c.lambda, "lambda")?)?;
    let sc = scenario(c, &d)?;
    let oc = engine.oc(&sc)?;
    Ok((d, sc, oc))
}

fn per_basket(sc: &TrueScenario, columns: &[&str], keep: impl Fn(usize) -> bool, cells: impl Fn(usize) -> Vec<Cell>) -> Report {
    let mut all = vec!["basket", "p_true"];
    all.extend_from_slice(columns);
    let mut r = Report::new(&all);
    for (i, &p) in sc.p().iter().enumerate().filter(|(i, _)| keep(*i)) {
        let mut row = vec![Cell::from(i + 1), p.into()];
        row.extend(cells(i));
        r.row(row);
    }
    r
}

pub fn run(command: &Command) -> Result<(Report, Option<Vec<Series>>), CliError> {
    let c = command.common();
    let report = match command {
        Command::Toer(_) => {
            let (d, sc, oc) = exact_oc(c)?;
            let mut r = match c.results {
                ResultsArg::Group => per_basket(&sc, &["rejection_prob"], |i| sc.is_null(i, d.p0()), |i| {
                    vec![oc.rejection_prob[i].into()]
                }),
                ResultsArg::Fwer => Report::default(),
            };
            r.summary("fwer", oc.fwer);
            r
        }
        Command::Pow(_) => {
            let (d, sc, oc) = exact_oc(c)?;
            if (0..d.k()).all(|i| sc.is_null(i, d.p0())) {
                return Err(input("pow needs --p-true with at least one rate above p0"));
            }
            let mut r = per_basket(&sc, &["rejection_prob"], |i| !sc.is_null(i, d.p0()), |i| {
                vec![oc.rejection_prob[i].into()]
            });
            r.summary("family_power", oc.family_power);
            r
        }
        Command::Ecd(_) => {
            let (_, sc, oc) = exact_oc(c)?;
            let mut r = per_basket(&sc, &["rejection_prob"], |_| true, |i| vec![oc.rejection_prob[i].into()]);
            r.summary("ecd", oc.ecd);
            r
        }
        Command::Ess(_) => {
            let (_, sc, oc) = exact_oc(c)?;
            let mut r = per_basket(&sc, &["ess"], |_| true, |i| vec![oc.ess[i].into()]);
            r.summary("ess_total", oc.ess_total);
            r
        }
        Command::Estim(_) => {
            let (_, sc, oc) = exact_oc(c)?;
            per_basket(&sc, &["mean_posterior_mean", "mse"], |_| true, |i| {
                vec![oc.estim[i].mean_posterior_mean.into(), oc.estim[i].mse.into()]
            })
        }
        Command::AdjustLambda(_) => {
            let d = design(c)?;
            let l = layout(c)?;
            let req = CalibrationRequest::new(required(c.alpha, "alpha")?, c.prec_digits)?;
            let (lambda, fwer) = adjust_lambda(&d, &l, &weight_config(c)?, interim(c, &l)?.as_ref(), &req)?;
            let mut r = Report::default();
            r.summary("lambda", lambda);
            r.summary("fwer", fwer);
            r
        }
        Command::Scenarios(_) => {
            let d = design(c)?;
            let m = get_scenarios(&d, required(c.p1, "p1")?)?;
            let labels = m.labels();
            let mut columns = vec!["basket"];
            columns.extend(labels.iter().map(String::as_str));
            let mut r = Report::new(&columns);
            for b in 0..d.k() {
                let mut row = vec![Cell::from(b + 1)];
                row.extend((0..labels.len()).map(|j| Cell::from(m.get(b, j))));
                r.row(row);
            }
            r
        }
        Command::OptDesign(_) => {
            let d = design(c)?;
            let l = layout(c)?;
            let grid = weight_grid(c)?;
            let scenarios = get_scenarios(&d, required(c.p1, "p1")?)?;
            let req = CalibrationRequest::new(required(c.alpha, "alpha")?, c.prec_digits)?;
            let table = opt_design(&d, &l, &grid, interim(c, &l)?.as_ref(), &scenarios, &req)?;
            for f in &table.failed {
                eprintln!("warning: {} skipped: {}", param_label(&f.config), f.error);
            }
            if table.rows.is_empty() {
                let first = table.failed.into_iter().next().expect("grid is not empty");
                return Err(first.error.into());
            }
            let mut columns = vec!["rank"];
            columns.extend(param_columns(c));
            columns.push("lambda");
            columns.extend(table.scenario_labels.iter().map(String::as_str));
            columns.push("mean_ecd");
            let mut r = Report::new(&columns);
            for (rank, row) in table.rows.iter().enumerate() {
                let mut cells = vec![Cell::from(rank + 1)];
                cells.extend(param_cells(&row.config));
                cells.push(row.lambda.into());
                cells.extend(row.ecd.iter().map(|&e| Cell::from(e)));
                cells.push(row.mean_ecd.into());
                r.row(cells);
            }
            r
        }
        Command::PlotWeights(_) => {
            let n = required(c.n, "n")?;
            let r1 = required(c.r1, "r1")?;
            let prior = BetaParams::new(c.shape1, c.shape2)?;
            let d = DesignSpec::new(c.k.unwrap_or(2), prior, c.p0.unwrap_or(0.2))?;
            let mut columns = param_columns(c);
            columns.extend(["r2", "weight"]);
            let mut r = Report::new(&columns);
            let mut series = Vec::new();
            for config in weight_grid(c)? {
                let curve = weight_curve(n, r1, &d, &config)?;
                for &(r2, w) in &curve {
                    let mut cells = param_cells(&config);
                    cells.extend([Cell::from(r2), Cell::from(w)]);
                    r.row(cells);
                }
                series.push(Series {
                    label: param_label(&config),
                    points: curve.iter().map(|&(x, y)| (x as f64, y)).collect(),
                });
            }
            return Ok((r, Some(series)));
        }
        Command::Simulate(_) => {
            let d = design(c)?;
            let l = layout(c)?;
            let sc = scenario(c, &d)?;
            let sim = SimConfig::new(c.replicates, c.seed)?;
            let res = simulate_oc(&d, &l, required(c.lambda, "lambda")?, &weight_config(c)?, interim(c, &l)?.as_ref(), &sc, &sim)?;
            let (m, se) = (&res.estimate, &res.se);
            let columns = [
                "rejection_prob",
                "rejection_prob_se",
                "ess",
                "ess_se",
                "mean_posterior_mean",
                "mean_posterior_mean_se",
                "mse",
                "mse_se",
            ];
            let mut r = per_basket(&sc, &columns, |_| true, |i| {
                vec![
                    m.rejection_prob[i].into(),
                    se.rejection_prob[i].into(),
                    m.ess[i].into(),
                    se.ess[i].into(),
                    m.estim[i].mean_posterior_mean.into(),
                    se.estim[i].mean_posterior_mean.into(),
                    m.estim[i].mse.into(),
                    se.estim[i].mse.into(),
                ]
            });
            for (name, v, s) in [
                ("fwer", m.fwer, se.fwer),
                ("family_power", m.family_power, se.family_power),
                ("ecd", m.ecd, se.ecd),
                ("ess_total", m.ess_total, se.ess_total),
            ] {
                r.summary(name, v);
                r.summary(&format!("{name}_se"), s);
            }
            r.summary("replicates", Cell::Int(res.replicates as i64));
            r.summary("seed", Cell::Text(c.seed.to_string()));
            r
        }
    };
    Ok((report, None))
}

pub fn write_svg(path: &std::path::Path, series: &[Series]) -> Result<(), CliError> {
    std::fs::write(path, svg::line_chart(series, "responses in basket 2", "weight"))?;
    Ok(())
}
