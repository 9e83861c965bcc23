//! Subcommand bodies. Each returns the complete output document, so callers
//! decide where it goes and tests can compare bytes directly.

use isac_core::analysis::{average_dg_closed_form, binary_error_probability, union_lower_bound};
use isac_core::sim::{self, SweepResult};
use isac_core::{FeatureModel, SynthesisParams};

use crate::config::{linear_to_db, BetaSweepConfig, ClosedFormsConfig, PowerSweepConfig};
use crate::error::CliError;
use crate::table::{num, Csv};

pub const POWER_COLUMNS: [&str; 6] = [
    "p_c_db",
    "criterion",
    "total_dg_mean",
    "error_bound",
    "accuracy",
    "stderr",
];
pub const BETA_COLUMNS: [&str; 5] = ["beta", "criterion", "total_dg_mean", "accuracy", "stderr"];
pub const CLOSED_FORM_COLUMNS: [&str; 7] = [
    "quantity",
    "x",
    "closed_form",
    "reference_q",
    "monte_carlo",
    "rel_error",
    "valid",
];

pub fn gen_model(params: &SynthesisParams) -> Result<String, CliError> {
    Ok(FeatureModel::synthesize(params)?.to_toml_string())
}

/// Rows of all criteria, grouped by grid point in criterion order.
fn interleave(results: &[SweepResult]) -> Vec<&sim::SweepRow> {
    let points = results.first().map_or(0, |r| r.rows.len());
    (0..points)
        .flat_map(|i| results.iter().map(move |r| &r.rows[i]))
        .collect()
}

pub fn sweep_power(cfg: &PowerSweepConfig) -> Result<Csv, CliError> {
    let c = &cfg.common;
    let results = c
        .criteria
        .criteria()
        .iter()
        .map(|&criterion| {
            sim::sweep_power(&c.model, &cfg.sensing, criterion, &cfg.comm_powers, &c.sim)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&POWER_COLUMNS);
    cfg.header().into_iter().for_each(|l| csv.comment(l));
    for row in interleave(&results) {
        csv.row(vec![
            num(linear_to_db(row.value)),
            row.criterion.to_string(),
            num(row.total_dg_mean),
            num(row.error_bound),
            num(row.accuracy),
            num(row.stderr),
        ]);
    }
    Ok(csv)
}

pub fn sweep_beta(cfg: &BetaSweepConfig) -> Result<Csv, CliError> {
    let c = &cfg.common;
    let results = c
        .criteria
        .criteria()
        .iter()
        .map(|&criterion| {
            sim::sweep_beta(
                &c.model,
                cfg.sensing_noise,
                cfg.total_power,
                criterion,
                &cfg.betas,
                &c.sim,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&BETA_COLUMNS);
    cfg.header().into_iter().for_each(|l| csv.comment(l));
    csv.comment(
        "rows with criterion argmax_<criterion> repeat that criterion's most accurate beta",
    );
    let cells = |label: String, row: &sim::SweepRow| {
        vec![
            num(row.value),
            label,
            num(row.total_dg_mean),
            num(row.accuracy),
            num(row.stderr),
        ]
    };
    for row in interleave(&results) {
        csv.row(cells(row.criterion.to_string(), row));
    }
    for r in &results {
        let label = format!("argmax_{}", r.criterion);
        match r.argmax_accuracy() {
            Some(best) => csv.row(cells(label, best)),
            None => csv.row(vec![
                "nan".into(),
                label,
                "nan".into(),
                "nan".into(),
                "nan".into(),
            ]),
        }
    }
    Ok(csv)
}

pub fn closed_forms(cfg: &ClosedFormsConfig) -> Result<Csv, CliError> {
    let mut csv = Csv::new(&CLOSED_FORM_COLUMNS);
    cfg.header().into_iter().for_each(|l| csv.comment(l));
    csv.comment("average_dg: x = rho; monte_carlo averages over |h|^2 ~ Exp(1)");
    csv.comment(format!(
        "union_bound: x = dg_min; monte_carlo is the ML error of {} equally spaced classes",
        cfg.num_classes
    ));
    for &rho in &cfg.rhos {
        let closed = average_dg_closed_form(cfg.dg_max, rho)?;
        let mc = sim::monte_carlo_average_dg(cfg.dg_max, rho, cfg.draws, cfg.seed)?;
        csv.row(vec![
            "average_dg".into(),
            num(rho),
            num(closed),
            "nan".into(),
            num(mc),
            num((closed - mc).abs() / closed),
            "true".into(),
        ]);
    }
    for &dg in &cfg.dgs {
        let bound = union_lower_bound(dg, cfg.num_classes)?;
        let (mc, _) = sim::monte_carlo_line_error(dg, cfg.num_classes, cfg.draws, cfg.seed)?;
        csv.row(vec![
            "union_bound".into(),
            num(dg),
            num(bound.value),
            num(binary_error_probability(dg)),
            num(mc),
            num((bound.value - mc).abs() / bound.value),
            bound.is_informative().to_string(),
        ]);
    }
    Ok(csv)
}
