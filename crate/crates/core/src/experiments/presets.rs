//! Shipped experiment configs, one per figure panel, at two scales.

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::index_sets::IndexSetKind;
use crate::poly_basis::Scenario;
use crate::solver::SolverOptions;
use crate::weights::WeightStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// The published sizes: 50 trials and the full `K`.
    Paper,
    /// Desk scale: `K` divided by 4 (rounded up) and 20 trials.
    Fast,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Paper => "paper",
            Scale::Fast => "fast",
        }
    }
}

struct Panel {
    name: String,
    scenario: Scenario,
    function_id: String,
    d: usize,
    kind: IndexSetKind,
    k: u32,
    strategy: WeightStrategy,
    parameters: &'static [f64],
    paper_m: &'static [usize],
    fast_m: &'static [usize],
}

const ALPHAS: &[f64] = &[0.0, 1.0, 2.0];
const THETAS: &[f64] = &[0.0, 0.5, 1.0, 2.0];
const FIG1_M: &[usize] = &[50, 100, 150, 200, 250, 300, 400, 500];
const FIG2_M: &[usize] = &[50, 100, 150, 200, 300, 400, 500];
const FIG34_M: &[usize] = &[50, 100, 200, 300, 400, 600];

#[allow(clippy::too_many_arguments)]
fn panel(
    name: String,
    scenario: Scenario,
    function_id: &str,
    d: usize,
    k: u32,
    strategy: &WeightStrategy,
    paper_m: &'static [usize],
    fast_m: &'static [usize],
) -> Panel {
    let (kind, parameters) = match strategy {
        WeightStrategy::PolynomialGrowth { .. } => (IndexSetKind::TP, ALPHAS),
        WeightStrategy::IntrinsicPower { .. } => (IndexSetKind::TD, THETAS),
        _ => (IndexSetKind::TD, ALPHAS),
    };
    Panel {
        name,
        scenario,
        function_id: function_id.into(),
        d,
        kind,
        k,
        strategy: strategy.clone(),
        parameters,
        paper_m,
        fast_m,
    }
}

fn panels() -> Vec<Panel> {
    let poly = WeightStrategy::PolynomialGrowth { alpha: 0.0 };
    let intrinsic = WeightStrategy::IntrinsicPower { theta: 0.0 };
    let mut out = vec![
        panel("fig1_cc".into(), Scenario::CC, "fig1_cc", 1, 1000, &poly, FIG1_M, &[40, 80, 120, 160]),
        panel("fig1_lc".into(), Scenario::LC, "fig1_lc", 1, 1000, &poly, FIG1_M, &[20, 40, 60, 80, 120]),
        panel("fig1_lu".into(), Scenario::LU, "fig1_lu", 1, 1000, &poly, FIG1_M, &[20, 40, 60, 80, 120]),
    ];
    for (row, strategy) in [
        ("product", WeightStrategy::AnisotropicProduct { alpha: 0.0 }),
        ("degree", WeightStrategy::TotalDegreeGrowth { alpha: 0.0 }),
    ] {
        out.push(panel(
            format!("fig2_lu_d2_{row}"),
            Scenario::LU,
            "fig2_lu_d2",
            2,
            44,
            &strategy,
            FIG2_M,
            &[10, 20, 30, 40, 60],
        ));
        out.push(panel(
            format!("fig2_cc_d3_{row}"),
            Scenario::CC,
            "fig2_cc_d3",
            3,
            17,
            &strategy,
            FIG2_M,
            &[10, 20, 30, 40, 50],
        ));
        out.push(panel(
            format!("fig2_lc_d4_{row}"),
            Scenario::LC,
            "fig2_lc_d4",
            4,
            10,
            &strategy,
            FIG2_M,
            &[8, 12, 16, 24, 32],
        ));
    }
    for (fig, scenario) in [("fig3_cc", Scenario::CC), ("fig4_lu", Scenario::LU)] {
        for (d, k, fast_m) in [
            (3usize, 24u32, &[10usize, 20, 40, 60, 80][..]),
            (5, 10, &[10, 20, 30, 40, 50]),
            (10, 5, &[10, 20, 40, 60]),
        ] {
            let id = format!("{fig}_d{d}");
            out.push(panel(id.clone(), scenario, &id, d, k, &intrinsic, FIG34_M, fast_m));
        }
    }
    out
}

/// Names of all shipped presets, in figure order.
pub fn preset_names() -> Vec<String> {
    panels().into_iter().map(|p| p.name).collect()
}

/// The preset called `name` at the given scale.
pub fn preset(name: &str, scale: Scale) -> Result<ExperimentConfig> {
    let panels = panels();
    let Some(p) = panels.iter().find(|p| p.name == name) else {
        let names: Vec<&str> = panels.iter().map(|p| p.name.as_str()).collect();
        return Err(Error::Config(format!("unknown preset {name}; available: {}", names.join(", "))));
    };
    let (k, trials, m_values) = match scale {
        Scale::Paper => (p.k, 50, p.paper_m),
        Scale::Fast => (p.k.div_ceil(4), 20, p.fast_m),
    };
    Ok(ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: Some(format!("{}_{}", p.name, scale.name())),
        scenario: p.scenario,
        function_id: p.function_id.clone(),
        d: p.d,
        index_set_kind: p.kind,
        k,
        weight_strategy: p.strategy.clone(),
        parameters: p.parameters.to_vec(),
        m_values: m_values.to_vec(),
        trials,
        eta: 0.0,
        base_seed: 20_170_101,
        solver_opts: SolverOptions::default(),
    })
}

/// Every preset at both scales.
pub fn all_presets() -> Vec<ExperimentConfig> {
    preset_names()
        .into_iter()
        .flat_map(|n| [Scale::Paper, Scale::Fast].map(|s| preset(&n, s).expect("shipped preset")))
        .collect()
}
