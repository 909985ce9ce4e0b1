//! Reference target functions used by the figure presets.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::reconstruction::TargetFunction;

const FIXED: [(&str, usize); 12] = [
    ("fig1_cc", 1),
    ("fig1_lc", 1),
    ("fig1_lu", 1),
    ("fig2_lu_d2", 2),
    ("fig2_cc_d3", 3),
    ("fig2_lc_d4", 4),
    ("fig3_cc_d3", 3),
    ("fig3_cc_d5", 5),
    ("fig3_cc_d10", 10),
    ("fig4_lu_d3", 3),
    ("fig4_lu_d5", 5),
    ("fig4_lu_d10", 10),
];

/// Ids accepted by [`builtin_function`], with their dimensions. `zero_d<k>`
/// is accepted for any `k >= 1` and listed once as a pattern.
pub fn builtin_ids() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = FIXED.iter().map(|(id, d)| (id.to_string(), d.to_string())).collect();
    out.push(("zero".into(), "1".into()));
    out.push(("zero_d<k>".into(), "k".into()));
    out
}

fn formula(id: &str) -> &'static str {
    match id {
        "fig1_cc" => "cos(36 sqrt(2) t + 1/3)",
        "fig1_lc" => "(1 + 3t) / (1 + 50 t^2)",
        "fig1_lu" => "sqrt(1.05 + t)",
        "fig2_lu_d2" => "exp(2 t1) cos(3 t2)",
        "fig2_cc_d3" => "sin(0.5 exp(t1 t2 t3))",
        "fig2_lc_d4" => "exp(-(t1 + t2 + t3 + t4) / 6)",
        _ if id.starts_with("fig3") => "exp(-(t1 + ... + td) / (2d))",
        _ if id.starts_with("fig4") => "exp(-(t1 + ... + td) / d)",
        _ => "0",
    }
}

/// `(id, dimension, formula)` for every builtin, in listing order.
pub fn builtin_catalog() -> Vec<(String, String, &'static str)> {
    builtin_ids()
        .into_iter()
        .map(|(id, d)| {
            let f = formula(&id);
            (id, d, f)
        })
        .collect()
}

fn unknown(id: &str) -> Error {
    let available: Vec<String> = builtin_ids().into_iter().map(|(id, _)| id).collect();
    Error::UnknownFunction { id: id.to_string(), available: available.join(", ") }
}

/// Looks up a builtin target function by id.
pub fn builtin_function(id: &str) -> Result<TargetFunction> {
    let f = match id {
        "fig1_cc" => TargetFunction::new(id, 1, |t| (36.0 * SQRT_2 * t[0] + 1.0 / 3.0).cos()),
        "fig1_lc" => TargetFunction::new(id, 1, |t| (1.0 + 3.0 * t[0]) / (1.0 + 50.0 * t[0] * t[0])),
        "fig1_lu" => TargetFunction::new(id, 1, |t| (1.05 + t[0]).sqrt()),
        "fig2_lu_d2" => TargetFunction::new(id, 2, |t| (2.0 * t[0]).exp() * (3.0 * t[1]).cos()),
        "fig2_cc_d3" => TargetFunction::new(id, 3, |t| (0.5 * (t[0] * t[1] * t[2]).exp()).sin()),
        "fig2_lc_d4" => TargetFunction::new(id, 4, |t| (-t.iter().sum::<f64>() / 6.0).exp()),
        "zero" => TargetFunction::new(id, 1, |_| 0.0),
        _ => {
            let Some((family, d)) = id.rsplit_once("_d") else { return Err(unknown(id)) };
            let Ok(d) = d.parse::<usize>() else { return Err(unknown(id)) };
            match family {
                "zero" if d >= 1 => TargetFunction::new(id, d, |_| 0.0),
                "fig3_cc" if matches!(d, 3 | 5 | 10) => {
                    let scale = 2.0 * d as f64;
                    TargetFunction::new(id, d, move |t| (-t.iter().sum::<f64>() / scale).exp())
                }
                "fig4_lu" if matches!(d, 3 | 5 | 10) => {
                    let scale = d as f64;
                    TargetFunction::new(id, d, move |t| (-t.iter().sum::<f64>() / scale).exp())
                }
                _ => return Err(unknown(id)),
            }
        }
    };
    Ok(f)
}
