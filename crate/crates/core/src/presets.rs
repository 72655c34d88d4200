//! Built-in parameter sets and published reference values.
//!
//! Sets A–F and the 18 "HL" baskets (d = 8, S0 = 40, r = 0.05, rho = 0.8).
//! HL ids have the form `HL-<T>-<K>-<sigma1>`, e.g. `HL-1-40-0.3`.

use crate::error::{Error, Result};
use crate::model::{BasketSpec, ExerciseStyle};

pub const HL_MATURITIES: [f64; 3] = [0.5, 1.0, 2.0];
pub const HL_STRIKES: [f64; 3] = [35.0, 40.0, 45.0];
pub const HL_SIGMA1: [f64; 2] = [0.3, 0.9];

/// Equal weights, constant correlation and volatility, `S0 = spot * 1`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_corr_spec(
    d: usize,
    strike: f64,
    maturity: f64,
    rate: f64,
    vol: f64,
    rho: f64,
    spot: f64,
    style: ExerciseStyle,
) -> BasketSpec {
    let corr = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect())
        .collect();
    BasketSpec {
        strike,
        maturity,
        rate,
        weights: vec![1.0 / d as f64; d],
        vols: vec![vol; d],
        corr,
        spot: vec![spot; d],
        style,
    }
}

pub fn set_a(style: ExerciseStyle) -> BasketSpec {
    let corr = vec![
        vec![1.00, 0.79, 0.82, 0.91, 0.84],
        vec![0.79, 1.00, 0.73, 0.80, 0.76],
        vec![0.82, 0.73, 1.00, 0.77, 0.72],
        vec![0.91, 0.80, 0.77, 1.00, 0.90],
        vec![0.84, 0.76, 0.72, 0.90, 1.00],
    ];
    BasketSpec {
        strike: 1.0,
        maturity: 1.0,
        rate: 0.05,
        weights: vec![0.381, 0.065, 0.057, 0.270, 0.227],
        vols: vec![0.518, 0.648, 0.623, 0.570, 0.530],
        corr,
        spot: vec![1.0; 5],
        style,
    }
}

pub fn set_b(style: ExerciseStyle) -> BasketSpec {
    uniform_corr_spec(10, 40.0, 1.0, 0.06, 0.2, 0.25, 40.0, style)
}

pub fn set_c(style: ExerciseStyle) -> BasketSpec {
    uniform_corr_spec(15, 40.0, 1.0, 0.06, 0.2, 0.25, 40.0, style)
}

/// Sets D/E/F: `rho_ij = exp(-0.0413 |i - j|)`.
pub fn exponential_corr_set(d: usize, style: ExerciseStyle) -> BasketSpec {
    let mu = 0.0413;
    let mut spec = uniform_corr_spec(d, 100.0, 1.0, 0.04, 0.3, 0.0, 100.0, style);
    for i in 0..d {
        for j in 0..d {
            spec.corr[i][j] = if i == j {
                1.0
            } else {
                (-mu * (i as f64 - j as f64).abs()).exp()
            };
        }
    }
    spec
}

pub fn hl(maturity: f64, strike: f64, sigma1: f64, style: ExerciseStyle) -> BasketSpec {
    let mut spec = uniform_corr_spec(8, strike, maturity, 0.05, 0.0, 0.8, 40.0, style);
    spec.vols = vec![sigma1, 0.6, 0.1, 0.9, 0.3, 0.7, 0.8, 0.2];
    spec
}

pub fn hl_id(maturity: f64, strike: f64, sigma1: f64) -> String {
    format!("HL-{maturity}-{strike}-{sigma1}")
}

/// Resolves a preset id (`A`..`F` or `HL-<T>-<K>-<sigma1>`).
pub fn lookup(id: &str, style: ExerciseStyle) -> Result<BasketSpec> {
    let unknown = || Error::Domain(format!("unknown preset `{id}`"));
    match id.trim().to_ascii_uppercase().as_str() {
        "A" => Ok(set_a(style)),
        "B" => Ok(set_b(style)),
        "C" => Ok(set_c(style)),
        "D" => Ok(exponential_corr_set(5, style)),
        "E" => Ok(exponential_corr_set(10, style)),
        "F" => Ok(exponential_corr_set(15, style)),
        other => {
            let rest = other.strip_prefix("HL-").ok_or_else(unknown)?;
            let parts: Vec<f64> = rest
                .split('-')
                .map(|p| p.parse::<f64>().map_err(|_| unknown()))
                .collect::<Result<_>>()?;
            let [t, k, s1] = parts[..] else {
                return Err(unknown());
            };
            let allowed = HL_MATURITIES.contains(&t) && HL_STRIKES.contains(&k) && HL_SIGMA1.contains(&s1);
            if !allowed {
                return Err(unknown());
            }
            Ok(hl(t, k, s1, style))
        }
    }
}

pub fn set_ids() -> Vec<String> {
    ["A", "B", "C", "D", "E", "F"].iter().map(|s| s.to_string()).collect()
}

/// HL ids in table order: maturity, then strike, then sigma1.
pub fn hl_ids() -> Vec<String> {
    let mut ids = Vec::new();
    for t in HL_MATURITIES {
        for k in HL_STRIKES {
            for s in HL_SIGMA1 {
                ids.push(hl_id(t, k, s));
            }
        }
    }
    ids
}

pub fn all_presets(style: ExerciseStyle) -> Vec<(String, BasketSpec)> {
    set_ids()
        .into_iter()
        .chain(hl_ids())
        .map(|id| {
            let spec = lookup(&id, style).expect("built-in id");
            (id, spec)
        })
        .collect()
}

/// One row of a published reference table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub id: &'static str,
    pub pca: f64,
    pub app: f64,
    pub low: f64,
}

const fn row(id: &'static str, pca: f64, app: f64, low: f64) -> ReferenceRow {
    ReferenceRow { id, pca, app, low }
}

/// Reference table 1: European, Sets A–F, m = N = 1000.
pub const TABLE_1: [ReferenceRow; 6] = [
    row("A", 0.17577, 0.17583, 0.17577),
    row("B", 0.83257, 0.84125, 0.83942),
    row("C", 0.77065, 0.78083, 0.77955),
    row("D", 9.46550, 9.46570, 9.46523),
    row("E", 9.10039, 9.10128, 9.09974),
    row("F", 8.76358, 8.76554, 8.76255),
];

/// Reference table 2: American, Sets A–F, m = N = 1000.
pub const TABLE_2: [ReferenceRow; 6] = [
    row("A", 0.18110, 0.18120, 0.18114),
    row("B", 1.07928, 1.08615, 1.08431),
    row("C", 1.01641, 1.02435, 1.02306),
    row("D", 9.86176, 9.86206, 9.86159),
    row("E", 9.49645, 9.49774, 9.49620),
    row("F", 9.15935, 9.16219, 9.15920),
];

/// Reference table 3: European HL baskets.
pub const TABLE_3: [ReferenceRow; 18] = [
    row("HL-0.5-35-0.3", 2.13020, 2.13271, 2.12954),
    row("HL-0.5-35-0.9", 2.74982, 2.75307, 2.74963),
    row("HL-0.5-40-0.3", 4.40336, 4.40715, 4.40328),
    row("HL-0.5-40-0.9", 5.14582, 5.15003, 5.14595),
    row("HL-0.5-45-0.3", 7.45442, 7.45827, 7.45427),
    row("HL-0.5-45-0.9", 8.21316, 8.21738, 8.21313),
    row("HL-1-35-0.3", 3.35805, 3.36599, 3.35620),
    row("HL-1-35-0.9", 4.23834, 4.24750, 4.23731),
    row("HL-1-40-0.3", 5.78199, 5.79261, 5.78114),
    row("HL-1-40-0.9", 6.79656, 6.80770, 6.79599),
    row("HL-1-45-0.3", 8.75406, 8.76551, 8.75329),
    row("HL-1-45-0.9", 9.82315, 9.83486, 9.82235),
    row("HL-2-35-0.3", 4.71159, 4.73545, 4.70532),
    row("HL-2-35-0.9", 5.89254, 5.91682, 5.88742),
    row("HL-2-40-0.3", 7.20593, 7.23607, 7.20149),
    row("HL-2-40-0.9", 8.54494, 8.57378, 8.54048),
    row("HL-2-45-0.3", 10.08246, 10.11611, 10.07862),
    row("HL-2-45-0.9", 11.51843, 11.54974, 11.51371),
];

/// Reference table 4: American HL baskets.
pub const TABLE_4: [ReferenceRow; 18] = [
    row("HL-0.5-35-0.3", 2.17006, 2.17293, 2.16973),
    row("HL-0.5-35-0.9", 2.79440, 2.79840, 2.79494),
    row("HL-0.5-40-0.3", 4.50018, 4.50506, 4.50118),
    row("HL-0.5-40-0.9", 5.24177, 5.24795, 5.24387),
    row("HL-0.5-45-0.3", 7.64424, 7.65063, 7.64670),
    row("HL-0.5-45-0.9", 8.38729, 8.39562, 8.39142),
    row("HL-1-35-0.3", 3.48012, 3.48874, 3.47879),
    row("HL-1-35-0.9", 4.37236, 4.38280, 4.37246),
    row("HL-1-40-0.3", 6.01652, 6.02870, 6.01717),
    row("HL-1-40-0.9", 7.03281, 7.04676, 7.03498),
    row("HL-1-45-0.3", 9.14612, 9.16072, 9.14867),
    row("HL-1-45-0.9", 10.19561, 10.21256, 10.20013),
    row("HL-2-35-0.3", 5.06452, 5.08982, 5.05865),
    row("HL-2-35-0.9", 6.27930, 6.30536, 6.27500),
    row("HL-2-40-0.3", 7.78521, 7.81748, 7.78222),
    row("HL-2-40-0.9", 9.14045, 9.17258, 9.13855),
    row("HL-2-45-0.3", 10.94634, 10.98327, 10.94585),
    row("HL-2-45-0.9", 12.36710, 12.40399, 12.36770),
];

/// Table number (1–4) to its rows and exercise style.
pub fn reference_table(which: u8) -> Option<(ExerciseStyle, &'static [ReferenceRow])> {
    match which {
        1 => Some((ExerciseStyle::European, &TABLE_1[..])),
        2 => Some((ExerciseStyle::American, &TABLE_2[..])),
        3 => Some((ExerciseStyle::European, &TABLE_3[..])),
        4 => Some((ExerciseStyle::American, &TABLE_4[..])),
        _ => None,
    }
}

/// Published row for a preset id and style, if there is one.
pub fn reference_for(id: &str, style: ExerciseStyle) -> Option<ReferenceRow> {
    let tables: [u8; 2] = match style {
        ExerciseStyle::European => [1, 3],
        ExerciseStyle::American => [2, 4],
    };
    let key = lookup(id, style).ok()?;
    tables
        .iter()
        .flat_map(|&t| reference_table(t).unwrap().1.iter())
        .find(|r| lookup(r.id, style).map(|s| s == key).unwrap_or(false))
        .copied()
}
