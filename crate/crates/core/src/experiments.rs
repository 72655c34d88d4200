//! Experiment runners behind the command-line tool: single prices, the
//! reference tables, spatial convergence and the EP/IT temporal study.
//!
//! Every runner returns plain records; [`Csv`] renders them with a header
//! row and ten significant digits so that identical inputs give
//! byte-identical output.

use std::fmt::Write as _;
use std::time::Instant;

use crate::engines::{comonotonic_price, pca_price, ComonotonicPrice, PcaPrice};
use crate::error::{Error, Result};
use crate::model::{BasketSpec, ExerciseStyle};
use crate::oracles::{bs_put, crr_american_put, mc_european_basket};
use crate::presets::{self, ReferenceRow};
use crate::stepper::ConstraintMode;

/// Formats `x` with ten significant digits, in positional notation when
/// the magnitude allows.
pub fn sig10(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding may carry into a new leading digit; the digit count is
        // then one too many only in the last place, which is harmless.
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.9e}")
    }
}

/// A CSV table under construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig10).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pca,
    Comonotonic,
    Both,
}

impl Method {
    pub fn pca(self) -> bool {
        matches!(self, Method::Pca | Method::Both)
    }

    pub fn comonotonic(self) -> bool {
        matches!(self, Method::Comonotonic | Method::Both)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "comonotonic" | "como" => Ok(Method::Comonotonic),
            "both" => Ok(Method::Both),
            other => Err(Error::Domain(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub label: String,
    pub style: ExerciseStyle,
    pub m: usize,
    pub n: usize,
    pub mode: ConstraintMode,
    pub pca: Option<PcaPrice>,
    pub comonotonic: Option<ComonotonicPrice>,
    pub seconds: f64,
}

impl PriceReport {
    pub fn csv_header() -> Csv {
        Csv::new(&["preset", "style", "m", "n", "mode", "pca", "app", "low", "up", "z"])
    }

    /// Appends this report to `csv` (wall time is left out to keep the
    /// output reproducible).
    pub fn write_row(&self, csv: &mut Csv) {
        let c = self.comonotonic.as_ref();
        csv.row(&[
            self.label.clone(),
            self.style.as_str().into(),
            self.m.to_string(),
            self.n.to_string(),
            self.mode.as_str().into(),
            opt(self.pca.as_ref().map(|p| p.value)),
            opt(c.map(|c| c.app)),
            opt(c.map(|c| c.low)),
            opt(c.map(|c| c.up)),
            opt(c.map(|c| c.weights.z)),
        ]);
    }
}

fn check_grid(m: usize, n: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::Domain(format!("m must be at least 3, got {m}")));
    }
    if n < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    Ok(())
}

pub fn price(label: &str, spec: &BasketSpec, method: Method, m: usize, n: usize, mode: ConstraintMode) -> Result<PriceReport> {
    check_grid(m, n)?;
    let start = Instant::now();
    let pca = method.pca().then(|| pca_price(spec, m, n, mode)).transpose()?;
    let comonotonic = method.comonotonic().then(|| comonotonic_price(spec, m, n, mode)).transpose()?;
    let mode = match spec.style {
        ExerciseStyle::European => ConstraintMode::Unconstrained,
        ExerciseStyle::American => mode,
    };
    Ok(PriceReport {
        label: label.into(),
        style: spec.style,
        m,
        n,
        mode,
        pca,
        comonotonic,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Allowed deviation from a published value of table `which`.
pub fn table_tolerance(which: u8, id: &str, reference: f64) -> f64 {
    match which {
        1 | 2 if id == "A" => 1e-3,
        1 | 2 => f64::max(2e-3, 5e-4 * reference.abs()),
        _ => 5e-3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub reference: ReferenceRow,
    pub style: ExerciseStyle,
    pub pca: f64,
    pub app: f64,
    pub low: f64,
    /// Not published; kept for the between-bounds check.
    pub up: f64,
    pub z: f64,
    pub tolerance: f64,
}

impl TableRow {
    pub fn deviations(&self) -> [f64; 3] {
        [
            (self.pca - self.reference.pca).abs(),
            (self.app - self.reference.app).abs(),
            (self.low - self.reference.low).abs(),
        ]
    }

    pub fn within_tolerance(&self) -> bool {
        self.deviations().iter().all(|d| *d <= self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableResult {
    pub which: u8,
    pub m: usize,
    pub n: usize,
    pub rows: Vec<TableRow>,
}

impl TableResult {
    pub fn all_within_tolerance(&self) -> bool {
        self.rows.iter().all(TableRow::within_tolerance)
    }

    /// For HL tables: values increase with the strike at fixed maturity and
    /// `sigma_1`, for each of the three approximations.
    pub fn monotone_in_strike(&self) -> bool {
        let key = |r: &TableRow| {
            let id = r.reference.id;
            let parts: Vec<&str> = id.split('-').collect();
            (parts[1].to_string(), parts[3].to_string(), parts[2].parse::<f64>().unwrap_or(0.0))
        };
        let hl: Vec<&TableRow> = self.rows.iter().filter(|r| r.reference.id.starts_with("HL-")).collect();
        hl.iter().all(|a| {
            hl.iter().all(|b| {
                let (ka, kb) = (key(a), key(b));
                !(ka.0 == kb.0 && ka.1 == kb.1 && ka.2 < kb.2) || (a.pca < b.pca && a.app < b.app && a.low < b.low)
            })
        })
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&[
            "preset", "style", "pca", "app", "low", "ref_pca", "ref_app", "ref_low", "dev_pca", "dev_app", "dev_low",
            "tolerance", "pass", "up", "z",
        ]);
        for r in &self.rows {
            let dev = r.deviations();
            csv.row(&[
                r.reference.id.into(),
                r.style.as_str().into(),
                sig10(r.pca),
                sig10(r.app),
                sig10(r.low),
                sig10(r.reference.pca),
                sig10(r.reference.app),
                sig10(r.reference.low),
                sig10(dev[0]),
                sig10(dev[1]),
                sig10(dev[2]),
                sig10(r.tolerance),
                r.within_tolerance().to_string(),
                sig10(r.up),
                sig10(r.z),
            ]);
        }
        csv
    }
}

/// Recomputes published table `which` (1–4) on an `m x m` grid with `n`
/// time steps. American rows use `mode`.
pub fn tables(which: u8, m: usize, n: usize, mode: ConstraintMode) -> Result<TableResult> {
    check_grid(m, n)?;
    let (style, reference) =
        presets::reference_table(which).ok_or_else(|| Error::Domain(format!("no table {which}, expected 1-4")))?;
    let rows = reference
        .iter()
        .map(|r| {
            let spec = presets::lookup(r.id, style)?;
            let pca = pca_price(&spec, m, n, mode)?.value;
            let como = comonotonic_price(&spec, m, n, mode)?;
            Ok(TableRow {
                reference: *r,
                style,
                pca,
                app: como.app,
                low: como.low,
                up: como.up,
                z: como.weights.z,
                tolerance: table_tolerance(which, r.id, r.pca),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableResult { which, m, n, rows })
}

/// Least-squares slope of `ln err` against `ln(1/h)`, skipping zero errors
/// and points that drop below 1% of both neighbours (sign changes of the
/// error).
pub fn fitted_order(sizes: &[usize], errors: &[f64]) -> Option<f64> {
    let keep = drop_mask(errors);
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(errors)
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((s, e), _)| ((*s as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// `true` for points used in the fit.
pub fn drop_mask(errors: &[f64]) -> Vec<bool> {
    (0..errors.len())
        .map(|i| {
            let e = errors[i];
            if !(e > 0.0 && e.is_finite()) {
                return false;
            }
            let neighbours = [i.checked_sub(1), (i + 1 < errors.len()).then_some(i + 1)];
            let near: Vec<f64> = neighbours.iter().flatten().map(|&j| errors[j]).collect();
            near.is_empty() || near.iter().any(|&x| e >= 1e-2 * x)
        })
        .collect()
}

/// Values of the approximations selected by `method`, PCA first.
fn values(spec: &BasketSpec, method: Method, m: usize, n: usize, mode: ConstraintMode) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if method.pca() {
        out.push(pca_price(spec, m, n, mode)?.value);
    }
    if method.comonotonic() {
        out.push(comonotonic_price(spec, m, n, mode)?.app);
    }
    Ok(out)
}

fn method_labels(method: Method) -> Vec<&'static str> {
    let mut v = Vec::new();
    if method.pca() {
        v.push("pca");
    }
    if method.comonotonic() {
        v.push("app");
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub label: &'static str,
    pub reference: f64,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub sizes: Vec<usize>,
    pub series: Vec<ConvergenceSeries>,
}

impl ConvergenceResult {
    pub fn to_csv(&self) -> Csv {
        let mut header = vec!["m".to_string()];
        for s in &self.series {
            header.push(format!("{}_value", s.label));
            header.push(format!("{}_error", s.label));
        }
        let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for (i, m) in self.sizes.iter().enumerate() {
            let mut cells = vec![m.to_string()];
            for s in &self.series {
                cells.push(sig10(s.values[i]));
                cells.push(sig10(s.errors[i]));
            }
            csv.row(&cells);
        }
        csv
    }

    pub fn summary(&self) -> String {
        self.series
            .iter()
            .map(|s| format!("{}: reference {}, slope {}", s.label, sig10(s.reference), opt(s.slope)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Spatial-temporal convergence with `N = m`. The reference is either
/// supplied per method (PCA first) or computed at `m = N = reference_m`.
pub fn converge(
    spec: &BasketSpec,
    method: Method,
    sizes: &[usize],
    mode: ConstraintMode,
    reference: Option<&[f64]>,
    reference_m: usize,
) -> Result<ConvergenceResult> {
    for &m in sizes {
        check_grid(m, m)?;
    }
    let reference = match reference {
        Some(r) => r.to_vec(),
        None => values(spec, method, reference_m, reference_m, mode)?,
    };
    let runs = sizes
        .iter()
        .map(|&m| values(spec, method, m, m, mode))
        .collect::<Result<Vec<_>>>()?;
    let series = method_labels(method)
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let values: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            let errors: Vec<f64> = values.iter().map(|v| (v - reference[i]).abs()).collect();
            let slope = fitted_order(sizes, &errors);
            ConvergenceSeries { label, reference: reference[i], values, errors, slope }
        })
        .collect();
    Ok(ConvergenceResult { sizes: sizes.to_vec(), series })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSeries {
    pub label: &'static str,
    pub reference: f64,
    pub ep_errors: Vec<f64>,
    pub it_errors: Vec<f64>,
    pub ep_order: Option<f64>,
    pub it_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalResult {
    pub m: usize,
    pub steps: Vec<usize>,
    pub series: Vec<TemporalSeries>,
}

impl TemporalResult {
    pub fn to_csv(&self) -> Csv {
        let mut header = vec!["n".to_string()];
        for s in &self.series {
            header.push(format!("{}_ep_error", s.label));
            header.push(format!("{}_it_error", s.label));
        }
        let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for (i, n) in self.steps.iter().enumerate() {
            let mut cells = vec![n.to_string()];
            for s in &self.series {
                cells.push(sig10(s.ep_errors[i]));
                cells.push(sig10(s.it_errors[i]));
            }
            csv.row(&cells);
        }
        csv
    }

    pub fn summary(&self) -> String {
        self.series
            .iter()
            .map(|s| format!("{}: EP order {}, IT order {}", s.label, opt(s.ep_order), opt(s.it_order)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Temporal error of EP and IT at fixed `m` against the IT value with
/// `reference_n` steps on the same grid.
pub fn temporal_study(spec: &BasketSpec, method: Method, m: usize, steps: &[usize], reference_n: usize) -> Result<TemporalResult> {
    if spec.style != ExerciseStyle::American {
        return Err(Error::Domain("the temporal study compares American constraint updates".into()));
    }
    check_grid(m, reference_n)?;
    let reference = values(spec, method, m, reference_n, ConstraintMode::IkonenToivanen)?;
    let ep = steps
        .iter()
        .map(|&n| values(spec, method, m, n, ConstraintMode::ExplicitPayoff))
        .collect::<Result<Vec<_>>>()?;
    let it = steps
        .iter()
        .map(|&n| values(spec, method, m, n, ConstraintMode::IkonenToivanen))
        .collect::<Result<Vec<_>>>()?;
    let series = method_labels(method)
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let ep_errors: Vec<f64> = ep.iter().map(|v| (v[i] - reference[i]).abs()).collect();
            let it_errors: Vec<f64> = it.iter().map(|v| (v[i] - reference[i]).abs()).collect();
            TemporalSeries {
                label,
                reference: reference[i],
                ep_order: fitted_order(steps, &ep_errors),
                it_order: fitted_order(steps, &it_errors),
                ep_errors,
                it_errors,
            }
        })
        .collect();
    Ok(TemporalResult { m, steps: steps.to_vec(), series })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLine {
    pub name: String,
    pub engine: f64,
    pub oracle: f64,
    pub tolerance: f64,
}

impl OracleLine {
    pub fn deviation(&self) -> f64 {
        (self.engine - self.oracle).abs()
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub lines: Vec<OracleLine>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(OracleLine::passed)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["check", "engine", "oracle", "deviation", "tolerance", "pass"]);
        for l in &self.lines {
            csv.row(&[
                l.name.clone(),
                sig10(l.engine),
                sig10(l.oracle),
                sig10(l.deviation()),
                sig10(l.tolerance),
                l.passed().to_string(),
            ]);
        }
        csv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub m: usize,
    pub n: usize,
    pub tree_steps: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { m: 1000, n: 1000, tree_steps: 10_000, paths: 1_000_000, seed: 42 }
    }
}

/// The default single-asset contract of the oracle checks.
pub fn default_single_asset() -> BasketSpec {
    presets::uniform_corr_spec(1, 100.0, 1.0, 0.05, 0.2, 0.0, 100.0, ExerciseStyle::European)
}

/// Rank-one dynamics with volatilities `nu_i sigma_i` and unit correlation,
/// i.e. the model whose European price is the comonotonic lower bound.
pub fn lower_bound_spec(spec: &BasketSpec) -> Result<BasketSpec> {
    let w = crate::engines::comonotonic_weights(spec)?;
    let d = spec.dim();
    Ok(BasketSpec {
        vols: w.nu.iter().zip(&spec.vols).map(|(n, s)| n * s).collect(),
        corr: vec![vec![1.0; d]; d],
        style: ExerciseStyle::European,
        ..spec.clone()
    })
}

/// d = 1 closed-form and tree checks on `single`, plus Monte Carlo on the
/// lower-bound dynamics of `basket`.
pub fn oracle_check(single: &BasketSpec, basket: &BasketSpec, settings: &OracleSettings) -> Result<OracleReport> {
    if single.dim() != 1 {
        return Err(Error::Domain(format!("single-asset check needs d = 1, got d = {}", single.dim())));
    }
    check_grid(settings.m, settings.n)?;
    let (s, k, r, sigma, t) = (single.spot[0], single.strike, single.rate, single.vols[0], single.maturity);
    let mut lines = Vec::new();

    let eu = BasketSpec { style: ExerciseStyle::European, ..single.clone() };
    lines.push(OracleLine {
        name: "d1 european vs closed form".into(),
        engine: pca_price(&eu, settings.m, settings.n, ConstraintMode::Unconstrained)?.value,
        oracle: bs_put(s, k, r, sigma, t)?,
        tolerance: 1e-4 * k,
    });

    let am = BasketSpec { style: ExerciseStyle::American, ..single.clone() };
    lines.push(OracleLine {
        name: "d1 american vs binomial".into(),
        engine: pca_price(&am, settings.m, settings.n, ConstraintMode::IkonenToivanen)?.value,
        oracle: crr_american_put(s, k, r, sigma, t, settings.tree_steps),
        tolerance: 2e-3 * k,
    });

    let basket = BasketSpec { style: ExerciseStyle::European, ..basket.clone() };
    let low = comonotonic_price(&basket, settings.m, settings.n, ConstraintMode::Unconstrained)?.low;
    let mc = mc_european_basket(&lower_bound_spec(&basket)?, settings.paths, settings.seed)?;
    lines.push(OracleLine {
        name: "lower bound vs monte carlo".into(),
        engine: low,
        oracle: mc.price,
        tolerance: f64::max(3.0 * mc.stderr, 2e-3),
    });
    Ok(OracleReport { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig10(0.17577), "0.17577");
        assert_eq!(sig10(1.0 / 3.0), "0.3333333333");
        assert_eq!(sig10(9.465501234567), "9.465501235");
        assert_eq!(sig10(-12.5), "-12.5");
        assert_eq!(sig10(1e-9), "1.000000000e-9");
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(1000.0), "1000");
    }

    #[test]
    fn slope_of_synthetic_sequences() {
        let sizes: Vec<usize> = (10..=100).collect();
        let errors: Vec<f64> = sizes.iter().map(|&m| 3.0 / (m * m) as f64).collect();
        assert!((fitted_order(&sizes, &errors).unwrap() - 2.0).abs() < 1e-12);
        let mut dipped = errors.clone();
        dipped[40] *= 1e-4;
        assert!(!drop_mask(&dipped)[40]);
        assert!((fitted_order(&sizes, &dipped).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fitted_order(&[10], &[1.0]), None);
    }

    #[test]
    fn tolerances() {
        assert_eq!(table_tolerance(1, "A", 0.17577), 1e-3);
        assert_eq!(table_tolerance(2, "B", 1.07928), 2e-3);
        assert!((table_tolerance(1, "D", 9.4655) - 4.73275e-3).abs() < 1e-15);
        assert_eq!(table_tolerance(3, "HL-1-40-0.3", 5.78), 5e-3);
    }

    #[test]
    fn price_rejects_tiny_grid() {
        let spec = presets::set_a(ExerciseStyle::European);
        assert!(price("A", &spec, Method::Both, 2, 10, ConstraintMode::IkonenToivanen).is_err());
        assert!(price("A", &spec, Method::Both, 10, 0, ConstraintMode::IkonenToivanen).is_err());
    }

    #[test]
    fn price_csv_is_reproducible() {
        let spec = presets::set_a(ExerciseStyle::American);
        let render = || {
            let r = price("A", &spec, Method::Both, 20, 20, ConstraintMode::IkonenToivanen).unwrap();
            let mut csv = PriceReport::csv_header();
            r.write_row(&mut csv);
            csv.into_string()
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn small_temporal_study_runs() {
        let spec = presets::set_a(ExerciseStyle::American);
        let r = temporal_study(&spec, Method::Pca, 20, &[5, 10, 20], 80).unwrap();
        assert_eq!(r.series.len(), 1);
        assert_eq!(r.to_csv().as_str().lines().count(), 4);
        assert!(temporal_study(&presets::set_a(ExerciseStyle::European), Method::Pca, 20, &[5], 10).is_err());
    }
}
