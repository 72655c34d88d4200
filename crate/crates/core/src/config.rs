//! Flat `key = value` basket description.
//!
//! ```text
//! # two assets
//! d = 2
//! strike = 10
//! maturity = 1
//! rate = 0.05
//! style = american
//! weights = 0.5, 0.5
//! sigmas = 0.2, 0.3
//! spot = 10, 10
//! corr.row.1 = 1, 0.4
//! corr.row.2 = 0.4, 1
//! ```
//!
//! Rows of the correlation matrix are numbered from 1. `style` may be
//! omitted (European). Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{BasketSpec, ExerciseStyle};

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

struct Entry {
    line: usize,
    value: String,
}

fn scalar(entries: &BTreeMap<String, Entry>, key: &str, last_line: usize) -> Result<f64> {
    let e = entries.get(key).ok_or_else(|| err(last_line, format!("missing key `{key}`")))?;
    e.value
        .trim()
        .parse()
        .map_err(|_| err(e.line, format!("`{key}`: cannot parse `{}` as a number", e.value.trim())))
}

fn list(entries: &BTreeMap<String, Entry>, key: &str, d: usize, last_line: usize) -> Result<Vec<f64>> {
    let e = entries.get(key).ok_or_else(|| err(last_line, format!("missing key `{key}`")))?;
    let values = e
        .value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(e.line, format!("`{key}`: cannot parse `{}` as a number", s.trim())))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != d {
        return Err(err(e.line, format!("`{key}` has {} entries, expected d = {d}", values.len())));
    }
    Ok(values)
}

/// Parses and validates a basket description.
pub fn parse_spec(text: &str) -> Result<BasketSpec> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let known = matches!(
            key.as_str(),
            "d" | "strike" | "maturity" | "rate" | "style" | "weights" | "sigmas" | "spot"
        ) || key.starts_with("corr.row.");
        if !known {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        if let Some(prev) = entries.get(&key) {
            return Err(err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        entries.insert(key, Entry { line, value: value.to_string() });
    }
    let end = last_line + 1;

    let d_entry = entries.get("d").ok_or_else(|| err(end, "missing key `d`"))?;
    let d: usize = d_entry
        .value
        .trim()
        .parse()
        .ok()
        .filter(|d| *d >= 1)
        .ok_or_else(|| err(d_entry.line, format!("`d`: expected a positive integer, got `{}`", d_entry.value.trim())))?;

    for (key, e) in &entries {
        if let Some(idx) = key.strip_prefix("corr.row.") {
            match idx.parse::<usize>() {
                Ok(i) if (1..=d).contains(&i) => {}
                _ => return Err(err(e.line, format!("`{key}`: row index must be in 1..={d}"))),
            }
        }
    }

    let style = match entries.get("style") {
        None => ExerciseStyle::European,
        Some(e) => e
            .value
            .trim()
            .parse()
            .map_err(|_| err(e.line, format!("`style`: expected european or american, got `{}`", e.value.trim())))?,
    };
    let corr = (1..=d)
        .map(|i| list(&entries, &format!("corr.row.{i}"), d, end))
        .collect::<Result<Vec<_>>>()?;
    let spec = BasketSpec {
        strike: scalar(&entries, "strike", end)?,
        maturity: scalar(&entries, "maturity", end)?,
        rate: scalar(&entries, "rate", end)?,
        weights: list(&entries, "weights", d, end)?,
        vols: list(&entries, "sigmas", d, end)?,
        corr,
        spot: list(&entries, "spot", d, end)?,
        style,
    };
    spec.validate()
}

/// Writes `spec` in the format read by [`parse_spec`].
pub fn format_spec(spec: &BasketSpec) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let mut out = format!(
        "d = {}\nstrike = {}\nmaturity = {}\nrate = {}\nstyle = {}\nweights = {}\nsigmas = {}\nspot = {}\n",
        spec.dim(),
        spec.strike,
        spec.maturity,
        spec.rate,
        spec.style.as_str(),
        join(&spec.weights),
        join(&spec.vols),
        join(&spec.spot),
    );
    for (i, row) in spec.corr.iter().enumerate() {
        out.push_str(&format!("corr.row.{} = {}\n", i + 1, join(row)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const TWO: &str = "# two assets\nd = 2\nstrike = 10\nmaturity = 1\nrate = 0.05\nstyle = american\n\
weights = 0.5, 0.5\nsigmas = 0.2, 0.3\nspot = 10, 10\ncorr.row.1 = 1, 0.4\ncorr.row.2 = 0.4, 1\n";

    #[test]
    fn parses_example() {
        let spec = parse_spec(TWO).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.style, ExerciseStyle::American);
        assert_eq!(spec.corr[1][0], 0.4);
        assert_eq!(spec.vols, vec![0.2, 0.3]);
    }

    #[test]
    fn round_trip_presets() {
        for (_, spec) in presets::all_presets(ExerciseStyle::European) {
            assert_eq!(parse_spec(&format_spec(&spec)).unwrap(), spec);
        }
    }

    fn line_of(text: &str) -> usize {
        match parse_spec(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn diagnostics_name_the_line() {
        assert_eq!(line_of(&TWO.replace("sigmas = 0.2, 0.3", "sigmas = 0.2, x")), 8);
        assert_eq!(line_of(&TWO.replace("spot = 10, 10", "spot = 10")), 9);
        assert_eq!(line_of(&TWO.replace("rate = 0.05", "rate 0.05")), 5);
        assert_eq!(line_of(&TWO.replace("rate = 0.05", "colour = red")), 5);
        assert_eq!(line_of(&TWO.replace("corr.row.2", "corr.row.3")), 11);
        assert_eq!(line_of(&format!("{TWO}strike = 11\n")), 12);
        let missing = TWO.replace("strike = 10\n", "");
        assert!(matches!(parse_spec(&missing), Err(Error::Config { message, .. }) if message.contains("strike")));
    }

    #[test]
    fn validation_errors_pass_through() {
        let bad = TWO.replace("weights = 0.5, 0.5", "weights = 0.5, 0.6");
        assert!(matches!(parse_spec(&bad), Err(Error::WeightSum { .. })));
    }
}
