//! Coordinate changes `s -> x -> y`, the transformed payoff and the
//! Dirichlet data on the faces of the unit cube.
//!
//! `x = Q^T (ln(s/K) - b(t))` with `b_i(t) = (sigma_i^2/2 - r) t`, and
//! `y = arctan(x)/pi + 1/2`. In `y` the pricing operator is
//! `sum_k lambda_k [p(y_k) d2/dy_k2 + q(y_k) d/dy_k] - r`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{BasketSpec, ExerciseStyle};
use crate::spectral::{ColumnClass, Spectrum};

/// Largest magnitude allowed for a log-price exponent before `exp`.
pub const MAX_EXPONENT: f64 = 700.0;
const MAX_X: f64 = 1e12;

/// Diffusion coefficient of the `y`-space operator.
pub fn diffusion_coef(eta: f64) -> f64 {
    let s = (PI * eta).sin();
    s.powi(4) / (2.0 * PI * PI)
}

/// Convection coefficient of the `y`-space operator.
pub fn convection_coef(eta: f64) -> f64 {
    let (s, c) = (PI * eta).sin_cos();
    s.powi(3) * c / PI
}

pub fn x_to_y(x: f64) -> f64 {
    x.atan() / PI + 0.5
}

pub fn y_to_x(y: f64) -> f64 {
    (PI * (y - 0.5)).tan().clamp(-MAX_X, MAX_X)
}

/// A face `{y : y_axis = side}` of the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// Value prescribed on one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceValue {
    Zero,
    /// `K e^{-rt}` (European, all prices tend to zero).
    Discounted { strike: f64, rate: f64 },
    /// `K` (American, all prices tend to zero).
    Constant(f64),
}

impl FaceValue {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            FaceValue::Zero => 0.0,
            FaceValue::Discounted { strike, rate } => strike * (-rate * t).exp(),
            FaceValue::Constant(k) => k,
        }
    }

    /// Rule for one face given the classification of the axis' eigenvector.
    pub fn for_face(class: ColumnClass, side: Side, strike: f64, rate: f64, style: ExerciseStyle) -> Self {
        match (class, side, style) {
            (ColumnClass::AllPositive, Side::Lower, ExerciseStyle::European) => {
                FaceValue::Discounted { strike, rate }
            }
            (ColumnClass::AllPositive, Side::Lower, ExerciseStyle::American) => FaceValue::Constant(strike),
            _ => FaceValue::Zero,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformContext {
    pub spectrum: Spectrum,
    pub classes: Vec<ColumnClass>,
    pub strike: f64,
    pub rate: f64,
    pub weights: Vec<f64>,
    /// `sigma_i^2/2 - r`, so that `b(t) = drift_rates * t`.
    pub drift_rates: Vec<f64>,
}

impl TransformContext {
    pub fn new(spec: &BasketSpec, spectrum: Spectrum, classes: Vec<ColumnClass>) -> Self {
        let drift_rates = spec.vols.iter().map(|s| 0.5 * s * s - spec.rate).collect();
        TransformContext {
            spectrum,
            classes,
            strike: spec.strike,
            rate: spec.rate,
            weights: spec.weights.clone(),
            drift_rates,
        }
    }

    pub fn drift(&self, t: f64) -> Vec<f64> {
        self.drift_rates.iter().map(|b| b * t).collect()
    }

    pub fn s_to_x(&self, s: &[f64], t: f64) -> Result<Vec<f64>> {
        if let Some(bad) = s.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain(format!("prices must be positive, got {bad}")));
        }
        let z: Vec<f64> = s
            .iter()
            .zip(&self.drift_rates)
            .map(|(si, b)| (si / self.strike).ln() - b * t)
            .collect();
        Ok(self.spectrum.project(&z))
    }

    pub fn s_to_y(&self, s: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(self.s_to_x(s, t)?.into_iter().map(x_to_y).collect())
    }

    /// Inverse of [`s_to_y`](Self::s_to_y), `s = K exp(Q x + b(t))`, with the
    /// exponent clamped to `+-MAX_EXPONENT`.
    pub fn y_to_s(&self, y: &[f64], t: f64) -> Vec<f64> {
        let x: Vec<f64> = y.iter().map(|&v| y_to_x(v)).collect();
        let q = &self.spectrum.vectors;
        q.iter()
            .zip(&self.drift_rates)
            .map(|(row, b)| {
                let e: f64 = row.iter().zip(&x).map(|(qik, xk)| qik * xk).sum::<f64>() + b * t;
                self.strike * e.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
            })
            .collect()
    }

    /// Transformed payoff `psi(y, t) = phi(K exp(Q x + b(t)))`.
    pub fn psi(&self, y: &[f64], t: f64) -> f64 {
        let s = self.y_to_s(y, t);
        let basket: f64 = self.weights.iter().zip(&s).map(|(w, si)| w * si).sum();
        (self.strike - basket).max(0.0)
    }

    pub fn face_value(&self, face: Face, style: ExerciseStyle) -> FaceValue {
        FaceValue::for_face(self.classes[face.axis], face.side, self.strike, self.rate, style)
    }

    pub fn boundary_value(&self, face: Face, t: f64, style: ExerciseStyle) -> f64 {
        self.face_value(face, style).at(t)
    }

    /// Payoff restricted to the affine subspace through `anchor_x` spanned by
    /// the `active` eigenvector columns.
    pub fn reduced(&self, active: &[usize], anchor_x: &[f64]) -> ReducedPayoff {
        let d = self.spectrum.dim();
        let q = &self.spectrum.vectors;
        let offset = (0..d)
            .map(|i| {
                (0..d)
                    .filter(|k| !active.contains(k))
                    .map(|k| q[i][k] * anchor_x[k])
                    .sum()
            })
            .collect();
        ReducedPayoff {
            strike: self.strike,
            weights: self.weights.clone(),
            offset,
            drift_rates: self.drift_rates.clone(),
            columns: active.iter().map(|&k| self.spectrum.column(k)).collect(),
        }
    }
}

/// The payoff seen by a one- or two-dimensional sub-problem:
/// `ln(s_i/K) = offset_i + b_i(t) + sum_a columns[a][i] x_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPayoff {
    pub strike: f64,
    pub weights: Vec<f64>,
    pub offset: Vec<f64>,
    pub drift_rates: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl ReducedPayoff {
    /// Rank-one dynamics with volatilities `vols` and perfect correlation,
    /// evaluated on the line through the image of `spot` at `maturity`.
    /// Returns the payoff together with the anchor coordinate `x_1`.
    pub fn rank_one(spec: &BasketSpec, vols: &[f64]) -> (Self, f64) {
        let norm = vols.iter().map(|v| v * v).sum::<f64>().sqrt();
        let column: Vec<f64> = vols.iter().map(|v| v / norm).collect();
        let drift_rates: Vec<f64> = vols.iter().map(|s| 0.5 * s * s - spec.rate).collect();
        let z: Vec<f64> = spec
            .spot
            .iter()
            .zip(&drift_rates)
            .map(|(s, b)| (s / spec.strike).ln() - b * spec.maturity)
            .collect();
        let x1: f64 = column.iter().zip(&z).map(|(q, zi)| q * zi).sum();
        let offset = z.iter().zip(&column).map(|(zi, q)| zi - q * x1).collect();
        let payoff = ReducedPayoff {
            strike: spec.strike,
            weights: spec.weights.clone(),
            offset,
            drift_rates,
            columns: vec![column],
        };
        (payoff, x1)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `sum_i w_i s_i / K` at active coordinates `x`.
    pub fn basket_ratio(&self, x: &[f64], t: f64) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut e = self.offset[i] + self.drift_rates[i] * t;
                for (col, xa) in self.columns.iter().zip(x) {
                    e += col[i] * xa;
                }
                self.weights[i] * e.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
            })
            .sum()
    }

    /// Payoff at active `y` coordinates.
    pub fn psi(&self, y: &[f64], t: f64) -> f64 {
        let x: Vec<f64> = y.iter().map(|&v| y_to_x(v)).collect();
        self.strike * (1.0 - self.basket_ratio(&x, t)).max(0.0)
    }

    /// Sign of `K - basket`, positive inside the exercise region.
    pub fn moneyness(&self, y: &[f64], t: f64) -> f64 {
        let x: Vec<f64> = y.iter().map(|&v| y_to_x(v)).collect();
        1.0 - self.basket_ratio(&x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::spectral::{classify_columns, eigendecompose, SIGN_TOL};

    fn context(spec: &BasketSpec) -> TransformContext {
        let spectrum = eigendecompose(&spec.covariance()).unwrap();
        let classes = classify_columns(&spectrum.vectors, SIGN_TOL).unwrap();
        TransformContext::new(spec, spectrum, classes)
    }

    #[test]
    fn centre_maps_to_half() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        let t = 0.7;
        let s: Vec<f64> = ctx.drift(t).iter().map(|b| spec.strike * b.exp()).collect();
        for y in ctx.s_to_y(&s, t).unwrap() {
            assert!((y - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn small_price_maps_near_zero() {
        let spec = presets::uniform_corr_spec(1, 1.0, 1.0, 0.05, 0.3, 0.0, 1.0, ExerciseStyle::European);
        let ctx = context(&spec);
        let y = ctx.s_to_y(&[1e-300], 0.0).unwrap()[0];
        assert!(y > 0.0 && y < 1e-2);
        assert!(ctx.s_to_y(&[0.0], 0.0).is_err());
    }

    #[test]
    fn anchor_round_trips() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        let y0 = ctx.s_to_y(&spec.spot, spec.maturity).unwrap();
        assert!(y0.iter().all(|y| *y > 0.0 && *y < 1.0));
        let back = ctx.y_to_s(&y0, spec.maturity);
        for (a, b) in back.iter().zip(&spec.spot) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_examples() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        assert!(ctx.psi(&[0.5; 5], 0.0).abs() < 1e-14);
        let mut y = [0.5; 5];
        y[0] = 1e-12;
        assert!((ctx.psi(&y, 0.0) - spec.strike).abs() < 1e-12);

        let one = presets::uniform_corr_spec(1, 2.0, 1.0, 0.05, 0.3, 0.0, 2.0, ExerciseStyle::European);
        let ctx = context(&one);
        for y in [0.1, 0.3, 0.45, 0.6, 0.9] {
            let direct = (2.0 - 2.0 * (PI * (y - 0.5)).tan().exp()).max(0.0);
            assert!((ctx.psi(&[y], 0.0) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_rule() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        let lower = Face { axis: 0, side: Side::Lower };
        let eu = ctx.boundary_value(lower, 1.0, ExerciseStyle::European);
        assert!((eu - (-0.05f64).exp()).abs() < 1e-15);
        assert_eq!(ctx.boundary_value(lower, 1.0, ExerciseStyle::American), 1.0);
        assert_eq!(ctx.boundary_value(Face { axis: 1, side: Side::Lower }, 1.0, ExerciseStyle::European), 0.0);
        assert_eq!(ctx.boundary_value(Face { axis: 0, side: Side::Upper }, 1.0, ExerciseStyle::American), 0.0);
    }

    #[test]
    fn boundary_matches_payoff_limit_at_inception() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        for axis in 0..5 {
            for (side, y) in [(Side::Lower, 1e-13), (Side::Upper, 1.0 - 1e-13)] {
                let mut point = [0.5; 5];
                point[axis] = y;
                let bv = ctx.boundary_value(Face { axis, side }, 0.0, ExerciseStyle::European);
                assert!((ctx.psi(&point, 0.0) - bv).abs() < 1e-9, "axis {axis} {side:?}");
            }
        }
    }

    #[test]
    fn reduced_matches_full_psi() {
        let spec = presets::set_a(ExerciseStyle::European);
        let ctx = context(&spec);
        let x0 = ctx.s_to_x(&spec.spot, spec.maturity).unwrap();
        let y0: Vec<f64> = x0.iter().map(|&x| x_to_y(x)).collect();
        let red = ctx.reduced(&[0, 2], &x0);
        for (a, b) in [(0.2, 0.3), (0.45, 0.5), (0.6, 0.8)] {
            let mut y = y0.clone();
            y[0] = a;
            y[2] = b;
            assert!((red.psi(&[a, b], 0.4) - ctx.psi(&y, 0.4)).abs() < 1e-13);
        }
    }

    #[test]
    fn rank_one_anchor_reproduces_spot() {
        let spec = presets::set_a(ExerciseStyle::European);
        let (red, x1) = ReducedPayoff::rank_one(&spec, &spec.vols);
        let ratio = red.basket_ratio(&[x1], spec.maturity);
        assert!((ratio * spec.strike - spec.spot_basket()).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn y_round_trip(y in proptest::collection::vec(0.02f64..0.98, 5), t in 0.0f64..1.0) {
            let spec = presets::set_a(ExerciseStyle::European);
            let ctx = context(&spec);
            let s = ctx.y_to_s(&y, t);
            let back = ctx.s_to_y(&s, t).unwrap();
            for (a, b) in y.iter().zip(&back) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
            let p = ctx.psi(&y, t);
            proptest::prop_assert!((0.0..=spec.strike).contains(&p));
        }
    }
}
