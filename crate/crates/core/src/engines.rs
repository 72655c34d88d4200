//! PCA-based and comonotonic approximations assembled from 1D/2D solves.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{assemble_axis_operator, build_axis_grid, AxisGrid, AxisOperator, PayoffField};
use crate::model::{BasketSpec, ExerciseStyle};
use crate::spectral::{classify_columns, eigendecompose, ColumnClass, SIGN_TOL};
use crate::stepper::{integrate, ConstraintMode, Problem};
use crate::transform::{x_to_y, FaceValue, ReducedPayoff, Side, TransformContext};

/// One active axis of a sub-problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    /// Eigenvector index (0 for the leading component).
    pub index: usize,
    pub lambda: f64,
    pub class: ColumnClass,
    /// Anchor coordinate `Y0` on this axis.
    pub anchor: f64,
}

/// A reduced problem on axis 1 alone or on the plane of axes 1 and `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProblem {
    pub axes: Vec<AxisSpec>,
    pub payoff: ReducedPayoff,
    pub style: ExerciseStyle,
    pub strike: f64,
    pub rate: f64,
    pub maturity: f64,
}

impl SubProblem {
    fn faces(&self, class: ColumnClass) -> (FaceValue, FaceValue) {
        let face = |side| FaceValue::for_face(class, side, self.strike, self.rate, self.style);
        (face(Side::Lower), face(Side::Upper))
    }

    /// Operators, payoff field and anchor node on `m` nodes per axis.
    /// `primary` may be supplied to share the axis-1 grid.
    pub fn discretise(&self, m: usize, primary: Option<&AxisGrid>) -> Result<Discretised> {
        assert!(matches!(self.axes.len(), 1 | 2));
        let reaction = self.rate / self.axes.len() as f64;
        let g1 = match primary {
            Some(g) => g.clone(),
            None => build_axis_grid(m, self.axes[0].anchor)?,
        };
        let gl = self.axes.get(1).map(|a| build_axis_grid(m, a.anchor)).transpose()?;

        let (lo, hi) = self.faces(self.axes[0].class);
        let primary_op = assemble_axis_operator(&g1, self.axes[0].lambda, reaction, lo, hi);
        let secondary_op = match (&gl, self.axes.get(1)) {
            (Some(g), Some(axis)) => {
                let (lo, hi) = self.faces(axis.class);
                Some(assemble_axis_operator(g, axis.lambda, reaction, lo, hi))
            }
            _ => None,
        };
        let anchor = (g1.anchor_index, gl.as_ref().map_or(0, |g| g.anchor_index));
        let field = PayoffField::new(self.payoff.clone(), g1, gl, self.maturity);
        Ok(Discretised { primary: primary_op, secondary: secondary_op, field, anchor })
    }

    /// Value at the anchor node after `steps` time steps on `m` nodes per
    /// axis.
    pub fn solve(&self, m: usize, steps: usize, mode: ConstraintMode, primary: Option<&AxisGrid>) -> Result<f64> {
        let mode = match self.style {
            ExerciseStyle::European => ConstraintMode::Unconstrained,
            ExerciseStyle::American => mode,
        };
        let disc = self.discretise(m, primary)?;
        let problem = Problem {
            primary: disc.primary,
            secondary: disc.secondary,
            initial: disc.field.initial_vector(),
            obstacle: (mode != ConstraintMode::Unconstrained).then_some(&disc.field as _),
            maturity: self.maturity,
        };
        let state = integrate(&problem, steps, mode)?;
        let (_, n2) = disc.field.shape();
        Ok(state.values[disc.anchor.0 * n2 + disc.anchor.1])
    }
}

/// A sub-problem on its grid.
#[derive(Debug, Clone)]
pub struct Discretised {
    pub primary: AxisOperator,
    pub secondary: Option<AxisOperator>,
    pub field: PayoffField,
    /// `(j, k)` of the node at `Y0`.
    pub anchor: (usize, usize),
}

fn context(spec: &BasketSpec) -> Result<TransformContext> {
    let spectrum = eigendecompose(&spec.covariance())?;
    let classes = classify_columns(&spectrum.vectors, SIGN_TOL)?;
    Ok(TransformContext::new(spec, spectrum, classes))
}

/// Sub-problems of the PCA expansion: index 0 is the 1D problem, the rest
/// are the 2D problems for `l = 2..d` with nonzero eigenvalue.
pub fn pca_subproblems(spec: &BasketSpec) -> Result<Vec<SubProblem>> {
    spec.check()?;
    let ctx = context(spec)?;
    let x0 = ctx.s_to_x(&spec.spot, spec.maturity)?;
    let axis = |k: usize| AxisSpec {
        index: k,
        lambda: ctx.spectrum.eigenvalues[k],
        class: ctx.classes[k],
        anchor: x_to_y(x0[k]),
    };
    let make = |active: &[usize]| SubProblem {
        axes: active.iter().map(|&k| axis(k)).collect(),
        payoff: ctx.reduced(active, &x0),
        style: spec.style,
        strike: spec.strike,
        rate: spec.rate,
        maturity: spec.maturity,
    };
    let mut subs = vec![make(&[0])];
    for l in 1..spec.dim() {
        if ctx.spectrum.eigenvalues[l] != 0.0 {
            subs.push(make(&[0, l]));
        }
    }
    Ok(subs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaPrice {
    pub value: f64,
    /// `w^(1)` at the anchor.
    pub leading: f64,
    /// `(l, w^(1,l) - w^(1))` for every solved plane, ascending `l`
    /// (1-based eigenvalue index).
    pub corrections: Vec<(usize, f64)>,
}

/// PCA-based approximation of the basket put at `(S0, T)`.
pub fn pca_price(spec: &BasketSpec, m: usize, steps: usize, mode: ConstraintMode) -> Result<PcaPrice> {
    let subs = pca_subproblems(spec)?;
    let grid = build_axis_grid(m, subs[0].axes[0].anchor)?;
    let values: Vec<f64> = subs
        .par_iter()
        .map(|sub| sub.solve(m, steps, mode, Some(&grid)))
        .collect::<Result<_>>()?;
    let leading = values[0];
    let corrections: Vec<(usize, f64)> = subs[1..]
        .iter()
        .zip(&values[1..])
        .map(|(sub, v)| (sub.axes[1].index + 1, v - leading))
        .collect();
    let value = corrections.iter().fold(leading, |acc, (_, c)| acc + c);
    Ok(PcaPrice { value, leading, corrections })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComonotonicWeights {
    pub nu: Vec<f64>,
    pub lambda_low: f64,
    pub lambda_up: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

pub fn comonotonic_weights(spec: &BasketSpec) -> Result<ComonotonicWeights> {
    let d = spec.dim();
    for i in 0..d {
        for j in 0..d {
            if spec.corr[i][j] < 0.0 {
                return Err(Error::NegativeCorrelation { i, j, value: spec.corr[i][j] });
            }
        }
    }
    let (w, s0, sig, rho, t) = (&spec.weights, &spec.spot, &spec.vols, &spec.corr, spec.maturity);
    let ws: Vec<f64> = (0..d).map(|i| w[i] * s0[i]).collect();
    let mut var = 0.0;
    for j in 0..d {
        for k in 0..d {
            var += ws[j] * ws[k] * rho[j][k] * sig[j] * sig[k];
        }
    }
    let norm = var.sqrt();
    let nu: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|j| ws[j] * rho[i][j] * sig[j]).sum::<f64>() / norm)
        .collect();
    let lambda_up = sig.iter().map(|s| s * s).sum();
    let lambda_low = nu.iter().zip(sig).map(|(n, s)| (n * s).powi(2)).sum();

    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let scale = ws[i] * ws[j];
            let ss = sig[i] * sig[j] * t;
            a += scale * (nu[i] * nu[j] * ss).exp_m1();
            b += scale * (rho[i][j] * ss).exp_m1();
            c += scale * ss.exp_m1();
        }
    }
    let z = if c - a <= 1e-14 * c { 1.0 } else { (c - b) / (c - a) };
    Ok(ComonotonicWeights { nu, lambda_low, lambda_up, a, b, c, z })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComonotonicPrice {
    pub low: f64,
    pub up: f64,
    pub app: f64,
    pub weights: ComonotonicWeights,
}

/// The rank-one (perfectly correlated) 1D problem with volatilities `vols`.
pub fn rank_one_subproblem(spec: &BasketSpec, vols: &[f64]) -> SubProblem {
    let (payoff, x1) = ReducedPayoff::rank_one(spec, vols);
    SubProblem {
        axes: vec![AxisSpec {
            index: 0,
            lambda: vols.iter().map(|v| v * v).sum(),
            class: ColumnClass::AllPositive,
            anchor: x_to_y(x1),
        }],
        payoff,
        style: spec.style,
        strike: spec.strike,
        rate: spec.rate,
        maturity: spec.maturity,
    }
}

pub fn comonotonic_price(spec: &BasketSpec, m: usize, steps: usize, mode: ConstraintMode) -> Result<ComonotonicPrice> {
    spec.check()?;
    let weights = comonotonic_weights(spec)?;
    let low_vols: Vec<f64> = weights.nu.iter().zip(&spec.vols).map(|(n, s)| n * s).collect();
    let subs = [rank_one_subproblem(spec, &low_vols), rank_one_subproblem(spec, &spec.vols)];
    let values: Vec<f64> = subs
        .par_iter()
        .map(|sub| sub.solve(m, steps, mode, None))
        .collect::<Result<_>>()?;
    let (low, up) = (values[0], values[1]);
    let z = weights.z;
    let app = z * low + (1.0 - z) * up;
    if (0.0..=1.0).contains(&z) {
        let slack = 1e-12 * low.abs().max(up.abs());
        assert!(app >= low.min(up) - slack && app <= low.max(up) + slack);
    }
    Ok(ComonotonicPrice { low, up, app, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bs_put;
    use crate::presets;
    use approx::assert_relative_eq;

    fn single(style: ExerciseStyle) -> BasketSpec {
        presets::uniform_corr_spec(1, 100.0, 1.0, 0.05, 0.2, 0.0, 100.0, style)
    }

    #[test]
    fn d1_is_black_scholes() {
        let spec = single(ExerciseStyle::European);
        let price = pca_price(&spec, 200, 200, ConstraintMode::Unconstrained).unwrap();
        assert!(price.corrections.is_empty());
        let exact = bs_put(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
        assert!((price.value - exact).abs() < 5e-3, "{} vs {exact}", price.value);
    }

    #[test]
    fn d1_comonotonic_is_degenerate() {
        let w = comonotonic_weights(&single(ExerciseStyle::European)).unwrap();
        assert_relative_eq!(w.nu[0], 1.0, epsilon = 1e-15);
        assert_eq!(w.z, 1.0);
        assert_relative_eq!(w.a, w.c, epsilon = 1e-15);
        assert_relative_eq!(w.b, w.c, epsilon = 1e-15);
    }

    #[test]
    fn set_b_weights() {
        let w = comonotonic_weights(&presets::set_b(ExerciseStyle::European)).unwrap();
        let nu = 3.25 / 32.5_f64.sqrt();
        assert!(w.nu.iter().all(|v| (v - nu).abs() < 1e-12));
        assert_relative_eq!(w.lambda_low, 0.13, epsilon = 1e-12);
        assert_relative_eq!(w.lambda_up, 0.4, epsilon = 1e-12);
        assert!((0.0..=1.0).contains(&w.z));
    }

    #[test]
    fn set_a_upper_rate() {
        let w = comonotonic_weights(&presets::set_a(ExerciseStyle::European)).unwrap();
        assert_relative_eq!(w.lambda_up, 1.682157, epsilon = 1e-12);
    }

    #[test]
    fn negative_correlation_rejected() {
        let spec = presets::uniform_corr_spec(2, 1.0, 1.0, 0.0, 0.2, -0.3, 1.0, ExerciseStyle::European);
        assert!(matches!(comonotonic_weights(&spec), Err(Error::NegativeCorrelation { .. })));
    }

    #[test]
    fn decomposition_with_flat_spectrum_is_one_solve() {
        // Perfect correlation: all eigenvalues but the first vanish.
        let spec = presets::uniform_corr_spec(3, 1.0, 1.0, 0.03, 0.25, 1.0, 1.0, ExerciseStyle::European);
        let subs = pca_subproblems(&spec).unwrap();
        let price = pca_price(&spec, 60, 40, ConstraintMode::Unconstrained).unwrap();
        assert_eq!(subs.len(), 1 + price.corrections.len());
        let leading = subs[0].solve(60, 40, ConstraintMode::Unconstrained, None).unwrap();
        assert_eq!(price.value, leading + price.corrections.iter().map(|c| c.1).sum::<f64>());
    }

    #[test]
    fn small_basket_orderings() {
        let eu = presets::uniform_corr_spec(3, 1.0, 1.0, 0.05, 0.3, 0.6, 1.0, ExerciseStyle::European);
        let am = BasketSpec { style: ExerciseStyle::American, ..eu.clone() };
        let (m, n) = (40, 40);
        let pe = pca_price(&eu, m, n, ConstraintMode::IkonenToivanen).unwrap().value;
        let pa = pca_price(&am, m, n, ConstraintMode::IkonenToivanen).unwrap().value;
        assert!(pa >= pe - 1e-8);
        let ce = comonotonic_price(&eu, m, n, ConstraintMode::IkonenToivanen).unwrap();
        let ca = comonotonic_price(&am, m, n, ConstraintMode::IkonenToivanen).unwrap();
        assert!(ca.app >= ce.app - 1e-8);
        assert!(ce.low <= ce.up);
        let forward = (eu.strike * (-eu.rate).exp() - eu.spot_basket()).max(0.0);
        assert!(pe >= forward && ce.app >= forward);
        assert!(pa >= am.payoff(&am.spot));
    }
}
