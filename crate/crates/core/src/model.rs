//! Basket put contract and Black–Scholes market data.

use crate::error::{Error, Result};
use crate::spectral::jacobi_eigenvalues;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const PSD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExerciseStyle {
    European,
    American,
}

impl ExerciseStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            ExerciseStyle::European => "european",
            ExerciseStyle::American => "american",
        }
    }
}

impl std::str::FromStr for ExerciseStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "european" | "eu" => Ok(ExerciseStyle::European),
            "american" | "am" => Ok(ExerciseStyle::American),
            other => Err(Error::Domain(format!("unknown exercise style `{other}`"))),
        }
    }
}

/// A put on the weighted average of `d` assets following correlated
/// geometric Brownian motions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketSpec {
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    pub weights: Vec<f64>,
    pub vols: Vec<f64>,
    /// Row-major `d x d` correlation matrix.
    pub corr: Vec<Vec<f64>>,
    pub spot: Vec<f64>,
    pub style: ExerciseStyle,
}

impl BasketSpec {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Checks every contract invariant and returns the spec unchanged.
    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        let d = self.weights.len();
        if d == 0 {
            return Err(Error::Domain("basket needs at least one asset".into()));
        }
        if self.vols.len() != d || self.spot.len() != d || self.corr.len() != d {
            return Err(Error::Domain(format!(
                "dimension mismatch: {d} weights, {} vols, {} spots, {} correlation rows",
                self.vols.len(),
                self.spot.len(),
                self.corr.len()
            )));
        }
        positive("strike", self.strike)?;
        positive("maturity", self.maturity)?;
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::Domain(format!("rate must be >= 0, got {}", self.rate)));
        }
        for (i, &w) in self.weights.iter().enumerate() {
            positive(&format!("weight[{i}]"), w)?;
        }
        for (i, &s) in self.vols.iter().enumerate() {
            positive(&format!("vol[{i}]"), s)?;
        }
        for (i, &s) in self.spot.iter().enumerate() {
            positive(&format!("spot[{i}]"), s)?;
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum { sum });
        }

        for (i, row) in self.corr.iter().enumerate() {
            if row.len() != d {
                return Err(Error::CorrelationMatrix(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            if row[i] != 1.0 {
                return Err(Error::CorrelationMatrix(format!("diagonal entry {i} is {}", row[i])));
            }
            for (j, &c) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(&c) {
                    return Err(Error::CorrelationMatrix(format!("entry ({i},{j}) = {c} outside [-1, 1]")));
                }
                if c != self.corr[j][i] {
                    return Err(Error::CorrelationMatrix(format!("not symmetric at ({i},{j})")));
                }
            }
        }

        let cov = self.covariance();
        let scale = cov.iter().flatten().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let (eigs, _) = jacobi_eigenvalues(&cov)?;
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_REL_TOL * scale {
            return Err(Error::CorrelationMatrix(format!(
                "covariance not positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    /// `max(K - sum w_i s_i, 0)`.
    pub fn payoff(&self, prices: &[f64]) -> f64 {
        let basket: f64 = self.weights.iter().zip(prices).map(|(w, s)| w * s).sum();
        (self.strike - basket).max(0.0)
    }

    /// `Sigma_ij = sigma_i rho_ij sigma_j`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut cov = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let v = self.vols[i] * self.corr[i][j] * self.vols[j];
                cov[i][j] = v;
                cov[j][i] = v;
            }
        }
        cov
    }

    pub fn has_nonnegative_correlations(&self) -> Result<()> {
        for (i, row) in self.corr.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c < 0.0 {
                    return Err(Error::NegativeCorrelation { i, j, value: c });
                }
            }
        }
        Ok(())
    }

    /// Basket value of the spot prices, `sum w_i S0_i`.
    pub fn spot_basket(&self) -> f64 {
        self.weights.iter().zip(&self.spot).map(|(w, s)| w * s).sum()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn single(vol: f64) -> BasketSpec {
        BasketSpec {
            strike: 1.0,
            maturity: 1.0,
            rate: 0.05,
            weights: vec![1.0],
            vols: vec![vol],
            corr: vec![vec![1.0]],
            spot: vec![1.0],
            style: ExerciseStyle::European,
        }
    }

    #[test]
    fn set_a_validates() {
        assert!(presets::set_a(ExerciseStyle::European).validate().is_ok());
    }

    #[test]
    fn single_asset_validates() {
        assert!(single(0.3).validate().is_ok());
    }

    #[test]
    fn weight_sum_error() {
        let mut spec = presets::uniform_corr_spec(2, 10.0, 1.0, 0.0, 0.2, 0.0, 10.0, ExerciseStyle::European);
        spec.weights = vec![0.5, 0.6];
        assert!(matches!(spec.validate(), Err(Error::WeightSum { .. })));
    }

    #[test]
    fn rejects_indefinite_correlation() {
        let mut spec = presets::uniform_corr_spec(3, 1.0, 1.0, 0.0, 0.2, 0.0, 1.0, ExerciseStyle::European);
        spec.corr = vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]];
        assert!(matches!(spec.validate(), Err(Error::CorrelationMatrix(_))));
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        let mut spec = single(0.3);
        spec.strike = 0.0;
        assert!(matches!(spec.validate(), Err(Error::Domain(_))));
        let mut spec = single(0.3);
        spec.vols[0] = -0.1;
        assert!(matches!(spec.validate(), Err(Error::Domain(_))));
        let mut spec = single(0.3);
        spec.maturity = 0.0;
        assert!(matches!(spec.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn payoff_examples() {
        let spec = presets::uniform_corr_spec(2, 10.0, 1.0, 0.0, 0.2, 0.0, 10.0, ExerciseStyle::European);
        assert_eq!(spec.payoff(&[4.0, 8.0]), 4.0);
        assert_eq!(spec.payoff(&[0.0, 0.0]), 10.0);
        assert_eq!(spec.payoff(&[10.0, 10.0]), 0.0);
    }

    #[test]
    fn covariance_examples() {
        let b = presets::set_b(ExerciseStyle::European).covariance();
        assert!((b[0][0] - 0.04).abs() < 1e-15);
        assert!((b[0][1] - 0.01).abs() < 1e-15);
        assert!((single(0.3).covariance()[0][0] - 0.09).abs() < 1e-15);
        let a = presets::set_a(ExerciseStyle::European).covariance();
        assert_eq!(a.len(), 5);
        assert!((a[0][0] - 0.268324).abs() < 1e-15);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a[i][j].to_bits(), a[j][i].to_bits());
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn payoff_is_convex(
            s1 in proptest::collection::vec(0.0f64..3.0, 5),
            s2 in proptest::collection::vec(0.0f64..3.0, 5),
            alpha in 0.0f64..=1.0,
        ) {
            let spec = presets::set_a(ExerciseStyle::European);
            let mix: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            let lhs = spec.payoff(&mix);
            let rhs = alpha * spec.payoff(&s1) + (1.0 - alpha) * spec.payoff(&s2);
            proptest::prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
