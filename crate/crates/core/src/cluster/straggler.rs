use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the minimum time a worker needs for a task of `l` rows.
///
/// Shifted exponential: `Pr[T ≤ t] = 1 − exp(−(μ/l)(t − a·l))`.
/// Weibull: `Pr[T ≤ t] = 1 − exp(−((μ/l)(t − a·l))^α)`.
/// Both have support `t ≥ a·l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StragglerModel {
    #[default]
    None,
    #[serde(alias = "exp")]
    ShiftedExponential { a: f64, mu: f64 },
    Weibull { a: f64, mu: f64, alpha: f64 },
}

impl StragglerModel {
    /// `a = 1e-7`, `μ = 15`.
    pub const REFERENCE_EXPONENTIAL: StragglerModel = StragglerModel::ShiftedExponential { a: 1e-7, mu: 15.0 };
    /// `a = 0.2`, `μ = 2`, `α = 0.5`.
    pub const REFERENCE_WEIBULL: StragglerModel = StragglerModel::Weibull {
        a: 0.2,
        mu: 2.0,
        alpha: 0.5,
    };

    pub fn name(&self) -> &'static str {
        match self {
            StragglerModel::None => "none",
            StragglerModel::ShiftedExponential { .. } => "shifted_exponential",
            StragglerModel::Weibull { .. } => "weibull",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("straggler parameter {name} must be positive, got {v}")))
            }
        };
        match *self {
            StragglerModel::None => Ok(()),
            StragglerModel::ShiftedExponential { a, mu } => {
                positive("a", a)?;
                positive("mu", mu)
            }
            StragglerModel::Weibull { a, mu, alpha } => {
                positive("a", a)?;
                positive("mu", mu)?;
                positive("alpha", alpha)
            }
        }
    }
}

/// Inverse-CDF sample of the minimum completion time for `l` rows at
/// uniform draw `u ∈ [0, 1)`. Always `≥ a·l`; zero for [`StragglerModel::None`].
pub fn sample_min_time(model: &StragglerModel, l: usize, u: f64) -> Result<f64> {
    model.validate()?;
    if l == 0 {
        return Err(Error::InvalidParameter("row count l must be ≥ 1".into()));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("uniform draw {u} outside [0, 1)")));
    }
    let l = l as f64;
    // −ln(1 − u)
    let e = -(-u).ln_1p();
    Ok(match *model {
        StragglerModel::None => 0.0,
        StragglerModel::ShiftedExponential { a, mu } => a * l + (l / mu) * e,
        StragglerModel::Weibull { a, mu, alpha } => a * l + (l / mu) * e.powf(1.0 / alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_draw_is_pure_shift() {
        let m = StragglerModel::ShiftedExponential { a: 0.5, mu: 3.0 };
        assert_eq!(sample_min_time(&m, 10, 0.0).unwrap(), 5.0);
        let w = StragglerModel::Weibull { a: 0.2, mu: 2.0, alpha: 0.5 };
        assert!((sample_min_time(&w, 10, 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_median_with_reported_parameters() {
        let t = sample_min_time(&StragglerModel::REFERENCE_EXPONENTIAL, 3025, 0.5).unwrap();
        let want = 3.025e-4 + (3025.0 / 15.0) * std::f64::consts::LN_2;
        assert!((t - want).abs() < 1e-9);
        assert!((t - 139.785).abs() < 1e-3);
    }

    #[test]
    fn weibull_shape_one_is_exponential() {
        let e = StragglerModel::ShiftedExponential { a: 0.3, mu: 4.0 };
        let w = StragglerModel::Weibull { a: 0.3, mu: 4.0, alpha: 1.0 };
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            assert_eq!(sample_min_time(&e, 17, u).unwrap(), sample_min_time(&w, 17, u).unwrap());
        }
    }

    #[test]
    fn invalid_inputs() {
        let e = StragglerModel::ShiftedExponential { a: 0.3, mu: 4.0 };
        assert!(sample_min_time(&e, 0, 0.1).is_err());
        assert!(sample_min_time(&e, 1, 1.0).is_err());
        assert!(sample_min_time(&StragglerModel::ShiftedExponential { a: 0.0, mu: 1.0 }, 1, 0.1).is_err());
        assert!(sample_min_time(&StragglerModel::Weibull { a: 1.0, mu: 1.0, alpha: -1.0 }, 1, 0.1).is_err());
        assert_eq!(sample_min_time(&StragglerModel::None, 5, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn serde_names() {
        let m: StragglerModel = serde_json::from_str(r#"{"kind":"exp","a":1e-7,"mu":15}"#).unwrap();
        assert_eq!(m, StragglerModel::REFERENCE_EXPONENTIAL);
        let w: StragglerModel = serde_json::from_str(r#"{"kind":"weibull","a":0.2,"mu":2,"alpha":0.5}"#).unwrap();
        assert_eq!(w, StragglerModel::REFERENCE_WEIBULL);
    }
}
