use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `y = α·exp(β·√N)`
    ExpSqrt,
    /// `y = α·exp(β·N)`
    ExpLinear,
    /// `y = γ·N² + δ·N + ω`
    Quadratic,
    /// `y = γ·N² + ω`, the quadratic without a linear term.
    Quadratic2d,
}

impl ScalingModel {
    pub fn min_points(self) -> usize {
        match self {
            ScalingModel::Quadratic => 4,
            _ => 3,
        }
    }

    fn is_exponential(self) -> bool {
        matches!(self, ScalingModel::ExpSqrt | ScalingModel::ExpLinear)
    }

    /// Regressors of one size, in parameter order.
    fn row(self, n: f64) -> Vec<f64> {
        match self {
            ScalingModel::ExpSqrt => vec![1.0, n.sqrt()],
            ScalingModel::ExpLinear => vec![1.0, n],
            ScalingModel::Quadratic => vec![n * n, n, 1.0],
            ScalingModel::Quadratic2d => vec![n * n, 1.0],
        }
    }
}

/// Least-squares fit of `C* - E0` against problem size.
///
/// `params` are `[α, β]` for the exponential models, `[γ, δ, ω]` for
/// `quadratic` and `[γ, ω]` for `quadratic-2d`. Exponential models are fitted
/// linearly in log space; the residuals are always reported in the original
/// space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub params: Vec<f64>,
    /// `‖y - ŷ‖₂`.
    pub residual_norm: f64,
    /// `‖y‖₂`.
    pub signal_norm: f64,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        let p = &self.params;
        match self.model {
            ScalingModel::ExpSqrt => p[0] * (p[1] * n.sqrt()).exp(),
            ScalingModel::ExpLinear => p[0] * (p[1] * n).exp(),
            ScalingModel::Quadratic => p[0] * n * n + p[1] * n + p[2],
            ScalingModel::Quadratic2d => p[0] * n * n + p[1],
        }
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual_norm / self.signal_norm
    }
}

pub fn fit_scaling(points: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit, BenchError> {
    let required = model.min_points();
    if points.len() < required {
        return Err(BenchError::InsufficientPoints {
            required,
            found: points.len(),
        });
    }
    if let Some(&(n, y)) = points.iter().find(|(n, y)| !n.is_finite() || !y.is_finite()) {
        return Err(BenchError::DomainError(format!("non-finite point ({n}, {y})")));
    }
    let targets: Vec<f64> = if model.is_exponential() {
        points
            .iter()
            .map(|&(_, y)| {
                if y > 0.0 {
                    Ok(y.ln())
                } else {
                    Err(BenchError::NonPositiveValue(y))
                }
            })
            .collect::<Result<_, _>>()?
    } else {
        points.iter().map(|p| p.1).collect()
    };
    let cols = model.row(0.0).len();
    let design = DMatrix::from_row_iterator(
        points.len(),
        cols,
        points.iter().flat_map(|&(n, _)| model.row(n)),
    );
    let rhs = DVector::from_vec(targets);
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|_| BenchError::Singular)?;
    let params = if model.is_exponential() {
        vec![coef[0].exp(), coef[1]]
    } else {
        coef.iter().copied().collect()
    };
    let mut fit = ScalingFit {
        model,
        params,
        residual_norm: 0.0,
        signal_norm: points.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt(),
    };
    fit.residual_norm = points
        .iter()
        .map(|&(n, y)| (y - fit.predict(n)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(fit)
}

/// Size at which an exponential fit reaches the gap `E1 - E0`.
pub fn giveup_size(fit: &ScalingFit, gap: f64) -> Result<f64, BenchError> {
    let (alpha, beta) = match fit.model {
        ScalingModel::ExpSqrt | ScalingModel::ExpLinear => (fit.params[0], fit.params[1]),
        other => {
            return Err(BenchError::DomainError(format!(
                "give-up size needs an exponential fit, got {other:?}"
            )))
        }
    };
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(BenchError::DomainError(format!(
            "need α > 0 and β > 0, got α={alpha}, β={beta}"
        )));
    }
    if !(gap > alpha) {
        return Err(BenchError::DomainError(format!(
            "gap {gap} must exceed α={alpha}"
        )));
    }
    let log_ratio = (gap / alpha).ln();
    Ok(match fit.model {
        ScalingModel::ExpSqrt => (log_ratio / beta).powi(2),
        _ => log_ratio / beta,
    })
}
