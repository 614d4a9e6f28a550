use super::{local_data_matrix, GeometryError, RESIDUAL_FLOOR};
use crate::net::{self, NetParams};

const PROB_SUM_TOL: f64 = 1e-9;

fn check_probability(name: &str, p: &[f64]) -> Result<(), GeometryError> {
    if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(GeometryError::NotProbability(format!(
            "{name} must be non-empty and strictly positive"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(GeometryError::NotProbability(format!("{name} sums to {s}")));
    }
    Ok(())
}

/// `KL(p || q) = Σ p_i log(p_i / q_i)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, GeometryError> {
    if p.len() != q.len() {
        return Err(GeometryError::NotProbability(format!(
            "lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_probability("p", p)?;
    check_probability("q", q)?;
    Ok(p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum())
}

/// KL from log-probabilities; avoids the round trip through `exp`/`ln`.
pub fn kl_from_log_probs(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .map(|(a, b)| a.exp() * (a - b))
        .sum()
}

/// `KL(softmax(s_p) || softmax(s_q))` for nearby score vectors.
///
/// Works from `Δ = s_p - s_q` only, so when the scores barely differ the
/// rounding in each score enters scaled by `p - q` rather than by 1; the
/// log-probability route bottoms out near 1e-16 absolute.
pub fn kl_from_scores(s_p: &[f64], s_q: &[f64]) -> Result<f64, GeometryError> {
    let q = net::softmax(s_q)?;
    let delta: Vec<f64> = s_p.iter().zip(s_q).map(|(a, b)| a - b).collect();
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(GeometryError::NotProbability("non-finite scores".into()));
    }
    // lse(s_p) - lse(s_q) = log Σ q_j exp(Δ_j)
    let shift = q.iter().zip(&delta).map(|(qj, d)| qj * d.exp_m1()).sum::<f64>().ln_1p();
    Ok(q
        .iter()
        .zip(&delta)
        .map(|(qi, d)| {
            let log_ratio = d - shift;
            qi * log_ratio.exp() * log_ratio
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlCheck {
    /// `KL(p(·|x+tu) || p(·|x))`.
    pub measured: f64,
    /// `½ t² uᵀ G(x) u`.
    pub predicted: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Compares the measured KL along `x + t u` with its second-order prediction
/// from the local data matrix at `x`.
///
/// Fails with [`GeometryError::RegionCrossing`] when the activation pattern
/// differs at `x`, `x + tu/2` or `x + tu` (piecewise-linear nets only).
pub fn kl_quadratic_check(
    params: &NetParams,
    x: &[f64],
    u: &[f64],
    t: f64,
) -> Result<KlCheck, GeometryError> {
    if u.len() != x.len() {
        return Err(GeometryError::Invalid("direction length differs from x".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(GeometryError::Invalid(format!("step must be >= 0, got {t}")));
    }
    let moved = |s: f64| -> Vec<f64> { x.iter().zip(u).map(|(a, b)| a + s * b).collect() };
    let end = moved(t);
    if params.activation.is_piecewise_linear() {
        let base = net::activation_pattern(params, x)?;
        if base != net::activation_pattern(params, &moved(0.5 * t))?
            || base != net::activation_pattern(params, &end)?
        {
            return Err(GeometryError::RegionCrossing { step: t });
        }
    }
    let g = local_data_matrix(params, x)?;
    let measured = kl_from_scores(&net::forward(params, &end)?, &net::forward(params, x)?)?;
    let predicted = 0.5 * t * t * g.quadratic_form(u);
    let abs_error = (measured - predicted).abs();
    Ok(KlCheck {
        measured,
        predicted,
        abs_error,
        rel_error: abs_error / predicted.abs().max(RESIDUAL_FLOOR),
    })
}
