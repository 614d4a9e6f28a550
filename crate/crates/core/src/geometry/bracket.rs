//! Lie brackets of the gradient fields `g_k = ∇ log p_k` by central differences.
//!
//! `[g_i, g_j] = D g_j[g_i] - D g_i[g_j]`; the distribution spanned by the
//! fields is involutive at a point when every bracket falls back into the span.

use super::{norm, GeometryError, RowSpace, RESIDUAL_FLOOR};
use crate::net::{self, NetParams};

pub const DEFAULT_BRACKET_STEP: f64 = 1e-4;
/// A probe passes when the second difference of the scores stays below this
/// fraction of the first difference.
pub const REGION_PROBE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketResidual {
    pub i: usize,
    pub j: usize,
    pub bracket_norm: f64,
    pub in_span: f64,
    pub out_span: f64,
    /// `out_span / max(bracket_norm, 1e-30)`.
    pub relative: f64,
}

fn offset(x: &[f64], s: f64, u: &[f64]) -> Vec<f64> {
    x.iter().zip(u).map(|(a, b)| a + s * b).collect()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0).then(|| v.iter().map(|a| a / n).collect())
}

/// Second-difference probe on the scores along `x ± h·u` (u a unit vector),
/// plus an activation-pattern comparison at both ends.
pub fn region_probe(params: &NetParams, x: &[f64], u: &[f64], h: f64) -> Result<(), GeometryError> {
    let plus = offset(x, h, u);
    let minus = offset(x, -h, u);
    let s0 = net::forward(params, x)?;
    let sp = net::forward(params, &plus)?;
    let sm = net::forward(params, &minus)?;
    let second: Vec<f64> = (0..s0.len()).map(|k| sp[k] - 2.0 * s0[k] + sm[k]).collect();
    let first: Vec<f64> = (0..s0.len()).map(|k| sp[k] - sm[k]).collect();
    let floor = 1e-13 * (1.0 + norm(&s0));
    if norm(&second) > REGION_PROBE_TOL * norm(&first) + floor {
        return Err(GeometryError::RegionCrossing { step: h });
    }
    let base = net::activation_pattern(params, x)?;
    if net::activation_pattern(params, &plus)? != base || net::activation_pattern(params, &minus)? != base {
        return Err(GeometryError::RegionCrossing { step: h });
    }
    Ok(())
}

// D f_k[v] ≈ (f_k(p + h v̂) - f_k(p - h v̂)) / 2h · ||v||
fn directional<F>(field: &F, point: &[f64], k: usize, v: &[f64], h: f64) -> Result<Vec<f64>, GeometryError>
where
    F: Fn(&[f64]) -> Result<Vec<Vec<f64>>, GeometryError>,
{
    let Some(dir) = unit(v) else {
        return Ok(vec![0.0; point.len()]);
    };
    let scale = norm(v) / (2.0 * h);
    let fp = field(&offset(point, h, &dir))?;
    let fm = field(&offset(point, -h, &dir))?;
    Ok(fp[k].iter().zip(&fm[k]).map(|(a, b)| (a - b) * scale).collect())
}

fn bracket_residual<F>(
    field: F,
    point: &[f64],
    i: usize,
    j: usize,
    h: f64,
) -> Result<BracketResidual, GeometryError>
where
    F: Fn(&[f64]) -> Result<Vec<Vec<f64>>, GeometryError>,
{
    let base = field(point)?;
    if i == j || i >= base.len() || j >= base.len() {
        return Err(GeometryError::Invalid(format!(
            "need distinct classes below {}, got ({i}, {j})",
            base.len()
        )));
    }
    let dj_gi = directional(&field, point, j, &base[i], h)?;
    let di_gj = directional(&field, point, i, &base[j], h)?;
    let b: Vec<f64> = dj_gi.iter().zip(&di_gj).map(|(a, c)| a - c).collect();
    let span = RowSpace::new(&base);
    let pb = span.project(&b);
    let out: Vec<f64> = b.iter().zip(&pb).map(|(a, c)| a - c).collect();
    let bracket_norm = norm(&b);
    let out_span = norm(&out);
    Ok(BracketResidual {
        i,
        j,
        bracket_norm,
        in_span: norm(&pb),
        out_span,
        relative: out_span / bracket_norm.max(RESIDUAL_FLOOR),
    })
}

/// Bracket of the input-space fields `∇_x log p_i`, `∇_x log p_j` at `x`,
/// split into its components inside and outside the distribution at `x`.
///
/// For piecewise-linear nets both differencing directions are probed first
/// with [`region_probe`]; smooth activations skip the probe.
pub fn involutivity_residual(
    params: &NetParams,
    x: &[f64],
    i: usize,
    j: usize,
    h: f64,
) -> Result<BracketResidual, GeometryError> {
    if !(h > 0.0) {
        return Err(GeometryError::Invalid(format!("step must be positive, got {h}")));
    }
    if params.activation.is_piecewise_linear() {
        let jac = net::input_jacobian(params, x)?;
        for k in [i, j] {
            if let Some(u) = jac.rows.get(k).and_then(|r| unit(r)) {
                region_probe(params, x, &u, h)?;
            }
        }
    }
    bracket_residual(
        |z: &[f64]| Ok(net::input_jacobian(params, z)?.rows),
        x,
        i,
        j,
        h,
    )
}

/// The same bracket for the parameter-space fields `∇_w log p_k(x, w)` at a
/// fixed datum. Reported for contrast only.
pub fn param_involutivity_residual(
    params: &NetParams,
    x: &[f64],
    i: usize,
    j: usize,
    h: f64,
) -> Result<BracketResidual, GeometryError> {
    if !(h > 0.0) {
        return Err(GeometryError::Invalid(format!("step must be positive, got {h}")));
    }
    let field = |w: &[f64]| -> Result<Vec<Vec<f64>>, GeometryError> {
        let p = params.with_flat(w)?;
        let (grads, _) = net::param_log_jacobian(&p, x)?;
        Ok(grads.iter().map(NetParams::flatten).collect())
    };
    let w0 = params.flatten();
    if params.activation.is_piecewise_linear() {
        let base_pattern = net::activation_pattern(params, x)?;
        let fields = field(&w0)?;
        for k in [i, j] {
            if let Some(u) = fields.get(k).and_then(|f| unit(f)) {
                for s in [h, -h] {
                    let moved = params.with_flat(&offset(&w0, s, &u))?;
                    if net::activation_pattern(&moved, x)? != base_pattern {
                        return Err(GeometryError::RegionCrossing { step: h });
                    }
                }
            }
        }
    }
    bracket_residual(field, &w0, i, j, h)
}
