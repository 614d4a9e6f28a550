//! Walking the foliation: horizontal paths that stay tangent to the
//! distribution, and kernel walks that cross leaves along a fixed direction.
//!
//! Neither walk retracts onto a leaf; fixed-length normalized steps keep the
//! drift controlled, and the per-step soft rank and KL are logged instead.

use crate::geometry::{kl_from_log_probs, norm, spectrum, FactoredPSD, RowSpace};
use crate::net::{self, InputJacobian, NetError, NetParams};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Projected directions shorter than this halt the path as stalled.
pub const STALL_NORM: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum PathError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid path argument: {0}")]
    Invalid(String),
    #[error("input dimension {n} is not a perfect square; pass an explicit layout")]
    NotSquare { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStatus {
    Converged,
    Stalled,
    Exhausted,
}

impl std::fmt::Display for PathStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PathStatus::Converged => "converged",
            PathStatus::Stalled => "stalled",
            PathStatus::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Horizontal,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub kind: PathKind,
    pub alpha: f64,
    pub max_steps: usize,
    pub stop_tol: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiag {
    pub t: usize,
    /// Distance to the destination (horizontal) or to the start (kernel walk).
    pub dist: f64,
    pub pred: usize,
    pub max_prob: f64,
    /// `KL(p(x_t) || p(x_{t-1}))`, 0 at `t = 0`.
    pub step_kl: f64,
    pub soft_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub points: Vec<Vec<f64>>,
    pub steps: Vec<StepDiag>,
    pub status: PathStatus,
    pub config: PathConfig,
    /// Steps at which the distance to the destination grew although `α <= dist`.
    pub monotonicity_violations: Vec<usize>,
    /// Steps at which the soft rank differs from the previous step.
    pub rank_changes: Vec<usize>,
}

impl PathRecord {
    pub fn final_point(&self) -> &[f64] {
        self.points.last().expect("a path has at least its start point")
    }

    pub fn final_dist(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.dist)
    }

    pub fn num_steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,dist,pred,maxp,step_kl,soft_rank\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.t, s.dist, s.pred, s.max_prob, s.step_kl, s.soft_rank
            );
        }
        out
    }

    /// Raw points: u64 T, u64 n, then `(T+1) * n` f64, all little-endian.
    pub fn points_to_bytes(&self) -> Vec<u8> {
        let n = self.points[0].len();
        let mut out = Vec::with_capacity(16 + 8 * n * self.points.len());
        out.extend_from_slice(&(self.num_steps() as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for p in &self.points {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Inverse of [`PathRecord::points_to_bytes`].
pub fn points_from_bytes(bytes: &[u8]) -> Result<Vec<Vec<f64>>, PathError> {
    let bad = || PathError::Invalid("malformed points file".into());
    if bytes.len() < 16 {
        return Err(bad());
    }
    let steps = u64::from_le_bytes(bytes[..8].try_into().expect("8")) as usize;
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8")) as usize;
    let count = steps.checked_add(1).ok_or_else(bad)?;
    if (bytes.len() - 16) != count.checked_mul(n).and_then(|v| v.checked_mul(8)).ok_or_else(bad)? {
        return Err(bad());
    }
    Ok(bytes[16..]
        .chunks_exact(8 * n.max(1))
        .take(count)
        .map(|row| {
            row.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8")))
                .collect()
        })
        .collect())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn diag(t: usize, jac: &InputJacobian, dist: f64, prev_log_probs: Option<&[f64]>) -> StepDiag {
    StepDiag {
        t,
        dist,
        pred: jac.predicted(),
        max_prob: jac.max_prob(),
        step_kl: prev_log_probs.map_or(0.0, |lq| kl_from_log_probs(&jac.log_probs, lq)),
        soft_rank: spectrum(&FactoredPSD::from(jac)).soft_rank,
    }
}

fn check_args(params: &NetParams, x: &[f64], alpha: f64) -> Result<(), PathError> {
    if x.len() != params.input_dim() {
        return Err(PathError::Net(NetError::DimensionMismatch {
            expected: params.input_dim(),
            found: x.len(),
        }));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PathError::Invalid(format!("step size must be positive, got {alpha}")));
    }
    Ok(())
}

struct Walk {
    points: Vec<Vec<f64>>,
    steps: Vec<StepDiag>,
    rank_changes: Vec<usize>,
}

impl Walk {
    fn start(x0: &[f64], jac: &InputJacobian, dist: f64) -> Self {
        Walk {
            points: vec![x0.to_vec()],
            steps: vec![diag(0, jac, dist, None)],
            rank_changes: Vec::new(),
        }
    }

    fn push(&mut self, x: Vec<f64>, jac: &InputJacobian, dist: f64, prev: &InputJacobian) {
        let t = self.points.len();
        let d = diag(t, jac, dist, Some(&prev.log_probs));
        if d.soft_rank != self.steps[t - 1].soft_rank {
            self.rank_changes.push(t);
        }
        self.points.push(x);
        self.steps.push(d);
    }
}

/// Moves from `source` towards `dest` with steps of length `alpha` along the
/// projection of `dest - x` onto the distribution at the current point.
pub fn horizontal_path(
    params: &NetParams,
    source: &[f64],
    dest: &[f64],
    alpha: f64,
    max_steps: usize,
    stop_tol: f64,
) -> Result<PathRecord, PathError> {
    check_args(params, source, alpha)?;
    check_args(params, dest, alpha)?;
    let config = PathConfig {
        kind: PathKind::Horizontal,
        alpha,
        max_steps,
        stop_tol,
        seed: None,
    };
    let mut x = source.to_vec();
    let mut jac = net::input_jacobian(params, &x)?;
    let mut dist = norm(&sub(dest, &x));
    let mut walk = Walk::start(&x, &jac, dist);
    let mut violations = Vec::new();
    let mut status = PathStatus::Exhausted;
    if dist <= stop_tol {
        status = PathStatus::Converged;
    } else {
        for t in 1..=max_steps {
            let v = RowSpace::new(&jac.rows).project(&sub(dest, &x));
            let vn = norm(&v);
            if vn < STALL_NORM {
                status = PathStatus::Stalled;
                break;
            }
            x.iter_mut().zip(&v).for_each(|(a, b)| *a += alpha * b / vn);
            let next = net::input_jacobian(params, &x)?;
            let new_dist = norm(&sub(dest, &x));
            if new_dist > dist && alpha <= dist {
                violations.push(t);
            }
            walk.push(x.clone(), &next, new_dist, &jac);
            jac = next;
            dist = new_dist;
            if dist <= stop_tol {
                status = PathStatus::Converged;
                break;
            }
        }
    }
    Ok(PathRecord {
        points: walk.points,
        steps: walk.steps,
        status,
        config,
        monotonicity_violations: violations,
        rank_changes: walk.rank_changes,
    })
}

/// Unit direction drawn from the `"walk"` stream of `seed`.
pub fn random_direction(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "walk");
    let r: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let rn = norm(&r);
    r.into_iter().map(|v| v / rn).collect()
}

/// Steps of length `alpha` along the projection of one fixed random direction
/// onto `ker G` at the current point. Never converges: the status is
/// `Stalled` or `Exhausted`.
pub fn kernel_walk(
    params: &NetParams,
    x0: &[f64],
    seed: u64,
    alpha: f64,
    max_steps: usize,
) -> Result<PathRecord, PathError> {
    check_args(params, x0, alpha)?;
    let direction = random_direction(x0.len(), seed);
    let config = PathConfig {
        kind: PathKind::Kernel,
        alpha,
        max_steps,
        stop_tol: 0.0,
        seed: Some(seed),
    };
    let mut x = x0.to_vec();
    let mut jac = net::input_jacobian(params, &x)?;
    let mut walk = Walk::start(&x, &jac, 0.0);
    let mut status = PathStatus::Exhausted;
    for _ in 1..=max_steps {
        let v = RowSpace::new(&jac.rows).project_complement(&direction);
        let vn = norm(&v);
        if vn < STALL_NORM {
            status = PathStatus::Stalled;
            break;
        }
        x.iter_mut().zip(&v).for_each(|(a, b)| *a += alpha * b / vn);
        let next = net::input_jacobian(params, &x)?;
        walk.push(x.clone(), &next, norm(&sub(&x, x0)), &jac);
        jac = next;
    }
    Ok(PathRecord {
        points: walk.points,
        steps: walk.steps,
        status,
        config,
        monotonicity_violations: Vec::new(),
        rank_changes: walk.rank_changes,
    })
}

/// Every `stride`-th point of a path rendered side by side as 8-bit grey.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strip {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Path index `t` of every frame.
    pub frames: Vec<usize>,
    /// Sidecar CSV `frame,t,pred,maxp`.
    pub sidecar: String,
}

impl Strip {
    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Grey level of the one-pixel gap between frames.
const GAP_LEVEL: u8 = 128;

/// Renders the strip; `layout` overrides the square `sqrt(n) x sqrt(n)` frame shape.
pub fn path_to_strip(
    record: &PathRecord,
    stride: usize,
    layout: Option<(usize, usize)>,
) -> Result<Strip, PathError> {
    if stride == 0 {
        return Err(PathError::Invalid("stride must be at least 1".into()));
    }
    let n = record.points[0].len();
    let (rows, cols) = match layout {
        Some((r, c)) if r * c == n => (r, c),
        Some((r, c)) => {
            return Err(PathError::Invalid(format!("layout {r}x{c} does not hold {n} values")))
        }
        None => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(PathError::NotSquare { n });
            }
            (side, side)
        }
    };
    let frames: Vec<usize> = (0..record.points.len()).step_by(stride).collect();
    let width = frames.len() * cols + frames.len() - 1;
    let mut pixels = vec![GAP_LEVEL; width * rows];
    let mut sidecar = String::from("frame,t,pred,maxp\n");
    for (f, &t) in frames.iter().enumerate() {
        let x0 = f * (cols + 1);
        for r in 0..rows {
            for c in 0..cols {
                let v = record.points[t][r * cols + c].clamp(0.0, 1.0);
                pixels[r * width + x0 + c] = (v * 255.0).round() as u8;
            }
        }
        let s = &record.steps[t];
        let _ = writeln!(sidecar, "{f},{t},{},{}", s.pred, s.max_prob);
    }
    Ok(Strip {
        width,
        height: rows,
        pixels,
        frames,
        sidecar,
    })
}
