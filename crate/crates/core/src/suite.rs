//! Property suites over sampled points: PSD, rank bound, kernel
//! characterization, the zero-mean identity in `x` and `w`, the trace
//! identity and the projection operator laws.

use crate::geometry::{self, dot, norm, spectrum, FactoredPSD, RowSpace};
use crate::net::{self, NetParams};
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;

pub const PSD_TOL: f64 = 1e-10;
pub const KERNEL_TOL: f64 = 1e-8;
pub const ZERO_MEAN_TOL: f64 = 1e-8;
pub const TRACE_TOL: f64 = 1e-10;
pub const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    pub failures: usize,
    /// Largest observed violation ratio (observed / allowed); ≤ 1 passes.
    pub worst: f64,
    pub note: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            checked: 0,
            failures: 0,
            worst: 0.0,
            note: None,
        }
    }

    fn record(&mut self, observed: f64, allowed: f64) {
        self.checked += 1;
        let ratio = if allowed > 0.0 {
            observed / allowed
        } else if observed > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.worst = self.worst.max(ratio);
        if ratio > 1.0 {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub results: Vec<SuiteResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(SuiteResult::passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,checked,failures,worst_ratio,status\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name,
                r.checked,
                r.failures,
                r.worst,
                if r.passed() { "pass" } else { "fail" }
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Random vectors per point for the kernel and projection suites.
    pub vectors_per_point: usize,
    /// Also run the zero-mean identity on parameter gradients.
    pub params_identity: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            vectors_per_point: 3,
            params_identity: true,
        }
    }
}

fn gaussian(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn max_factor_norm(m: &FactoredPSD) -> f64 {
    m.factors.iter().map(|f| norm(f)).fold(0.0, f64::max)
}

/// Runs every suite over `points`. Non-finite parameters fail the
/// `finiteness` suite and skip the rest.
pub fn run_suites(
    params: &NetParams,
    points: &[Vec<f64>],
    options: SuiteOptions,
    rng: &mut impl rand::Rng,
) -> SuiteReport {
    let mut finite = SuiteResult::new("finiteness");
    finite.checked = 1;
    if let Err(e) = params.validate() {
        finite.failures = 1;
        finite.worst = f64::INFINITY;
        finite.note = Some(e.to_string());
        return SuiteReport {
            results: vec![finite],
        };
    }
    let mut psd = SuiteResult::new("psd");
    let mut rank = SuiteResult::new("rank_bound");
    let mut kernel = SuiteResult::new("kernel");
    let mut zero_x = SuiteResult::new("zero_mean_x");
    let mut zero_w = SuiteResult::new("zero_mean_w");
    let mut trace = SuiteResult::new("trace_identity");
    let mut projection = SuiteResult::new("projection");
    let classes = params.classes();
    for x in points {
        let g = match geometry::local_data_matrix(params, x) {
            Ok(g) => g,
            Err(e) => {
                finite.failures += 1;
                finite.note = Some(e.to_string());
                continue;
            }
        };
        let s = spectrum(&g);
        let lmax = s.lambda_max();
        psd.record((-s.lambda_min()).max(0.0), PSD_TOL * lmax);
        rank.record(s.soft_rank as f64, (classes - 1) as f64);
        let sum: f64 = s.eigenvalues.iter().sum();
        trace.record((sum - s.trace).abs(), TRACE_TOL * s.trace.abs());
        zero_x.record(norm(&g.weighted_sum()), ZERO_MEAN_TOL * max_factor_norm(&g));
        if options.params_identity {
            if let Ok(f) = geometry::local_fisher_matrix(params, x) {
                zero_w.record(norm(&f.weighted_sum()), ZERO_MEAN_TOL * max_factor_norm(&f));
            }
        }
        let space = RowSpace::new(&g.factors);
        for _ in 0..options.vectors_per_point {
            let v = gaussian(x.len(), rng);
            let u = gaussian(x.len(), rng);
            let k = space.project_complement(&v);
            kernel.record(norm(&g.apply(&k)), KERNEL_TOL * lmax * norm(&k));
            let pv = space.project(&v);
            let pu = space.project(&u);
            let ppv = space.project(&pv);
            let idem = norm(&ppv.iter().zip(&pv).map(|(a, b)| a - b).collect::<Vec<_>>());
            projection.record(idem, PROJECTION_TOL * norm(&pv).max(f64::MIN_POSITIVE));
            let adj = (dot(&pu, &v) - dot(&u, &pv)).abs();
            projection.record(adj, PROJECTION_TOL * norm(&u) * norm(&v));
            projection.record((norm(&pv) - norm(&v)).max(0.0), PROJECTION_TOL * norm(&v));
        }
    }
    finite.worst = finite.worst.max(if finite.failures > 0 { f64::INFINITY } else { 0.0 });
    let mut results = vec![finite, psd, rank, kernel, zero_x];
    if options.params_identity {
        results.push(zero_w);
    }
    results.extend([trace, projection]);
    SuiteReport { results }
}

/// Uniform points in `[0,1]^n`.
pub fn uniform_points(n: usize, count: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// Whether no hidden pre-activation at `x` is within `margin` of zero.
pub fn is_generic(params: &NetParams, x: &[f64], margin: f64) -> bool {
    net::Tape::record(params, x)
        .map(|t| t.pre_activations().iter().flatten().all(|z| z.abs() > margin))
        .unwrap_or(false)
}
