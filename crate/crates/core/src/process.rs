//! Rotationally invariant α-stable paths in R^d.
//!
//! The target law of an increment over a step of length `dt` has
//! characteristic function `exp(-dt |ξ|^α)`. For α = 2 that is a centered
//! Gaussian with coordinate variance `2 dt`; for α < 2 the increment is a
//! Gaussian vector time-changed by an independent (α/2)-stable
//! subordinator, sampled exactly with Kanter's representation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::RandomStream;

/// Smallest accepted stability index. Kanter's formula loses accuracy as
/// the subordinator index approaches 0.
pub const MIN_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    dim: usize,
    alpha: f64,
    radius: f64,
    transient: bool,
    clt: bool,
    lil: bool,
}

impl ProcessParams {
    pub fn new(dim: usize, alpha: f64, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(domain(format!("alpha = {alpha} is outside (0, 2]")));
        }
        if alpha < MIN_ALPHA {
            return Err(domain(format!(
                "alpha = {alpha} is below the supported minimum {MIN_ALPHA}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain(format!("radius = {radius} must be positive")));
        }
        let ratio = dim as f64 / alpha;
        Ok(Self {
            dim,
            alpha,
            radius,
            transient: ratio > 1.0,
            clt: ratio > 1.5,
            lil: ratio > 1.8,
        })
    }

    /// Unit-radius parameters.
    pub fn unit(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(dim, alpha, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// d / α.
    pub fn ratio(&self) -> f64 {
        self.dim as f64 / self.alpha
    }

    /// d > α.
    pub fn is_transient(&self) -> bool {
        self.transient
    }

    /// d/α > 3/2, the central limit regime.
    pub fn clt_regime(&self) -> bool {
        self.clt
    }

    /// d/α > 9/5, the iterated-logarithm regime.
    pub fn lil_regime(&self) -> bool {
        self.lil
    }
}

/// Draws `S` with `E[exp(-λS)] = exp(-dt λ^ρ)` by Kanter's representation
/// `S = dt^{1/ρ} (a(U)/E)^{(1-ρ)/ρ}`.
pub fn sample_subordinator_increment(rho: f64, dt: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(domain(format!("subordinator index {rho} is outside (0, 1)")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(domain(format!("time step {dt} must be positive")));
    }
    Ok(kanter(rho, dt, stream))
}

#[inline]
fn kanter(rho: f64, dt: f64, stream: &mut RandomStream) -> f64 {
    let u = std::f64::consts::PI * stream.uniform_open();
    let e = stream.exp1();
    let one_minus = 1.0 - rho;
    // log a(u), evaluated in log space to keep the large exponents tame.
    let log_a = (rho * (rho * u).sin().ln() + one_minus * (one_minus * u).sin().ln() - u.sin().ln()) / one_minus;
    let log_s = dt.ln() / rho + (one_minus / rho) * (log_a - e.ln());
    log_s.exp()
}

/// Writes one increment over a step of length `dt` into `out`.
pub fn sample_increment_into(
    params: &ProcessParams,
    dt: f64,
    stream: &mut RandomStream,
    out: &mut [f64],
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(domain(format!("time step {dt} must be positive")));
    }
    if out.len() != params.dim {
        return Err(Error::Dimension {
            expected: params.dim,
            got: out.len(),
        });
    }
    fill_increment(params, dt, stream, out);
    Ok(())
}

#[inline]
fn fill_increment(params: &ProcessParams, dt: f64, stream: &mut RandomStream, out: &mut [f64]) {
    let scale = if params.alpha == 2.0 {
        (2.0 * dt).sqrt()
    } else {
        (2.0 * kanter(params.alpha / 2.0, dt, stream)).sqrt()
    };
    for x in out.iter_mut() {
        *x = scale * stream.standard_normal();
    }
}

/// One increment as an owned vector.
pub fn sample_increment(params: &ProcessParams, dt: f64, stream: &mut RandomStream) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.dim];
    sample_increment_into(params, dt, stream, &mut out)?;
    Ok(out)
}

/// A path sampled on a strictly increasing time grid starting at 0.
///
/// Positions are stored row-major: point `i` occupies
/// `positions[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    times: Vec<f64>,
    positions: Vec<f64>,
    params: ProcessParams,
}

impl PathSkeleton {
    /// Builds a skeleton from raw parts, checking the grid invariants.
    pub fn from_parts(times: Vec<f64>, positions: Vec<f64>, params: ProcessParams) -> Result<Self> {
        let dim = params.dim;
        if times.is_empty() {
            return Err(Error::Empty("skeleton times"));
        }
        if positions.len() != times.len() * dim {
            return Err(Error::Dimension {
                expected: times.len() * dim,
                got: positions.len(),
            });
        }
        if times[0] != 0.0 {
            return Err(domain("skeleton must start at time 0"));
        }
        if positions[..dim].iter().any(|&x| x != 0.0) {
            return Err(domain("skeleton must start at the origin"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("skeleton times must be strictly increasing"));
        }
        Ok(Self {
            times,
            positions,
            params,
        })
    }

    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.params.dim;
        &self.positions[i * d..(i + 1) * d]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("skeleton is never empty")
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.params.dim)
    }
}

/// The time grid `{0, mesh, 2 mesh, ..., t_end}`; the last point is exactly
/// `t_end` even when it is not a multiple of `mesh`.
pub fn time_grid(t_end: f64, mesh: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(domain(format!("t_end = {t_end} must be positive")));
    }
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(domain(format!("mesh = {mesh} must be positive")));
    }
    if mesh > t_end {
        return Err(domain(format!("mesh = {mesh} exceeds t_end = {t_end}")));
    }
    let steps = (t_end / mesh).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * mesh).collect();
    // Snap the last multiple onto t_end when it is within rounding of it.
    let last = times.last_mut().expect("grid has at least one point");
    if (t_end - *last).abs() <= 1e-9 * t_end {
        *last = t_end;
    } else {
        times.push(t_end);
    }
    Ok(times)
}

/// Simulates a skeleton on [`time_grid`]`(t_end, mesh)`.
pub fn simulate_skeleton(
    params: &ProcessParams,
    t_end: f64,
    mesh: f64,
    stream: &mut RandomStream,
) -> Result<PathSkeleton> {
    let times = time_grid(t_end, mesh)?;
    let d = params.dim;
    let mut positions = vec![0.0; times.len() * d];
    let mut step = vec![0.0; d];
    for i in 1..times.len() {
        fill_increment(params, times[i] - times[i - 1], stream, &mut step);
        let (done, rest) = positions.split_at_mut(i * d);
        let prev = &done[(i - 1) * d..];
        for ((x, p), s) in rest[..d].iter_mut().zip(prev).zip(&step) {
            *x = p + s;
        }
    }
    PathSkeleton::from_parts(times, positions, *params)
}

/// Keeps every `factor`-th grid point, always retaining the first and last.
pub fn subsample_skeleton(skeleton: &PathSkeleton, factor: usize) -> Result<PathSkeleton> {
    if factor == 0 {
        return Err(domain("subsampling factor must be at least 1"));
    }
    let n = skeleton.len();
    let mut keep: Vec<usize> = (0..n).step_by(factor).collect();
    if *keep.last().expect("non-empty") != n - 1 {
        keep.push(n - 1);
    }
    let times = keep.iter().map(|&i| skeleton.times[i]).collect();
    let positions = keep.iter().flat_map(|&i| skeleton.point(i).iter().copied()).collect();
    PathSkeleton::from_parts(times, positions, skeleton.params)
}

/// Empirical characteristic function with its standard error `1/√N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharFnEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

impl CharFnEstimate {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// `(1/N) Σ exp(i (x_k, ξ))`.
pub fn empirical_char_function<P: AsRef<[f64]>>(samples: &[P], xi: &[f64]) -> Result<CharFnEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("characteristic function samples"));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for s in samples {
        let s = s.as_ref();
        if s.len() != xi.len() {
            return Err(Error::Dimension {
                expected: xi.len(),
                got: s.len(),
            });
        }
        let phase: f64 = s.iter().zip(xi).map(|(a, b)| a * b).sum();
        re += phase.cos();
        im += phase.sin();
    }
    let n = samples.len() as f64;
    Ok(CharFnEstimate {
        re: re / n,
        im: im / n,
        stderr: 1.0 / n.sqrt(),
    })
}
