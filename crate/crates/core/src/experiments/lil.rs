use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{in_pool, require, Cell, Check, ExperimentReport, Table};
use crate::error::{domain, Error, Result};
use crate::geometry::{
    estimate_volume, intersection_volume, merged_intervals, IntervalUnion, SausageSkeleton, VolumeEstimate,
    VolumeMethod,
};
use crate::potential::{h_function, lil_normalizer_chung, lil_normalizer_khintchine, process_capacity_for};
use crate::process::{sample_increment_into, PathSkeleton, ProcessParams};
use crate::rng::RandomStream;
use crate::stats::mean;

/// Largest block index; `k² 2^k` must fit comfortably in a `u128`.
const MAX_BLOCK: u32 = 60;

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// The times `2^k + ⌊j 2^{k/2} / k⌋`, `j = 0..=⌊k 2^{k/2}⌋`, for
/// `k = 1..=k_max`, sorted and deduplicated, with 0 prepended.
///
/// Each floor is evaluated in integers: `⌊j 2^{k/2}/k⌋ = ⌊isqrt(j² 2^k)/k⌋`.
pub fn lil_checkpoint_sequence(k_max: u32) -> Result<Vec<u64>> {
    if k_max == 0 || k_max > MAX_BLOCK {
        return Err(domain(format!("k_max = {k_max} must lie in 1..={MAX_BLOCK}")));
    }
    let mut out = vec![0u64];
    for k in 1..=k_max {
        let base = 1u128 << k;
        let kk = u128::from(k);
        let j_max = isqrt(kk * kk * base);
        for j in 0..=j_max {
            out.push((base + isqrt(j * j * base) / kk) as u64);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `2^{k/2}/k + 1` for the block `2^k ≤ n < 2^{k+1}`; `None` below 2.
pub fn lil_gap_bound(n: u64) -> Option<f64> {
    if n < 2 {
        return None;
    }
    let k = 63 - n.leading_zeros();
    Some(2f64.powf(f64::from(k) / 2.0) / f64::from(k) + 1.0)
}

/// Exact form of `next - n ≤ 2^{k/2}/k + 1`: `(k (next - n - 1))² ≤ 2^k`.
pub fn gap_bound_holds(n: u64, next: u64) -> bool {
    if n < 2 || next <= n {
        return next >= n;
    }
    let k = u128::from(63 - n.leading_zeros());
    let excess = u128::from(next - n - 1);
    (k * excess) * (k * excess) <= 1u128 << k
}

/// Normalized LIL series at the checkpoints with `t ≥ e^e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilSeries {
    pub t: Vec<f64>,
    pub khintchine: Vec<f64>,
    /// `sup_{s ≤ t} |V_s - s Cap|` over all checkpoints up to `t`.
    pub running_sup: Vec<f64>,
    pub chung: Vec<f64>,
    /// Fraction of retained checkpoints with `|khintchine| ≤ 1.5`.
    pub envelope_fraction: f64,
}

/// Khintchine and Chung statistics of one volume path.
pub fn lil_statistics(checkpoints: &[f64], volumes: &[f64], cap: f64, sigma2: f64) -> Result<LilSeries> {
    if checkpoints.len() != volumes.len() {
        return Err(Error::Dimension {
            expected: checkpoints.len(),
            got: volumes.len(),
        });
    }
    if !(sigma2 > 0.0) {
        return Err(domain("LIL normalizers need sigma2 > 0"));
    }
    let sigma = sigma2.sqrt();
    let threshold = std::f64::consts::E.exp();
    let mut series = LilSeries {
        t: Vec::new(),
        khintchine: Vec::new(),
        running_sup: Vec::new(),
        chung: Vec::new(),
        envelope_fraction: 0.0,
    };
    let mut sup: f64 = 0.0;
    for (&t, &v) in checkpoints.iter().zip(volumes) {
        let dev = v - t * cap;
        sup = sup.max(dev.abs());
        if t < threshold {
            continue;
        }
        series.t.push(t);
        series.khintchine.push(dev / lil_normalizer_khintchine(t, sigma)?);
        series.running_sup.push(sup);
        series.chung.push(sup / lil_normalizer_chung(t, sigma)?);
    }
    if series.t.is_empty() {
        return Err(Error::Empty("checkpoints beyond e^e"));
    }
    let inside = series.khintchine.iter().filter(|k| k.abs() <= 1.5).count();
    series.envelope_fraction = inside as f64 / series.t.len() as f64;
    Ok(series)
}

// Closed windows get the same slack as `slice`.
fn within(time: f64, t: f64) -> bool {
    time <= t + 1e-9 * t.abs().max(1.0)
}

/// Exact 1-d volumes `λ(S[0, t])` at increasing `checkpoints`, in one
/// incremental sweep over the path.
pub fn path_volumes_at(path: &PathSkeleton, radius: f64, checkpoints: &[f64]) -> Result<Vec<f64>> {
    if path.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: path.dim(),
        });
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("checkpoints must be non-decreasing"));
    }
    let mut union = IntervalUnion::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut i = 0;
    for &t in checkpoints {
        while i < path.len() && within(path.times()[i], t) {
            let x = path.point(i)[0];
            union.insert(x - radius, x + radius);
            i += 1;
        }
        if i == 0 {
            return Err(Error::Empty("path points before checkpoint"));
        }
        out.push(union.length());
    }
    Ok(out)
}

/// A time grid through every checkpoint, with steps of at most about
/// `mesh` in between.
fn checkpoint_grid(checkpoints: &[f64], mesh: f64) -> Vec<f64> {
    let mut grid = vec![checkpoints[0]];
    for w in checkpoints.windows(2) {
        let steps = ((w[1] - w[0]) / mesh).round().max(1.0) as usize;
        let dt = (w[1] - w[0]) / steps as f64;
        grid.extend((1..steps).map(|s| w[0] + s as f64 * dt));
        grid.push(w[1]);
    }
    grid
}

fn simulate_on_grid(params: &ProcessParams, grid: Vec<f64>, stream: &mut RandomStream) -> Result<PathSkeleton> {
    let d = params.dim();
    let mut positions = vec![0.0; grid.len() * d];
    let mut step = vec![0.0; d];
    for i in 1..grid.len() {
        sample_increment_into(params, grid[i] - grid[i - 1], stream, &mut step)?;
        for c in 0..d {
            positions[i * d + c] = positions[(i - 1) * d + c] + step[c];
        }
    }
    PathSkeleton::from_parts(grid, positions, *params)
}

/// Streams a 1-d path through the checkpoints without storing it.
fn streamed_volumes_1d(
    params: &ProcessParams,
    checkpoints: &[f64],
    mesh: f64,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    let r = params.radius();
    let mut union = IntervalUnion::new();
    union.insert(-r, r);
    let mut out = vec![union.length()];
    let mut x = 0.0;
    let mut step = [0.0];
    for w in checkpoints.windows(2) {
        let steps = ((w[1] - w[0]) / mesh).round().max(1.0) as usize;
        let dt = (w[1] - w[0]) / steps as f64;
        for _ in 0..steps {
            sample_increment_into(params, dt, stream, &mut step)?;
            x += step[0];
            union.insert(x - r, x + r);
        }
        out.push(union.length());
    }
    Ok(out)
}

fn lil_times(k_max: u32) -> Result<Vec<f64>> {
    Ok(lil_checkpoint_sequence(k_max)?.into_iter().map(|n| n as f64).collect())
}

/// Volumes at the checkpoints of one path. 1-d exact volumes are computed
/// on the fly; other methods store the path and measure each prefix.
fn volumes_along_path(
    params: &ProcessParams,
    checkpoints: &[f64],
    mesh: f64,
    method: &VolumeMethod,
    stream: &RandomStream,
) -> Result<Vec<f64>> {
    let mut path_stream = stream.derive(0);
    if matches!(method, VolumeMethod::Exact1d) {
        return streamed_volumes_1d(params, checkpoints, mesh, &mut path_stream);
    }
    let path = simulate_on_grid(params, checkpoint_grid(checkpoints, mesh), &mut path_stream)?;
    let idx = checkpoint_indices(&path, checkpoints)?;
    let d = params.dim();
    idx.iter()
        .enumerate()
        .map(|(i, &end)| {
            let sk = SausageSkeleton::new(
                path.positions()[..(end + 1) * d].to_vec(),
                d,
                params.radius(),
                (0.0, checkpoints[i]),
            )?;
            Ok(estimate_volume(&sk, method, &stream.derive(1 + i as u64))?.value)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilConfig {
    pub params: ProcessParams,
    pub sigma2: f64,
    pub k_max: u32,
    pub mesh: f64,
    pub method: VolumeMethod,
    pub paths: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

/// Long paths sampled at the LIL checkpoints, each reduced to its
/// Khintchine and Chung series. The run is qualitative: the envelope
/// fraction is reported without gating.
pub fn lil_paths_experiment(cfg: &LilConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let p = &cfg.params;
    if !p.lil_regime() {
        return Err(Error::Regime(format!(
            "the iterated-logarithm regime needs d/alpha > 9/5, got {}",
            p.ratio()
        )));
    }
    if !(cfg.sigma2 > 0.0) {
        return Err(domain("LIL normalizers need sigma2 > 0"));
    }
    if !(cfg.mesh > 0.0 && cfg.mesh <= 1.0) {
        return Err(domain(format!("mesh {} must lie in (0, 1]", cfg.mesh)));
    }
    if matches!(cfg.method, VolumeMethod::Exact1d) && p.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: p.dim(),
        });
    }
    require(cfg.paths >= 1, || "at least one path is required".into())?;
    let times = lil_times(cfg.k_max)?;
    let cap = process_capacity_for(p)?;
    let results = in_pool(cfg.workers, || {
        (0..cfg.paths as u64)
            .into_par_iter()
            .map(|id| {
                let stream = RandomStream::new(cfg.master_seed, id);
                let v = volumes_along_path(p, &times, cfg.mesh, &cfg.method, &stream)?;
                lil_statistics(&times, &v, cap, cfg.sigma2).map(|s| (v, s))
            })
            .collect::<Vec<_>>()
    })?;
    let mut table = Table::new(&["path", "t", "volume", "khintchine", "running_sup", "chung"]);
    let mut fractions = Vec::new();
    let (mut k_max, mut k_min, mut c_min) = (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
    for (id, r) in results.into_iter().enumerate() {
        let (volumes, s) = r?;
        let offset = times.len() - s.t.len();
        for i in 0..s.t.len() {
            table.push(vec![
                Cell::from(id),
                s.t[i].into(),
                volumes[offset + i].into(),
                s.khintchine[i].into(),
                s.running_sup[i].into(),
                s.chung[i].into(),
            ]);
        }
        k_max = s.khintchine.iter().copied().fold(k_max, f64::max);
        k_min = s.khintchine.iter().copied().fold(k_min, f64::min);
        c_min = s.chung.iter().copied().fold(c_min, f64::min);
        fractions.push(s.envelope_fraction);
    }
    let describe = vec![
        ("dim".to_string(), p.dim().to_string()),
        ("alpha".into(), p.alpha().to_string()),
        ("sigma2".into(), cfg.sigma2.to_string()),
        ("k_max".into(), cfg.k_max.to_string()),
        ("mesh".into(), cfg.mesh.to_string()),
        ("paths".into(), cfg.paths.to_string()),
        ("seed".into(), cfg.master_seed.to_string()),
    ];
    let mut report = ExperimentReport::new("lil", describe, table);
    let envelope = mean(&fractions);
    report.stat("capacity", cap, None);
    report.stat("envelope_fraction", envelope, None);
    report.stat("khintchine_max", k_max, None);
    report.stat("khintchine_min", k_min, None);
    report.stat("chung_min", c_min, None);
    report
        .checks
        .push(Check::at_least("envelope_fraction", envelope, 0.9).informational());
    Ok(report.timed(start))
}

fn checkpoint_indices(path: &PathSkeleton, checkpoints: &[f64]) -> Result<Vec<usize>> {
    let times = path.times();
    checkpoints
        .iter()
        .map(|&t| {
            let i = times.partition_point(|&s| s < t - 1e-9 * t.max(1.0));
            if i < times.len() && (times[i] - t).abs() <= 1e-9 * t.max(1.0) {
                Ok(i)
            } else {
                Err(domain(format!("checkpoint {t} is not a grid time of the path")))
            }
        })
        .collect()
}

fn piece(path: &PathSkeleton, from: usize, to: usize, radius: f64) -> Result<SausageSkeleton> {
    let d = path.dim();
    SausageSkeleton::new(
        path.positions()[from * d..(to + 1) * d].to_vec(),
        d,
        radius,
        (path.times()[from], path.times()[to]),
    )
}

/// Checks `V_{n_i} = Σ_{j<i} λ(P_j) - Σ_{j<i} J_j` along one path, where
/// `P_0 = S[n_0, n_1]`, `P_j = S(n_j, n_{j+1}]` for `j ≥ 1`, and
/// `J_j = λ(P_j ∩ S[0, n_j])`.
///
/// With `Exact1d` the intersections come from overlap queries against the
/// running interval union, so the residual is pure rounding. Other methods
/// estimate every term and compare the residual with the combined errors.
pub fn intersection_process_stats(
    path: &PathSkeleton,
    checkpoints: &[f64],
    method: &VolumeMethod,
    stream: &RandomStream,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    require(checkpoints.len() >= 2, || "need at least two checkpoints".into())?;
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("checkpoints must be strictly increasing"));
    }
    let radius = path.params().radius();
    let idx = checkpoint_indices(path, checkpoints)?;
    let mut table = Table::new(&[
        "t",
        "volume",
        "piece_volume",
        "j",
        "reconstructed",
        "residual",
        "tolerance",
    ]);
    let mut reconstructed = 0.0;
    let mut err2 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    let mut js = Vec::new();

    let exact = matches!(method, VolumeMethod::Exact1d);
    if exact && path.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: path.dim(),
        });
    }
    let mut union = IntervalUnion::new();
    for i in 0..idx.len() - 1 {
        let from = if i == 0 { idx[0] } else { idx[i] + 1 };
        let p = piece(path, from, idx[i + 1], radius)?;
        let (v_piece, j, v_total, tol) = if exact {
            let merged = merged_intervals(&p)?;
            let j: f64 = merged.iter().map(|&(a, b)| union.overlap(a, b)).sum();
            for &(a, b) in &merged {
                union.insert(a, b);
            }
            let v_piece: f64 = merged.iter().map(|(a, b)| b - a).sum();
            let v_total = union.length();
            (v_piece, j, v_total, 1e-9 * v_total.max(1.0))
        } else {
            let tag = 3 * i as u64;
            let prefix = piece(path, 0, idx[i + 1], radius)?;
            let est_piece = estimate_volume(&p, method, &stream.derive(tag))?;
            let est_j = if i == 0 {
                zero_like(&est_piece)
            } else {
                let before = piece(path, 0, idx[i], radius)?;
                intersection_volume(&p, &before, method, &stream.derive(tag + 1))?
            };
            let est_total = estimate_volume(&prefix, method, &stream.derive(tag + 2))?;
            err2 += est_piece.stat_error.powi(2) + est_j.stat_error.powi(2);
            let tol = 4.0 * (err2 + est_total.stat_error.powi(2)).sqrt() + 1e-9 * est_total.value.max(1.0);
            (est_piece.value, est_j.value, est_total.value, tol)
        };
        reconstructed += v_piece - j;
        let residual = v_total - reconstructed;
        worst = worst.max(residual.abs());
        worst_excess = worst_excess.max(residual.abs() - tol);
        js.push((checkpoints[i], j));
        table.push(vec![
            checkpoints[i + 1].into(),
            v_total.into(),
            v_piece.into(),
            j.into(),
            reconstructed.into(),
            residual.into(),
            tol.into(),
        ]);
    }
    let mut report = ExperimentReport::new("intersection-process", Vec::new(), table);
    report.stat("max_abs_residual", worst, None);
    report.stat("mean_j", mean(&js.iter().map(|j| j.1).collect::<Vec<_>>()), None);
    report.checks.push(Check::at_most("identity_excess", worst_excess, 0.0));
    Ok(report.timed(start))
}

fn zero_like(e: &VolumeEstimate) -> VolumeEstimate {
    VolumeEstimate {
        value: 0.0,
        stat_error: 0.0,
        ..*e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionProcessConfig {
    pub params: ProcessParams,
    pub k_max: u32,
    pub mesh: f64,
    pub method: VolumeMethod,
    pub paths: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
}

/// Runs [`intersection_process_stats`] on independent paths through the LIL
/// checkpoints and reports the mean of each `J_j` against `h(n_j)`.
pub fn intersection_process_experiment(cfg: &IntersectionProcessConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let p = &cfg.params;
    if !(cfg.mesh > 0.0 && cfg.mesh <= 1.0) {
        return Err(domain(format!("mesh {} must lie in (0, 1]", cfg.mesh)));
    }
    require(cfg.paths >= 1, || "at least one path is required".into())?;
    let times = lil_times(cfg.k_max)?;
    let grid = checkpoint_grid(&times, cfg.mesh);
    let per_path = in_pool(cfg.workers, || {
        (0..cfg.paths as u64)
            .into_par_iter()
            .map(|id| {
                let stream = RandomStream::new(cfg.master_seed, id);
                let path = simulate_on_grid(p, grid.clone(), &mut stream.derive(0))?;
                intersection_process_stats(&path, &times, &cfg.method, &stream.derive(1))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let steps = times.len() - 1;
    let mut sums = vec![0.0; steps];
    let mut worst: f64 = 0.0;
    let mut all_passed = true;
    for r in &per_path {
        worst = worst.max(r.value("max_abs_residual").unwrap_or(f64::NAN));
        all_passed &= r.passed();
        for (s, row) in sums.iter_mut().zip(&r.table.rows) {
            if let Cell::Real(j) = row[3] {
                *s += j;
            }
        }
    }
    let mut table = Table::new(&["n", "mean_j", "h", "ratio"]);
    for (i, s) in sums.iter().enumerate() {
        let n = times[i];
        let m = s / per_path.len() as f64;
        let h = if n > 0.0 && p.is_transient() {
            h_function(n, p.dim(), p.alpha())?
        } else {
            f64::NAN
        };
        table.push(vec![n.into(), m.into(), h.into(), (m / h).into()]);
    }
    let describe = vec![
        ("dim".to_string(), p.dim().to_string()),
        ("alpha".into(), p.alpha().to_string()),
        ("k_max".into(), cfg.k_max.to_string()),
        ("mesh".into(), cfg.mesh.to_string()),
        ("paths".into(), cfg.paths.to_string()),
        ("seed".into(), cfg.master_seed.to_string()),
    ];
    let mut report = ExperimentReport::new("intersection-process", describe, table);
    report.stat("max_abs_residual", worst, None);
    report.checks.push(Check::at_least(
        "identity_all_paths",
        f64::from(u8::from(all_passed)),
        1.0,
    ));
    Ok(report.timed(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::slice;
    use crate::geometry::volume_exact_1d;
    use crate::potential::process_capacity;
    use approx::assert_relative_eq;

    #[test]
    fn small_sequences() {
        assert_eq!(lil_checkpoint_sequence(1).unwrap(), [0, 2, 3]);
        assert_eq!(lil_checkpoint_sequence(2).unwrap(), [0, 2, 3, 4, 5, 6, 7, 8]);
        assert!(lil_checkpoint_sequence(0).is_err());
    }

    #[test]
    fn integer_floor_matches_float_floor_for_small_blocks() {
        for k in 1..=12u32 {
            let step = 2f64.powf(f64::from(k) / 2.0) / f64::from(k);
            let base = 1u128 << k;
            for j in 0..200u128 {
                let exact = isqrt(j * j * base) / u128::from(k);
                let float = (j as f64 * step).floor() as u128;
                // Floats may land a hair below an integer; never above.
                assert!(exact == float || exact == float + 1, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn gap_bound_exhaustive() {
        let seq = lil_checkpoint_sequence(20).unwrap();
        assert!(seq.windows(2).all(|w| w[0] < w[1]));
        for w in seq.windows(2).skip(1) {
            assert!(gap_bound_holds(w[0], w[1]), "{w:?}");
            let b = lil_gap_bound(w[0]).unwrap();
            assert!((w[1] - w[0]) as f64 <= b + 1e-12);
        }
        assert!(!gap_bound_holds(4, 7));
        assert_eq!(lil_gap_bound(1), None);
    }

    #[test]
    fn running_sup_and_normalizers() {
        let ts: Vec<f64> = vec![10.0, 16.0, 20.0, 40.0, 80.0];
        let cap = 1.0;
        let vs = vec![12.0, 15.0, 23.0, 39.0, 85.0];
        let s = lil_statistics(&ts, &vs, cap, 2.0).unwrap();
        assert_eq!(s.t, [16.0, 20.0, 40.0, 80.0]);
        assert_eq!(s.running_sup, [2.0, 3.0, 3.0, 5.0]);
        for (i, &t) in s.t.iter().enumerate() {
            let k = lil_normalizer_khintchine(t, 2f64.sqrt()).unwrap();
            assert_eq!(s.khintchine[i], (vs[i + 1] - t) / k);
            let c = lil_normalizer_chung(t, 2f64.sqrt()).unwrap();
            assert_eq!(s.chung[i], s.running_sup[i] / c);
        }
    }

    #[test]
    fn brownian_input_stays_in_envelope() {
        let times: Vec<f64> = lil_times(17).unwrap().into_iter().filter(|&t| t <= 1e5).collect();
        let (sigma, cap) = (1.3, 0.8);
        let mut fracs = Vec::new();
        for seed in 0..20 {
            let mut rng = RandomStream::new(77, seed);
            let mut w = 0.0;
            let mut last = 0.0;
            let vs: Vec<f64> = times
                .iter()
                .map(|&t| {
                    w += (t - last).sqrt() * rng.standard_normal();
                    last = t;
                    sigma * w + cap * t
                })
                .collect();
            fracs.push(
                lil_statistics(&times, &vs, cap, sigma * sigma)
                    .unwrap()
                    .envelope_fraction,
            );
        }
        assert!(mean(&fracs) >= 0.9, "{fracs:?}");
    }

    #[test]
    fn path_volumes_match_slices() {
        let p = ProcessParams::unit(1, 0.55).unwrap();
        let times = lil_times(4).unwrap();
        let path = simulate_on_grid(&p, checkpoint_grid(&times, 0.05), &mut RandomStream::new(1, 2)).unwrap();
        let v = path_volumes_at(&path, 1.0, &times).unwrap();
        for (t, vol) in times.iter().zip(&v) {
            let direct = volume_exact_1d(&slice(&path, 0.0, *t, 1.0).unwrap()).unwrap().value;
            assert_relative_eq!(direct, *vol, max_relative = 1e-12);
        }
    }

    #[test]
    fn streamed_and_stored_volumes_agree() {
        let p = ProcessParams::unit(1, 0.55).unwrap();
        let times = lil_times(5).unwrap();
        let s = RandomStream::new(5, 6);
        let streamed = volumes_along_path(&p, &times, 0.05, &VolumeMethod::Exact1d, &s).unwrap();
        let path = simulate_on_grid(&p, checkpoint_grid(&times, 0.05), &mut s.derive(0)).unwrap();
        let stored = path_volumes_at(&path, 1.0, &times).unwrap();
        for (a, b) in streamed.iter().zip(&stored) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn identity_is_exact_in_one_dimension() {
        let p = ProcessParams::unit(1, 0.6).unwrap();
        let times = lil_times(10).unwrap();
        let path = simulate_on_grid(&p, checkpoint_grid(&times, 0.01), &mut RandomStream::new(3, 3)).unwrap();
        let r = intersection_process_stats(&path, &times, &VolumeMethod::Exact1d, &RandomStream::new(0, 0)).unwrap();
        assert!(r.passed());
        let last = r.table.rows.last().unwrap();
        if let (Cell::Real(v), Cell::Real(res)) = (&last[1], &last[5]) {
            assert!(res.abs() <= 1e-9 * v, "{res}");
        }
    }

    #[test]
    fn two_checkpoints_is_inclusion_exclusion() {
        let p = ProcessParams::unit(1, 0.6).unwrap();
        let path = PathSkeleton::from_parts(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.5, 10.0, 0.5], p).unwrap();
        let r = intersection_process_stats(
            &path,
            &[0.0, 1.0, 3.0],
            &VolumeMethod::Exact1d,
            &RandomStream::new(0, 0),
        )
        .unwrap();
        // P_0 = [-1, 2.5], P_1 = [9, 11] ∪ [-0.5, 1.5]; J_1 = 2.
        let row = &r.table.rows[1];
        assert_eq!(row[3], Cell::Real(2.0));
        assert_eq!(row[1], Cell::Real(5.5));
        assert!(r.passed());
    }

    #[test]
    fn disjoint_pieces_have_no_intersections() {
        let p = ProcessParams::unit(2, 1.5).unwrap();
        let times = [0.0, 1.0, 2.0, 3.0];
        let mut positions = Vec::new();
        for i in 0..=30usize {
            let block = if i == 0 { 0 } else { (i - 1) / 10 };
            positions.extend([10.0 * block as f64 + 0.1 * (i - 10 * block) as f64, 0.0]);
        }
        let grid: Vec<f64> = (0..=30).map(|i| i as f64 / 10.0).collect();
        let path = PathSkeleton::from_parts(grid, positions, p).unwrap();
        let r = intersection_process_stats(
            &path,
            &times,
            &VolumeMethod::Grid { voxel_edge: 0.05 },
            &RandomStream::new(0, 0),
        )
        .unwrap();
        let mut total = 0.0;
        for row in &r.table.rows {
            if let (Cell::Real(v), Cell::Real(piece), Cell::Real(j)) = (&row[1], &row[2], &row[3]) {
                assert_eq!(*j, 0.0);
                total += piece;
                assert_relative_eq!(*v, total, max_relative = 1e-12);
            }
        }
        assert!(r.passed());
    }

    #[test]
    fn lil_regime_gate() {
        let cfg = LilConfig {
            params: ProcessParams::unit(1, 0.6).unwrap(),
            sigma2: 1.0,
            k_max: 5,
            mesh: 0.05,
            method: VolumeMethod::Exact1d,
            paths: 2,
            master_seed: 1,
            workers: None,
        };
        assert!(matches!(lil_paths_experiment(&cfg), Err(Error::Regime(_))));
        let ok = LilConfig {
            params: ProcessParams::unit(1, 0.55).unwrap(),
            ..cfg
        };
        let r = lil_paths_experiment(&ok).unwrap();
        let cap = process_capacity(1, 0.55).unwrap();
        assert_relative_eq!(r.value("capacity").unwrap(), cap);
        assert!(!r.table.rows.is_empty());
    }
}
