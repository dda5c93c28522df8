//! Lebesgue volume of finite unions of equal closed balls.
//!
//! Three estimators share one membership oracle built on a hash grid whose
//! cells have edge equal to the ball radius: every center within distance
//! `radius` of a point lies in the point's cell or one of its `3^d`
//! neighbors.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::process::PathSkeleton;
use crate::rng::RandomStream;

/// Highest dimension supported by the hash grid.
pub const MAX_GEOMETRY_DIM: usize = 6;

/// Default cap on enumerated voxels for [`volume_grid`].
pub const DEFAULT_VOXEL_CAP: u64 = 100_000_000;

/// Samples drawn per shard by the hit-or-miss estimator.
pub const SHARD_SAMPLES: u64 = 1 << 16;

type CellKey = [i64; MAX_GEOMETRY_DIM];

/// Centers of a sausage slice together with the ball radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SausageSkeleton {
    centers: Vec<f64>,
    dim: usize,
    radius: f64,
    time_window: (f64, f64),
}

impl SausageSkeleton {
    /// `centers` is row-major with `dim` coordinates per center.
    pub fn new(centers: Vec<f64>, dim: usize, radius: f64, time_window: (f64, f64)) -> Result<Self> {
        if dim == 0 || dim > MAX_GEOMETRY_DIM {
            return Err(domain(format!(
                "sausage geometry supports 1 <= d <= {MAX_GEOMETRY_DIM}, got {dim}"
            )));
        }
        if centers.is_empty() {
            return Err(Error::Empty("sausage centers"));
        }
        if !centers.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: centers.len() % dim,
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain(format!("radius = {radius} must be positive")));
        }
        Ok(Self {
            centers,
            dim,
            radius,
            time_window,
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P], radius: f64) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("sausage centers"))?.as_ref().len();
        let mut centers = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.len(),
                });
            }
            centers.extend_from_slice(p);
        }
        Self::new(centers, dim, radius, (0.0, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn time_window(&self) -> (f64, f64) {
        self.time_window
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> std::slice::ChunksExact<'_, f64> {
        self.centers.chunks_exact(self.dim)
    }

    /// Bounding box of the centers inflated by the radius.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in self.centers() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        for k in 0..self.dim {
            lo[k] -= self.radius;
            hi[k] += self.radius;
        }
        (lo, hi)
    }

    /// Every center shifted by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        let centers = self
            .centers
            .chunks_exact(self.dim)
            .flat_map(|c| c.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Self::new(centers, self.dim, self.radius, self.time_window)
    }

    fn check_compatible(&self, other: &SausageSkeleton) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.radius != other.radius {
            return Err(domain("sausages must share the ball radius"));
        }
        Ok(())
    }
}

/// The centers of `skeleton` with times in the closed window `[s, t]`.
///
/// Window ends match grid times up to a relative slack of 1e-9, so a
/// checkpoint that lands on a grid point through rounding stays inside.
pub fn slice(skeleton: &PathSkeleton, s: f64, t: f64, radius: f64) -> Result<SausageSkeleton> {
    let end = skeleton.final_time();
    let slack = 1e-9 * end.max(1.0);
    if !(0.0 <= s && s <= t && t <= end + slack) {
        return Err(domain(format!("window [{s}, {t}] is not inside [0, {end}]")));
    }
    let times = skeleton.times();
    let lo = times.partition_point(|&x| x < s - slack);
    let hi = times.partition_point(|&x| x <= t + slack);
    if lo >= hi {
        return Err(Error::Empty("no grid point falls in the slice window"));
    }
    let d = skeleton.dim();
    SausageSkeleton::new(skeleton.positions()[lo * d..hi * d].to_vec(), d, radius, (s, t))
}

/// Hash grid over the centers with cell edge equal to the radius.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    dim: usize,
    cells: HashMap<CellKey, Vec<usize>>,
    offsets: Vec<CellKey>,
}

fn neighbor_offsets(dim: usize) -> Vec<CellKey> {
    let mut out = vec![[0i64; MAX_GEOMETRY_DIM]];
    for k in 0..dim {
        out = out
            .into_iter()
            .flat_map(|key| {
                [-1i64, 0, 1].into_iter().map(move |o| {
                    let mut next = key;
                    next[k] = o;
                    next
                })
            })
            .collect();
    }
    out
}

impl SpatialIndex {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn entries(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    fn cell_of(&self, p: &[f64]) -> CellKey {
        let mut key = [0i64; MAX_GEOMETRY_DIM];
        for (k, x) in key.iter_mut().zip(p) {
            *k = (x / self.cell_size).floor() as i64;
        }
        key
    }

    pub fn cell_members(&self, p: &[f64]) -> &[usize] {
        self.cells.get(&self.cell_of(p)).map_or(&[], Vec::as_slice)
    }

    fn shifted(&self, key: &CellKey, off: &CellKey) -> CellKey {
        let mut out = *key;
        for k in 0..self.dim {
            out[k] += off[k];
        }
        out
    }

    /// Cells whose 3^d neighborhood holds at least one center; their union
    /// covers the sausage.
    fn candidate_cells(&self) -> HashSet<CellKey> {
        let mut out = HashSet::with_capacity(self.cells.len() * self.offsets.len() / 2);
        for key in self.cells.keys() {
            for off in &self.offsets {
                out.insert(self.shifted(key, off));
            }
        }
        out
    }

    /// Center indices in the 3^d neighborhood of `key`.
    fn neighborhood(&self, key: &CellKey) -> Vec<usize> {
        let mut out = Vec::new();
        for off in &self.offsets {
            if let Some(members) = self.cells.get(&self.shifted(key, off)) {
                out.extend_from_slice(members);
            }
        }
        out
    }
}

pub fn build_spatial_index(skeleton: &SausageSkeleton) -> SpatialIndex {
    let mut index = SpatialIndex {
        cell_size: skeleton.radius,
        dim: skeleton.dim,
        cells: HashMap::new(),
        offsets: neighbor_offsets(skeleton.dim),
    };
    for (i, c) in skeleton.centers().enumerate() {
        let key = index.cell_of(c);
        index.cells.entry(key).or_default().push(i);
    }
    index
}

#[inline]
fn within(skeleton: &SausageSkeleton, members: &[usize], p: &[f64]) -> bool {
    let r2 = skeleton.radius * skeleton.radius;
    members.iter().any(|&i| {
        let c = skeleton.center(i);
        let d2: f64 = c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= r2
    })
}

/// Whether `p` lies in the union of closed balls.
pub fn contains(index: &SpatialIndex, skeleton: &SausageSkeleton, p: &[f64]) -> bool {
    debug_assert_eq!(p.len(), skeleton.dim);
    let key = index.cell_of(p);
    index.offsets.iter().any(|off| {
        index
            .cells
            .get(&index.shifted(&key, off))
            .is_some_and(|members| within(skeleton, members, p))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Exact1d,
    Grid,
    Hitmiss,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Exact1d => "exact1d",
            MethodTag::Grid => "grid",
            MethodTag::Hitmiss => "hitmiss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Resolution {
    Exact,
    VoxelEdge(f64),
    Samples(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stat_error: f64,
    pub method: MethodTag,
    pub resolution: Resolution,
}

/// Estimator choice with its resolution knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VolumeMethod {
    Exact1d,
    Grid { voxel_edge: f64 },
    HitOrMiss { samples: u64 },
}

impl VolumeMethod {
    pub fn tag(&self) -> MethodTag {
        match self {
            VolumeMethod::Exact1d => MethodTag::Exact1d,
            VolumeMethod::Grid { .. } => MethodTag::Grid,
            VolumeMethod::HitOrMiss { .. } => MethodTag::Hitmiss,
        }
    }
}

/// Sorted, merged `[c - r, c + r]` intervals of a one-dimensional sausage.
pub fn merged_intervals(skeleton: &SausageSkeleton) -> Result<Vec<(f64, f64)>> {
    if skeleton.dim != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: skeleton.dim,
        });
    }
    let r = skeleton.radius;
    let mut centers = skeleton.centers.clone();
    centers.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        let (a, b) = (c - r, c + r);
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    Ok(out)
}

fn exact(value: f64) -> VolumeEstimate {
    VolumeEstimate {
        value,
        stat_error: 0.0,
        method: MethodTag::Exact1d,
        resolution: Resolution::Exact,
    }
}

pub fn volume_exact_1d(skeleton: &SausageSkeleton) -> Result<VolumeEstimate> {
    let merged = merged_intervals(skeleton)?;
    Ok(exact(merged.iter().map(|(a, b)| b - a).sum()))
}

/// Number of connected components of a one-dimensional sausage.
pub fn components_1d(skeleton: &SausageSkeleton) -> Result<usize> {
    Ok(merged_intervals(skeleton)?.len())
}

fn intersect_intervals(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Voxel indices `m` along one axis whose centers `(m + ½) e` fall in
/// cell `c` of edge `s`.
fn axis_voxels(c: i64, s: f64, e: f64) -> Vec<i64> {
    let lo = ((c as f64) * s / e - 0.5).floor() as i64 - 1;
    let hi = ((c as f64 + 1.0) * s / e - 0.5).ceil() as i64 + 1;
    (lo..=hi)
        .filter(|&m| (((m as f64) + 0.5) * e / s).floor() as i64 == c)
        .collect()
}

/// Counts voxel centers of the origin-anchored lattice of edge `e` lying in
/// every sausage of `parts`, visiting only `cells`.
fn count_voxels(parts: &[(&SausageSkeleton, &SpatialIndex)], cells: &[CellKey], e: f64, cap: u64) -> Result<u64> {
    let (sk0, idx0) = parts[0];
    let dim = sk0.dim;
    let s = idx0.cell_size;
    let axes: Vec<Vec<Vec<i64>>> = cells
        .iter()
        .map(|key| (0..dim).map(|k| axis_voxels(key[k], s, e)).collect())
        .collect();
    let needed: u128 = axes
        .iter()
        .map(|a| a.iter().map(|v| v.len() as u128).product::<u128>())
        .sum();
    if needed > cap as u128 {
        return Err(Error::VoxelBudget { needed, cap });
    }
    let count = cells
        .par_iter()
        .zip(axes.par_iter())
        .map(|(key, axis)| {
            let lists: Vec<Vec<usize>> = parts.iter().map(|(_, idx)| idx.neighborhood(key)).collect();
            if lists.iter().any(Vec::is_empty) {
                return 0u64;
            }
            let mut hits = 0u64;
            let mut p = [0.0f64; MAX_GEOMETRY_DIM];
            let mut cursor = vec![0usize; dim];
            if axis.iter().any(Vec::is_empty) {
                return 0;
            }
            loop {
                for k in 0..dim {
                    p[k] = (axis[k][cursor[k]] as f64 + 0.5) * e;
                }
                if parts
                    .iter()
                    .zip(&lists)
                    .all(|((sk, _), members)| within(sk, members, &p[..dim]))
                {
                    hits += 1;
                }
                // odometer increment
                let mut k = 0;
                loop {
                    cursor[k] += 1;
                    if cursor[k] < axis[k].len() {
                        break;
                    }
                    cursor[k] = 0;
                    k += 1;
                    if k == dim {
                        return hits;
                    }
                }
            }
        })
        .sum();
    Ok(count)
}

fn check_voxel_edge(skeleton: &SausageSkeleton, voxel_edge: f64) -> Result<()> {
    if !(voxel_edge > 0.0) || voxel_edge > skeleton.radius / 2.0 {
        return Err(domain(format!(
            "voxel edge {voxel_edge} must lie in (0, radius/2 = {}]",
            skeleton.radius / 2.0
        )));
    }
    Ok(())
}

fn sorted_cells(set: HashSet<CellKey>) -> Vec<CellKey> {
    let mut v: Vec<CellKey> = set.into_iter().collect();
    v.sort_unstable();
    v
}

pub fn volume_grid(skeleton: &SausageSkeleton, voxel_edge: f64) -> Result<VolumeEstimate> {
    volume_grid_with_cap(skeleton, voxel_edge, DEFAULT_VOXEL_CAP)
}

/// Voxel-count estimate: voxels of edge `voxel_edge` on the lattice anchored
/// at the origin whose centers lie in the sausage.
pub fn volume_grid_with_cap(skeleton: &SausageSkeleton, voxel_edge: f64, cap: u64) -> Result<VolumeEstimate> {
    check_voxel_edge(skeleton, voxel_edge)?;
    let index = build_spatial_index(skeleton);
    let cells = sorted_cells(index.candidate_cells());
    let count = count_voxels(&[(skeleton, &index)], &cells, voxel_edge, cap)?;
    Ok(grid_estimate(count, voxel_edge, skeleton.dim))
}

fn grid_estimate(count: u64, voxel_edge: f64, dim: usize) -> VolumeEstimate {
    VolumeEstimate {
        value: count as f64 * voxel_edge.powi(dim as i32),
        stat_error: 0.0,
        method: MethodTag::Grid,
        resolution: Resolution::VoxelEdge(voxel_edge),
    }
}

/// Where hit-or-miss samples are drawn from.
enum SamplingRegion {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Cells { keys: Vec<CellKey>, size: f64 },
}

impl SamplingRegion {
    fn volume(&self, dim: usize) -> f64 {
        match self {
            SamplingRegion::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product(),
            SamplingRegion::Cells { keys, size } => keys.len() as f64 * size.powi(dim as i32),
        }
    }

    fn sample(&self, dim: usize, stream: &mut RandomStream, p: &mut [f64]) {
        match self {
            SamplingRegion::Box { lo, hi } => {
                for k in 0..dim {
                    p[k] = lo[k] + (hi[k] - lo[k]) * stream.uniform();
                }
            }
            SamplingRegion::Cells { keys, size } => {
                let key = &keys[stream.below(keys.len())];
                for k in 0..dim {
                    p[k] = (key[k] as f64 + stream.uniform()) * size;
                }
            }
        }
    }

    /// The smaller of the box and the cell cover.
    fn choose(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<CellKey>, size: f64, dim: usize) -> Self {
        let bx = SamplingRegion::Box { lo, hi };
        let cover = SamplingRegion::Cells { keys: cells, size };
        if cover.volume(dim) < bx.volume(dim) {
            cover
        } else {
            bx
        }
    }
}

fn hit_or_miss(
    parts: &[(&SausageSkeleton, &SpatialIndex)],
    region: &SamplingRegion,
    n_samples: u64,
    stream: &RandomStream,
) -> VolumeEstimate {
    let dim = parts[0].0.dim;
    let volume = region.volume(dim);
    let shards = n_samples.div_ceil(SHARD_SAMPLES);
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut sub = stream.derive(shard);
            let take = SHARD_SAMPLES.min(n_samples - shard * SHARD_SAMPLES);
            let mut p = [0.0f64; MAX_GEOMETRY_DIM];
            let mut hits = 0u64;
            for _ in 0..take {
                region.sample(dim, &mut sub, &mut p[..dim]);
                if parts.iter().all(|(sk, idx)| contains(idx, sk, &p[..dim])) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let n = n_samples as f64;
    let frac = hits as f64 / n;
    VolumeEstimate {
        value: volume * frac,
        stat_error: volume * (frac * (1.0 - frac) / n).sqrt(),
        method: MethodTag::Hitmiss,
        resolution: Resolution::Samples(n_samples),
    }
}

fn check_samples(n_samples: u64) -> Result<()> {
    if n_samples < 100 {
        return Err(domain(format!(
            "hit-or-miss needs at least 100 samples, got {n_samples}"
        )));
    }
    Ok(())
}

/// Hit-or-miss estimate from uniform samples over a region containing the
/// sausage. Samples are drawn in fixed-size shards, each from its own
/// sub-stream of `stream`, so the result does not depend on thread count.
pub fn volume_hit_or_miss(skeleton: &SausageSkeleton, n_samples: u64, stream: &RandomStream) -> Result<VolumeEstimate> {
    check_samples(n_samples)?;
    let index = build_spatial_index(skeleton);
    let (lo, hi) = skeleton.bounding_box();
    let region = SamplingRegion::choose(
        lo,
        hi,
        sorted_cells(index.candidate_cells()),
        index.cell_size,
        skeleton.dim,
    );
    Ok(hit_or_miss(&[(skeleton, &index)], &region, n_samples, stream))
}

pub fn estimate_volume(
    skeleton: &SausageSkeleton,
    method: &VolumeMethod,
    stream: &RandomStream,
) -> Result<VolumeEstimate> {
    match *method {
        VolumeMethod::Exact1d => volume_exact_1d(skeleton),
        VolumeMethod::Grid { voxel_edge } => volume_grid(skeleton, voxel_edge),
        VolumeMethod::HitOrMiss { samples } => volume_hit_or_miss(skeleton, samples, stream),
    }
}

fn zero(method: &VolumeMethod) -> VolumeEstimate {
    VolumeEstimate {
        value: 0.0,
        stat_error: 0.0,
        method: method.tag(),
        resolution: match *method {
            VolumeMethod::Exact1d => Resolution::Exact,
            VolumeMethod::Grid { voxel_edge } => Resolution::VoxelEdge(voxel_edge),
            VolumeMethod::HitOrMiss { samples } => Resolution::Samples(samples),
        },
    }
}

/// Volume of the intersection of two sausages with the same radius.
pub fn intersection_volume(
    a: &SausageSkeleton,
    b: &SausageSkeleton,
    method: &VolumeMethod,
    stream: &RandomStream,
) -> Result<VolumeEstimate> {
    a.check_compatible(b)?;
    let dim = a.dim;
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    let lo: Vec<f64> = alo.iter().zip(&blo).map(|(x, y)| x.max(*y)).collect();
    let hi: Vec<f64> = ahi.iter().zip(&bhi).map(|(x, y)| x.min(*y)).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Ok(zero(method));
    }
    match *method {
        VolumeMethod::Exact1d => Ok(exact(intersect_intervals(&merged_intervals(a)?, &merged_intervals(b)?))),
        VolumeMethod::Grid { voxel_edge } => {
            check_voxel_edge(a, voxel_edge)?;
            let (ia, ib) = (build_spatial_index(a), build_spatial_index(b));
            let cb = ib.candidate_cells();
            let cells = sorted_cells(ia.candidate_cells().into_iter().filter(|k| cb.contains(k)).collect());
            let count = count_voxels(&[(a, &ia), (b, &ib)], &cells, voxel_edge, DEFAULT_VOXEL_CAP)?;
            Ok(grid_estimate(count, voxel_edge, dim))
        }
        VolumeMethod::HitOrMiss { samples } => {
            check_samples(samples)?;
            let (ia, ib) = (build_spatial_index(a), build_spatial_index(b));
            let cb = ib.candidate_cells();
            let cells = sorted_cells(ia.candidate_cells().into_iter().filter(|k| cb.contains(k)).collect());
            if cells.is_empty() {
                return Ok(zero(method));
            }
            let region = SamplingRegion::choose(lo, hi, cells, ia.cell_size, dim);
            Ok(hit_or_miss(&[(a, &ia), (b, &ib)], &region, samples, stream))
        }
    }
}

// ordered by `total_cmp`, so equality and order agree
#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A growing union of closed intervals with its running total length.
#[derive(Debug, Clone, Default)]
pub struct IntervalUnion {
    // start -> end, pairwise disjoint
    parts: BTreeMap<Key, f64>,
    length: f64,
}

impl IntervalUnion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn components(&self) -> usize {
        self.parts.len()
    }

    pub fn insert(&mut self, a: f64, b: f64) {
        let (mut lo, mut hi) = (a, b);
        loop {
            let hit = self
                .parts
                .range(..=Key(hi))
                .next_back()
                .filter(|(_, &end)| end >= lo)
                .map(|(k, &end)| (*k, end));
            match hit {
                Some((start, end)) => {
                    self.parts.remove(&start);
                    self.length -= end - start.0;
                    lo = lo.min(start.0);
                    hi = hi.max(end);
                }
                None => break,
            }
        }
        self.parts.insert(Key(lo), hi);
        self.length += hi - lo;
    }

    /// Length of `[a, b] ∩ self`.
    pub fn overlap(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (start, &end) in self.parts.range(..Key(b)).rev() {
            if end <= a {
                break;
            }
            total += end.min(b) - start.0.max(a);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn line(centers: &[f64], r: f64) -> SausageSkeleton {
        SausageSkeleton::new(centers.to_vec(), 1, r, (0.0, 1.0)).unwrap()
    }

    fn ball(dim: usize) -> SausageSkeleton {
        SausageSkeleton::new(vec![0.0; dim], dim, 1.0, (0.0, 0.0)).unwrap()
    }

    #[test]
    fn index_partition() {
        let sk = ball(2);
        let idx = build_spatial_index(&sk);
        assert_eq!(idx.occupied_cells(), 1);
        let sk = SausageSkeleton::from_points(&[[0.1, 0.1], [0.2, 0.3]], 1.0).unwrap();
        let idx = build_spatial_index(&sk);
        assert_eq!(idx.occupied_cells(), 1);
        assert_eq!(idx.cell_members(&[0.5, 0.5]), &[0, 1]);
        let pts: Vec<[f64; 2]> = (0..57).map(|i| [i as f64 * 0.37, (i as f64).sin() * 4.0]).collect();
        let idx = build_spatial_index(&SausageSkeleton::from_points(&pts, 0.7).unwrap());
        assert_eq!(idx.entries(), 57);
        assert_eq!(idx.cell_size(), 0.7);
    }

    #[test]
    fn closed_ball_membership() {
        let sk = SausageSkeleton::from_points(&[[0.5, -0.25]], 1.0).unwrap();
        let idx = build_spatial_index(&sk);
        assert!(contains(&idx, &sk, &[0.5, -0.25]));
        assert!(contains(&idx, &sk, &[1.5, -0.25]));
        assert!(!contains(&idx, &sk, &[1.5 + 1e-9, -0.25]));
    }

    #[test]
    fn exact_1d_examples() {
        assert_eq!(volume_exact_1d(&line(&[0.0, 0.5, 3.0], 1.0)).unwrap().value, 4.5);
        assert_relative_eq!(
            volume_exact_1d(&line(&[2.0], 0.3)).unwrap().value,
            0.6,
            max_relative = 1e-15
        );
        assert_eq!(volume_exact_1d(&line(&[0.0, 0.0], 1.0)).unwrap().value, 2.0);
        assert_eq!(components_1d(&line(&[0.0, 0.5, 3.0], 1.0)).unwrap(), 2);
        assert!(volume_exact_1d(&ball(2)).is_err());
    }

    #[test]
    fn grid_single_balls() {
        let v = volume_grid(&ball(2), 0.01).unwrap();
        assert!((v.value - PI).abs() < 0.01, "{}", v.value);
        assert_eq!(v.stat_error, 0.0);
        assert_eq!(v.resolution, Resolution::VoxelEdge(0.01));
        let v = volume_grid(&ball(3), 0.02).unwrap();
        assert!((v.value - 4.0 * PI / 3.0).abs() < 0.02, "{}", v.value);
    }

    #[test]
    fn grid_rejects_coarse_voxels_and_budget() {
        assert!(volume_grid(&ball(2), 0.6).is_err());
        assert!(matches!(
            volume_grid_with_cap(&ball(3), 0.01, 1000),
            Err(Error::VoxelBudget { .. })
        ));
    }

    #[test]
    fn hit_or_miss_disk() {
        let stream = RandomStream::new(5, 5);
        let v = volume_hit_or_miss(&ball(2), 1_000_000, &stream).unwrap();
        assert!((v.value - PI).abs() < 3.0 * v.stat_error, "{v:?}");
        assert!(volume_hit_or_miss(&ball(2), 99, &stream).is_err());
    }

    #[test]
    fn intersection_examples() {
        let s = RandomStream::new(1, 1);
        let a = line(&[0.0], 1.0);
        let b = line(&[1.0], 1.0);
        assert_eq!(
            intersection_volume(&a, &b, &VolumeMethod::Exact1d, &s).unwrap().value,
            1.0
        );

        let far = SausageSkeleton::from_points(&[[5.0, 0.0]], 1.0).unwrap();
        for m in [
            VolumeMethod::Grid { voxel_edge: 0.1 },
            VolumeMethod::HitOrMiss { samples: 1000 },
        ] {
            assert_eq!(intersection_volume(&ball(2), &far, &m, &s).unwrap().value, 0.0);
        }

        let sk = SausageSkeleton::from_points(&[[0.0, 0.0], [0.8, 0.3], [1.7, -0.2]], 1.0).unwrap();
        let g = VolumeMethod::Grid { voxel_edge: 0.02 };
        let whole = estimate_volume(&sk, &g, &s).unwrap().value;
        assert_eq!(intersection_volume(&sk, &sk, &g, &s).unwrap().value, whole);
    }

    #[test]
    fn slicing_windows() {
        let p = crate::process::ProcessParams::unit(1, 1.0).unwrap();
        let path = PathSkeleton::from_parts(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 2.0, 3.0, 4.0], p).unwrap();
        assert_eq!(slice(&path, 0.0, 4.0, 1.0).unwrap().len(), 5);
        let last = slice(&path, 4.0, 4.0, 1.0).unwrap();
        assert_eq!(last.len(), 1);
        assert_eq!(last.center(0), &[4.0]);
        let a = slice(&path, 0.0, 2.0, 1.0).unwrap();
        let b = slice(&path, 2.0, 4.0, 1.0).unwrap();
        assert_eq!(a.center(a.len() - 1), b.center(0));
        assert!(slice(&path, 0.5, 0.7, 1.0).is_err());
        assert!(slice(&path, 3.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn interval_union_matches_merge() {
        let centers = [0.0, 5.0, 0.7, 2.9, -3.0, 1.4, 10.0, 7.6];
        let mut u = IntervalUnion::new();
        for (k, c) in centers.iter().enumerate() {
            u.insert(c - 1.0, c + 1.0);
            let v = volume_exact_1d(&line(&centers[..=k], 1.0)).unwrap().value;
            assert_relative_eq!(u.length(), v, max_relative = 1e-14);
        }
        let merged = merged_intervals(&line(&centers, 1.0)).unwrap();
        assert_eq!(u.components(), merged.len());
        let probe = line(&[2.5, 6.0], 1.0);
        let direct = intersect_intervals(&merged, &merged_intervals(&probe).unwrap());
        let via = u.overlap(1.5, 3.5) + u.overlap(5.0, 7.0);
        assert_relative_eq!(direct, via, max_relative = 1e-14);
    }
}
