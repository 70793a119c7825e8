//! Pareto dominance, non-dominated filtering and the hypervolume indicator.
//!
//! All objective vectors are in maximization orientation: larger is better in
//! every coordinate. Objectives that are naturally minimized are negated
//! before they reach this module.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest objective count accepted by [`hypervolume_exact`].
pub const MAX_EXACT_OBJECTIVES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("objective dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exact hypervolume supports 1..={MAX_EXACT_OBJECTIVES} objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("Monte Carlo hypervolume needs at least one sample")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(pub Vec<f64>);

impl ReferencePoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A set of mutually non-dominated objective vectors with their payloads
/// (usually configurations).
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront<T> {
    members: Vec<(T, ObjectiveVector)>,
    reference: ReferencePoint,
}

impl<T> ParetoFront<T> {
    pub fn empty(reference: ReferencePoint) -> Self {
        Self { members: Vec::new(), reference }
    }

    pub fn members(&self) -> &[(T, ObjectiveVector)] {
        &self.members
    }

    pub fn into_members(self) -> Vec<(T, ObjectiveVector)> {
        self.members
    }

    pub fn reference(&self) -> &ReferencePoint {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = &ObjectiveVector> {
        self.members.iter().map(|(_, f)| f)
    }
}

fn check_dims(expected: usize, got: usize) -> Result<(), ParetoError> {
    if expected == got {
        Ok(())
    } else {
        Err(ParetoError::DimensionMismatch { expected, got })
    }
}

/// `a` dominates `b`: at least as good everywhere and strictly better
/// somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, ParetoError> {
    check_dims(a.len(), b.len())?;
    Ok(dominates_slice(&a.0, &b.0))
}

pub(crate) fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Extracts the non-dominated members of `history`, keeping the first of
/// any group of identical objective vectors. Output preserves the order in
/// which members first appear in `history`.
pub fn pareto_set<T: Clone>(
    history: &[(T, ObjectiveVector)],
    reference: ReferencePoint,
) -> Result<ParetoFront<T>, ParetoError> {
    let Some((_, first)) = history.first() else {
        return Ok(ParetoFront::empty(reference));
    };
    let k = first.len();
    check_dims(k, reference.len())?;
    let mut archive: Vec<usize> = Vec::new();
    for (i, (_, f)) in history.iter().enumerate() {
        check_dims(k, f.len())?;
        // An archived point equal to or dominating f makes f redundant.
        if archive.iter().any(|&j| weakly_dominates(&history[j].1 .0, &f.0)) {
            continue;
        }
        archive.retain(|&j| !dominates_slice(&f.0, &history[j].1 .0));
        archive.push(i);
    }
    archive.sort_unstable();
    let members = archive.into_iter().map(|i| history[i].clone()).collect();
    Ok(ParetoFront { members, reference })
}

/// Exact hypervolume dominated by `front` and bounded below by its reference
/// point.
///
/// Members that do not strictly dominate the reference point contribute no
/// volume.
pub fn hypervolume_exact<T>(front: &ParetoFront<T>) -> Result<f64, ParetoError> {
    let k = front.reference.len();
    if k == 0 || k > MAX_EXACT_OBJECTIVES {
        return Err(ParetoError::UnsupportedDimension(k));
    }
    for f in front.objectives() {
        check_dims(k, f.len())?;
    }
    Ok(hypervolume(front.objectives().map(|f| f.values()), front.reference.values()))
}

/// Hypervolume of an arbitrary point set. No dimension limit is enforced
/// here; cost grows as `O(n^(k-1) log n)`.
pub fn hypervolume<'a>(points: impl IntoIterator<Item = &'a [f64]>, reference: &[f64]) -> f64 {
    let k = reference.len();
    let mut flat = Vec::new();
    let mut n = 0;
    for p in points {
        debug_assert_eq!(p.len(), k);
        if p.iter().zip(reference).all(|(x, r)| x > r) {
            flat.extend(p.iter().zip(reference).map(|(x, r)| x - r));
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    hv_shifted(&mut flat, n, k)
}

/// Volume dominated by `n` points of dimension `k` (row-major in `flat`)
/// relative to the origin. Every coordinate must be positive.
fn hv_shifted(flat: &mut [f64], n: usize, k: usize) -> f64 {
    match k {
        1 => flat.iter().copied().fold(0.0, f64::max),
        2 => {
            let mut pts: Vec<(f64, f64)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
            pts.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut area = 0.0;
            let mut best_x = 0.0f64;
            for (i, &(x, y)) in pts.iter().enumerate() {
                best_x = best_x.max(x);
                let next_y = pts.get(i + 1).map_or(0.0, |p| p.1);
                area += best_x * (y - next_y);
            }
            area
        }
        _ => {
            // Slice along the last coordinate, from the top down. Each slab
            // between consecutive levels is covered by the (k-1)-dimensional
            // projection of every point at or above it.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| flat[b * k + k - 1].total_cmp(&flat[a * k + k - 1]));
            let km = k - 1;
            let mut active: Vec<f64> = Vec::with_capacity(n * km);
            let mut scratch: Vec<f64> = Vec::with_capacity(n * km);
            let mut slice_volume = 0.0;
            let mut total = 0.0;
            for (pos, &i) in order.iter().enumerate() {
                let proj = &flat[i * k..i * k + km];
                let covered = active.chunks_exact(km).any(|a| weakly_dominates(a, proj));
                if !covered {
                    let mut kept = Vec::with_capacity(active.len() + km);
                    for a in active.chunks_exact(km) {
                        if !weakly_dominates(proj, a) {
                            kept.extend_from_slice(a);
                        }
                    }
                    kept.extend_from_slice(proj);
                    active = kept;
                    scratch.clear();
                    scratch.extend_from_slice(&active);
                    let m = active.len() / km;
                    slice_volume = hv_shifted(&mut scratch, m, km);
                }
                let level = flat[i * k + km];
                let next = order.get(pos + 1).map_or(0.0, |&j| flat[j * k + km]);
                total += slice_volume * (level - next);
            }
            total
        }
    }
}

/// Monte Carlo hypervolume estimate with its standard error, sampling
/// uniformly in the box spanned by the reference point and the componentwise
/// maximum of the front.
pub fn hypervolume_mc<T, R: Rng + ?Sized>(
    front: &ParetoFront<T>,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64), ParetoError> {
    if n_samples == 0 {
        return Err(ParetoError::NoSamples);
    }
    let r = front.reference.values();
    let k = r.len();
    for f in front.objectives() {
        check_dims(k, f.len())?;
    }
    let mut upper = r.to_vec();
    for f in front.objectives() {
        for (u, &x) in upper.iter_mut().zip(f.values()) {
            *u = u.max(x);
        }
    }
    let volume: f64 = upper.iter().zip(r).map(|(u, l)| u - l).product();
    if front.is_empty() || volume <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let members: Vec<&[f64]> = front.objectives().map(|f| f.values()).collect();
    let mut sample = vec![0.0; k];
    let mut hits = 0usize;
    for _ in 0..n_samples {
        for ((s, &lo), &hi) in sample.iter_mut().zip(r).zip(&upper) {
            *s = lo + rng.random::<f64>() * (hi - lo);
        }
        if members.iter().any(|m| weakly_dominates(m, &sample)) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let estimate = volume * p;
    let std_error = volume * (p * (1.0 - p) / n_samples as f64).sqrt();
    Ok((estimate, std_error))
}

/// Hypervolume gained by adding `candidate` to `front`. Never negative.
pub fn hypervolume_improvement<T>(candidate: &ObjectiveVector, front: &ParetoFront<T>) -> Result<f64, ParetoError> {
    let k = front.reference.len();
    check_dims(k, candidate.len())?;
    for f in front.objectives() {
        check_dims(k, f.len())?;
    }
    Ok(improvement(candidate.values(), front.objectives().map(|f| f.values()), front.reference.values()))
}

/// `HV(points ∪ {c}) - HV(points)`, computed as the volume of the box
/// `[r, c]` minus the part of it already covered, i.e. the hypervolume of
/// the points clipped to `c`.
pub fn improvement<'a>(candidate: &[f64], points: impl IntoIterator<Item = &'a [f64]>, reference: &[f64]) -> f64 {
    let k = reference.len();
    if !candidate.iter().zip(reference).all(|(c, r)| c > r) {
        return 0.0;
    }
    let own: f64 = candidate.iter().zip(reference).map(|(c, r)| c - r).product();
    let mut clipped = Vec::new();
    let mut n = 0;
    for p in points {
        if weakly_dominates(p, candidate) {
            return 0.0;
        }
        let mut inside = true;
        for j in 0..k {
            let v = p[j].min(candidate[j]) - reference[j];
            if v <= 0.0 {
                inside = false;
                break;
            }
            clipped.push(v);
        }
        if inside {
            n += 1;
        } else {
            clipped.truncate(n * k);
        }
    }
    if n == 0 {
        return own;
    }
    (own - hv_shifted(&mut clipped, n, k)).max(0.0)
}
