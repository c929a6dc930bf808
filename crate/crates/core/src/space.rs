//! Finite quasi-metric measure spaces with a marked obstacle set.
//!
//! Points are addressed internally by index: sample points occupy
//! `0..n_sample` (sorted by id), obstacle points follow. Obstacles carry no
//! measure.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::LineIndex;

pub type PointId = u64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: PointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

impl Point {
    pub fn new(id: PointId) -> Self {
        Point { id, coords: None }
    }

    pub fn at(id: PointId, coords: Vec<f64>) -> Self {
        Point { id, coords: Some(coords) }
    }
}

/// Dense symmetric distance table, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistTable {
    n: usize,
    data: Vec<f64>,
}

impl DistTable {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        DistTable { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::parse(
                    format!("table row {i}"),
                    format!("expected {n} entries, found {}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(DistTable { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DistTable { n: self.n, data: self.data.iter().map(|&d| f(d)).collect() }
    }

    fn permuted(&self, perm: &[usize]) -> Self {
        DistTable::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    /// Symmetry, zero diagonal and positivity off the diagonal. `zero_ok`
    /// whitelists off-diagonal pairs that may coincide.
    pub fn check(&self, ids: &[PointId], zero_ok: impl Fn(usize, usize) -> bool) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::DiagonalViolation(ids[i]));
            }
            for j in i + 1..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidDistance { a: ids[i], b: ids[j], value: a });
                }
                if a != b {
                    return Err(Error::SymmetryViolation(ids[i], ids[j]));
                }
                if a == 0.0 && !zero_ok(i, j) {
                    return Err(Error::ZeroDistance(ids[i], ids[j]));
                }
            }
        }
        Ok(())
    }

    /// Least triangular constant: max of d(x,z) / (d(x,y) + d(y,z)) over
    /// triples of distinct points, clamped below at 1.
    pub fn triangular_constant(&self, ids: &[PointId]) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::TooFewPoints);
        }
        triangular_constant_by(self.n, |i, j| self.get(i, j))
            .map_err(|(x, y, z)| Error::NotQuasiMetric(ids[x], ids[y], ids[z]))
    }
}

pub(crate) fn triangular_constant_by(
    n: usize,
    dist: impl Fn(usize, usize) -> f64 + Sync,
) -> std::result::Result<f64, (usize, usize, usize)> {
    use rayon::prelude::*;
    // Symmetric in (x, z), so only x < z is scanned.
    let per_x: Vec<std::result::Result<f64, (usize, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut k: f64 = 1.0;
            for z in x + 1..n {
                let dxz = dist(x, z);
                for y in 0..n {
                    if y == x || y == z {
                        continue;
                    }
                    let den = dist(x, y) + dist(y, z);
                    if den == 0.0 {
                        if dxz > 0.0 {
                            return Err((x, y, z));
                        }
                        continue;
                    }
                    let r = dxz / den;
                    if r > k {
                        k = r;
                    }
                }
            }
            Ok(k)
        })
        .collect();
    let mut k: f64 = 1.0;
    for r in per_x {
        k = k.max(r?);
    }
    Ok(k)
}

/// `(c1, c2)` with `c1 * d1 <= d2 <= c2 * d1` on every off-diagonal pair.
pub fn equivalence_constants(d1: &DistTable, d2: &DistTable) -> Result<(f64, f64)> {
    if d1.len() != d2.len() {
        return Err(Error::IncompatiblePointSets);
    }
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for i in 0..d1.len() {
        for j in i + 1..d1.len() {
            let (a, b) = (d1.get(i, j), d2.get(i, j));
            if a == 0.0 || b == 0.0 {
                if a != b {
                    return Err(Error::IncompatiblePointSets);
                }
                continue;
            }
            let r = b / a;
            c1 = c1.min(r);
            c2 = c2.max(r);
        }
    }
    if !c1.is_finite() {
        return Err(Error::TooFewPoints);
    }
    Ok((c1, c2))
}

/// How distances are obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// `scale * |x - y|^exponent` on the point coordinates.
    Euclidean {
        exponent: f64,
        scale: f64,
    },
    Table(DistTable),
}

impl Metric {
    pub fn euclidean() -> Self {
        Metric::Euclidean { exponent: 1.0, scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    /// Least triangular constant on sample and obstacles.
    #[serde(rename = "K")]
    pub k: f64,
    /// Doubling constant of the measure.
    #[serde(rename = "A")]
    pub a: f64,
}

#[derive(Debug)]
pub struct AugmentedSpace {
    sample: Vec<Point>,
    obstacles: Vec<Point>,
    weights: Vec<f64>,
    metric: Metric,
    dim: usize,
    coords: Vec<f64>,
    index: HashMap<PointId, usize>,
    dist_to_obstacles: Vec<f64>,
    line: Option<LineIndex>,
    diameter: f64,
    min_gap: f64,
    weight_prefix: Vec<f64>,
    k: OnceLock<std::result::Result<f64, (usize, usize, usize)>>,
}

impl Clone for AugmentedSpace {
    fn clone(&self) -> Self {
        AugmentedSpace::new(self.sample.clone(), self.weights.clone(), self.obstacles.clone(), self.metric.clone())
            .expect("cloning a validated space")
    }
}

impl AugmentedSpace {
    /// Builds and validates a space. A table metric is indexed by the
    /// concatenation `sample ++ obstacles` in the order given here; points
    /// are re-sorted by id internally.
    pub fn new(sample: Vec<Point>, weights: Vec<f64>, obstacles: Vec<Point>, metric: Metric) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        if weights.len() != sample.len() {
            return Err(Error::parse(
                "weights",
                format!("{} weights for {} sample points", weights.len(), sample.len()),
            ));
        }
        for (p, &w) in sample.iter().zip(&weights) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight { id: p.id, value: w });
            }
        }

        let ns = sample.len();
        let mut perm: Vec<usize> = (0..ns).collect();
        perm.sort_by_key(|&i| sample[i].id);
        let mut operm: Vec<usize> = (0..obstacles.len()).collect();
        operm.sort_by_key(|&i| obstacles[i].id);
        let full_perm: Vec<usize> = perm.iter().copied().chain(operm.iter().map(|&i| i + ns)).collect();

        let sample: Vec<Point> = perm.iter().map(|&i| sample[i].clone()).collect();
        let weights: Vec<f64> = perm.iter().map(|&i| weights[i]).collect();
        let obstacles: Vec<Point> = operm.iter().map(|&i| obstacles[i].clone()).collect();

        let mut index = HashMap::with_capacity(sample.len() + obstacles.len());
        for (i, p) in sample.iter().chain(&obstacles).enumerate() {
            if index.insert(p.id, i).is_some() {
                return Err(Error::DuplicateId(p.id));
            }
        }

        let total = sample.len() + obstacles.len();
        let (metric, dim, coords) = match metric {
            Metric::Table(t) => {
                if t.len() != total {
                    return Err(Error::parse(
                        "table",
                        format!("table is {0}x{0} but there are {total} points", t.len()),
                    ));
                }
                let coords = collect_coords(&sample, &obstacles, false)?;
                (Metric::Table(t.permuted(&full_perm)), coords.0, coords.1)
            }
            Metric::Euclidean { exponent, scale } => {
                if !(exponent > 0.0 && scale > 0.0 && exponent.is_finite() && scale.is_finite()) {
                    return Err(Error::Coordinates(format!("invalid exponent {exponent} or scale {scale}")));
                }
                let (dim, coords) = collect_coords(&sample, &obstacles, true)?;
                (Metric::Euclidean { exponent, scale }, dim, coords)
            }
        };

        let mut space = AugmentedSpace {
            sample,
            obstacles,
            weights,
            metric,
            dim,
            coords,
            index,
            dist_to_obstacles: Vec::new(),
            line: None,
            diameter: 0.0,
            min_gap: f64::INFINITY,
            weight_prefix: Vec::new(),
            k: OnceLock::new(),
        };
        space.validate_distances()?;
        space.finish();
        Ok(space)
    }

    fn validate_distances(&self) -> Result<()> {
        let ns = self.sample.len();
        let ids: Vec<PointId> = self.all_ids();
        let zero_ok = |i: usize, j: usize| (i < ns) != (j < ns);
        match &self.metric {
            Metric::Table(t) => t.check(&ids, zero_ok),
            Metric::Euclidean { .. } => {
                for i in 0..ids.len() {
                    for j in i + 1..ids.len() {
                        let d = self.dist(i, j);
                        if !d.is_finite() {
                            return Err(Error::InvalidDistance { a: ids[i], b: ids[j], value: d });
                        }
                        if d == 0.0 && !zero_ok(i, j) {
                            return Err(Error::ZeroDistance(ids[i], ids[j]));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn finish(&mut self) {
        let ns = self.sample.len();
        let no = self.obstacles.len();
        self.weight_prefix = std::iter::once(0.0)
            .chain(self.weights.iter().scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            }))
            .collect();
        self.dist_to_obstacles =
            (0..ns).map(|i| (ns..ns + no).map(|e| self.dist(i, e)).fold(f64::INFINITY, f64::min)).collect();

        let is_line = matches!(self.metric, Metric::Euclidean { exponent, .. } if exponent == 1.0)
            && self.dim == 1
            && self.coords[..ns].windows(2).all(|w| w[0] < w[1]);
        if is_line {
            let pos: Vec<f64> = self.coords[..ns].to_vec();
            let scale = match self.metric {
                Metric::Euclidean { scale, .. } => scale,
                _ => unreachable!(),
            };
            if scale == 1.0 {
                self.line = Some(LineIndex::new(pos, &self.dist_to_obstacles));
            }
        }
        if let Some(line) = &self.line {
            let pos = &line.pos;
            self.diameter = pos[ns - 1] - pos[0];
            self.min_gap = pos.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        } else {
            let mut diam: f64 = 0.0;
            let mut gap = f64::INFINITY;
            for i in 0..ns {
                for j in i + 1..ns {
                    let d = self.dist(i, j);
                    diam = diam.max(d);
                    gap = gap.min(d);
                }
            }
            self.diameter = diam;
            self.min_gap = gap;
        }
    }

    /// Same points and measure, different distances.
    pub fn with_metric(&self, metric: Metric) -> Result<Self> {
        AugmentedSpace::new(self.sample.clone(), self.weights.clone(), self.obstacles.clone(), metric)
    }

    /// Same points and distances, different sample weights (indexed like `sample()`).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        AugmentedSpace::new(self.sample.clone(), weights, self.obstacles.clone(), self.metric.clone())
    }

    /// Same sample and distances with the obstacles replaced. Only valid for
    /// coordinate metrics.
    pub fn with_obstacles(&self, obstacles: Vec<Point>) -> Result<Self> {
        if let Metric::Table(_) = self.metric {
            return Err(Error::Coordinates("obstacles of a table space cannot be replaced".into()));
        }
        AugmentedSpace::new(self.sample.clone(), self.weights.clone(), obstacles, self.metric.clone())
    }

    pub fn sample(&self) -> &[Point] {
        &self.sample
    }

    pub fn obstacles(&self) -> &[Point] {
        &self.obstacles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn n_sample(&self) -> usize {
        self.sample.len()
    }

    pub fn n_obstacles(&self) -> usize {
        self.obstacles.len()
    }

    /// Sample plus obstacle count.
    pub fn n_total(&self) -> usize {
        self.sample.len() + self.obstacles.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn all_ids(&self) -> Vec<PointId> {
        self.sample.iter().chain(&self.obstacles).map(|p| p.id).collect()
    }

    /// Id of the point at internal index `i`.
    pub fn id(&self, i: usize) -> PointId {
        if i < self.sample.len() {
            self.sample[i].id
        } else {
            self.obstacles[i - self.sample.len()].id
        }
    }

    pub fn index_of(&self, id: PointId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownPoint(id))
    }

    pub fn sample_index_of(&self, id: PointId) -> Result<usize> {
        let i = self.index_of(id)?;
        if i >= self.sample.len() {
            return Err(Error::NotASamplePoint(id));
        }
        Ok(i)
    }

    pub fn is_obstacle(&self, i: usize) -> bool {
        i >= self.sample.len()
    }

    /// Distance between internal indices (sample and obstacles alike).
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Table(t) => t.get(i, j),
            Metric::Euclidean { exponent, scale } => {
                let d = if self.dim == 1 {
                    (self.coords[i] - self.coords[j]).abs()
                } else {
                    let a = &self.coords[i * self.dim..(i + 1) * self.dim];
                    let b = &self.coords[j * self.dim..(j + 1) * self.dim];
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                };
                let d = if *exponent == 1.0 { d } else { d.powf(*exponent) };
                if *scale == 1.0 {
                    d
                } else {
                    scale * d
                }
            }
        }
    }

    /// Distance from sample point `i` to the obstacle set (+inf without obstacles).
    #[inline]
    pub fn dist_to_obstacles(&self, i: usize) -> f64 {
        self.dist_to_obstacles[i]
    }

    pub fn obstacle_distances(&self) -> &[f64] {
        &self.dist_to_obstacles
    }

    /// Largest distance between two sample points.
    pub fn sample_diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest positive distance between two sample points (+inf for one point).
    pub fn min_sample_gap(&self) -> f64 {
        self.min_gap
    }

    /// Radius representing the whole sample as a ball.
    pub fn full_radius(&self) -> f64 {
        if self.diameter > 0.0 {
            2.0 * self.diameter
        } else {
            1.0
        }
    }

    pub(crate) fn line(&self) -> Option<&LineIndex> {
        self.line.as_ref()
    }

    /// Least triangular constant over sample and obstacles. Coordinate
    /// metrics with exponent at most one are metrics, so their constant is 1.
    pub fn triangular_constant(&self) -> Result<f64> {
        let r = self.k.get_or_init(|| {
            if self.n_total() < 2 {
                return Ok(1.0);
            }
            match self.metric {
                Metric::Euclidean { exponent, .. } if exponent <= 1.0 => Ok(1.0),
                _ => triangular_constant_by(self.n_total(), |i, j| self.dist(i, j)),
            }
        });
        r.map_err(|(x, y, z)| Error::NotQuasiMetric(self.id(x), self.id(y), self.id(z)))
    }

    /// Dense table over sample and obstacles (internal index order).
    pub fn to_table(&self) -> DistTable {
        DistTable::from_fn(self.n_total(), |i, j| self.dist(i, j))
    }

    pub fn require_obstacles(&self) -> Result<()> {
        if self.obstacles.is_empty() {
            Err(Error::EmptyObstacleSet)
        } else {
            Ok(())
        }
    }

    /// Sample indices of the open ball `B(center, radius)`, ascending.
    pub fn ball_members(&self, center: usize, radius: f64) -> Vec<usize> {
        if let (Some(line), false) = (&self.line, self.is_obstacle(center)) {
            let (lo, hi) = line_ball(line, center, radius);
            return (lo..hi).collect();
        }
        (0..self.n_sample()).filter(|&y| self.dist(center, y) < radius).collect()
    }

    /// Measure of a set of sample indices.
    pub fn measure_of(&self, members: &[usize]) -> f64 {
        members.iter().map(|&i| self.weights[i]).sum()
    }

    /// Measure of the sample index range `lo..hi`.
    pub fn range_measure(&self, lo: usize, hi: usize) -> f64 {
        self.weight_prefix[hi] - self.weight_prefix[lo]
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Half-open index range of a line ball around sample index `center`.
pub(crate) fn line_ball(line: &LineIndex, center: usize, radius: f64) -> (usize, usize) {
    let pos = &line.pos;
    let c = pos[center];
    let lo = pos[..center].partition_point(|&p| (c - p).abs() >= radius);
    let hi = center + pos[center..].partition_point(|&p| (p - c).abs() < radius);
    (lo, hi)
}

fn collect_coords(sample: &[Point], obstacles: &[Point], required: bool) -> Result<(usize, Vec<f64>)> {
    let all = sample.iter().chain(obstacles);
    let dim = sample.iter().chain(obstacles).find_map(|p| p.coords.as_ref().map(Vec::len));
    let Some(dim) = dim else {
        if required {
            return Err(Error::Coordinates("euclidean metric needs coordinates".into()));
        }
        return Ok((0, Vec::new()));
    };
    let mut coords = Vec::new();
    for p in all {
        match &p.coords {
            Some(c) if c.len() == dim && c.iter().all(|x| x.is_finite()) => coords.extend_from_slice(c),
            Some(_) => return Err(Error::Coordinates(format!("point {} has malformed coordinates", p.id))),
            None if required => return Err(Error::Coordinates(format!("point {} has no coordinates", p.id))),
            None => return Ok((0, Vec::new())),
        }
    }
    Ok((dim, coords))
}

/// Minimal triangular constant of the space (clamped at 1).
pub fn validate_quasi_metric(space: &AugmentedSpace) -> Result<f64> {
    if space.n_total() < 2 {
        return Err(Error::TooFewPoints);
    }
    space.triangular_constant()
}
