//! Deterministic example spaces.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{AugmentedSpace, Metric, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Uniform grid `{k/n}^dim` on `(0, 1]^dim` with power weights. Grid
    /// points that coincide with an obstacle are dropped.
    Grid {
        #[serde(default = "one_usize")]
        dimension: usize,
        n_per_side: usize,
        #[serde(default)]
        measure_exponent: f64,
        #[serde(default)]
        obstacles: Vec<Vec<f64>>,
    },
    Cantor {
        ratio: f64,
        depth: u32,
        #[serde(default = "one_u32")]
        mesh_factor: u32,
    },
    Lacunary {
        depth: u32,
    },
    File {
        path: PathBuf,
    },
}

fn one_usize() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Exponent `s` of `c * d^s`.
    #[serde(default = "one_f64")]
    pub snowflake: f64,
    #[serde(default = "one_f64")]
    pub scale: f64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind) -> Self {
        GeneratorSpec { kind, snowflake: 1.0, scale: 1.0 }
    }

    pub fn build(&self) -> Result<AugmentedSpace> {
        let base = match &self.kind {
            GeneratorKind::Grid { dimension, n_per_side, measure_exponent, obstacles } => {
                gen_grid_with(*dimension, *n_per_side, *measure_exponent, obstacles)?
            }
            GeneratorKind::Cantor { ratio, depth, mesh_factor } => gen_cantor(*ratio, *depth, *mesh_factor)?,
            GeneratorKind::Lacunary { depth } => gen_lacunary(*depth)?,
            GeneratorKind::File { path } => crate::io::load_augmented_space(path)?,
        };
        if self.snowflake == 1.0 && self.scale == 1.0 {
            Ok(base)
        } else {
            snowflake_space(&base, self.snowflake, self.scale)
        }
    }

    /// The same family at another resolution: `depth` for fractal sets,
    /// `2^depth` points per side for grids.
    pub fn at_depth(&self, depth: u32) -> Result<GeneratorSpec> {
        let kind = match &self.kind {
            GeneratorKind::Grid { dimension, measure_exponent, obstacles, .. } => GeneratorKind::Grid {
                dimension: *dimension,
                n_per_side: 1usize
                    .checked_shl(depth)
                    .ok_or_else(|| Error::InvalidSpec(format!("grid depth {depth} too large")))?,
                measure_exponent: *measure_exponent,
                obstacles: obstacles.clone(),
            },
            GeneratorKind::Cantor { ratio, mesh_factor, .. } => {
                GeneratorKind::Cantor { ratio: *ratio, depth, mesh_factor: *mesh_factor }
            }
            GeneratorKind::Lacunary { .. } => GeneratorKind::Lacunary { depth },
            GeneratorKind::File { .. } => return Err(Error::InvalidSpec("a file space has no depth parameter".into())),
        };
        Ok(GeneratorSpec { kind, snowflake: self.snowflake, scale: self.scale })
    }
}

/// Grid without obstacles.
pub fn gen_grid(dimension: usize, n_per_side: usize, measure_exponent: f64) -> Result<AugmentedSpace> {
    gen_grid_with(dimension, n_per_side, measure_exponent, &[])
}

pub fn gen_grid_with(
    dimension: usize,
    n_per_side: usize,
    measure_exponent: f64,
    obstacles: &[Vec<f64>],
) -> Result<AugmentedSpace> {
    if n_per_side < 2 {
        return Err(Error::InvalidSpec(format!("n_per_side = {n_per_side} must be at least 2")));
    }
    if dimension == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    let total = n_per_side
        .checked_pow(dimension as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::InvalidSpec("grid too large".into()))?;
    if let Some(o) = obstacles.iter().find(|o| o.len() != dimension) {
        return Err(Error::InvalidSpec(format!("obstacle {o:?} has the wrong dimension")));
    }
    let mut coords = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut c = vec![0.0; dimension];
        for slot in c.iter_mut().rev() {
            *slot = (rest % n_per_side + 1) as f64 / n_per_side as f64;
            rest /= n_per_side;
        }
        if !obstacles.contains(&c) {
            coords.push(c);
        }
    }
    let raw: Vec<f64> = coords.iter().map(|c| c.iter().map(|x| x.abs().powf(measure_exponent)).product()).collect();
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / sum).collect();
    let n = coords.len() as u64;
    let sample = coords.into_iter().enumerate().map(|(i, c)| Point::at(i as u64 + 1, c)).collect();
    let obs = obstacles.iter().enumerate().map(|(j, c)| Point::at(n + 1 + j as u64, c.clone())).collect();
    AugmentedSpace::new(sample, weights, obs, Metric::euclidean())
}

/// Endpoints of the depth-`depth` intervals of the Cantor construction that
/// keeps the outer `ratio` of every interval.
pub fn cantor_endpoints(ratio: f64, depth: u32) -> Vec<f64> {
    let mut intervals = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        intervals = intervals
            .into_iter()
            .flat_map(|(a, b)| {
                let len = (b - a) * ratio;
                [(a, a + len), (b - len, b)]
            })
            .collect();
    }
    intervals.into_iter().flat_map(|(a, b)| [a, b]).collect()
}

/// Cantor endpoints as obstacles, a uniform mesh of spacing
/// `ratio^depth / mesh_factor` as sample. Mesh points on an obstacle move
/// half a spacing inward; two points landing together are merged.
pub fn gen_cantor(ratio: f64, depth: u32, mesh_factor: u32) -> Result<AugmentedSpace> {
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(Error::InvalidSpec(format!("cantor ratio {ratio} outside (0, 1/2)")));
    }
    if depth < 1 || mesh_factor < 1 {
        return Err(Error::InvalidSpec("cantor depth and mesh_factor must be at least 1".into()));
    }
    let obstacles = cantor_endpoints(ratio, depth);
    let h = ratio.powi(depth as i32) / mesh_factor as f64;
    let steps = (1.0 / h).round() as usize;
    if steps > 1 << 20 {
        return Err(Error::InvalidSpec("cantor mesh too fine".into()));
    }
    let mut sorted = obstacles.clone();
    sorted.sort_by(f64::total_cmp);
    let hits = |x: f64| {
        let i = sorted.partition_point(|&e| e < x - h / 4.0);
        i < sorted.len() && (sorted[i] - x).abs() < h / 4.0
    };
    let mut xs: Vec<f64> = (0..=steps)
        .map(|i| {
            let x = (i as f64 * h).min(1.0);
            if !hits(x) {
                x
            } else if i == steps {
                x - h / 2.0
            } else {
                x + h / 2.0
            }
        })
        .collect();
    xs.dedup_by(|b, a| (*b - *a).abs() < h / 4.0);
    Ok(line_space(&xs, &obstacles))
}

/// Obstacles `{0} U {2^(-2^j) : j <= depth}` with a geometric mesh
/// `2^(-k) (1 + i/4)` reaching down to `2^(-2^depth) / 4`.
pub fn gen_lacunary(depth: u32) -> Result<AugmentedSpace> {
    if !(2..=10).contains(&depth) {
        return Err(Error::InvalidSpec(format!("lacunary depth {depth} outside 2..=10")));
    }
    const M: u32 = 4;
    let mut obstacles = vec![0.0];
    obstacles.extend((0..=depth).map(|j| (-(2f64.powi(j as i32))).exp2()));
    let kmax = (1u32 << depth) + 2;
    let mut xs = Vec::new();
    for k in 0..=kmax {
        let base = (-(k as f64)).exp2();
        for i in 0..M {
            let x = base * (1.0 + i as f64 / M as f64);
            if x > 1.0 {
                continue;
            }
            if obstacles.contains(&x) {
                xs.push(base * (1.0 + 0.5 / M as f64));
            } else {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    Ok(line_space(&xs, &obstacles))
}

fn line_space(xs: &[f64], obstacles: &[f64]) -> AugmentedSpace {
    let n = xs.len() as u64;
    let w = 1.0 / xs.len() as f64;
    let sample = xs.iter().enumerate().map(|(i, &x)| Point::at(i as u64 + 1, vec![x])).collect();
    let obs = obstacles.iter().enumerate().map(|(j, &x)| Point::at(n + 1 + j as u64, vec![x])).collect();
    AugmentedSpace::new(sample, vec![w; xs.len()], obs, Metric::euclidean()).expect("generated line spaces are valid")
}

/// `c * d^s`. Exponents below one need a metric input.
pub fn snowflake_space(space: &AugmentedSpace, s: f64, c: f64) -> Result<AugmentedSpace> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidSpec(format!("snowflake exponent {s} outside (0, 1]")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidSpec(format!("scale {c} must be positive")));
    }
    if s < 1.0 {
        let k = space.triangular_constant()?;
        if k > 1.0 {
            return Err(Error::SnowflakeOnNonMetric(s, k));
        }
    }
    let metric = match space.metric() {
        Metric::Euclidean { exponent, scale } => Metric::Euclidean { exponent: exponent * s, scale: c * scale.powf(s) },
        Metric::Table(t) => Metric::Table(t.map(|d| if s == 1.0 { c * d } else { c * d.powf(s) })),
    };
    space.with_metric(metric)
}
