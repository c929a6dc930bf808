//! Space files: JSON (coordinates or a distance table) and CSV point lists.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::format_f64;
use crate::space::{validate_quasi_metric, AugmentedSpace, DistTable, Metric, Point, PointId};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    id: PointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleRecord {
    id: PointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "lowercase")]
enum MetricKind {
    Euclidean,
    Table,
}

fn euclidean_kind() -> MetricKind {
    MetricKind::Euclidean
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    points: Vec<SampleRecord>,
    #[serde(default)]
    obstacles: Vec<ObstacleRecord>,
    #[serde(default = "euclidean_kind")]
    metric: MetricKind,
    /// Rows in the order `points ++ obstacles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Vec<f64>>>,
    /// Distance `scale * |x - y|^exponent` for the euclidean metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

fn from_file(f: SpaceFile, origin: &str) -> Result<AugmentedSpace> {
    let metric = match f.metric {
        MetricKind::Euclidean => {
            if f.table.is_some() {
                return Err(Error::parse(format!("{origin}: table"), "a table requires metric \"table\""));
            }
            Metric::Euclidean { exponent: f.exponent.unwrap_or(1.0), scale: f.scale.unwrap_or(1.0) }
        }
        MetricKind::Table => {
            let rows =
                f.table.ok_or_else(|| Error::parse(format!("{origin}: table"), "metric \"table\" needs a table"))?;
            Metric::Table(DistTable::from_rows(&rows)?)
        }
    };
    let weights = f.points.iter().map(|p| p.weight).collect();
    let sample = f.points.into_iter().map(|p| Point { id: p.id, coords: p.coords }).collect();
    let obstacles = f.obstacles.into_iter().map(|p| Point { id: p.id, coords: p.coords }).collect();
    AugmentedSpace::new(sample, weights, obstacles, metric)
}

/// Parses a JSON space file without the quasi-metric check.
pub fn space_from_json(text: &str, origin: &str) -> Result<AugmentedSpace> {
    let f: SpaceFile =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("{origin}:{}:{}", e.line(), e.column()), e))?;
    from_file(f, origin)
}

pub fn space_to_json(space: &AugmentedSpace) -> String {
    let (metric, table, exponent, scale) = match space.metric() {
        Metric::Euclidean { exponent, scale } => {
            (MetricKind::Euclidean, None, (*exponent != 1.0).then_some(*exponent), (*scale != 1.0).then_some(*scale))
        }
        Metric::Table(_) => (MetricKind::Table, Some(space.to_table().rows()), None, None),
    };
    let file = SpaceFile {
        points: space
            .sample()
            .iter()
            .zip(space.weights())
            .map(|(p, &w)| SampleRecord { id: p.id, coords: p.coords.clone(), weight: w })
            .collect(),
        obstacles: space.obstacles().iter().map(|p| ObstacleRecord { id: p.id, coords: p.coords.clone() }).collect(),
        metric,
        table,
        exponent,
        scale,
    };
    crate::report::to_json(&file)
}

/// Parses a CSV point list `id,x1..xn,weight,is_obstacle`.
pub fn space_from_csv(text: &str, origin: &str) -> Result<AugmentedSpace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(format!("{origin}:1"), e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let n = cols.len();
    if n < 4 || cols[0] != "id" || cols[n - 2] != "weight" || cols[n - 1] != "is_obstacle" {
        return Err(Error::parse(format!("{origin}:1"), "header must be id,x1..xn,weight,is_obstacle"));
    }
    for (i, c) in cols[1..n - 2].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(Error::parse(format!("{origin}:1:{c}"), format!("expected column x{}", i + 1)));
        }
    }
    let dim = n - 3;
    let mut sample = Vec::new();
    let mut weights = Vec::new();
    let mut obstacles = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("{origin}:{line}"), e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| -> (&str, String) { (&rec[k], format!("{origin}:{line}:{}", cols[k])) };
        let (raw, loc) = field(0);
        let id: PointId = raw.parse().map_err(|e| Error::parse(loc, e))?;
        let mut coords = Vec::with_capacity(dim);
        for k in 1..=dim {
            let (raw, loc) = field(k);
            coords.push(raw.parse::<f64>().map_err(|e| Error::parse(loc, e))?);
        }
        let (raw, loc) = field(n - 1);
        let is_obstacle = match raw.to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" | "" => false,
            other => return Err(Error::parse(loc, format!("expected 0/1/true/false, got {other:?}"))),
        };
        if is_obstacle {
            obstacles.push(Point::at(id, coords));
        } else {
            let (raw, loc) = field(n - 2);
            weights.push(raw.parse::<f64>().map_err(|e| Error::parse(loc, e))?);
            sample.push(Point::at(id, coords));
        }
    }
    AugmentedSpace::new(sample, weights, obstacles, Metric::euclidean())
}

pub fn space_to_csv(space: &AugmentedSpace) -> Result<String> {
    if space.metric() != &Metric::euclidean() {
        return Err(Error::Coordinates("the CSV format stores plain euclidean coordinates only".into()));
    }
    let dim = space.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((1..=dim).map(|k| format!("x{k}")));
    header.extend(["weight".to_string(), "is_obstacle".to_string()]);
    let csv_err = |e: csv::Error| Error::Coordinates(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let row = |p: &Point, weight: Option<f64>, obstacle: bool| -> Vec<String> {
        let mut r = vec![p.id.to_string()];
        r.extend(p.coords.iter().flatten().map(|&x| format_f64(x)));
        r.push(weight.map(format_f64).unwrap_or_default());
        r.push(if obstacle { "1" } else { "0" }.into());
        r
    };
    for (p, &wt) in space.sample().iter().zip(space.weights()) {
        w.write_record(row(p, Some(wt), false)).map_err(csv_err)?;
    }
    for p in space.obstacles() {
        w.write_record(row(p, None, true)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Coordinates(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a space file (CSV by extension, JSON otherwise) and checks that
/// its distance is a quasi-metric.
pub fn load_augmented_space(path: impl AsRef<Path>) -> Result<AugmentedSpace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let origin = path.display().to_string();
    let space = if is_csv(path) { space_from_csv(&text, &origin)? } else { space_from_json(&text, &origin)? };
    validate_quasi_metric(&space)?;
    Ok(space)
}

pub fn save_augmented_space(space: &AugmentedSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = if is_csv(path) { space_to_csv(space)? } else { space_to_json(space) };
    fs::write(path, text)?;
    Ok(())
}
