//! Cross-sectional spatial data: units with a position, an outcome, a
//! vector of named regressors and an optional polygon footprint.
//!
//! Nonlinear features (polynomials, degree-days, spatial lags) are computed
//! here, in levels, before any differencing happens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_centroid, Point};
use crate::ordering::OrderedPath;

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub position: Point,
    pub outcome: f64,
    pub regressors: Vec<f64>,
    /// Closed ring without a repeated closing vertex.
    pub polygon: Option<Vec<Point>>,
}

impl Unit {
    pub fn new(id: impl Into<String>, position: Point, outcome: f64, regressors: Vec<f64>) -> Self {
        Unit {
            id: id.into(),
            position,
            outcome,
            regressors,
            polygon: None,
        }
    }

    /// Polygon centroid when a footprint is present, the point position otherwise.
    pub fn centroid(&self) -> Point {
        match &self.polygon {
            Some(ring) => polygon_centroid(ring),
            None => self.position,
        }
    }
}

/// Immutable collection of units sharing one regressor schema.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    outcome_name: String,
    columns: Vec<String>,
    units: Vec<Unit>,
    index: HashMap<String, usize>,
    dropped_channels: usize,
}

impl SpatialDataset {
    pub fn new(outcome_name: impl Into<String>, columns: Vec<String>, units: Vec<Unit>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        let mut index = HashMap::with_capacity(units.len());
        for (i, u) in units.iter().enumerate() {
            if index.insert(u.id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate unit id `{}`", u.id)));
            }
            if u.regressors.len() != columns.len() {
                return Err(Error::Integrity(format!(
                    "unit `{}` has {} regressors, schema has {}",
                    u.id,
                    u.regressors.len(),
                    columns.len()
                )));
            }
            if !u.outcome.is_finite() || !u.position.is_finite() || u.regressors.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!("unit `{}` has a non-finite value", u.id)));
            }
            if let Some(ring) = &u.polygon {
                if ring.len() < 3 {
                    return Err(Error::Integrity(format!(
                        "polygon of unit `{}` has {} vertices, need at least 3",
                        u.id,
                        ring.len()
                    )));
                }
                if ring.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Integrity(format!(
                        "polygon of unit `{}` has a non-finite vertex",
                        u.id
                    )));
                }
            }
        }
        Ok(SpatialDataset {
            outcome_name: outcome_name.into(),
            columns,
            units,
            index,
            dropped_channels: 0,
        })
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn unit(&self, id: &str) -> Option<&Unit> {
        self.index_of(id).map(|i| &self.units[i])
    }

    /// Channels dropped by spatial-lag transforms because they were too short.
    pub fn dropped_channels(&self) -> usize {
        self.dropped_channels
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self.column_index(name)?;
        Ok(DVector::from_iterator(
            self.len(),
            self.units.iter().map(|u| u.regressors[j]),
        ))
    }

    pub fn outcome(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.units.iter().map(|u| u.outcome))
    }

    /// N x K regressor matrix in unit order.
    pub fn regressor_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.columns.len(), |i, j| self.units[i].regressors[j])
    }

    pub fn has_polygons(&self) -> bool {
        self.units.iter().any(|u| u.polygon.is_some())
    }

    /// Keeps only the named regressor columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let columns = names.iter().map(|n| n.as_ref().to_string()).collect();
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                regressors: idx.iter().map(|&j| u.regressors[j]).collect(),
                ..u.clone()
            })
            .collect();
        let mut out = SpatialDataset::new(self.outcome_name.clone(), columns, units)?;
        out.dropped_channels = self.dropped_channels;
        Ok(out)
    }

    /// Returns a copy with the outcome replaced.
    pub fn with_outcome(&self, outcome: &[f64]) -> Result<Self> {
        if outcome.len() != self.len() {
            return Err(Error::Domain(format!(
                "outcome has length {}, dataset has {} units",
                outcome.len(),
                self.len()
            )));
        }
        let units = self
            .units
            .iter()
            .zip(outcome)
            .map(|(u, &y)| Unit {
                outcome: y,
                ..u.clone()
            })
            .collect();
        SpatialDataset::new(self.outcome_name.clone(), self.columns.clone(), units)
    }

    /// Returns a copy with one regressor column appended.
    pub fn with_column(&self, name: impl Into<String>, values: &[f64]) -> Result<Self> {
        let name = name.into();
        if self.columns.contains(&name) {
            return Err(Error::DuplicateColumn(name));
        }
        if values.len() != self.len() {
            return Err(Error::Domain(format!(
                "column `{name}` has length {}, dataset has {} units",
                values.len(),
                self.len()
            )));
        }
        let mut columns = self.columns.clone();
        columns.push(name);
        let units = self
            .units
            .iter()
            .zip(values)
            .map(|(u, &v)| {
                let mut u = u.clone();
                u.regressors.push(v);
                u
            })
            .collect();
        let mut out = SpatialDataset::new(self.outcome_name.clone(), columns, units)?;
        out.dropped_channels = self.dropped_channels;
        Ok(out)
    }

    /// Attaches polygon rings by unit id. Ids missing from the dataset are an
    /// integrity error; units without a ring keep their point position.
    pub fn with_polygons(&self, rings: HashMap<String, Vec<Point>>) -> Result<Self> {
        for id in rings.keys() {
            if !self.index.contains_key(id) {
                return Err(Error::Integrity(format!("polygon for unknown unit `{id}`")));
            }
        }
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                polygon: rings.get(&u.id).cloned().or_else(|| u.polygon.clone()),
                ..u.clone()
            })
            .collect();
        SpatialDataset::new(self.outcome_name.clone(), self.columns.clone(), units)
    }

    fn retain_indices(&self, keep: &[usize], columns: Vec<String>, extra: &BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let units = keep
            .iter()
            .map(|&i| {
                let mut u = self.units[i].clone();
                if let Some(vals) = extra.get(&i) {
                    u.regressors.extend_from_slice(vals);
                }
                u
            })
            .collect();
        SpatialDataset::new(self.outcome_name.clone(), columns, units)
    }

    /// Writes `id,coord_x,coord_y,<outcome>,<regressors...>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "id".to_string(),
            "coord_x".to_string(),
            "coord_y".to_string(),
            self.outcome_name.clone(),
        ];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for u in &self.units {
            let mut rec = vec![
                u.id.clone(),
                fmt_f64(u.position.x),
                fmt_f64(u.position.y),
                fmt_f64(u.outcome),
            ];
            rec.extend(u.regressors.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub id: String,
    pub x: String,
    pub y: String,
    pub outcome: String,
    pub regressors: Vec<String>,
}

impl CsvSchema {
    pub fn new(outcome: impl Into<String>, regressors: &[&str]) -> Self {
        CsvSchema {
            id: "id".into(),
            x: "coord_x".into(),
            y: "coord_y".into(),
            outcome: outcome.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SpatialDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses a headed CSV. Data rows are numbered from 1 in error messages.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SpatialDataset> {
    if schema.regressors.is_empty() {
        return Err(Error::Domain("schema names no regressor columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let x_col = find(&schema.x)?;
    let y_col = find(&schema.y)?;
    let out_col = find(&schema.outcome)?;
    let reg_cols = schema.regressors.iter().map(|r| find(r)).collect::<Result<Vec<_>>>()?;

    let mut units = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let num = |col: usize, name: &str| -> Result<f64> {
            let cell = rec.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: if cell.is_empty() {
                    "empty cell".to_string()
                } else {
                    format!("`{cell}` is not a number")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            Ok(v)
        };
        let id = rec.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                column: schema.id.clone(),
                message: "empty id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Integrity(format!("duplicate unit id `{id}` at data row {row}")));
        }
        let position = Point::new(num(x_col, &schema.x)?, num(y_col, &schema.y)?);
        let outcome = num(out_col, &schema.outcome)?;
        let regressors = reg_cols
            .iter()
            .zip(&schema.regressors)
            .map(|(&c, n)| num(c, n))
            .collect::<Result<Vec<_>>>()?;
        units.push(Unit::new(id, position, outcome, regressors));
    }
    SpatialDataset::new(schema.outcome.clone(), schema.regressors.clone(), units)
}

pub fn load_polygons(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<Point>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_polygons(file)
}

/// Parses the companion polygon CSV `(id, vertex_index, x, y)`. Vertices are
/// sorted by `vertex_index`; a repeated closing vertex is removed.
pub fn read_polygons<R: Read>(reader: R) -> Result<HashMap<String, Vec<Point>>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        vertex_index: i64,
        x: f64,
        y: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut raw: HashMap<String, Vec<(i64, Point)>> = HashMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: "polygon".into(),
            message: e.to_string(),
        })?;
        raw.entry(row.id)
            .or_default()
            .push((row.vertex_index, Point::new(row.x, row.y)));
    }
    let mut rings = HashMap::with_capacity(raw.len());
    for (id, mut verts) in raw {
        verts.sort_by_key(|(k, _)| *k);
        if verts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Integrity(format!("polygon `{id}` repeats a vertex index")));
        }
        let mut ring: Vec<Point> = verts.into_iter().map(|(_, p)| p).collect();
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::Integrity(format!(
                "polygon `{id}` has {} distinct vertices, need at least 3",
                ring.len()
            )));
        }
        rings.insert(id, ring);
    }
    Ok(rings)
}

/// Degree-days below and above `threshold` from hourly temperatures (°C),
/// in units of 24-hour periods.
pub fn degree_days(hourly_temps: &[f64], threshold: f64) -> Result<(f64, f64)> {
    if hourly_temps.is_empty() {
        return Err(Error::Domain(
            "degree_days needs at least one hourly temperature".into(),
        ));
    }
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::Domain(format!(
            "degree-day threshold must be positive, got {threshold}"
        )));
    }
    if hourly_temps.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("non-finite hourly temperature".into()));
    }
    let (below, above) = hourly_temps.iter().fold((0.0, 0.0), |(b, a), &t| {
        let hot = (t - threshold).max(0.0);
        (b + t.max(0.0) - hot, a + hot)
    });
    Ok((below / 24.0, above / 24.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Polynomial {
        column: String,
        degree: u32,
    },
    /// Hourly temperatures are read from `columns`; writes `<output>_below`
    /// and `<output>_above`.
    DegreeDays {
        columns: Vec<String>,
        threshold: f64,
    },
    SpatialLag {
        column: String,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub output: String,
}

impl TransformSpec {
    pub fn polynomial(column: &str, degree: u32, output: &str) -> Self {
        TransformSpec {
            kind: TransformKind::Polynomial {
                column: column.into(),
                degree,
            },
            output: output.into(),
        }
    }

    pub fn spatial_lag(column: &str, offset: usize, output: &str) -> Self {
        TransformSpec {
            kind: TransformKind::SpatialLag {
                column: column.into(),
                offset,
            },
            output: output.into(),
        }
    }

    pub fn degree_days(columns: &[&str], threshold: f64, output: &str) -> Self {
        TransformSpec {
            kind: TransformKind::DegreeDays {
                columns: columns.iter().map(|c| c.to_string()).collect(),
                threshold,
            },
            output: output.into(),
        }
    }

    fn output_columns(&self) -> Vec<String> {
        match self.kind {
            TransformKind::DegreeDays { .. } => {
                vec![format!("{}_below", self.output), format!("{}_above", self.output)]
            }
            _ => vec![self.output.clone()],
        }
    }
}

/// Appends derived columns computed in levels.
///
/// Spatial lags need `path`: within each channel the unit at position `i`
/// receives the column value at position `i - k`, and the first `k` units of
/// every channel are removed. Channels shorter than `k + 1` are removed
/// entirely and counted in [`SpatialDataset::dropped_channels`]. Units that
/// lie on no channel have no lag and are removed as well.
pub fn apply_transforms(
    ds: &SpatialDataset,
    path: Option<&OrderedPath>,
    specs: &[TransformSpec],
) -> Result<SpatialDataset> {
    let mut cur = ds.clone();
    for spec in specs {
        for name in spec.output_columns() {
            if cur.columns.contains(&name) {
                return Err(Error::DuplicateColumn(name));
            }
        }
        cur = match &spec.kind {
            TransformKind::Polynomial { column, degree } => {
                if *degree < 2 {
                    return Err(Error::Domain(format!("polynomial degree must be >= 2, got {degree}")));
                }
                let base = cur.column(column)?;
                let vals: Vec<f64> = base.iter().map(|v| v.powi(*degree as i32)).collect();
                cur.with_column(spec.output.clone(), &vals)?
            }
            TransformKind::DegreeDays { columns, threshold } => {
                let idx = columns
                    .iter()
                    .map(|c| cur.column_index(c))
                    .collect::<Result<Vec<_>>>()?;
                let mut below = Vec::with_capacity(cur.len());
                let mut above = Vec::with_capacity(cur.len());
                for u in &cur.units {
                    let temps: Vec<f64> = idx.iter().map(|&j| u.regressors[j]).collect();
                    let (b, a) = degree_days(&temps, *threshold)?;
                    below.push(b);
                    above.push(a);
                }
                let names = spec.output_columns();
                cur.with_column(names[0].clone(), &below)?
                    .with_column(names[1].clone(), &above)?
            }
            TransformKind::SpatialLag { column, offset } => {
                let path = path.ok_or_else(|| Error::Domain("spatial_lag requires an ordered path".into()))?;
                spatial_lag(&cur, path, column, *offset, &spec.output)?
            }
        };
    }
    Ok(cur)
}

fn spatial_lag(
    ds: &SpatialDataset,
    path: &OrderedPath,
    column: &str,
    k: usize,
    output: &str,
) -> Result<SpatialDataset> {
    if k < 1 {
        return Err(Error::Domain("spatial lag offset must be >= 1".into()));
    }
    let j = ds.column_index(column)?;
    let mut dropped = ds.dropped_channels;
    let mut lagged: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for channel in path.channels() {
        // ids dropped by an earlier lag are skipped; the remaining prefix-trimmed
        // channel keeps consecutive positions
        let rows: Vec<usize> = channel.iter().filter_map(|id| ds.index_of(id)).collect();
        if rows.len() < k + 1 {
            if !rows.is_empty() {
                dropped += 1;
            }
            continue;
        }
        for p in k..rows.len() {
            lagged.insert(rows[p], vec![ds.units[rows[p - k]].regressors[j]]);
        }
    }
    let keep: Vec<usize> = lagged.keys().copied().collect();
    let mut columns = ds.columns.clone();
    columns.push(output.to_string());
    let mut out = ds.retain_indices(&keep, columns, &lagged)?;
    out.dropped_channels = dropped;
    Ok(out)
}
