//! Adjacency structures for differencing: ordered channels of unit ids.
//!
//! Three constructions are provided. [`order_1d`] sorts along one axis,
//! [`order_grid`] reads rows or columns off a regular lattice, and
//! [`assign_channels`] samples irregular polygons with horizontal bands of a
//! fixed width after rotating the map.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::geometry::{Point, Rotation};

/// A partition of unit ids into ordered channels. Consecutive ids in a
/// channel are treated as spatial neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedPath {
    channels: Vec<Vec<String>>,
    direction: String,
    channel_width: Option<f64>,
}

impl OrderedPath {
    pub fn new(channels: Vec<Vec<String>>, direction: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (k, ch) in channels.iter().enumerate() {
            if ch.is_empty() {
                return Err(Error::Structure(format!("channel {k} is empty")));
            }
            for id in ch {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Structure(format!(
                        "unit `{id}` appears more than once in the path"
                    )));
                }
            }
        }
        Ok(OrderedPath {
            channels,
            direction: direction.into(),
            channel_width: None,
        })
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.channel_width = Some(width);
        self
    }

    pub fn channels(&self) -> &[Vec<String>] {
        &self.channels
    }

    pub fn direction(&self) -> &str {
        &self.direction
    }

    pub fn channel_width(&self) -> Option<f64> {
        self.channel_width
    }

    pub fn n_units(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    pub fn longest_channel(&self) -> usize {
        self.channels.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Same channels, each traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        OrderedPath {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().rev().cloned().collect())
                .collect(),
            direction: format!("{}-reversed", self.direction),
            channel_width: self.channel_width,
        }
    }

    /// Drops ids absent from `ds` (e.g. removed by a lag transform) and any
    /// channel left empty.
    pub fn restricted_to(&self, ds: &SpatialDataset) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|id| ds.index_of(id).is_some())
                    .cloned()
                    .collect::<Vec<_>>()
            })
            .filter(|c| !c.is_empty())
            .collect();
        OrderedPath {
            channels,
            direction: self.direction.clone(),
            channel_width: self.channel_width,
        }
    }

    /// Row indices into `ds` per channel.
    pub fn row_indices(&self, ds: &SpatialDataset) -> Result<Vec<Vec<usize>>> {
        self.channels
            .iter()
            .map(|c| {
                c.iter()
                    .map(|id| {
                        ds.index_of(id)
                            .ok_or_else(|| Error::Integrity(format!("path references unknown unit `{id}`")))
                    })
                    .collect()
            })
            .collect()
    }

    /// Writes `channel_index,position_in_channel,unit_id`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["channel_index", "position_in_channel", "unit_id"])?;
        for (k, ch) in self.channels.iter().enumerate() {
            for (p, id) in ch.iter().enumerate() {
                w.write_record([k.to_string(), p.to_string(), id.clone()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, direction: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            channel_index: usize,
            position_in_channel: usize,
            unit_id: String,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut grouped: BTreeMap<usize, Vec<(usize, String)>> = BTreeMap::new();
        for rec in rdr.deserialize::<Row>() {
            let r = rec?;
            grouped
                .entry(r.channel_index)
                .or_default()
                .push((r.position_in_channel, r.unit_id));
        }
        let channels = grouped
            .into_values()
            .map(|mut v| {
                v.sort_by_key(|(p, _)| *p);
                v.into_iter().map(|(_, id)| id).collect()
            })
            .collect();
        OrderedPath::new(channels, direction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridDirection {
    /// One channel per row, west to east; rows listed north first.
    WE,
    /// One channel per column, north to south; columns listed west first.
    NS,
}

fn by_key_then_id(a: (f64, &str), b: (f64, &str)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

/// Single channel sorted by one coordinate, ties broken by id.
pub fn order_1d(ds: &SpatialDataset, axis: Axis) -> OrderedPath {
    let mut keyed: Vec<(f64, &str)> = ds
        .units()
        .iter()
        .map(|u| {
            let p = u.centroid();
            (if axis == Axis::X { p.x } else { p.y }, u.id.as_str())
        })
        .collect();
    keyed.sort_by(|a, b| by_key_then_id(*a, *b));
    let channel: Vec<String> = keyed.into_iter().map(|(_, id)| id.to_string()).collect();
    let label = if axis == Axis::X { "x" } else { "y" };
    if channel.is_empty() {
        return OrderedPath {
            channels: vec![],
            direction: label.into(),
            channel_width: None,
        };
    }
    OrderedPath {
        channels: vec![channel],
        direction: label.into(),
        channel_width: None,
    }
}

const LATTICE_TOL: f64 = 1e-9;

/// Integer lattice index of every value, or `None` if the values are not on
/// an evenly spaced lattice.
fn lattice_indices(values: &[f64]) -> Option<(Vec<i64>, f64)> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= LATTICE_TOL);
    let min = distinct[0];
    if distinct.len() == 1 {
        return Some((vec![0; values.len()], 0.0));
    }
    let spacing = distinct.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let tol = LATTICE_TOL * spacing.max(1.0);
    let mut idx = Vec::with_capacity(values.len());
    for &v in values {
        let k = ((v - min) / spacing).round();
        if (v - (min + k * spacing)).abs() > tol {
            return None;
        }
        idx.push(k as i64);
    }
    Some((idx, spacing))
}

/// Row spacing of a lattice dataset (distance between consecutive distinct
/// y values), if the positions form a lattice with more than one row.
pub fn lattice_row_spacing(ds: &SpatialDataset) -> Option<f64> {
    let ys: Vec<f64> = ds.units().iter().map(|u| u.centroid().y).collect();
    if ys.is_empty() {
        return None;
    }
    lattice_indices(&ys).and_then(|(_, s)| (s > 0.0).then_some(s))
}

/// Rows (WE) or columns (NS) of a regular lattice as channels.
pub fn order_grid(ds: &SpatialDataset, direction: GridDirection) -> Result<OrderedPath> {
    let label = match direction {
        GridDirection::WE => "WE",
        GridDirection::NS => "NS",
    };
    if ds.is_empty() {
        return OrderedPath::new(vec![], label);
    }
    let pts: Vec<Point> = ds.units().iter().map(|u| u.centroid()).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let not_lattice =
        || Error::Structure("positions do not form a regular lattice; use assign_channels for irregular data".into());
    let (kx, _) = lattice_indices(&xs).ok_or_else(not_lattice)?;
    let (ky, _) = lattice_indices(&ys).ok_or_else(not_lattice)?;

    let mut cells = HashSet::new();
    for i in 0..pts.len() {
        if !cells.insert((kx[i], ky[i])) {
            return Err(Error::Structure(format!(
                "two units occupy lattice cell ({}, {}); use assign_channels",
                kx[i], ky[i]
            )));
        }
    }

    // channel key -> (position key, id)
    let mut groups: BTreeMap<i64, Vec<(i64, &str)>> = BTreeMap::new();
    for (i, u) in ds.units().iter().enumerate() {
        let (chan, pos) = match direction {
            GridDirection::WE => (-ky[i], kx[i]),
            GridDirection::NS => (kx[i], -ky[i]),
        };
        groups.entry(chan).or_default().push((pos, u.id.as_str()));
    }
    let channels = groups
        .into_values()
        .map(|mut v| {
            v.sort();
            v.into_iter().map(|(_, id)| id.to_string()).collect()
        })
        .collect();
    OrderedPath::new(channels, label)
}

/// Mean north-south vertex extent of polygon units.
pub fn default_channel_width(ds: &SpatialDataset) -> Option<f64> {
    let extents: Vec<f64> = ds
        .units()
        .iter()
        .filter_map(|u| u.polygon.as_ref())
        .map(|ring| {
            let (lo, hi) = ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.y), hi.max(p.y))
            });
            hi - lo
        })
        .collect();
    if extents.is_empty() {
        None
    } else {
        Some(extents.iter().sum::<f64>() / extents.len() as f64)
    }
}

/// Channel sampling for irregular units.
///
/// The map is rotated by `-theta` degrees about the mean unit centroid.
/// Bands of height `width` are laid from the northernmost rotated vertex
/// downward; band `k` covers `(top - (k+1)·width, top - k·width]`. Walking the
/// bands north to south, a band collects every not-yet-assigned unit whose
/// rotated vertex y-range overlaps it (point units: whose rotated point lies
/// in it), ordered by rotated centroid x. Empty bands produce no channel.
pub fn assign_channels(ds: &SpatialDataset, width: f64, theta: f64) -> Result<OrderedPath> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::Domain(format!("channel width must be positive, got {width}")));
    }
    if !(-89.0..=90.0).contains(&theta) {
        return Err(Error::Domain(format!(
            "rotation angle must lie in [-89, 90], got {theta}"
        )));
    }
    let label = format!("theta={theta}");
    if ds.is_empty() {
        return Ok(OrderedPath::new(vec![], label)?.with_width(width));
    }

    let centroids: Vec<Point> = ds.units().iter().map(|u| u.centroid()).collect();
    let n = centroids.len() as f64;
    let pivot = Point::new(
        centroids.iter().map(|p| p.x).sum::<f64>() / n,
        centroids.iter().map(|p| p.y).sum::<f64>() / n,
    );
    let rot = Rotation::new(pivot, -theta);

    struct Placed<'a> {
        id: &'a str,
        key: f64,
        lo: f64,
        hi: f64,
    }
    let placed: Vec<Placed> = ds
        .units()
        .iter()
        .zip(&centroids)
        .map(|(u, c)| {
            let (lo, hi) = match &u.polygon {
                Some(ring) => ring
                    .iter()
                    .map(|p| rot.apply(*p).y)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y))),
                None => {
                    let y = rot.apply(u.position).y;
                    (y, y)
                }
            };
            Placed {
                id: u.id.as_str(),
                key: rot.apply(*c).x,
                lo,
                hi,
            }
        })
        .collect();

    let top = placed.iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-9 * width;
    let band = |k: i64| (top - (k + 1) as f64 * width, top - k as f64 * width);
    let hits = |p: &Placed, k: i64| {
        if k < 0 {
            return false;
        }
        let (lo, hi) = band(k);
        if p.hi - p.lo <= eps {
            p.hi > lo + eps && p.hi <= hi + eps
        } else {
            p.lo < hi - eps && p.hi > lo + eps
        }
    };

    let mut bands: BTreeMap<i64, Vec<(f64, &str)>> = BTreeMap::new();
    for p in &placed {
        let guess = ((top - p.hi) / width).floor() as i64;
        let k = (guess - 1..=guess + 1)
            .find(|&k| hits(p, k))
            .ok_or_else(|| Error::Structure(format!("unit `{}` fell outside every band", p.id)))?;
        bands.entry(k).or_default().push((p.key, p.id));
    }
    let channels = bands
        .into_values()
        .map(|mut v| {
            v.sort_by(|a, b| by_key_then_id(*a, *b));
            v.into_iter().map(|(_, id)| id.to_string()).collect()
        })
        .collect();
    Ok(OrderedPath::new(channels, label)?.with_width(width))
}

/// Id -> (channel, position) lookup.
pub fn positions(path: &OrderedPath) -> HashMap<&str, (usize, usize)> {
    path.channels()
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.iter().enumerate().map(move |(p, id)| (id.as_str(), (k, p))))
        .collect()
}
