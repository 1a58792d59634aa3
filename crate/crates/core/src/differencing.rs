//! First and second spatial differences along the channels of an
//! [`OrderedPath`], and the spatial-history decomposition of the levels
//! omitted-variable term.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_f64, SpatialDataset};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::ordering::OrderedPath;

/// Differenced outcome and regressors. Rows of one channel are contiguous
/// and never span a channel boundary.
#[derive(Debug, Clone)]
pub struct DifferencedDesign {
    pub order: usize,
    pub dy: DVector<f64>,
    pub dx: DMatrix<f64>,
    pub columns: Vec<String>,
    /// Source ids per row, highest position first: `[i, i-1]` or `[i, i-1, i-2]`.
    pub pair_map: Vec<Vec<String>>,
    /// Index of the path channel each row came from.
    pub channel_of_row: Vec<usize>,
    /// Centroid of the highest-position unit of each row.
    pub positions: Vec<Point>,
}

impl DifferencedDesign {
    pub fn n_rows(&self) -> usize {
        self.dy.len()
    }

    /// Row ranges per contributing channel, in row order.
    pub fn channel_ranges(&self) -> Vec<(usize, Range<usize>)> {
        let mut out: Vec<(usize, Range<usize>)> = Vec::new();
        for (r, &c) in self.channel_of_row.iter().enumerate() {
            match out.last_mut() {
                Some((k, range)) if *k == c => range.end = r + 1,
                _ => out.push((c, r..r + 1)),
            }
        }
        out
    }

    /// Row id of each row (the higher-position unit).
    pub fn row_ids(&self) -> Vec<&str> {
        self.pair_map.iter().map(|p| p[0].as_str()).collect()
    }

    /// Audit table: `channel,id,id_lag1[,id_lag2],d_<outcome>,d_<col>...`.
    pub fn write_csv<W: Write>(&self, writer: W, outcome_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let prefix = if self.order == 1 { "d" } else { "d2" };
        let mut header = vec!["channel".to_string(), "id".to_string(), "id_lag1".to_string()];
        if self.order == 2 {
            header.push("id_lag2".into());
        }
        header.push(format!("{prefix}_{outcome_name}"));
        header.extend(self.columns.iter().map(|c| format!("{prefix}_{c}")));
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.channel_of_row[r].to_string()];
            rec.extend(self.pair_map[r].iter().cloned());
            rec.push(fmt_f64(self.dy[r]));
            rec.extend((0..self.dx.ncols()).map(|j| fmt_f64(self.dx[(r, j)])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn spatial_first_difference(ds: &SpatialDataset, path: &OrderedPath) -> Result<DifferencedDesign> {
    difference(ds, path, 1)
}

pub fn spatial_double_difference(ds: &SpatialDataset, path: &OrderedPath) -> Result<DifferencedDesign> {
    difference(ds, path, 2)
}

fn first_diff(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Differences of order 1 or 2 within each channel.
pub fn difference(ds: &SpatialDataset, path: &OrderedPath, order: usize) -> Result<DifferencedDesign> {
    if !(1..=2).contains(&order) {
        return Err(Error::Domain(format!("difference order must be 1 or 2, got {order}")));
    }
    let channels = path.row_indices(ds)?;
    let k = ds.columns().len();
    let units = ds.units();

    let mut dy = Vec::new();
    let mut dx_rows: Vec<Vec<f64>> = Vec::new();
    let mut pair_map = Vec::new();
    let mut channel_of_row = Vec::new();
    let mut positions = Vec::new();

    for (c, rows) in channels.iter().enumerate() {
        if rows.len() <= order {
            continue;
        }
        let mut y: Vec<f64> = rows.iter().map(|&i| units[i].outcome).collect();
        let mut cols: Vec<Vec<f64>> = (0..k)
            .map(|j| rows.iter().map(|&i| units[i].regressors[j]).collect())
            .collect();
        for _ in 0..order {
            y = first_diff(&y);
            cols = cols.iter().map(|v| first_diff(v)).collect();
        }
        for (p, dyv) in y.into_iter().enumerate() {
            let top = p + order;
            dy.push(dyv);
            dx_rows.push(cols.iter().map(|v| v[p]).collect());
            pair_map.push((0..=order).map(|l| units[rows[top - l]].id.clone()).collect());
            channel_of_row.push(c);
            positions.push(units[rows[top]].centroid());
        }
    }

    let n = dy.len();
    Ok(DifferencedDesign {
        order,
        dy: DVector::from_vec(dy),
        dx: DMatrix::from_fn(n, k, |r, j| dx_rows[r][j]),
        columns: ds.columns().to_vec(),
        pair_map,
        channel_of_row,
        positions,
    })
}

/// Spatial-history decomposition `x'c = W1 + W2 + W3` (K x M each).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasDecomposition {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub w3: DMatrix<f64>,
    pub total: DMatrix<f64>,
    pub alpha: DVector<f64>,
    /// `(x'x)^-1 (W1 + W2) alpha`, the part of the levels bias removed by differencing.
    pub implied_bias_levels: DVector<f64>,
}

impl BiasDecomposition {
    /// `‖W1 + W2 + W3 − total‖ / max(‖total‖, 1)`.
    pub fn identity_error(&self) -> f64 {
        let sum = &self.w1 + &self.w2 + &self.w3;
        (sum - &self.total).norm() / self.total.norm().max(1.0)
    }
}

/// Decomposes `x'c` into history and difference covariances.
///
/// `c` is an N x M matrix aligned with the units of `ds`; x is the regressor
/// matrix of `ds`. Within each channel `x` and `c` are demeaned, the history
/// starts from zero at the channel's first unit (`x̃_1 = 0`, `Δx_1 = x_1`), and
/// thereafter `x̃_i = x_{i-1}`, `Δx_i = x_i − x_{i-1}`. Units not on the path
/// are ignored.
pub fn decompose_bias(
    ds: &SpatialDataset,
    c: &DMatrix<f64>,
    alpha: &DVector<f64>,
    path: &OrderedPath,
) -> Result<BiasDecomposition> {
    let x = ds.regressor_matrix();
    let (n, k) = x.shape();
    let m = c.ncols();
    if c.nrows() != n {
        return Err(Error::Domain(format!(
            "confounder has {} rows, dataset has {n} units",
            c.nrows()
        )));
    }
    if alpha.len() != m {
        return Err(Error::Domain(format!(
            "alpha has length {}, confounder has {m} columns",
            alpha.len()
        )));
    }
    let channels = path.row_indices(ds)?;

    let mut w1 = DMatrix::zeros(k, m);
    let mut w2 = DMatrix::zeros(k, m);
    let mut w3 = DMatrix::zeros(k, m);
    let mut total = DMatrix::zeros(k, m);
    let mut xtx = DMatrix::zeros(k, k);

    for rows in &channels {
        let len = rows.len();
        let xs = DMatrix::from_fn(len, k, |r, j| x[(rows[r], j)]);
        let cs = DMatrix::from_fn(len, m, |r, j| c[(rows[r], j)]);
        let xs = demean_columns(xs);
        let cs = demean_columns(cs);

        let mut x_hist = DMatrix::zeros(len, k);
        let mut c_hist = DMatrix::zeros(len, m);
        for r in 1..len {
            x_hist.row_mut(r).copy_from(&xs.row(r - 1));
            c_hist.row_mut(r).copy_from(&cs.row(r - 1));
        }
        let x_diff = &xs - &x_hist;
        let c_diff = &cs - &c_hist;

        w1 += x_hist.transpose() * &c_hist;
        w2 += x_diff.transpose() * &c_hist + x_hist.transpose() * &c_diff;
        w3 += x_diff.transpose() * &c_diff;
        total += xs.transpose() * &cs;
        xtx += xs.transpose() * &xs;
    }

    let xtx_inv = xtx.clone().try_inverse().ok_or_else(|| Error::Collinear {
        columns: ds.columns().to_vec(),
        ratio: 0.0,
    })?;
    let implied_bias_levels = &xtx_inv * (&w1 + &w2) * alpha;
    Ok(BiasDecomposition {
        w1,
        w2,
        w3,
        total,
        alpha: alpha.clone(),
        implied_bias_levels,
    })
}

fn demean_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m;
    }
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Unit;

    fn channel_ds(y: &[f64], x: &[f64]) -> (SpatialDataset, OrderedPath) {
        let units: Vec<Unit> = y
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (&yv, &xv))| Unit::new(format!("u{i}"), Point::new(i as f64, 0.0), yv, vec![xv]))
            .collect();
        let ids = units.iter().map(|u| u.id.clone()).collect();
        let ds = SpatialDataset::new("y", vec!["x".into()], units).unwrap();
        (ds, OrderedPath::new(vec![ids], "x").unwrap())
    }

    #[test]
    fn first_difference_of_simple_channel() {
        let (ds, path) = channel_ds(&[1.0, 3.0, 6.0], &[0.0, 1.0, 1.0]);
        let d = spatial_first_difference(&ds, &path).unwrap();
        assert_eq!(d.dy.as_slice(), &[2.0, 3.0]);
        assert_eq!(d.dx.as_slice(), &[1.0, 0.0]);
        assert_eq!(d.pair_map[0], vec!["u1".to_string(), "u0".to_string()]);
        assert_eq!(d.positions[1], Point::new(2.0, 0.0));
    }

    #[test]
    fn channel_boundaries_are_respected() {
        let (ds, _) = channel_ds(&[0.0, 5.0, 9.0], &[0.0, 0.0, 0.0]);
        let path = OrderedPath::new(vec![vec!["u0".into(), "u1".into()], vec!["u2".into()]], "x").unwrap();
        let d = spatial_first_difference(&ds, &path).unwrap();
        assert_eq!(d.dy.as_slice(), &[5.0]);
        assert_eq!(d.channel_of_row, vec![0]);
    }

    #[test]
    fn reversal_negates_rows() {
        let (ds, path) = channel_ds(&[1.0, 4.0, 2.0, 8.0], &[3.0, -1.0, 0.5, 2.0]);
        let fwd = spatial_first_difference(&ds, &path).unwrap();
        let rev = spatial_first_difference(&ds, &path.reversed()).unwrap();
        let n = fwd.n_rows();
        for r in 0..n {
            assert_eq!(rev.dy[r], -fwd.dy[n - 1 - r]);
            assert_eq!(rev.dx[(r, 0)], -fwd.dx[(n - 1 - r, 0)]);
        }
    }

    #[test]
    fn double_difference_examples() {
        let (ds, path) = channel_ds(&[1.0, 3.0, 6.0, 10.0], &[0.0, 2.0, 4.0, 6.0]);
        let d = spatial_double_difference(&ds, &path).unwrap();
        assert_eq!(d.dy.as_slice(), &[1.0, 1.0]);
        assert!(d.dx.iter().all(|v| *v == 0.0));
        assert_eq!(
            d.pair_map[1],
            vec!["u3".to_string(), "u2".to_string(), "u1".to_string()]
        );

        let (ds, path) = channel_ds(&[1.0, 3.0], &[0.0, 1.0]);
        assert_eq!(spatial_double_difference(&ds, &path).unwrap().n_rows(), 0);
    }

    #[test]
    fn unknown_id_is_integrity_error() {
        let (ds, _) = channel_ds(&[1.0, 2.0], &[0.0, 1.0]);
        let path = OrderedPath::new(vec![vec!["u0".into(), "ghost".into()]], "x").unwrap();
        assert!(matches!(spatial_first_difference(&ds, &path), Err(Error::Integrity(_))));
    }

    #[test]
    fn bias_decomposition_position_index() {
        let pos: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let (ds, path) = channel_ds(&pos, &pos);
        let c = DMatrix::from_column_slice(20, 1, &pos);
        let dec = decompose_bias(&ds, &c, &DVector::from_element(1, 1.0), &path).unwrap();
        assert!(dec.identity_error() < 1e-12);
        let (w1, w2, w3) = (dec.w1[(0, 0)], dec.w2[(0, 0)], dec.w3[(0, 0)]);
        assert!(w1.abs() > w2.abs() && w1.abs() > w3.abs(), "{w1} {w2} {w3}");
    }

    #[test]
    fn null_confounder_gives_zero_matrices() {
        let (ds, path) = channel_ds(&[1.0, 2.0, 0.0, 4.0], &[1.0, 3.0, 2.0, 5.0]);
        let c = DMatrix::zeros(4, 1);
        let dec = decompose_bias(&ds, &c, &DVector::from_element(1, 1.0), &path).unwrap();
        for m in [&dec.w1, &dec.w2, &dec.w3, &dec.total] {
            assert!(m.iter().all(|v| *v == 0.0));
        }
        assert_eq!(dec.implied_bias_levels[0], 0.0);
    }

    #[test]
    fn bias_decomposition_dimension_mismatch() {
        let (ds, path) = channel_ds(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        let c = DMatrix::zeros(2, 1);
        assert!(matches!(
            decompose_bias(&ds, &c, &DVector::from_element(1, 1.0), &path),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn design_csv_has_pair_columns() {
        let (ds, path) = channel_ds(&[1.0, 3.0, 6.0], &[0.0, 1.0, 1.0]);
        let d = spatial_first_difference(&ds, &path).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, "y").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("channel,id,id_lag1,d_y,d_x\n0,u1,u0,2.0,1.0\n"));
    }
}
