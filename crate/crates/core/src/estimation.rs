//! Least-squares fits in levels and on differenced designs, and the Robinson
//! partially linear comparator.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{fmt_f64, SpatialDataset};
use crate::differencing::{difference, DifferencedDesign};
use crate::error::{Error, Result};
use crate::inference::{covariance, with_intercept, RowLayout, SeMethod};
use crate::linalg::least_squares;
use crate::ordering::OrderedPath;

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Levels,
    Sfd,
    Sdd,
    Robinson { bandwidth: usize },
}

impl EstimatorKind {
    /// Differencing order, or `None` for undifferenced estimators.
    pub fn order(&self) -> Option<usize> {
        match self {
            EstimatorKind::Sfd => Some(1),
            EstimatorKind::Sdd => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Levels => f.write_str("levels"),
            EstimatorKind::Sfd => f.write_str("sfd"),
            EstimatorKind::Sdd => f.write_str("sdd"),
            EstimatorKind::Robinson { bandwidth } => write!(f, "robinson:{bandwidth}"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levels" => Ok(EstimatorKind::Levels),
            "sfd" => Ok(EstimatorKind::Sfd),
            "sdd" => Ok(EstimatorKind::Sdd),
            _ => {
                let h = s
                    .strip_prefix("robinson:")
                    .and_then(|h| h.parse::<usize>().ok())
                    .ok_or_else(|| Error::Domain(format!("unknown estimator `{s}`")))?;
                if h == 0 {
                    return Err(Error::Domain("Robinson bandwidth must be >= 1".into()));
                }
                Ok(EstimatorKind::Robinson { bandwidth: h })
            }
        }
    }
}

/// A fitted model. The design it was fitted on is kept so further standard
/// errors can be computed without refitting.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub vcov: Option<DMatrix<f64>>,
    pub n_obs: usize,
    pub r_squared: f64,
    pub kind: EstimatorKind,
    pub se_method: Option<SeMethod>,
    pub direction: String,
    pub warnings: Vec<String>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    layout: RowLayout,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.names.first().is_some_and(|n| n == INTERCEPT)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }

    pub fn std_errors(&self) -> Option<DVector<f64>> {
        self.vcov
            .as_ref()
            .map(|v| DVector::from_fn(v.nrows(), |j, _| v[(j, j)].max(0.0).sqrt()))
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        let j = self.names.iter().position(|n| n == name)?;
        self.std_errors().map(|s| s[j])
    }

    pub fn df_resid(&self) -> usize {
        self.n_obs.saturating_sub(self.n_params())
    }

    pub fn t_values(&self) -> Option<DVector<f64>> {
        let se = self.std_errors()?;
        Some(self.coefficients.zip_map(&se, |b, s| b / s))
    }

    /// Two-sided Student-t p-values on the residual degrees of freedom.
    pub fn p_values(&self) -> Option<DVector<f64>> {
        let t = self.t_values()?;
        let df = self.df_resid().max(1) as f64;
        let dist = StudentsT::new(0.0, 1.0, df).ok()?;
        Some(t.map(|t| {
            if t.is_nan() {
                f64::NAN
            } else {
                2.0 * (1.0 - dist.cdf(t.abs()))
            }
        }))
    }

    /// The model's design matrix (with intercept column when present) and response.
    pub fn design(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.x, &self.y)
    }

    pub fn layout(&self) -> &RowLayout {
        &self.layout
    }

    /// Covariance of this fit under another method.
    pub fn covariance(&self, method: &SeMethod) -> Result<crate::inference::Covariance> {
        covariance(&self.x, &self.y, &self.residuals, &self.layout, method)
    }

    /// Copy of the fit with `method`'s covariance attached.
    pub fn with_se(&self, method: &SeMethod) -> Result<FitResult> {
        let cov = self.covariance(method)?;
        let mut out = self.clone();
        out.vcov = Some(cov.matrix);
        out.se_method = Some(method.clone());
        out.warnings.extend(cov.warnings);
        Ok(out)
    }

    pub fn summary(&self) -> FitSummary {
        let se = self.std_errors();
        let t = self.t_values();
        let p = self.p_values();
        let coefficients = self
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let p_value = p.as_ref().map(|p| p[j]);
                CoefficientRow {
                    name: name.clone(),
                    estimate: self.coefficients[j],
                    std_error: se.as_ref().map(|s| s[j]),
                    t_value: t.as_ref().map(|t| t[j]),
                    p_value,
                    stars: p_value.map(stars).unwrap_or("").to_string(),
                }
            })
            .collect();
        FitSummary {
            kind: self.kind,
            direction: self.direction.clone(),
            se_method: self.se_method.as_ref().map(|m| m.label()),
            n_obs: self.n_obs,
            r_squared: self.r_squared,
            coefficients,
            warnings: self.warnings.clone(),
        }
    }

    /// Human-readable coefficient table.
    pub fn table(&self) -> String {
        let s = self.summary();
        let mut out = format!(
            "estimator: {}  ordering: {}  se: {}  n = {}  R² = {:.4}\n",
            s.kind,
            if s.direction.is_empty() { "-" } else { &s.direction },
            s.se_method.as_deref().unwrap_or("none"),
            s.n_obs,
            s.r_squared
        );
        out += &format!(
            "{:<20} {:>14} {:>14} {:>10} {:>10}\n",
            "", "estimate", "std. error", "t", "p"
        );
        for c in &s.coefficients {
            let opt = |v: Option<f64>, prec: usize| v.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into());
            out += &format!(
                "{:<20} {:>14.6} {:>14} {:>10} {:>10} {}\n",
                c.name,
                c.estimate,
                opt(c.std_error, 6),
                opt(c.t_value, 3),
                opt(c.p_value, 4),
                c.stars
            );
        }
        out += "significance: *** p<0.001, ** p<0.01, * p<0.05\n";
        for w in &s.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }

    /// Flat CSV header matching [`FitResult::csv_row`].
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec![
            "kind".into(),
            "direction".into(),
            "se_method".into(),
            "n_obs".into(),
            "r_squared".into(),
        ];
        for n in &self.names {
            h.push(format!("{n}_estimate"));
            h.push(format!("{n}_se"));
        }
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let se = self.std_errors();
        let mut r = vec![
            self.kind.to_string(),
            self.direction.clone(),
            self.se_method.as_ref().map(|m| m.label()).unwrap_or_default(),
            self.n_obs.to_string(),
            fmt_f64(self.r_squared),
        ];
        for j in 0..self.names.len() {
            r.push(fmt_f64(self.coefficients[j]));
            r.push(se.as_ref().map(|s| fmt_f64(s[j])).unwrap_or_default());
        }
        r
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.csv_header())?;
        w.write_record(self.csv_row())?;
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Significance stars at 0.1%, 1% and 5%.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

/// Serializable view of a [`FitResult`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub kind: EstimatorKind,
    pub direction: String,
    pub se_method: Option<String>,
    pub n_obs: usize,
    pub r_squared: f64,
    pub coefficients: Vec<CoefficientRow>,
    pub warnings: Vec<String>,
}

/// Plain OLS of `y` on `x`, optionally prepending an intercept. The result
/// carries no covariance and is labelled as a levels fit.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool, names: &[String]) -> Result<FitResult> {
    if names.len() != x.ncols() {
        return Err(Error::Domain(format!(
            "{} names for {} columns",
            names.len(),
            x.ncols()
        )));
    }
    let (design, all_names) = if intercept {
        let mut n = vec![INTERCEPT.to_string()];
        n.extend(names.iter().cloned());
        (with_intercept(x), n)
    } else {
        (x.clone(), names.to_vec())
    };
    let (n, p) = design.shape();
    if n <= p {
        return Err(Error::EmptyDesign(format!("{n} observations for {p} coefficients")));
    }
    let ls = least_squares(&design, y, &all_names)?;
    let r_squared = r_squared(y, &ls.residuals, intercept);
    Ok(FitResult {
        names: all_names,
        coefficients: ls.beta,
        residuals: ls.residuals,
        vcov: None,
        n_obs: n,
        r_squared,
        kind: EstimatorKind::Levels,
        se_method: None,
        direction: String::new(),
        warnings: Vec::new(),
        x: design,
        y: y.clone(),
        layout: RowLayout {
            channel_of_row: vec![0; n],
            positions: Vec::new(),
        },
    })
}

fn r_squared(y: &DVector<f64>, e: &DVector<f64>, centred: bool) -> f64 {
    let ssr = e.norm_squared();
    let sst = if centred {
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum()
    } else {
        y.norm_squared()
    };
    if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else if ssr == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn attach(
    mut fit: FitResult,
    layout: RowLayout,
    kind: EstimatorKind,
    direction: &str,
    se: &SeMethod,
) -> Result<FitResult> {
    fit.layout = layout;
    fit.kind = kind;
    fit.direction = direction.to_string();
    let cov = fit.covariance(se)?;
    fit.vcov = Some(cov.matrix);
    fit.se_method = Some(se.clone());
    fit.warnings.extend(cov.warnings);
    Ok(fit)
}

fn levels_layout(ds: &SpatialDataset, channels: &[Vec<usize>]) -> (Vec<usize>, RowLayout) {
    let mut rows = Vec::new();
    let mut layout = RowLayout::default();
    for (c, idx) in channels.iter().enumerate() {
        for &i in idx {
            rows.push(i);
            layout.channel_of_row.push(c);
            layout.positions.push(ds.units()[i].centroid());
        }
    }
    (rows, layout)
}

/// OLS with an intercept on a differenced design.
pub fn fit_differenced(design: &DifferencedDesign, direction: &str, se: &SeMethod) -> Result<FitResult> {
    if design.n_rows() == 0 {
        return Err(Error::EmptyDesign(format!(
            "every channel is too short for differences of order {}",
            design.order
        )));
    }
    let kind = if design.order == 1 {
        EstimatorKind::Sfd
    } else {
        EstimatorKind::Sdd
    };
    let fit = ols(&design.dx, &design.dy, true, &design.columns)?;
    attach(fit, RowLayout::from(design), kind, direction, se)
}

/// Fits `kind` along `path`. Levels fits use the path's units in path order.
pub fn fit(ds: &SpatialDataset, path: &OrderedPath, kind: EstimatorKind, se: &SeMethod) -> Result<FitResult> {
    match kind {
        EstimatorKind::Levels => {
            let channels = path.row_indices(ds)?;
            let (rows, layout) = levels_layout(ds, &channels);
            let x = ds.regressor_matrix().select_rows(rows.iter());
            let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| ds.units()[i].outcome));
            let fit = ols(&x, &y, true, ds.columns())?;
            attach(fit, layout, kind, path.direction(), se)
        }
        EstimatorKind::Sfd | EstimatorKind::Sdd => {
            let design = difference(ds, path, kind.order().unwrap())?;
            fit_differenced(&design, path.direction(), se)
        }
        EstimatorKind::Robinson { bandwidth } => robinson_fit(ds, path, bandwidth, se),
    }
}

/// Uniform-kernel trend: mean over the `2h + 1` index window around each
/// position, truncated at the ends.
pub fn window_means(values: &[f64], h: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Robinson's partially linear estimator with a uniform-kernel trend along
/// each channel. Slopes come from a no-intercept regression of the detrended
/// outcome on the detrended regressors; the reported intercept is the mean
/// detrended outcome. Covariances use the design `[1, X̃]`.
pub fn robinson_fit(ds: &SpatialDataset, path: &OrderedPath, bandwidth: usize, se: &SeMethod) -> Result<FitResult> {
    if bandwidth == 0 {
        return Err(Error::Domain("Robinson bandwidth must be >= 1".into()));
    }
    let channels = path.row_indices(ds)?;
    let (rows, layout) = levels_layout(ds, &channels);
    let k = ds.columns().len();
    let units = ds.units();
    let mut y_res = Vec::with_capacity(rows.len());
    let mut x_res: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); k];
    for idx in &channels {
        let y: Vec<f64> = idx.iter().map(|&i| units[i].outcome).collect();
        y_res.extend(y.iter().zip(window_means(&y, bandwidth)).map(|(v, m)| v - m));
        for (j, col) in x_res.iter_mut().enumerate() {
            let x: Vec<f64> = idx.iter().map(|&i| units[i].regressors[j]).collect();
            col.extend(x.iter().zip(window_means(&x, bandwidth)).map(|(v, m)| v - m));
        }
    }
    let n = y_res.len();
    let x = DMatrix::from_fn(n, k, |r, j| x_res[j][r]);
    let y = DVector::from_vec(y_res);

    let slopes = ols(&x, &y, false, ds.columns())?;
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(ds.columns().iter().cloned());
    let mut coefficients = DVector::zeros(k + 1);
    coefficients[0] = y.mean();
    coefficients.rows_mut(1, k).copy_from(&slopes.coefficients);
    let design = with_intercept(&x);
    if n <= k + 1 {
        return Err(Error::EmptyDesign(format!(
            "{n} observations for {} coefficients",
            k + 1
        )));
    }
    let fit = FitResult {
        names,
        coefficients,
        residuals: slopes.residuals,
        vcov: None,
        n_obs: n,
        r_squared: slopes.r_squared,
        kind: EstimatorKind::Robinson { bandwidth },
        se_method: None,
        direction: String::new(),
        warnings: Vec::new(),
        x: design,
        y,
        layout: RowLayout::default(),
    };
    attach(fit, layout, EstimatorKind::Robinson { bandwidth }, path.direction(), se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Unit;
    use crate::geometry::Point;
    use crate::linalg::is_psd;
    use crate::ordering::{order_1d, Axis};

    fn line(xs: &[f64], ys: &[f64]) -> SpatialDataset {
        let units = xs
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(i, (&x, &y))| Unit::new(format!("u{i}"), Point::new(i as f64, 0.0), y, vec![x]))
            .collect();
        SpatialDataset::new("y", vec!["x".into()], units).unwrap()
    }

    #[test]
    fn exact_levels_fit() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 4.0, 7.0]);
        let y = x.column(0).map(|v| 2.0 * v + 5.0);
        let f = ols(&x, &y, true, &["x".into()]).unwrap();
        assert!((f.coefficients[0] - 5.0).abs() < 1e-12 && (f.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
        assert!(f.vcov.is_none());
    }

    #[test]
    fn orthogonal_regressor_has_zero_slope() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0, -1.0, 1.0]);
        let y = DVector::from_vec(vec![-1.0, -1.0, 1.0, 1.0]);
        let f = ols(&x, &y, true, &["x".into()]).unwrap();
        assert!(f.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn residuals_mean_zero_with_intercept() {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * (j + 3)) % 7) as f64);
        let y = DVector::from_fn(30, |i, _| ((i * 11) % 5) as f64);
        let f = ols(&x, &y, true, &["a".into(), "b".into()]).unwrap();
        assert!(f.residuals.mean().abs() < 1e-10);
        assert!((0.0..=1.0).contains(&f.r_squared));
    }

    #[test]
    fn duplicated_regressor_is_collinear() {
        let x = DMatrix::from_fn(10, 2, |i, _| (i as f64).sqrt());
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(matches!(
            ols(&x, &y, true, &["a".into(), "b".into()]),
            Err(Error::Collinear { .. })
        ));
    }

    #[test]
    fn channel_constant_confounder_is_differenced_out() {
        let xs: Vec<f64> = (0..20).map(|i| ((i * 7) % 6) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0 * x.powi(0) * 4.0).collect();
        let ds = line(&xs, &ys);
        let path = order_1d(&ds, Axis::X);
        let f = fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::NeweyWest { lag: 2 }).unwrap();
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(f.n_obs, 19);
        assert!(is_psd(f.vcov.as_ref().unwrap(), 1e-10));
    }

    #[test]
    fn reversing_negates_intercept() {
        let xs: Vec<f64> = (0..25).map(|i| (i as f64 * 0.9).sin() + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| x + ((i * 13) % 7) as f64 * 0.2)
            .collect();
        let ds = line(&xs, &ys);
        let path = order_1d(&ds, Axis::X);
        let a = fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::Hc).unwrap();
        let b = fit(&ds, &path.reversed(), EstimatorKind::Sfd, &SeMethod::Hc).unwrap();
        assert!((a.coefficients[1] - b.coefficients[1]).abs() < 1e-9);
        assert!((a.coefficients[0] + b.coefficients[0]).abs() < 1e-9);
    }

    #[test]
    fn empty_differenced_design() {
        let ds = line(&[1.0, 2.0], &[1.0, 3.0]);
        let path = OrderedPath::new(vec![vec!["u0".into()], vec!["u1".into()]], "x").unwrap();
        assert!(matches!(
            fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::Ols),
            Err(Error::EmptyDesign(_))
        ));
    }

    #[test]
    fn robinson_full_window_is_levels() {
        let xs: Vec<f64> = (0..15).map(|i| ((i * 5) % 7) as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 0.5 * x + (i as f64).sqrt())
            .collect();
        let ds = line(&xs, &ys);
        let path = order_1d(&ds, Axis::X);
        let r = robinson_fit(&ds, &path, 100, &SeMethod::Ols).unwrap();
        let l = fit(&ds, &path, EstimatorKind::Levels, &SeMethod::Ols).unwrap();
        assert!((r.coefficients[1] - l.coefficients[1]).abs() < 1e-12);
        assert!(r.coefficients[0].abs() < 1e-12);
        assert_eq!(r.n_obs, 15);

        let exact = line(&xs, &xs);
        let r = robinson_fit(&exact, &order_1d(&exact, Axis::X), 2, &SeMethod::Hc).unwrap();
        assert!((r.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_means_truncate() {
        assert_eq!(window_means(&[1.0, 2.0, 3.0, 4.0], 1), vec![1.5, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn parses_kinds_and_stars() {
        assert_eq!(
            "robinson:3".parse::<EstimatorKind>().unwrap(),
            EstimatorKind::Robinson { bandwidth: 3 }
        );
        assert!("robinson:0".parse::<EstimatorKind>().is_err());
        assert_eq!(stars(0.0005), "***");
        assert_eq!(stars(0.005), "**");
        assert_eq!(stars(0.03), "*");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn summary_serializes() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64).cos()).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x + 0.1 * i as f64).collect();
        let ds = line(&xs, &ys);
        let f = fit(&ds, &order_1d(&ds, Axis::X), EstimatorKind::Levels, &SeMethod::Ols).unwrap();
        let json = serde_json::to_string(&f.summary()).unwrap();
        assert!(json.contains("\"std_error\""));
        assert_eq!(f.csv_header().len(), f.csv_row().len());
        assert!(f.table().contains("(intercept)"));
    }
}
