//! Internal validity checks: rotation sweeps, specification enumeration
//! (extreme bounds) and the double-difference comparison.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{fmt_f64, SpatialDataset};
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind, FitResult, FitSummary};
use crate::inference::SeMethod;
use crate::ordering::{assign_channels, OrderedPath};
use crate::simulation::{quantile, CoefficientSummary};

/// `{−60, −30, 0, 30, 60, 90}`.
pub const COARSE_THETAS: [f64; 6] = [-60.0, -30.0, 0.0, 30.0, 60.0, 90.0];

/// One-degree grid over `[−89, 90]`.
pub fn full_thetas() -> Vec<f64> {
    (-89..=90).map(f64::from).collect()
}

/// One re-estimation within a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Axis label: the angle for rotations, a specification id otherwise.
    pub id: String,
    pub theta: Option<f64>,
    pub kind: EstimatorKind,
    pub fit: Option<FitSummary>,
    pub error: Option<String>,
}

/// Spread of one coefficient across the successful points of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dispersion {
    pub kind: EstimatorKind,
    pub coefficient: String,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// `sd / |mean|`; `None` when the guard is raised.
    pub coefficient_of_variation: Option<f64>,
    /// Set when `|mean| < 1e-8`.
    pub mean_near_zero: bool,
}

impl Dispersion {
    fn from_values(kind: EstimatorKind, coefficient: &str, values: &[f64]) -> Self {
        let s = CoefficientSummary::from_draws(coefficient, values, None);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let guard = s.mean.abs() < 1e-8;
        Dispersion {
            kind,
            coefficient: coefficient.to_string(),
            n: values.len(),
            mean: s.mean,
            variance: s.variance,
            min: sorted[0],
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            coefficient_of_variation: (!guard).then(|| s.sd / s.mean.abs()),
            mean_near_zero: guard,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub dispersion: Vec<Dispersion>,
}

impl SweepResult {
    fn new(points: Vec<SweepPoint>) -> Self {
        let mut dispersion = Vec::new();
        let mut kinds: Vec<EstimatorKind> = Vec::new();
        for p in &points {
            if !kinds.contains(&p.kind) {
                kinds.push(p.kind);
            }
        }
        for kind in kinds {
            let fits: Vec<&FitSummary> = points
                .iter()
                .filter(|p| p.kind == kind)
                .filter_map(|p| p.fit.as_ref())
                .collect();
            let mut names: Vec<&str> = Vec::new();
            for f in &fits {
                for c in &f.coefficients {
                    if !names.contains(&c.name.as_str()) {
                        names.push(&c.name);
                    }
                }
            }
            for name in names {
                let values: Vec<f64> = fits
                    .iter()
                    .filter_map(|f| f.coefficients.iter().find(|c| c.name == name).map(|c| c.estimate))
                    .collect();
                dispersion.push(Dispersion::from_values(kind, name, &values));
            }
        }
        SweepResult { points, dispersion }
    }

    pub fn dispersion(&self, kind: EstimatorKind, coefficient: &str) -> Option<&Dispersion> {
        self.dispersion
            .iter()
            .find(|d| d.kind == kind && d.coefficient == coefficient)
    }

    pub fn missing(&self) -> usize {
        self.points.iter().filter(|p| p.fit.is_none()).count()
    }

    /// Long-form `axis,estimator,coefficient,estimate,se` table; failed
    /// points appear once with empty estimate and the error message.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["axis", "estimator", "coefficient", "estimate", "se", "error"])?;
        for p in &self.points {
            match &p.fit {
                Some(f) => {
                    for c in &f.coefficients {
                        w.write_record([
                            p.id.clone(),
                            p.kind.to_string(),
                            c.name.clone(),
                            fmt_f64(c.estimate),
                            c.std_error.map(fmt_f64).unwrap_or_default(),
                            String::new(),
                        ])?;
                    }
                }
                None => w.write_record([
                    p.id.clone(),
                    p.kind.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    p.error.clone().unwrap_or_default(),
                ])?,
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn point(id: String, theta: Option<f64>, kind: EstimatorKind, r: Result<FitResult>) -> SweepPoint {
    match r {
        Ok(f) => SweepPoint {
            id,
            theta,
            kind,
            fit: Some(f.summary()),
            error: None,
        },
        Err(e) => SweepPoint {
            id,
            theta,
            kind,
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fits `kind` along channels of `width` sampled at each angle.
pub fn rotation_sweep(
    ds: &SpatialDataset,
    width: f64,
    thetas: &[f64],
    kind: EstimatorKind,
    se: &SeMethod,
) -> Result<SweepResult> {
    if let Some(t) = thetas.iter().find(|t| !(-89.0..=90.0).contains(*t)) {
        return Err(Error::Domain(format!("rotation angle {t} is outside [-89, 90]")));
    }
    if !(width > 0.0) {
        return Err(Error::Domain(format!("channel width must be positive, got {width}")));
    }
    se.validate()?;
    let points = thetas
        .par_iter()
        .map(|&theta| {
            let r = assign_channels(ds, width, theta).and_then(|path| fit(ds, &path, kind, se));
            point(format!("{theta}"), Some(theta), kind, r)
        })
        .collect();
    Ok(SweepResult::new(points))
}

/// Covariates that enter and leave specifications together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateGroup {
    pub name: String,
    pub members: Vec<String>,
}

impl CovariateGroup {
    pub fn new(name: &str, members: &[&str]) -> Self {
        CovariateGroup {
            name: name.to_string(),
            members: members.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Climate and soil covariates of a county maize-yield cross section:
    /// the two degree-day bins, precipitation with its square, and five
    /// soil characteristics entering singly.
    pub fn maize_preset() -> Vec<CovariateGroup> {
        vec![
            CovariateGroup::new("temperature", &["dd_below_29", "dd_above_29"]),
            CovariateGroup::new("precipitation", &["precip", "precip_sq"]),
            CovariateGroup::new("min_permeability", &["min_permeability"]),
            CovariateGroup::new("water_capacity", &["water_capacity"]),
            CovariateGroup::new("erodibility", &["erodibility"]),
            CovariateGroup::new("pct_clay", &["pct_clay"]),
            CovariateGroup::new("best_soil_class", &["best_soil_class"]),
        ]
    }

    /// Splits `groups` into the named focal group and the remaining controls.
    pub fn split(groups: &[CovariateGroup], focal: &str) -> Result<(CovariateGroup, Vec<CovariateGroup>)> {
        let f = groups
            .iter()
            .find(|g| g.name == focal)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("no covariate group named `{focal}`")))?;
        Ok((f, groups.iter().filter(|g| g.name != focal).cloned().collect()))
    }
}

/// Identifier of a control subset: sorted group names joined by `+`, or
/// `none`.
fn subset_id(controls: &[CovariateGroup], mask: usize) -> String {
    let mut names: Vec<&str> = controls
        .iter()
        .enumerate()
        .filter(|(g, _)| mask >> g & 1 == 1)
        .map(|(_, c)| c.name.as_str())
        .collect();
    names.sort_unstable();
    if names.is_empty() {
        "none".into()
    } else {
        names.join("+")
    }
}

/// Columns used by one specification: focal members then the members of the
/// selected control groups in group order.
pub fn spec_columns(focal: &CovariateGroup, controls: &[CovariateGroup], mask: usize) -> Vec<String> {
    let mut cols = focal.members.clone();
    for (g, c) in controls.iter().enumerate() {
        if mask >> g & 1 == 1 {
            cols.extend(c.members.iter().cloned());
        }
    }
    cols
}

/// Fits the focal group with every subset of the control groups, for each
/// estimator kind. Points are ordered by kind then subset bitmask.
pub fn extreme_bounds(
    ds: &SpatialDataset,
    path: &OrderedPath,
    focal: &CovariateGroup,
    controls: &[CovariateGroup],
    kinds: &[EstimatorKind],
    se: &SeMethod,
) -> Result<SweepResult> {
    let mut seen = BTreeSet::new();
    for m in focal
        .members
        .iter()
        .chain(controls.iter().flat_map(|c| c.members.iter()))
    {
        ds.column_index(m)?;
        if !seen.insert(m.as_str()) {
            return Err(Error::Domain(format!(
                "column `{m}` appears in more than one covariate group"
            )));
        }
    }
    if controls.len() > 20 {
        return Err(Error::Domain(format!(
            "{} control groups would need 2^{} specifications",
            controls.len(),
            controls.len()
        )));
    }
    se.validate()?;
    let n_specs = 1usize << controls.len();
    let jobs: Vec<(EstimatorKind, usize)> = kinds.iter().flat_map(|&k| (0..n_specs).map(move |m| (k, m))).collect();
    let points = jobs
        .par_iter()
        .map(|&(kind, mask)| {
            let cols = spec_columns(focal, controls, mask);
            let r = ds.select_columns(&cols).and_then(|sub| fit(&sub, path, kind, se));
            point(subset_id(controls, mask), None, kind, r)
        })
        .collect();
    Ok(SweepResult::new(points))
}

/// Per-coefficient comparison of double- and first-difference estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SddGap {
    pub coefficient: String,
    pub sfd: f64,
    pub sdd: f64,
    pub gap: f64,
    pub sfd_se: f64,
    pub sdd_se: f64,
    /// `sqrt(se_sfd² + se_sdd²)`.
    pub combined_se: f64,
    /// `|gap| / combined_se`.
    pub z: f64,
    /// Whether the SDD estimate lies in the SFD 95% normal interval.
    pub inside_sfd_ci: bool,
}

#[derive(Debug, Clone)]
pub struct SddCheck {
    pub sfd: FitResult,
    pub sdd: FitResult,
    pub gaps: Vec<SddGap>,
}

/// Fits SFD and SDD on the same path and compares slopes.
pub fn sdd_check(ds: &SpatialDataset, path: &OrderedPath, se: &SeMethod) -> Result<SddCheck> {
    let sfd = fit(ds, path, EstimatorKind::Sfd, se)?;
    let sdd = fit(ds, path, EstimatorKind::Sdd, se)?;
    let z975 = Normal::standard().inverse_cdf(0.975);
    let sfd_se = sfd.std_errors().expect("fit attaches a covariance");
    let sdd_se = sdd.std_errors().expect("fit attaches a covariance");
    let gaps = sfd
        .names
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, name)| {
            let (a, b) = (sfd.coefficients[j], sdd.coefficients[j]);
            let combined = sfd_se[j].hypot(sdd_se[j]);
            SddGap {
                coefficient: name.clone(),
                sfd: a,
                sdd: b,
                gap: b - a,
                sfd_se: sfd_se[j],
                sdd_se: sdd_se[j],
                combined_se: combined,
                z: (b - a).abs() / combined,
                inside_sfd_ci: (b - a).abs() <= z975 * sfd_se[j],
            }
        })
        .collect();
    Ok(SddCheck { sfd, sdd, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Unit;
    use crate::geometry::Point;
    use crate::ordering::{order_grid, GridDirection};

    fn grid(rows: usize, cols: usize) -> SpatialDataset {
        let mut units = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let x = ((r * 7 + c * 3) % 11) as f64;
                let w = ((r * 5 + c * 13) % 7) as f64;
                let u = Unit::new(
                    format!("g{r}_{c}"),
                    Point::new(c as f64, r as f64),
                    2.0 * x + 5.0 + 0.3 * w + r as f64,
                    vec![x, w, ((r + c) % 3) as f64],
                );
                units.push(u);
            }
        }
        SpatialDataset::new("y", vec!["x".into(), "w".into(), "v".into()], units).unwrap()
    }

    #[test]
    fn theta_zero_matches_direct_fit() {
        let ds = grid(6, 8);
        let se = SeMethod::Hc;
        let s = rotation_sweep(&ds, 1.0, &COARSE_THETAS, EstimatorKind::Sfd, &se).unwrap();
        assert_eq!(s.points.len(), 6);
        let direct = fit(&ds, &assign_channels(&ds, 1.0, 0.0).unwrap(), EstimatorKind::Sfd, &se).unwrap();
        let p0 = s.points.iter().find(|p| p.theta == Some(0.0)).unwrap();
        let f = p0.fit.as_ref().unwrap();
        for (c, d) in f.coefficients.iter().zip(direct.coefficients.iter()) {
            assert_eq!(c.estimate, *d);
        }
        assert!(rotation_sweep(&ds, 1.0, &[91.0], EstimatorKind::Sfd, &se).is_err());
        assert_eq!(full_thetas().len(), 180);
    }

    #[test]
    fn enumeration_is_exhaustive() {
        let ds = grid(6, 8);
        let path = order_grid(&ds, GridDirection::WE).unwrap();
        let focal = CovariateGroup::new("x", &["x"]);
        let controls = [CovariateGroup::new("w", &["w"]), CovariateGroup::new("v", &["v"])];
        let kinds = [EstimatorKind::Levels, EstimatorKind::Sfd];
        let s = extreme_bounds(&ds, &path, &focal, &controls, &kinds, &SeMethod::Ols).unwrap();
        assert_eq!(s.points.len(), 8);
        for k in kinds {
            let ids: BTreeSet<&str> = s.points.iter().filter(|p| p.kind == k).map(|p| p.id.as_str()).collect();
            assert_eq!(ids.len(), 4);
        }
        let s0 = extreme_bounds(&ds, &path, &focal, &[], &kinds, &SeMethod::Ols).unwrap();
        assert_eq!(s0.points.len(), 2);
        assert_eq!(s0.dispersion(EstimatorKind::Sfd, "x").unwrap().variance, 0.0);

        let overlap = [CovariateGroup::new("xw", &["x", "w"])];
        assert!(extreme_bounds(&ds, &path, &focal, &overlap, &kinds, &SeMethod::Ols).is_err());
    }

    #[test]
    fn exact_linear_sdd() {
        let units: Vec<Unit> = (0..12)
            .map(|i| {
                let x = ((i * i) % 7) as f64;
                Unit::new(format!("u{i}"), Point::new(i as f64, 0.0), 2.0 * x + 5.0, vec![x])
            })
            .collect();
        let ds = SpatialDataset::new("y", vec!["x".into()], units).unwrap();
        let path = crate::ordering::order_1d(&ds, crate::ordering::Axis::X);
        let c = sdd_check(&ds, &path, &SeMethod::Hc).unwrap();
        assert!((c.sfd.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((c.sdd.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(c.gaps.len(), 1);
    }

    #[test]
    fn zero_mean_guard() {
        let d = Dispersion::from_values(EstimatorKind::Sfd, "x", &[1.0, -1.0]);
        assert!(d.mean_near_zero && d.coefficient_of_variation.is_none());
        let d = Dispersion::from_values(EstimatorKind::Sfd, "x", &[1.0, 3.0]);
        assert!((d.coefficient_of_variation.unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn maize_preset_partitions() {
        let g = CovariateGroup::maize_preset();
        let members: Vec<&String> = g.iter().flat_map(|g| g.members.iter()).collect();
        assert_eq!(members.len(), 9);
        let (f, rest) = CovariateGroup::split(&g, "temperature").unwrap();
        assert_eq!(f.members.len(), 2);
        assert_eq!(1usize << rest.len(), 64);
    }
}
