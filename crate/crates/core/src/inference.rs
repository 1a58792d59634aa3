//! Covariance estimators for least-squares fits on spatial designs.
//!
//! All sandwich estimators share the bread `(X'X)^-1` and differ in the meat:
//!
//! ```text
//! HC           S = Σ_i e_i² x_i x_i'
//! Newey-West   S = Σ_0 + Σ_{l=1..L} (1 − l/(L+1)) (Σ_l + Σ_l'),  lags taken within channels
//! Conley       S = Σ_i Σ_j K_ij e_i e_j x_i x_j',  K_ij = (1 − |dx|/cx)+ (1 − |dy|/cy)+
//! Cluster      S = Σ_g (Σ_{i∈g} e_i x_i)(Σ_{i∈g} e_i x_i)',  scaled by G/(G−1)·(N−1)/(N−p)
//! ```
//!
//! Bootstrap variants resample rows (iid) or whole channels (block) and take
//! the empirical covariance of the refitted coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::differencing::DifferencedDesign;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{least_squares, sandwich, symmetrize};

/// Standard-error method attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeMethod {
    Ols,
    Hc,
    NeweyWest { lag: usize },
    Conley { cutoff_x: f64, cutoff_y: f64 },
    Cluster,
    Bootstrap { reps: usize, seed: u64 },
    BlockBootstrap { reps: usize, seed: u64 },
}

impl SeMethod {
    /// Default Newey-West lag for differenced designs: one beyond the MA(1)
    /// lag that differencing induces.
    pub const DEFAULT_NW_LAG: usize = 2;

    pub fn validate(&self) -> Result<()> {
        match *self {
            SeMethod::NeweyWest { lag } if lag < 1 => Err(Error::Domain("Newey-West lag must be >= 1".into())),
            SeMethod::Conley { cutoff_x, cutoff_y } if !(cutoff_x > 0.0 && cutoff_y > 0.0) => {
                Err(Error::Domain("Conley cutoffs must be positive".into()))
            }
            SeMethod::Bootstrap { reps, .. } | SeMethod::BlockBootstrap { reps, .. } if reps < 100 => Err(
                Error::Domain(format!("bootstrap needs at least 100 replications, got {reps}")),
            ),
            _ => Ok(()),
        }
    }

    /// Short label used for table columns.
    pub fn label(&self) -> String {
        match self {
            SeMethod::Ols => "ols".into(),
            SeMethod::Hc => "hc".into(),
            SeMethod::NeweyWest { lag } => format!("newey-west:{lag}"),
            SeMethod::Conley { cutoff_x, cutoff_y } => format!("conley:{cutoff_x}:{cutoff_y}"),
            SeMethod::Cluster => "cluster".into(),
            SeMethod::Bootstrap { reps, .. } => format!("bootstrap:{reps}"),
            SeMethod::BlockBootstrap { reps, .. } => format!("block-bootstrap:{reps}"),
        }
    }
}

impl fmt::Display for SeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `ols`, `hc`, `newey-west:L`, `conley:CX:CY`, `cluster`,
/// `bootstrap:B[:SEED]` and `block-bootstrap:B[:SEED]`.
impl FromStr for SeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Domain(format!("unrecognised standard-error method `{s}`"));
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let int = |t: &str| t.parse::<u64>().map_err(|_| bad());
        let m = match parts.as_slice() {
            ["ols"] => SeMethod::Ols,
            ["hc"] | ["hc0"] => SeMethod::Hc,
            ["newey-west"] | ["nw"] => SeMethod::NeweyWest {
                lag: Self::DEFAULT_NW_LAG,
            },
            ["newey-west", l] | ["nw", l] => SeMethod::NeweyWest { lag: int(l)? as usize },
            ["conley", cx, cy] => SeMethod::Conley {
                cutoff_x: num(cx)?,
                cutoff_y: num(cy)?,
            },
            ["cluster"] => SeMethod::Cluster,
            ["bootstrap", b] => SeMethod::Bootstrap {
                reps: int(b)? as usize,
                seed: 0,
            },
            ["bootstrap", b, seed] => SeMethod::Bootstrap {
                reps: int(b)? as usize,
                seed: int(seed)?,
            },
            ["block-bootstrap", b] => SeMethod::BlockBootstrap {
                reps: int(b)? as usize,
                seed: 0,
            },
            ["block-bootstrap", b, seed] => SeMethod::BlockBootstrap {
                reps: int(b)? as usize,
                seed: int(seed)?,
            },
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

/// A covariance matrix plus any non-fatal conditions met while computing it.
#[derive(Debug, Clone)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    pub warnings: Vec<String>,
}

impl Covariance {
    fn clean(matrix: DMatrix<f64>) -> Self {
        Covariance {
            matrix,
            warnings: Vec::new(),
        }
    }
}

/// Row metadata needed by the structured estimators.
#[derive(Debug, Clone, Default)]
pub struct RowLayout {
    pub channel_of_row: Vec<usize>,
    pub positions: Vec<Point>,
}

impl From<&DifferencedDesign> for RowLayout {
    fn from(d: &DifferencedDesign) -> Self {
        RowLayout {
            channel_of_row: d.channel_of_row.clone(),
            positions: d.positions.clone(),
        }
    }
}

fn bread(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    (x.transpose() * x).try_inverse().ok_or_else(|| Error::Collinear {
        columns: vec![],
        ratio: 0.0,
    })
}

/// Score rows `g_i = e_i x_i` as an N x p matrix.
fn scores(x: &DMatrix<f64>, e: &DVector<f64>) -> DMatrix<f64> {
    let mut g = x.clone();
    for (mut row, &ei) in g.row_iter_mut().zip(e.iter()) {
        row *= ei;
    }
    g
}

/// Classical `σ̂² (X'X)^-1` with `σ̂² = e'e / (N − p)`.
pub fn ols_vcov(x: &DMatrix<f64>, e: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::EmptyDesign(format!(
            "{n} rows leave no residual degrees of freedom for {p} coefficients"
        )));
    }
    let s2 = e.norm_squared() / (n - p) as f64;
    Ok(symmetrize(bread(x)? * s2))
}

/// White's heteroskedasticity-robust sandwich without small-sample scaling.
pub fn hc_vcov(x: &DMatrix<f64>, e: &DVector<f64>) -> Result<DMatrix<f64>> {
    let g = scores(x, e);
    Ok(sandwich(&bread(x)?, &(g.transpose() * &g)))
}

/// Newey-West with Bartlett weights; cross products only between rows of the
/// same channel. Rows must be ordered along each channel.
pub fn newey_west(x: &DMatrix<f64>, e: &DVector<f64>, channel_of_row: &[usize], lag: usize) -> Result<Covariance> {
    if lag < 1 {
        return Err(Error::Domain("Newey-West lag must be >= 1".into()));
    }
    let g = scores(x, e);
    let mut meat = g.transpose() * &g;
    let n = g.nrows();
    for l in 1..=lag {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let mut gamma = DMatrix::zeros(g.ncols(), g.ncols());
        for i in l..n {
            if channel_of_row[i] == channel_of_row[i - l] {
                gamma += g.row(i).transpose() * g.row(i - l);
            }
        }
        meat += (&gamma + gamma.transpose()) * w;
    }
    let mut warnings = Vec::new();
    let shortest = channel_lengths(channel_of_row).into_values().min().unwrap_or(0);
    if lag >= shortest {
        warnings.push(format!(
            "Newey-West lag {lag} reaches or exceeds the shortest channel ({shortest} rows); lags truncated there"
        ));
    }
    Ok(Covariance {
        matrix: sandwich(&bread(x)?, &meat),
        warnings,
    })
}

fn channel_lengths(channel_of_row: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &c in channel_of_row {
        *m.entry(c).or_insert(0) += 1;
    }
    m
}

/// Conley spatial HAC with a product Bartlett kernel in x and y. Pairs may
/// span channels.
pub fn conley(
    x: &DMatrix<f64>,
    e: &DVector<f64>,
    positions: &[Point],
    cutoff_x: f64,
    cutoff_y: f64,
) -> Result<Covariance> {
    if !(cutoff_x > 0.0 && cutoff_y > 0.0) {
        return Err(Error::Domain("Conley cutoffs must be positive".into()));
    }
    let g = scores(x, e);
    let n = g.nrows();
    let p = g.ncols();
    let mut meat = g.transpose() * &g;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| positions[a].x.total_cmp(&positions[b].x));
    let mut cross = DMatrix::zeros(p, p);
    let mut off_diagonal = false;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let dx = (positions[j].x - positions[i].x).abs();
            if dx >= cutoff_x {
                break;
            }
            let dy = (positions[j].y - positions[i].y).abs();
            if dy >= cutoff_y {
                continue;
            }
            let w = (1.0 - dx / cutoff_x) * (1.0 - dy / cutoff_y);
            if w > 0.0 {
                off_diagonal = true;
                cross += g.row(i).transpose() * g.row(j) * w;
            }
        }
    }
    meat += &cross + cross.transpose();
    let mut warnings = Vec::new();
    if !off_diagonal {
        warnings.push("Conley cutoffs are below every inter-row spacing; estimate equals HC".into());
    }
    Ok(Covariance {
        matrix: sandwich(&bread(x)?, &meat),
        warnings,
    })
}

/// Cluster-robust sandwich with one cluster per channel.
pub fn cluster_vcov(x: &DMatrix<f64>, e: &DVector<f64>, channel_of_row: &[usize]) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    let g = scores(x, e);
    let mut sums: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for (i, &c) in channel_of_row.iter().enumerate() {
        let s = sums.entry(c).or_insert_with(|| DVector::zeros(p));
        *s += g.row(i).transpose();
    }
    let n_clusters = sums.len();
    if n_clusters < 2 {
        return Err(Error::Domain(
            "clustering by channel needs at least two channels; use newey-west for a single channel".into(),
        ));
    }
    if n <= p {
        return Err(Error::EmptyDesign(format!(
            "{n} rows leave no residual degrees of freedom for {p} coefficients"
        )));
    }
    let mut meat = DMatrix::zeros(p, p);
    for s in sums.values() {
        meat += s * s.transpose();
    }
    let gf = n_clusters as f64;
    let factor = gf / (gf - 1.0) * (n as f64 - 1.0) / (n - p) as f64;
    Ok(sandwich(&bread(x)?, &meat) * factor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// Resample rows with replacement.
    Iid,
    /// Resample whole channels with replacement.
    Block,
}

/// RNG stream for replication `rep` under `seed`: ChaCha20 keyed by the
/// seed, with the replication index as the stream id.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Empirical covariance of bootstrap coefficient draws. `x` already carries
/// any intercept column. Rank-deficient resamples are redrawn; more than
/// `10·reps` draws in total is an error.
pub fn bootstrap_vcov(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    channel_of_row: &[usize],
    reps: usize,
    seed: u64,
    mode: BootstrapMode,
) -> Result<DMatrix<f64>> {
    if reps < 100 {
        return Err(Error::Domain(format!(
            "bootstrap needs at least 100 replications, got {reps}"
        )));
    }
    let (n, p) = x.shape();
    let names: Vec<String> = (0..p).map(|j| format!("column {j}")).collect();
    let blocks: Vec<Vec<usize>> = {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in channel_of_row.iter().enumerate() {
            m.entry(c).or_default().push(i);
        }
        m.into_values().collect()
    };
    let cap = 10 * reps;

    let draws: Vec<(Option<DVector<f64>>, usize)> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = rep_rng(seed, b as u64);
            let mut attempts = 0;
            while attempts < cap {
                attempts += 1;
                let rows: Vec<usize> = match mode {
                    BootstrapMode::Iid => (0..n).map(|_| rng.random_range(0..n)).collect(),
                    BootstrapMode::Block => (0..blocks.len())
                        .flat_map(|_| blocks[rng.random_range(0..blocks.len())].iter().copied())
                        .collect(),
                };
                let xb = x.select_rows(rows.iter());
                let yb = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
                if let Ok(ls) = least_squares(&xb, &yb, &names) {
                    return (Some(ls.beta), attempts);
                }
            }
            (None, attempts)
        })
        .collect();

    let total: usize = draws.iter().map(|(_, a)| a).sum();
    if total > cap || draws.iter().any(|(b, _)| b.is_none()) {
        return Err(Error::Bootstrap(format!(
            "{total} resamples were needed for {reps} full-rank replications (cap {cap})"
        )));
    }
    let betas: Vec<DVector<f64>> = draws.into_iter().filter_map(|(b, _)| b).collect();
    let mean = betas.iter().fold(DVector::zeros(p), |acc, b| acc + b) / reps as f64;
    let mut cov = DMatrix::zeros(p, p);
    for b in &betas {
        let d = b - &mean;
        cov += &d * d.transpose();
    }
    Ok(symmetrize(cov / (reps as f64 - 1.0)))
}

/// Large-sample variance of the first-difference estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YatchewVariance {
    /// Mean squared differenced residual.
    pub s2: f64,
    /// `ΔX'ΔX / N` over the slope columns.
    pub omega: DMatrix<f64>,
    /// `1.5 · s2 / N · omega^-1`.
    pub vcov: DMatrix<f64>,
    pub n: usize,
    /// Set when `s2` is reported as the variance of the differenced error
    /// (about twice the level error variance at finite spacing) rather than a
    /// level error variance.
    pub finite_spacing_caveat: bool,
}

pub fn yatchew_variance(design: &DifferencedDesign) -> Result<YatchewVariance> {
    if design.order != 1 {
        return Err(Error::Domain(
            "the Yatchew variance applies to first differences only".into(),
        ));
    }
    let n = design.n_rows();
    let k = design.dx.ncols();
    if n <= k + 1 {
        return Err(Error::EmptyDesign(format!("{n} differenced rows for {k} slopes")));
    }
    let x = with_intercept(&design.dx);
    let mut names = vec!["(intercept)".to_string()];
    names.extend(design.columns.iter().cloned());
    let ls = least_squares(&x, &design.dy, &names)?;
    let nf = n as f64;
    let s2 = ls.residuals.norm_squared() / nf;
    let omega = design.dx.transpose() * &design.dx / nf;
    let omega_inv = omega.clone().try_inverse().ok_or_else(|| Error::Collinear {
        columns: design.columns.clone(),
        ratio: 0.0,
    })?;
    let vcov = symmetrize(omega_inv * (1.5 * s2 / nf));
    Ok(YatchewVariance {
        s2,
        omega,
        vcov,
        n,
        finite_spacing_caveat: true,
    })
}

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// Lag-`lag` autocorrelation of residuals, pooling pairs within channels.
pub fn residual_autocorrelation(e: &DVector<f64>, channel_of_row: &[usize], lag: usize) -> f64 {
    let mean = e.mean();
    let denom: f64 = e.iter().map(|v| (v - mean).powi(2)).sum();
    let mut num = 0.0;
    for i in lag..e.len() {
        if channel_of_row[i] == channel_of_row[i - lag] {
            num += (e[i] - mean) * (e[i - lag] - mean);
        }
    }
    num / denom
}

/// Dispatches a fitted design to the requested estimator. `x` includes the
/// intercept column when the fit has one; `y` is only used by the bootstrap.
pub fn covariance(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    e: &DVector<f64>,
    layout: &RowLayout,
    method: &SeMethod,
) -> Result<Covariance> {
    method.validate()?;
    match *method {
        SeMethod::Ols => ols_vcov(x, e).map(Covariance::clean),
        SeMethod::Hc => hc_vcov(x, e).map(Covariance::clean),
        SeMethod::NeweyWest { lag } => newey_west(x, e, &layout.channel_of_row, lag),
        SeMethod::Conley { cutoff_x, cutoff_y } => conley(x, e, &layout.positions, cutoff_x, cutoff_y),
        SeMethod::Cluster => cluster_vcov(x, e, &layout.channel_of_row).map(Covariance::clean),
        SeMethod::Bootstrap { reps, seed } => {
            bootstrap_vcov(x, y, &layout.channel_of_row, reps, seed, BootstrapMode::Iid).map(Covariance::clean)
        }
        SeMethod::BlockBootstrap { reps, seed } => {
            bootstrap_vcov(x, y, &layout.channel_of_row, reps, seed, BootstrapMode::Block).map(Covariance::clean)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_psd;

    fn hand_design() -> (DMatrix<f64>, DVector<f64>) {
        (
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]),
            DVector::from_vec(vec![1.0, -1.0, 1.0]),
        )
    }

    #[test]
    fn parses_methods() {
        assert_eq!(
            "newey-west:2".parse::<SeMethod>().unwrap(),
            SeMethod::NeweyWest { lag: 2 }
        );
        assert_eq!(
            "conley:1.5:2".parse::<SeMethod>().unwrap(),
            SeMethod::Conley {
                cutoff_x: 1.5,
                cutoff_y: 2.0
            }
        );
        assert_eq!(
            "block-bootstrap:200:9".parse::<SeMethod>().unwrap(),
            SeMethod::BlockBootstrap { reps: 200, seed: 9 }
        );
        assert!("bootstrap:50".parse::<SeMethod>().is_err());
        assert!("newey-west:0".parse::<SeMethod>().is_err());
        assert!("conley:0:1".parse::<SeMethod>().is_err());
        assert!("jackknife".parse::<SeMethod>().is_err());
    }

    #[test]
    fn newey_west_hand_example() {
        // brute force: S = Σ g_i g_i' + 0.5 (g_2 g_1' + g_1 g_2' + g_3 g_2' + g_2 g_3')
        let (x, e) = hand_design();
        let g = [[1.0, 1.0], [-1.0, -2.0], [1.0, 3.0]];
        let mut s = [[0.0; 2]; 2];
        for i in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += g[i][a] * g[i][b];
                    if i > 0 {
                        s[a][b] += 0.5 * (g[i][a] * g[i - 1][b] + g[i - 1][a] * g[i][b]);
                    }
                }
            }
        }
        let meat = DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
        let xtx_inv = DMatrix::from_row_slice(2, 2, &[14.0 / 6.0, -1.0, -1.0, 0.5]);
        let expected = &xtx_inv * meat * &xtx_inv;
        let nw = newey_west(&x, &e, &[0, 0, 0], 1).unwrap();
        assert!((nw.matrix - expected).amax() < 1e-12);
    }

    #[test]
    fn newey_west_frozen_values() {
        // S = [[1, 2], [2, 6]] for this design, worked by hand
        let (x, e) = hand_design();
        let nw = newey_west(&x, &e, &[0, 0, 0], 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[19.0 / 9.0, -1.0, -1.0, 0.5]);
        assert!((nw.matrix - expected).amax() < 1e-12);
    }

    #[test]
    fn tiny_conley_cutoffs_equal_hc() {
        let (x, e) = hand_design();
        let pos = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let c = conley(&x, &e, &pos, 1e-6, 1e-6).unwrap();
        assert_eq!(c.matrix, hc_vcov(&x, &e).unwrap());
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn conley_one_dimensional_matches_newey_west() {
        let n = 20;
        let x = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                ((i * 7) % 5) as f64 - 0.3 * i as f64
            }
        });
        let e = DVector::from_fn(n, |i, _| ((i * 13) % 7) as f64 - 3.0);
        let pos: Vec<Point> = (0..n).map(|i| Point::new(i as f64, 4.0)).collect();
        for lag in 1..4 {
            let nw = newey_west(&x, &e, &vec![0; n], lag).unwrap();
            let c = conley(&x, &e, &pos, lag as f64 + 1.0, 1.0).unwrap();
            assert!((nw.matrix - c.matrix).amax() < 1e-10);
        }
    }

    #[test]
    fn cluster_hand_example() {
        // clusters {0,1} and {2}: S = (g1+g2)(g1+g2)' + g3 g3'
        let (x, e) = hand_design();
        let s1 = [0.0, -1.0];
        let s2 = [1.0, 3.0];
        let meat = DMatrix::from_row_slice(
            2,
            2,
            &[
                s1[0] * s1[0] + s2[0] * s2[0],
                s1[0] * s1[1] + s2[0] * s2[1],
                s1[1] * s1[0] + s2[1] * s2[0],
                s1[1] * s1[1] + s2[1] * s2[1],
            ],
        );
        let xtx_inv = DMatrix::from_row_slice(2, 2, &[14.0 / 6.0, -1.0, -1.0, 0.5]);
        let factor = 2.0 / 1.0 * 2.0 / 1.0;
        let expected = &xtx_inv * meat * &xtx_inv * factor;
        let got = cluster_vcov(&x, &e, &[0, 0, 1]).unwrap();
        assert!((got - expected).amax() < 1e-12);
    }

    #[test]
    fn singleton_clusters_scale_hc() {
        let n = 12;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64).sin() });
        let e = DVector::from_fn(n, |i, _| (i as f64 * 0.7).cos());
        let channels: Vec<usize> = (0..n).collect();
        let cl = cluster_vcov(&x, &e, &channels).unwrap();
        let factor = n as f64 / (n as f64 - 1.0) * (n as f64 - 1.0) / (n as f64 - 2.0);
        assert!((cl - hc_vcov(&x, &e).unwrap() * factor).amax() < 1e-12);
        assert!(matches!(cluster_vcov(&x, &e, &vec![3; n]), Err(Error::Domain(_))));
    }

    #[test]
    fn cluster_is_permutation_invariant() {
        let n = 9;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i * i % 5) as f64 });
        let e = DVector::from_fn(n, |i, _| (i as f64 * 1.3).sin());
        let ch = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let a = cluster_vcov(&x, &e, &ch).unwrap();
        // move channel 2's rows first
        let perm = [6, 7, 8, 0, 1, 2, 3, 4, 5];
        let xp = x.select_rows(perm.iter());
        let ep = DVector::from_iterator(n, perm.iter().map(|&i| e[i]));
        let chp: Vec<usize> = perm.iter().map(|&i| ch[i]).collect();
        let b = cluster_vcov(&xp, &ep, &chp).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_exact_fits_vanish() {
        let n = 40;
        let x = with_intercept(&DMatrix::from_fn(n, 1, |i, _| (i as f64 * 0.37).sin() * 3.0));
        let y_exact = DVector::from_fn(n, |i, _| 2.0 * x[(i, 1)]);
        let ch: Vec<usize> = (0..n).map(|i| i / 10).collect();
        let v = bootstrap_vcov(&x, &y_exact, &ch, 200, 5, BootstrapMode::Iid).unwrap();
        assert!(v.iter().all(|a| a.abs() < 1e-20));

        let y = DVector::from_fn(n, |i, _| x[(i, 1)] + ((i * 31) % 11) as f64 * 0.1);
        let a = bootstrap_vcov(&x, &y, &ch, 150, 11, BootstrapMode::Block).unwrap();
        let b = bootstrap_vcov(&x, &y, &ch, 150, 11, BootstrapMode::Block).unwrap();
        assert_eq!(a, b);
        assert!(is_psd(&a, 1e-10));
        let c = bootstrap_vcov(&x, &y, &ch, 150, 12, BootstrapMode::Block).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bootstrap_gives_up_on_degenerate_designs() {
        let x = with_intercept(&DMatrix::zeros(6, 1));
        let y = DVector::from_fn(6, |i, _| i as f64);
        let err = bootstrap_vcov(&x, &y, &[0, 0, 1, 1, 2, 2], 100, 1, BootstrapMode::Iid).unwrap_err();
        assert!(matches!(err, Error::Bootstrap(_)));
    }

    #[test]
    fn yatchew_scaling() {
        let n = 30;
        let dx = DMatrix::from_fn(n, 1, |i, _| ((i * 17) % 13) as f64 - 6.0);
        let dy = DVector::from_fn(n, |i, _| dx[(i, 0)] + ((i * 7) % 5) as f64 - 2.0);
        let design = DifferencedDesign {
            order: 1,
            dy: dy.clone(),
            dx: dx.clone(),
            columns: vec!["x".into()],
            pair_map: vec![vec![]; n],
            channel_of_row: vec![0; n],
            positions: vec![Point::new(0.0, 0.0); n],
        };
        let a = yatchew_variance(&design).unwrap();
        let scaled = DifferencedDesign {
            dx: &dx * 2.0,
            ..design.clone()
        };
        let b = yatchew_variance(&scaled).unwrap();
        assert!((b.omega[(0, 0)] - 4.0 * a.omega[(0, 0)]).abs() < 1e-9);
        assert!((b.vcov[(0, 0)] - a.vcov[(0, 0)] / 4.0).abs() < 1e-12);

        let exact = DifferencedDesign {
            dy: &dx.column(0) * 3.0,
            ..design
        };
        let z = yatchew_variance(&exact).unwrap();
        assert!(z.s2 < 1e-25 && z.vcov.amax() < 1e-25);
    }
}
