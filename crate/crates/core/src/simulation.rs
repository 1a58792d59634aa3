//! Synthetic data-generating processes and a seeded, parallel Monte Carlo
//! engine.
//!
//! Every draw uses ChaCha20 keyed by the master seed; replication `r` runs on
//! stream `r` (see [`rep_rng`]), so a single replication can be regenerated
//! in isolation.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_f64, SpatialDataset, Unit};
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind};
use crate::geometry::Point;
pub use crate::inference::rep_rng;
use crate::inference::SeMethod;
use crate::ordering::{order_1d, order_grid, Axis, GridDirection, OrderedPath};

/// Curvature scenarios for a common cause `z` driving both `x` and `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `x` linear in `z`, `c` concave.
    A,
    /// `x` oscillates in `z`, `c` concave.
    B,
    /// `x` and `c` share the same concave shape.
    C,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Scenario::A),
            "b" | "B" => Ok(Scenario::B),
            "c" | "C" => Ok(Scenario::C),
            _ => Err(Error::Domain(format!("unknown scenario `{s}` (expected a, b or c)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dgp", rename_all = "snake_case")]
pub enum DgpKind {
    /// `x = sin(i°) + φδ`, `c = sin((360 i/λ)°) + φη` on a line.
    Sinusoid {
        lambda: f64,
        phi: f64,
    },
    CommonCause {
        scenario: Scenario,
    },
    /// `y = βx_i + γx_{i−1} + ε` with iid standard normal `x`.
    Spillover {
        gamma: f64,
    },
    /// `y = xβ + ε` with iid standard normal `x`.
    Iid,
    /// `x = sin(360z°) + ν`, `y = xβ + 2 sin(360z°)α + ε`, `z = i/N`.
    SmoothTrend,
    /// Square lattice with a radially symmetric confounder.
    IsotropicGrid,
    /// Lattice whose rows carry a confounder that is constant along the row
    /// up to a small smooth ripple, observed as control `c_proxy`, plus
    /// independent controls `w1` and `w2`.
    ChannelConfounded {
        rows: usize,
    },
}

/// A data-generating process and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DGPConfig {
    pub kind: DgpKind,
    /// Number of units. Lattice kinds round to whole rows.
    pub n: usize,
    pub beta: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl DGPConfig {
    pub fn new(kind: DgpKind, n: usize, seed: u64) -> Self {
        DGPConfig {
            kind,
            n,
            beta: 1.0,
            alpha: 1.0,
            sigma: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Domain(format!("simulations need N >= 10, got {}", self.n)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Domain("noise sd must be non-negative".into()));
        }
        match self.kind {
            DgpKind::Sinusoid { lambda, phi } if !(lambda > 0.0) || !(phi >= 0.0) => Err(Error::Domain(format!(
                "sinusoid needs lambda > 0 and phi >= 0 (got {lambda}, {phi})"
            ))),
            DgpKind::ChannelConfounded { rows } if rows < 2 || self.n / rows < 3 => Err(Error::Domain(
                "channel-confounded grid needs >= 2 rows of >= 3 units".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Draws the dataset for replication `rep`.
    pub fn draw(&self, rep: u64) -> Result<SimulatedDataset> {
        self.validate()?;
        let mut rng = rep_rng(self.seed, rep);
        Ok(match self.kind {
            DgpKind::Sinusoid { lambda, phi } => sinusoid(self, lambda, phi, &mut rng),
            DgpKind::CommonCause { scenario } => common_cause(self, scenario, &mut rng),
            DgpKind::Spillover { gamma } => spillover(self, gamma, &mut rng),
            DgpKind::Iid => iid(self, &mut rng),
            DgpKind::SmoothTrend => smooth_trend(self, &mut rng),
            DgpKind::IsotropicGrid => isotropic_grid(self, &mut rng),
            DgpKind::ChannelConfounded { rows } => channel_confounded(self, rows, &mut rng),
        })
    }
}

/// A simulated dataset with everything needed to check its construction.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub dataset: SpatialDataset,
    /// Unobserved confounders, N x M, aligned with the dataset's units.
    pub confounder: DMatrix<f64>,
    /// True coefficient per dataset column (zero for pure controls).
    pub coefficients: DVector<f64>,
    pub alpha: DVector<f64>,
    pub noise: DVector<f64>,
    /// Human-readable formulas of the process.
    pub description: String,
    pub lattice: bool,
}

impl SimulatedDataset {
    /// `max |y − Xβ − cα − ε|`; zero up to rounding by construction.
    pub fn construction_error(&self) -> f64 {
        let y = self.dataset.outcome();
        let fitted = self.dataset.regressor_matrix() * &self.coefficients + &self.confounder * &self.alpha;
        (y - fitted - &self.noise).amax()
    }

    pub fn truth(&self, column: &str) -> Option<f64> {
        self.dataset
            .columns()
            .iter()
            .position(|c| c == column)
            .map(|j| self.coefficients[j])
    }

    /// West-to-east rows for lattices, the x axis otherwise.
    pub fn default_path(&self) -> Result<OrderedPath> {
        if self.lattice {
            order_grid(&self.dataset, GridDirection::WE)
        } else {
            Ok(order_1d(&self.dataset, Axis::X))
        }
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_id(i: usize) -> String {
    format!("u{i:06}")
}

fn sin_deg(d: f64) -> f64 {
    d.to_radians().sin()
}

struct Columns {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

fn assemble(
    cfg: &DGPConfig,
    positions: Vec<(String, Point)>,
    cols: Columns,
    confounder: Vec<f64>,
    noise: Vec<f64>,
    description: String,
    lattice: bool,
) -> SimulatedDataset {
    let n = positions.len();
    let has_c = !confounder.is_empty();
    let units = positions
        .into_iter()
        .enumerate()
        .map(|(i, (id, p))| {
            let regs: Vec<f64> = cols.values.iter().map(|v| v[i]).collect();
            let mut y: f64 = regs.iter().zip(&cols.coefficients).map(|(x, b)| x * b).sum();
            if has_c {
                y += confounder[i] * cfg.alpha;
            }
            y += noise[i];
            Unit::new(id, p, y, regs)
        })
        .collect();
    let dataset = SpatialDataset::new("y", cols.names, units).expect("simulated units are valid");
    let (confounder, alpha) = if has_c {
        (DMatrix::from_vec(n, 1, confounder), DVector::from_element(1, cfg.alpha))
    } else {
        (DMatrix::zeros(n, 0), DVector::zeros(0))
    };
    SimulatedDataset {
        dataset,
        confounder,
        coefficients: DVector::from_vec(cols.coefficients),
        alpha,
        noise: DVector::from_vec(noise),
        description,
        lattice,
    }
}

fn line_positions(n: usize) -> Vec<(String, Point)> {
    (1..=n).map(|i| (unit_id(i), Point::new(i as f64, 0.0))).collect()
}

fn sinusoid<R: Rng>(cfg: &DGPConfig, lambda: f64, phi: f64, rng: &mut R) -> SimulatedDataset {
    let n = cfg.n;
    let delta = normals(rng, n, 1.0);
    let eta = normals(rng, n, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let x: Vec<f64> = (1..=n).map(|i| sin_deg(i as f64) + phi * delta[i - 1]).collect();
    let c: Vec<f64> = (1..=n)
        .map(|i| sin_deg(360.0 * i as f64 / lambda) + phi * eta[i - 1])
        .collect();
    assemble(
        cfg,
        line_positions(n),
        Columns {
            names: vec!["x".into()],
            values: vec![x],
            coefficients: vec![cfg.beta],
        },
        c,
        eps,
        format!(
            "x = sin(i deg) + {phi}*delta; c = sin(360 i/{lambda} deg) + {phi}*eta; y = {}x + {}c + eps",
            cfg.beta, cfg.alpha
        ),
        false,
    )
}

fn common_cause<R: Rng>(cfg: &DGPConfig, scenario: Scenario, rng: &mut R) -> SimulatedDataset {
    let n = cfg.n;
    let nf = n as f64;
    let nu = normals(rng, n, 1.0);
    let eta = normals(rng, n, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let concave = |z: f64| nf * (2.0 * z - z * z);
    let (shape, formula): (Box<dyn Fn(f64) -> f64>, &str) = match scenario {
        Scenario::A => (Box::new(|z| nf * z), "x = N z + nu"),
        Scenario::B => (
            Box::new(|z| nf / (12.0 * std::f64::consts::PI) * sin_deg(6.0 * 360.0 * z)),
            "x = N/(12 pi) sin(6*360 z deg) + nu",
        ),
        Scenario::C => (Box::new(concave), "x = N(2z - z^2) + nu"),
    };
    let z = |i: usize| i as f64 / nf;
    let x: Vec<f64> = (1..=n).map(|i| shape(z(i)) + nu[i - 1]).collect();
    let c: Vec<f64> = (1..=n).map(|i| concave(z(i)) + eta[i - 1]).collect();
    assemble(
        cfg,
        line_positions(n),
        Columns {
            names: vec!["x".into()],
            values: vec![x],
            coefficients: vec![cfg.beta],
        },
        c,
        eps,
        format!(
            "z = i/N; {formula}; c = N(2z - z^2) + eta; y = {}x + {}c + eps",
            cfg.beta, cfg.alpha
        ),
        false,
    )
}

fn spillover<R: Rng>(cfg: &DGPConfig, gamma: f64, rng: &mut R) -> SimulatedDataset {
    let n = cfg.n;
    // x[0] is the unobserved left neighbour of the first unit
    let x = normals(rng, n + 1, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let cur = x[1..].to_vec();
    let lag = x[..n].to_vec();
    assemble(
        cfg,
        line_positions(n),
        Columns {
            names: vec!["x".into(), "x_lag1".into()],
            values: vec![cur, lag],
            coefficients: vec![cfg.beta, gamma],
        },
        Vec::new(),
        eps,
        format!("x iid N(0,1); y = {} x_i + {gamma} x_(i-1) + eps", cfg.beta),
        false,
    )
}

fn iid<R: Rng>(cfg: &DGPConfig, rng: &mut R) -> SimulatedDataset {
    let x = normals(rng, cfg.n, 1.0);
    let eps = normals(rng, cfg.n, cfg.sigma);
    assemble(
        cfg,
        line_positions(cfg.n),
        Columns {
            names: vec!["x".into()],
            values: vec![x],
            coefficients: vec![cfg.beta],
        },
        Vec::new(),
        eps,
        format!("x iid N(0,1); y = {} x + eps", cfg.beta),
        false,
    )
}

fn smooth_trend<R: Rng>(cfg: &DGPConfig, rng: &mut R) -> SimulatedDataset {
    let n = cfg.n;
    let nu = normals(rng, n, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let m = |i: usize| sin_deg(360.0 * i as f64 / n as f64);
    let x: Vec<f64> = (1..=n).map(|i| m(i) + nu[i - 1]).collect();
    let g: Vec<f64> = (1..=n).map(|i| 2.0 * m(i)).collect();
    assemble(
        cfg,
        line_positions(n),
        Columns {
            names: vec!["x".into()],
            values: vec![x],
            coefficients: vec![cfg.beta],
        },
        g,
        eps,
        format!(
            "z = i/N; x = sin(360 z deg) + nu; g = 2 sin(360 z deg); y = {}x + {}g + eps",
            cfg.beta, cfg.alpha
        ),
        false,
    )
}

fn square(col: usize, row: usize) -> Vec<Point> {
    let (x, y) = (col as f64, row as f64);
    vec![
        Point::new(x - 0.5, y - 0.5),
        Point::new(x + 0.5, y - 0.5),
        Point::new(x + 0.5, y + 0.5),
        Point::new(x - 0.5, y + 0.5),
    ]
}

fn with_squares(sim: SimulatedDataset, cells: &[(usize, usize)]) -> SimulatedDataset {
    let rings = sim
        .dataset
        .units()
        .iter()
        .zip(cells)
        .map(|(u, &(col, row))| (u.id.clone(), square(col, row)))
        .collect();
    SimulatedDataset {
        dataset: sim.dataset.with_polygons(rings).expect("unit squares are valid"),
        ..sim
    }
}

type Lattice = (Vec<(String, Point)>, Vec<(usize, usize)>);

fn lattice(rows: usize, cols: usize) -> Lattice {
    let mut pos = Vec::with_capacity(rows * cols);
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pos.push((format!("g{r:04}_{c:04}"), Point::new(c as f64, r as f64)));
            cells.push((c, r));
        }
    }
    (pos, cells)
}

fn isotropic_grid<R: Rng>(cfg: &DGPConfig, rng: &mut R) -> SimulatedDataset {
    let side = (cfg.n as f64).sqrt().floor() as usize;
    let n = side * side;
    let nu = normals(rng, n, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let centre = (side as f64 - 1.0) / 2.0;
    let period = side as f64;
    let (pos, cells) = lattice(side, side);
    let field: Vec<f64> = pos
        .iter()
        .map(|(_, p)| {
            let r = (p.x - centre).hypot(p.y - centre);
            (std::f64::consts::TAU * r / period).cos()
        })
        .collect();
    let x: Vec<f64> = field.iter().zip(&nu).map(|(f, v)| f + v).collect();
    let c: Vec<f64> = field.iter().map(|f| 2.0 * f).collect();
    let sim = assemble(
        cfg,
        pos,
        Columns {
            names: vec!["x".into()],
            values: vec![x],
            coefficients: vec![cfg.beta],
        },
        c,
        eps,
        format!(
            "{side}x{side} unit-square lattice; f = cos(2 pi r/{side}) with r the distance to the centre; x = f + nu; c = 2f; y = {}x + {}c + eps",
            cfg.beta, cfg.alpha
        ),
        true,
    );
    with_squares(sim, &cells)
}

fn channel_confounded<R: Rng>(cfg: &DGPConfig, rows: usize, rng: &mut R) -> SimulatedDataset {
    let cols = cfg.n / rows;
    let n = rows * cols;
    let row_effect = normals(rng, rows, 2.0);
    let nu = normals(rng, n, 1.0);
    let w1 = normals(rng, n, 1.0);
    let w2 = normals(rng, n, 1.0);
    let eps = normals(rng, n, cfg.sigma);
    let (pos, cells) = lattice(rows, cols);
    let c: Vec<f64> = cells
        .iter()
        .map(|&(col, row)| row_effect[row] + 0.1 * (15.0 * col as f64).to_radians().cos())
        .collect();
    let x: Vec<f64> = c.iter().zip(&nu).map(|(c, v)| c + v).collect();
    let sim = assemble(
        cfg,
        pos,
        Columns {
            names: vec!["x".into(), "c_proxy".into(), "w1".into(), "w2".into()],
            values: vec![x, c.clone(), w1, w2],
            coefficients: vec![cfg.beta, 0.0, 0.5, -0.5],
        },
        c,
        eps,
        format!(
            "{rows}x{cols} lattice; c = row effect N(0,4) + 0.1 cos(15 col deg); x = c + nu; c_proxy = c; y = {}x + {}c + 0.5 w1 - 0.5 w2 + eps",
            cfg.beta, cfg.alpha
        ),
        true,
    );
    with_squares(sim, &cells)
}

/// Sinusoid draw with `β = α = 1`, `σ = 1`.
pub fn simulate_sinusoid(n: usize, lambda: f64, phi: f64, seed: u64) -> Result<SimulatedDataset> {
    DGPConfig::new(DgpKind::Sinusoid { lambda, phi }, n, seed).draw(0)
}

pub fn simulate_common_cause(n: usize, scenario: Scenario, seed: u64) -> Result<SimulatedDataset> {
    DGPConfig::new(DgpKind::CommonCause { scenario }, n, seed).draw(0)
}

pub fn simulate_spillover(n: usize, beta: f64, gamma: f64, seed: u64) -> Result<SimulatedDataset> {
    let mut cfg = DGPConfig::new(DgpKind::Spillover { gamma }, n, seed);
    cfg.beta = beta;
    cfg.draw(0)
}

/// `side x side` lattice of unit squares with an isotropic confounder.
pub fn simulate_isotropic_grid(side: usize, seed: u64) -> Result<SimulatedDataset> {
    DGPConfig::new(DgpKind::IsotropicGrid, side * side, seed).draw(0)
}

/// Names, estimates and standard errors of one fit.
type FitDraw = (Vec<String>, Vec<f64>, Option<Vec<f64>>);

/// One estimator run inside a Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub label: String,
    pub kind: EstimatorKind,
    /// Regressors to keep; all columns when `None`.
    pub columns: Option<Vec<String>>,
    /// Standard errors to record alongside the coefficients.
    pub se: Option<SeMethod>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorSpec {
            label: kind.to_string(),
            kind,
            columns: None,
            se: None,
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn columns(mut self, columns: &[&str]) -> Self {
        self.columns = Some(columns.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_se(mut self, se: SeMethod) -> Self {
        self.se = Some(se);
        self
    }

    fn run(&self, sim: &SimulatedDataset, path: &OrderedPath) -> Result<FitDraw> {
        let ds = match &self.columns {
            Some(c) => sim.dataset.select_columns(c)?,
            None => sim.dataset.clone(),
        };
        let se = self.se.clone().unwrap_or(SeMethod::Ols);
        let f = fit(&ds, path, self.kind, &se)?;
        let ses = self
            .se
            .as_ref()
            .and_then(|_| f.std_errors())
            .map(|s| s.iter().copied().collect());
        Ok((f.names.clone(), f.coefficients.iter().copied().collect(), ses))
    }
}

/// Draws from one estimator across replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorDraws {
    pub spec: EstimatorSpec,
    pub names: Vec<String>,
    /// Replication index and coefficient vector of each successful rep.
    pub draws: Vec<(usize, Vec<f64>)>,
    /// Standard errors per successful rep, when requested.
    pub std_errors: Vec<Vec<f64>>,
    pub failures: Vec<(usize, String)>,
    pub summaries: Vec<CoefficientSummary>,
}

impl EstimatorDraws {
    pub fn summary(&self, coefficient: &str) -> Option<&CoefficientSummary> {
        self.summaries.iter().find(|s| s.name == coefficient)
    }

    pub fn column(&self, coefficient: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == coefficient)?;
        Some(self.draws.iter().map(|(_, d)| d[j]).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    /// Empirical 2.5% and 97.5% quantiles (linear interpolation).
    pub q025: f64,
    pub q975: f64,
    pub bias: Option<f64>,
    /// Monte Carlo standard error of the mean.
    pub mc_se: f64,
    pub n: usize,
}

impl CoefficientSummary {
    pub fn from_draws(name: &str, values: &[f64], truth: Option<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        CoefficientSummary {
            name: name.to_string(),
            truth,
            mean,
            variance,
            sd: variance.sqrt(),
            q025: quantile(&sorted, 0.025),
            q975: quantile(&sorted, 0.975),
            bias: truth.map(|t| mean - t),
            mc_se: (variance / n as f64).sqrt(),
            n,
        }
    }
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: DGPConfig,
    pub reps: usize,
    pub description: String,
    pub estimators: Vec<EstimatorDraws>,
}

impl MonteCarloReport {
    pub fn estimator(&self, label: &str) -> Option<&EstimatorDraws> {
        self.estimators.iter().find(|e| e.spec.label == label)
    }

    /// `Var(a) / Var(b)` for one coefficient of two estimators.
    pub fn variance_ratio(&self, a: &str, b: &str, coefficient: &str) -> Option<f64> {
        let va = self.estimator(a)?.summary(coefficient)?.variance;
        let vb = self.estimator(b)?.summary(coefficient)?.variance;
        Some(va / vb)
    }

    pub fn failure_count(&self) -> usize {
        self.estimators.iter().map(|e| e.failures.len()).sum()
    }

    /// Long-form `rep,estimator,coefficient,value` table.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rep", "estimator", "coefficient", "value"])?;
        for e in &self.estimators {
            for (rep, d) in &e.draws {
                for (name, v) in e.names.iter().zip(d) {
                    w.write_record([rep.to_string(), e.spec.label.clone(), name.clone(), fmt_f64(*v)])?;
                }
            }
        }
        w.flush().map_err(|err| Error::io("<csv writer>", err))?;
        Ok(())
    }
}

type RepOutcome = Vec<std::result::Result<(Vec<String>, Vec<f64>, Option<Vec<f64>>), String>>;

/// Runs `reps` replications of `config`, fitting every estimator on each
/// draw along the draw's default path.
pub fn monte_carlo(config: &DGPConfig, estimators: &[EstimatorSpec], reps: usize) -> Result<MonteCarloReport> {
    if reps < 2 {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least 2 replications, got {reps}"
        )));
    }
    config.validate()?;
    let description = config.draw(0)?.description;
    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let drawn = config
                .draw(rep as u64)
                .and_then(|sim| sim.default_path().map(|p| (sim, p)));
            match drawn {
                Ok((sim, path)) => estimators
                    .iter()
                    .map(|e| e.run(&sim, &path).map_err(|err| err.to_string()))
                    .collect(),
                Err(err) => vec![Err(err.to_string()); estimators.len()],
            }
        })
        .collect();

    let truth_sim = config.draw(0)?;
    let mut out = Vec::with_capacity(estimators.len());
    for (k, spec) in estimators.iter().enumerate() {
        let mut names = Vec::new();
        let mut draws = Vec::new();
        let mut std_errors = Vec::new();
        let mut failures = Vec::new();
        for (rep, o) in outcomes.iter().enumerate() {
            match &o[k] {
                Ok((n, b, se)) => {
                    if names.is_empty() {
                        names = n.clone();
                    }
                    draws.push((rep, b.clone()));
                    if let Some(se) = se {
                        std_errors.push(se.clone());
                    }
                }
                Err(e) => failures.push((rep, e.clone())),
            }
        }
        let summaries = names
            .iter()
            .enumerate()
            .filter(|_| !draws.is_empty())
            .map(|(j, name)| {
                let values: Vec<f64> = draws.iter().map(|(_, d)| d[j]).collect();
                CoefficientSummary::from_draws(name, &values, truth_sim.truth(name))
            })
            .collect();
        out.push(EstimatorDraws {
            spec: spec.clone(),
            names,
            draws,
            std_errors,
            failures,
            summaries,
        });
    }
    Ok(MonteCarloReport {
        config: config.clone(),
        reps,
        description,
        estimators: out,
    })
}

/// One point of a wavelength sweep of the sinusoid process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub levels: CoefficientSummary,
    pub sfd: CoefficientSummary,
}

/// Levels and SFD slope summaries of the sinusoid process across
/// wavelengths. Each wavelength reuses the same master seed.
pub fn lambda_sweep(n: usize, phi: f64, lambdas: &[f64], reps: usize, seed: u64) -> Result<Vec<LambdaPoint>> {
    let estimators = [
        EstimatorSpec::new(EstimatorKind::Levels),
        EstimatorSpec::new(EstimatorKind::Sfd),
    ];
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = DGPConfig::new(DgpKind::Sinusoid { lambda, phi }, n, seed);
            let r = monte_carlo(&cfg, &estimators, reps)?;
            let get = |label: &str| {
                r.estimator(label)
                    .and_then(|e| e.summary("x"))
                    .cloned()
                    .ok_or_else(|| Error::EmptyDesign(format!("no successful {label} fits at lambda = {lambda}")))
            };
            Ok(LambdaPoint {
                lambda,
                levels: get("levels")?,
                sfd: get("sfd")?,
            })
        })
        .collect()
}

/// Per-coefficient summaries keyed by estimator label then coefficient.
pub fn summary_table(report: &MonteCarloReport) -> BTreeMap<String, BTreeMap<String, CoefficientSummary>> {
    report
        .estimators
        .iter()
        .map(|e| {
            (
                e.spec.label.clone(),
                e.summaries.iter().map(|s| (s.name.clone(), s.clone())).collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_identity_holds() {
        let kinds = [
            DgpKind::Sinusoid {
                lambda: 360.0,
                phi: 0.5,
            },
            DgpKind::CommonCause { scenario: Scenario::A },
            DgpKind::CommonCause { scenario: Scenario::B },
            DgpKind::CommonCause { scenario: Scenario::C },
            DgpKind::Spillover { gamma: 0.6 },
            DgpKind::Iid,
            DgpKind::SmoothTrend,
            DgpKind::IsotropicGrid,
            DgpKind::ChannelConfounded { rows: 10 },
        ];
        for kind in kinds {
            let sim = DGPConfig::new(kind.clone(), 400, 3).draw(0).unwrap();
            assert!(sim.construction_error() < 1e-12, "{kind:?}");
            sim.default_path().unwrap();
        }
    }

    #[test]
    fn sinusoid_without_noise_is_resonant() {
        let sim = simulate_sinusoid(720, 360.0, 0.0, 1).unwrap();
        let x = sim.dataset.column("x").unwrap();
        assert!((x - sim.confounder.column(0)).amax() < 1e-15);
        assert!((sim.dataset.column("x").unwrap()[89] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn draws_are_deterministic() {
        let a = simulate_sinusoid(50, 360.0, 0.5, 9).unwrap();
        let b = simulate_sinusoid(50, 360.0, 0.5, 9).unwrap();
        assert_eq!(a.dataset.outcome(), b.dataset.outcome());
        let c = simulate_sinusoid(50, 360.0, 0.5, 10).unwrap();
        assert_ne!(a.dataset.outcome(), c.dataset.outcome());
    }

    #[test]
    fn spillover_lag_column_is_shifted() {
        let sim = simulate_spillover(20, 1.0, 0.6, 4).unwrap();
        let x = sim.dataset.column("x").unwrap();
        let lag = sim.dataset.column("x_lag1").unwrap();
        for i in 1..20 {
            assert_eq!(lag[i], x[i - 1]);
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.025), 2.5);
        assert_eq!(quantile(&v, 0.5), 50.0);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_counts_reps() {
        let cfg = DGPConfig::new(DgpKind::Iid, 100, 5);
        let est = [EstimatorSpec::new(EstimatorKind::Sfd).with_se(SeMethod::Hc)];
        let a = monte_carlo(&cfg, &est, 20).unwrap();
        let b = monte_carlo(&cfg, &est, 20).unwrap();
        assert_eq!(a.estimators[0].draws, b.estimators[0].draws);
        assert_eq!(a.estimators[0].draws.len(), 20);
        assert_eq!(a.estimators[0].std_errors.len(), 20);
        let s = a.estimators[0].summary("x").unwrap();
        assert_eq!(s.truth, Some(1.0));
        assert!(s.q025 <= s.mean && s.mean <= s.q975);
    }

    #[test]
    fn failures_are_recorded() {
        let cfg = DGPConfig::new(DgpKind::Spillover { gamma: 0.5 }, 50, 1);
        let est = [EstimatorSpec::new(EstimatorKind::Sfd).columns(&["x", "missing"])];
        let r = monte_carlo(&cfg, &est, 3).unwrap();
        assert_eq!(r.failure_count(), 3);
        assert!(r.estimators[0].summaries.is_empty());
    }
}
