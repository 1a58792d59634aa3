//! Monte Carlo checks against closed-form or analytic oracles.

use sfd::estimation::{fit, robinson_fit, EstimatorKind};
use sfd::inference::{covariance, SeMethod};
use sfd::ordering::{order_1d, Axis};
use sfd::simulation::{lambda_sweep, monte_carlo, simulate_sinusoid, DGPConfig, DgpKind, EstimatorSpec, Scenario};

const SEED: u64 = 7;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn newey_west_close_to_hc_when_residuals_are_white() {
    let cfg = DGPConfig::new(DgpKind::Iid, 500, SEED);
    let ratios: Vec<f64> = (0..200)
        .map(|rep| {
            let sim = cfg.draw(rep).unwrap();
            let f = fit(
                &sim.dataset,
                &sim.default_path().unwrap(),
                EstimatorKind::Levels,
                &SeMethod::Ols,
            )
            .unwrap();
            let nw = f.covariance(&SeMethod::NeweyWest { lag: 2 }).unwrap().matrix;
            let hc = f.covariance(&SeMethod::Hc).unwrap().matrix;
            nw[(1, 1)] / hc[(1, 1)]
        })
        .collect();
    let r = mean(&ratios);
    assert!((0.85..=1.15).contains(&r), "mean NW/HC variance ratio {r}");
}

#[test]
fn iid_bootstrap_tracks_analytic_ols_se() {
    let sim = DGPConfig::new(DgpKind::Iid, 400, SEED).draw(0).unwrap();
    let f = fit(
        &sim.dataset,
        &sim.default_path().unwrap(),
        EstimatorKind::Levels,
        &SeMethod::Ols,
    )
    .unwrap();
    let (x, y) = f.design();
    let boot = covariance(
        x,
        y,
        &f.residuals,
        f.layout(),
        &SeMethod::Bootstrap { reps: 2000, seed: 11 },
    )
    .unwrap()
    .matrix;
    let ols = f.vcov.as_ref().unwrap();
    let ratio = (boot[(1, 1)] / ols[(1, 1)]).sqrt();
    assert!((0.9..=1.1).contains(&ratio), "bootstrap/OLS SE ratio {ratio}");
}

#[test]
fn noiseless_sinusoids_over_whole_periods() {
    let same = simulate_sinusoid(720, 360.0, 0.0, SEED).unwrap();
    let x = same.dataset.column("x").unwrap();
    let c = same.confounder.column(0);
    assert!((corr(x.as_slice(), c.as_slice()) - 1.0).abs() < 1e-12);

    let half = simulate_sinusoid(720, 180.0, 0.0, SEED).unwrap();
    let x = half.dataset.column("x").unwrap();
    let c = half.confounder.column(0);
    let r = corr(x.as_slice(), c.as_slice());
    assert!(r.abs() < 1e-9, "corr(sin i, sin 2i) over two periods = {r}");
}

fn common_cause(scenario: Scenario) -> (f64, f64, f64, f64) {
    let cfg = DGPConfig::new(DgpKind::CommonCause { scenario }, 1000, SEED);
    let est = [
        EstimatorSpec::new(EstimatorKind::Levels),
        EstimatorSpec::new(EstimatorKind::Sfd),
    ];
    let r = monte_carlo(&cfg, &est, 200).unwrap();
    let lev = r.estimator("levels").unwrap().summary("x").unwrap();
    let sfd = r.estimator("sfd").unwrap().summary("x").unwrap();
    (lev.bias.unwrap(), lev.mc_se, sfd.bias.unwrap(), sfd.mc_se)
}

#[test]
fn common_cause_linear_regressor_is_identified_by_sfd() {
    let (lev_bias, lev_se, sfd_bias, sfd_se) = common_cause(Scenario::A);
    assert!(sfd_bias.abs() < 3.0 * sfd_se, "sfd bias {sfd_bias} vs MC SE {sfd_se}");
    assert!(lev_bias > 3.0 * lev_se, "levels bias {lev_bias} vs MC SE {lev_se}");
}

#[test]
fn common_cause_mirrored_curvature_biases_sfd() {
    let (_, _, sfd_bias, sfd_se) = common_cause(Scenario::C);
    assert!(sfd_bias > 3.0 * sfd_se, "sfd bias {sfd_bias} vs MC SE {sfd_se}");
}

#[test]
fn spillover_without_lag_effect_is_harmless() {
    let cfg = DGPConfig::new(DgpKind::Spillover { gamma: 0.0 }, 2000, SEED);
    let est = [EstimatorSpec::new(EstimatorKind::Sfd).columns(&["x"])];
    let r = monte_carlo(&cfg, &est, 200).unwrap();
    let s = r.estimator("sfd").unwrap().summary("x").unwrap();
    assert!(s.bias.unwrap().abs() < 3.0 * s.mc_se, "{s:?}");
}

#[test]
fn robinson_recovers_slope_under_smooth_trend() {
    let cfg = DGPConfig::new(DgpKind::SmoothTrend, 500, SEED);
    let slopes: Vec<f64> = (0..200)
        .map(|rep| {
            let sim = cfg.draw(rep).unwrap();
            let path = order_1d(&sim.dataset, Axis::X);
            robinson_fit(&sim.dataset, &path, 2, &SeMethod::Ols)
                .unwrap()
                .coefficients[1]
        })
        .collect();
    let m = mean(&slopes);
    let sd = (slopes.iter().map(|b| (b - m).powi(2)).sum::<f64>() / 199.0).sqrt();
    let mc_se = sd / (200f64).sqrt();
    assert!((m - 1.0).abs() < 3.0 * mc_se, "mean {m}, MC SE {mc_se}");
}

#[test]
fn double_differences_are_noisier() {
    let cfg = DGPConfig::new(DgpKind::Iid, 60, SEED);
    let (mut sfd_se, mut sdd_se) = (Vec::new(), Vec::new());
    for rep in 0..100 {
        let sim = cfg.draw(rep).unwrap();
        let path = sim.default_path().unwrap();
        sfd_se.push(
            fit(&sim.dataset, &path, EstimatorKind::Sfd, &SeMethod::Ols)
                .unwrap()
                .se("x")
                .unwrap(),
        );
        sdd_se.push(
            fit(&sim.dataset, &path, EstimatorKind::Sdd, &SeMethod::Ols)
                .unwrap()
                .se("x")
                .unwrap(),
        );
    }
    assert!(
        mean(&sdd_se) > mean(&sfd_se),
        "sdd {} vs sfd {}",
        mean(&sdd_se),
        mean(&sfd_se)
    );
}

#[test]
fn monte_carlo_se_halves_with_four_times_the_reps() {
    let cfg = DGPConfig::new(DgpKind::Iid, 200, SEED);
    let est = [EstimatorSpec::new(EstimatorKind::Sfd)];
    let small = monte_carlo(&cfg, &est, 200).unwrap();
    let large = monte_carlo(&cfg, &est, 800).unwrap();
    let ratio = large.estimator("sfd").unwrap().summary("x").unwrap().mc_se
        / small.estimator("sfd").unwrap().summary("x").unwrap().mc_se;
    assert!((0.4..=0.6).contains(&ratio), "MC SE ratio {ratio}");
}

#[test]
fn lambda_sweep_levels_bias_exceeds_sfd_bias() {
    let points = lambda_sweep(300, 0.5, &[120.0, 360.0], 40, SEED).unwrap();
    assert_eq!(points.len(), 2);
    for p in &points {
        assert!(p.levels.bias.unwrap().abs() > p.sfd.bias.unwrap().abs(), "{p:?}");
    }
}

/// Lattice whose `x` and `ε` are integrated along each row from increments
/// that are AR(1) along the row and share a component across rows, so the
/// differenced data are correlated both within and across channels.
fn correlated_lattice(rows: usize, cols: usize, seed: u64) -> sfd::SpatialDataset {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut field = |rng: &mut rand_chacha::ChaCha20Rng| {
        let ar = |rng: &mut rand_chacha::ChaCha20Rng| {
            let mut prev = 0.0;
            (0..cols)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    prev = 0.7 * prev + z;
                    prev
                })
                .collect::<Vec<f64>>()
        };
        let common = ar(rng);
        (0..rows)
            .map(|_| {
                let own = ar(rng);
                let mut level = 0.0;
                (0..cols)
                    .map(|c| {
                        level += common[c] + own[c];
                        level
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    };
    let x1 = field(&mut rng);
    let x2 = field(&mut rng);
    let eps = field(&mut rng);
    let mut units = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            units.push(sfd::Unit::new(
                format!("r{r:02}c{c:03}"),
                sfd::Point::new(c as f64, r as f64),
                x1[r][c] - x2[r][c] + eps[r][c],
                vec![x1[r][c], x2[r][c]],
            ));
        }
    }
    sfd::SpatialDataset::new("y", vec!["x1".into(), "x2".into()], units).unwrap()
}

#[test]
fn spatially_correlated_differences_order_the_covariances() {
    use sfd::ordering::{order_grid, GridDirection};
    let reps = 100;
    let k = 3;
    let (mut conley, mut nw, mut hc) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for rep in 0..reps {
        let ds = correlated_lattice(10, 60, 1000 + rep);
        let path = order_grid(&ds, GridDirection::WE).unwrap();
        let f = fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::Ols).unwrap();
        let c = f
            .covariance(&SeMethod::Conley {
                cutoff_x: 3.0,
                cutoff_y: 2.0,
            })
            .unwrap()
            .matrix;
        let n = f.covariance(&SeMethod::NeweyWest { lag: 2 }).unwrap().matrix;
        let h = f.covariance(&SeMethod::Hc).unwrap().matrix;
        for j in 0..k {
            conley[j] += c[(j, j)] / reps as f64;
            nw[j] += n[(j, j)] / reps as f64;
            hc[j] += h[(j, j)] / reps as f64;
        }
    }
    let ordered = (0..k).filter(|&j| conley[j] >= nw[j] && nw[j] >= hc[j]).count();
    assert!(3 * ordered >= 2 * k, "conley {conley:?}, nw {nw:?}, hc {hc:?}");
}
