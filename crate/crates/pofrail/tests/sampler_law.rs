//! Distributional checks on the multivariate exponential frailty sampler.

use pofrail::frailty::{frailty_corr_matrix, gaussian_factor, sample_frailties, CorrelationModel};
use pofrail::oracle::{ks_pvalue, ks_statistic};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn draw_matrix(model: &CorrelationModel<f64>, n: usize, draws: usize, seed: u64) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = (0..n).collect();
    let r = frailty_corr_matrix(model, &idx).unwrap();
    let factor = gaussian_factor(&r).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(draws); n];
    for _ in 0..draws {
        let w = sample_frailties(&factor, &mut rng);
        for d in 0..n {
            cols[d].push(w.w[d]);
        }
    }
    cols
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    num / (va.sqrt() * vb.sqrt())
}

#[test]
fn marginals_pass_a_ks_test_against_exp1() {
    let model = CorrelationModel::exchangeable(0.6).unwrap();
    let cols = draw_matrix(&model, 3, 100_000, 42);
    let exp_cdf = |x: f64| 1.0 - (-x).exp();
    for (d, col) in cols.into_iter().enumerate() {
        let mut samples = col;
        let stat = ks_statistic(&mut samples, exp_cdf);
        let p = ks_pvalue(stat, 100_000);
        assert!(p > 0.01, "coordinate {d}: KS statistic {stat}, p = {p}");
    }
}

#[test]
fn sample_mean_matches_unit_exponential() {
    let model = CorrelationModel::exchangeable(0.0).unwrap();
    let cols = draw_matrix(&model, 2, 1_000_000, 7);
    for col in &cols {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((mean - 1.0).abs() <= 0.005, "mean {mean}");
    }
    // independent coordinates stay uncorrelated
    let c = correlation(&cols[0], &cols[1]);
    assert!(c.abs() <= 0.01, "correlation {c}");
}

#[test]
fn exchangeable_frailty_correlation_hits_rho() {
    let model = CorrelationModel::exchangeable(0.5).unwrap();
    let cols = draw_matrix(&model, 2, 1_000_000, 99);
    let c = correlation(&cols[0], &cols[1]);
    assert!((c - 0.5).abs() <= 0.01, "correlation {c}");
}

#[test]
fn correlations_track_the_target_across_structure_grids() {
    // 3 MC standard errors with se ≈ (1 - ρ²)/√draws
    let draws = 200_000;
    for &rho in &[0.0, 0.25, 0.5, 0.75, 0.9] {
        let tol = 3.0 * (1.0 - rho * rho) / (draws as f64).sqrt() + 0.002;
        let exch = CorrelationModel::exchangeable(rho).unwrap();
        let cols = draw_matrix(&exch, 3, draws, 1000 + (rho * 100.0) as u64);
        for a in 0..3 {
            for b in 0..a {
                let c = correlation(&cols[a], &cols[b]);
                assert!(
                    (c - rho).abs() <= tol,
                    "exchangeable rho={rho} pair ({a},{b}): {c}"
                );
            }
        }

        let ar1 = CorrelationModel::ar1(rho).unwrap();
        let cols = draw_matrix(&ar1, 3, draws, 2000 + (rho * 100.0) as u64);
        for a in 0..3 {
            for b in 0..a {
                let target = rho.powi((a - b) as i32);
                let tol_ab = 3.0 * (1.0 - target * target) / (draws as f64).sqrt() + 0.002;
                let c = correlation(&cols[a], &cols[b]);
                assert!(
                    (c - target).abs() <= tol_ab,
                    "ar1 rho={rho} pair ({a},{b}): {c} vs {target}"
                );
            }
        }
    }
}
