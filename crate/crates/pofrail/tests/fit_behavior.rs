//! End-to-end behavior of the hybrid fitter: ascent, reductions to known
//! estimators, invariances, determinism.

use ndarray::Array1;
use pofrail::em::{fit, mstep_beta, EStepWeights, FitConfig};
use pofrail::frailty::CorrelationModel;
use pofrail::model::{dataset_composite_loglik, ModelParams};
use pofrail::oracle::{fd_maximize, OracleConfig};
use pofrail::simulate::{generate_dataset, ScenarioConfig, SimCorrKind};
use pofrail::{BaselineFunction, Dataset};

fn sim(m: usize, rho: f64, seed: u64) -> Dataset<f64> {
    let cfg = ScenarioConfig::<f64> {
        m_clusters: m,
        rho_true: rho,
        ..Default::default()
    };
    generate_dataset(&cfg, seed).unwrap()
}

#[test]
fn loglik_trace_is_nondecreasing_across_random_fits() {
    for seed in 0..12u64 {
        let rho = 0.1 + 0.08 * (seed % 10) as f64;
        let ds = sim(40, rho, 1000 + seed);
        let fitted = fit(&ds, &FitConfig::default()).unwrap();
        for w in fitted.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-10,
                "seed {seed}: trace decreased by {}",
                w[0] - w[1]
            );
        }
    }
}

#[test]
fn independence_fit_matches_a_direct_numeric_maximizer() {
    // ρ fixed at 0: the EM fixed point must maximize the independent-data
    // composite objective, checked against BFGS over (β, log ΔΛ)
    let cfg = ScenarioConfig::<f64> {
        m_clusters: 10,
        cluster_size_range: (3, 3),
        rho_true: 0.0,
        ..Default::default()
    };
    let ds = generate_dataset(&cfg, 2024).unwrap();
    assert_eq!(ds.n_observations(), 30);

    let fit_cfg = FitConfig {
        correlation: CorrelationModel::Exchangeable { rho: 0.0 },
        fix_rho: true,
        ..FitConfig::default()
    };
    let fitted = fit(&ds, &fit_cfg).unwrap();
    assert!(fitted.converged);

    let times = ds.distinct_failure_times();
    let nq = times.len();
    let objective = |theta: &Array1<f64>| -> f64 {
        let beta = Array1::from_vec(theta.iter().take(2).copied().collect());
        let sizes: Vec<f64> = theta.iter().skip(2).map(|&l| l.exp()).collect();
        let params = ModelParams::new(
            beta,
            CorrelationModel::Exchangeable { rho: 0.0 },
        )
        .unwrap();
        let b = BaselineFunction::new(times.clone(), sizes).unwrap();
        dataset_composite_loglik(&ds, &params, &b).unwrap()
    };
    let mut start = vec![0.0, 0.0];
    start.extend(std::iter::repeat((0.1f64).ln()).take(nq));
    let cfg_oracle = OracleConfig {
        fd_step: 1e-7,
        ..OracleConfig::default()
    };
    let direct = fd_maximize(objective, &Array1::from_vec(start), &cfg_oracle, 4000).unwrap();

    for i in 0..2 {
        assert!(
            (direct[i] - fitted.beta[i]).abs() <= 1e-4,
            "beta[{i}]: direct {} vs EM {}",
            direct[i],
            fitted.beta[i]
        );
    }
    for q in 0..nq {
        let em_size = fitted.baseline.jump_sizes()[q];
        assert!(
            (direct[2 + q].exp() - em_size).abs() <= 1e-4,
            "jump {q}: direct {} vs EM {em_size}",
            direct[2 + q].exp()
        );
    }
}

#[test]
fn unit_weights_reduce_the_mstep_to_the_cox_partial_mle() {
    // with all E-step weights at 1, the M-step solves the ordinary partial
    // score; compare against a BFGS maximizer of an independently coded
    // partial log-likelihood on 20 observations
    let cfg = ScenarioConfig::<f64> {
        m_clusters: 10,
        cluster_size_range: (2, 2),
        rho_true: 0.0,
        ..Default::default()
    };
    let ds = generate_dataset(&cfg, 99).unwrap();
    assert_eq!(ds.n_observations(), 20);
    let weights = EStepWeights {
        w_hat: vec![1.0; ds.n_observations()],
    };
    let (beta_hat, boundary) = mstep_beta(
        &ds,
        &weights,
        &Array1::zeros(2),
        &FitConfig::default(),
    )
    .unwrap();
    assert!(!boundary);

    // independent, naive O(n²) partial log-likelihood
    let flat: Vec<(f64, bool, [f64; 2])> = ds
        .clusters
        .iter()
        .flat_map(|c| c.members.iter())
        .map(|o| (o.time, o.event, [o.covariates[0], o.covariates[1]]))
        .collect();
    let pl = |beta: &Array1<f64>| -> f64 {
        let mut out = 0.0;
        for &(ti, di, zi) in &flat {
            if !di {
                continue;
            }
            let mut denom = 0.0;
            for &(tk, _, zk) in &flat {
                if tk >= ti {
                    denom += (zk[0] * beta[0] + zk[1] * beta[1]).exp();
                }
            }
            out += zi[0] * beta[0] + zi[1] * beta[1] - denom.ln();
        }
        out
    };
    let cfg_oracle = OracleConfig {
        fd_step: 1e-7,
        ..OracleConfig::default()
    };
    let direct = fd_maximize(pl, &Array1::zeros(2), &cfg_oracle, 500).unwrap();
    for i in 0..2 {
        assert!(
            (direct[i] - beta_hat[i]).abs() <= 1e-5,
            "beta[{i}]: {} vs {}",
            direct[i],
            beta_hat[i]
        );
    }
}

#[test]
fn rho_estimates_concentrate_near_zero_under_independence() {
    // data generated at ρ0 = 0: the average estimate stays within 0.05 of
    // the (boundary) truth
    let mut sum = 0.0;
    let mut n = 0;
    for rep in 0..40u64 {
        let ds = sim(60, 0.0, 5000 + rep);
        let fitted = fit(&ds, &FitConfig::default()).unwrap();
        if !fitted.converged {
            continue;
        }
        sum += fitted.rho[0];
        n += 1;
    }
    assert!(n >= 35);
    let mean = sum / n as f64;
    assert!(mean.abs() <= 0.05, "mean rho-hat {mean} across {n} fits");
}

#[test]
fn cluster_order_does_not_change_the_estimates() {
    // the objective is a cluster mean, so the optimum is order-invariant;
    // numerically the two runs agree to the solver stopping tolerance
    let ds = sim(30, 0.5, 808);
    let fitted = fit(&ds, &FitConfig::default()).unwrap();

    let mut reordered = ds.clusters.clone();
    reordered.reverse();
    let ds2 = Dataset::new(reordered, Some(ds.tau)).unwrap();
    let fitted2 = fit(&ds2, &FitConfig::default()).unwrap();

    for i in 0..2 {
        assert!((fitted.beta[i] - fitted2.beta[i]).abs() < 1e-5);
    }
    assert!((fitted.rho[0] - fitted2.rho[0]).abs() < 1e-5);
    for (a, b) in fitted
        .baseline
        .jump_sizes()
        .iter()
        .zip(fitted2.baseline.jump_sizes().iter())
    {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn refits_are_bit_identical() {
    let ds = sim(25, 0.4, 31415);
    let f1 = fit(&ds, &FitConfig::default()).unwrap();
    let f2 = fit(&ds, &FitConfig::default()).unwrap();
    assert_eq!(f1.beta, f2.beta);
    assert_eq!(f1.rho, f2.rho);
    assert_eq!(f1.loglik.to_bits(), f2.loglik.to_bits());
    assert_eq!(f1.baseline.jump_sizes(), f2.baseline.jump_sizes());
    assert_eq!(f1.loglik_trace.len(), f2.loglik_trace.len());
}

#[test]
fn ar1_fit_recovers_its_own_generator() {
    // average over a few replicates; a single AR(1) dataset carries limited
    // correlation information
    let mut rho_sum = 0.0;
    let mut b = [0.0f64; 2];
    let reps = 4;
    for seed in 0..reps {
        let cfg = ScenarioConfig::<f64> {
            m_clusters: 150,
            rho_true: 0.6,
            corr_kind: SimCorrKind::Ar1,
            ..Default::default()
        };
        let ds = generate_dataset(&cfg, 606 + seed).unwrap();
        let fit_cfg = FitConfig {
            correlation: CorrelationModel::Ar1 { rho: 0.1 },
            ..FitConfig::default()
        };
        let fitted = fit(&ds, &fit_cfg).unwrap();
        assert!(fitted.converged);
        rho_sum += fitted.rho[0];
        b[0] += fitted.beta[0];
        b[1] += fitted.beta[1];
    }
    let n = reps as f64;
    assert!((rho_sum / n - 0.6).abs() < 0.15, "mean rho {}", rho_sum / n);
    assert!((b[0] / n - 1.2).abs() < 0.2);
    assert!((b[1] / n - 2.5).abs() < 0.3);
}

#[test]
fn fixed_correlation_structure_fits_without_free_parameters() {
    // a fixed matrix has no correlation parameter: the fit skips the
    // correlation step and the sandwich covers beta only
    let ds = sim(40, 0.5, 2112);
    let matrix = {
        let mut m = ndarray::Array2::<f64>::eye(7);
        for a in 0..7 {
            for b in 0..7 {
                if a != b {
                    m[(a, b)] = 0.5;
                }
            }
        }
        m
    };
    let fit_cfg = FitConfig {
        correlation: CorrelationModel::fixed(matrix).unwrap(),
        ..FitConfig::default()
    };
    let fitted = fit(&ds, &fit_cfg).unwrap();
    assert!(fitted.converged);
    assert!(fitted.rho.is_empty());
    assert!((fitted.beta[0] - 1.2).abs() < 0.4);
    let est = pofrail::variance::sandwich(&ds, &fitted).unwrap();
    assert_eq!(est.se.len(), 2);
    assert!(est.se.iter().all(|s| s.is_finite() && *s > 0.0));
}
