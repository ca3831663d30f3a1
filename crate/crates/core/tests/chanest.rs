use cwcu_core::chanest::*;
use cwcu_core::linalg::{identity, max_abs_diff, rel_dev};
use cwcu_core::montecarlo::{conditional_bias_regression, run_trials, PriorSpec, TrialConfig};
use cwcu_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn paper_bundle() -> ChanestModelBundle {
    assemble_model(&ChanestSetup::default()).unwrap()
}

fn random_signs(seed: u64) -> ChanestSetup {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut setup = ChanestSetup::default();
    setup.preamble_signs = (0..setup.used.len())
        .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    setup
}

fn curve<'a>(curves: &'a [BmseCurve], label: &str) -> &'a BmseCurve {
    curves.iter().find(|c| c.label == label).unwrap()
}

#[test]
fn dft_matrix_basics() {
    let f2 = build_dft_matrix(2);
    let expected = CMatrix::from_row_slice(
        2,
        2,
        &[c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0)],
    );
    assert!(max_abs_diff(&f2, &expected) < 1e-15);
    let f = build_dft_matrix(64);
    assert!(max_abs_diff(&(f.adjoint() * &f), &identity(64).scale(64.0)) < 1e-9);
    for k in 0..64 {
        assert_eq!(f[(0, k)], c64(1.0, 0.0));
        assert_eq!(f[(k, 0)], c64(1.0, 0.0));
    }
}

#[test]
fn dft_matrix_matches_fft() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let x = cwcu_core::random::random_cvector(&mut r, 64);
    let mut buf: Vec<Complex64> = x.iter().copied().collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(64)
        .process(&mut buf);
    let via_matrix = build_dft_matrix(64) * &x;
    for (a, b) in via_matrix.iter().zip(&buf) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn carrier_selection() {
    let setup = ChanestSetup::default();
    let b = build_carrier_selection(&setup);
    let bt = b.transpose();
    let unit = |k: usize| {
        let mut v = CVector::zeros(64);
        v[k] = c64(1.0, 0.0);
        v
    };
    assert!((&bt * unit(0)).iter().all(|z| z.norm() == 0.0));
    let first = &bt * unit(1);
    assert_eq!(first[0], c64(1.0, 0.0));
    assert!(first.iter().skip(1).all(|z| z.norm() == 0.0));
    assert_eq!(&bt * &b, identity(52));
    let mask = &b * &bt;
    let ones = (0..64).filter(|&k| mask[(k, k)] == c64(1.0, 0.0)).count();
    assert_eq!(ones, 52);
    assert_eq!(mask.iter().filter(|z| z.norm() != 0.0).count(), 52);
    assert!(setup
        .used
        .iter()
        .all(|&k| k != 0 && !(27..=37).contains(&k)));
}

#[test]
fn power_delay_profile() {
    let prior = build_pdp(&ChanestSetup::default());
    assert_eq!(prior.variances.len(), 16);
    assert!((prior.variances[0] - 0.393469).abs() < 1e-6);
    for w in prior.variances.windows(2) {
        assert!((w[0] / w[1] - 0.5f64.exp()).abs() < 1e-12);
    }
    assert!((prior.total_power() - 0.999665).abs() < 1e-6);
    assert!((prior.total_power() - (1.0 - (-8.0f64).exp())).abs() < 1e-12);
}

#[test]
fn assembled_model_shape() {
    let bundle = paper_bundle();
    let h = bundle.model.h();
    assert_eq!(h.shape(), (52, 16));
    for j in 0..16 {
        assert!((h.column(j).norm_squared() - 52.0).abs() < 1e-9);
    }
    assert!(
        max_abs_diff(
            &(bundle.m1.adjoint() * &bundle.m1),
            &identity(16).scale(64.0)
        ) < 1e-9
    );
    assert_eq!(bundle.preamble.adjoint() * &bundle.preamble, identity(52));
    assert!(max_abs_diff(bundle.model.cnn(), &identity(52).scale(0.32)) < 1e-15);

    let signed = assemble_model(&random_signs(3)).unwrap();
    let g1 = h.adjoint() * h;
    let g2 = signed.model.h().adjoint() * signed.model.h();
    assert!(max_abs_diff(&g1, &g2) < 1e-9);
}

#[test]
fn invalid_setups_are_rejected() {
    let mut s = ChanestSetup::default();
    s.channel_len = 65;
    assert!(matches!(
        assemble_model(&s),
        Err(CwcuError::InvalidSetup(_))
    ));
    let mut s = ChanestSetup::default();
    s.preamble_signs[3] = 0.5;
    assert!(assemble_model(&s).is_err());
    assert!(assemble_model(&ChanestSetup::default().with_noise_var(0.0)).is_err());
}

/// Time-domain preamble via inverse FFT, circular convolution with h,
/// then the receiver's averaging.
#[test]
fn averaged_preambles_follow_the_model() {
    let setup = random_signs(4);
    let bundle = assemble_model(&setup).unwrap();
    let n = 64;
    let mut spectrum = vec![c64(0.0, 0.0); n];
    for (k, &bin) in setup.used.iter().enumerate() {
        spectrum[bin] = c64(setup.preamble_signs[k], 0.0);
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(n)
        .process(&mut spectrum);
    let preamble: Vec<Complex64> = spectrum.iter().map(|z| z / n as f64).collect();

    let mut r = ChaCha8Rng::seed_from_u64(5);
    let h = cwcu_core::random::random_cvector(&mut r, 16);
    let received = CVector::from_fn(n, |t, _| {
        (0..16).map(|l| h[l] * preamble[(t + n - l) % n]).sum()
    });

    let ybar = average_received_preambles(&received, &received, &bundle).unwrap();
    let expected = bundle.model.h() * &h;
    assert!((&ybar - &expected).iter().all(|z| z.norm() < 1e-9));

    let single = (&bundle.selection.transpose() * (&bundle.dft * &received)).unscale(1.0);
    assert!((&ybar - single).iter().all(|z| z.norm() < 1e-9));

    let cancelled = average_received_preambles(&received, &(-&received), &bundle).unwrap();
    assert!(cancelled.iter().all(|z| z.norm() < 1e-12));

    assert!(average_received_preambles(&CVector::zeros(63), &received, &bundle).is_err());
}

#[test]
fn time_domain_closed_forms_match_general_constructions() {
    for setup in [ChanestSetup::default(), random_signs(6)] {
        let bundle = assemble_model(&setup).unwrap();
        let est = time_domain_estimators(&bundle).unwrap();
        let model = &bundle.model;
        assert!(rel_dev(est.blue.matrix(), blue_b1(model).unwrap().matrix()) <= 1e-8);
        let moments = model.induced_moments().unwrap();
        assert!(
            rel_dev(
                est.lmmse.matrix(),
                lmmse_from_moments(&moments).unwrap().matrix()
            ) <= 1e-8
        );
        let (general, d) = cwcu_linear_independent(model).unwrap();
        assert!(rel_dev(est.cwcu.matrix(), general.matrix()) <= 1e-8);
        for (a, b) in est.gain.values().iter().zip(d.values()) {
            assert!((a - b).abs() / b <= 1e-8);
        }
        let bh = est.blue.matrix() * model.h();
        assert!(max_abs_diff(&bh, &identity(16)) <= 1e-9);
        let ch = est.cwcu.matrix() * model.h();
        assert!((0..16).all(|i| (ch[(i, i)] - 1.0).norm() <= 1e-9));
    }
}

#[test]
fn frequency_blue_is_subspace_blue() {
    let bundle = paper_bundle();
    let est = frequency_domain_estimators(&bundle).unwrap();
    let freq_model = bundle.frequency_model().unwrap();
    let sub = SubspaceConstraint::new(bundle.m1.clone()).unwrap();
    let b2 = blue_b2(&freq_model, &sub).unwrap();
    assert!(rel_dev(est.blue.matrix(), b2.matrix()) <= 1e-8);
}

#[test]
fn frequency_cwcu_is_not_transformed_time_cwcu() {
    let bundle = paper_bundle();
    let freq = frequency_domain_estimators(&bundle).unwrap();
    let time = time_domain_estimators(&bundle).unwrap();
    let transformed = &bundle.m1 * time.cwcu.matrix();
    assert!(max_abs_diff(freq.cwcu.matrix(), &transformed) > 1e-3);
    assert_eq!(freq.cwcu.n(), 64);
    assert_eq!(freq.gain.len(), 64);
    assert!(freq.gain.values().iter().all(|v| *v > 0.0 && v.is_finite()));
}

#[test]
fn trivial_estimator_is_unbiased_on_used_bins() {
    let bundle = assemble_model(&random_signs(7)).unwrap();
    let est = frequency_domain_estimators(&bundle).unwrap();
    assert_eq!(est.trivial.n(), 52);
    assert_eq!(est.trivial.matrix() * &bundle.preamble, identity(52));
    let curves = analytic_bmse_curves(&bundle, Domain::Frequency).unwrap();
    let trivial = curve(&curves, LABEL_TRIVIAL);
    assert_eq!(trivial.axis, bundle.setup.used);
    assert!(trivial.bmse.iter().all(|b| (b - 0.32).abs() < 1e-12));
}

#[test]
fn blue_frequency_peak() {
    let curves = analytic_bmse_curves(&paper_bundle(), Domain::Frequency).unwrap();
    let (index, value) = curve(&curves, LABEL_BLUE).argmax();
    assert_eq!(index, 32);
    assert!((value - 36.0).abs() <= 3.6, "peak {value}");
}

#[test]
fn bmse_ordering_at_every_index() {
    let bundle = paper_bundle();
    for domain in [Domain::Time, Domain::Frequency] {
        let curves = analytic_bmse_curves(&bundle, domain).unwrap();
        let (b, l, c) = (
            curve(&curves, LABEL_BLUE),
            curve(&curves, LABEL_LMMSE),
            curve(&curves, LABEL_CWCU),
        );
        for k in 0..b.bmse.len() {
            assert!(l.bmse[k] <= c.bmse[k] + 1e-9, "{domain:?} {k}");
            assert!(c.bmse[k] <= b.bmse[k] + 1e-9, "{domain:?} {k}");
        }
    }
}

#[test]
fn curves_do_not_depend_on_preamble_signs() {
    let base = paper_bundle();
    let signed = assemble_model(&random_signs(8)).unwrap();
    for domain in [Domain::Time, Domain::Frequency] {
        let a = analytic_bmse_curves(&base, domain).unwrap();
        let b = analytic_bmse_curves(&signed, domain).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            for (u, v) in x.bmse.iter().zip(&y.bmse) {
                assert!(
                    (u - v).abs() <= 1e-10 * u.abs().max(1.0),
                    "{} {u} {v}",
                    x.label
                );
            }
        }
    }
}

#[test]
fn lower_noise_lowers_every_curve() {
    let base = paper_bundle();
    let quiet = assemble_model(&ChanestSetup::default().with_noise_var(1e-4)).unwrap();
    for domain in [Domain::Time, Domain::Frequency] {
        let a = analytic_bmse_curves(&base, domain).unwrap();
        let b = analytic_bmse_curves(&quiet, domain).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(
                x.bmse.iter().zip(&y.bmse).all(|(u, v)| v < u),
                "{}",
                x.label
            );
        }
    }
}

#[test]
fn csv_layouts() {
    let bundle = paper_bundle();
    let mut fig2 = Vec::new();
    write_time_csv(
        &analytic_bmse_curves(&bundle, Domain::Time).unwrap(),
        &mut fig2,
    )
    .unwrap();
    let fig2 = String::from_utf8(fig2).unwrap();
    let lines: Vec<&str> = fig2.lines().collect();
    assert_eq!(lines[0], "tap_index,bmse_blue,bmse_lmmse,bmse_cwcu");
    assert_eq!(lines.len(), 17);

    let mut fig3 = Vec::new();
    write_frequency_csv(
        &analytic_bmse_curves(&bundle, Domain::Frequency).unwrap(),
        &mut fig3,
    )
    .unwrap();
    let fig3 = String::from_utf8(fig3).unwrap();
    let lines: Vec<&str> = fig3.lines().collect();
    assert_eq!(
        lines[0],
        "subcarrier,bmse_blue,bmse_lmmse,bmse_cwcu,bmse_trivial"
    );
    assert_eq!(lines.len(), 65);
    assert!(lines[1].starts_with("0,") && lines[1].ends_with(','));
    assert!(lines[2].ends_with("3.20000000e-1"));
    assert!(lines[33].starts_with("32,3.6"));
}

#[test]
fn frequency_cwcu_is_conditionally_unbiased_at_every_bin() {
    let bundle = paper_bundle();
    let model = bundle.frequency_model().unwrap();
    let est = frequency_domain_estimators(&bundle).unwrap();
    let prior = PriorSpec::Gaussian {
        mean: CVector::zeros(64),
        cov: model.cxx().clone(),
    };
    let cfg = TrialConfig {
        n_trials: 100_000,
        seed: 9,
        n_workers: 4,
        ..TrialConfig::default()
    };
    let out = run_trials(&model, &prior, &[est.cwcu], &cfg).unwrap();
    let report = conditional_bias_regression(&out[0].pairs).unwrap();
    for (k, c) in report.components.iter().enumerate() {
        assert!(c.slope_z(c64(1.0, 0.0)) <= 3.0, "bin {k}");
        assert!(c.intercept_z(c64(0.0, 0.0)) <= 3.0, "bin {k}");
    }
}
