mod common;

use common::vinogradov_count;
use num_complex::Complex64;
use smallcap_core::expsum::{CurveSpec, ExpSumSpec, Scaling};
use smallcap_core::moments::{
    compute, cube_moment, exact_torus_moment, exact_torus_moment_with, fit_growth_exponent, AxisRange, CubeMethod,
    ExactOptions, Method, MomentQuery, Route, SlabDomain,
};
use smallcap_core::oracle::{dense_quadrature_moment, nyquist_nodes};
use smallcap_core::Error;

fn query(spec: ExpSumSpec, p: f64, domain: SlabDomain, method: Method) -> MomentQuery {
    MomentQuery { spec, p, domain, normalized: false, method }
}

#[test]
fn parseval_on_the_torus() {
    for n in [2, 3] {
        for big_n in [4usize, 7, 16, 33, 64] {
            let spec = ExpSumSpec::moment_curve(n, big_n).unwrap().with_random_phases(big_n as u64);
            let m = exact_torus_moment(&query(spec, 2.0, SlabDomain::torus(n), Method::ExactFFT)).unwrap();
            assert!((m.moment / big_n as f64 - 1.0).abs() < 1e-9, "n={n} N={big_n}: {}", m.moment);
        }
    }
}

#[test]
fn fourth_moment_of_parabola_counts_quadruples() {
    for big_n in [4i64, 6, 9, 12] {
        let brute = vinogradov_count(big_n, 2) as f64;
        let spec = ExpSumSpec::parabola(big_n as usize).unwrap();
        let m = exact_torus_moment(&query(spec, 4.0, SlabDomain::torus(2), Method::ExactFFT)).unwrap();
        assert!((m.moment / brute - 1.0).abs() < 1e-9);
        assert_eq!(brute, (2 * big_n * big_n - big_n) as f64);
    }
    for big_n in [16usize, 32] {
        let spec = ExpSumSpec::parabola(big_n).unwrap();
        let m = exact_torus_moment(&query(spec, 4.0, SlabDomain::torus(2), Method::ExactFFT)).unwrap();
        let want = (2 * big_n * big_n - big_n) as f64;
        assert!((m.moment / want - 1.0).abs() < 1e-6);
    }
}

#[test]
fn routes_agree_on_random_configs() {
    for seed in 0..4u64 {
        let spec = ExpSumSpec::moment_curve(3, 6 + seed as usize).unwrap().with_random_phases(seed);
        let q = query(spec, 6.0, SlabDomain::torus(3), Method::ExactFFT);
        let strip = exact_torus_moment_with(&q, &ExactOptions { route: Route::StripFft, ..Default::default() }).unwrap();
        let spectral = exact_torus_moment_with(&q, &ExactOptions { route: Route::Spectral, ..Default::default() }).unwrap();
        assert!((strip.moment / spectral.moment - 1.0).abs() < 1e-9);
    }
}

#[test]
fn exact_matches_dense_quadrature_on_the_torus() {
    for seed in 0..10u64 {
        let big_n = 3 + (seed as usize % 6);
        let p = if seed % 2 == 0 { 4.0 } else { 6.0 };
        let spec = ExpSumSpec::parabola(big_n).unwrap().with_random_phases(100 + seed);
        let dom = SlabDomain::torus(2);
        let nodes: Vec<usize> = nyquist_nodes(&spec, p, &dom).iter().map(|q| 4 * q).collect();
        let oracle = dense_quadrature_moment(&spec, p, &dom, &nodes, false).unwrap();
        let exact = exact_torus_moment(&query(spec, p, dom, Method::ExactFFT)).unwrap();
        assert!((exact.moment / oracle - 1.0).abs() < 1e-6, "seed {seed}: {} vs {oracle}", exact.moment);
    }
}

#[test]
fn quadrature_oracle_matches_quadruple_count() {
    let spec = ExpSumSpec::parabola(8).unwrap();
    let dom = SlabDomain::torus(2);
    let nodes: Vec<usize> = nyquist_nodes(&spec, 4.0, &dom).iter().map(|q| 4 * q).collect();
    let v = dense_quadrature_moment(&spec, 4.0, &dom, &nodes, false).unwrap();
    assert!((v / 120.0 - 1.0).abs() < 1e-4);
}

#[test]
fn truncated_slab_matches_dense_quadrature() {
    let spec = ExpSumSpec::moment_curve(3, 4).unwrap().with_random_phases(2);
    let dom = SlabDomain::last_axis_truncated(3, 0.3, 1.0 / 4.0);
    let exact = exact_torus_moment(&query(spec.clone(), 4.0, dom.clone(), Method::ExactFFT)).unwrap();
    // periodic axes are exact at twice Nyquist; the truncated axis needs a fine midpoint grid
    let nyq = nyquist_nodes(&spec, 4.0, &dom);
    let nodes = [2 * nyq[0], 2 * nyq[1], 32 * nyq[2]];
    let oracle = dense_quadrature_moment(&spec, 4.0, &dom, &nodes, false).unwrap();
    assert!((exact.moment / oracle - 1.0).abs() < 1e-5, "{} vs {oracle}", exact.moment);
}

#[test]
fn truncated_axis_quadrature_is_converged() {
    let spec = ExpSumSpec::moment_curve(3, 8).unwrap().with_random_phases(5);
    let dom = SlabDomain::last_axis_truncated(3, 0.617, 1.0 / 8.0);
    let q = query(spec, 6.0, dom, Method::ExactFFT);
    let base = exact_torus_moment(&q).unwrap();
    let panels = 2 * (1usize << 6);
    let finer = exact_torus_moment_with(&q, &ExactOptions { initial_panels: Some(panels), ..Default::default() }).unwrap();
    assert!((base.moment / finer.moment - 1.0).abs() < 1e-8);
}

#[test]
fn unimodular_rescaling_leaves_the_moment_unchanged() {
    let spec = ExpSumSpec::moment_curve(3, 10).unwrap().with_random_phases(9);
    let c = Complex64::from_polar(1.0, 0.7);
    let rotated = spec.with_coefficients(spec.coefficients().iter().map(|a| a * c).collect()).unwrap();
    let a = exact_torus_moment(&query(spec, 8.0, SlabDomain::torus(3), Method::ExactFFT)).unwrap();
    let b = exact_torus_moment(&query(rotated, 8.0, SlabDomain::torus(3), Method::ExactFFT)).unwrap();
    assert!((a.moment / b.moment - 1.0).abs() < 1e-12);
}

#[test]
fn norms_increase_with_p() {
    for seed in 0..10u64 {
        let spec = ExpSumSpec::moment_curve(2, 5 + seed as usize).unwrap().with_random_phases(seed);
        let norms: Vec<f64> = [2.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&p| {
                let mut q = query(spec.clone(), p, SlabDomain::torus(2), Method::ExactFFT);
                q.normalized = true;
                exact_torus_moment(&q).unwrap().norm
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)), "{norms:?}");
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let spec = ExpSumSpec::parabola(32).unwrap();
    let exact = exact_torus_moment(&query(spec.clone(), 6.0, SlabDomain::torus(2), Method::ExactFFT)).unwrap();
    let mc = compute(&query(spec, 6.0, SlabDomain::torus(2), Method::MonteCarlo { samples: 1_000_000, seed: 4 })).unwrap();
    let sigma = mc.moment_error / 2.575829303548901;
    assert!((mc.moment - exact.moment).abs() <= 3.0 * sigma, "{} vs {} (sigma {sigma})", mc.moment, exact.moment);
}

#[test]
fn monte_carlo_basics() {
    let one = ExpSumSpec::moment_curve(3, 1).unwrap();
    let dom = SlabDomain::last_axis_truncated(3, 0.2, 0.5);
    let mut q = query(one, 7.3, dom, Method::MonteCarlo { samples: 1000, seed: 1 });
    q.normalized = true;
    let m = compute(&q).unwrap();
    assert!((m.norm - 1.0).abs() < 1e-12 && m.norm_error < 1e-12);

    let spec = ExpSumSpec::moment_curve(3, 16).unwrap();
    let mut q = query(spec, 2.0, SlabDomain::torus(3), Method::MonteCarlo { samples: 100_000, seed: 2 });
    q.normalized = true;
    let m = compute(&q).unwrap();
    assert!((m.norm - 4.0).abs() <= 3.0 * m.norm_error / 2.575829303548901, "{} +- {}", m.norm, m.norm_error);

    q.method = Method::MonteCarlo { samples: 99, seed: 2 };
    assert!(matches!(compute(&q), Err(Error::TooFewSamples(99))));
}

#[test]
fn integer_sided_cube_matches_the_torus() {
    // a translated integer cube of a lattice sum averages like the torus
    let spec = ExpSumSpec::new(
        CurveSpec::Parabola2D,
        6,
        1.0,
        vec![Complex64::new(1.0, 0.0); 6],
        Scaling::NormalizedFrequencies { r: 1.0 },
    )
    .unwrap();
    let mut q = query(spec.clone(), 4.0, SlabDomain::torus(2), Method::ExactFFT);
    q.normalized = true;
    let exact = exact_torus_moment(&q).unwrap();
    let cube = cube_moment(&spec, &[3.0, -5.0], 2.0, 4.0, CubeMethod::Tensor { nodes_per_axis: 256 }).unwrap();
    assert!((cube.moment / exact.moment - 1.0).abs() < 1e-9);
}

#[test]
fn small_cap_cube_averages() {
    let single = ExpSumSpec::new(
        CurveSpec::Parabola2D,
        1,
        1.0,
        vec![Complex64::new(1.0, 0.0)],
        Scaling::NormalizedFrequencies { r: 16.0 },
    )
    .unwrap();
    let m = cube_moment(&single, &[0.0, 0.0], 16.0, 4.0, CubeMethod::MonteCarlo { samples: 1000, seed: 1 }).unwrap();
    assert!((m.norm - 1.0).abs() < 1e-12);

    let four = ExpSumSpec::new(
        CurveSpec::Parabola2D,
        4,
        1.0,
        vec![Complex64::new(1.0, 0.0); 4],
        Scaling::NormalizedFrequencies { r: 4.0 },
    )
    .unwrap();
    let m = cube_moment(&four, &[0.0, 0.0], 4.0, 2.0, CubeMethod::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
    assert!((m.norm - 2.0).abs() <= 3.0 * m.norm_error / 2.575829303548901 + 0.05, "{} +- {}", m.norm, m.norm_error);

    let r: f64 = 256.0;
    let alpha = 0.75;
    let n = r.powf(alpha) as usize;
    let spec = ExpSumSpec::new(
        CurveSpec::Parabola2D,
        n,
        alpha,
        vec![Complex64::new(1.0, 0.0); n],
        Scaling::NormalizedFrequencies { r },
    )
    .unwrap()
    .with_random_phases(17);
    let p = 2.0 + 2.0 / alpha;
    let m = cube_moment(&spec, &[0.0, 0.0], r, p, CubeMethod::MonteCarlo { samples: 100_000, seed: 5 }).unwrap();
    assert!(m.norm <= 4.0 * r.powf(alpha / 2.0), "{}", m.norm);
}

#[test]
fn oversized_grid_is_refused_with_a_size_report() {
    let spec = ExpSumSpec::moment_curve(3, 64).unwrap();
    let q = query(spec, 4.0, SlabDomain::torus(3), Method::ExactFFT);
    let opts = ExactOptions { memory_cap_bytes: 1 << 10, route: Route::StripFft, ..Default::default() };
    match exact_torus_moment_with(&q, &opts) {
        Err(Error::GridTooLarge { points, bytes, cap_bytes }) => {
            assert!(points > 0 && bytes > cap_bytes as u128);
        }
        other => panic!("expected a size refusal, got {other:?}"),
    }
}

#[test]
fn odd_exponents_are_refused_in_exact_mode() {
    let spec = ExpSumSpec::parabola(4).unwrap();
    assert!(matches!(
        exact_torus_moment(&query(spec, 5.0, SlabDomain::torus(2), Method::ExactFFT)),
        Err(Error::OddExponent(_))
    ));
}

#[test]
fn slab_domains_validate() {
    let bad = SlabDomain { axes: vec![AxisRange::Truncated { start: 0.0, length: 1.5 }, AxisRange::FullPeriod] };
    assert!(bad.validate().is_err());
}

#[test]
fn fit_examples() {
    let f = fit_growth_exponent(&[(8.0, 64.0), (16.0, 256.0), (32.0, 1024.0)]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    let f = fit_growth_exponent(&[(8.0, 8.0), (16.0, 16.0), (32.0, 32.0), (64.0, 64.0)]).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12);
    let scan: Vec<(f64, f64)> = [8usize, 16, 32, 64]
        .iter()
        .map(|&n| {
            let spec = ExpSumSpec::moment_curve(3, n).unwrap();
            (n as f64, exact_torus_moment(&query(spec, 2.0, SlabDomain::torus(3), Method::ExactFFT)).unwrap().moment)
        })
        .collect();
    assert!((fit_growth_exponent(&scan).unwrap().slope - 1.0).abs() < 1e-9);
    assert!(matches!(fit_growth_exponent(&[(1.0, 1.0), (2.0, 0.0), (4.0, 1.0)]), Err(Error::NonPositiveMoment { .. })));
}
