use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallcap_core::energy::*;
use smallcap_core::expsum::cone_points;
use smallcap_core::oracle::naive_energy;

/// Distinct points of a small integer grid, so that coincident sums are common.
fn grid_set(rng: &mut ChaCha8Rng, dim: usize, size: usize, side: i64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < size {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(0..side) as f64).collect();
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

#[test]
fn quantized_count_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..50 {
        let dim = 1 + case % 3;
        let size = rng.gen_range(1..=40);
        let side = [48, 9, 5][dim - 1];
        let pts = grid_set(&mut rng, dim, size, side);
        for tol in [0.0, 1e-9] {
            let fast = additive_energy(&pts, tol).unwrap().count;
            assert_eq!(fast, naive_energy(&pts, tol).unwrap(), "case {case}, tol {tol}");
        }
    }
}

#[test]
fn cone_subsets_match_brute_force() {
    let cone: Vec<Vec<f64>> = cone_points(1.0 / 4.0).unwrap().into_iter().map(|p| p.0.to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let mut sub = cone.clone();
        while sub.len() > 40 {
            sub.swap_remove(rng.gen_range(0..sub.len()));
        }
        let e = additive_energy(&sub, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(e.count, naive_energy(&sub, DEFAULT_TOLERANCE).unwrap());
        assert_eq!(e.near_tolerance, 0);
    }
}

#[test]
fn documented_values() {
    let parabola: Vec<Vec<f64>> = (1..=16).map(|j| vec![j as f64, (j * j) as f64]).collect();
    assert_eq!(additive_energy(&parabola, 0.0).unwrap().count, 496);
    assert_eq!(naive_energy(&parabola, 0.0).unwrap(), 496);
    let ap: Vec<Vec<f64>> = (0..8).map(|j| vec![j as f64]).collect();
    assert_eq!(additive_energy(&ap, 0.0).unwrap().count, 344);
    assert_eq!(additive_energy(&[vec![0.25, -3.0, 1.0]], 0.0).unwrap().count, 1);
}

#[test]
fn cone_scan_stays_near_the_diagonal() {
    let scan = energy_exponent_scan(&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]).unwrap();
    assert!(scan.fit.slope <= 2.3, "{:?}", scan);
    for &(_, n, e) in &scan.rows {
        assert!(e >= 2 * (n as u64).pow(2) - n as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn translation_and_linear_maps_preserve_energy(seed in 0u64..1000, shift in -50i64..50, scale in 1i64..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = grid_set(&mut rng, 2, 30, 7);
        let base = additive_energy(&pts, 0.0).unwrap().count;
        // (x, y) -> (scale x + y + shift, y - shift): invertible, integral, exact in f64
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![scale as f64 * p[0] + p[1] + shift as f64, p[1] - shift as f64])
            .collect();
        prop_assert_eq!(additive_energy(&moved, 0.0).unwrap().count, base);
        let mut reversed = pts.clone();
        reversed.reverse();
        prop_assert_eq!(additive_energy(&reversed, 0.0).unwrap().count, base);
    }
}
