use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallcap_core::geometry::*;
use smallcap_core::oracle::{mc_volume, naive_rich_cubes};

const CENTER: Vec3 = Vec3([0.5, 0.5, 0.5]);

fn plate(lo: f64, delta: f64) -> OrientedBox {
    vinogradov_plate(Interval::new(lo, delta).unwrap(), CENTER).unwrap()
}

#[test]
fn crossing_plates_match_the_sampled_volume() {
    let delta = 1.0 / 64.0;
    for (k, &(a, b)) in [(0.0, 0.125), (0.25, 0.5), (0.1, 0.9), (0.5, 0.5 + 4.0 * delta)].iter().enumerate() {
        let (s1, s2) = (plate(a, delta), plate(b, delta));
        let exact = plate_intersection_volume(&s1, &s2).unwrap();
        let mc = mc_volume(&s1, &s2, 2_000_000, 11 + k as u64).unwrap();
        assert!(!mc.below_resolution);
        assert!(
            (exact.volume - mc.volume).abs() <= mc.ci * 1.5 + 1e-12,
            "pair {k}: exact {} sampled {} +- {}",
            exact.volume,
            mc.volume,
            mc.ci
        );
    }
}

#[test]
fn centered_plate_pairs_follow_the_thin_slab_law() {
    let delta = 1.0 / 64.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 50 {
        let a = rng.gen_range(0.0..1.0 - delta);
        let b = rng.gen_range(0.0..1.0 - delta);
        let (s1, s2) = (plate(a, delta), plate(b, delta));
        let r = plate_intersection_volume(&s1, &s2).unwrap();
        if r.angle < 4.0 * delta {
            continue;
        }
        let ratio = r.volume / r.predicted;
        assert!((0.25..=4.0).contains(&ratio), "a={a} b={b} angle={} ratio={ratio}", r.angle);
        checked += 1;
    }
}

#[test]
fn documented_crossing_example() {
    let delta = 1.0 / 64.0;
    // pick the second interval so the normals are 1/8 apart
    let s1 = plate(0.0, delta);
    let mut b = 0.0;
    while plate_angle(&s1, &plate(b, delta)) < 0.125 {
        b += 1e-4;
    }
    let r = plate_intersection_volume(&s1, &plate(b, delta)).unwrap();
    let target = delta * delta / 0.125;
    assert!(r.volume <= 4.0 * target && r.volume >= target / 4.0, "{}", r.volume);
}

#[test]
fn shrunken_plank_sits_in_its_plate() {
    let delta = 1.0 / 256.0;
    let j = Interval::new(0.5 - 1.0 / 32.0, 1.0 / 16.0).unwrap();
    let i = Interval::new(0.5 - delta / 2.0, delta).unwrap();
    assert!(plank_in_plate_check(j, i, 0.05).unwrap());
    assert!(!plank_in_plate_check(j, i, 10.0).unwrap());
    let own = Interval::new(0.25, delta).unwrap();
    assert!(plank_in_plate_check(own, own, 0.01).unwrap());
}

#[test]
fn enclosing_box_covers_sampled_planks() {
    let r: f64 = 4096.0;
    let sigma = r.powf(-1.0 / 9.0);
    let enc = enclosing_box(Interval::new(0.0, sigma).unwrap(), r).unwrap();
    let inflated = enc.bounding.scaled(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let plank = &enc.planks[rng.gen_range(0..enc.planks.len())];
        let corners = plank.corners();
        let c = corners[rng.gen_range(0..corners.len())];
        assert!(inflated.contains(&c, 1e-9));
    }
    let h = enc.bounding.half;
    assert!(((h[0] / h[2]) / (sigma * sigma) - 1.0).abs() < 1e-9);
    assert!(((h[1] / h[2]) / sigma - 1.0).abs() < 1e-9);
}

#[test]
fn hashed_rich_cubes_equal_the_naive_pass() {
    for seed in 0..4 {
        let f = generate_vinogradov_family(1.0 / 16.0, 0.5, [2, 2, 2], [1, 1, 1], seed).unwrap();
        let fams = [f.group(0), f.group(1), f.group(2)];
        let refs: Vec<&BoxFamily> = fams.iter().collect();
        let grid = CubeGrid::unit(1.0 / 16.0, false).unwrap();
        assert_eq!(count_rich_cubes(&refs, &grid).unwrap(), naive_rich_cubes(&refs, &grid).unwrap());
    }
    for seed in 0..4 {
        let t1 = generate_random_tubes(1.0 / 32.0, 12, 2, 0.0, 0.4, seed).unwrap();
        let t2 = generate_random_tubes(1.0 / 32.0, 12, 2, 1.2, 1.9, seed + 100).unwrap();
        let grid = CubeGrid::unit(1.0 / 32.0, true).unwrap();
        let refs = [&t1, &t2];
        assert_eq!(count_rich_cubes(&refs, &grid).unwrap(), naive_rich_cubes(&refs, &grid).unwrap());
    }
}

#[test]
fn single_box_rich_count() {
    let side = 1.0 / 16.0;
    let b = OrientedBox::axis_aligned(CENTER, 0.25, false);
    let fam = BoxFamily::unstructured(vec![b], side);
    let h = count_rich_cubes(&[&fam], &CubeGrid::unit(side, false).unwrap()).unwrap();
    let inside = (b.measure() / side.powi(3)).floor() as u64;
    // inflated cubes also catch one layer around the box
    let surface = 10u64.pow(3) - inside;
    let rich = h.at_least(&[1]);
    assert!(rich >= inside && rich <= inside + surface, "{rich}");
}

#[test]
fn raster_and_pairwise_overlap_agree() {
    for seed in 0..5 {
        let f = generate_random_tubes(1.0 / 64.0, 40, 2, 0.0, std::f64::consts::PI, seed).unwrap();
        let exact = kakeya_l2_overlap(&f).unwrap().value;
        let raster = rasterized_l2_overlap(&f, 1.0 / 512.0).unwrap();
        assert!((raster / exact - 1.0).abs() < 0.1, "seed {seed}: {exact} vs {raster}");
    }
}

#[test]
fn linear_kakeya_on_separated_tubes() {
    let delta = 1.0 / 64.0;
    let f = generate_random_tubes(delta, 64, 1, 0.0, std::f64::consts::PI, 9).unwrap();
    let r = kakeya_l2_overlap(&f).unwrap();
    assert!(r.value <= 16.0 * (1.0 / delta).ln() * r.total_measure);
}

#[test]
fn audits_pass_on_generated_families() {
    for seed in 0..20 {
        let f = generate_vinogradov_family(1.0 / 32.0, 0.5, [3, 2, 4], [2, 1, 3], seed).unwrap();
        let report = audit_structure(&f);
        assert!(report.pass, "seed {seed}: {:?}", report.failures);
    }
    let f = generate_structured_tubes(1.0 / 32.0, 0.75, 2, 4, TubeOptions::default()).unwrap();
    assert!(f.len() as f64 <= max_tube_family_size(&f).unwrap() + 1e-9);
    let report = audit_structure(&f);
    assert!(report.pass);
    assert_eq!(report.max_per_fat, 2);
}

#[test]
fn family_json_round_trip() {
    let f = generate_vinogradov_family(1.0 / 16.0, 0.5, [1, 1, 1], [1, 1, 1], 2).unwrap();
    let back: BoxFamily = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
    assert_eq!(f, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersections_are_symmetric_and_bounded(a in 0.0f64..0.98, b in 0.0f64..0.98, e in 1usize..6) {
        let delta = 1.0 / (8.0 * e as f64);
        let (a, b) = (a.min(1.0 - delta), b.min(1.0 - delta));
        let (s1, s2) = (plate(a, delta), plate(b, delta));
        let x = plate_intersection_volume(&s1, &s2).unwrap().volume;
        let y = plate_intersection_volume(&s2, &s1).unwrap().volume;
        prop_assert!((x - y).abs() <= 1e-12);
        prop_assert!(x <= s1.measure().min(s2.measure()) * (1.0 + 1e-12));
        prop_assert!(x >= 0.0);
    }
}
