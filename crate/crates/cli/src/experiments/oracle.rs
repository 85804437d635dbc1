//! Cross-checks of every fast routine against its slow, independent oracle
//! on randomly drawn small instances.

use super::{derive_seed, Check, Outcome};
use crate::config::{ensure, Invalid};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallcap_core::energy::{additive_energy, DEFAULT_TOLERANCE};
use smallcap_core::expsum::{cone_points, ExpSumSpec};
use smallcap_core::geometry::{generate_random_tubes, generate_vinogradov_family, BoxFamily, CubeGrid};
use smallcap_core::geometry::count_rich_cubes;
use smallcap_core::moments::{compute, Method, MomentQuery, SlabDomain};
use smallcap_core::numeric::Z99;
use smallcap_core::oracle::{dense_quadrature_moment, naive_energy, naive_rich_cubes, nyquist_nodes};
use smallcap_core::records::Table;
use smallcap_core::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Random moment configurations: Monte Carlo against exact.
    pub moment_configs: usize,
    pub mc_samples: usize,
    /// Allowed distance in standard errors.
    pub sigmas: f64,
    /// Random configurations: dense quadrature against exact.
    pub quadrature_configs: usize,
    pub quadrature_tolerance: f64,
    /// Random tube and plate families: hashed against naive rich counts.
    pub rich_instances: usize,
    /// Random cone subsets: quantized against brute-force energy.
    pub energy_sets: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            moment_configs: 20,
            mc_samples: 200_000,
            sigmas: 3.0,
            quadrature_configs: 5,
            quadrature_tolerance: 1e-9,
            rich_instances: 6,
            energy_sets: 20,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        ensure(self.mc_samples >= 1000, "mc_samples", || "at least 1000 samples".into())?;
        ensure(self.sigmas > 0.0, "sigmas", || "must be positive".into())?;
        ensure(self.quadrature_tolerance > 0.0, "quadrature_tolerance", || "must be positive".into())?;
        ensure(self.quadrature_configs <= 100, "quadrature_configs", || "at most 100".into())?;
        ensure(
            self.moment_configs + self.quadrature_configs + self.rich_instances + self.energy_sets > 0,
            "moment_configs",
            || "nothing to check".into(),
        )
    }
}

const QUADRATURE_NODE_BUDGET: f64 = 2e7;

/// A small random moment problem: dimension 2 or 3, `N <= 12`, random
/// phases, even `p <= 2 max_p`, torus or (if `slabs`) a truncated slab.
fn random_query(rng: &mut ChaCha8Rng, max_p: u32, slabs: bool) -> Result<(ExpSumSpec, f64, SlabDomain)> {
    let dim = rng.gen_range(2..=3);
    let n = rng.gen_range(2..=12);
    let p = 2.0 * rng.gen_range(1..=max_p) as f64;
    let spec = ExpSumSpec::moment_curve(dim, n)?.with_random_phases(rng.gen());
    let domain = if !slabs || rng.gen_bool(0.5) {
        SlabDomain::torus(dim)
    } else {
        let len = 1.0 / n as f64;
        SlabDomain::last_axis_truncated(dim, rng.gen_range(0.0..1.0 - len), len)
    };
    Ok((spec, p, domain))
}

pub fn run(params: &OracleParams, seed: u64) -> Result<Outcome> {
    // kind: 0 moment (MC), 1 moment (quadrature), 2 rich cubes, 3 energy
    let mut out = Outcome::new(Table::new(["kind", "instance", "primary", "oracle", "deviation"]));
    let base = derive_seed(seed, 0);
    out.seeds.push(base);
    let mut rng = ChaCha8Rng::seed_from_u64(base);

    let mut worst_sigma: f64 = 0.0;
    for k in 0..params.moment_configs {
        let (spec, p, domain) = random_query(&mut rng, 2, true)?;
        let mc_seed = derive_seed(seed, 1 + k as u64);
        out.seeds.push(mc_seed);
        let exact = compute(&MomentQuery { spec: spec.clone(), p, domain: domain.clone(), normalized: true, method: Method::ExactFFT })?;
        let mc = compute(&MomentQuery {
            spec,
            p,
            domain,
            normalized: true,
            method: Method::MonteCarlo { samples: params.mc_samples, seed: mc_seed },
        })?;
        let sigma = (mc.moment_error / Z99).max(1e-300);
        let dev = (mc.moment - exact.moment).abs() / sigma;
        out.table.push(vec![0.0, k as f64, mc.moment, exact.moment, dev]);
        worst_sigma = worst_sigma.max(dev);
    }
    if params.moment_configs > 0 {
        out.summary.insert("max_mc_sigmas".into(), worst_sigma);
        out.checks.push(Check::at_most("Monte Carlo vs exact, in standard errors", worst_sigma, params.sigmas));
    }

    let mut worst_quad: f64 = 0.0;
    // midpoint sums are exact only over full periods, so these stay on the torus
    for k in 0..params.quadrature_configs {
        // redraw until the tensor grid is small enough to sweep quickly
        let (spec, p, domain, nodes) = loop {
            let (spec, p, domain) = random_query(&mut rng, 2, false)?;
            let nodes: Vec<usize> = nyquist_nodes(&spec, p, &domain).iter().map(|&q| 2 * q + 2).collect();
            if nodes.iter().map(|&m| m as f64).product::<f64>() <= QUADRATURE_NODE_BUDGET {
                break (spec, p, domain, nodes);
            }
        };
        let quad = dense_quadrature_moment(&spec, p, &domain, &nodes, true)?;
        let exact = compute(&MomentQuery { spec, p, domain, normalized: true, method: Method::ExactFFT })?;
        let gap = (quad - exact.moment).abs() / exact.moment.abs().max(1e-300);
        out.table.push(vec![1.0, k as f64, exact.moment, quad, gap]);
        worst_quad = worst_quad.max(gap);
    }
    if params.quadrature_configs > 0 {
        out.summary.insert("max_quadrature_gap".into(), worst_quad);
        out.checks.push(Check::at_most("exact vs dense quadrature, relative", worst_quad, params.quadrature_tolerance));
    }

    let mut rich_mismatch = 0usize;
    for k in 0..params.rich_instances {
        let s = derive_seed(seed, 10_000 + k as u64);
        out.seeds.push(s);
        let (families, grid): (Vec<BoxFamily>, CubeGrid) = if k % 2 == 0 {
            let delta = 1.0 / 32.0;
            let m = 1 + k % 3;
            (
                vec![
                    generate_random_tubes(delta, 12, m, 0.0, 0.4, s)?,
                    generate_random_tubes(delta, 12, m, 1.2, 1.9, s ^ 1)?,
                ],
                CubeGrid::unit(delta, true)?,
            )
        } else {
            let f = generate_vinogradov_family(1.0 / 16.0, 0.5, [2, 2, 2], [1 + k % 2, 1, 2], s)?;
            ((0..3).map(|g| f.group(g)).collect(), CubeGrid::unit(1.0 / 16.0, false)?)
        };
        let refs: Vec<&BoxFamily> = families.iter().collect();
        let fast = count_rich_cubes(&refs, &grid)?;
        let slow = naive_rich_cubes(&refs, &grid)?;
        let rich = |h: &smallcap_core::geometry::RichCubeHistogram| h.counts.values().sum::<u64>() as f64;
        let same = fast == slow;
        out.table.push(vec![2.0, k as f64, rich(&fast), rich(&slow), if same { 0.0 } else { 1.0 }]);
        rich_mismatch += !same as usize;
    }
    if params.rich_instances > 0 {
        out.checks.push(Check::at_most("rich-cube histograms differing from the naive pass", rich_mismatch as f64, 0.0));
    }

    let pool: Vec<Vec<f64>> = cone_points(0.125)?.into_iter().map(|p| p.0.to_vec()).collect();
    let mut energy_mismatch = 0usize;
    for k in 0..params.energy_sets {
        let size = rng.gen_range(1..=40);
        let subset: Vec<Vec<f64>> = pool.choose_multiple(&mut rng, size).cloned().collect();
        let fast = additive_energy(&subset, DEFAULT_TOLERANCE)?.count;
        let slow = naive_energy(&subset, DEFAULT_TOLERANCE)?;
        out.table.push(vec![3.0, k as f64, fast as f64, slow as f64, (fast != slow) as u8 as f64]);
        energy_mismatch += (fast != slow) as usize;
    }
    if params.energy_sets > 0 {
        out.checks.push(Check::at_most("energy counts differing from brute force", energy_mismatch as f64, 0.0));
    }
    Ok(out)
}
