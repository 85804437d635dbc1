use super::{MethodTag, MomentEstimate, Region};
use crate::expsum::SumTerms;
use crate::numeric::{abs_pow, RunningStats, Z99};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples drawn from one RNG stream. Block `b` always uses stream `b` of
/// the seeded generator, so the sample set is independent of the pool size.
pub const BLOCK_SAMPLES: usize = 4096;

pub fn mc_moment_terms(
    terms: &SumTerms,
    p: f64,
    region: &Region,
    normalized: bool,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if samples < 100 {
        return Err(Error::TooFewSamples(samples));
    }
    if region.lo.len() != terms.dim() || region.len.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidSpec("sampling region does not match the sum".into()));
    }
    let dim = terms.dim();
    let blocks = samples.div_ceil(BLOCK_SAMPLES);
    let stats: Vec<RunningStats> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BLOCK_SAMPLES.min(samples - b * BLOCK_SAMPLES);
            let mut x = vec![0.0; dim];
            let mut st = RunningStats::default();
            for _ in 0..count {
                for i in 0..dim {
                    x[i] = region.lo[i] + region.len[i] * rng.gen::<f64>();
                }
                st.push(abs_pow(terms.eval(&x), p));
            }
            st
        })
        .collect();
    let total = stats.iter().fold(RunningStats::default(), |acc, s| acc.merge(s));
    let scale = if normalized { 1.0 } else { region.volume() };
    let mean = total.mean * scale;
    let half_width = Z99 * (total.variance() / total.count as f64).sqrt() * scale;
    Ok(MomentEstimate::from_moment(mean, half_width, p, MethodTag::MonteCarlo, total.count))
}
