//! Exact even moments.
//!
//! For `p = 2s`, `|S|^{2s}` restricted to the periodic axes is a
//! trigonometric polynomial whose degree along axis `i` is at most `s * w_i`
//! (`w_i` = spread of the integer frequencies on that axis). Sampling on a
//! grid with more than `s * w_i` points per axis therefore integrates it
//! exactly. Two routes are available:
//!
//! * **strip FFT** — loop over grid rows of all periodic axes but one and
//!   take a 1-D inverse FFT along the remaining axis. Memory is one row.
//!   This route also handles one truncated axis, integrated with composite
//!   Gauss–Legendre panels.
//! * **spectral** — when every axis is periodic, `int |S|^{2s} = sum_v
//!   |c_s(v)|^2` where `c_s` is the `s`-fold convolution of the coefficient
//!   map. `c_s` is generated one leading coordinate at a time from two
//!   half-order maps, sorted by packed key and run-summed, which keeps the
//!   working set to a single slice of the spectrum.
//! * **slab closed form** — with one truncated lattice axis, the same
//!   convolution integrates in closed form along that axis (a sinc kernel per
//!   pair of spectrum entries that agree on the periodic axes). Tried first
//!   in automatic mode; quadrature panels are the fallback when the map is
//!   too large.

use super::{MethodTag, MomentEstimate, SlabDomain};
use crate::expsum::SumTerms;
use crate::numeric::{abs_pow, e, gauss_legendre, next_pow2, KahanSum};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Auto,
    StripFft,
    Spectral,
}

#[derive(Debug, Clone)]
pub struct ExactOptions {
    /// Largest single allocation the engine may make, in bytes.
    pub memory_cap_bytes: u64,
    /// Refuse jobs whose estimated flop count exceeds this.
    pub work_cap: f64,
    pub panel_cap: usize,
    pub rel_tol: f64,
    pub gl_order: usize,
    pub route: Route,
    /// Start the panel search here instead of the oscillation estimate.
    pub initial_panels: Option<usize>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            memory_cap_bytes: 8 << 30,
            work_cap: 5.0e12,
            panel_cap: 1 << 14,
            rel_tol: 1e-8,
            gl_order: 16,
            route: Route::Auto,
            initial_panels: None,
        }
    }
}

/// Rows handled per parallel job; fixed so reductions do not depend on the
/// pool size.
const ROW_BLOCK: usize = 64;

/// `int_domain |S|^p` (or its average if `normalized`) for even `p`.
pub fn exact_moment_terms(
    terms: &SumTerms,
    p: f64,
    domain: &SlabDomain,
    normalized: bool,
    opts: &ExactOptions,
) -> Result<MomentEstimate> {
    let half = p / 2.0;
    if !(p >= 2.0 && half.fract() == 0.0 && half <= 64.0) {
        return Err(Error::OddExponent(p));
    }
    let s = half as usize;
    domain.validate()?;
    if domain.dimension() != terms.dim() {
        return Err(Error::InvalidSpec(format!(
            "domain has {} axes, sum lives in dimension {}",
            domain.dimension(),
            terms.dim()
        )));
    }
    let truncated = domain.truncated_axes();
    if truncated.len() > 1 {
        return Err(Error::InvalidSpec(
            "exact mode allows at most one truncated axis".into(),
        ));
    }
    let periodic: Vec<usize> = (0..terms.dim()).filter(|i| !truncated.contains(i)).collect();
    for &axis in &periodic {
        if terms.lattice_axis(axis).is_none() {
            return Err(Error::InvalidSpec(format!(
                "axis {axis} is integrated over a full period but its frequencies are not integers"
            )));
        }
    }

    let mut est = match truncated.first() {
        None => torus_only(terms, s, &periodic, opts)?,
        Some(&t_axis) => {
            let range = domain.axes[t_axis];
            let direct = match opts.route {
                Route::StripFft => None,
                Route::Spectral => Some(slab_spectral(terms, s, t_axis, range.start(), range.length(), opts)?),
                Route::Auto => slab_spectral(terms, s, t_axis, range.start(), range.length(), opts).ok(),
            };
            match direct {
                Some(raw) => raw,
                None => with_truncated_axis(terms, s, &periodic, t_axis, domain, opts)?,
            }
        }
    };
    if normalized {
        let vol = domain.volume();
        est.moment /= vol;
        est.moment_error /= vol;
    }
    Ok(MomentEstimate::from_moment(est.moment, est.moment_error, p, est.method, est.evaluations))
}

struct Raw {
    moment: f64,
    moment_error: f64,
    method: MethodTag,
    evaluations: u64,
}

fn torus_only(terms: &SumTerms, s: usize, periodic: &[usize], opts: &ExactOptions) -> Result<Raw> {
    let grid = StripGrid::new(terms, s, periodic, opts)?;
    let strip_cost = grid.cost();
    let use_spectral = match opts.route {
        Route::StripFft => false,
        Route::Spectral => true,
        Route::Auto => {
            strip_cost > 2.0e8
                && SpectralPlan::estimate_products(terms.len(), s)
                    .map(|prod| prod < strip_cost)
                    .unwrap_or(false)
        }
    };
    if use_spectral {
        let plan = SpectralPlan::new(terms, s, periodic, opts)?;
        let (moment, products) = plan.run(opts)?;
        return Ok(Raw { moment, moment_error: 0.0, method: MethodTag::ExactSpectral, evaluations: products });
    }
    if strip_cost > opts.work_cap {
        return Err(Error::SizeCap(format!(
            "exact grid of {} points needs ~{strip_cost:.3e} operations",
            grid.points()
        )));
    }
    let moment = grid.average(terms.coeffs(), s);
    Ok(Raw { moment, moment_error: 0.0, method: MethodTag::ExactFft, evaluations: grid.points() as u64 })
}

fn with_truncated_axis(
    terms: &SumTerms,
    s: usize,
    periodic: &[usize],
    t_axis: usize,
    domain: &SlabDomain,
    opts: &ExactOptions,
) -> Result<Raw> {
    let range = domain.axes[t_axis];
    let (start, length) = (range.start(), range.length());
    let grid = if periodic.is_empty() { None } else { Some(StripGrid::new(terms, s, periodic, opts)?) };
    let t_freqs: Vec<f64> = (0..terms.len()).map(|j| terms.freq(j)[t_axis]).collect();
    let spread = t_freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - t_freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    let cycles = s as f64 * spread * length;
    let mut panels = opts
        .initial_panels
        .unwrap_or_else(|| next_pow2((cycles / 2.0).ceil() as u64) as usize)
        .clamp(1, opts.panel_cap);
    let (gl_x, gl_w) = gauss_legendre(opts.gl_order);
    let per_node_cost = grid.as_ref().map(|g| g.cost()).unwrap_or(terms.len() as f64);
    let per_node_points = grid.as_ref().map(|g| g.points()).unwrap_or(1) as u64;

    let mut evaluations = 0u64;
    let integrate = |panels: usize, evaluations: &mut u64| -> Result<f64> {
        let nodes = panels * gl_x.len();
        if per_node_cost * nodes as f64 > opts.work_cap {
            return Err(Error::SizeCap(format!(
                "{nodes} quadrature nodes x {per_node_cost:.3e} operations per node"
            )));
        }
        let h = length / panels as f64;
        let mut acc = KahanSum::new();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); terms.len()];
        for panel in 0..panels {
            let a = start + panel as f64 * h;
            for (xg, wg) in gl_x.iter().zip(&gl_w) {
                let x = a + (xg + 1.0) * 0.5 * h;
                for (j, c) in coeffs.iter_mut().enumerate() {
                    *c = terms.coeffs()[j] * e((t_freqs[j] * x).rem_euclid(1.0));
                }
                let g = match &grid {
                    Some(grid) => grid.average(&coeffs, s),
                    None => {
                        let total: Complex64 = coeffs.iter().sum();
                        abs_pow(total, 2.0 * s as f64)
                    }
                };
                acc.add(0.5 * h * wg * g);
            }
        }
        *evaluations += nodes as u64 * per_node_points;
        Ok(acc.value())
    };

    let mut current = integrate(panels, &mut evaluations)?;
    let mut change = f64::INFINITY;
    while panels * 2 <= opts.panel_cap {
        panels *= 2;
        let refined = integrate(panels, &mut evaluations)?;
        change = (refined - current).abs();
        current = refined;
        if change <= opts.rel_tol * current.abs() {
            break;
        }
    }
    if !change.is_finite() {
        // panel cap reached on the first level: no certificate available
        change = current.abs();
    }
    Ok(Raw { moment: current, moment_error: change, method: MethodTag::ExactFft, evaluations })
}

/// Largest `s`-fold coefficient map the slab route will build.
const SLAB_MAP_CAP: f64 = 1.2e7;

/// Closed form for one truncated lattice axis.
///
/// With `c_s` the `s`-fold convolution of the coefficient map, integrating
/// over the periodic axes keeps the pairs `(v, w)` of the spectrum that agree
/// there, and the truncated axis contributes
/// `int_a^{a+L} e(d x) dx = L e(d (a + L/2)) sinc(d L)` with `d = v_t - w_t`.
/// Entries are grouped by their periodic coordinates, so the work is the
/// sum of squared group sizes.
fn slab_spectral(terms: &SumTerms, s: usize, t_axis: usize, start: f64, length: f64, opts: &ExactOptions) -> Result<Raw> {
    let dim = terms.dim();
    let mut cols = Vec::with_capacity(dim);
    for axis in 0..dim {
        let col = terms
            .lattice_axis(axis)
            .ok_or_else(|| Error::InvalidSpec(format!("axis {axis} has non-integer frequencies")))?;
        cols.push(col);
    }
    let multisets = (0..s).fold(1.0, |acc, i| acc * (terms.len() + i) as f64 / (i + 1) as f64);
    if multisets > SLAB_MAP_CAP {
        return Err(Error::SizeCap(format!("{multisets:.3e} entries in the {s}-fold coefficient map")));
    }
    let periodic: Vec<usize> = (0..dim).filter(|&a| a != t_axis).collect();
    let mut radix = Vec::with_capacity(periodic.len());
    let mut lows = vec![0i64; dim];
    for axis in 0..dim {
        let lo = *cols[axis].iter().min().unwrap_or(&0);
        let hi = *cols[axis].iter().max().unwrap_or(&0);
        lows[axis] = lo;
        if axis != t_axis {
            radix.push((hi - lo) as u128 * s as u128 + 1);
        }
    }
    if radix.iter().product::<u128>() > u64::MAX as u128 {
        return Err(Error::SizeCap("periodic keys exceed 64 bits".into()));
    }
    let key_of = |j: usize| -> (u64, i64) {
        let mut key = 0u128;
        for (k, &axis) in periodic.iter().enumerate().rev() {
            key = key * radix[k] + (cols[axis][j] - lows[axis]) as u128;
        }
        (key as u64, cols[t_axis][j] - lows[t_axis])
    };
    let mut base: HashMap<(u64, i64), Complex64> = HashMap::new();
    for (j, a) in terms.coeffs().iter().enumerate() {
        *base.entry(key_of(j)).or_default() += a;
    }
    let mut power = HashMap::from([((0u64, 0i64), Complex64::new(1.0, 0.0))]);
    for _ in 0..s {
        let mut next: HashMap<(u64, i64), Complex64> = HashMap::with_capacity(power.len() * 4);
        for (ka, ca) in &power {
            for (kb, cb) in &base {
                *next.entry((ka.0 + kb.0, ka.1 + kb.1)).or_default() += ca * cb;
            }
        }
        power = next;
    }
    let mut entries: Vec<((u64, i64), Complex64)> = power.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    let mut groups: Vec<&[((u64, i64), Complex64)]> = Vec::new();
    let mut pairs = 0f64;
    let mut i = 0;
    while i < entries.len() {
        let j = i + entries[i..].partition_point(|e| e.0 .0 == entries[i].0 .0);
        pairs += ((j - i) * (j - i + 1) / 2) as f64;
        groups.push(&entries[i..j]);
        i = j;
    }
    if pairs * 4.0 > opts.work_cap {
        return Err(Error::SizeCap(format!("{pairs:.3e} slab pairs")));
    }
    let mid = start + 0.5 * length;
    let kernel = |d: i64| -> Complex64 {
        let x = std::f64::consts::PI * d as f64 * length;
        let sinc = if d == 0 { 1.0 } else { x.sin() / x };
        // d * mid reduced mod 1 in two steps to keep the phase accurate for large d
        let phase = ((d as f64) * mid.fract()).rem_euclid(1.0);
        e(phase) * (length * sinc)
    };
    let partials: Vec<f64> = groups
        .par_chunks(ROW_BLOCK)
        .map(|chunk| {
            let mut acc = KahanSum::new();
            for g in chunk {
                for (a, x) in g.iter().enumerate() {
                    acc.add(x.1.norm_sqr() * length);
                    for y in &g[a + 1..] {
                        acc.add(2.0 * (x.1 * y.1.conj() * kernel(x.0 .1 - y.0 .1)).re);
                    }
                }
            }
            acc.value()
        })
        .collect();
    let moment: KahanSum = partials.into_iter().collect();
    Ok(Raw { moment: moment.value(), moment_error: 0.0, method: MethodTag::ExactSpectral, evaluations: pairs as u64 })
}

/// Periodic-axis sampling grid for the strip route.
struct StripGrid {
    fft_len: usize,
    /// shifted integer frequency on the FFT axis, per term
    fft_freq: Vec<usize>,
    /// (grid size, shifted frequencies per term) for every other periodic axis
    other: Vec<(usize, Vec<usize>)>,
    rows: usize,
    plan: Arc<dyn rustfft::Fft<f64>>,
    twiddles: Vec<Vec<Complex64>>,
}

impl StripGrid {
    fn new(terms: &SumTerms, s: usize, periodic: &[usize], opts: &ExactOptions) -> Result<Self> {
        let mut axes: Vec<(usize, Vec<usize>)> = periodic
            .iter()
            .map(|&axis| {
                let col = terms.lattice_axis(axis).expect("checked by caller");
                let lo = *col.iter().min().unwrap_or(&0);
                let hi = *col.iter().max().unwrap_or(&0);
                let spread = (hi - lo) as u64;
                let m = next_pow2(spread.saturating_mul(s as u64) + 1) as usize;
                (m, col.iter().map(|&k| (k - lo) as usize).collect())
            })
            .collect();
        let points: u128 = axes.iter().map(|(m, _)| *m as u128).product();
        // the FFT runs along the longest axis, leaving the fewest rows
        let fft_pos = (0..axes.len()).max_by_key(|&i| (axes[i].0, usize::MAX - i)).unwrap();
        let (fft_len, fft_freq) = axes.remove(fft_pos);
        let row_bytes = fft_len as u128 * 16;
        if row_bytes > opts.memory_cap_bytes as u128 {
            return Err(Error::GridTooLarge {
                points,
                bytes: points * 16,
                cap_bytes: opts.memory_cap_bytes,
            });
        }
        let rows_wide: u128 = axes.iter().map(|(m, _)| *m as u128).product();
        let rows = usize::try_from(rows_wide).map_err(|_| Error::GridTooLarge {
            points,
            bytes: points * 16,
            cap_bytes: opts.memory_cap_bytes,
        })?;
        let twiddles = axes
            .iter()
            .map(|(m, _)| (0..*m).map(|r| e(r as f64 / *m as f64)).collect())
            .collect();
        let plan = FftPlanner::new().plan_fft_inverse(fft_len);
        Ok(Self { fft_len, fft_freq, other: axes, rows, plan, twiddles })
    }

    fn points(&self) -> u128 {
        self.rows as u128 * self.fft_len as u128
    }

    fn cost(&self) -> f64 {
        let n = self.fft_len as f64;
        self.rows as f64 * (self.fft_freq.len() as f64 * (1 + self.other.len()) as f64 + 5.0 * n * n.log2().max(1.0) + n)
    }

    /// Mean of `|S|^{2s}` over the grid for coefficients `coeffs`.
    fn average(&self, coeffs: &[Complex64], s: usize) -> f64 {
        let blocks = self.rows.div_ceil(ROW_BLOCK);
        let partial: Vec<f64> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
                let mut scratch = vec![Complex64::new(0.0, 0.0); self.plan.get_inplace_scratch_len()];
                let mut acc = KahanSum::new();
                let end = ((b + 1) * ROW_BLOCK).min(self.rows);
                for row in b * ROW_BLOCK..end {
                    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    let digits = self.row_digits(row);
                    for (j, a) in coeffs.iter().enumerate() {
                        let mut c = *a;
                        for (ax, (m, freq)) in self.other.iter().enumerate() {
                            let idx = (freq[j] as u128 * digits[ax] as u128 % *m as u128) as usize;
                            c *= self.twiddles[ax][idx];
                        }
                        buf[self.fft_freq[j]] += c;
                    }
                    self.plan.process_with_scratch(&mut buf, &mut scratch);
                    for z in &buf {
                        acc.add(abs_pow(*z, 2.0 * s as f64));
                    }
                }
                acc.value()
            })
            .collect();
        let total: KahanSum = partial.into_iter().collect();
        total.value() / self.points() as f64
    }

    fn row_digits(&self, mut row: usize) -> Vec<usize> {
        self.other
            .iter()
            .map(|(m, _)| {
                let d = row % m;
                row /= m;
                d
            })
            .collect()
    }
}

/// Spectral route for all-periodic domains.
struct SpectralPlan {
    /// half-order coefficient maps, bucketed by leading digit (non-empty
    /// buckets only, in increasing digit order)
    left: Vec<(u64, Vec<(u64, Complex64)>)>,
    right: Vec<(u64, Vec<(u64, Complex64)>)>,
    symmetric: bool,
    key_bits: u32,
}

impl SpectralPlan {
    fn estimate_products(n_terms: usize, s: usize) -> Option<f64> {
        let s1 = s.div_ceil(2);
        let s2 = s / 2;
        let multisets = |k: usize| -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n_terms + i) as f64 / (i + 1) as f64)
        };
        let (a, b) = (multisets(s1), multisets(s2));
        let products = if s1 == s2 { a * a / 2.0 } else { a * b };
        (a < 5.0e7).then_some(products * 8.0)
    }

    fn new(terms: &SumTerms, s: usize, periodic: &[usize], opts: &ExactOptions) -> Result<Self> {
        debug_assert_eq!(periodic.len(), terms.dim());
        let dim = terms.dim();
        // mixed-radix packing with axis 0 as the least significant digit;
        // digits never overflow because every coordinate of an s-fold sum of
        // shifted frequencies lies in [0, s * spread]
        let mut radix = Vec::with_capacity(dim);
        let mut shifted = vec![vec![0u64; dim]; terms.len()];
        for axis in 0..dim {
            let col = terms.lattice_axis(axis).expect("checked by caller");
            let lo = *col.iter().min().unwrap_or(&0);
            let hi = *col.iter().max().unwrap_or(&0);
            radix.push((hi - lo) as u128 * s as u128 + 1);
            for (j, &k) in col.iter().enumerate() {
                shifted[j][axis] = (k - lo) as u64;
            }
        }
        let span: u128 = radix.iter().product();
        if span > u64::MAX as u128 {
            return Err(Error::SizeCap(format!(
                "spectral keys need {} bits",
                128 - span.leading_zeros()
            )));
        }
        let key_bits = 64 - (span as u64).leading_zeros();
        let pack = |v: &[u64]| -> u64 {
            let mut key = 0u128;
            for axis in (0..dim).rev() {
                key = key * radix[axis] + v[axis] as u128;
            }
            key as u64
        };
        let mut base: HashMap<u64, Complex64> = HashMap::new();
        for (j, a) in terms.coeffs().iter().enumerate() {
            *base.entry(pack(&shifted[j])).or_default() += a;
        }
        let s1 = s.div_ceil(2);
        let s2 = s / 2;
        let mut powers: Vec<HashMap<u64, Complex64>> = vec![HashMap::from([(0u64, Complex64::new(1.0, 0.0))])];
        for k in 1..=s1 {
            let prev = &powers[k - 1];
            if prev.len() as f64 * base.len() as f64 > opts.work_cap {
                return Err(Error::SizeCap("spectral convolution too large".into()));
            }
            let mut next: HashMap<u64, Complex64> = HashMap::with_capacity(prev.len() * 4);
            for (ka, ca) in prev {
                for (kb, cb) in &base {
                    *next.entry(ka + kb).or_default() += ca * cb;
                }
            }
            powers.push(next);
        }
        let lead_radix = radix[0] as u64;
        let bucket = |map: &HashMap<u64, Complex64>| -> Vec<(u64, Vec<(u64, Complex64)>)> {
            let mut out: std::collections::BTreeMap<u64, Vec<(u64, Complex64)>> = Default::default();
            for (&k, &c) in map {
                out.entry(k % lead_radix).or_default().push((k, c));
            }
            // HashMap order is unspecified; sort for reproducibility
            out.into_iter()
                .map(|(d, mut b)| {
                    b.sort_unstable_by_key(|e| e.0);
                    (d, b)
                })
                .collect()
        };
        let left = bucket(&powers[s1]);
        let right = bucket(&powers[s2]);
        let plan = Self { left, right, symmetric: s1 == s2, key_bits };
        let products = plan.count_products();
        if products as f64 * 3.0 > opts.work_cap {
            return Err(Error::SizeCap(format!("{products} spectral products")));
        }
        Ok(plan)
    }

    /// Calls `f(pairs)` once per leading digit `v` of the product, in
    /// increasing order, with every bucket pair `(i, j)` whose digits sum
    /// to `v` (`i <= j` when both halves coincide). A heap merges the
    /// sorted right digits against each left bucket, so only non-empty
    /// bucket pairs are visited.
    fn for_each_digit(&self, mut f: impl FnMut(&[(usize, usize)]) -> Result<()>) -> Result<()> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let first = |i: usize| if self.symmetric { i } else { 0 };
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = (0..self.left.len())
            .filter(|&i| first(i) < self.right.len())
            .map(|i| Reverse((self.left[i].0 + self.right[first(i)].0, i, first(i))))
            .collect();
        let mut group: Vec<(usize, usize)> = Vec::new();
        let mut current = None;
        while let Some(Reverse((v, i, j))) = heap.pop() {
            if current != Some(v) {
                if !group.is_empty() {
                    f(&group)?;
                    group.clear();
                }
                current = Some(v);
            }
            group.push((i, j));
            if j + 1 < self.right.len() {
                heap.push(Reverse((self.left[i].0 + self.right[j + 1].0, i, j + 1)));
            }
        }
        if !group.is_empty() {
            f(&group)?;
        }
        Ok(())
    }

    fn count_products(&self) -> u64 {
        let mut total = 0u64;
        for (i, (_, a)) in self.left.iter().enumerate() {
            let a = a.len() as u64;
            if self.symmetric {
                total += a * (a + 1) / 2;
                total += self.right[i + 1..].iter().map(|b| a * b.1.len() as u64).sum::<u64>();
            } else {
                total += self.right.iter().map(|b| a * b.1.len() as u64).sum::<u64>();
            }
        }
        total
    }

    fn run(&self, opts: &ExactOptions) -> Result<(f64, u64)> {
        let mut acc = KahanSum::new();
        let mut products = 0u64;
        let mut buf: Vec<(u64, Complex64)> = Vec::new();
        let mut scratch: Vec<(u64, Complex64)> = Vec::new();
        self.for_each_digit(|group| {
            buf.clear();
            for &(d, e) in group {
                let (a, b) = (&self.left[d].1, &self.right[e].1);
                if self.symmetric && d == e {
                    for i in 0..a.len() {
                        buf.push((a[i].0 + a[i].0, a[i].1 * a[i].1));
                        for j in i + 1..a.len() {
                            buf.push((a[i].0 + a[j].0, 2.0 * a[i].1 * a[j].1));
                        }
                    }
                } else {
                    let w = if self.symmetric { 2.0 } else { 1.0 };
                    for x in a {
                        for y in b {
                            buf.push((x.0 + y.0, w * x.1 * y.1));
                        }
                    }
                }
            }
            if buf.len() as u128 * 48 > opts.memory_cap_bytes as u128 {
                return Err(Error::GridTooLarge {
                    points: buf.len() as u128,
                    bytes: buf.len() as u128 * 48,
                    cap_bytes: opts.memory_cap_bytes,
                });
            }
            products += buf.len() as u64;
            radix_sort(&mut buf, &mut scratch, self.key_bits);
            let mut i = 0;
            while i < buf.len() {
                let key = buf[i].0;
                let mut c = Complex64::new(0.0, 0.0);
                while i < buf.len() && buf[i].0 == key {
                    c += buf[i].1;
                    i += 1;
                }
                acc.add(c.norm_sqr());
            }
            Ok(())
        })?;
        Ok((acc.value(), products))
    }
}

/// LSD radix sort on the `u64` key using 16-bit digits.
fn radix_sort(data: &mut Vec<(u64, Complex64)>, scratch: &mut Vec<(u64, Complex64)>, bits: u32) {
    const DIGIT: u32 = 16;
    let passes = bits.div_ceil(DIGIT).max(1);
    scratch.clear();
    scratch.resize(data.len(), (0, Complex64::new(0.0, 0.0)));
    let mut counts = vec![0usize; 1 << DIGIT];
    for pass in 0..passes {
        let shift = pass * DIGIT;
        counts.iter_mut().for_each(|c| *c = 0);
        for item in data.iter() {
            counts[((item.0 >> shift) & 0xffff) as usize] += 1;
        }
        let mut sum = 0;
        for c in counts.iter_mut() {
            let t = *c;
            *c = sum;
            sum += t;
        }
        for item in data.iter() {
            let slot = &mut counts[((item.0 >> shift) & 0xffff) as usize];
            scratch[*slot] = *item;
            *slot += 1;
        }
        std::mem::swap(data, scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::SlabDomain;

    fn terms_1d(freqs: &[i64]) -> SumTerms {
        SumTerms::new(
            1,
            freqs.iter().map(|&k| k as f64).collect(),
            vec![Complex64::new(1.0, 0.0); freqs.len()],
        )
        .unwrap()
    }

    #[test]
    fn dirichlet_fourth_moment() {
        // int |sum_{k<n} e(kx)|^4 = (2n^3 + n) / 3
        let t = terms_1d(&(0..10).collect::<Vec<_>>());
        let est = exact_moment_terms(&t, 4.0, &SlabDomain::torus(1), false, &ExactOptions::default()).unwrap();
        assert!((est.moment - 670.0).abs() < 1e-9);
    }

    #[test]
    fn routes_agree() {
        let spec = crate::expsum::ExpSumSpec::moment_curve(3, 6).unwrap().with_random_phases(4);
        let mut opts = ExactOptions { route: Route::StripFft, ..Default::default() };
        let d = SlabDomain::torus(3);
        let a = exact_moment_terms(spec.terms(), 6.0, &d, false, &opts).unwrap();
        opts.route = Route::Spectral;
        let b = exact_moment_terms(spec.terms(), 6.0, &d, false, &opts).unwrap();
        assert_eq!(b.method, MethodTag::ExactSpectral);
        assert!((a.moment - b.moment).abs() < 1e-9 * a.moment, "{} vs {}", a.moment, b.moment);
        // odd half-order exercises the asymmetric split
        let c = exact_moment_terms(spec.terms(), 4.0, &d, false, &opts).unwrap();
        opts.route = Route::StripFft;
        let e = exact_moment_terms(spec.terms(), 4.0, &d, false, &opts).unwrap();
        assert!((c.moment - e.moment).abs() < 1e-9 * e.moment);
    }

    #[test]
    fn radix_sort_orders_keys() {
        let mut v: Vec<(u64, Complex64)> =
            [5u64, 1 << 40, 3, 70000, 3].iter().map(|&k| (k, Complex64::new(k as f64, 0.0))).collect();
        let mut scratch = Vec::new();
        radix_sort(&mut v, &mut scratch, 41);
        let keys: Vec<u64> = v.iter().map(|e| e.0).collect();
        assert_eq!(keys, vec![3, 3, 5, 70000, 1 << 40]);
    }

    #[test]
    fn truncated_axis_with_constant_integrand() {
        // single term: |S| = 1 everywhere, integral equals the domain volume
        let t = SumTerms::new(2, vec![3.0, 0.25], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let d = SlabDomain::last_axis_truncated(2, 0.3, 0.2);
        let est = exact_moment_terms(&t, 6.0, &d, false, &ExactOptions::default()).unwrap();
        assert!((est.moment - 0.2).abs() < 1e-13);
    }

    #[test]
    fn slab_closed_form_matches_panel_quadrature() {
        // moment curve N = 6 with uneven coefficients, truncated last axis
        let freqs: Vec<f64> = (1..=6).flat_map(|j: i32| [j as f64, (j * j) as f64, (j * j * j) as f64]).collect();
        let coeffs: Vec<Complex64> = (0..6).map(|j| Complex64::from_polar(1.0, 0.7 * j as f64)).collect();
        let t = SumTerms::new(3, freqs, coeffs).unwrap();
        let d = SlabDomain::last_axis_truncated(3, 0.617, 1.0 / 6.0);
        for s in [1usize, 2, 3] {
            let p = 2.0 * s as f64;
            let closed = exact_moment_terms(&t, p, &d, false, &ExactOptions { route: Route::Spectral, ..Default::default() }).unwrap();
            let panels = exact_moment_terms(&t, p, &d, false, &ExactOptions { route: Route::StripFft, ..Default::default() }).unwrap();
            assert_eq!(closed.method, MethodTag::ExactSpectral);
            assert!((closed.moment - panels.moment).abs() <= 1e-9 * panels.moment, "s={s}: {} vs {}", closed.moment, panels.moment);
        }
    }

    #[test]
    fn memory_cap_refuses_with_size_report() {
        let t = terms_1d(&[0, 1 << 20]);
        let opts = ExactOptions { memory_cap_bytes: 1 << 20, ..Default::default() };
        let err = exact_moment_terms(&t, 2.0, &SlabDomain::torus(1), false, &opts).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { .. }), "{err}");
    }
}
