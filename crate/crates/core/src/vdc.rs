//! Direct phase sums `sum_{n <= N} e(f(n))` and the k-th derivative bounds.

use crate::numeric::KahanComplex;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Phases above this `t` use double-double logarithms.
pub const EXTENDED_PRECISION_T: f64 = 1e8;
/// Beyond this the double-double phase reduction is no longer trusted.
pub const MAX_T: f64 = 1e15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PhaseFn {
    /// `f(n) = t log(n + offset) / (2 pi)`.
    LogPhase { t: f64, offset: u64 },
    /// `f(n) = sum_i c_i n^i`.
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub f: PhaseFn,
    /// Summation range `1..=n_terms`.
    pub n_terms: u64,
    /// Derivative order used by the bounds.
    pub k: u32,
    pub lambda_k: f64,
    pub a: f64,
}

impl PhaseSpec {
    /// `n^{it}` over `(N, 2N]` with fourth-derivative data
    /// `lambda_4 = 6t / (2 pi (2N)^4)` and `A = 16`.
    pub fn zeta_block(t: f64, n: u64) -> Self {
        Self {
            f: PhaseFn::LogPhase { t, offset: n },
            n_terms: n,
            k: 4,
            lambda_k: 6.0 * t / (2.0 * PI * (2.0 * n as f64).powi(4)),
            a: 16.0,
        }
    }

    /// Spec carrying only the bound parameters (no phase function).
    pub fn bound_only(n: u64, k: u32, lambda_k: f64, a: f64) -> Self {
        Self { f: PhaseFn::Polynomial { coefficients: vec![0.0] }, n_terms: n, k, lambda_k, a }
    }

    /// `varpi` with `lambda_4 = N^{-varpi}`.
    pub fn varpi(&self) -> f64 {
        -self.lambda_k.ln() / (self.n_terms as f64).ln()
    }

    /// Checks needed to evaluate the sum.
    pub fn validate_phase(&self) -> Result<()> {
        if self.n_terms == 0 {
            return Err(Error::InvalidSpec("empty summation range".into()));
        }
        if let PhaseFn::LogPhase { t, .. } = self.f {
            if !(t >= 0.0) {
                return Err(Error::InvalidSpec(format!("t = {t} must be >= 0")));
            }
            if t > MAX_T {
                return Err(Error::Precondition(format!("t = {t:e} exceeds the extended-precision limit {MAX_T:e}")));
            }
        }
        Ok(())
    }

    /// Checks needed by the bound formulas.
    pub fn validate(&self) -> Result<()> {
        self.validate_phase()?;
        if self.k < 2 || !(self.lambda_k > 0.0) || !(self.a >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "need k >= 2, lambda_k > 0, A >= 1 (got k = {}, lambda = {}, A = {})",
                self.k, self.lambda_k, self.a
            )));
        }
        Ok(())
    }

    /// `|f^(k)|` on `[x, x]` for log phases (`None` for polynomials).
    pub fn log_derivative(&self, x: f64) -> Option<f64> {
        match self.f {
            PhaseFn::LogPhase { t, .. } => {
                let fact: f64 = (1..self.k).map(f64::from).product();
                Some(t / (2.0 * PI) * fact / x.powi(self.k as i32))
            }
            PhaseFn::Polynomial { .. } => None,
        }
    }

    /// Check `lambda_k <= |f^(k)(x)| <= A lambda_k` at 1000 points of the
    /// summation range (log phases only).
    pub fn certify(&self) -> Result<bool> {
        self.validate()?;
        let PhaseFn::LogPhase { offset, .. } = self.f else {
            return Err(Error::Precondition("certification is implemented for log phases".into()));
        };
        let (lo, hi) = (offset as f64 + 1.0, (offset + self.n_terms) as f64);
        let rel = 1e-12;
        Ok((0..1000).all(|i| {
            let x = lo + (hi - lo) * i as f64 / 999.0;
            let d = self.log_derivative(x).unwrap();
            d >= self.lambda_k * (1.0 - rel) && d <= self.a * self.lambda_k * (1.0 + rel)
        }))
    }
}

/// Summands handled per parallel block.
const BLOCK: u64 = 4096;

pub fn phase_sum(spec: &PhaseSpec) -> Result<Complex64> {
    spec.validate_phase()?;
    let blocks = spec.n_terms.div_ceil(BLOCK);
    let partial: Vec<Complex64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = KahanComplex::new();
            for n in b * BLOCK + 1..=((b + 1) * BLOCK).min(spec.n_terms) {
                acc.add(crate::numeric::e(phase_mod1(&spec.f, n)));
            }
            acc.value()
        })
        .collect();
    Ok(pairwise(&partial))
}

fn pairwise(v: &[Complex64]) -> Complex64 {
    match v.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}

/// `f(n) mod 1`.
pub fn phase_mod1(f: &PhaseFn, n: u64) -> f64 {
    match f {
        PhaseFn::LogPhase { t, offset } => {
            let m = n + offset;
            if *t > EXTENDED_PRECISION_T {
                let l = dd::ln_u64(m);
                let v = dd::div(dd::mul_f64(l, *t), dd::TWO_PI);
                dd::frac(v)
            } else {
                (t * (m as f64).ln() / (2.0 * PI)).rem_euclid(1.0)
            }
        }
        PhaseFn::Polynomial { coefficients } => {
            let x = n as f64;
            coefficients.iter().rev().fold(0.0, |acc, c| (acc * x + c).rem_euclid(1.0))
        }
    }
}

/// `sum_{N < n <= 2N} n^{it}`.
pub fn zeta_block_sum(t: f64, n: u64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Precondition("N must be >= 1".into()));
    }
    if t > 1e12 {
        return Err(Error::Precondition(format!("t = {t:e} above 1e12")));
    }
    if t > 0.0 && (n as f64) > t.sqrt().max(1.0) {
        return Err(Error::Precondition(format!("N = {n} exceeds t^(1/2)")));
    }
    phase_sum(&PhaseSpec::zeta_block(t, n))
}

/// `A^{2^{2-k}} N lambda^{1/(2^k - 2)} + N^{1 - 2^{2-k}} lambda^{-1/(2^k - 2)}`.
pub fn classical_bound(spec: &PhaseSpec) -> Result<f64> {
    spec.validate()?;
    let k = spec.k as i32;
    let n = spec.n_terms as f64;
    let q = 2f64.powi(2 - k);
    let e = 1.0 / (2f64.powi(k) - 2.0);
    Ok(spec.a.powf(q) * n * spec.lambda_k.powf(e) + n.powf(1.0 - q) * spec.lambda_k.powf(-e))
}

/// `N^{1+eps} (lambda^{1/(k(k-1))} + N^{-1/(k(k-1))} + N^{-2/(k(k-1))} lambda^{-2/(k^2(k-1))})`.
pub fn bdg_bound(spec: &PhaseSpec, epsilon: f64) -> Result<f64> {
    spec.validate()?;
    let k = spec.k as f64;
    let n = spec.n_terms as f64;
    let kk = k * (k - 1.0);
    let l = spec.lambda_k;
    Ok(n.powf(1.0 + epsilon) * (l.powf(1.0 / kk) + n.powf(-1.0 / kk) + n.powf(-2.0 / kk) * l.powf(-2.0 / (k * kk))))
}

/// `N^{1 - varpi/(4 varpi + 8) + eps} + N^{8/9 + eps}` for `k = 4`, valid
/// when `N^{-2}/8 <= lambda_4 <= 8 N^{-1}`.
pub fn new_fourth_bound(spec: &PhaseSpec, epsilon: f64) -> Result<f64> {
    spec.validate()?;
    if spec.k != 4 {
        return Err(Error::Regime(format!("the fourth-derivative bound needs k = 4, got {}", spec.k)));
    }
    let n = spec.n_terms as f64;
    let l = spec.lambda_k;
    if l < n.powi(-2) / 8.0 {
        return Err(Error::Regime(format!("lower side: lambda_4 = {l:e} < N^-2 / 8 = {:e}", n.powi(-2) / 8.0)));
    }
    if l > 8.0 / n {
        return Err(Error::Regime(format!("upper side: lambda_4 = {l:e} > 8 N^-1 = {:e}", 8.0 / n)));
    }
    let w = spec.varpi();
    Ok(n.powf(1.0 - w / (4.0 * w + 8.0) + epsilon) + n.powf(8.0 / 9.0 + epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: u64,
    pub abs_sum: f64,
    pub classical: f64,
    pub bdg: f64,
    /// `None` outside the regime of the new bound.
    pub new: Option<f64>,
}

/// `|sum|` and the three bounds (with `eps = 0`) for zeta blocks at `t`.
pub fn bound_scan(t: f64, ns: &[u64]) -> Result<Vec<BoundRow>> {
    ns.iter()
        .map(|&n| {
            let spec = PhaseSpec::zeta_block(t, n);
            Ok(BoundRow {
                n,
                abs_sum: zeta_block_sum(t, n)?.norm(),
                classical: classical_bound(&spec)?,
                bdg: bdg_bound(&spec, 0.0)?,
                new: new_fourth_bound(&spec, 0.0).ok(),
            })
        })
        .collect()
}

/// Minimal double-double arithmetic for phase reduction.
pub mod dd {
    /// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
    pub type DD = (f64, f64);

    pub const LN2: DD = (std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);
    pub const TWO_PI: DD = (std::f64::consts::TAU, 2.449_293_598_294_706_4e-16);

    #[inline]
    fn two_sum(a: f64, b: f64) -> DD {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    fn two_prod(a: f64, b: f64) -> DD {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    pub fn add(a: DD, b: DD) -> DD {
        let (s, e) = two_sum(a.0, b.0);
        let e = e + a.1 + b.1;
        two_sum(s, e)
    }

    pub fn neg(a: DD) -> DD {
        (-a.0, -a.1)
    }

    pub fn mul(a: DD, b: DD) -> DD {
        let (p, e) = two_prod(a.0, b.0);
        let e = e + a.0 * b.1 + a.1 * b.0;
        two_sum(p, e)
    }

    pub fn mul_f64(a: DD, b: f64) -> DD {
        let (p, e) = two_prod(a.0, b);
        two_sum(p, e + a.1 * b)
    }

    pub fn div(a: DD, b: DD) -> DD {
        let q1 = a.0 / b.0;
        let r = add(a, neg(mul_f64(b, q1)));
        let q2 = r.0 / b.0;
        let r = add(r, neg(mul_f64(b, q2)));
        let q3 = r.0 / b.0;
        add(two_sum(q1, q2), (q3, 0.0))
    }

    /// `exp(x)` for `|x| < 700`.
    pub fn exp(x: DD) -> DD {
        let k = (x.0 / LN2.0).round();
        let r = add(x, neg(mul_f64(LN2, k)));
        // Taylor series; |r| <= ln 2 / 2 so 30 terms reach ~1e-34
        let mut term: DD = (1.0, 0.0);
        let mut sum: DD = (1.0, 0.0);
        for i in 1..30 {
            term = div(mul(term, r), (i as f64, 0.0));
            sum = add(sum, term);
            if term.0.abs() < 1e-36 {
                break;
            }
        }
        let scale = 2f64.powi(k as i32);
        (sum.0 * scale, sum.1 * scale)
    }

    /// `ln(m)` to double-double accuracy: one Newton step on `exp(y) = m`
    /// from the `f64` logarithm.
    pub fn ln_u64(m: u64) -> DD {
        let y0 = (m as f64).ln();
        let ey = exp((y0, 0.0));
        // m may exceed 2^53; split it exactly
        let mh = (m >> 32) as f64 * 4_294_967_296.0;
        let ml = (m & 0xffff_ffff) as f64;
        let m_dd = two_sum(mh, ml);
        let diff = add(m_dd, neg(ey));
        let corr = div(diff, ey);
        add((y0, 0.0), corr)
    }

    /// Fractional part in `[0, 1)`.
    pub fn frac(a: DD) -> f64 {
        let f = a.0.floor();
        let r = (a.0 - f) + a.1;
        r.rem_euclid(1.0)
    }
}
