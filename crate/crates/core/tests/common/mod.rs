//! High-precision reference arithmetic shared by the integration tests.
#![allow(dead_code)]

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_complex::Complex64;

pub const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Hp {
    cc: Consts,
    two_pi: BigFloat,
}

impl Hp {
    pub fn new() -> Self {
        let mut cc = Consts::new().expect("constant cache");
        let pi = cc.pi(PREC, RM);
        let two_pi = pi.mul(&BigFloat::from_u64(2, PREC), PREC, RM);
        Self { cc, two_pi }
    }

    pub fn f(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, PREC)
    }

    pub fn int(&self, k: i64) -> BigFloat {
        BigFloat::from_i64(k, PREC)
    }

    pub fn to_f64(&mut self, x: &BigFloat) -> f64 {
        let s = x.format(Radix::Dec, RM, &mut self.cc).expect("format");
        s.parse().unwrap_or_else(|_| panic!("cannot parse {s}"))
    }

    /// `e(theta)` where `theta` is in turns.
    pub fn e(&mut self, theta: &BigFloat) -> (BigFloat, BigFloat) {
        let a = theta.mul(&self.two_pi, PREC, RM);
        (a.cos(PREC, RM, &mut self.cc), a.sin(PREC, RM, &mut self.cc))
    }

    pub fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(PREC, RM, &mut self.cc)
    }

    pub fn two_pi(&self) -> BigFloat {
        self.two_pi.clone()
    }

    /// `sum_j e(theta_j)`.
    pub fn sum_e(&mut self, phases: impl IntoIterator<Item = BigFloat>) -> Complex64 {
        let mut re = BigFloat::from_u64(0, PREC);
        let mut im = BigFloat::from_u64(0, PREC);
        for th in phases {
            let (c, s) = self.e(&th);
            re = re.add(&c, PREC, RM);
            im = im.add(&s, PREC, RM);
        }
        Complex64::new(self.to_f64(&re), self.to_f64(&im))
    }
}

pub fn mul(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.mul(b, PREC, RM)
}

pub fn add(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.add(b, PREC, RM)
}

pub fn div(a: &BigFloat, b: &BigFloat) -> BigFloat {
    a.div(b, PREC, RM)
}

/// Ordered quadruples `(a, b, c, d)` in `[1, n]^4` with equal power sums
/// up to degree `k`; brute force.
pub fn vinogradov_count(n: i64, k: u32) -> u64 {
    let mut count = 0;
    for a in 1..=n {
        for b in 1..=n {
            for c in 1..=n {
                for d in 1..=n {
                    if (1..=k).all(|j| a.pow(j) + b.pow(j) == c.pow(j) + d.pow(j)) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}
