//! Brute-force discrete logarithms over Z_p* for desk-scale primes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Discrete-log table for a verified generator `g` of Z_p*.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlpGroup {
    p: u64,
    g: u64,
    /// `log[x]` for x in 1..p; index 0 unused.
    log: Vec<u32>,
}

impl DlpGroup {
    /// Builds the log table by walking powers of `g`; fails unless `p` is prime
    /// and `g` has order `p - 1`.
    pub fn new(p: u64, g: u64) -> Result<Self> {
        if !is_prime(p) || p < 3 {
            return invalid(format!("p = {p} is not an odd prime"));
        }
        if p > 1_000_003 {
            return invalid(format!("p = {p} too large for brute-force logarithms"));
        }
        if g == 0 || g >= p {
            return invalid(format!("g = {g} not in Z_{p}*"));
        }
        let mut log = vec![u32::MAX; p as usize];
        let mut x = 1u64;
        for e in 0..(p - 1) {
            if log[x as usize] != u32::MAX {
                return invalid(format!("g = {g} is not a generator of Z_{p}* (order {e})"));
            }
            log[x as usize] = e as u32;
            x = x * g % p;
        }
        Ok(DlpGroup { p, g, log })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    /// Group order `p - 1`, the modulus of log-space.
    pub fn order(&self) -> u64 {
        self.p - 1
    }

    pub fn log(&self, x: u64) -> Result<u64> {
        if x == 0 || x >= self.p {
            return invalid(format!("{x} not in Z_{}*", self.p));
        }
        Ok(u64::from(self.log[x as usize]))
    }

    pub fn pow(&self, e: u64) -> u64 {
        let mut result = 1u64;
        let mut base = self.g % self.p;
        let mut e = e % self.order();
        while e > 0 {
            if e & 1 == 1 {
                result = result * base % self.p;
            }
            base = base * base % self.p;
            e >>= 1;
        }
        result
    }

    /// Whether `log_g x` lies in the cyclic interval `[start, start + len - 1]`
    /// of log-space.
    pub fn log_in_interval(&self, x: u64, start: u64, len: u64) -> Result<bool> {
        let l = self.log(x)?;
        let m = self.order();
        Ok((l + m - start % m) % m < len)
    }
}

/// Size of the intersection of two cyclic intervals of length `len` on Z_m
/// starting at `a` and `b`.
pub fn interval_overlap(a: u64, b: u64, len: u64, m: u64) -> u64 {
    debug_assert!(len <= m);
    let d = (b + m - a % m) % m;
    len.saturating_sub(d) + (d + len).saturating_sub(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_checks() {
        assert!(DlpGroup::new(23, 5).is_ok());
        assert!(DlpGroup::new(23, 2).is_err()); // order 11
        assert!(DlpGroup::new(59, 2).is_ok());
        assert!(DlpGroup::new(21, 2).is_err());
    }

    #[test]
    fn logs_invert_powers() {
        let g = DlpGroup::new(23, 5).unwrap();
        for e in 0..22 {
            assert_eq!(g.log(g.pow(e)).unwrap(), e);
        }
        assert!(g.log(0).is_err());
        assert!(g.log(23).is_err());
    }

    #[test]
    fn overlap_matches_enumeration() {
        for m in [4u64, 7, 22] {
            for len in 1..=m {
                for a in 0..m {
                    for b in 0..m {
                        let brute = (0..len)
                            .filter(|j| (0..len).any(|k| (a + j) % m == (b + k) % m))
                            .count() as u64;
                        assert_eq!(interval_overlap(a, b, len, m), brute, "m={m} len={len} a={a} b={b}");
                    }
                }
            }
        }
    }
}
