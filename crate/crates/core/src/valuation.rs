//! Auction environment and conditional expected values.
//!
//! A bidder with signal s_i values an item at (1−c)s_i + (c/n)Σ_j s_j.
//! Conditioning on the own signal x and the pivotal opponent signal y (the
//! k-th highest among the n−1 others), the expected value decomposes into
//! truncated means of a single signal:
//!
//!   Ṽ(x, y) = (1−c)x + c·[ x/n + y/n
//!             + ((n−k−1)/n)·E[s | s ≤ y] + ((k−1)/n)·E[s | s ≥ y] ],
//!
//! which keeps every downstream quantity a nested one-dimensional integral.

use crate::distributions::SignalDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    n: usize,
    k: usize,
    c: f64,
    dist: SignalDistribution,
}

impl Market {
    /// `n` bidders compete for `k` items (2 ≤ k < n); `c` is the common-value
    /// proportion.
    pub fn new(n: usize, k: usize, c: f64, dist: SignalDistribution) -> Result<Self> {
        if k < 2 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= k < n, got k={k}, n={n}"
            )));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "common-value proportion must lie in [0, 1], got {c}"
            )));
        }
        Ok(Market { n, k, c, dist })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dist(&self) -> &SignalDistribution {
        &self.dist
    }

    /// Same market with a different common-value proportion.
    pub fn with_c(&self, c: f64) -> Result<Self> {
        Market::new(self.n, self.k, c, self.dist.clone())
    }

    /// Ex-post value of bidder `i`: (1−c)s_i + (c/n)Σ_j s_j.
    pub fn value_ex_post(&self, signals: &[f64], i: usize) -> Result<f64> {
        if signals.len() != self.n {
            return Err(Error::WrongLength { expected: self.n, got: signals.len() });
        }
        if i >= self.n {
            return Err(Error::InvalidParameter(format!(
                "bidder index {i} out of range for n={}",
                self.n
            )));
        }
        let sum: f64 = signals.iter().sum();
        Ok((1.0 - self.c) * signals[i] + self.c / self.n as f64 * sum)
    }

    /// Ṽ(x, y): expected value given own signal x and pivotal signal y.
    pub fn v_tilde(&self, x: f64, y: f64) -> Result<f64> {
        let hi = self.dist.support_hi();
        for &v in &[x, y] {
            if !(0.0..=hi).contains(&v) {
                return Err(Error::OutOfSupport { value: v, lo: 0.0, hi });
            }
        }
        Ok(self.v_tilde_q(x, self.dist.cdf(y)?, y))
    }

    /// Ṽ(x, ·) with the pivotal signal given as a (quantile, signal) pair.
    pub(crate) fn v_tilde_q(&self, x: f64, yq: f64, y: f64) -> f64 {
        let n = self.n as f64;
        let k = self.k as f64;
        let common = if self.c == 0.0 {
            0.0
        } else {
            let mut acc = (x + y) / n;
            let a_below = (n - k - 1.0) / n;
            if a_below > 0.0 {
                acc += a_below * self.dist.mean_below_q(yq, y);
            }
            acc += (k - 1.0) / n * self.dist.mean_above_q(yq, y);
            acc
        };
        (1.0 - self.c) * x + self.c * common
    }

    /// V(s) = Ṽ(s, s).
    pub fn v(&self, s: f64) -> Result<f64> {
        let hi = self.dist.support_hi();
        if !(0.0..=hi).contains(&s) {
            return Err(Error::OutOfSupport { value: s, lo: 0.0, hi });
        }
        Ok(self.v_q(self.dist.cdf(s)?, s))
    }

    /// V at a (quantile, signal) pair.
    pub(crate) fn v_q(&self, x: f64, s: f64) -> f64 {
        self.v_tilde_q(s, x, s)
    }

    /// dV/ds, assembled from the analytic derivatives of the truncated means:
    /// d/ds E[s|s≤y] = f·∫₀^s F / F² and d/ds E[s|s≥y] = f·∫_s^{s̄}(1−F) / (1−F)².
    ///
    /// Endpoint queries return the one-sided limit along a point just inside
    /// the support.
    pub fn v_prime(&self, s: f64) -> Result<f64> {
        let hi = self.dist.support_hi();
        if !(0.0..=hi).contains(&s) {
            return Err(Error::OutOfSupport { value: s, lo: 0.0, hi });
        }
        let margin = 1e-9 * hi;
        let s_eff = s.clamp(margin, hi - margin);
        Ok(self.v_prime_q(self.dist.cdf(s_eff)?, s_eff))
    }

    /// dV/ds at a (quantile, signal) pair, interior only.
    pub(crate) fn v_prime_q(&self, x: f64, s: f64) -> f64 {
        let n = self.n as f64;
        let k = self.k as f64;
        if self.c == 0.0 {
            return 1.0;
        }
        let f = self.dist.pdf(s);
        let mut common = 2.0 / n;
        let a_below = (n - k - 1.0) / n;
        if a_below > 0.0 && x > 0.0 {
            // f·(s − E[s|s≤y])/F, using ∫₀^s F = F·(s − E[s|s≤s]).
            common += a_below * f * (s - self.dist.mean_below_q(x, s)) / x;
        }
        if x < 1.0 {
            common += (k - 1.0) / n * f * (self.dist.mean_above_q(x, s) - s) / (1.0 - x);
        }
        (1.0 - self.c) + self.c * common
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SignalDistribution;

    fn uniform_market(c: f64) -> Market {
        Market::new(3, 2, c, SignalDistribution::uniform(1.0).unwrap()).unwrap()
    }

    // n=3, k=2, uniform signals: V(s) = (1−c)s + (c/6)(5s + 1).
    fn v_closed(c: f64, s: f64) -> f64 {
        (1.0 - c) * s + c / 6.0 * (5.0 * s + 1.0)
    }

    #[test]
    fn market_validation() {
        let d = SignalDistribution::uniform(1.0).unwrap();
        assert!(Market::new(3, 1, 0.5, d.clone()).is_err());
        assert!(Market::new(3, 3, 0.5, d.clone()).is_err());
        assert!(Market::new(3, 2, 1.5, d.clone()).is_err());
        assert!(Market::new(3, 2, 0.0, d).is_ok());
    }

    #[test]
    fn value_ex_post_cases() {
        let signals = [0.2, 0.4, 0.6];
        let m0 = uniform_market(0.0);
        for i in 0..3 {
            assert_eq!(m0.value_ex_post(&signals, i).unwrap(), signals[i]);
        }
        let m1 = uniform_market(1.0);
        for i in 0..3 {
            assert!((m1.value_ex_post(&signals, i).unwrap() - 0.4).abs() < 1e-15);
        }
        let mh = uniform_market(0.5);
        assert!((mh.value_ex_post(&signals, 0).unwrap() - 0.3).abs() < 1e-15);
        assert!(mh.value_ex_post(&signals[..2], 0).is_err());
    }

    #[test]
    fn v_tilde_uniform_closed_form() {
        for &c in &[0.0, 0.3, 0.5, 0.8, 1.0] {
            let m = uniform_market(c);
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                let got = m.v_tilde(s, s).unwrap();
                assert!(
                    (got - v_closed(c, s)).abs() < 1e-10,
                    "c={c} s={s}: {got} vs {}",
                    v_closed(c, s)
                );
            }
        }
    }

    #[test]
    fn v_tilde_private_values_ignore_pivot() {
        let m = uniform_market(0.0);
        for &(x, y) in &[(0.3, 0.1), (0.5, 0.9), (0.0, 0.5)] {
            assert_eq!(m.v_tilde(x, y).unwrap(), x);
        }
    }

    #[test]
    fn v_tilde_pure_common_at_top() {
        let m = uniform_market(1.0);
        // (5·1 + 1)/6 = 1.
        assert!((m.v_tilde(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn v_value_example() {
        let m = uniform_market(0.5);
        let got = m.v(0.2).unwrap();
        assert!((got - v_closed(0.5, 0.2)).abs() < 1e-12);
        assert!((got - 0.26667).abs() < 5e-6);
    }

    #[test]
    fn v_prime_uniform_closed_form() {
        // V'(s) = (1−c) + 5c/6 for n=3, k=2, uniform.
        for &c in &[0.0, 0.5, 1.0] {
            let m = uniform_market(c);
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let got = m.v_prime(s).unwrap();
                let expect = (1.0 - c) + 5.0 * c / 6.0;
                assert!((got - expect).abs() < 1e-10, "c={c} s={s}: {got}");
            }
        }
    }

    #[test]
    fn v_prime_matches_finite_differences() {
        let dists = [
            SignalDistribution::uniform(1.0).unwrap(),
            SignalDistribution::truncated_exponential(1.0, None).unwrap(),
            SignalDistribution::truncated_normal(0.7, 0.4, None).unwrap(),
            SignalDistribution::beta(0.5, 0.5).unwrap(),
        ];
        for dist in &dists {
            for &c in &[0.0, 0.5, 1.0] {
                let m = Market::new(5, 3, c, dist.clone()).unwrap();
                let hi = dist.support_hi();
                for i in 1..40 {
                    let s = hi * i as f64 / 40.0;
                    if s <= 1e-6 || s >= hi - 1e-6 {
                        continue;
                    }
                    let h = 1e-6 * hi;
                    let fd = (m.v(s + h).unwrap() - m.v(s - h).unwrap()) / (2.0 * h);
                    let an = m.v_prime(s).unwrap();
                    let tol = (1e-6f64).max(1e-4 * an.abs()) * hi.max(1.0);
                    assert!(
                        (fd - an).abs() < tol,
                        "{:?} c={c} s={s}: fd={fd} analytic={an}",
                        dist.kind()
                    );
                }
            }
        }
    }

    #[test]
    fn v_prime_bounded_for_log_concave() {
        let dists = [
            SignalDistribution::uniform(1.0).unwrap(),
            SignalDistribution::truncated_exponential(1.0, None).unwrap(),
            SignalDistribution::truncated_normal(0.7, 0.4, None).unwrap(),
        ];
        for dist in &dists {
            let m = Market::new(6, 3, 1.0, dist.clone()).unwrap();
            let hi = dist.support_hi();
            for i in 1..200 {
                let s = hi * i as f64 / 200.0;
                let vp = m.v_prime(s).unwrap();
                assert!(vp > 0.0, "{:?}: V' must be positive", dist.kind());
                assert!(
                    vp <= 1.0 + 1e-6,
                    "{:?} s={s}: V'={vp} exceeds 1",
                    dist.kind()
                );
            }
        }
    }

    #[test]
    fn v_tilde_monotone_in_both_arguments() {
        let m = Market::new(4, 2, 0.7, SignalDistribution::beta(2.0, 3.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for w in grid.windows(2) {
            for &other in &grid {
                let a = m.v_tilde(w[0], other).unwrap();
                let b = m.v_tilde(w[1], other).unwrap();
                assert!(b >= a - 1e-12, "not increasing in x");
                let a = m.v_tilde(other, w[0]).unwrap();
                let b = m.v_tilde(other, w[1]).unwrap();
                assert!(b >= a - 1e-9, "not nondecreasing in y");
            }
        }
    }

    #[test]
    fn sup_v_prime_uniform_and_exponential_closed_forms() {
        // sup V' = 1 − c(n−2)/(2n) for uniform; 1 − c(1/2 − (k+1)/(2n)) for
        // exponential.
        let n = 6;
        let k = 3;
        for &c in &[0.3, 0.7, 1.0] {
            let m = Market::new(n, k, c, SignalDistribution::uniform(1.0).unwrap()).unwrap();
            let sup: f64 = (1..400)
                .map(|i| m.v_prime(i as f64 / 400.0).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let expect = 1.0 - c * (n as f64 - 2.0) / (2.0 * n as f64);
            assert!((sup - expect).abs() < 1e-6, "uniform c={c}: sup={sup} vs {expect}");

            let me = Market::new(
                n,
                k,
                c,
                SignalDistribution::truncated_exponential(1.0, Some(40.0)).unwrap(),
            )
            .unwrap();
            let sup: f64 = (1..2000)
                .map(|i| me.v_prime(40.0 * i as f64 / 2000.0).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let expect = 1.0 - c * (0.5 - (k as f64 + 1.0) / (2.0 * n as f64));
            assert!(
                (sup - expect).abs() < 2e-3,
                "exponential c={c}: sup={sup} vs {expect}"
            );
        }
    }
}
