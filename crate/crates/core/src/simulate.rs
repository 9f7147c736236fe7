//! Independent Monte Carlo oracle: auction play-throughs, WEV / revenue /
//! variance estimation, equilibrium regret audits, and the winners' Gini.
//!
//! Determinism contract: draws are generated in fixed-size chunks, each
//! chunk seeded as an independent ChaCha8 stream derived from (seed, salt,
//! chunk index). Chunks run in parallel but their partial sums merge in
//! chunk order, so results are bit-identical for any worker count.

use crate::equilibrium::BidCurve;
use crate::error::{Error, Result};
use crate::mechanism;
use crate::valuation::Market;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Fixed batch size; part of the reproducibility contract.
pub const CHUNK: u64 = 4096;

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: u64,
    pub seed: u64,
}

/// One auction play-through under the equilibrium bid curve.
#[derive(Debug, Clone)]
pub struct AuctionResult {
    /// Winning bidder indices, ascending.
    pub winners: Vec<usize>,
    /// Payments aligned with `winners`.
    pub prices: Vec<f64>,
    pub revenue: f64,
    /// Per-bidder surplus; losers hold zero.
    pub utilities: Vec<f64>,
    /// True if the allocation needed an index tie-break on equal bids.
    pub tie_broken: bool,
}

fn chunk_rng(seed: u64, salt: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(chunk + 1));
    rng
}

// Run `draws` in fixed chunks, in parallel, merging partials in chunk order.
fn run_chunks<P, F>(draws: u64, seed: u64, salt: u64, per_chunk: F) -> Result<Vec<P>>
where
    P: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> Result<P> + Sync,
{
    let n_chunks = draws.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, salt, ci);
            let count = CHUNK.min(draws - ci * CHUNK);
            per_chunk(&mut rng, count)
        })
        .collect()
}

fn sample_signals(rng: &mut ChaCha8Rng, market: &Market, buf: &mut [f64]) {
    let dist = market.dist();
    for s in buf.iter_mut() {
        *s = dist.quantile_unchecked(rng.random::<f64>());
    }
}

// Indices of the top-k bids (descending bid, ascending index), the clearing
// bid, and whether an index tie-break decided the allocation.
fn rank_by_bid(bids: &[f64], k: usize, order: &mut Vec<usize>) -> (f64, bool) {
    order.clear();
    order.extend(0..bids.len());
    order.sort_by(|&a, &b| bids[b].partial_cmp(&bids[a]).unwrap().then(a.cmp(&b)));
    let clearing = bids[order[k]];
    let tie = bids[order[k - 1]] == clearing;
    (clearing, tie)
}

/// Play one profile: allocation to the top-k bids, winners pay
/// δ·(own bid) + (1−δ)·(first rejected bid).
pub fn run_auction(curve: &BidCurve, signals: &[f64]) -> Result<AuctionResult> {
    let market = curve.market();
    let n = market.n();
    let k = market.k();
    if signals.len() != n {
        return Err(Error::WrongLength { expected: n, got: signals.len() });
    }
    let delta = curve.delta();
    let bids: Vec<f64> = signals.iter().map(|&s| curve.bid(s)).collect();
    let mut order = Vec::new();
    let (clearing, tie_broken) = rank_by_bid(&bids, k, &mut order);
    let mut winners: Vec<usize> = order[..k].to_vec();
    winners.sort_unstable();
    let mut utilities = vec![0.0; n];
    let mut prices = Vec::with_capacity(k);
    let mut revenue = 0.0;
    for &i in &winners {
        let price = delta * bids[i] + (1.0 - delta) * clearing;
        prices.push(price);
        revenue += price;
        utilities[i] = market.value_ex_post(signals, i)? - price;
    }
    Ok(AuctionResult { winners, prices, revenue, utilities, tie_broken })
}

// Per-draw scalar statistic accumulated to (Σx, Σx², count).
#[derive(Debug, Clone, Copy, Default)]
struct ScalarAccum {
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl ScalarAccum {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
    }

    fn merge(partials: &[ScalarAccum]) -> ScalarAccum {
        let mut total = ScalarAccum::default();
        for p in partials {
            total.sum += p.sum;
            total.sum_sq += p.sum_sq;
            total.count += p.count;
        }
        total
    }

    fn estimate(&self, seed: u64) -> McEstimate {
        let t = self.count as f64;
        let mean = self.sum / t;
        let var = ((self.sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
        McEstimate { mean, std_error: (var / t).sqrt(), draws: self.count, seed }
    }
}

// Shared per-draw machinery: signals, bids, ranking, winner utilities.
struct DrawScratch {
    signals: Vec<f64>,
    bids: Vec<f64>,
    order: Vec<usize>,
    utilities: Vec<f64>,
}

impl DrawScratch {
    fn new(n: usize) -> Self {
        DrawScratch {
            signals: vec![0.0; n],
            bids: vec![0.0; n],
            order: Vec::with_capacity(n),
            utilities: vec![0.0; n],
        }
    }

    // Fills utilities for winners (0 elsewhere); returns (clearing bid, sum
    // of signals).
    fn play(&mut self, curve: &BidCurve, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let market = curve.market();
        let n = market.n();
        let k = market.k();
        let c = market.c();
        let delta = curve.delta();
        sample_signals(rng, market, &mut self.signals);
        let signal_sum: f64 = self.signals.iter().sum();
        for i in 0..n {
            self.bids[i] = curve.bid(self.signals[i]);
        }
        let (clearing, _) = rank_by_bid(&self.bids, k, &mut self.order);
        self.utilities.iter_mut().for_each(|u| *u = 0.0);
        for &i in &self.order[..k] {
            let value = (1.0 - c) * self.signals[i] + c / n as f64 * signal_sum;
            let price = delta * self.bids[i] + (1.0 - delta) * clearing;
            self.utilities[i] = value - price;
        }
        (clearing, signal_sum)
    }

    // Sample variance of the k winner utilities.
    fn winner_dispersion(&self, k: usize) -> f64 {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &i in &self.order[..k] {
            let u = self.utilities[i];
            sum += u;
            sum_sq += u * u;
        }
        let kf = k as f64;
        ((kf * sum_sq - sum * sum) / (kf * (kf - 1.0))).max(0.0)
    }
}

/// Monte Carlo WEV: the empirical variance of winner utilities per profile,
/// averaged over draws.
pub fn estimate_wev(curve: &BidCurve, draws: u64, seed: u64) -> Result<McEstimate> {
    check_draws(draws)?;
    let k = curve.market().k();
    let partials = run_chunks(draws, seed, 1, |rng, count| {
        let mut scratch = DrawScratch::new(curve.market().n());
        let mut acc = ScalarAccum::default();
        for _ in 0..count {
            scratch.play(curve, rng);
            acc.push(scratch.winner_dispersion(k));
        }
        Ok(acc)
    })?;
    Ok(ScalarAccum::merge(&partials).estimate(seed))
}

/// Monte Carlo expected revenue of the δ-mixed auction.
pub fn estimate_revenue(curve: &BidCurve, draws: u64, seed: u64) -> Result<McEstimate> {
    check_draws(draws)?;
    let k = curve.market().k();
    let delta = curve.delta();
    let partials = run_chunks(draws, seed, 2, |rng, count| {
        let mut scratch = DrawScratch::new(curve.market().n());
        let mut acc = ScalarAccum::default();
        for _ in 0..count {
            let (clearing, _) = scratch.play(curve, rng);
            let mut rev = 0.0;
            for &i in &scratch.order[..k] {
                rev += delta * scratch.bids[i] + (1.0 - delta) * clearing;
            }
            acc.push(rev);
        }
        Ok(acc)
    })?;
    Ok(ScalarAccum::merge(&partials).estimate(seed))
}

/// Monte Carlo expected revenue of the surplus-equitable mechanism.
pub fn estimate_equitable_revenue(market: &Market, draws: u64, seed: u64) -> Result<McEstimate> {
    check_draws(draws)?;
    let n = market.n();
    let k = market.k();
    let partials = run_chunks(draws, seed, 2, |rng, count| {
        let mut signals = vec![0.0; n];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut acc = ScalarAccum::default();
        for _ in 0..count {
            sample_signals(rng, market, &mut signals);
            order.clear();
            order.extend(0..n);
            order.sort_by(|&a, &b| signals[b].partial_cmp(&signals[a]).unwrap().then(a.cmp(&b)));
            let y = signals[order[k]];
            let mut rev = 0.0;
            for &i in &order[..k] {
                rev += mechanism::equitable_payment(market, signals[i], y)?;
            }
            acc.push(rev);
        }
        Ok(acc)
    })?;
    Ok(ScalarAccum::merge(&partials).estimate(seed))
}

/// One (signal, deviation report) audit point.
#[derive(Debug, Clone, Copy)]
pub struct RegretPoint {
    pub s: f64,
    pub z: f64,
    /// Estimate of U(s, z) − U(s, s).
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct RegretReport {
    pub points: Vec<RegretPoint>,
    /// Largest estimated interim gain from deviating.
    pub max_regret: f64,
}

/// Interim best-response audit: per deviation pair (s, z), the Monte Carlo
/// estimate of U(s, z) − U(s, s) with common opponent draws across reports.
pub fn regret_audit(
    curve: &BidCurve,
    pairs: &[(f64, f64)],
    draws: u64,
    seed: u64,
) -> Result<RegretReport> {
    check_draws(draws)?;
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("empty deviation grid".to_string()));
    }
    let market = curve.market();
    let n = market.n();
    let k = market.k();
    let c = market.c();
    let delta = curve.delta();
    let dist = market.dist();
    let partials = run_chunks(draws, seed, 3, |rng, count| {
        let mut opp = vec![0.0; n - 1];
        let mut opp_bids = vec![0.0; n - 1];
        let mut accs = vec![ScalarAccum::default(); pairs.len()];
        for _ in 0..count {
            for s in opp.iter_mut() {
                *s = dist.quantile_unchecked(rng.random::<f64>());
            }
            let opp_sum: f64 = opp.iter().sum();
            for (b, &s) in opp_bids.iter_mut().zip(&opp) {
                *b = curve.bid(s);
            }
            // k-th highest opponent bid is the pivotal price component.
            let mut sorted = opp_bids.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let pivotal = sorted[k - 1];
            for (acc, &(s, z)) in accs.iter_mut().zip(pairs) {
                let utility = |report: f64| -> f64 {
                    let bid = curve.bid(report);
                    if bid >= pivotal {
                        let value = (1.0 - c) * s + c / n as f64 * (s + opp_sum);
                        value - delta * bid - (1.0 - delta) * pivotal
                    } else {
                        0.0
                    }
                };
                acc.push(utility(z) - utility(s));
            }
        }
        Ok(accs)
    })?;
    let mut points = Vec::with_capacity(pairs.len());
    let mut max_regret = f64::NEG_INFINITY;
    for (idx, &(s, z)) in pairs.iter().enumerate() {
        let total = ScalarAccum::merge(
            &partials.iter().map(|p| p[idx]).collect::<Vec<_>>(),
        );
        let est = total.estimate(seed);
        max_regret = max_regret.max(est.mean);
        points.push(RegretPoint { s, z, mean: est.mean, std_error: est.std_error });
    }
    Ok(RegretReport { points, max_regret })
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateWithSe {
    pub value: f64,
    pub std_error: f64,
}

/// The four dispersion metrics plus the residuals of the decomposition
/// identities connecting them (all residuals are zero in expectation):
///
///   EV  = k(k−1)/(n(n−1))·WEV + (1 − (k−1)/(n−1))·E\[u₁²\]
///   Var = (k/n)·WV + (n/k − 1)·E\[u₁\]²
///   E\[u₁ | wins\] = (n/k)·E\[u₁\]
#[derive(Debug, Clone)]
pub struct VarianceSuite {
    pub var: EstimateWithSe,
    pub winners_var: EstimateWithSe,
    pub ev: EstimateWithSe,
    pub wev: EstimateWithSe,
    pub ev_identity_residual: EstimateWithSe,
    pub var_identity_residual: EstimateWithSe,
    pub winner_mean_residual: EstimateWithSe,
    pub draws: u64,
    pub seed: u64,
}

// Per-draw statistic vector for the variance suite:
// [1{0 wins}, u₀, u₀², mean u, mean u², EV_t, WEV_t].
const NSTAT: usize = 7;

/// Estimate Var, WV, EV, WEV and the identity residuals in one pass; the
/// standard errors come from the delta method on the joint moment matrix.
pub fn estimate_variance_suite(curve: &BidCurve, draws: u64, seed: u64) -> Result<VarianceSuite> {
    check_draws(draws)?;
    let market = curve.market();
    let n = market.n();
    let k = market.k();
    let partials = run_chunks(draws, seed, 4, |rng, count| {
        let mut scratch = DrawScratch::new(n);
        let mut sums = [0.0f64; NSTAT];
        let mut cross = [[0.0f64; NSTAT]; NSTAT];
        for _ in 0..count {
            scratch.play(curve, rng);
            let u0 = scratch.utilities[0];
            let wins0 = scratch.order[..k].contains(&0);
            let nf = n as f64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &u in &scratch.utilities {
                sum += u;
                sum_sq += u * u;
            }
            let z = [
                if wins0 { 1.0 } else { 0.0 },
                u0,
                u0 * u0,
                sum / nf,
                sum_sq / nf,
                ((nf * sum_sq - sum * sum) / (nf * (nf - 1.0))).max(0.0),
                scratch.winner_dispersion(k),
            ];
            for i in 0..NSTAT {
                sums[i] += z[i];
                for j in i..NSTAT {
                    cross[i][j] += z[i] * z[j];
                }
            }
        }
        Ok((sums, cross, count))
    })?;

    let mut sums = [0.0f64; NSTAT];
    let mut cross = [[0.0f64; NSTAT]; NSTAT];
    let mut total = 0u64;
    for (s, c, t) in &partials {
        for i in 0..NSTAT {
            sums[i] += s[i];
            for j in i..NSTAT {
                cross[i][j] += c[i][j];
            }
        }
        total += t;
    }
    let t = total as f64;
    let mut theta = [0.0f64; NSTAT];
    for i in 0..NSTAT {
        theta[i] = sums[i] / t;
    }
    // Sample covariance of the statistic vector.
    let mut cov = [[0.0f64; NSTAT]; NSTAT];
    for i in 0..NSTAT {
        for j in i..NSTAT {
            let v = cross[i][j] / t - theta[i] * theta[j];
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    let se_of = |grad: [f64; NSTAT]| -> f64 {
        let mut q = 0.0;
        for i in 0..NSTAT {
            for j in 0..NSTAT {
                q += grad[i] * cov[i][j] * grad[j];
            }
        }
        (q.max(0.0) / t).sqrt()
    };

    let (nf, kf) = (n as f64, k as f64);
    let (a, b, c2, m1, m2, ev, wev) =
        (theta[0], theta[1], theta[2], theta[3], theta[4], theta[5], theta[6]);

    let var = m2 - m1 * m1;
    let g_var = [0.0, 0.0, 0.0, -2.0 * m1, 1.0, 0.0, 0.0];

    let wv = c2 / a - (b / a) * (b / a);
    let g_wv = [
        -c2 / (a * a) + 2.0 * b * b / (a * a * a),
        -2.0 * b / (a * a),
        1.0 / a,
        0.0,
        0.0,
        0.0,
        0.0,
    ];

    let alpha = kf * (kf - 1.0) / (nf * (nf - 1.0));
    let beta_m2 = 1.0 - (kf - 1.0) / (nf - 1.0);
    // E[u₁²] is estimated by the all-bidder mean of u² (exchangeability).
    let res_ev = ev - alpha * wev - beta_m2 * m2;
    let g_res_ev = [0.0, 0.0, 0.0, 0.0, -beta_m2, 1.0, -alpha];

    let res_var = var - kf / nf * wv - (nf / kf - 1.0) * m1 * m1;
    let mut g_res_var = [0.0f64; NSTAT];
    for i in 0..NSTAT {
        g_res_var[i] = g_var[i] - kf / nf * g_wv[i];
    }
    g_res_var[3] += -2.0 * (nf / kf - 1.0) * m1;

    let res_wmean = b / a - nf / kf * m1;
    let g_res_wmean = [-b / (a * a), 1.0 / a, 0.0, -nf / kf, 0.0, 0.0, 0.0];

    Ok(VarianceSuite {
        var: EstimateWithSe { value: var, std_error: se_of(g_var) },
        winners_var: EstimateWithSe { value: wv, std_error: se_of(g_wv) },
        ev: EstimateWithSe { value: ev, std_error: se_of([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]) },
        wev: EstimateWithSe { value: wev, std_error: se_of([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]) },
        ev_identity_residual: EstimateWithSe { value: res_ev, std_error: se_of(g_res_ev) },
        var_identity_residual: EstimateWithSe { value: res_var, std_error: se_of(g_res_var) },
        winner_mean_residual: EstimateWithSe { value: res_wmean, std_error: se_of(g_res_wmean) },
        draws: total,
        seed,
    })
}

/// Expected Gini index among winners, normalized by the expected winner
/// surplus E\[u₁ | 1 wins\] = (n/k)E\[u₁\].
pub fn estimate_gini_winners(curve: &BidCurve, draws: u64, seed: u64) -> Result<McEstimate> {
    check_draws(draws)?;
    let market = curve.market();
    let n = market.n();
    let k = market.k();
    let partials = run_chunks(draws, seed, 5, |rng, count| {
        let mut scratch = DrawScratch::new(n);
        let mut sums = [0.0f64; 2];
        let mut cross = [[0.0f64; 2]; 2];
        for _ in 0..count {
            scratch.play(curve, rng);
            let mut abs_gaps = 0.0;
            for a in 0..k {
                for b in 0..k {
                    abs_gaps += (scratch.utilities[scratch.order[a]]
                        - scratch.utilities[scratch.order[b]])
                        .abs();
                }
            }
            let m1: f64 = scratch.utilities.iter().sum::<f64>() / n as f64;
            let z = [abs_gaps, m1];
            for i in 0..2 {
                sums[i] += z[i];
                for j in i..2 {
                    cross[i][j] += z[i] * z[j];
                }
            }
        }
        Ok((sums, cross, count))
    })?;
    let mut sums = [0.0f64; 2];
    let mut cross = [[0.0f64; 2]; 2];
    let mut total = 0u64;
    for (s, c, t) in &partials {
        for i in 0..2 {
            sums[i] += s[i];
            for j in i..2 {
                cross[i][j] += c[i][j];
            }
        }
        total += t;
    }
    let t = total as f64;
    let num = sums[0] / t;
    let m1 = sums[1] / t;
    let denom = 2.0 * (n as f64) * (k as f64) * m1;
    let cov = |i: usize, j: usize| cross[i.min(j)][i.max(j)] / t - sums[i] / t * (sums[j] / t);
    let se_m1 = (cov(1, 1).max(0.0) / t).sqrt();
    if denom.abs() <= 10.0 * 2.0 * (n as f64) * (k as f64) * se_m1 {
        return Err(Error::DistributionContract(format!(
            "expected winner surplus too close to zero to normalize a Gini index \
             (denominator {denom:.3e})"
        )));
    }
    let gini = num / denom;
    // Delta method on the ratio num/(2nk·m1).
    let g0 = 1.0 / denom;
    let g1 = -num / (denom * m1);
    let var = g0 * g0 * cov(0, 0) + 2.0 * g0 * g1 * cov(0, 1) + g1 * g1 * cov(1, 1);
    Ok(McEstimate { mean: gini, std_error: (var.max(0.0) / t).sqrt(), draws: total, seed })
}

/// Sampled winner signal pairs (first two winners per draw).
pub fn sample_winner_pairs(curve: &BidCurve, count: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let partials = run_chunks(count as u64, seed, 6, |rng, chunk_count| {
        let mut scratch = DrawScratch::new(curve.market().n());
        let mut pairs = Vec::with_capacity(chunk_count as usize);
        for _ in 0..chunk_count {
            scratch.play(curve, rng);
            pairs.push((
                scratch.signals[scratch.order[0]],
                scratch.signals[scratch.order[1]],
            ));
        }
        Ok(pairs)
    })?;
    Ok(partials.into_iter().flatten().collect())
}

fn check_draws(draws: u64) -> Result<()> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draw count must be positive".to_string()));
    }
    Ok(())
}
