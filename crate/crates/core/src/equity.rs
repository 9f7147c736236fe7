//! Surplus-equity metrics for δ-mixed auctions.
//!
//! Two winners i, j differ in realized surplus only through the kernel
//! φ^δ(s) = (1−c)s − δβ^δ(s): the common-value part and the uniform price
//! component cancel in every pairwise difference. The winners' empirical
//! variance is evaluated as WEV = A − B with
//!
//!   A = (n/k) ∫ φ²(s) G_k^{n−1}(s) f(s) ds,
//!   B = n(n−1)/(k(k−1)) ∫ (∫_t^{s̄} φ f)² g_{k−1}^{n−2}(t) dt,
//!
//! i.e. E[φ(s₁)² | 1 wins] − E[φ(s₁)φ(s₂) | 1, 2 win]; both are nested
//! one-dimensional integrals over the tabulated bid curve. Monotone ex-post
//! utility (MEU) reduces to the slope bound ∂β^δ/∂s ≤ (1−c)/δ.

use crate::distributions::UniformOrderStat;
use crate::equilibrium::{bid_mixed, BidCurve};
use crate::error::{Error, Result};
use crate::quad::CellInterp;
use crate::valuation::Market;

/// Slack granted to the MEU slope comparison; keeps the frontier from
/// flipping on quadrature noise exactly at the bound.
pub const MEU_TOLERANCE: f64 = 1e-6;

/// Realized utilities of one auction play-through.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Per-bidder realized surplus; losers hold zero.
    pub utilities: Vec<f64>,
    /// Winning bidder indices, ascending.
    pub winners: Vec<usize>,
    /// First rejected bid Y_{k+1}(β), the uniform price component.
    pub clearing_bid: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MeuVerdict {
    pub holds: bool,
    /// (1−c)/δ − max slope; +∞ for δ = 0 where payments are bid-free.
    pub margin: f64,
    pub max_slope: f64,
}

/// Equity summary for one (market, δ).
#[derive(Debug, Clone, Copy)]
pub struct EquityReport {
    pub wev: f64,
    pub meu_holds: bool,
    pub meu_margin: f64,
    pub max_slope: f64,
    pub delta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// Every pairwise gap weakly smaller under the first pricing, one strictly.
    Dominates,
    /// The reverse holds.
    Dominated,
    /// Neither ordering holds (includes the all-equal case).
    Incomparable,
}

/// Prior-free bounds on equity-preferred price discrimination.
#[derive(Debug, Clone, Copy)]
pub struct TheoryBounds {
    /// Every δ below 1−c is dominated for log-concave signals.
    pub lb_logconcave: f64,
    /// Any δ up to min(1, 2(1−c)) dominates uniform pricing.
    pub dominating_range_hi: f64,
    /// Sharper kind-specific lower bound where one is known
    /// (uniform: 2n(1−c)/(2n − c(n−2)); exponential: 2n(1−c)/(2n − c(n−k−1))).
    pub lb_distribution: Option<f64>,
}

/// φ^δ(s) = (1−c)s − δβ^δ(s) by direct evaluation.
pub fn surplus_phi(market: &Market, delta: f64, s: f64) -> Result<f64> {
    if delta == 0.0 {
        return Ok((1.0 - market.c()) * s);
    }
    Ok((1.0 - market.c()) * s - delta * bid_mixed(market, delta, s)?)
}

/// Play one profile through the equilibrium: top-k signals win (ties broken
/// by index), winners pay δβ(s_i) + (1−δ)Y_{k+1}(β).
pub fn ex_post_utilities(curve: &BidCurve, signals: &[f64]) -> Result<Outcome> {
    let market = curve.market();
    let n = market.n();
    let k = market.k();
    if signals.len() != n {
        return Err(Error::WrongLength { expected: n, got: signals.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| signals[b].partial_cmp(&signals[a]).unwrap().then(a.cmp(&b)));
    let clearing_bid = curve.bid(signals[order[k]]);
    let delta = curve.delta();
    let mut utilities = vec![0.0; n];
    let mut winners: Vec<usize> = order[..k].to_vec();
    winners.sort_unstable();
    for &i in &winners {
        let value = market.value_ex_post(signals, i)?;
        let pay = delta * curve.bid(signals[i]) + (1.0 - delta) * clearing_bid;
        utilities[i] = value - pay;
    }
    Ok(Outcome { utilities, winners, clearing_bid })
}

/// Winners' empirical variance by nested quadrature over the curve nodes.
pub fn wev_from_curve(curve: &BidCurve) -> Result<f64> {
    let market = curve.market();
    let n = market.n() as f64;
    let k = market.k() as f64;
    let xs = curve.node_xs();
    let wx = curve.node_weights();
    let phis = curve.node_phis();
    let gs = curve.node_pivotal_cdf();
    let bounds = curve.cell_bounds();
    let inner_stat = UniformOrderStat::new(market.k() - 1, market.n() - 2)?;

    // A = (n/k) ∫ φ² G̃ dx.
    let mut a_int = 0.0;
    for i in 0..xs.len() {
        a_int += wx[i] * phis[i] * phis[i] * gs[i];
    }
    a_int *= n / k;

    // B: suffix integrals of φ per cell, then ∫ (∫_t¹ φ)² g̃_{k−1}^{n−2}(t) dt.
    let cells = bounds.len() - 1;
    let mut interps = Vec::with_capacity(cells);
    for j in 0..cells {
        let mut vals = [0.0f64; 16];
        vals.copy_from_slice(&phis[16 * j..16 * (j + 1)]);
        interps.push(CellInterp::project(&vals, bounds[j], bounds[j + 1]));
    }
    let mut suffix = vec![0.0f64; cells + 1];
    for j in (0..cells).rev() {
        suffix[j] = suffix[j + 1] + interps[j].integral_full();
    }
    let mut b_int = 0.0;
    for j in 0..cells {
        for i in 16 * j..16 * (j + 1) {
            let tail = suffix[j + 1] + interps[j].integral_from(xs[i]);
            b_int += wx[i] * tail * tail * inner_stat.pdf(xs[i]);
        }
    }
    b_int *= n * (n - 1.0) / (k * (k - 1.0));

    let wev = a_int - b_int;
    let scale = a_int.abs().max(b_int.abs()).max(1e-30);
    // The build error sums per-segment estimates and is very conservative;
    // flag only genuine blowups.
    let err = curve.build_error() * (1.0 + curve.delta()) + 1e-13 * scale;
    let budget = (1e-5 * scale).max(1e-8);
    if err > budget {
        return Err(Error::QuadratureNonConvergence { achieved: err, requested: budget });
    }
    // The A − B cancellation can leave a rounding-level negative residue.
    if wev < 0.0 {
        let residue = 1e-11 * scale + 1e-14;
        if wev > -residue {
            return Ok(0.0);
        }
        return Err(Error::QuadratureNonConvergence { achieved: -wev, requested: residue });
    }
    Ok(wev)
}

/// WEV for (market, δ), building the curve internally.
pub fn wev(market: &Market, delta: f64) -> Result<f64> {
    wev_from_curve(&BidCurve::build(market, delta)?)
}

/// MEU verdict from the tabulated slope supremum.
pub fn meu_verdict(curve: &BidCurve) -> MeuVerdict {
    let delta = curve.delta();
    let max_slope = curve.max_slope();
    if delta == 0.0 {
        // Uniform pricing charges the clearing bid only; utilities are
        // monotone in signals regardless of the bid slope.
        return MeuVerdict { holds: true, margin: f64::INFINITY, max_slope };
    }
    let bound = (1.0 - curve.market().c()) / delta;
    let margin = bound - max_slope;
    MeuVerdict { holds: margin >= -MEU_TOLERANCE, margin, max_slope }
}

pub fn meu_verdict_for(market: &Market, delta: f64) -> Result<MeuVerdict> {
    Ok(meu_verdict(&BidCurve::build(market, delta)?))
}

/// WEV plus the MEU fragment for one (market, δ).
pub fn equity_report(market: &Market, delta: f64) -> Result<EquityReport> {
    let curve = BidCurve::build(market, delta)?;
    let wev = wev_from_curve(&curve)?;
    let meu = meu_verdict(&curve);
    Ok(EquityReport {
        wev,
        meu_holds: meu.holds,
        meu_margin: meu.margin,
        max_slope: meu.max_slope,
        delta,
        c: market.c(),
    })
}

/// Pairwise-difference comparison of two pricings over sampled winner pairs.
pub fn pairwise_dominance_from_curves(
    curve_a: &BidCurve,
    curve_b: &BidCurve,
    pairs: &[(f64, f64)],
) -> Result<Dominance> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("empty winner-pair grid".to_string()));
    }
    const TOL: f64 = 1e-8;
    let mut a_weakly = true;
    let mut b_weakly = true;
    let mut a_strict = false;
    let mut b_strict = false;
    for &(si, sj) in pairs {
        let da = (curve_a.phi(si) - curve_a.phi(sj)).abs();
        let db = (curve_b.phi(si) - curve_b.phi(sj)).abs();
        if da > db + TOL {
            a_weakly = false;
        }
        if db > da + TOL {
            b_weakly = false;
        }
        if da < db - TOL {
            a_strict = true;
        }
        if db < da - TOL {
            b_strict = true;
        }
    }
    Ok(if a_weakly && a_strict {
        Dominance::Dominates
    } else if b_weakly && b_strict {
        Dominance::Dominated
    } else {
        Dominance::Incomparable
    })
}

/// Dominance of δ_a-pricing over δ_b-pricing on a sampled pair grid.
pub fn pairwise_dominance(
    market: &Market,
    delta_a: f64,
    delta_b: f64,
    pairs: &[(f64, f64)],
) -> Result<Dominance> {
    let ca = BidCurve::build(market, delta_a)?;
    let cb = BidCurve::build(market, delta_b)?;
    pairwise_dominance_from_curves(&ca, &cb, pairs)
}

/// Tensor grid of quantile pairs for dominance checks (any two distinct
/// signals can jointly win because k ≥ 2).
pub fn quantile_pair_grid(market: &Market, per_axis: usize) -> Vec<(f64, f64)> {
    let dist = market.dist();
    let qs: Vec<f64> = (0..per_axis)
        .map(|i| dist.quantile_unchecked((i as f64 + 0.5) / per_axis as f64))
        .collect();
    let mut pairs = Vec::with_capacity(per_axis * (per_axis - 1) / 2);
    for i in 0..qs.len() {
        for j in (i + 1)..qs.len() {
            pairs.push((qs[j], qs[i]));
        }
    }
    pairs
}

/// Prior-free and kind-specific bounds for (market.n, market.k, market.c).
pub fn theory_bounds(market: &Market) -> TheoryBounds {
    let c = market.c();
    let n = market.n() as f64;
    let k = market.k() as f64;
    let lb_distribution = match market.dist().kind() {
        crate::distributions::DistributionKind::Uniform { .. } => {
            Some(2.0 * n * (1.0 - c) / (2.0 * n - c * (n - 2.0)))
        }
        crate::distributions::DistributionKind::TruncatedExponential { .. } => {
            Some(2.0 * n * (1.0 - c) / (2.0 * n - c * (n - (k + 1.0))))
        }
        _ => None,
    };
    TheoryBounds {
        lb_logconcave: 1.0 - c,
        dominating_range_hi: (2.0 * (1.0 - c)).min(1.0),
        lb_distribution,
    }
}

/// Empirical variance of an outcome vector: the mean over ordered pairs of
/// (u_i − u_j)²/2. The aggregator behind WEV; satisfies Pigou–Dalton.
pub fn empirical_variance(utilities: &[f64]) -> f64 {
    let m = utilities.len() as f64;
    assert!(m >= 2.0, "need at least two utilities");
    let sum: f64 = utilities.iter().sum();
    let sum_sq: f64 = utilities.iter().map(|u| u * u).sum();
    (m * sum_sq - sum * sum) / (m * (m - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SignalDistribution;

    fn uniform_market(c: f64) -> Market {
        Market::new(3, 2, c, SignalDistribution::uniform(1.0).unwrap()).unwrap()
    }

    #[test]
    fn surplus_phi_cases() {
        let m = uniform_market(0.3);
        assert!((surplus_phi(&m, 0.0, 0.4).unwrap() - 0.7 * 0.4).abs() < 1e-14);
        let m1 = uniform_market(1.0);
        assert_eq!(surplus_phi(&m1, 0.0, 0.8).unwrap(), 0.0);
        // c=0, δ=1, s=1: 1 − β¹(1) = 1 − 1/3.
        let m0 = uniform_market(0.0);
        assert!((surplus_phi(&m0, 1.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn ex_post_utilities_private_uniform_price() {
        let m = uniform_market(0.0);
        let curve = BidCurve::build(&m, 0.0).unwrap();
        let out = ex_post_utilities(&curve, &[0.9, 0.5, 0.2]).unwrap();
        assert_eq!(out.winners, vec![0, 1]);
        assert!((out.utilities[0] - 0.7).abs() < 1e-12);
        assert!((out.utilities[1] - 0.3).abs() < 1e-12);
        assert_eq!(out.utilities[2], 0.0);
        assert!((out.clearing_bid - 0.2).abs() < 1e-12);
        assert!(ex_post_utilities(&curve, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn ex_post_utilities_pure_common_equalizes() {
        let m = uniform_market(1.0);
        let curve = BidCurve::build(&m, 0.0).unwrap();
        let out = ex_post_utilities(&curve, &[0.9, 0.4, 0.6]).unwrap();
        let w: Vec<f64> = out.winners.iter().map(|&i| out.utilities[i]).collect();
        assert!((w[0] - w[1]).abs() < 1e-12, "{w:?}");
    }

    #[test]
    fn winner_gaps_equal_phi_gaps() {
        let m = uniform_market(0.6);
        for &delta in &[0.0, 0.4, 1.0] {
            let curve = BidCurve::build(&m, delta).unwrap();
            let signals = [0.85, 0.55, 0.15];
            let out = ex_post_utilities(&curve, &signals).unwrap();
            let (i, j) = (out.winners[0], out.winners[1]);
            let gap = out.utilities[i] - out.utilities[j];
            let phi_gap = curve.phi(signals[i]) - curve.phi(signals[j]);
            assert!((gap - phi_gap).abs() < 1e-12, "delta={delta}");
        }
    }

    #[test]
    fn wev_pure_common_uniform_price_is_zero() {
        let m = uniform_market(1.0);
        let w = wev(&m, 0.0).unwrap();
        assert!(w <= 1e-10, "WEV={w}");
    }

    #[test]
    fn wev_uniform_price_private_closed_form() {
        // n=3, k=2, c=0, δ=0: the winner gap is s_(1) − s_(2) ~ Beta(1, 3),
        // so WEV = E[(s_(1) − s_(2))²]/2 = (3/80 + 1/16)/2 = 0.05.
        let m = uniform_market(0.0);
        let w = wev(&m, 0.0).unwrap();
        assert!((w - 0.05).abs() < 1e-9, "WEV={w}");
    }

    #[test]
    fn wev_payasbid_below_uniform_price_for_private_values() {
        let m = uniform_market(0.0);
        let w0 = wev(&m, 0.0).unwrap();
        let w1 = wev(&m, 1.0).unwrap();
        assert!(w1 < w0, "w0={w0}, w1={w1}");
    }

    #[test]
    fn meu_examples() {
        // Log-concave, c=0: slope ≤ 1 ≤ 1/δ for every δ ≤ 1.
        let m0 = uniform_market(0.0);
        for &delta in &[0.2, 0.6, 1.0] {
            let v = meu_verdict_for(&m0, delta).unwrap();
            assert!(v.holds, "c=0 delta={delta}: {v:?}");
        }
        // The boundary case: c=0.8, δ=0.3 fails with slope just above 2/3.
        let v = meu_verdict_for(&uniform_market(0.8), 0.3).unwrap();
        assert!(!v.holds, "{v:?}");
        assert!((0.665..=0.70).contains(&v.max_slope), "{v:?}");
        // Pure common value: the bound is 0, any positive slope fails.
        let v = meu_verdict_for(&uniform_market(1.0), 0.5).unwrap();
        assert!(!v.holds);
        // δ=0 holds trivially.
        let v = meu_verdict_for(&uniform_market(1.0), 0.0).unwrap();
        assert!(v.holds && v.margin.is_infinite());
    }

    #[test]
    fn meu_holds_iff_margin_nonnegative() {
        for &(c, delta) in &[(0.0, 1.0), (0.5, 0.4), (0.8, 0.3), (1.0, 0.5)] {
            let v = meu_verdict_for(&uniform_market(c), delta).unwrap();
            assert_eq!(v.holds, v.margin >= -MEU_TOLERANCE);
        }
    }

    #[test]
    fn dominance_equal_deltas_incomparable() {
        let m = uniform_market(0.5);
        let pairs = quantile_pair_grid(&m, 16);
        let d = pairwise_dominance(&m, 0.4, 0.4, &pairs).unwrap();
        assert_eq!(d, Dominance::Incomparable);
    }

    #[test]
    fn dominance_uniform_price_wins_at_pure_common() {
        let m = uniform_market(1.0);
        let pairs = quantile_pair_grid(&m, 16);
        for &delta in &[0.25, 0.5, 1.0] {
            let d = pairwise_dominance(&m, 0.0, delta, &pairs).unwrap();
            assert_eq!(d, Dominance::Dominates, "delta={delta}");
        }
    }

    #[test]
    fn dominance_diagonal_beats_lower_discrimination() {
        // Log-concave signals: δ = 1−c dominates any δ' < 1−c.
        let m = uniform_market(0.4);
        let pairs = quantile_pair_grid(&m, 16);
        for &db in &[0.0, 0.2, 0.45] {
            let d = pairwise_dominance(&m, 0.6, db, &pairs).unwrap();
            assert_eq!(d, Dominance::Dominates, "delta_b={db}");
        }
    }

    #[test]
    fn dominance_up_to_twice_private_share_beats_uniform() {
        let m = uniform_market(0.7);
        let pairs = quantile_pair_grid(&m, 16);
        // 2(1−c) = 0.6: anything in (0, 0.6] dominates uniform pricing.
        for &da in &[0.15, 0.35, 0.6] {
            let d = pairwise_dominance(&m, da, 0.0, &pairs).unwrap();
            assert_eq!(d, Dominance::Dominates, "delta_a={da}");
        }
    }

    #[test]
    fn theory_bounds_values() {
        let m1 = uniform_market(1.0);
        let b = theory_bounds(&m1);
        assert_eq!(b.lb_logconcave, 0.0);
        assert_eq!(b.dominating_range_hi, 0.0);
        assert!(b.lb_distribution.unwrap().abs() < 1e-15);

        let mh = uniform_market(0.5);
        let b = theory_bounds(&mh);
        assert!((b.lb_distribution.unwrap() - 3.0 / 5.5).abs() < 1e-12);
        assert!((b.dominating_range_hi - 1.0).abs() < 1e-15);

        // Large n: both bounds approach (1−c)/(1−c/2).
        let big = Market::new(1000, 2, 0.5, SignalDistribution::uniform(1.0).unwrap()).unwrap();
        let b = theory_bounds(&big);
        let limit = 0.5 / 0.75;
        assert!((b.lb_distribution.unwrap() - limit).abs() < 1e-3);

        let beta = Market::new(4, 2, 0.5, SignalDistribution::beta(0.5, 0.5).unwrap()).unwrap();
        assert!(theory_bounds(&beta).lb_distribution.is_none());
    }

    #[test]
    fn pigou_dalton_transfers_reduce_empirical_variance() {
        // Order-preserving rich-to-poor transfers strictly reduce the
        // pairwise aggregator.
        let base = vec![0.9, 0.4, 0.1, 0.55];
        let before = empirical_variance(&base);
        for &t in &[0.05, 0.1, 0.2] {
            let mut after = base.clone();
            after[0] -= t; // richest
            after[2] += t; // poorest; order preserved for t ≤ 0.2
            assert!(after[0] > after[2]);
            let ev = empirical_variance(&after);
            assert!(ev < before, "t={t}: {ev} vs {before}");
        }
        // Equal utilities aggregate to (numerically) zero.
        assert!(empirical_variance(&[0.3, 0.3, 0.3]).abs() < 1e-15);
    }
}
