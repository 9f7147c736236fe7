//! The surplus-equitable direct mechanism.
//!
//! Winners are the top-k reported signals; a winner with signal s_i facing
//! first rejected signal y pays
//!
//!   p̃(s_i, y) = (1−c)(s_i − y − G(y)/g(y)) + V(y),
//!
//! with G = G_k^{n−1}, g = g_k^{n−1}. The (1−c)s_i term strips the
//! idiosyncratic surplus so all winners realize identical ex-post utility;
//! the uniform subsidy (1−c)(y + G/g) cancels it in expectation, and V(y)
//! prices the item like a second-price rule. Payments can be negative
//! (windfall subsidies) when the first rejected signal is high.

use crate::distributions::UniformOrderStat;
use crate::error::{Error, Result};
use crate::quad;
use crate::valuation::Market;

/// Outcome of the equitable mechanism for one signal profile.
#[derive(Debug, Clone)]
pub struct MechanismResult {
    /// Winning bidder indices, ascending.
    pub winners: Vec<usize>,
    /// Per-bidder transfer; negative entries are subsidies, losers pay 0.
    pub payments: Vec<f64>,
    /// Per-bidder realized surplus; all winners coincide.
    pub utilities: Vec<f64>,
    /// Sum of payments (the mechanism does not enforce budget balance).
    pub budget: f64,
}

// Reporting clamp for the hazard term: beyond this quantile g vanishes for
// bounded densities and the subsidy diverges; such draws are vanishingly
// rare and the payment is truncated there.
const HAZARD_CLAMP_QUANTILE: f64 = 1.0 - 1e-9;

/// Equitable payment of a winner with signal `s_i` against first rejected
/// signal `y`; zero when `s_i ≤ y` (no win).
pub fn equitable_payment(market: &Market, s_i: f64, y: f64) -> Result<f64> {
    let hi = market.dist().support_hi();
    for &v in &[s_i, y] {
        if !(0.0..=hi).contains(&v) {
            return Err(Error::OutOfSupport { value: v, lo: 0.0, hi });
        }
    }
    if s_i <= y {
        return Ok(0.0);
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let c = market.c();
    let x = dist.cdf(y)?;
    let v_at_y = market.v_q(x, y);
    let hazard = if c == 1.0 {
        0.0 // multiplied by 1−c = 0 below; avoid the edge-of-support division
    } else {
        let y_eff = y.min(dist.quantile_unchecked(HAZARD_CLAMP_QUANTILE));
        let x_eff = dist.cdf(y_eff)?;
        if x_eff == 0.0 {
            0.0 // G/g → 0 at the bottom of the support
        } else {
            let f = dist.pdf(y_eff);
            if f <= 0.0 {
                return Err(Error::DistributionContract(format!(
                    "density vanishes at interior point {y_eff}"
                )));
            }
            (os.ln_cdf(x_eff) - os.ln_pdf(x_eff)).exp() / f
        }
    };
    Ok((1.0 - c) * (s_i - y - hazard) + v_at_y)
}

/// Run the mechanism on a reported profile: top-k signals win (ties broken
/// by index) and pay the equitable payment against the first rejected signal.
pub fn equitable_outcome(market: &Market, signals: &[f64]) -> Result<MechanismResult> {
    let n = market.n();
    let k = market.k();
    if signals.len() != n {
        return Err(Error::WrongLength { expected: n, got: signals.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| signals[b].partial_cmp(&signals[a]).unwrap().then(a.cmp(&b)));
    let y = signals[order[k]];
    let mut winners: Vec<usize> = order[..k].to_vec();
    winners.sort_unstable();
    let mut payments = vec![0.0; n];
    let mut utilities = vec![0.0; n];
    for &i in &winners {
        payments[i] = equitable_payment(market, signals[i], y)?;
        utilities[i] = market.value_ex_post(signals, i)? - payments[i];
    }
    let budget = payments.iter().sum();
    Ok(MechanismResult { winners, payments, utilities, budget })
}

/// Interim expected payment P̃(s) = ∫₀^s V(y) g(y) dy: the idiosyncratic and
/// subsidy terms cancel in expectation, leaving the second-price component.
pub fn interim_expected_payment(market: &Market, s: f64) -> Result<f64> {
    let hi = market.dist().support_hi();
    if !(0.0..=hi).contains(&s) {
        return Err(Error::OutOfSupport { value: s, lo: 0.0, hi });
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    let integrand = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        market.v_q(u, su) * os.pdf(u)
    };
    let breaks = dist.quantile_breakpoints();
    let mut cuts = vec![0.0];
    cuts.extend(breaks.iter().copied().filter(|&p| p > 0.0 && p < x));
    cuts.push(x);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += quad::integrate(&integrand, w[0], w[1], 1e-11, 1e-14).value;
    }
    Ok(acc)
}

/// Interim utility of holding signal `s` while reporting `s_hat`:
/// U(s, ŝ) = ∫₀^{ŝ} (Ṽ(s, y) − Ṽ(y, y)) g(y) dy.
pub fn interim_utility(market: &Market, s: f64, s_hat: f64) -> Result<f64> {
    Ok(truthful_utility(market, s)? + report_gain(market, s, s_hat)?)
}

// U(s, s) by direct quadrature.
fn truthful_utility(market: &Market, s: f64) -> Result<f64> {
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    let integrand = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        (market.v_tilde_q(s, u, su) - market.v_q(u, su)) * os.pdf(u)
    };
    Ok(quad::integrate(&integrand, 0.0, x, 1e-11, 1e-14).value)
}

/// U(s, ŝ) − U(s, s) = ∫_{F(s)}^{F(ŝ)} (Ṽ(s, y) − V(y)) g(y) dy, which is
/// never positive because the integrand changes sign exactly at y = s.
pub fn report_gain(market: &Market, s: f64, s_hat: f64) -> Result<f64> {
    let hi = market.dist().support_hi();
    for &v in &[s, s_hat] {
        if !(0.0..=hi).contains(&v) {
            return Err(Error::OutOfSupport { value: v, lo: 0.0, hi });
        }
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x_s = dist.cdf(s)?;
    let x_hat = dist.cdf(s_hat)?;
    if x_s == x_hat {
        return Ok(0.0);
    }
    let integrand = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        (market.v_tilde_q(s, u, su) - market.v_q(u, su)) * os.pdf(u)
    };
    let (lo, hi_x, sign) = if x_hat > x_s { (x_s, x_hat, 1.0) } else { (x_hat, x_s, -1.0) };
    Ok(sign * quad::integrate(&integrand, lo, hi_x, 1e-11, 1e-15).value)
}

/// Max misreport gain over a (signal, report) grid; nonpositive up to
/// discretization for the incentive-compatible mechanism.
pub fn ic_audit(market: &Market, signals: &[f64], reports: &[f64]) -> Result<f64> {
    let mut max_gain = f64::NEG_INFINITY;
    for &s in signals {
        for &s_hat in reports {
            max_gain = max_gain.max(report_gain(market, s, s_hat)?);
        }
    }
    Ok(max_gain)
}
