//! Equilibrium bid functions for δ-mixed auctions.
//!
//! The uniform-price bid is β⁰(s) = V(s). For δ ∈ (0, 1] the symmetric
//! equilibrium is
//!
//!   β^δ(s) = V(s) − ∫₀^s V'(y) (G(y)/G(s))^{1/δ} dy,
//!
//! with G = G_k^{n−1} the law of the pivotal opponent signal, and derivative
//! β^δ′(s) = g(s) ∫₀^s V'(y) (G(y)/G(s))^{1/δ} dy / (δ G(s)).
//!
//! Everything is evaluated in quantile space, where the order-statistic
//! weights are fixed polynomials: with x = F(s), the shading integral
//! becomes ∫₀^x V_q'(u) exp((ln G̃(u) − ln G̃(x))/δ) du. All
//! (G(y)/G(s))^{1/δ} powers run through logs, so small δ cannot underflow.
//! Tabulated curves accumulate that integral cell by cell with the exact
//! decay recursion r(x_j) = r(x_{j−1})·e^{(ln G̃_{j−1} − ln G̃_j)/δ} + w_j,
//! and each segment weight w_j is integrated by parts so the integrand only
//! samples V_q itself — this survives quantile functions with near-jumps.

use crate::distributions::UniformOrderStat;
use crate::error::{Error, Result};
use crate::pchip::Pchip;
use crate::quad::{self, GL16};
use crate::valuation::Market;

/// G(s) below this is treated as the degenerate-left-tail regime: point
/// queries switch from the integrated-by-parts form to the ratio form.
const RATIO_FORM_LN_G: f64 = -18.420680743952367; // ln 1e-8

/// The kernel exp((ln G(u) − ln G(x))/δ) is dropped beyond this many decay
/// lengths; the truncated mass is below e^{−45} of the integrand scale.
/// Cutting the domain keeps the active layer visible to the panel rule for
/// arbitrarily small δ.
const CUT_EFOLDS: f64 = 45.0;

#[derive(Debug, Clone, Copy)]
pub struct BidCurveOptions {
    /// Chebyshev-spaced base cells in quantile space.
    pub base_cells: usize,
    /// Geometric refinement levels toward 0, 1, and interior breakpoints.
    pub edge_levels: u32,
    /// Relative tolerance for the per-segment quadrature.
    pub rel_tol: f64,
}

impl Default for BidCurveOptions {
    fn default() -> Self {
        BidCurveOptions { base_cells: 64, edge_levels: 30, rel_tol: 1e-10 }
    }
}

/// Tabulated equilibrium bid function for one (market, δ).
///
/// Nodes live on a quantile grid (16 Gauss points per cell) mapped through
/// the signal quantile function; point queries interpolate the monotone
/// tabulation. The node data double as a composite quadrature rule for the
/// equity integrals.
#[derive(Debug, Clone)]
pub struct BidCurve {
    market: Market,
    delta: f64,
    // Cell boundaries in quantile space (first 0, last 1).
    bounds: Vec<f64>,
    // Gauss nodes: quantiles, signals, and per-node quadrature weight in x.
    xs: Vec<f64>,
    ss: Vec<f64>,
    wx: Vec<f64>,
    // Node values.
    gs: Vec<f64>,     // G̃_k^{n−1}(x)
    bids: Vec<f64>,   // β^δ(s)
    slopes: Vec<f64>, // dβ^δ/ds
    phis: Vec<f64>,   // (1−c)s − δβ^δ(s)
    build_err: f64,
    bid_interp: Pchip,
    slope_interp: Pchip,
}

impl BidCurve {
    pub fn build(market: &Market, delta: f64) -> Result<BidCurve> {
        BidCurve::build_with(market, delta, BidCurveOptions::default())
    }

    pub fn build_with(market: &Market, delta: f64, opts: BidCurveOptions) -> Result<BidCurve> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "price-discrimination weight must lie in [0, 1], got {delta}"
            )));
        }
        let dist = market.dist();
        let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
        let bounds = build_bounds(opts.base_cells, opts.edge_levels, &dist.quantile_breakpoints());

        let cells = bounds.len() - 1;
        let n_nodes = cells * 16;
        let mut xs = Vec::with_capacity(n_nodes);
        let mut wx = Vec::with_capacity(n_nodes);
        for w in bounds.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let half = 0.5 * (w[1] - w[0]);
            for &(xi, wg) in GL16.iter() {
                xs.push(mid + half * xi);
                wx.push(half * wg);
            }
        }
        let ss: Vec<f64> = xs.iter().map(|&x| dist.quantile_unchecked(x)).collect();
        let vs: Vec<f64> = xs.iter().zip(&ss).map(|(&x, &s)| market.v_q(x, s)).collect();
        let ln_gs: Vec<f64> = xs.iter().map(|&x| os.ln_cdf(x)).collect();
        let gs: Vec<f64> = ln_gs.iter().map(|&l| l.exp()).collect();

        let v_scale = market.v_q(1.0, dist.support_hi()).abs().max(1.0);
        let mut bids = Vec::with_capacity(n_nodes);
        let mut slopes = Vec::with_capacity(n_nodes);
        let mut build_err = 0.0;

        if delta == 0.0 {
            for i in 0..n_nodes {
                bids.push(vs[i]);
                slopes.push(market.v_prime_q(xs[i], ss[i]));
            }
        } else {
            let mut shading = Vec::with_capacity(n_nodes);
            let mut r = 0.0_f64;
            let mut prev_x = 0.0_f64;
            let mut prev_ln_g = f64::NEG_INFINITY;
            for i in 0..n_nodes {
                let ln_g = ln_gs[i];
                let decay = ((prev_ln_g - ln_g) / delta).exp();
                let (w, err) = segment_weight(
                    market, &os, prev_x, xs[i], ln_g, delta, opts.rel_tol, v_scale,
                );
                r = r * decay + w;
                // The shading integral is nonnegative; clip roundoff.
                if r < 0.0 {
                    r = 0.0;
                }
                build_err += err;
                shading.push(r);
                bids.push(vs[i] - r);
                prev_x = xs[i];
                prev_ln_g = ln_g;
            }
            // Near the bottom of the support the shading r = V − β cancels to
            // the rounding floor of V, which would make slopes there pure
            // noise. r follows a power law in x in the left tail; extrapolate
            // it below the first node where it clears the noise floor.
            let noise_floor = 1e5 * f64::EPSILON * v_scale;
            if let Some(i0) = shading.iter().position(|&r| r > noise_floor) {
                let i1 = (i0 + 32).min(n_nodes - 1);
                if i1 > i0 && shading[i1] > shading[i0] {
                    let zeta = (shading[i1].ln() - shading[i0].ln())
                        / (xs[i1].ln() - xs[i0].ln());
                    for i in 0..i0 {
                        shading[i] = shading[i0] * (zeta * (xs[i] / xs[i0]).ln()).exp();
                    }
                }
            }
            for i in 0..n_nodes {
                let r = shading[i];
                let slope = if r > 0.0 {
                    dist.pdf(ss[i])
                        * (os.ln_pdf(xs[i]) - ln_gs[i] + r.ln() - delta.ln()).exp()
                } else {
                    0.0
                };
                slopes.push(slope);
            }
        }

        // Repair roundoff-level bid inversions so the tabulation is exactly
        // nondecreasing (quadrature noise on flat stretches can be ~1e-12).
        for i in 1..n_nodes {
            if bids[i] < bids[i - 1] {
                debug_assert!(
                    bids[i - 1] - bids[i] <= 1e-8 * (1.0 + bids[i].abs()),
                    "bid inversion beyond roundoff at node {i}"
                );
                bids[i] = bids[i - 1];
            }
        }

        let c = market.c();
        let phis: Vec<f64> = ss
            .iter()
            .zip(&bids)
            .map(|(&s, &b)| (1.0 - c) * s - delta * b)
            .collect();
        // Deduplicate signals that collapse under quantile plateaus before
        // building the monotone interpolants.
        let mut is_ = Vec::with_capacity(n_nodes);
        let mut ib = Vec::with_capacity(n_nodes);
        let mut isl = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            if is_.last().map_or(true, |&p: &f64| ss[i] > p + 1e-15 * (1.0 + p.abs())) {
                is_.push(ss[i]);
                ib.push(bids[i]);
                isl.push(slopes[i]);
            }
        }
        let bid_interp = Pchip::new(is_.clone(), ib);
        let slope_interp = Pchip::new(is_, isl);

        Ok(BidCurve {
            market: market.clone(),
            delta,
            bounds,
            xs,
            ss,
            wx,
            gs,
            bids,
            slopes,
            phis,
            build_err,
            bid_interp,
            slope_interp,
        })
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// β^δ(s); clamps to the tabulated limits at the support edges.
    pub fn bid(&self, s: f64) -> f64 {
        self.bid_interp.eval(s)
    }

    /// dβ^δ/ds at s.
    pub fn slope(&self, s: f64) -> f64 {
        self.slope_interp.eval(s)
    }

    /// Winner-utility kernel φ^δ(s) = (1−c)s − δβ^δ(s).
    pub fn phi(&self, s: f64) -> f64 {
        (1.0 - self.market.c()) * s - self.delta * self.bid(s)
    }

    /// Supremum of the bid slope over the node grid.
    pub fn max_slope(&self) -> f64 {
        self.slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Accumulated quadrature error estimate from the build.
    pub fn build_error(&self) -> f64 {
        self.build_err
    }

    /// Tabulated signal grid.
    pub fn grid(&self) -> &[f64] {
        &self.ss
    }

    /// Bid per grid point.
    pub fn values(&self) -> &[f64] {
        &self.bids
    }

    /// Analytic slope per grid point.
    pub fn slope_values(&self) -> &[f64] {
        &self.slopes
    }

    // Composite-quadrature view for the equity integrals.
    pub(crate) fn cell_bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub(crate) fn node_xs(&self) -> &[f64] {
        &self.xs
    }

    pub(crate) fn node_weights(&self) -> &[f64] {
        &self.wx
    }

    pub(crate) fn node_phis(&self) -> &[f64] {
        &self.phis
    }

    pub(crate) fn node_pivotal_cdf(&self) -> &[f64] {
        &self.gs
    }

}

// Cell boundaries: Chebyshev-spaced base grid with geometric refinement
// toward both edges and around interior quantile breakpoints.
fn build_bounds(base_cells: usize, edge_levels: u32, breakpoints: &[f64]) -> Vec<f64> {
    let base = base_cells.max(8);
    let mut b: Vec<f64> = (0..=base)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / base as f64).cos()))
        .collect();
    let first_width = b[1];
    for l in 1..=edge_levels {
        let w = first_width * 0.5f64.powi(l as i32);
        b.push(w);
        b.push(1.0 - w);
    }
    for &p in breakpoints {
        if !(0.0..1.0).contains(&p) || p == 0.0 {
            continue;
        }
        b.push(p);
        let gap = p.min(1.0 - p).min(1.0 / base as f64);
        for l in 1..=edge_levels {
            let w = gap * 0.5f64.powi(l as i32);
            b.push(p - w);
            b.push(p + w);
        }
    }
    b.retain(|&x| (0.0..=1.0).contains(&x));
    b.sort_by(|a, b| a.partial_cmp(b).unwrap());
    b.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    b
}

// Bisect for the quantile where ln G̃ crosses `tau_target` inside (lo, hi).
fn tau_cut(os: &UniformOrderStat, lo: f64, hi: f64, tau_target: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if os.ln_cdf(mid) < tau_target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

// w = ∫_a^b V_q'(u) exp((ln G̃(u) − ln G̃(b))/δ) du, integrated by parts so the
// quadrature only samples V_q:
// w = V_q(b) − V_q(a) E(a,b) − ∫_a^b V_q(u) (g̃/G̃)(u) E(u,b)/δ du.
fn segment_weight(
    market: &Market,
    os: &UniformOrderStat,
    a: f64,
    b: f64,
    ln_g_b: f64,
    delta: f64,
    rel_tol: f64,
    v_scale: f64,
) -> (f64, f64) {
    let dist = market.dist();
    let ln_delta = delta.ln();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let s = dist.quantile_unchecked(u);
        let vq = market.v_q(u, s);
        let ln_g = os.ln_cdf(u);
        let expo = os.ln_pdf(u) - ln_g + (ln_g - ln_g_b) / delta - ln_delta;
        vq * expo.exp()
    };
    // For small δ the kernel lives in a thin layer at b; shrink the domain to
    // the active decay lengths so the panel rule cannot miss it.
    let mut a_eff = a;
    if ln_g_b - os.ln_cdf(a) > CUT_EFOLDS * delta {
        a_eff = tau_cut(os, a, b, ln_g_b - CUT_EFOLDS * delta);
    }
    // The absolute floor is the per-segment share of the curve error budget;
    // anything tighter makes the panel rule chase quantile-level noise in
    // the deep tails where g̃/G̃ amplifies it.
    let r = quad::integrate(&integrand, a_eff, b, rel_tol, 1e-14 * v_scale);
    let vq_b = {
        let s = dist.quantile_unchecked(b);
        market.v_q(b, s)
    };
    let head = if a == 0.0 {
        vq_b
    } else {
        let s = dist.quantile_unchecked(a);
        let vq_a = market.v_q(a, s);
        let decay = ((os.ln_cdf(a) - ln_g_b) / delta).exp();
        vq_b - vq_a * decay
    };
    (head - r.value, r.abs_err)
}

// ---------------------------------------------------------------------------
// Point evaluations (independent quadrature, no tabulation).
// ---------------------------------------------------------------------------

/// β⁰(s) = V(s): the uniform-price equilibrium bid.
pub fn bid_uniform(market: &Market, s: f64) -> Result<f64> {
    market.v(s)
}

/// β^δ(s) by direct quadrature. Uses the integrated-by-parts form away from
/// the left tail and the ratio form where G(s) is tiny or the quantile
/// function has breakpoints.
pub fn bid_mixed(market: &Market, delta: f64, s: f64) -> Result<f64> {
    check_delta_s(market, delta, s)?;
    if delta == 0.0 {
        return market.v(s);
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    let ln_gx = os.ln_cdf(x);
    if ln_gx == f64::NEG_INFINITY {
        // Analytic limit at the bottom of the support.
        return Ok(market.v_q(0.0, 0.0));
    }
    if ln_gx < RATIO_FORM_LN_G || !dist.quantile_breakpoints().is_empty() {
        return bid_mixed_ratio(market, delta, s);
    }
    let v = market.v(s)?;
    // Integrate in signal space, where V' is bounded even when the density
    // vanishes toward the cutoff.
    let integrand = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let u = dist.cdf_unchecked(y);
        market.v_prime_q(u, y) * ((os.ln_cdf(u) - ln_gx) / delta).exp()
    };
    let lo = tau_cut(&os, 0.0, x, ln_gx - CUT_EFOLDS * delta);
    let y_lo = dist.quantile_unchecked(lo);
    let r = integrate_split(&integrand, y_lo, s, &[], 1e-11);
    Ok(v - r)
}

/// β^δ(s) via the ratio form
/// β^δ(s) = ∫₀^s V(y) g(y) G(y)^{1/δ−1} dy / (δ G(s)^{1/δ}),
/// whose integrand samples only V itself.
pub fn bid_mixed_ratio(market: &Market, delta: f64, s: f64) -> Result<f64> {
    check_delta_s(market, delta, s)?;
    if delta == 0.0 {
        return market.v(s);
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    let ln_gx = os.ln_cdf(x);
    if ln_gx == f64::NEG_INFINITY {
        return Ok(market.v_q(0.0, 0.0));
    }
    let ln_delta = delta.ln();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        let vq = market.v_q(u, su);
        let ln_g = os.ln_cdf(u);
        vq * (os.ln_pdf(u) - ln_g + (ln_g - ln_gx) / delta - ln_delta).exp()
    };
    let lo = tau_cut(&os, 0.0, x, ln_gx - CUT_EFOLDS * delta);
    let breaks = dist.quantile_breakpoints();
    // The ratio form integrates V g G^{1/δ−1}/G(s)^{1/δ}; the kernel layer at
    // x fully determines the value, so the cut loses only e^{−45} mass.
    Ok(integrate_split(&integrand, lo, x, &breaks, 1e-11))
}

/// dβ^δ/ds by the first-order condition β^δ′ = (V − β^δ) g / (δ G).
pub fn bid_slope(market: &Market, delta: f64, s: f64) -> Result<f64> {
    check_delta_s(market, delta, s)?;
    if delta == 0.0 {
        return market.v_prime(s);
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    if os.ln_cdf(x) == f64::NEG_INFINITY {
        // Limit slope at the bottom: V'(0⁺) p/(p + δ) with p = n − k.
        let p = (market.n() - market.k()) as f64;
        return Ok(market.v_prime(0.0)? * p / (p + delta));
    }
    let b = bid_mixed(market, delta, s)?;
    let v = market.v(s)?;
    let ratio = (os.ln_pdf(x) - os.ln_cdf(x)).exp();
    Ok(dist.pdf(s) * ratio * (v - b) / delta)
}

/// δ·∂β^δ/∂δ, the log-weighted shading integral
/// ∫₀^s V'(y) ln((G(y)/G(s))^{1/δ}) (G(y)/G(s))^{1/δ} dy,
/// evaluated by parts so only V is sampled; always ≤ 0, and → 0 as either
/// δ → 0 or s → 0.
pub fn bid_delta_sensitivity(market: &Market, delta: f64, s: f64) -> Result<f64> {
    check_delta_s(market, delta, s)?;
    if delta == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    let ln_gx = os.ln_cdf(x);
    if ln_gx == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_delta = delta.ln();
    // ∫ V_q' w e^w du = −∫ V_q (1 + w) e^w (g̃/G̃)/δ du with w = (ln G̃(u) − ln G̃(x))/δ;
    // the boundary terms vanish (w e^w → 0 both ways).
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        let vq = market.v_q(u, su);
        let ln_g = os.ln_cdf(u);
        let w = (ln_g - ln_gx) / delta;
        -vq * (1.0 + w) * (w + os.ln_pdf(u) - ln_g - ln_delta).exp()
    };
    let lo = tau_cut(&os, 0.0, x, ln_gx - (CUT_EFOLDS + 10.0) * delta);
    let breaks = dist.quantile_breakpoints();
    Ok(integrate_split(&integrand, lo, x, &breaks, 1e-11))
}

fn check_delta_s(market: &Market, delta: f64, s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "price-discrimination weight must lie in [0, 1], got {delta}"
        )));
    }
    let hi = market.dist().support_hi();
    if !(0.0..=hi).contains(&s) {
        return Err(Error::OutOfSupport { value: s, lo: 0.0, hi });
    }
    Ok(())
}

// Adaptive integration over [a, b] split at interior breakpoints.
fn integrate_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], rel: f64) -> f64 {
    let mut cuts: Vec<f64> = vec![a];
    for &p in breaks {
        if p > a && p < b {
            cuts.push(p);
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += quad::integrate(f, w[0], w[1], rel, 1e-14).value;
    }
    acc
}

// ---------------------------------------------------------------------------
// Reserve prices (pay-as-bid with participation threshold).
// ---------------------------------------------------------------------------

/// Participation threshold s_r: the signal at which the expected payoff of
/// entering at the reserve price r is zero,
/// ∫₀^{s_r} Ṽ(s_r, y) g(y) dy = r G(s_r).
///
/// Returns 0 when the reserve never binds (r ≤ V(0)); pure private values
/// give s_r = r exactly.
pub fn reserve_threshold(market: &Market, r: f64) -> Result<f64> {
    let hi = market.dist().support_hi();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "reserve price must be positive, got {r}"
        )));
    }
    if market.c() == 0.0 {
        if r >= hi {
            return Err(Error::NoSolution(format!(
                "reserve {r} at or above the top value {hi}"
            )));
        }
        return Ok(r);
    }
    if r <= market.v_q(0.0, 0.0) {
        return Ok(0.0);
    }
    let hi_x = 1.0 - 1e-12;
    if residual_at(market, hi_x, r) < 0.0 {
        return Err(Error::NoSolution(format!(
            "reserve {r} exceeds the achievable expected value range"
        )));
    }
    let mut lo = 1e-14;
    let mut hi_b = hi_x;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi_b);
        if residual_at(market, mid, r) < 0.0 {
            lo = mid;
        } else {
            hi_b = mid;
        }
        if hi_b - lo < 1e-15 {
            break;
        }
    }
    Ok(market.dist().quantile_unchecked(0.5 * (lo + hi_b)))
}

// ∫₀^{x_r} Ṽ(s_r, u) g̃(u) du − r G̃(x_r) in quantile space.
fn residual_at(market: &Market, x_r: f64, r: f64) -> f64 {
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1).expect("valid market");
    let s_r = dist.quantile_unchecked(x_r);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        market.v_tilde_q(s_r, u, su) * os.pdf(u)
    };
    let breaks = dist.quantile_breakpoints();
    let lhs = integrate_split(&integrand, 0.0, x_r, &breaks, 1e-11);
    lhs - r * os.cdf(x_r)
}

/// Defining-equation residual ∫₀^{s_r} Ṽ(s_r, y) g dy − r G(s_r) at a
/// candidate threshold; exposed so callers can verify roots.
pub fn reserve_residual(market: &Market, s_r: f64, r: f64) -> Result<f64> {
    let x_r = market.dist().cdf(s_r)?;
    Ok(residual_at(market, x_r, r))
}

/// Pay-as-bid equilibrium bid with reserve price r:
/// β_r(s) = [r G(s_r) + ∫_{s_r}^s V(y) g(y) dy] / G(s) for s ≥ s_r.
pub fn bid_payasbid_reserve(market: &Market, r: f64, s: f64) -> Result<f64> {
    let s_r = reserve_threshold(market, r)?;
    bid_payasbid_reserve_at(market, r, s_r, s)
}

/// Same, with a precomputed threshold.
pub fn bid_payasbid_reserve_at(market: &Market, r: f64, s_r: f64, s: f64) -> Result<f64> {
    check_delta_s(market, 1.0, s)?;
    if s < s_r {
        return Err(Error::NoSolution(format!(
            "signal {s} below the participation threshold {s_r}; bidder abstains"
        )));
    }
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x_r = dist.cdf(s_r)?;
    let x = dist.cdf(s)?;
    let g_x = os.cdf(x);
    if g_x <= 0.0 {
        return Ok(r);
    }
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let su = dist.quantile_unchecked(u);
        market.v_q(u, su) * os.pdf(u)
    };
    let breaks = dist.quantile_breakpoints();
    let tail = integrate_split(&integrand, x_r, x, &breaks, 1e-11);
    Ok((r * os.cdf(x_r) + tail) / g_x)
}

/// dβ_r/ds via the pay-as-bid first-order condition
/// β_r′(s) = g(s) (V(s) − β_r(s)) / G(s).
pub fn reserve_bid_slope(market: &Market, r: f64, s_r: f64, s: f64) -> Result<f64> {
    let b = bid_payasbid_reserve_at(market, r, s_r, s)?;
    let dist = market.dist();
    let os = UniformOrderStat::new(market.k(), market.n() - 1)?;
    let x = dist.cdf(s)?;
    if os.ln_cdf(x) == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let v = market.v(s)?;
    let ratio = (os.ln_pdf(x) - os.ln_cdf(x)).exp();
    Ok(dist.pdf(s) * ratio * (v - b))
}
