//! Signal priors, truncated moments, order-statistic laws, and log-concavity
//! diagnostics.
//!
//! All shipped distributions live on a compact support [0, s̄]: kinds with
//! unbounded parents (exponential, normal) are truncated at a cutoff chosen
//! so the discarded mass is below 1e-10. Besides the pointwise cdf/pdf and
//! quantile, each kind exposes closed-form truncated means E[s | s ≤ y] and
//! E[s | s ≥ y]; these sit inside the innermost integrals of the equilibrium
//! machinery and must be cheap and stable down to the support edges.

use crate::error::{Error, Result};
use crate::quad;
use crate::special;

/// Default truncation: parent mass beyond the cutoff is below this.
pub const TRUNCATION_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    /// Uniform on [0, hi].
    Uniform { hi: f64 },
    /// Exponential with the given rate, truncated to [0, cutoff].
    TruncatedExponential { rate: f64, cutoff: f64 },
    /// Normal(mean, std) truncated to [0, cutoff].
    TruncatedNormal { mean: f64, std: f64, cutoff: f64 },
    /// Beta(alpha, beta) on [0, 1].
    Beta { alpha: f64, beta: f64 },
    /// Bernoulli-plus-perturbation signal on [0, 2]: the quantile function is
    /// F⁻¹(x) = 1{x ≥ ε} + γ_η(x) with
    /// γ_η(x) = 1 − (1 − x/ε)^η for x < ε and 1 − (1 − (x−ε)/(1−ε))^η above.
    Counterexample { epsilon: f64, eta: f64 },
}

// Cached standardized quantities for the truncated normal.
#[derive(Debug, Clone, PartialEq)]
struct NormCache {
    alpha: f64,     // (0 − μ)/σ
    beta_z: f64,    // (cutoff − μ)/σ
    cdf_alpha: f64, // Φ(α)
    z_norm: f64,    // Φ(β) − Φ(α)
    pdf_alpha: f64, // φ(α)
    pdf_beta: f64,  // φ(β)
    sf_beta: f64,   // 1 − Φ(β), kept separately for tail accuracy
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalDistribution {
    kind: DistributionKind,
    support_hi: f64,
    mean: f64,
    norm: Option<NormCache>,
}

impl SignalDistribution {
    pub fn uniform(hi: f64) -> Result<Self> {
        if !(hi > 0.0) || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform upper support must be positive and finite, got {hi}"
            )));
        }
        Ok(Self {
            kind: DistributionKind::Uniform { hi },
            support_hi: hi,
            mean: hi / 2.0,
            norm: None,
        })
    }

    /// Exponential(rate) truncated at `cutoff`; the default cutoff leaves
    /// parent mass below [`TRUNCATION_MASS`] outside the support.
    pub fn truncated_exponential(rate: f64, cutoff: Option<f64>) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        let cutoff = cutoff.unwrap_or(-TRUNCATION_MASS.ln() / rate);
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive and finite, got {cutoff}"
            )));
        }
        let kind = DistributionKind::TruncatedExponential { rate, cutoff };
        let mean = {
            // E[s] on [0, H]: 1/λ − H e^{−λH}/(1 − e^{−λH}).
            let u = rate * cutoff;
            1.0 / rate - cutoff * (-u).exp() / (-(-u).exp_m1())
        };
        Ok(Self { kind, support_hi: cutoff, mean, norm: None })
    }

    /// Normal(mean, std) truncated to [0, cutoff]; the default cutoff is the
    /// parent quantile leaving [`TRUNCATION_MASS`] in the upper tail.
    pub fn truncated_normal(mean: f64, std: f64, cutoff: Option<f64>) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normal parameters invalid: mean={mean}, std={std}"
            )));
        }
        let cutoff = cutoff.unwrap_or_else(|| mean + std * special::norm_quantile(1.0 - TRUNCATION_MASS));
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive and finite, got {cutoff}"
            )));
        }
        let alpha = (0.0 - mean) / std;
        let beta_z = (cutoff - mean) / std;
        let cdf_alpha = special::norm_cdf(alpha);
        let z_norm = special::norm_cdf(beta_z) - cdf_alpha;
        if z_norm <= 0.0 {
            return Err(Error::InvalidParameter(
                "truncation window carries no mass".to_string(),
            ));
        }
        let cache = NormCache {
            alpha,
            beta_z,
            cdf_alpha,
            z_norm,
            pdf_alpha: special::norm_pdf(alpha),
            pdf_beta: special::norm_pdf(beta_z),
            sf_beta: special::norm_sf(beta_z),
        };
        let m = mean + std * (cache.pdf_alpha - cache.pdf_beta) / z_norm;
        Ok(Self {
            kind: DistributionKind::TruncatedNormal { mean, std, cutoff },
            support_hi: cutoff,
            mean: m,
            norm: Some(cache),
        })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta shapes must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self {
            kind: DistributionKind::Beta { alpha, beta },
            support_hi: 1.0,
            mean: alpha / (alpha + beta),
            norm: None,
        })
    }

    /// The near-two-point signal distribution on [0, 2]: mass ε below 1 and
    /// 1 − ε above, smoothed by a Beta(1, 1/η) perturbation.
    pub fn counterexample(epsilon: f64, eta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {eta}"
            )));
        }
        let mean = (1.0 - epsilon) + eta / (1.0 + eta);
        Ok(Self {
            kind: DistributionKind::Counterexample { epsilon, eta },
            support_hi: 2.0,
            mean,
            norm: None,
        })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    /// Upper support endpoint s̄.
    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// F(s); rejects negative signals, saturates at 1 beyond the support.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::OutOfSupport { value: s, lo: 0.0, hi: self.support_hi });
        }
        if s >= self.support_hi {
            return Ok(1.0);
        }
        Ok(self.cdf_unchecked(s))
    }

    pub(crate) fn cdf_unchecked(&self, s: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { hi } => (s / hi).clamp(0.0, 1.0),
            DistributionKind::TruncatedExponential { rate, cutoff } => {
                let z = -(-rate * cutoff).exp_m1();
                (-(-rate * s).exp_m1() / z).clamp(0.0, 1.0)
            }
            DistributionKind::TruncatedNormal { mean, std, .. } => {
                let c = self.norm.as_ref().expect("cache");
                let z = (s - mean) / std;
                ((special::norm_cdf(z) - c.cdf_alpha) / c.z_norm).clamp(0.0, 1.0)
            }
            DistributionKind::Beta { alpha, beta } => {
                if alpha == 0.5 && beta == 0.5 {
                    // Arcsine law: F(s) = (2/π) asin(√s).
                    2.0 / std::f64::consts::PI * s.sqrt().asin()
                } else {
                    special::betai(alpha, beta, s)
                }
            }
            DistributionKind::Counterexample { epsilon, eta } => {
                if s <= 1.0 {
                    // ε (1 − (1−s)^{1/η})
                    epsilon * (-((1.0 - s).ln() / eta).exp_m1())
                } else {
                    epsilon + (1.0 - epsilon) * (-((2.0 - s).ln() / eta).exp_m1())
                }
            }
        }
    }

    /// Density f(s); zero outside [0, s̄].
    pub fn pdf(&self, s: f64) -> f64 {
        if !(0.0..=self.support_hi).contains(&s) {
            return 0.0;
        }
        match self.kind {
            DistributionKind::Uniform { hi } => 1.0 / hi,
            DistributionKind::TruncatedExponential { rate, cutoff } => {
                let z = -(-rate * cutoff).exp_m1();
                rate * (-rate * s).exp() / z
            }
            DistributionKind::TruncatedNormal { mean, std, .. } => {
                let c = self.norm.as_ref().expect("cache");
                special::norm_pdf((s - mean) / std) / (std * c.z_norm)
            }
            DistributionKind::Beta { alpha, beta } => {
                if s == 0.0 || s == 1.0 {
                    // Shape < 1 diverges at the edge; report the limit consistently.
                    if (s == 0.0 && alpha < 1.0) || (s == 1.0 && beta < 1.0) {
                        return f64::INFINITY;
                    }
                }
                ((alpha - 1.0) * s.ln() + (beta - 1.0) * (1.0 - s).ln()
                    - special::ln_beta(alpha, beta))
                .exp()
            }
            DistributionKind::Counterexample { epsilon, eta } => {
                if s < 1.0 {
                    (epsilon / eta) * ((1.0 / eta - 1.0) * (1.0 - s).ln()).exp()
                } else {
                    ((1.0 - epsilon) / eta) * ((1.0 / eta - 1.0) * (2.0 - s).ln()).exp()
                }
            }
        }
    }

    /// F⁻¹(x); degenerate queries x = 0 and x = 1 return the support
    /// endpoints exactly.
    pub fn quantile(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidProbability(x));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if x == 1.0 {
            return Ok(self.support_hi);
        }
        Ok(self.quantile_unchecked(x))
    }

    pub(crate) fn quantile_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { hi } => hi * x,
            DistributionKind::TruncatedExponential { rate, cutoff } => {
                let z = -(-rate * cutoff).exp_m1();
                -(-x * z).ln_1p() / rate
            }
            DistributionKind::TruncatedNormal { mean, std, .. } => {
                let c = self.norm.as_ref().expect("cache");
                mean + std * special::norm_quantile(c.cdf_alpha + x * c.z_norm)
            }
            DistributionKind::Beta { alpha, beta } => {
                if alpha == 0.5 && beta == 0.5 {
                    let t = (std::f64::consts::FRAC_PI_2 * x).sin();
                    t * t
                } else {
                    special::betai_inv(alpha, beta, x)
                }
            }
            DistributionKind::Counterexample { epsilon, eta } => {
                let step = if x >= epsilon { 1.0 } else { 0.0 };
                step + gamma_eta(epsilon, eta, x)
            }
        }
    }

    /// E[s | s ≤ y] for interior y.
    pub fn truncated_mean_below(&self, y: f64) -> Result<f64> {
        self.check_interior(y)?;
        Ok(self.mean_below_q(self.cdf_unchecked(y), y))
    }

    /// E[s | s ≥ y] for interior y.
    pub fn truncated_mean_above(&self, y: f64) -> Result<f64> {
        self.check_interior(y)?;
        Ok(self.mean_above_q(self.cdf_unchecked(y), y))
    }

    fn check_interior(&self, y: f64) -> Result<()> {
        if !(y > 0.0 && y < self.support_hi) {
            return Err(Error::OutOfSupport { value: y, lo: 0.0, hi: self.support_hi });
        }
        Ok(())
    }

    /// E[s | s ≤ y] given x = F(y); the pair (x, y) keeps every kind stable
    /// near both support edges.
    pub(crate) fn mean_below_q(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.mean;
        }
        match self.kind {
            DistributionKind::Uniform { .. } => y / 2.0,
            DistributionKind::TruncatedExponential { rate, .. } => {
                let u = rate * y;
                // (1/λ)(1 − u e^{−u}/(1 − e^{−u}))
                (1.0 - u * (-u).exp() / (-(-u).exp_m1())) / rate
            }
            DistributionKind::TruncatedNormal { mean, std, .. } => {
                let c = self.norm.as_ref().expect("cache");
                let zy = (y - mean) / std;
                if zy - c.alpha < 1e-4 {
                    // Narrow window: two-term local expansion around 0.
                    return y / 2.0 + y * y * (mean / (std * std)) / 12.0;
                }
                mean - std * (special::norm_pdf(zy) - c.pdf_alpha) / (x * c.z_norm)
            }
            DistributionKind::Beta { alpha, beta } => {
                self.mean * special::betai(alpha + 1.0, beta, y) / x
            }
            DistributionKind::Counterexample { .. } => self.quantile_antiderivative(x) / x,
        }
    }

    /// E[s | s ≥ y] given x = F(y).
    pub(crate) fn mean_above_q(&self, x: f64, y: f64) -> f64 {
        if x >= 1.0 {
            return self.support_hi;
        }
        if x <= 0.0 {
            return self.mean;
        }
        let hi = self.support_hi;
        // Quantiles of grid points next to 1 can round to the support top.
        if y >= hi {
            return hi;
        }
        match self.kind {
            DistributionKind::Uniform { .. } => (y + hi) / 2.0,
            DistributionKind::TruncatedExponential { rate, cutoff } => {
                // H + 1/λ + (y − H)/(1 − e^{−λ(H−y)})
                let u = rate * (cutoff - y);
                cutoff + 1.0 / rate + (y - cutoff) / (-(-u).exp_m1())
            }
            DistributionKind::TruncatedNormal { mean, std, .. } => {
                let c = self.norm.as_ref().expect("cache");
                let zy = (y - mean) / std;
                if c.beta_z - zy < 1e-4 {
                    let w = hi - y;
                    let dlnf = -(hi - mean) / (std * std);
                    return hi - w / 2.0 + w * w * dlnf / 12.0;
                }
                // Survival-function difference keeps the deep upper tail
                // accurate where 1 − x cancels.
                let tail = special::norm_sf(zy) - c.sf_beta;
                mean + std * (special::norm_pdf(zy) - c.pdf_beta) / tail
            }
            DistributionKind::Beta { alpha, beta } => {
                // mean · I_{1−y}(b, a+1) / I_{1−y}(b, a), both tails computed directly.
                self.mean * special::betai(beta, alpha + 1.0, 1.0 - y)
                    / special::betai(beta, alpha, 1.0 - y)
            }
            DistributionKind::Counterexample { epsilon, eta } => {
                if x >= epsilon {
                    // ∫ₓ¹ F⁻¹ = 2(1−x) − (1−ε)/(1+η)·((1−x)/(1−ε))^{1+η}
                    // divided by 1−x; stable all the way into the top tail.
                    2.0 - ((1.0 - x) / (1.0 - epsilon)).powf(eta) / (1.0 + eta)
                } else {
                    (self.mean - self.quantile_antiderivative(x)) / (1.0 - x)
                }
            }
        }
    }

    // ∫₀ˣ F⁻¹(u) du for the counterexample kind (closed form).
    fn quantile_antiderivative(&self, x: f64) -> f64 {
        let DistributionKind::Counterexample { epsilon, eta } = self.kind else {
            unreachable!("only used for the counterexample kind")
        };
        let e = epsilon;
        let step = (x - e).max(0.0);
        let gamma_int = if x <= e {
            x + e / (1.0 + eta) * ((1.0 + eta) * (-x / e).ln_1p()).exp_m1()
        } else {
            let at_e = e * eta / (1.0 + eta);
            let rest = (x - e)
                + (1.0 - e) / (1.0 + eta)
                    * ((1.0 + eta) * (-(x - e) / (1.0 - e)).ln_1p()).exp_m1();
            at_e + rest
        };
        step + gamma_int
    }

    /// Interior quantile positions where the density changes character;
    /// quadrature grids refine around these.
    pub(crate) fn quantile_breakpoints(&self) -> Vec<f64> {
        match self.kind {
            DistributionKind::Counterexample { epsilon, .. } => vec![epsilon],
            _ => Vec::new(),
        }
    }
}

// γ_η(x), the perturbation part of the counterexample quantile. Each piece
// is 1 − (1 − t)^η; near t = 1 the residual 1 − t is formed by an exact
// subtraction so the power keeps full relative accuracy.
fn gamma_eta(epsilon: f64, eta: f64, x: f64) -> f64 {
    // t is the position inside the piece, width its length.
    let piece = |t: f64, width: f64| -> f64 {
        if t < 0.5 * width {
            -(eta * (-(t / width)).ln_1p()).exp_m1()
        } else {
            -(eta * ((width - t) / width).ln()).exp_m1()
        }
    };
    if x < epsilon {
        piece(x, epsilon)
    } else {
        piece(x - epsilon, 1.0 - epsilon)
    }
}

// ---------------------------------------------------------------------------
// Order statistics of the m-th highest of n iid draws.
// ---------------------------------------------------------------------------

fn check_rank(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n || n == 0 {
        return Err(Error::InvalidRank { m, n });
    }
    Ok(())
}

/// G_m^n(y) = Σ_{j=0}^{m−1} C(n, j) F(y)^{n−j} (1 − F(y))^j: the cdf of the
/// m-th highest of n iid signals.
pub fn order_stat_cdf(m: usize, n: usize, dist: &SignalDistribution, y: f64) -> Result<f64> {
    check_rank(m, n)?;
    let x = dist.cdf(y)?;
    Ok(uniform_order_cdf(m, n, x))
}

/// g_m^n(y) = n!/((n−m)!(m−1)!) F^{n−m} (1−F)^{m−1} f(y).
pub fn order_stat_pdf(m: usize, n: usize, dist: &SignalDistribution, y: f64) -> Result<f64> {
    check_rank(m, n)?;
    let x = dist.cdf(y)?;
    Ok(uniform_order_pdf(m, n, x) * dist.pdf(y))
}

/// Order-statistic cdf in quantile space (uniform signals).
pub fn uniform_order_cdf(m: usize, n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    uniform_order_ln_cdf(m, n, x).exp()
}

/// ln G_m^n(x) for uniform signals, stable for x near 0.
pub fn uniform_order_ln_cdf(m: usize, n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let lx = x.ln();
    let l1x = (-x).ln_1p();
    // log-sum-exp over the m binomial terms.
    let mut max_term = f64::NEG_INFINITY;
    let mut terms = [0.0f64; 64];
    debug_assert!(m <= 64, "ranks beyond 64 are not supported");
    for (j, slot) in terms.iter_mut().enumerate().take(m) {
        let jf = j as f64;
        let nf = n as f64;
        let ln_c = special::ln_gamma(nf + 1.0)
            - special::ln_gamma(jf + 1.0)
            - special::ln_gamma(nf - jf + 1.0);
        let t = ln_c + (nf - jf) * lx + jf * l1x;
        *slot = t;
        if t > max_term {
            max_term = t;
        }
    }
    let sum: f64 = terms[..m].iter().map(|t| (t - max_term).exp()).sum();
    max_term + sum.ln()
}

/// Order-statistic density in quantile space (uniform signals).
pub fn uniform_order_pdf(m: usize, n: usize, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let (mf, nf) = (m as f64, n as f64);
    let ln_c = special::ln_gamma(nf + 1.0)
        - special::ln_gamma(nf - mf + 1.0)
        - special::ln_gamma(mf);
    if x == 0.0 {
        return if m == n { nf } else { 0.0 };
    }
    if x == 1.0 {
        return if m == 1 { nf } else { 0.0 };
    }
    (ln_c + (nf - mf) * x.ln() + (mf - 1.0) * (-x).ln_1p()).exp()
}

/// Order-statistic evaluator in quantile space with cached log-binomials,
/// for a fixed rank m of n draws. Sits in the innermost quadrature loops.
#[derive(Debug, Clone)]
pub struct UniformOrderStat {
    m: usize,
    n: usize,
    ln_binom: Vec<f64>, // ln C(n, j) for j = 0..m-1
    ln_pdf_coef: f64,   // ln n!/((n−m)!(m−1)!)
}

impl UniformOrderStat {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        check_rank(m, n)?;
        let nf = n as f64;
        let ln_binom = (0..m)
            .map(|j| {
                let jf = j as f64;
                special::ln_gamma(nf + 1.0)
                    - special::ln_gamma(jf + 1.0)
                    - special::ln_gamma(nf - jf + 1.0)
            })
            .collect();
        let mf = m as f64;
        let ln_pdf_coef = special::ln_gamma(nf + 1.0)
            - special::ln_gamma(nf - mf + 1.0)
            - special::ln_gamma(mf);
        Ok(UniformOrderStat { m, n, ln_binom, ln_pdf_coef })
    }

    /// ln G_m^n(x); −∞ at x = 0.
    pub fn ln_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if x >= 1.0 {
            return 0.0;
        }
        let lx = x.ln();
        let l1x = (-x).ln_1p();
        let nf = self.n as f64;
        let mut max_t = f64::NEG_INFINITY;
        let mut ts = [0.0f64; 64];
        for (j, slot) in ts.iter_mut().enumerate().take(self.m) {
            let jf = j as f64;
            let t = self.ln_binom[j] + (nf - jf) * lx + jf * l1x;
            *slot = t;
            max_t = max_t.max(t);
        }
        let sum: f64 = ts[..self.m].iter().map(|t| (t - max_t).exp()).sum();
        max_t + sum.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.ln_cdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let (mf, nf) = (self.m as f64, self.n as f64);
        self.ln_pdf_coef + (nf - mf) * x.ln() + (mf - 1.0) * (-x).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        uniform_order_pdf(self.m, self.n, x)
    }
}

// ---------------------------------------------------------------------------
// Log-concavity diagnostics.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LogConcavityReport {
    /// Most negative curvature estimate of log f over the grid.
    pub min_second_diff: f64,
    /// Most positive curvature estimate; the verdict hinges on this.
    pub max_second_diff: f64,
    /// True when log f is concave on the grid within tolerance.
    pub log_concave: bool,
    pub tolerance: f64,
}

/// Default diagnostic grid: quantile-spaced interior points, so the probe
/// follows the probability mass.
pub fn default_log_concavity_grid(dist: &SignalDistribution, points: usize) -> Vec<f64> {
    let n = points.max(8);
    (1..=n)
        .map(|i| dist.quantile_unchecked(i as f64 / (n as f64 + 1.0)))
        .collect()
}

/// Numerical log-concavity verdict: second divided differences of log f on a
/// strictly increasing interior grid must be non-positive within tolerance.
pub fn log_concavity_report(
    dist: &SignalDistribution,
    grid: &[f64],
) -> Result<LogConcavityReport> {
    if grid.len() < 3 {
        return Err(Error::InvalidParameter(
            "log-concavity grid needs at least 3 points".to_string(),
        ));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "log-concavity grid must be strictly increasing".to_string(),
        ));
    }
    if grid[0] <= 0.0 || *grid.last().unwrap() >= dist.support_hi() {
        return Err(Error::OutOfSupport {
            value: if grid[0] <= 0.0 { grid[0] } else { *grid.last().unwrap() },
            lo: 0.0,
            hi: dist.support_hi(),
        });
    }
    let lnf: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let f = dist.pdf(s);
            if f > 0.0 {
                Ok(f.ln())
            } else {
                Err(Error::DistributionContract(format!(
                    "density vanishes at grid point {s}"
                )))
            }
        })
        .collect::<Result<_>>()?;

    let mut min_d = f64::INFINITY;
    let mut max_d = f64::NEG_INFINITY;
    for i in 1..grid.len() - 1 {
        let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
        // 2 × second divided difference ≈ (log f)''.
        let dd = 2.0
            * ((lnf[i + 1] - lnf[i]) / (x2 - x1) - (lnf[i] - lnf[i - 1]) / (x1 - x0))
            / (x2 - x0);
        min_d = min_d.min(dd);
        max_d = max_d.max(dd);
    }
    let tolerance = 1e-9 * (1.0 + max_d.abs().max(min_d.abs()));
    Ok(LogConcavityReport {
        min_second_diff: min_d,
        max_second_diff: max_d,
        log_concave: max_d <= tolerance,
        tolerance,
    })
}

/// Quadrature fallback for E[s | s ≤ y]: ∫₀^y t f(t) dt / F(y).
/// Slower than the closed forms; used as an independent cross-check.
pub fn truncated_mean_below_quadrature(dist: &SignalDistribution, y: f64) -> Result<f64> {
    let f = dist.cdf(y)?;
    let num = quad::integrate(&|t| t * dist.pdf(t), 0.0, y, 1e-11, 1e-14);
    Ok(num.value / f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni() -> SignalDistribution {
        SignalDistribution::uniform(1.0).unwrap()
    }

    #[test]
    fn cdf_uniform_identity() {
        let d = uni();
        assert_eq!(d.cdf(0.5).unwrap(), 0.5);
        assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        assert!(d.cdf(-0.1).is_err());
    }

    #[test]
    fn cdf_counterexample_at_one_equals_epsilon() {
        // F(1) = ε(1 − (1−1)^{1/η}) = ε.
        let d = SignalDistribution::counterexample(0.02, 0.5).unwrap();
        assert!((d.cdf(1.0).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn quantile_uniform_and_bounds() {
        let d = uni();
        assert_eq!(d.quantile(0.25).unwrap(), 0.25);
        assert_eq!(d.quantile(0.0).unwrap(), 0.0);
        assert_eq!(d.quantile(1.0).unwrap(), 1.0);
        assert!(d.quantile(-0.01).is_err());
        assert!(d.quantile(1.01).is_err());
    }

    #[test]
    fn quantile_counterexample_closed_form() {
        let (eps, eta) = (0.1, 0.3);
        let d = SignalDistribution::counterexample(eps, eta).unwrap();
        // F⁻¹(ε) = 1 + γ_η(ε) = 1 + 0.
        assert!((d.quantile(eps).unwrap() - 1.0).abs() < 1e-14);
        // F⁻¹(1) = 1 + (1 − 0) = 2.
        assert!((d.quantile(1.0).unwrap() - 2.0).abs() < 1e-14);
        // Continuity at ε: the left piece gives 1 − F⁻¹(ε−Δ) = (Δ/ε)^η, which
        // tends to 1 from below at exactly that rate.
        for &dx in &[1e-4, 1e-8, 1e-12] {
            let x = eps - dx;
            let left = d.quantile(x).unwrap();
            let gap_expected = ((eps - x) / eps).powf(eta);
            assert!(
                ((1.0 - left) / gap_expected - 1.0).abs() < 1e-9,
                "dx={dx}: left={left}, expected gap {gap_expected}"
            );
        }
    }

    #[test]
    fn truncated_means_uniform() {
        let d = uni();
        assert!((d.truncated_mean_below(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((d.truncated_mean_above(0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!(d.truncated_mean_below(0.0).is_err());
        assert!(d.truncated_mean_above(1.0).is_err());
    }

    #[test]
    fn truncated_mean_exponential_vs_quadrature() {
        let d = SignalDistribution::truncated_exponential(1.0, Some(5.0)).unwrap();
        let closed = d.truncated_mean_below(1.0).unwrap();
        let oracle = truncated_mean_below_quadrature(&d, 1.0).unwrap();
        assert!((closed - oracle).abs() < 1e-8, "{closed} vs {oracle}");
    }

    #[test]
    fn truncated_means_match_quadrature_all_kinds() {
        let dists = [
            SignalDistribution::uniform(1.0).unwrap(),
            SignalDistribution::truncated_exponential(1.3, None).unwrap(),
            SignalDistribution::truncated_normal(0.6, 0.4, None).unwrap(),
            SignalDistribution::beta(0.5, 0.5).unwrap(),
            SignalDistribution::beta(2.0, 3.0).unwrap(),
        ];
        for d in &dists {
            for i in 1..10 {
                let y = d.support_hi() * i as f64 / 10.0;
                let below = d.truncated_mean_below(y).unwrap();
                let oracle = truncated_mean_below_quadrature(d, y).unwrap();
                assert!(
                    (below - oracle).abs() < 1e-7 * (1.0 + below.abs()),
                    "{:?} below({y}): {below} vs {oracle}",
                    d.kind()
                );
                // Above-mean via the total-mean identity.
                let x = d.cdf(y).unwrap();
                let above = d.truncated_mean_above(y).unwrap();
                let identity = (d.mean() - x * below) / (1.0 - x);
                assert!(
                    (above - identity).abs() < 1e-7 * (1.0 + above.abs()),
                    "{:?} above({y}): {above} vs {identity}",
                    d.kind()
                );
            }
        }
    }

    #[test]
    fn counterexample_mean_above_closed_form_and_tail_stability() {
        let (eps, eta) = (0.02, 1e-3);
        let d = SignalDistribution::counterexample(eps, eta).unwrap();
        // At the breakpoint: E[s | s ≥ 1] = 1 + η/(1+η), the perturbation mean.
        let at_eps = d.mean_above_q(eps, 1.0);
        assert!((at_eps - (1.0 + eta / (1.0 + eta))).abs() < 1e-13, "{at_eps}");
        // Deep in the tail the mean rises toward the top of the support
        // monotonically, with no cancellation noise (the approach is slow,
        // at rate (1−x)^η).
        let mut prev = at_eps;
        for i in 1..=40 {
            let x = 1.0 - 2.0f64.powi(-i);
            let y = d.quantile_unchecked(x);
            let m = d.mean_above_q(x, y);
            assert!(m >= prev - 1e-12 && m <= 2.0, "x={x}: {m}");
            prev = m;
        }
        // Independent oracle at moderate x: (∫ₓ¹ F⁻¹)/(1−x) by quadrature.
        for &x in &[0.1, 0.5, 0.9] {
            let y = d.quantile_unchecked(x);
            let m = d.mean_above_q(x, y);
            let tail = crate::quad::integrate(
                &|u| d.quantile_unchecked(u),
                x,
                1.0,
                1e-10,
                1e-13,
            );
            let oracle = tail.value / (1.0 - x);
            assert!((m - oracle).abs() < 1e-6, "x={x}: {m} vs {oracle}");
        }
    }

    #[test]
    fn truncated_means_monotone_in_y() {
        let d = SignalDistribution::truncated_normal(1.0, 0.5, None).unwrap();
        let mut prev_b = 0.0;
        let mut prev_a = 0.0;
        for i in 1..100 {
            let y = d.support_hi() * i as f64 / 100.0;
            let b = d.truncated_mean_below(y).unwrap();
            let a = d.truncated_mean_above(y).unwrap();
            assert!(b >= prev_b - 1e-12 && b <= y);
            assert!(a >= prev_a - 1e-12 && a >= y);
            prev_b = b;
            prev_a = a;
        }
    }

    #[test]
    fn order_stat_cdf_examples() {
        let d = uni();
        // Maximum of 3: G_1^3(y) = y³.
        assert!((order_stat_cdf(1, 3, &d, 0.5).unwrap() - 0.125).abs() < 1e-15);
        // Minimum of 2: G_2^2(y) = y(2 − y).
        assert!((order_stat_cdf(2, 2, &d, 0.5).unwrap() - 0.75).abs() < 1e-15);
        // Consistency of both expressions for the minimum.
        let direct = 1.0 - (1.0 - 0.5f64).powi(2);
        assert!((order_stat_cdf(2, 2, &d, 0.5).unwrap() - direct).abs() < 1e-15);
        assert!(order_stat_cdf(0, 3, &d, 0.5).is_err());
        assert!(order_stat_cdf(4, 3, &d, 0.5).is_err());
    }

    #[test]
    fn order_stat_pdf_examples() {
        let d = uni();
        // Minimum of 2 uniforms: g(y) = 2(1 − y).
        assert!((order_stat_pdf(2, 2, &d, 0.5).unwrap() - 1.0).abs() < 1e-14);
        // m = n = 1 reduces to the density itself.
        for &y in &[0.2, 0.8] {
            assert!((order_stat_pdf(1, 1, &d, y).unwrap() - d.pdf(y)).abs() < 1e-14);
        }
    }

    #[test]
    fn order_stat_pdf_integrates_to_one() {
        let d = SignalDistribution::truncated_exponential(1.0, Some(8.0)).unwrap();
        for &(m, n) in &[(1, 4), (2, 5), (3, 3)] {
            let r = quad::integrate(
                &|y| order_stat_pdf(m, n, &d, y).unwrap(),
                0.0,
                d.support_hi(),
                1e-10,
                1e-12,
            );
            assert!((r.value - 1.0).abs() < 1e-8, "(m,n)=({m},{n}): {}", r.value);
        }
    }

    #[test]
    fn order_stat_consistency_sum_vs_integral() {
        // G_m^n from the binomial sum equals ∫₀^y g_m^n for m ≤ n ≤ 10.
        for dist in [
            SignalDistribution::uniform(1.0).unwrap(),
            SignalDistribution::truncated_normal(0.5, 0.3, None).unwrap(),
        ] {
            for n in 2..=10usize {
                for m in 1..=n {
                    let mut acc = 0.0;
                    let mut prev = 0.0;
                    for i in 1..=50 {
                        let y = dist.support_hi() * i as f64 / 51.0;
                        acc += quad::integrate(
                            &|t| order_stat_pdf(m, n, &dist, t).unwrap(),
                            prev,
                            y,
                            1e-10,
                            1e-13,
                        )
                        .value;
                        prev = y;
                        let direct = order_stat_cdf(m, n, &dist, y).unwrap();
                        assert!(
                            (acc - direct).abs() < 1e-7,
                            "m={m} n={n} y={y}: {acc} vs {direct}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn order_stat_monotone_in_rank_and_signal() {
        let d = uni();
        for n in 2..=6usize {
            for i in 1..20 {
                let y = i as f64 / 20.0;
                let mut prev = 0.0;
                // G monotone nonincreasing in m means: higher rank index m
                // (smaller order statistic) has larger cdf.
                for m in 1..=n {
                    let g = order_stat_cdf(m, n, &d, y).unwrap();
                    assert!(g >= prev - 1e-14);
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn log_concavity_verdicts() {
        let check = |d: &SignalDistribution, expect: bool| {
            let grid = default_log_concavity_grid(d, 512);
            let rep = log_concavity_report(d, &grid).unwrap();
            assert_eq!(rep.log_concave, expect, "{:?}: {rep:?}", d.kind());
        };
        check(&SignalDistribution::uniform(1.0).unwrap(), true);
        check(&SignalDistribution::truncated_exponential(1.0, None).unwrap(), true);
        check(&SignalDistribution::truncated_normal(0.5, 0.25, None).unwrap(), true);
        check(&SignalDistribution::beta(0.5, 0.5).unwrap(), false);
        // Both shapes ≥ 1 give a log-concave beta.
        check(&SignalDistribution::beta(2.0, 2.0).unwrap(), true);
    }

    #[test]
    fn log_concavity_uniform_second_diffs_vanish() {
        let d = uni();
        let grid = default_log_concavity_grid(&d, 128);
        let rep = log_concavity_report(&d, &grid).unwrap();
        assert_eq!(rep.min_second_diff, 0.0);
        assert_eq!(rep.max_second_diff, 0.0);
    }

    #[test]
    fn log_concavity_rejects_bad_grids() {
        let d = uni();
        assert!(log_concavity_report(&d, &[0.0, 0.5, 0.9]).is_err());
        assert!(log_concavity_report(&d, &[0.1, 0.5, 1.0]).is_err());
        assert!(log_concavity_report(&d, &[0.1, 0.5]).is_err());
    }

    #[test]
    fn counterexample_construction() {
        let d = SignalDistribution::counterexample(0.02, 0.01).unwrap();
        assert_eq!(d.support_hi(), 2.0);
        assert!(SignalDistribution::counterexample(0.0, 0.01).is_err());
        assert!(SignalDistribution::counterexample(1.0, 0.01).is_err());
        assert!(SignalDistribution::counterexample(0.5, 0.0).is_err());
    }

    #[test]
    fn counterexample_roundtrip_tight() {
        let d = SignalDistribution::counterexample(0.02, 0.01).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let s = d.quantile(x).unwrap();
            let back = d.cdf(s).unwrap();
            assert!((back - x).abs() < 1e-10, "x={x}: back={back}");
        }
    }

    #[test]
    fn roundtrip_all_kinds() {
        let dists = [
            SignalDistribution::uniform(1.0).unwrap(),
            SignalDistribution::truncated_exponential(2.0, None).unwrap(),
            SignalDistribution::truncated_normal(1.0, 0.5, None).unwrap(),
            SignalDistribution::beta(0.5, 0.5).unwrap(),
            SignalDistribution::counterexample(0.02, 1e-3).unwrap(),
        ];
        for d in &dists {
            for i in 0..=200 {
                let x = 1e-6 + (1.0 - 2e-6) * i as f64 / 200.0;
                let s = d.quantile(x).unwrap();
                let back = d.cdf(s).unwrap();
                assert!(
                    (back - x).abs() < 1e-8,
                    "{:?} x={x}: s={s}, back={back}",
                    d.kind()
                );
            }
        }
    }

    #[test]
    fn mean_matches_quadrature() {
        // E[s] = ∫₀^{s̄} (1 − F(s)) ds, integrated in signal space where F is
        // smooth (the counterexample only has a kink at s = 1).
        let dists = [
            SignalDistribution::truncated_exponential(1.0, None).unwrap(),
            SignalDistribution::truncated_normal(0.6, 0.4, None).unwrap(),
            SignalDistribution::counterexample(0.02, 0.01).unwrap(),
        ];
        for d in &dists {
            let survival = |s: f64| 1.0 - d.cdf(s).unwrap();
            let mid = (d.support_hi() / 2.0).min(1.0);
            let r = quad::integrate(&survival, 0.0, mid, 1e-11, 1e-14).value
                + quad::integrate(&survival, mid, d.support_hi(), 1e-11, 1e-14).value;
            assert!(
                (d.mean() - r).abs() < 1e-7,
                "{:?}: {} vs {r}",
                d.kind(),
                d.mean()
            );
        }
    }
}
