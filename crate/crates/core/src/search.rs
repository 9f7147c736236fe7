//! Equity-optimal pricing search: the WEV-minimizing δ*(c), the MEU
//! frontier in δ per common-value proportion, and full (c, δ) landscape
//! sweeps with theory-bound overlays.

use crate::equity::{self, TheoryBounds};
use crate::error::{Error, Result};
use crate::valuation::Market;
use rayon::prelude::*;

/// WEV minimizer over δ ∈ [0, 1] for one market.
#[derive(Debug, Clone, Copy)]
pub struct DeltaStar {
    pub delta: f64,
    pub wev: f64,
}

/// Full landscape over a (c, δ) grid.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub c_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// WEV per cell, rows over c, columns over δ; NaN marks a failed cell.
    pub wev_matrix: Vec<Vec<f64>>,
    /// Slope supremum per cell.
    pub max_slope_matrix: Vec<Vec<f64>>,
    /// MEU verdict per cell.
    pub meu_matrix: Vec<Vec<bool>>,
    /// Refined WEV minimizer per c row.
    pub delta_star: Vec<DeltaStar>,
    /// Largest δ with MEU per c row.
    pub meu_frontier: Vec<f64>,
    /// Theory bounds per c row.
    pub bounds: Vec<TheoryBounds>,
    /// (row, column, message) for cells whose quadrature failed.
    pub failures: Vec<(usize, usize, String)>,
}

const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;

// Golden-section minimization of `f` on [lo, hi] down to width `tol`.
fn golden_section<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut x1 = hi - GOLDEN_RATIO * (hi - lo);
    let mut x2 = lo + GOLDEN_RATIO * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN_RATIO * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN_RATIO * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm)?;
    if f1 <= f2 && f1 <= fm {
        Ok((x1, f1))
    } else if f2 <= fm {
        Ok((x2, f2))
    } else {
        Ok((xm, fm))
    }
}

/// WEV-minimizing price discrimination to width `tol` in δ.
///
/// WEV need not be convex in δ, so every local minimum of a 21-point coarse
/// scan is refined by golden section and the best survivor wins.
pub fn delta_star(market: &Market, tol: f64) -> Result<DeltaStar> {
    delta_star_scan(market, 21, tol)
}

pub fn delta_star_scan(market: &Market, scan_points: usize, tol: f64) -> Result<DeltaStar> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "refinement tolerance must be positive, got {tol}"
        )));
    }
    let pts = scan_points.max(5);
    let grid: Vec<f64> = (0..pts).map(|i| i as f64 / (pts - 1) as f64).collect();
    let coarse: Vec<f64> = grid
        .iter()
        .map(|&d| equity::wev(market, d))
        .collect::<Result<_>>()?;

    let mut best = DeltaStar { delta: grid[0], wev: coarse[0] };
    for (i, &w) in coarse.iter().enumerate() {
        if w < best.wev {
            best = DeltaStar { delta: grid[i], wev: w };
        }
    }
    // Refine every local bracket.
    for i in 0..pts {
        let left_higher = i == 0 || coarse[i - 1] >= coarse[i];
        let right_higher = i == pts - 1 || coarse[i + 1] >= coarse[i];
        if left_higher && right_higher {
            let lo = if i == 0 { 0.0 } else { grid[i - 1] };
            let hi = if i == pts - 1 { 1.0 } else { grid[i + 1] };
            let (d, w) = golden_section(|d| equity::wev(market, d), lo, hi, tol)?;
            if w < best.wev {
                best = DeltaStar { delta: d, wev: w };
            }
        }
    }
    Ok(best)
}

/// The largest δ for which MEU holds. δ·∂β^δ/∂s is increasing in δ, so the
/// MEU region is an interval [0, frontier] and bisection applies.
pub fn meu_frontier(market: &Market) -> Result<f64> {
    meu_frontier_tol(market, 1e-3)
}

pub fn meu_frontier_tol(market: &Market, tol: f64) -> Result<f64> {
    if market.c() >= 1.0 {
        return Ok(0.0);
    }
    let holds = |d: f64| -> Result<bool> { Ok(equity::meu_verdict_for(market, d)?.holds) };
    if holds(1.0)? {
        return Ok(1.0);
    }
    // δ = 0 always holds; bisect the boundary.
    let mut lo = 0.0;
    let mut hi = 1.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Full WEV landscape over (c, δ), with per-row minimizers, MEU frontiers,
/// and theory bounds. Rows run in parallel; per-cell failures are recorded
/// rather than fatal.
pub fn landscape_sweep(
    template: &Market,
    c_grid: &[f64],
    delta_grid: &[f64],
) -> Result<SweepResult> {
    for &c in c_grid {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("c grid value {c} outside [0, 1]")));
        }
    }
    for &d in delta_grid {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidParameter(format!("delta grid value {d} outside [0, 1]")));
        }
    }

    struct Row {
        wev: Vec<f64>,
        max_slope: Vec<f64>,
        meu: Vec<bool>,
        star: DeltaStar,
        frontier: f64,
        bounds: TheoryBounds,
        failures: Vec<(usize, String)>,
    }

    let rows: Vec<Result<Row>> = c_grid
        .par_iter()
        .map(|&c| {
            let market = template.with_c(c)?;
            let mut wev = Vec::with_capacity(delta_grid.len());
            let mut max_slope = Vec::with_capacity(delta_grid.len());
            let mut meu = Vec::with_capacity(delta_grid.len());
            let mut failures = Vec::new();
            for (j, &d) in delta_grid.iter().enumerate() {
                match equity::equity_report(&market, d) {
                    Ok(rep) => {
                        wev.push(rep.wev);
                        max_slope.push(rep.max_slope);
                        meu.push(rep.meu_holds);
                    }
                    Err(e) => {
                        wev.push(f64::NAN);
                        max_slope.push(f64::NAN);
                        meu.push(false);
                        failures.push((j, e.to_string()));
                    }
                }
            }
            let star = delta_star(&market, 1e-3)?;
            let frontier = meu_frontier(&market)?;
            let bounds = equity::theory_bounds(&market);
            Ok(Row { wev, max_slope, meu, star, frontier, bounds, failures })
        })
        .collect();

    let mut result = SweepResult {
        c_grid: c_grid.to_vec(),
        delta_grid: delta_grid.to_vec(),
        wev_matrix: Vec::new(),
        max_slope_matrix: Vec::new(),
        meu_matrix: Vec::new(),
        delta_star: Vec::new(),
        meu_frontier: Vec::new(),
        bounds: Vec::new(),
        failures: Vec::new(),
    };
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        result.wev_matrix.push(row.wev);
        result.max_slope_matrix.push(row.max_slope);
        result.meu_matrix.push(row.meu);
        result.delta_star.push(row.star);
        result.meu_frontier.push(row.frontier);
        result.bounds.push(row.bounds);
        for (j, msg) in row.failures {
            result.failures.push((i, j, msg));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SignalDistribution;

    fn uniform_market(c: f64) -> Market {
        Market::new(3, 2, c, SignalDistribution::uniform(1.0).unwrap()).unwrap()
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, f) = golden_section(|x| Ok((x - 0.37).powi(2)), 0.0, 1.0, 1e-6).unwrap();
        assert!((x - 0.37).abs() < 1e-5);
        assert!(f < 1e-9);
    }

    #[test]
    fn delta_star_pure_common_is_uniform_pricing() {
        let star = delta_star(&uniform_market(1.0), 1e-3).unwrap();
        assert!(star.delta <= 1e-3, "{star:?}");
        assert!(star.wev <= 1e-10, "{star:?}");
    }

    #[test]
    fn delta_star_private_values_is_payasbid() {
        let star = delta_star(&uniform_market(0.0), 1e-3).unwrap();
        assert!(star.delta >= 1.0 - 1e-3, "{star:?}");
    }

    #[test]
    fn delta_star_intermediate_common_value_still_payasbid() {
        // Uniform signals, c = 0.5: pay-as-bid minimizes WEV.
        let star = delta_star(&uniform_market(0.5), 1e-3).unwrap();
        assert!(star.delta >= 1.0 - 1e-3, "{star:?}");
    }

    #[test]
    fn meu_frontier_examples() {
        assert_eq!(meu_frontier(&uniform_market(1.0)).unwrap(), 0.0);
        // c = 0: slope ≤ 1 ≤ 1/δ everywhere, MEU holds up to δ = 1.
        assert_eq!(meu_frontier(&uniform_market(0.0)).unwrap(), 1.0);
        // Log-concave signals keep the frontier at or above 1 − c.
        for &c in &[0.3, 0.4, 0.6] {
            let frontier = meu_frontier(&uniform_market(c)).unwrap();
            assert!(
                frontier >= 1.0 - c - 1e-3,
                "c={c}: frontier {frontier} below 1-c"
            );
        }
    }

    #[test]
    fn sweep_small_grid_consistency() {
        let template = uniform_market(0.0);
        let c_grid = [0.0, 0.5, 1.0];
        let d_grid = [0.0, 0.5, 1.0];
        let sweep = landscape_sweep(&template, &c_grid, &d_grid).unwrap();
        assert!(sweep.failures.is_empty(), "{:?}", sweep.failures);
        // δ*(c=1) = 0 with zero WEV.
        assert!(sweep.delta_star[2].delta <= 1e-3);
        assert!(sweep.delta_star[2].wev <= 1e-10);
        // δ* never sits below the log-concave bound.
        for (i, star) in sweep.delta_star.iter().enumerate() {
            assert!(star.delta >= sweep.bounds[i].lb_logconcave - 1e-3);
        }
        // The minimizer attains the row minimum of the matrix.
        for (i, row) in sweep.wev_matrix.iter().enumerate() {
            let row_min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(sweep.delta_star[i].wev <= row_min + 1e-12);
        }
    }
}
