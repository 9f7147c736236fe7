//! Numerical toolkit for k-unit auctions with mixed uniform/pay-as-bid
//! pricing and interpolated private/common values: equilibrium bid
//! functions, surplus-equity metrics, the surplus-equitable direct
//! mechanism, a Monte Carlo cross-check, and equity-optimal pricing search.

pub mod distributions;
pub mod equilibrium;
pub mod equity;
pub mod error;
pub mod mechanism;
pub mod pchip;
pub mod quad;
pub mod search;
pub mod simulate;
pub mod special;
pub mod valuation;

pub use distributions::{DistributionKind, SignalDistribution};
pub use equilibrium::BidCurve;
pub use error::{Error, Result};
pub use valuation::Market;
