//! The six pricing engine families and their common entry point.
//!
//! Each engine is a pure function of (problem, market, seed): no clocks,
//! no global state, no allocation visible to the caller. `wall_time` in
//! the returned result is 0 here; runners that time the computation fill
//! it in.

pub mod black_scholes;
pub mod lsmc;
pub mod monte_carlo;
pub mod pde;

use alloc::string::ToString;

pub use black_scholes::{bs_vanilla_price, closed_form_down_out_call};
pub use lsmc::lsmc_american_basket_put;
pub use monte_carlo::{mc_basket_put, mc_localvol_call};
pub use pde::{pde_american_put, pde_barrier_down_out_call};

use crate::error::PricingError;
use crate::market::{LocalVolSurface, MarketParams};
use crate::problem::{EngineKind, ProblemSpec};
use crate::result::PricingResult;

/// Welford running mean/variance, shared by the Monte Carlo engines.
/// Exact (bitwise zero variance) for constant samples.
#[derive(Clone, Copy, Default)]
pub(crate) struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean.
    pub(crate) fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        libm::sqrt(var / self.n as f64)
    }
}

/// Routes a problem to its engine family.
///
/// `surface` is consulted only by the local-volatility engine; passing
/// `None` for that kind is a configuration error.
pub fn price(
    spec: &ProblemSpec,
    mkt: &MarketParams,
    surface: Option<&LocalVolSurface>,
) -> Result<PricingResult, PricingError> {
    match spec.kind {
        EngineKind::VanillaCall | EngineKind::VanillaPut => bs_vanilla_price(spec, mkt),
        EngineKind::BarrierDownOutCall => pde_barrier_down_out_call(spec, mkt),
        EngineKind::AmericanPutPde => pde_american_put(spec, mkt),
        EngineKind::BasketPutMc => mc_basket_put(spec, mkt),
        EngineKind::LocalVolCallMc => match surface {
            Some(s) => mc_localvol_call(spec, mkt, s),
            None => Err(PricingError::Config(
                "local volatility surface required".to_string(),
            )),
        },
        EngineKind::AmericanBasketPutLsmc => lsmc_american_basket_put(spec, mkt),
    }
}
