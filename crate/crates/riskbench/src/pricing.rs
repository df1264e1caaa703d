//! Market configuration and the timed pricing runner used by workers.
//!
//! Problem files carry everything method-specific; the market itself is
//! shared state that every participant derives from the same
//! configuration, so a job prices identically no matter which worker
//! picks it up.

use std::time::Instant;

use riskbench_core::engines;
use riskbench_core::{LocalVolSurface, MarketParams, PricingError, PricingResult, ProblemSpec};

/// Shared market state: one spot/vol level for every asset, an
/// equicorrelated basket structure, and the local-volatility shape
/// defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketConfig {
    pub spot: f64,
    pub rate: f64,
    pub sigma: f64,
    pub dividend_yield: f64,
    pub correlation_rho: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            spot: 100.0,
            rate: 0.05,
            sigma: 0.2,
            dividend_yield: 0.0,
            correlation_rho: 0.3,
        }
    }
}

impl MarketConfig {
    /// Market matching the problem's dimension.
    pub fn market_for(&self, spec: &ProblemSpec) -> MarketParams {
        let dim = spec.dimension as usize;
        if dim == 1 {
            let mut m = MarketParams::scalar(self.spot, self.rate, self.sigma);
            m.dividend_yield = self.dividend_yield;
            m
        } else {
            let mut m = MarketParams::equicorrelated(
                dim,
                self.spot,
                self.rate,
                self.sigma,
                self.correlation_rho,
            );
            m.dividend_yield = self.dividend_yield;
            m
        }
    }

    /// Local-volatility surface for a problem, shaped by its
    /// `lv_*` method parameters (flat at the market sigma when absent).
    pub fn surface_for(&self, spec: &ProblemSpec) -> LocalVolSurface {
        LocalVolSurface {
            sigma0: self.sigma,
            skew_a: spec.param_or("lv_skew", 0.0),
            term_b: spec.param_or("lv_term", 0.0),
            floor: spec.param_or("lv_floor", 0.01),
            cap: spec.param_or("lv_cap", 2.0),
            ref_spot: self.spot,
        }
    }
}

/// Anything a worker can hand a problem to.
pub trait JobRunner: Send + Sync {
    fn run(&self, spec: &ProblemSpec) -> Result<PricingResult, PricingError>;
}

/// The production runner: routes to the matching engine and measures the
/// compute wall time.
#[derive(Clone, Copy, Debug, Default)]
pub struct PricingRunner {
    pub market: MarketConfig,
}

impl PricingRunner {
    pub fn new(market: MarketConfig) -> Self {
        PricingRunner { market }
    }
}

impl JobRunner for PricingRunner {
    fn run(&self, spec: &ProblemSpec) -> Result<PricingResult, PricingError> {
        let market = self.market.market_for(spec);
        let surface = self.market.surface_for(spec);
        let started = Instant::now();
        let mut result = engines::price(spec, &market, Some(&surface))?;
        result.wall_time = started.elapsed().as_secs_f64();
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use riskbench_core::EngineKind;

    #[test]
    fn runner_times_and_prices() {
        let runner = PricingRunner::default();
        let spec = ProblemSpec::new("t", EngineKind::VanillaCall, 100.0, 1.0);
        let res = runner.run(&spec).unwrap();
        assert!(res.price.is_finite() && res.price > 0.0);
        assert!(res.wall_time >= 0.0);
        assert!(res.delta.is_some());
    }

    #[test]
    fn market_dimension_follows_the_spec() {
        let cfg = MarketConfig::default();
        let basket = ProblemSpec::new("b", EngineKind::BasketPutMc, 100.0, 1.0).with_dimension(40);
        assert_eq!(cfg.market_for(&basket).dimension(), 40);
        let scalar = ProblemSpec::new("v", EngineKind::VanillaCall, 100.0, 1.0);
        assert_eq!(cfg.market_for(&scalar).dimension(), 1);
    }

    #[test]
    fn surface_defaults_are_flat_at_market_sigma() {
        let cfg = MarketConfig::default();
        let spec = ProblemSpec::new("l", EngineKind::LocalVolCallMc, 100.0, 1.0);
        let s = cfg.surface_for(&spec);
        assert_eq!(s.sigma0, 0.2);
        assert_eq!(s.skew_a, 0.0);
        assert_eq!(s.ref_spot, 100.0);
    }
}
