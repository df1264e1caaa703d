//! Market state shared by all pricing problems.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::PricingError;
use crate::math::cholesky;

/// Market parameters for a `d`-asset problem.
///
/// `spot`, `sigma` have one entry per asset; `correlation` is a dense
/// row-major `d x d` matrix with unit diagonal. Rates are continuously
/// compounded per annum. The benchmark portfolio fixes `dividend_yield`
/// to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketParams {
    pub spot: Vec<f64>,
    pub rate: f64,
    pub sigma: Vec<f64>,
    pub correlation: Vec<f64>,
    pub dividend_yield: f64,
}

impl MarketParams {
    /// One-asset market with trivial correlation.
    pub fn scalar(spot: f64, rate: f64, sigma: f64) -> Self {
        MarketParams {
            spot: alloc::vec![spot],
            rate,
            sigma: alloc::vec![sigma],
            correlation: alloc::vec![1.0],
            dividend_yield: 0.0,
        }
    }

    /// `d` identical assets under equicorrelation `rho`.
    pub fn equicorrelated(dim: usize, spot: f64, rate: f64, sigma: f64, rho: f64) -> Self {
        let mut correlation = alloc::vec![rho; dim * dim];
        for i in 0..dim {
            correlation[i * dim + i] = 1.0;
        }
        MarketParams {
            spot: alloc::vec![spot; dim],
            rate,
            sigma: alloc::vec![sigma; dim],
            correlation,
            dividend_yield: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.spot.len()
    }

    /// Checks positivity and shape invariants.
    pub fn validate(&self) -> Result<(), PricingError> {
        let d = self.spot.len();
        if d == 0 {
            return Err(PricingError::Market("no assets".to_string()));
        }
        if self.sigma.len() != d || self.correlation.len() != d * d {
            return Err(PricingError::Market("inconsistent dimensions".to_string()));
        }
        if self.spot.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(PricingError::Market("spots must be > 0".to_string()));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(PricingError::Market("sigmas must be > 0".to_string()));
        }
        for i in 0..d {
            if (self.correlation[i * d + i] - 1.0).abs() > 1e-12 {
                return Err(PricingError::Market(
                    "correlation diagonal must be 1".to_string(),
                ));
            }
            for j in 0..d {
                let c = self.correlation[i * d + j];
                if !(-1.0..=1.0).contains(&c) {
                    return Err(PricingError::Market(
                        "correlation entries must be in [-1,1]".to_string(),
                    ));
                }
                if (c - self.correlation[j * d + i]).abs() > 1e-12 {
                    return Err(PricingError::Market(
                        "correlation must be symmetric".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Lower Cholesky factor of the correlation matrix.
    pub fn correlation_cholesky(&self) -> Result<Vec<f64>, PricingError> {
        cholesky(&self.correlation, self.dimension()).ok_or(PricingError::NotPositiveDefinite)
    }

    /// Requires a one-asset market and returns (spot, sigma).
    pub fn require_scalar(&self) -> Result<(f64, f64), PricingError> {
        if self.dimension() != 1 {
            return Err(PricingError::Dimension {
                expected: 1,
                got: self.dimension(),
            });
        }
        Ok((self.spot[0], self.sigma[0]))
    }
}

/// Deterministic local volatility surface: quadratic in log-moneyness,
/// linear in time, clipped to [floor, cap].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalVolSurface {
    pub sigma0: f64,
    pub skew_a: f64,
    pub term_b: f64,
    pub floor: f64,
    pub cap: f64,
    /// Reference spot at which the log-moneyness term vanishes.
    pub ref_spot: f64,
}

impl LocalVolSurface {
    /// Flat surface equal to `sigma0` everywhere; reduces the local-vol
    /// engine exactly to Black-Scholes dynamics.
    pub fn flat(sigma0: f64, ref_spot: f64) -> Self {
        LocalVolSurface {
            sigma0,
            skew_a: 0.0,
            term_b: 0.0,
            floor: sigma0.min(1e-4),
            cap: sigma0.max(4.0),
            ref_spot,
        }
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        if !(self.floor > 0.0) || !(self.cap >= self.floor) {
            return Err(PricingError::Config(
                "local vol surface requires 0 < floor <= cap".to_string(),
            ));
        }
        if !(self.ref_spot > 0.0) {
            return Err(PricingError::Config(
                "local vol ref_spot must be > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Local volatility at time `t` (years) and spot `price`.
pub fn local_vol(surface: &LocalVolSurface, t: f64, price: f64) -> f64 {
    let m = libm::log(price / surface.ref_spot);
    let raw = surface.sigma0 + surface.skew_a * m * m + surface.term_b * t;
    raw.clamp(surface.floor, surface.cap)
}
