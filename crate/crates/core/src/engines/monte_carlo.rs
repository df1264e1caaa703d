//! Monte Carlo engines: European basket put and local-volatility call.
//!
//! Both engines draw from the problem's counter-based substream, so the
//! full set of paths is a pure function of (spec, market, seed) and the
//! estimate is bitwise reproducible in any dispatch order.

use alloc::string::ToString;
use alloc::vec;

use crate::error::PricingError;
use crate::market::{local_vol, LocalVolSurface, MarketParams};
use crate::problem::{defaults, EngineKind, ProblemSpec};
use crate::result::PricingResult;
use crate::rng::Stream;

use super::RunningStats;

fn sample_count(spec: &ProblemSpec) -> Result<u64, PricingError> {
    let n = spec.param_or("n_samples", defaults::MC_SAMPLES);
    if !(n >= 2.0) || n > 1e10 {
        return Err(PricingError::Config("n_samples out of range".to_string()));
    }
    Ok(n as u64)
}

/// Equally weighted basket put under correlated geometric Brownian
/// motion, sampled exactly at maturity (one lognormal step through the
/// Cholesky factor of the correlation).
pub fn mc_basket_put(
    spec: &ProblemSpec,
    mkt: &MarketParams,
) -> Result<PricingResult, PricingError> {
    if spec.kind != EngineKind::BasketPutMc {
        return Err(PricingError::Kind);
    }
    let dim = spec.dimension as usize;
    if mkt.dimension() != dim {
        return Err(PricingError::Dimension {
            expected: dim,
            got: mkt.dimension(),
        });
    }
    let chol = mkt.correlation_cholesky()?;
    let n = sample_count(spec)?;
    let (t, strike) = (spec.maturity, spec.strike);
    let disc = libm::exp(-mkt.rate * t);
    let sqrt_t = libm::sqrt(t);

    let drift: alloc::vec::Vec<f64> = mkt
        .sigma
        .iter()
        .map(|&s| (mkt.rate - mkt.dividend_yield - 0.5 * s * s) * t)
        .collect();
    let vol_t: alloc::vec::Vec<f64> = mkt.sigma.iter().map(|&s| s * sqrt_t).collect();

    let stream = Stream::for_problem(spec.seed, &spec.id);
    let mut z = vec![0.0f64; dim];
    let mut stats = RunningStats::default();
    for p in 0..n {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = stream.normal(p * dim as u64 + j as u64);
        }
        let mut basket = 0.0;
        for j in 0..dim {
            let mut w = 0.0;
            for (k, zk) in z.iter().enumerate().take(j + 1) {
                w += chol[j * dim + k] * zk;
            }
            basket += mkt.spot[j] * libm::exp(drift[j] + vol_t[j] * w);
        }
        let avg = basket / dim as f64;
        stats.push((strike - avg).max(0.0) * disc);
    }

    Ok(PricingResult::new(spec.id.clone(), stats.mean()).with_std_error(stats.std_error()))
}

/// Call under a local-volatility diffusion, simulated with a log-space
/// Euler scheme (`n_steps_per_year` steps per year of maturity).
pub fn mc_localvol_call(
    spec: &ProblemSpec,
    mkt: &MarketParams,
    surface: &LocalVolSurface,
) -> Result<PricingResult, PricingError> {
    if spec.kind != EngineKind::LocalVolCallMc {
        return Err(PricingError::Kind);
    }
    let (spot, _) = mkt.require_scalar()?;
    surface.validate()?;
    let n = sample_count(spec)?;
    let steps_per_year = spec.param_or("n_steps_per_year", defaults::LV_STEPS_PER_YEAR);
    if !(steps_per_year > 0.0) {
        return Err(PricingError::Config(
            "n_steps_per_year must be > 0".to_string(),
        ));
    }
    let (t, strike) = (spec.maturity, spec.strike);
    let steps = libm::ceil(steps_per_year * t).max(1.0) as u64;
    let dt = t / steps as f64;
    let sqrt_dt = libm::sqrt(dt);
    let disc = libm::exp(-mkt.rate * t);
    let drift_base = mkt.rate - mkt.dividend_yield;
    let x0 = libm::log(spot);

    let stream = Stream::for_problem(spec.seed, &spec.id);
    let mut stats = RunningStats::default();
    for p in 0..n {
        let mut x = x0;
        for k in 0..steps {
            let vol = local_vol(surface, k as f64 * dt, libm::exp(x));
            let z = stream.normal(p * steps + k);
            x += (drift_base - 0.5 * vol * vol) * dt + vol * sqrt_dt * z;
        }
        stats.push((libm::exp(x) - strike).max(0.0) * disc);
    }

    Ok(PricingResult::new(spec.id.clone(), stats.mean()).with_std_error(stats.std_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::black_scholes::bs_price_delta;

    fn basket_spec(dim: u32, n_samples: f64) -> ProblemSpec {
        ProblemSpec::new("bp", EngineKind::BasketPutMc, 100.0, 1.0)
            .with_dimension(dim)
            .with_seed(7)
            .with_param("n_samples", n_samples)
    }

    #[test]
    fn zero_vol_basket_is_deterministic_intrinsic() {
        let spec = basket_spec(3, 100.0);
        let mut mkt = MarketParams::equicorrelated(3, 90.0, 0.05, 0.2, 0.3);
        mkt.sigma = alloc::vec![0.0; 3];
        let res = mc_basket_put(&spec, &mkt).unwrap();
        let expected = libm::exp(-0.05) * (100.0f64 - 90.0 * libm::exp(0.05)).max(0.0);
        assert!((res.price - expected).abs() < 1e-12);
        assert_eq!(res.std_error, Some(0.0));
    }

    #[test]
    fn single_asset_basket_matches_black_scholes() {
        let spec = basket_spec(1, 400_000.0);
        let mkt = MarketParams::scalar(100.0, 0.05, 0.2);
        let res = mc_basket_put(&spec, &mkt).unwrap();
        let (bs, _) = bs_price_delta(false, 100.0, 100.0, 0.05, 0.0, 0.2, 1.0);
        let se = res.std_error.unwrap();
        assert!(
            (res.price - bs).abs() < 3.0 * se,
            "mc={} bs={bs} se={se}",
            res.price
        );
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let spec = basket_spec(5, 20_000.0);
        let mkt = MarketParams::equicorrelated(5, 100.0, 0.05, 0.2, 0.3);
        let a = mc_basket_put(&spec, &mkt).unwrap();
        let b = mc_basket_put(&spec, &mkt).unwrap();
        assert_eq!(a.price.to_bits(), b.price.to_bits());
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn non_psd_correlation_is_a_decomposition_error() {
        let spec = basket_spec(3, 1000.0);
        let mut mkt = MarketParams::equicorrelated(3, 100.0, 0.05, 0.2, 0.3);
        mkt.correlation = alloc::vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0];
        assert_eq!(
            mc_basket_put(&spec, &mkt),
            Err(PricingError::NotPositiveDefinite)
        );
    }

    #[test]
    fn flat_surface_localvol_matches_black_scholes() {
        // With a constant surface the log-Euler scheme is exact in
        // distribution, so the only deviation is statistical.
        let spec = ProblemSpec::new("lv", EngineKind::LocalVolCallMc, 100.0, 1.0)
            .with_seed(11)
            .with_param("n_samples", 200_000.0)
            .with_param("n_steps_per_year", 12.0);
        let mkt = MarketParams::scalar(100.0, 0.05, 0.2);
        let surface = LocalVolSurface::flat(0.2, 100.0);
        let res = mc_localvol_call(&spec, &mkt, &surface).unwrap();
        let (bs, _) = bs_price_delta(true, 100.0, 100.0, 0.05, 0.0, 0.2, 1.0);
        let se = res.std_error.unwrap();
        assert!(
            (res.price - bs).abs() < 3.0 * se,
            "mc={} bs={bs} se={se}",
            res.price
        );
    }

    #[test]
    fn tiny_strike_call_converges_to_forward_value() {
        let spec = ProblemSpec::new("lv", EngineKind::LocalVolCallMc, 1e-9, 1.0)
            .with_seed(3)
            .with_param("n_samples", 100_000.0)
            .with_param("n_steps_per_year", 12.0);
        let mkt = MarketParams::scalar(100.0, 0.05, 0.2);
        let surface = LocalVolSurface::flat(0.2, 100.0);
        let res = mc_localvol_call(&spec, &mkt, &surface).unwrap();
        let se = res.std_error.unwrap();
        // e^{-rT} E[S_T] = S0 with zero dividends.
        assert!(
            (res.price - 100.0).abs() < 3.0 * se,
            "mc={} se={se}",
            res.price
        );
    }

    #[test]
    fn bad_surface_is_a_config_error() {
        let spec = ProblemSpec::new("lv", EngineKind::LocalVolCallMc, 100.0, 1.0)
            .with_param("n_samples", 100.0);
        let mkt = MarketParams::scalar(100.0, 0.05, 0.2);
        let surface = LocalVolSurface {
            sigma0: 0.2,
            skew_a: 0.0,
            term_b: 0.0,
            floor: 0.5,
            cap: 0.1,
            ref_spot: 100.0,
        };
        assert!(matches!(
            mc_localvol_call(&spec, &mkt, &surface),
            Err(PricingError::Config(_))
        ));
    }

    #[test]
    fn strike_monotonicity_under_common_random_numbers() {
        // Same id and seed mean the same paths, so pathwise monotonicity in
        // the strike is exact, not statistical.
        let mkt = MarketParams::equicorrelated(4, 100.0, 0.05, 0.2, 0.3);
        let mut last = -1.0;
        for &k in &[85.0, 95.0, 105.0, 115.0] {
            let mut spec = basket_spec(4, 20_000.0);
            spec.strike = k;
            let p = mc_basket_put(&spec, &mkt).unwrap().price;
            assert!(p >= last, "put not nondecreasing in strike at K={k}");
            last = p;
        }
    }
}
