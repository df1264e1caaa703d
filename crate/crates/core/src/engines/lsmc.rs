//! Regression Monte Carlo (Longstaff-Schwartz) for the American basket put.
//!
//! Backward induction over a Bermudan exercise grid. Continuation values
//! are regressed on {1, A, A^2} of the basket average over in-the-money
//! paths only, and the estimator keeps the realized cash flow of the
//! fitted policy (lower-bound convention). With a single exercise date the
//! engine reproduces the European basket put on identical paths, draw for
//! draw.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::PricingError;
use crate::market::MarketParams;
use crate::problem::{defaults, EngineKind, ProblemSpec};
use crate::result::PricingResult;
use crate::rng::Stream;

/// Solves the 3x3 normal equations for the quadratic basis. Returns None
/// when the system is numerically singular.
fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [
        [m[0][0], m[0][1], m[0][2], b[0]],
        [m[1][0], m[1][1], m[1][2], b[1]],
        [m[2][0], m[2][1], m[2][2], b[2]],
    ];
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = a[row][3];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

pub fn lsmc_american_basket_put(
    spec: &ProblemSpec,
    mkt: &MarketParams,
) -> Result<PricingResult, PricingError> {
    if spec.kind != EngineKind::AmericanBasketPutLsmc {
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

    let n_paths = spec.param_or("n_paths", defaults::LSMC_PATHS);
    if !(n_paths >= 2.0) || n_paths > 1e9 {
        return Err(PricingError::Config("n_paths out of range".to_string()));
    }
    let n_paths = n_paths as usize;
    let dates = match spec.method_params.get("n_dates") {
        Some(&d) if d >= 1.0 => d as usize,
        Some(_) => return Err(PricingError::Config("n_dates must be >= 1".to_string())),
        None => {
            let per_year = spec.param_or("n_dates_per_year", defaults::LSMC_DATES_PER_YEAR);
            if !(per_year > 0.0) {
                return Err(PricingError::Config(
                    "n_dates_per_year must be > 0".to_string(),
                ));
            }
            (libm::round(per_year * spec.maturity) as usize).max(1)
        }
    };

    let (t, strike, rate) = (spec.maturity, spec.strike, mkt.rate);
    let dt = t / dates as f64;
    let sqrt_dt = libm::sqrt(dt);
    let step_drift: Vec<f64> = mkt
        .sigma
        .iter()
        .map(|&s| (rate - mkt.dividend_yield - 0.5 * s * s) * dt)
        .collect();
    let step_vol: Vec<f64> = mkt.sigma.iter().map(|&s| s * sqrt_dt).collect();

    // Forward pass: only the basket average per (path, date) is kept.
    let stream = Stream::for_problem(spec.seed, &spec.id);
    let mut averages = vec![0.0f64; n_paths * dates];
    let mut assets = vec![0.0f64; dim];
    let mut z = vec![0.0f64; dim];
    for p in 0..n_paths {
        assets.copy_from_slice(&mkt.spot);
        for date in 0..dates {
            let base = ((p * dates + date) * dim) as u64;
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = stream.normal(base + j as u64);
            }
            let mut basket = 0.0;
            for j in 0..dim {
                let mut w = 0.0;
                for (k, zk) in z.iter().enumerate().take(j + 1) {
                    w += chol[j * dim + k] * zk;
                }
                assets[j] *= libm::exp(step_drift[j] + step_vol[j] * w);
                basket += assets[j];
            }
            averages[p * dates + date] = basket / dim as f64;
        }
    }

    // Cash flow of the exercise policy per path, with its exercise date.
    let mut cashflow: Vec<f64> = (0..n_paths)
        .map(|p| (strike - averages[p * dates + dates - 1]).max(0.0))
        .collect();
    let mut exercise_date: Vec<usize> = vec![dates; n_paths];

    let mut degraded_dates = 0u32;
    let mut itm: Vec<usize> = Vec::with_capacity(n_paths);
    for date in (1..dates).rev() {
        itm.clear();
        for p in 0..n_paths {
            if strike - averages[p * dates + (date - 1)] > 0.0 {
                itm.push(p);
            }
        }
        if itm.is_empty() {
            continue;
        }

        let beta = if itm.len() >= 3 {
            let mut mom = [0.0f64; 5];
            let mut rhs = [0.0f64; 3];
            for &p in &itm {
                let a = averages[p * dates + (date - 1)] / strike;
                let y = cashflow[p] * libm::exp(-rate * (exercise_date[p] - date) as f64 * dt);
                let a2 = a * a;
                mom[0] += 1.0;
                mom[1] += a;
                mom[2] += a2;
                mom[3] += a2 * a;
                mom[4] += a2 * a2;
                rhs[0] += y;
                rhs[1] += a * y;
                rhs[2] += a2 * y;
            }
            solve3(
                [
                    [mom[0], mom[1], mom[2]],
                    [mom[1], mom[2], mom[3]],
                    [mom[2], mom[3], mom[4]],
                ],
                rhs,
            )
        } else {
            None
        };

        match beta {
            Some(beta) => {
                for &p in &itm {
                    let a = averages[p * dates + (date - 1)] / strike;
                    let continuation = beta[0] + beta[1] * a + beta[2] * a * a;
                    let intrinsic = strike - averages[p * dates + (date - 1)];
                    if intrinsic >= continuation {
                        cashflow[p] = intrinsic;
                        exercise_date[p] = date;
                    }
                }
            }
            None => {
                // Too few in-the-money paths (or a degenerate fit) to learn a
                // continuation value: degrade to intrinsic at this date.
                degraded_dates += 1;
                for &p in &itm {
                    cashflow[p] = strike - averages[p * dates + (date - 1)];
                    exercise_date[p] = date;
                }
            }
        }
    }

    let mut stats = super::RunningStats::default();
    for p in 0..n_paths {
        stats.push(cashflow[p] * libm::exp(-rate * exercise_date[p] as f64 * dt));
    }

    let mut res =
        PricingResult::new(spec.id.clone(), stats.mean()).with_std_error(stats.std_error());
    res.degraded_dates = degraded_dates;
    Ok(res)
}
