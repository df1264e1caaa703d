//! Independent pricing oracles for the riskbench test suites.
//!
//! Nothing in here shares code with the engines under test: expectations
//! are integrated by adaptive quadrature against the lognormal density,
//! American values come from a binomial lattice, and barrier values from
//! a brute-force discretely monitored simulation with a continuity
//! correction. This crate is a dev-dependency only.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Adaptive Simpson integration of `f` over `[a, b]` to tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

fn normal_pdf(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI).sqrt().recip() * (-0.5 * x * x).exp()
}

/// European option value by quadrature: the discounted payoff of the
/// terminal lognormal integrated against the standard normal density.
pub fn quadrature_european(
    is_call: bool,
    spot: f64,
    strike: f64,
    rate: f64,
    dividend: f64,
    sigma: f64,
    maturity: f64,
) -> f64 {
    let drift = (rate - dividend - 0.5 * sigma * sigma) * maturity;
    let vol = sigma * maturity.sqrt();
    let payoff = move |z: f64| {
        let s_t = spot * (drift + vol * z).exp();
        let p = if is_call { s_t - strike } else { strike - s_t };
        p.max(0.0) * normal_pdf(z)
    };
    (-rate * maturity).exp() * adaptive_simpson(&payoff, -14.0, 14.0, 1e-11)
}

/// American (or European) option value on a Cox-Ross-Rubinstein lattice.
#[allow(clippy::too_many_arguments)]
pub fn binomial_tree(
    is_call: bool,
    american: bool,
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    steps: usize,
) -> f64 {
    let dt = maturity / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let disc = (-rate * dt).exp();
    let p_up = ((rate * dt).exp() - down) / (up - down);
    assert!(
        (0.0..=1.0).contains(&p_up),
        "lattice probability out of range"
    );

    let intrinsic = |s: f64| {
        if is_call {
            (s - strike).max(0.0)
        } else {
            (strike - s).max(0.0)
        }
    };

    let mut values: Vec<f64> = (0..=steps)
        .map(|j| intrinsic(spot * up.powi(j as i32) * down.powi((steps - j) as i32)))
        .collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let cont = disc * (p_up * values[j + 1] + (1.0 - p_up) * values[j]);
            values[j] = if american {
                let s = spot * up.powi(j as i32) * down.powi((i - j) as i32);
                cont.max(intrinsic(s))
            } else {
                cont
            };
        }
    }
    values[0]
}

/// Down-and-out call by brute-force Monte Carlo with discrete barrier
/// monitoring every `monitor_dt` years. The barrier is shifted by the
/// Broadie-Glasserman-Kou factor exp(beta * sigma * sqrt(dt)) so the
/// discrete estimate targets the continuously monitored value. Returns
/// (price, standard error).
#[allow(clippy::too_many_arguments)]
pub fn mc_down_out_call(
    spot: f64,
    strike: f64,
    barrier: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
    monitor_dt: f64,
    paths: usize,
    seed: u64,
) -> (f64, f64) {
    const BGK_BETA: f64 = 0.5825971579390107;
    let shifted = barrier * (BGK_BETA * sigma * monitor_dt.sqrt()).exp();

    let steps = (maturity / monitor_dt).ceil().max(1.0) as usize;
    let dt = maturity / steps as f64;
    let drift = (rate - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let disc = (-rate * maturity).exp();

    let mut rng = StdRng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..paths {
        let mut log_s = spot.ln();
        let mut alive = spot > shifted;
        for _ in 0..steps {
            if !alive {
                break;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            log_s += drift + vol * z;
            if log_s.exp() <= shifted {
                alive = false;
            }
        }
        let payoff = if alive {
            disc * (log_s.exp() - strike).max(0.0)
        } else {
            0.0
        };
        sum += payoff;
        sumsq += payoff * payoff;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}
