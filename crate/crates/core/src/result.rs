//! Pricing results.

use alloc::string::String;

/// Output of one pricing job.
///
/// `std_error` is present exactly when the method is Monte Carlo.
/// `wall_time` is filled by the caller that timed the computation (the
/// engines themselves are pure and report 0). `degraded_dates` counts
/// exercise dates at which the regression engine fell back to intrinsic
/// value for lack of in-the-money paths; it is 0 for every other engine.
#[derive(Clone, Debug, PartialEq)]
pub struct PricingResult {
    pub problem_id: String,
    pub price: f64,
    pub std_error: Option<f64>,
    pub delta: Option<f64>,
    pub wall_time: f64,
    pub degraded_dates: u32,
}

impl PricingResult {
    pub fn new(problem_id: impl Into<String>, price: f64) -> Self {
        PricingResult {
            problem_id: problem_id.into(),
            price,
            std_error: None,
            delta: None,
            wall_time: 0.0,
            degraded_dates: 0,
        }
    }

    pub fn with_std_error(mut self, std_error: f64) -> Self {
        self.std_error = Some(std_error);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
}
