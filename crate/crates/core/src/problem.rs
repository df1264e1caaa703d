//! Problem descriptions: what to price and with which method settings.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::error::SpecError;

/// The six engine families of the benchmark portfolio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EngineKind {
    VanillaCall,
    VanillaPut,
    BarrierDownOutCall,
    AmericanPutPde,
    BasketPutMc,
    LocalVolCallMc,
    AmericanBasketPutLsmc,
}

impl EngineKind {
    pub const ALL: [EngineKind; 7] = [
        EngineKind::VanillaCall,
        EngineKind::VanillaPut,
        EngineKind::BarrierDownOutCall,
        EngineKind::AmericanPutPde,
        EngineKind::BasketPutMc,
        EngineKind::LocalVolCallMc,
        EngineKind::AmericanBasketPutLsmc,
    ];

    /// Stable wire tag. Part of the serialized format; never renumber.
    pub fn wire_tag(self) -> u32 {
        match self {
            EngineKind::VanillaCall => 1,
            EngineKind::VanillaPut => 2,
            EngineKind::BarrierDownOutCall => 3,
            EngineKind::AmericanPutPde => 4,
            EngineKind::BasketPutMc => 5,
            EngineKind::LocalVolCallMc => 6,
            EngineKind::AmericanBasketPutLsmc => 7,
        }
    }

    pub fn from_wire_tag(tag: u32) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.wire_tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::VanillaCall => "VanillaCall",
            EngineKind::VanillaPut => "VanillaPut",
            EngineKind::BarrierDownOutCall => "BarrierDownOutCall",
            EngineKind::AmericanPutPde => "AmericanPutPde",
            EngineKind::BasketPutMc => "BasketPutMc",
            EngineKind::LocalVolCallMc => "LocalVolCallMc",
            EngineKind::AmericanBasketPutLsmc => "AmericanBasketPutLsmc",
        }
    }

    /// True when the pricing method is Monte Carlo (result carries a
    /// statistical error).
    pub fn is_monte_carlo(self) -> bool {
        matches!(
            self,
            EngineKind::BasketPutMc
                | EngineKind::LocalVolCallMc
                | EngineKind::AmericanBasketPutLsmc
        )
    }

    /// True when the kind prices on a single underlying.
    pub fn is_scalar(self) -> bool {
        !matches!(
            self,
            EngineKind::BasketPutMc | EngineKind::AmericanBasketPutLsmc
        )
    }
}

/// One pricing job: instrument, engine selection and method settings.
///
/// `method_params` holds named numeric settings (sample counts, grid
/// sizes, exercise dates). A `BTreeMap` keeps the key order canonical for
/// serialization.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub id: String,
    pub kind: EngineKind,
    pub strike: f64,
    pub maturity: f64,
    pub barrier: Option<f64>,
    pub dimension: u32,
    pub method_params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(id: impl Into<String>, kind: EngineKind, strike: f64, maturity: f64) -> Self {
        ProblemSpec {
            id: id.into(),
            kind,
            strike,
            maturity,
            barrier: None,
            dimension: 1,
            method_params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_barrier(mut self, barrier: f64) -> Self {
        self.barrier = Some(barrier);
        self
    }

    pub fn with_dimension(mut self, dimension: u32) -> Self {
        self.dimension = dimension;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.method_params.insert(String::from(key), value);
        self
    }

    /// Named method parameter with a default.
    pub fn param_or(&self, key: &str, default: f64) -> f64 {
        self.method_params.get(key).copied().unwrap_or(default)
    }

    /// Kind-specific invariants. Serialization rejects specs that fail
    /// this; `sload` deliberately skips it.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.id.is_empty() {
            return Err(SpecError::EmptyId);
        }
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(SpecError::NonPositiveStrike);
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(SpecError::NonPositiveMaturity);
        }
        match (self.kind, self.barrier) {
            (EngineKind::BarrierDownOutCall, None) => return Err(SpecError::MissingBarrier),
            (EngineKind::BarrierDownOutCall, Some(b)) => {
                if !(b > 0.0) || !b.is_finite() {
                    return Err(SpecError::NonPositiveBarrier);
                }
            }
            (_, Some(_)) => return Err(SpecError::UnexpectedBarrier),
            (_, None) => {}
        }
        if self.dimension == 0 {
            return Err(SpecError::ZeroDimension);
        }
        if self.kind.is_scalar() && self.dimension != 1 {
            return Err(SpecError::DimensionNotScalar);
        }
        for (k, v) in &self.method_params {
            if !v.is_finite() {
                return Err(SpecError::NonFiniteParam(k.clone()));
            }
        }
        Ok(())
    }
}

/// Default method settings shared by the engines and the portfolio
/// generator.
pub mod defaults {
    /// Monte Carlo sample count.
    pub const MC_SAMPLES: f64 = 1_000_000.0;
    /// Euler steps per year for the local volatility engine.
    pub const LV_STEPS_PER_YEAR: f64 = 100.0;
    /// Regression Monte Carlo path count.
    pub const LSMC_PATHS: f64 = 100_000.0;
    /// Exercise dates per year for the regression Monte Carlo engine.
    pub const LSMC_DATES_PER_YEAR: f64 = 10.0;
    /// PDE time step in days.
    pub const PDE_DT_DAYS: f64 = 2.0;
    /// PDE space nodes.
    pub const PDE_SPACE_NODES: f64 = 400.0;
    /// Log-space half width of PDE grids, in units of sigma * sqrt(T).
    pub const PDE_WIDTH_SIGMAS: f64 = 5.0;
}
