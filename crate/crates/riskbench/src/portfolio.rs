//! Deterministic generation of the benchmark portfolio.
//!
//! The full portfolio holds 7931 problems in six tranches:
//!
//! | tranche                  | grid                 | count |
//! |--------------------------|----------------------|-------|
//! | vanilla calls            | 32 maturities x 61 strikes | 1952 |
//! | down-and-out calls       | same grid            | 1952 |
//! | American puts (PDE)      | same grid            | 1952 |
//! | 40d basket puts (MC)     | 25 x 21              |  525 |
//! | local-vol calls (MC)     | 25 x 41              | 1025 |
//! | 7d American basket puts  | 25 x 21              |  525 |
//!
//! Vanilla-grid maturities are quarterly from 4 months (T_k = 1/3 + k/4,
//! k = 0..31; the last point lands at 8.083y — the 32-point count is
//! what the tranche sizes pin down). Strikes run 70%..130% of spot in 1%
//! steps. The Monte Carlo tranches use maturities 0.2..5.0y in 0.2y
//! steps; basket strikes span 90%..110%, local-vol strikes 80%..120%.
//!
//! Regeneration with the same config is byte-identical: ids, field order
//! and per-problem seeds (derived from `seed0` and the id hash) are all
//! stable.

use std::fs;
use std::path::PathBuf;

use riskbench_core::problem::defaults;
use riskbench_core::rng::hash_id;
use riskbench_core::{EngineKind, ProblemSpec};
use thiserror::Error;

use crate::files::{self, FileError};

#[derive(Clone, Debug)]
pub struct PortfolioConfig {
    pub spot0: f64,
    pub rate: f64,
    pub sigma: f64,
    pub barrier_fraction: f64,
    pub correlation_rho: f64,
    pub output_dir: PathBuf,
    pub seed0: u64,
    /// Write compressed problem files (`.rbz`) instead of plain images.
    pub compress: bool,
}

impl PortfolioConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        PortfolioConfig {
            spot0: 100.0,
            rate: 0.05,
            sigma: 0.2,
            barrier_fraction: 0.8,
            correlation_rho: 0.3,
            output_dir: output_dir.into(),
            seed0: 42,
            compress: false,
        }
    }

    /// Market configuration consistent with this portfolio.
    pub fn market_config(&self) -> crate::pricing::MarketConfig {
        crate::pricing::MarketConfig {
            spot: self.spot0,
            rate: self.rate,
            sigma: self.sigma,
            dividend_yield: 0.0,
            correlation_rho: self.correlation_rho,
        }
    }
}

/// Which portfolio to generate. `Full` is the benchmark; the others are
/// reduced variants for integration tests and single-machine speedup
/// runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// The 7931-problem benchmark portfolio at full method settings.
    Full,
    /// 500 problems spanning all tranches with reduced Monte Carlo sizes.
    Mini,
    /// A small correctness-test portfolio with tiny method settings.
    Toy { jobs: usize },
    /// Closed-form vanilla calls only; every job prices in microseconds.
    VanillaOnly { jobs: usize },
}

/// Grid specification of one tranche.
#[derive(Clone, Debug)]
pub struct Tranche {
    pub kind: EngineKind,
    pub maturities: Vec<f64>,
    pub strike_fractions: Vec<f64>,
    pub dimension: u32,
    pub expected_count: usize,
}

impl Tranche {
    pub fn cell_count(&self) -> usize {
        self.maturities.len() * self.strike_fractions.len()
    }
}

fn vanilla_maturities() -> Vec<f64> {
    (0..32).map(|k| 1.0 / 3.0 + k as f64 / 4.0).collect()
}

fn mc_maturities() -> Vec<f64> {
    (1..=25).map(|m| m as f64 / 5.0).collect()
}

fn strike_fractions(lo_pct: u32, hi_pct: u32) -> Vec<f64> {
    (lo_pct..=hi_pct).map(|p| p as f64 / 100.0).collect()
}

/// The full-portfolio grid for one engine family.
pub fn tranche_grids(kind: EngineKind) -> Tranche {
    match kind {
        EngineKind::VanillaCall | EngineKind::BarrierDownOutCall | EngineKind::AmericanPutPde => {
            Tranche {
                kind,
                maturities: vanilla_maturities(),
                strike_fractions: strike_fractions(70, 130),
                dimension: 1,
                expected_count: 1952,
            }
        }
        EngineKind::VanillaPut => Tranche {
            kind,
            maturities: vanilla_maturities(),
            strike_fractions: strike_fractions(70, 130),
            dimension: 1,
            expected_count: 1952,
        },
        EngineKind::BasketPutMc => Tranche {
            kind,
            maturities: mc_maturities(),
            strike_fractions: strike_fractions(90, 110),
            dimension: 40,
            expected_count: 525,
        },
        EngineKind::LocalVolCallMc => Tranche {
            kind,
            maturities: mc_maturities(),
            strike_fractions: strike_fractions(80, 120),
            dimension: 1,
            expected_count: 1025,
        },
        EngineKind::AmericanBasketPutLsmc => Tranche {
            kind,
            maturities: mc_maturities(),
            strike_fractions: strike_fractions(90, 110),
            dimension: 7,
            expected_count: 525,
        },
    }
}

/// Tranche order of the benchmark portfolio.
pub const BENCHMARK_TRANCHES: [EngineKind; 6] = [
    EngineKind::VanillaCall,
    EngineKind::BarrierDownOutCall,
    EngineKind::AmericanPutPde,
    EngineKind::BasketPutMc,
    EngineKind::LocalVolCallMc,
    EngineKind::AmericanBasketPutLsmc,
];

/// Total problem count of the full benchmark portfolio.
pub const BENCHMARK_TOTAL: usize = 7931;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("wrote {written} of {total} problem files, then failed: {source}")]
    PartialOutput {
        written: usize,
        total: usize,
        #[source]
        source: FileError,
    },
    #[error("cannot create output directory: {0}")]
    OutputDir(#[from] std::io::Error),
}

struct MethodSettings {
    mc_samples: f64,
    lv_samples: f64,
    lv_steps_per_year: f64,
    lsmc_paths: f64,
    pde_nodes: f64,
}

impl MethodSettings {
    fn for_preset(preset: Preset) -> Self {
        match preset {
            Preset::Full => MethodSettings {
                mc_samples: defaults::MC_SAMPLES,
                lv_samples: defaults::MC_SAMPLES,
                lv_steps_per_year: defaults::LV_STEPS_PER_YEAR,
                lsmc_paths: defaults::LSMC_PATHS,
                pde_nodes: defaults::PDE_SPACE_NODES,
            },
            Preset::Mini => MethodSettings {
                mc_samples: 20_000.0,
                lv_samples: 2_000.0,
                lv_steps_per_year: defaults::LV_STEPS_PER_YEAR,
                lsmc_paths: 3_000.0,
                pde_nodes: defaults::PDE_SPACE_NODES,
            },
            Preset::Toy { .. } => MethodSettings {
                mc_samples: 2_000.0,
                lv_samples: 400.0,
                lv_steps_per_year: 50.0,
                lsmc_paths: 1_000.0,
                pde_nodes: 200.0,
            },
            Preset::VanillaOnly { .. } => MethodSettings {
                mc_samples: 0.0,
                lv_samples: 0.0,
                lv_steps_per_year: 0.0,
                lsmc_paths: 0.0,
                pde_nodes: 0.0,
            },
        }
    }
}

fn tranche_counts(preset: Preset) -> Vec<(EngineKind, usize)> {
    match preset {
        Preset::Full => BENCHMARK_TRANCHES
            .iter()
            .map(|&k| (k, tranche_grids(k).expected_count))
            .collect(),
        Preset::Mini => vec![
            (EngineKind::VanillaCall, 123),
            (EngineKind::BarrierDownOutCall, 123),
            (EngineKind::AmericanPutPde, 123),
            (EngineKind::BasketPutMc, 33),
            (EngineKind::LocalVolCallMc, 65),
            (EngineKind::AmericanBasketPutLsmc, 33),
        ],
        Preset::Toy { jobs } => {
            // Same tranche proportions as the benchmark, rounded to `jobs`.
            let weights = [1952usize, 1952, 1952, 525, 1025, 525];
            let mut counts: Vec<usize> = weights
                .iter()
                .map(|&w| (w * jobs) / BENCHMARK_TOTAL)
                .collect();
            let mut assigned: usize = counts.iter().sum();
            let mut i = 0;
            while assigned < jobs {
                counts[i % 6] += 1;
                assigned += 1;
                i += 1;
            }
            BENCHMARK_TRANCHES.iter().copied().zip(counts).collect()
        }
        Preset::VanillaOnly { jobs } => vec![(EngineKind::VanillaCall, jobs)],
    }
}

/// Builds the problem list for a preset without touching the filesystem.
pub fn build_problems(cfg: &PortfolioConfig, preset: Preset) -> Vec<ProblemSpec> {
    let settings = MethodSettings::for_preset(preset);
    let mut problems = Vec::new();
    for (kind, count) in tranche_counts(preset) {
        let tranche = tranche_grids(kind);
        let cells = tranche.cell_count();
        let width = format!("{}", count.saturating_sub(1)).len().max(4);
        for i in 0..count {
            // Strided selection over the full grid keeps reduced presets
            // spanning the whole maturity/strike range.
            let cell = if count >= cells {
                i % cells
            } else {
                (i * cells) / count
            };
            let mat_idx = cell / tranche.strike_fractions.len();
            let strike_idx = cell % tranche.strike_fractions.len();
            let id = format!("{}_{:0width$}", kind.name(), i, width = width);
            let seed = cfg.seed0.wrapping_add(hash_id(&id));
            let mut spec = ProblemSpec::new(
                id,
                kind,
                tranche.strike_fractions[strike_idx] * cfg.spot0,
                tranche.maturities[mat_idx],
            )
            .with_dimension(tranche.dimension)
            .with_seed(seed);
            if kind == EngineKind::BarrierDownOutCall {
                spec = spec.with_barrier(cfg.barrier_fraction * cfg.spot0);
            }
            apply_method_params(&mut spec, &settings);
            problems.push(spec);
        }
    }
    problems
}

fn apply_method_params(spec: &mut ProblemSpec, s: &MethodSettings) {
    match spec.kind {
        EngineKind::VanillaCall | EngineKind::VanillaPut => {}
        EngineKind::BarrierDownOutCall | EngineKind::AmericanPutPde => {
            spec.method_params
                .insert("dt_days".into(), defaults::PDE_DT_DAYS);
            spec.method_params
                .insert("n_space_nodes".into(), s.pde_nodes);
        }
        EngineKind::BasketPutMc => {
            spec.method_params.insert("n_samples".into(), s.mc_samples);
        }
        EngineKind::LocalVolCallMc => {
            spec.method_params.insert("n_samples".into(), s.lv_samples);
            spec.method_params
                .insert("n_steps_per_year".into(), s.lv_steps_per_year);
            spec.method_params.insert("lv_skew".into(), 0.1);
            spec.method_params.insert("lv_term".into(), 0.01);
            spec.method_params.insert("lv_floor".into(), 0.05);
            spec.method_params.insert("lv_cap".into(), 0.5);
        }
        EngineKind::AmericanBasketPutLsmc => {
            spec.method_params.insert("n_paths".into(), s.lsmc_paths);
            spec.method_params
                .insert("n_dates_per_year".into(), defaults::LSMC_DATES_PER_YEAR);
        }
    }
}

/// Generates a preset portfolio: one `.rbp` file per problem in
/// `cfg.output_dir`, named after the problem id. Returns the problems in
/// generation order. A write failure aborts with a report of how much
/// output exists.
pub fn generate(cfg: &PortfolioConfig, preset: Preset) -> Result<Vec<ProblemSpec>, GenerateError> {
    fs::create_dir_all(&cfg.output_dir)?;
    let problems = build_problems(cfg, preset);
    let total = problems.len();
    for (written, spec) in problems.iter().enumerate() {
        let report = |source| GenerateError::PartialOutput {
            written,
            total,
            source,
        };
        if cfg.compress {
            let path = cfg.output_dir.join(format!("{}.rbz", spec.id));
            files::save_compressed(&path, spec).map_err(report)?;
        } else {
            let path = cfg.output_dir.join(format!("{}.rbp", spec.id));
            files::save(&path, spec).map_err(report)?;
        }
    }
    Ok(problems)
}

/// Generates the full 7931-problem benchmark portfolio.
pub fn generate_portfolio(cfg: &PortfolioConfig) -> Result<Vec<ProblemSpec>, GenerateError> {
    generate(cfg, Preset::Full)
}

/// Sorted list of the problem files in a jobs directory.
pub fn job_files(dir: &std::path::Path) -> std::io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("rbp") | Some("rbz")
            )
        })
        .collect();
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tranche_grid_shapes_match_the_benchmark() {
        let vanilla = tranche_grids(EngineKind::VanillaCall);
        assert_eq!(vanilla.maturities.len(), 32);
        assert_eq!(vanilla.strike_fractions.len(), 61);
        assert_eq!(vanilla.cell_count(), 1952);
        assert!((vanilla.maturities[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((vanilla.maturities[31] - (1.0 / 3.0 + 7.75)).abs() < 1e-12);

        let basket = tranche_grids(EngineKind::BasketPutMc);
        assert_eq!(basket.cell_count(), 525);
        assert_eq!(basket.dimension, 40);
        assert!((basket.maturities[0] - 0.2).abs() < 1e-15);
        assert!((basket.maturities[24] - 5.0).abs() < 1e-12);

        let lv = tranche_grids(EngineKind::LocalVolCallMc);
        assert_eq!(lv.cell_count(), 25 * 41);
        assert_eq!(lv.cell_count(), 1025);

        let ls = tranche_grids(EngineKind::AmericanBasketPutLsmc);
        assert_eq!(ls.cell_count(), 21 * 25);
        assert_eq!(ls.dimension, 7);
    }

    #[test]
    fn full_portfolio_counts() {
        let cfg = PortfolioConfig::new("/tmp/unused");
        let problems = build_problems(&cfg, Preset::Full);
        assert_eq!(problems.len(), BENCHMARK_TOTAL);
        let count = |k: EngineKind| problems.iter().filter(|p| p.kind == k).count();
        assert_eq!(count(EngineKind::VanillaCall), 1952);
        assert_eq!(count(EngineKind::BarrierDownOutCall), 1952);
        assert_eq!(count(EngineKind::AmericanPutPde), 1952);
        assert_eq!(count(EngineKind::BasketPutMc), 525);
        assert_eq!(count(EngineKind::LocalVolCallMc), 1025);
        assert_eq!(count(EngineKind::AmericanBasketPutLsmc), 525);
    }

    #[test]
    fn ids_are_unique_and_sortable() {
        let cfg = PortfolioConfig::new("/tmp/unused");
        let problems = build_problems(&cfg, Preset::Full);
        let mut ids: Vec<&str> = problems.iter().map(|p| p.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), problems.len());
        // Within a tranche, lexicographic order matches generation order.
        ids.retain(|id| id.starts_with("VanillaCall_"));
        let mut expected = ids.clone();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn every_problem_validates_and_barriers_sit_below_spot() {
        let cfg = PortfolioConfig::new("/tmp/unused");
        for spec in build_problems(&cfg, Preset::Full) {
            spec.validate().unwrap();
            if let Some(b) = spec.barrier {
                assert!(b < cfg.spot0);
            }
        }
    }

    #[test]
    fn mini_preset_is_exactly_500_jobs_spanning_all_tranches() {
        let cfg = PortfolioConfig::new("/tmp/unused");
        let problems = build_problems(&cfg, Preset::Mini);
        assert_eq!(problems.len(), 500);
        for kind in BENCHMARK_TRANCHES {
            assert!(problems.iter().any(|p| p.kind == kind), "{kind:?} missing");
        }
        // Reduced sampling, full grid span.
        let mats: Vec<f64> = problems
            .iter()
            .filter(|p| p.kind == EngineKind::BasketPutMc)
            .map(|p| p.maturity)
            .collect();
        assert!(mats.iter().cloned().fold(f64::MAX, f64::min) <= 0.4);
        assert!(mats.iter().cloned().fold(f64::MIN, f64::max) >= 4.4);
    }

    #[test]
    fn toy_preset_hits_the_requested_count() {
        let cfg = PortfolioConfig::new("/tmp/unused");
        assert_eq!(build_problems(&cfg, Preset::Toy { jobs: 200 }).len(), 200);
        assert_eq!(build_problems(&cfg, Preset::Toy { jobs: 7 }).len(), 7);
    }

    #[test]
    fn generation_writes_files_that_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PortfolioConfig::new(dir.path());
        let problems = generate(&cfg, Preset::Toy { jobs: 24 }).unwrap();
        let paths = job_files(dir.path()).unwrap();
        assert_eq!(paths.len(), 24);
        for spec in &problems {
            let path = dir.path().join(format!("{}.rbp", spec.id));
            assert_eq!(&crate::files::load(&path).unwrap(), spec);
        }
    }

    #[test]
    fn write_failure_reports_partial_output() {
        let dir = tempfile::tempdir().unwrap();
        // A directory squatting on the third output path makes the
        // rename fail partway through.
        std::fs::create_dir(dir.path().join("VanillaCall_0002.rbp")).unwrap();
        let cfg = PortfolioConfig::new(dir.path());
        match generate(&cfg, Preset::VanillaOnly { jobs: 6 }) {
            Err(GenerateError::PartialOutput { written, total, .. }) => {
                assert_eq!(written, 2);
                assert_eq!(total, 6);
            }
            other => panic!("expected partial-output report, got {other:?}"),
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate(
            &PortfolioConfig::new(dir_a.path()),
            Preset::Toy { jobs: 60 },
        )
        .unwrap();
        generate(
            &PortfolioConfig::new(dir_b.path()),
            Preset::Toy { jobs: 60 },
        )
        .unwrap();
        let a = job_files(dir_a.path()).unwrap();
        let b = job_files(dir_b.path()).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.file_name(), pb.file_name());
            assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        }
    }
}
