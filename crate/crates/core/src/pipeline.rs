//! Validation sweeps and benchmarks built from the pieces above.

use std::fmt;
use std::time::Instant;

use crate::compress::{RmseReference, RmseReport};
use crate::config::AtomicConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalStats, Potential};
use crate::fused::{flop_report, CompressedModel, FlopReport};
use crate::io::{gen_config, Preset};
use crate::md::ForceEngine;
use crate::model::DPModel;

/// 100 test configurations per interval.
pub const DEFAULT_VALIDATION_CONFIGS: usize = 100;

const BENCH_BUFFER: f64 = 2.0;

/// `n` jittered copies of the preset lattice, seeds `seed, seed + 1, ...`.
pub fn jittered_configs(preset: &Preset, n: usize, reps: [usize; 3], jitter: f64, seed: u64) -> Result<Vec<AtomicConfig>> {
    (0..n as u64).map(|k| gen_config(preset, reps, jitter, seed.wrapping_add(k))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<(f64, RmseReport)>,
    /// Least-squares slope of log RMSE_E against log h.
    pub slope_e: f64,
    pub slope_f: f64,
}

impl ValidationReport {
    /// True if both errors fall strictly with every refinement of `h`.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].1.rmse_e < w[0].1.rmse_e && w[1].1.rmse_f < w[0].1.rmse_f)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>14} {:>14}", "h", "RMSE_E[eV/at]", "RMSE_F[eV/A]")?;
        for (h, r) in &self.rows {
            writeln!(f, "{h:>10} {:>14.4e} {:>14.4e}", r.rmse_e, r.rmse_f)?;
        }
        write!(f, "log-log slope: E {:.3}, F {:.3}", self.slope_e, self.slope_f)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Tabulates `model` at every interval and compares it with the exact model
/// on `configs`.
pub fn validate(model: &DPModel, intervals: &[f64], configs: &[AtomicConfig], r_min: f64) -> Result<ValidationReport> {
    if intervals.is_empty() || intervals.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::Usage("intervals must be positive".into()));
    }
    if intervals.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Usage("intervals must be given in descending order".into()));
    }
    let reference = RmseReference::new(model, configs)?;
    let mut rows = Vec::with_capacity(intervals.len());
    for &h in intervals {
        let compressed = CompressedModel::compress(model, h, r_min)?;
        rows.push((h, reference.compare(&compressed)?));
        if compressed.extrapolations() > 0 {
            log::warn!("h = {h}: {} table inputs beyond the tabulated range", compressed.extrapolations());
        }
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (slope_e, slope_f) = if rows.len() > 1 {
        (
            log_log_slope(&hs, &rows.iter().map(|r| r.1.rmse_e).collect::<Vec<_>>()),
            log_log_slope(&hs, &rows.iter().map(|r| r.1.rmse_f).collect::<Vec<_>>()),
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ValidationReport { rows, slope_e, slope_f })
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub n_atoms: usize,
    pub n_max: usize,
    pub n_workers: usize,
    pub repeats: usize,
    /// s/step/atom
    pub tts_exact: f64,
    pub tts_fused: f64,
    pub flops: FlopReport,
    pub exact_stats: EvalStats,
    pub fused_stats: EvalStats,
}

impl BenchReport {
    /// Table rows a padded evaluation would touch per pass, `N_m N_a`.
    pub fn padded_rows(&self) -> u64 {
        (self.n_max * self.n_atoms * self.repeats) as u64
    }
}

pub fn format_tts(seconds: f64) -> String {
    format!("{seconds:.3e} s/step/atom")
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "atoms {}, N_m {}, workers {}, repeats {}", self.n_atoms, self.n_max, self.n_workers, self.repeats)?;
        writeln!(f, "TtS exact   {}", format_tts(self.tts_exact))?;
        writeln!(f, "TtS fused   {}", format_tts(self.tts_fused))?;
        writeln!(f, "speedup     {:.2}x", self.tts_exact / self.tts_fused)?;
        writeln!(
            f,
            "embedding FLOPs: network {} vs table {}, ratio {:.3}, savings {:.2}%",
            self.flops.original,
            self.flops.tabulated,
            self.flops.ratio,
            100.0 * self.flops.savings()
        )?;
        writeln!(f, "exact embedding rows evaluated {}", self.exact_stats.embedding_rows)?;
        write!(
            f,
            "fused table evaluations {} forward + {} backward (padded layout would need {} per pass)",
            self.fused_stats.table_evals,
            self.fused_stats.table_evals_backward,
            self.padded_rows()
        )
    }
}

fn time_engine<P: Potential>(potential: &P, config: &AtomicConfig, n_workers: usize, repeats: usize) -> Result<(f64, EvalStats)> {
    let mut engine = ForceEngine::new(potential, n_workers, BENCH_BUFFER);
    engine.rebuild(config, 0)?;
    engine.evaluate(config)?;
    engine.stats = EvalStats::default();
    let start = Instant::now();
    for _ in 0..repeats {
        engine.evaluate(config)?;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((secs / (repeats * config.n_atoms()) as f64, engine.stats))
}

/// Times force evaluation of the exact and the fused model on one configuration.
pub fn bench(model: &DPModel, compressed: &CompressedModel, config: &AtomicConfig, n_workers: usize, repeats: usize) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::Usage("bench needs at least one repetition".into()));
    }
    let (tts_exact, exact_stats) = time_engine(model, config, n_workers, repeats)?;
    let (tts_fused, fused_stats) = time_engine(compressed, config, n_workers, repeats)?;
    let hyper = &model.hyper;
    Ok(BenchReport {
        n_atoms: config.n_atoms(),
        n_max: hyper.n_max(),
        n_workers,
        repeats,
        tts_exact,
        tts_fused,
        flops: flop_report(config.n_atoms() as u64, hyper.n_max() as u64, hyper.d1 as u64),
        exact_stats,
        fused_stats,
    })
}
