//! Layered run configuration: TOML file, CLI flag overrides, and the
//! resolved snapshot echoed into every output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fms_core::{BandwidthSchedule, GridSpec, IngestConfig, Mode, RunConfig, Variable};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    PaperLinear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Blurring,
    NonBlurring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatKind {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Influence range; absent means estimate it from the data.
    pub tau: Option<f64>,
    pub schedule: ScheduleKind,
    /// Constant bandwidth; required when `schedule = "constant"`.
    pub h0: Option<f64>,
    pub tau_percentile: f64,
    pub tau_sample_size: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            tau: None,
            schedule: ScheduleKind::PaperLinear,
            h0: None,
            tau_percentile: 20.0,
            tau_sample_size: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub epsilon: f64,
    pub max_iters: usize,
    pub variant: VariantKind,
    /// Grouping radius for cluster assignment; defaults to `10 * epsilon`.
    pub merge_radius: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 100,
            variant: VariantKind::Blurring,
            merge_radius: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticSection {
    pub enabled: bool,
    pub subset_size: usize,
}

impl Default for StochasticSection {
    fn default() -> Self {
        Self {
            enabled: false,
            subset_size: 1024,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub variable: String,
    pub min_points: usize,
    pub window_lo: f64,
    pub window_hi: f64,
    pub grid_points: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            variable: "temperature".into(),
            min_points: fms_core::ingest::DEFAULT_MIN_POINTS,
            window_lo: fms_core::ingest::DEFAULT_WINDOW_LO,
            window_hi: fms_core::ingest::DEFAULT_WINDOW_HI,
            grid_points: fms_core::ingest::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub clusters: usize,
    pub per_cluster: usize,
    pub noise_norm: f64,
    pub noise_modes: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            clusters: 3,
            per_cluster: 40,
            noise_norm: 0.05,
            noise_modes: 6,
            grid_lo: 0.0,
            grid_hi: 1.0,
            grid_points: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    pub iters: usize,
    pub grid_points: usize,
    pub subset_size: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            sizes: vec![1024, 2048, 4096, 8192],
            iters: 3,
            grid_points: 50,
            subset_size: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub directions: usize,
    pub derivative_trials: usize,
    pub minorizer_steps: usize,
    pub lemma_trials: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            directions: 20,
            derivative_trials: 5,
            minorizer_steps: 5,
            lemma_trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub format: Option<FormatKind>,
    /// Optional provenance CSV whose rows are joined into the labels file.
    pub provenance: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    pub kernel: KernelSection,
    pub run: RunSection,
    pub stochastic: StochasticSection,
    pub ingest: IngestSection,
    pub synth: SynthSection,
    pub bench: BenchSection,
    pub diagnose: DiagnoseSection,
    pub io: IoSection,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            kernel: KernelSection::default(),
            run: RunSection::default(),
            stochastic: StochasticSection::default(),
            ingest: IngestSection::default(),
            synth: SynthSection::default(),
            bench: BenchSection::default(),
            diagnose: DiagnoseSection::default(),
            io: IoSection::default(),
        }
    }
}

/// CLI flag overrides, applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub subset_size: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub tau: Option<String>,
    pub schedule: Option<String>,
    pub h0: Option<f64>,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("bad config {}: {e}", p.display())))
            }
        }
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(mode) = &ov.mode {
            self.stochastic.enabled = match mode.as_str() {
                "full" => false,
                "stochastic" => true,
                other => {
                    return Err(CliError::Config(format!(
                        "--mode must be full or stochastic, got `{other}`"
                    )))
                }
            };
        }
        if let Some(s) = ov.subset_size {
            self.stochastic.subset_size = s;
        }
        if let Some(e) = ov.epsilon {
            self.run.epsilon = e;
        }
        if let Some(m) = ov.max_iters {
            self.run.max_iters = m;
        }
        if let Some(tau) = &ov.tau {
            if tau == "auto" {
                self.kernel.tau = None;
            } else {
                let value: f64 = tau.parse().map_err(|_| {
                    CliError::Config(format!("--tau must be a number or `auto`, got `{tau}`"))
                })?;
                self.kernel.tau = Some(value);
            }
        }
        if let Some(schedule) = &ov.schedule {
            self.kernel.schedule = match schedule.as_str() {
                "paper" | "paper_linear" => ScheduleKind::PaperLinear,
                "constant" => ScheduleKind::Constant,
                other => {
                    return Err(CliError::Config(format!(
                        "--schedule must be paper or constant, got `{other}`"
                    )))
                }
            };
        }
        if let Some(h0) = ov.h0 {
            self.kernel.h0 = Some(h0);
        }
        Ok(())
    }

    /// Bandwidth schedule for a resolved influence range.
    pub fn schedule(&self, tau: f64) -> Result<BandwidthSchedule, CliError> {
        match self.kernel.schedule {
            ScheduleKind::PaperLinear => Ok(BandwidthSchedule::paper_linear(tau)),
            ScheduleKind::Constant => {
                let h0 = self.kernel.h0.ok_or_else(|| {
                    CliError::Config("constant schedule needs kernel.h0 (or --h0)".into())
                })?;
                Ok(BandwidthSchedule::constant(tau, h0))
            }
        }
    }

    pub fn run_config(&self, tau: f64) -> Result<RunConfig, CliError> {
        let cfg = RunConfig {
            schedule: self.schedule(tau)?,
            epsilon: self.run.epsilon,
            max_iters: self.run.max_iters,
            mode: match self.run.variant {
                VariantKind::Blurring => Mode::Blurring,
                VariantKind::NonBlurring => Mode::NonBlurring,
            },
        };
        cfg.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn merge_radius(&self) -> f64 {
        self.run.merge_radius.unwrap_or(10.0 * self.run.epsilon)
    }

    pub fn ingest_config(&self) -> Result<IngestConfig, CliError> {
        let variable = Variable::parse(&self.ingest.variable).ok_or_else(|| {
            CliError::Config(format!(
                "ingest.variable must be temperature or salinity, got `{}`",
                self.ingest.variable
            ))
        })?;
        let grid = GridSpec::new(
            self.ingest.window_lo,
            self.ingest.window_hi,
            self.ingest.grid_points,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(IngestConfig {
            variable,
            min_points: self.ingest.min_points,
            grid,
        })
    }

    /// Write the resolved snapshot (`config.resolved`) into the output dir.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
        std::fs::write(out_dir.join("config.resolved"), text)
            .map_err(|e| CliError::Data(fms_core::Error::Io(e)))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_sane() {
        let cfg = AppConfig::default();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.kernel.tau_percentile, 20.0);
        assert_eq!(cfg.kernel.tau_sample_size, 5000);
        assert_eq!(cfg.stochastic.subset_size, 1024);
        assert_eq!(cfg.ingest.min_points, 20);
        assert_eq!(cfg.ingest.window_lo, 20.0);
        assert_eq!(cfg.ingest.window_hi, 300.0);
    }

    #[test]
    fn toml_round_trip_keeps_fields() {
        let cfg = AppConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: AppConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.bench.sizes, cfg.bench.sizes);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<AppConfig>("[kernel]\nbogus = 1\n");
        assert!(err.is_err());
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut cfg = AppConfig::default();
        cfg.apply_overrides(&Overrides {
            seed: Some(7),
            mode: Some("stochastic".into()),
            tau: Some("1.5".into()),
            schedule: Some("constant".into()),
            h0: Some(0.25),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.stochastic.enabled);
        assert_eq!(cfg.kernel.tau, Some(1.5));
        let sched = cfg.schedule(1.5).unwrap();
        assert_eq!(sched.bandwidth_at(9), 0.25);
    }

    #[test]
    fn tau_auto_clears_the_configured_value() {
        let mut cfg = AppConfig::default();
        cfg.kernel.tau = Some(2.0);
        cfg.apply_overrides(&Overrides {
            tau: Some("auto".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.kernel.tau, None);
    }

    #[test]
    fn constant_schedule_requires_h0() {
        let mut cfg = AppConfig::default();
        cfg.kernel.schedule = ScheduleKind::Constant;
        assert!(cfg.schedule(1.0).is_err());
    }
}
