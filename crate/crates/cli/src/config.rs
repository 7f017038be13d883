//! Run configuration: flat key-value TOML with one section per subsystem.
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub missing: Option<MissingConfig>,
    pub matrices: Option<MatricesConfig>,
    pub kernel: Option<KernelConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub imputation: Option<ImputationConfig>,
    #[serde(default)]
    pub run: RunSection,
}

/// Where the data come from: a CSV file or a built-in generator.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// `additive` | `power` | `coupled` | `quartic` | `uneven`
    pub generator: Option<String>,
    /// Row count for generators (`additive`, `power`, `coupled`, `quartic`).
    pub n: Option<usize>,
    /// Dimensionality for the `additive` generator.
    pub dim: Option<usize>,
    /// Mixture sizes for the `uneven` generator.
    pub n_normal: Option<usize>,
    pub n_uniform: Option<usize>,
    /// Gaussian noise added to the target after generation.
    pub noise_sigma: Option<f64>,
    /// Min-max scale file data to [0, 1] after loading.
    #[serde(default)]
    pub scale: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingConfig {
    /// Holes injected per column, at most one per row.
    pub per_column: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatricesConfig {
    /// Selection-matrix grammar: `1d` | `2d` | `mixed:<o1>,<o2>,...` |
    /// `full` | explicit `[[...],...]; [[...],...]` lists.
    pub spec: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub length_scale: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub cycles: usize,
    pub scale_start: f64,
    pub scale_rate: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationConfig {
    pub delta: f64,
    pub subintervals: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    /// Training rows drawn (seeded, without replacement) by `fit`; all
    /// rows when absent.
    pub train_points: Option<usize>,
    /// Add a standard-deviation column to predictions.
    pub with_std: bool,
    /// Labeled evaluation set for `eval`; defaults to `[data]`.
    pub eval_path: Option<PathBuf>,
    /// Ground-truth record for imputation scoring in `eval`.
    pub truth_path: Option<PathBuf>,
    /// Imputation report to score in `eval`.
    pub report_path: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            train_points: None,
            with_std: false,
            eval_path: None,
            truth_path: None,
            report_path: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        config.data.validate()?;
        Ok(config)
    }

    pub fn matrices(&self) -> Result<&MatricesConfig> {
        self.matrices
            .as_ref()
            .context("config is missing the [matrices] section")
    }

    pub fn kernel(&self) -> Result<&KernelConfig> {
        self.kernel
            .as_ref()
            .context("config is missing the [kernel] section")
    }

    pub fn schedule(&self) -> Result<&ScheduleConfig> {
        self.schedule
            .as_ref()
            .context("config is missing the [schedule] section")
    }

    pub fn imputation(&self) -> Result<&ImputationConfig> {
        self.imputation
            .as_ref()
            .context("config is missing the [imputation] section")
    }
}

impl DataConfig {
    fn validate(&self) -> Result<()> {
        match (&self.path, &self.generator) {
            (Some(_), Some(_)) => {
                bail!("[data]: set either `path` or `generator`, not both")
            }
            (None, None) => bail!("[data]: one of `path` or `generator` is required"),
            _ => {}
        }
        if let Some(name) = &self.generator {
            match name.as_str() {
                "additive" | "power" | "coupled" | "quartic" => {
                    if self.n.is_none() {
                        bail!("[data]: generator '{name}' requires `n`");
                    }
                }
                "uneven" => {
                    if self.n_normal.is_none() || self.n_uniform.is_none() {
                        bail!("[data]: generator 'uneven' requires `n_normal` and `n_uniform`");
                    }
                }
                other => bail!(
                    "[data]: unknown generator '{other}' \
                     (expected additive, power, coupled, quartic or uneven)"
                ),
            }
            if self.scale {
                bail!("[data]: `scale` applies to file data; generated data are already scaled");
            }
        }
        Ok(())
    }
}
