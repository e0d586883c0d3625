//! Run configuration file. Angles are in degrees here and converted to
//! radians once, when the core types are built.

use std::path::{Path, PathBuf};

use eraser_core::entanglement::ChshSettings;
use eraser_core::montecarlo::Efficiencies;
use eraser_core::protocol::{ExperimentConfig, HeraldPort, HeraldStrategy};
use eraser_core::tomography::{Basis, BasisPair, TomographySettings};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum HeraldKind {
    Direct,
    Linear,
    Circular,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PortName {
    Plus,
    Minus,
}

impl From<PortName> for HeraldPort {
    fn from(p: PortName) -> Self {
        match p {
            PortName::Plus => HeraldPort::Plus,
            PortName::Minus => HeraldPort::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
pub enum StateName {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "xi+")]
    XiPlus,
    #[serde(rename = "xi-")]
    XiMinus,
    #[serde(rename = "mixture")]
    Mixture,
    /// The A,B pair selected by the configured herald and port.
    #[serde(rename = "heralded")]
    Heralded,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_herald")]
    pub herald: HeraldKind,
    pub gamma_deg: Option<f64>,
    pub qwp_herald_deg: Option<f64>,
    pub qwp_a_deg: Option<f64>,
    pub qwp_b_deg: Option<f64>,
    #[serde(default)]
    pub alpha_deg: f64,
    #[serde(default)]
    pub beta_deg: f64,
    /// `[start, stop, step]`, stop inclusive.
    pub alpha_sweep_deg: Option<[f64; 3]>,
    pub beta_sweep_deg: Option<[f64; 3]>,
    pub port: Option<PortName>,
    /// `[a, a′, b, b′]`
    pub chsh_deg: Option<[f64; 4]>,
    #[serde(default)]
    pub maximize: bool,
    pub state: Option<StateName>,
    /// Basis pairs such as `"zc"`: `z` = x/y, `x` = ±45°, `c` = R/L.
    pub tomography_bases: Option<Vec<String>>,
}

fn default_herald() -> HeraldKind {
    HeraldKind::Linear
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment keys are optional")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub efficiency_a: f64,
    #[serde(default = "one")]
    pub efficiency_b: f64,
    #[serde(default = "one")]
    pub efficiency_h: f64,
}

fn one() -> f64 {
    1.0
}

impl MonteCarloSection {
    pub fn efficiencies(&self) -> Efficiencies {
        Efficiencies {
            a: self.efficiency_a,
            b: self.efficiency_b,
            h: self.efficiency_h,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub name: Option<String>,
    pub pump_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub phi_deg: Option<f64>,
    pub ring_deg: Option<f64>,
    pub azimuth_deg: Option<f64>,
    pub d_mm: Option<f64>,
    pub l_c_mm: Option<f64>,
    pub l_w_mm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            CliError::Usage(format!("{}: {}", path.display(), e.to_string().trim_end()))
        })
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

impl ExperimentSection {
    pub fn herald(&self) -> Result<HeraldStrategy, CliError> {
        let strategy = match self.herald {
            HeraldKind::Direct => {
                if self.gamma_deg.is_some() || self.qwp_herald_deg.is_some() {
                    return Err(CliError::Usage(
                        "experiment.gamma_deg and experiment.qwp_herald_deg need a linear or circular herald".into(),
                    ));
                }
                HeraldStrategy::Direct
            }
            HeraldKind::Linear => {
                if self.qwp_herald_deg.is_some() {
                    return Err(CliError::Usage(
                        "experiment.qwp_herald_deg needs herald = \"circular\"".into(),
                    ));
                }
                HeraldStrategy::LinearPolarizer {
                    gamma: self.gamma_deg.unwrap_or(45.0).to_radians(),
                }
            }
            HeraldKind::Circular => HeraldStrategy::QuarterWavePlusPolarizer {
                qwp_axis: self.qwp_herald_deg.unwrap_or(45.0).to_radians(),
                gamma: self.gamma_deg.unwrap_or(0.0).to_radians(),
            },
        };
        strategy.validate()?;
        Ok(strategy)
    }

    /// Analyzer settings at the configured `alpha_deg`, `beta_deg`.
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::new(
            self.alpha_deg.to_radians(),
            self.beta_deg.to_radians(),
            self.herald()?,
        );
        if let Some(axis) = self.qwp_a_deg {
            cfg = cfg.with_qwp_a(axis.to_radians());
        }
        if let Some(axis) = self.qwp_b_deg {
            cfg = cfg.with_qwp_b(axis.to_radians());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn chsh_settings(&self) -> ChshSettings {
        match self.chsh_deg {
            Some([a, a2, b, b2]) => ChshSettings::from_degrees(a, a2, b, b2),
            None => ChshSettings::standard(),
        }
    }

    pub fn tomography_settings(&self) -> Result<TomographySettings, CliError> {
        let Some(names) = &self.tomography_bases else {
            return Ok(TomographySettings::full());
        };
        let pairs = names
            .iter()
            .map(|name| {
                let letters: Vec<char> = name.chars().collect();
                match letters[..] {
                    [a, b] => match (Basis::from_letter(a), Basis::from_letter(b)) {
                        (Some(a), Some(b)) => Ok(BasisPair::new(a, b)),
                        _ => Err(()),
                    },
                    _ => Err(()),
                }
                .map_err(|()| {
                    CliError::Usage(format!(
                        "experiment.tomography_bases: `{name}` is not a basis pair (letters z, x, c)"
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        TomographySettings::new(pairs)
            .map_err(|e| CliError::Usage(format!("experiment.tomography_bases: {e}")))
    }
}

/// Inclusive sweep `start, start + step, …, ≤ stop`, or the fixed value.
pub fn sweep_values(key: &str, fixed: f64, sweep: Option<[f64; 3]>) -> Result<Vec<f64>, CliError> {
    let Some([start, stop, step]) = sweep else {
        return Ok(vec![fixed]);
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(CliError::Usage(format!(
            "experiment.{key}: empty sweep range [{start}, {stop}, {step}]"
        )));
    }
    let count = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(CliError::Usage(format!(
            "experiment.{key}: {count} points is too many"
        )));
    }
    Ok((0..count).map(|k| start + step * k as f64).collect())
}
