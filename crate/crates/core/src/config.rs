//! Run configuration: chain presets, sweep specifications and the JSON config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, Species};
use crate::trajectory::{KindName, TrajectorySpec};
use crate::{Error, IntegratorOptions, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Default transport distance, m.
pub const DEFAULT_DISTANCE: f64 = 370e-6;
/// Default axial frequency of the first ion, Hz.
pub const DEFAULT_TRAP_FREQUENCY_HZ: f64 = 2e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainPreset {
    BeMg,
    BeMgMgBe,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub preset: ChainPreset,
    /// Ion masses in atomic mass units, ion 1 first; required for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses_amu: Option<Vec<f64>>,
    /// Axial frequency of ion 1 alone in the trap, Hz.
    pub trap_frequency_hz: f64,
}

impl ChainSpec {
    pub fn preset(preset: ChainPreset) -> Self {
        Self {
            preset,
            masses_amu: None,
            trap_frequency_hz: DEFAULT_TRAP_FREQUENCY_HZ,
        }
    }

    pub fn species(&self) -> Result<Vec<Species>> {
        let be = Species::beryllium9();
        let mg = Species::magnesium24();
        match (&self.preset, &self.masses_amu) {
            (ChainPreset::BeMg, None) => Ok(vec![be, mg]),
            (ChainPreset::BeMgMgBe, None) => Ok(vec![be, mg, mg, be]),
            (ChainPreset::Custom, Some(m)) => m.iter().map(|&a| Species::from_amu(a)).collect(),
            (ChainPreset::Custom, None) => Err(Error::Config("custom chain needs masses_amu".into())),
            (_, Some(_)) => Err(Error::Config("masses_amu is only valid for a custom chain".into())),
        }
    }

    pub fn build(&self, distance: f64) -> Result<ChainConfig> {
        if !(self.trap_frequency_hz.is_finite() && self.trap_frequency_hz > 0.0) {
            return Err(Error::Config("trap_frequency_hz must be positive".into()));
        }
        ChainConfig::from_trap_frequency(
            self.species()?,
            2.0 * std::f64::consts::PI * self.trap_frequency_hz,
            distance,
        )
    }

    pub fn period(&self) -> f64 {
        1.0 / self.trap_frequency_hz
    }
}

/// Transport durations of a sweep, s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfGrid {
    Range { min_s: f64, max_s: f64, count: usize },
    Values { values_s: Vec<f64> },
}

impl TfGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match *self {
            TfGrid::Range { min_s, max_s, count } => {
                if count == 0 {
                    return Err(Error::Config("tf grid count must be at least 1".into()));
                }
                if count == 1 {
                    if min_s != max_s {
                        return Err(Error::Config("a single-point tf grid needs min_s == max_s".into()));
                    }
                    vec![min_s]
                } else {
                    let step = (max_s - min_s) / (count - 1) as f64;
                    (0..count)
                        .map(|i| if i == count - 1 { max_s } else { min_s + step * i as f64 })
                        .collect()
                }
            }
            TfGrid::Values { ref values_s } => values_s.clone(),
        };
        if v.is_empty() {
            return Err(Error::Config("tf grid is empty".into()));
        }
        if v.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("tf values must be positive".into()));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tf grid must be strictly increasing".into()));
        }
        Ok(v)
    }
}

/// Which excitation model a series reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    Full,
    Uncoupled,
}

/// A trajectory family plus the model it is evaluated with. Written as the
/// kind name, with a `-uncoupled` suffix for the uncoupled-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesName {
    pub kind: KindName,
    pub model: Model,
}

impl SeriesName {
    pub fn full(kind: KindName) -> Self {
        Self { kind, model: Model::Full }
    }

    pub fn uncoupled(kind: KindName) -> Self {
        Self {
            kind,
            model: Model::Uncoupled,
        }
    }
}

impl fmt::Display for SeriesName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.model {
            Model::Full => write!(f, "{}", self.kind),
            Model::Uncoupled => write!(f, "{}-uncoupled", self.kind),
        }
    }
}

impl FromStr for SeriesName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_suffix("-uncoupled") {
            Some(k) => Ok(Self::uncoupled(k.parse()?)),
            None => Ok(Self::full(s.parse()?)),
        }
    }
}

impl Serialize for SeriesName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeriesName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", deny_unknown_fields)]
pub enum ErfSigma {
    /// σ = fraction · tf
    Fraction { fraction: f64 },
    Fixed { sigma_s: f64 },
    /// Minimize the full-simulation excitation over σ at every tf.
    Optimize,
}

impl Default for ErfSigma {
    fn default() -> Self {
        ErfSigma::Fraction { fraction: 0.125 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotScale {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ScanRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        TfGrid::Range {
            min_s: self.min,
            max_s: self.max,
            count: self.count,
        }
        .values()
        .map_err(|_| Error::Config("omega scan range must be positive and increasing".into()))
    }
}

/// Fully resolved sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub chain: ChainSpec,
    pub distance_m: f64,
    pub kinds: Vec<SeriesName>,
    pub tf: TfGrid,
    /// Multipliers on the centre-of-mass frequency used by the analytic families.
    pub omega_scale: Vec<f64>,
    #[serde(default)]
    pub erf_sigma: ErfSigma,
    pub omega_scan: ScanRange,
    pub rel_tol: f64,
    #[serde(default)]
    pub plot: PlotScale,
}

impl SweepSpec {
    pub fn chain(&self) -> Result<ChainConfig> {
        self.chain.build(self.distance_m)
    }

    pub fn tf_values(&self) -> Result<Vec<f64>> {
        self.tf.values()
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::with_rel_tol(self.rel_tol)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain()?;
        self.tf_values()?;
        self.omega_scan.values()?;
        if self.kinds.is_empty() {
            return Err(Error::Config("at least one trajectory kind is required".into()));
        }
        if self.omega_scale.is_empty() || self.omega_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("omega_scale must be a non-empty list of positive factors".into()));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0 && self.rel_tol < 1e-3) {
            return Err(Error::Config("rel_tol must lie in (0, 1e-3)".into()));
        }
        match self.erf_sigma {
            ErfSigma::Fraction { fraction } if !(fraction > 0.0 && fraction.is_finite()) => {
                Err(Error::Config("erf sigma fraction must be positive".into()))
            }
            ErfSigma::Fixed { sigma_s } if !(sigma_s > 0.0 && sigma_s.is_finite()) => {
                Err(Error::Config("erf sigma must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig1,
    Fig3,
    Fig4a,
    Fig4b,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig3" => Ok(Preset::Fig3),
            "fig4a" => Ok(Preset::Fig4a),
            "fig4b" => Ok(Preset::Fig4b),
            _ => Err(Error::Config(format!("unknown preset '{s}' (fig1, fig3, fig4a, fig4b)"))),
        }
    }
}

impl Preset {
    pub fn spec(self) -> SweepSpec {
        let chain = ChainSpec::preset(ChainPreset::BeMg);
        let period = chain.period();
        let base = SweepSpec {
            chain,
            distance_m: DEFAULT_DISTANCE,
            kinds: Vec::new(),
            tf: TfGrid::Range {
                min_s: period,
                max_s: 20.0 * period,
                count: 20,
            },
            omega_scale: vec![1.0],
            erf_sigma: ErfSigma::default(),
            omega_scan: ScanRange {
                min: 0.95,
                max: 1.0,
                count: 51,
            },
            rel_tol: 1e-10,
            plot: PlotScale::Log,
        };
        use KindName::*;
        match self {
            Preset::Fig1 => SweepSpec {
                kinds: vec![
                    SeriesName::full(DesignedNonic),
                    SeriesName::uncoupled(DesignedNonic),
                    SeriesName::full(NonicAnalytic),
                    SeriesName::full(Cosine),
                ],
                ..base
            },
            Preset::Fig3 => SweepSpec {
                chain: ChainSpec::preset(ChainPreset::BeMgMgBe),
                kinds: vec![SeriesName::full(NonicAnalytic)],
                tf: TfGrid::Range {
                    min_s: 3.0 * period,
                    max_s: 20.0 * period,
                    count: 35,
                },
                omega_scale: vec![1.0, 0.983],
                ..base
            },
            Preset::Fig4a => SweepSpec {
                kinds: vec![SeriesName::full(Linear)],
                tf: TfGrid::Range {
                    min_s: 0.02e-6,
                    max_s: 120e-6,
                    count: 6000,
                },
                plot: PlotScale::Linear,
                ..base
            },
            Preset::Fig4b => SweepSpec {
                kinds: vec![SeriesName::full(NonicAnalytic), SeriesName::full(Erf)],
                tf: TfGrid::Range {
                    min_s: 2e-6,
                    max_s: 10e-6,
                    count: 17,
                },
                erf_sigma: ErfSigma::Optimize,
                ..base
            },
        }
    }
}

/// Contents of a `--config` file. Every field except `schema_version` is
/// optional and overrides the preset it is applied to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<SeriesName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf: Option<TfGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_scale: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erf_sigma: Option<ErfSigma>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_scan: Option<ScanRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotScale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Single trajectory for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySpec>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Resolves the sweep: `preset` (argument first, then the file's, then
    /// fig1), overlaid with the file's fields.
    pub fn resolve(&self, preset: Option<Preset>) -> Result<SweepSpec> {
        let mut spec = preset.or(self.preset).unwrap_or(Preset::Fig1).spec();
        if let Some(c) = &self.chain {
            spec.chain = c.clone();
        }
        if let Some(d) = self.distance_m {
            spec.distance_m = d;
        }
        if let Some(k) = &self.kinds {
            spec.kinds = k.clone();
        }
        if let Some(t) = &self.tf {
            spec.tf = t.clone();
        }
        if let Some(s) = &self.omega_scale {
            spec.omega_scale = s.clone();
        }
        if let Some(s) = self.erf_sigma {
            spec.erf_sigma = s;
        }
        if let Some(s) = self.omega_scan {
            spec.omega_scan = s;
        }
        if let Some(r) = self.rel_tol {
            spec.rel_tol = r;
        }
        if let Some(p) = self.plot {
            spec.plot = p;
        }
        spec.validate()?;
        Ok(spec)
    }
}
