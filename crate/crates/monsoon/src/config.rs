//! Run configuration: one flat TOML file per run.
//!
//! Every key is optional. Relative paths are resolved against the directory
//! of the configuration file. The SHA-256 of the resolved configuration is
//! stamped into the header of every output file; `worker_count` and
//! `out_dir` are left out of the hash because they do not affect results.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use monsoon_core::patterns::{FamilyRule, ProminenceRule};
use monsoon_core::sampler::{Initialization, SamplerConfig};
use monsoon_core::stats::mean_std;
use monsoon_core::synth::{SynthEmission, SynthSpec};
use monsoon_core::{EmissionParams, ModelParams};

/// Width of the day-label link to the daily aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregateSigma {
    /// Population standard deviation of the daily aggregate.
    Auto,
    Off,
    Value(f64),
}

impl Serialize for AggregateSigma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AggregateSigma::Auto => s.serialize_str("auto"),
            AggregateSigma::Off => s.serialize_str("off"),
            AggregateSigma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AggregateSigma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Name(n) if n == "auto" => Ok(AggregateSigma::Auto),
            Raw::Name(n) if n == "off" => Ok(AggregateSigma::Off),
            Raw::Name(n) => Err(serde::de::Error::custom(format!("aggregate_sigma must be \"auto\", \"off\" or a number, got {n:?}"))),
            Raw::Int(v) => Ok(AggregateSigma::Value(v as f64)),
            Raw::Float(v) => Ok(AggregateSigma::Value(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    ThresholdLocalMean,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Rainfall CSV `location_id,date,rain_mm`.
    pub data: Option<PathBuf>,
    /// Geometry CSV `location_id,lat,lon`.
    pub geometry: Option<PathBuf>,
    /// Mask CSVs `location_id,flag` used to tag pattern families.
    pub monsoon_mask: Option<PathBuf>,
    pub north_mask: Option<PathBuf>,
    /// Ground-truth CSV written by `synth`, used by `evaluate` when present.
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub grid_spacing: f64,
    pub seed: u64,

    pub j_temporal: f64,
    pub j_spatial: f64,
    pub lambda_ss: f64,
    pub lambda_st: f64,
    pub dry_rate: f64,
    pub wet_shape: f64,
    pub wet_rate: f64,
    pub zero_mass_dry: f64,
    pub zero_mass_wet: f64,
    pub aggregate_sigma: AggregateSigma,
    pub eta: f64,
    pub zeta: f64,
    pub max_clusters_u: usize,
    pub max_clusters_v: usize,

    pub n_sweeps: usize,
    pub burn_in: usize,
    pub init: InitMode,
    pub track_mode: bool,
    pub worker_count: usize,

    pub min_run: usize,
    pub include_cross_season: bool,
    pub span_seasons: bool,
    /// `"5/8"`, `"4/8"` or a minimum number of years such as `"3"`.
    pub prominence: String,
    pub family_low_quantile: f64,
    /// `[label, family]` pairs (one-based labels) overriding the family rule.
    pub family_overrides: Vec<[u64; 2]>,
    pub subseq_k: usize,
    pub subseq_top: usize,
    /// Cluster counts for the baselines; empty means the model's realized counts.
    pub baseline_ks: Vec<usize>,

    pub sim_seasons: usize,
    pub sim_length: usize,
    /// Transition matrix and pattern files for `simulate`; default to the
    /// `analyze` and `fit` outputs in `out_dir`.
    pub transitions: Option<PathBuf>,
    pub patterns: Option<PathBuf>,

    pub synth_rows: usize,
    pub synth_cols: usize,
    pub synth_years: usize,
    pub synth_patterns: usize,
    pub synth_stay: f64,
    pub synth_flip_noise: f64,
    pub synth_dry_mean_mm: f64,
    pub synth_wet_mean_mm: f64,
    pub synth_wet_shape: f64,
    pub synth_first_year: i32,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelParams::default();
        let sampler = SamplerConfig::default();
        let synth = SynthEmission::default();
        Self {
            data: None,
            geometry: None,
            monsoon_mask: None,
            north_mask: None,
            truth: None,
            out_dir: PathBuf::from("out"),
            grid_spacing: 1.0,
            seed: 0,
            j_temporal: model.j_temporal,
            j_spatial: model.j_spatial,
            lambda_ss: model.lambda_ss,
            lambda_st: model.lambda_st,
            dry_rate: model.emission.dry_rate,
            wet_shape: model.emission.wet_shape,
            wet_rate: model.emission.wet_rate,
            zero_mass_dry: model.emission.zero_mass_dry,
            zero_mass_wet: model.emission.zero_mass_wet,
            aggregate_sigma: AggregateSigma::Off,
            eta: model.eta,
            zeta: model.zeta,
            max_clusters_u: model.max_clusters_u,
            max_clusters_v: model.max_clusters_v,
            n_sweeps: sampler.n_sweeps,
            burn_in: sampler.burn_in,
            init: InitMode::ThresholdLocalMean,
            track_mode: sampler.track_mode,
            worker_count: sampler.worker_count,
            min_run: monsoon_core::spells::ALL_INDIA_MIN_RUN,
            include_cross_season: false,
            span_seasons: false,
            prominence: "5/8".into(),
            family_low_quantile: FamilyRule::default().low_quantile,
            family_overrides: Vec::new(),
            subseq_k: 3,
            subseq_top: 20,
            baseline_ks: Vec::new(),
            sim_seasons: 10,
            sim_length: monsoon_core::grid::SEASON_LENGTH,
            transitions: None,
            patterns: None,
            synth_rows: 8,
            synth_cols: 8,
            synth_years: 2,
            synth_patterns: 4,
            synth_stay: 0.9,
            synth_flip_noise: 0.1,
            synth_dry_mean_mm: synth.dry_mean_mm,
            synth_wet_mean_mm: synth.wet_mean_mm,
            synth_wet_shape: synth.wet_shape,
            synth_first_year: 2000,
        }
    }
}

/// Hex SHA-256 of a resolved configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigHash(String);

impl fmt::Display for ConfigHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    /// Reads a configuration file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.data,
            &mut self.geometry,
            &mut self.monsoon_mask,
            &mut self.north_mask,
            &mut self.truth,
            &mut self.transitions,
            &mut self.patterns,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        resolve(&mut self.out_dir);
    }

    pub fn hash(&self) -> ConfigHash {
        let mut canonical = self.clone();
        canonical.worker_count = 1;
        canonical.out_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("configuration serializes");
        let digest = Sha256::digest(text.as_bytes());
        ConfigHash(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Model parameters; `aggregate_sigma = "auto"` resolves against the
    /// daily aggregate `y` (a constant aggregate switches the link off).
    pub fn model_params(&self, y: &[f64]) -> Result<ModelParams> {
        let aggregate_sigma = match self.aggregate_sigma {
            AggregateSigma::Off => f64::INFINITY,
            AggregateSigma::Value(v) => v,
            AggregateSigma::Auto => match mean_std(y) {
                Some((_, sd)) if sd > 0.0 => sd,
                _ => f64::INFINITY,
            },
        };
        let params = ModelParams {
            j_temporal: self.j_temporal,
            j_spatial: self.j_spatial,
            lambda_ss: self.lambda_ss,
            lambda_st: self.lambda_st,
            emission: EmissionParams {
                dry_rate: self.dry_rate,
                wet_shape: self.wet_shape,
                wet_rate: self.wet_rate,
                zero_mass_dry: self.zero_mass_dry,
                zero_mass_wet: self.zero_mass_wet,
            },
            aggregate_sigma,
            eta: self.eta,
            zeta: self.zeta,
            max_clusters_u: self.max_clusters_u,
            max_clusters_v: self.max_clusters_v,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        let config = SamplerConfig {
            n_sweeps: self.n_sweeps,
            burn_in: self.burn_in,
            seed: self.seed,
            init: match self.init {
                InitMode::ThresholdLocalMean => Initialization::ThresholdLocalMean,
                InitMode::Random => Initialization::Random,
            },
            track_mode: self.track_mode,
            worker_count: self.worker_count,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn prominence_rule(&self) -> Result<ProminenceRule> {
        match self.prominence.trim() {
            "5/8" => Ok(ProminenceRule::FiveOfEight),
            "4/8" => Ok(ProminenceRule::FourOfEight),
            other => match other.parse::<usize>() {
                Ok(n) => Ok(ProminenceRule::MinYears(n)),
                Err(_) => bail!("prominence must be \"5/8\", \"4/8\" or a number of years, got {other:?}"),
            },
        }
    }

    /// Family rule with overrides converted to zero-based labels.
    pub fn family_rule(&self) -> Result<FamilyRule> {
        let mut rule = FamilyRule { low_quantile: self.family_low_quantile, ..FamilyRule::default() };
        for &[label, family] in &self.family_overrides {
            if label == 0 || !(1..=3).contains(&family) {
                bail!("family override [{label}, {family}]: labels start at 1 and families are 1, 2 or 3");
            }
            rule.overrides.insert(label as usize - 1, family as u8);
        }
        Ok(rule)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let mut spec = SynthSpec::banded(
            self.synth_rows,
            self.synth_cols,
            self.synth_years,
            self.synth_patterns,
            self.synth_stay,
            self.synth_flip_noise,
            self.seed,
        );
        spec.emission = SynthEmission {
            dry_mean_mm: self.synth_dry_mean_mm,
            wet_mean_mm: self.synth_wet_mean_mm,
            wet_shape: self.synth_wet_shape,
        };
        spec.first_year = self.synth_first_year;
        spec.validate()?;
        if !(0.0..=1.0).contains(&self.synth_stay) {
            bail!("synth_stay must lie in [0, 1], got {}", self.synth_stay);
        }
        Ok(spec)
    }

    /// An input file: the configured path, or `default_name` inside `out_dir`.
    pub fn input(&self, path: &Option<PathBuf>, key: &str, default_name: &str) -> Result<PathBuf> {
        let p = path.clone().unwrap_or_else(|| self.out_dir.join(default_name));
        if !p.is_file() {
            bail!("{key} file {} does not exist", p.display());
        }
        Ok(p)
    }
}
