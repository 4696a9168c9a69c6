//! Run configuration: JSON blocks for every model layer, merged over
//! defaults and validated before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use ybcav_core::cavity::BraggStack;
use ybcav_core::cavity::depth_for_reduction;
use ybcav_core::defaults;
use ybcav_core::ion::build_level_system;
use ybcav_core::protocols::CalibrationTargets;
use ybcav_core::{
    CavityMode, DetectionChain, EnsembleConfig, Grid, IonSite, LevelConfig, NoiseModel, ProtocolConfig,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatFlags {
    pub pretty_json: bool,
}

impl Default for FormatFlags {
    fn default() -> Self {
        FormatFlags { pretty_json: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BraggBlock {
    pub stack: BraggStack,
    pub wavelength_nm: Grid,
}

impl Default for BraggBlock {
    fn default() -> Self {
        BraggBlock {
            stack: BraggStack::default(),
            wavelength_nm: Grid::new(800.0, 1200.0, 801),
        }
    }
}

/// Synthetic reflection measurement used by the `reflection` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionBlock {
    /// External to total cavity loss rate.
    pub coupling_ratio: f64,
    /// Scan half-width in cavity linewidths.
    pub span_linewidths: f64,
    pub points: usize,
    /// Gaussian noise added to each reflectance sample.
    pub noise: f64,
}

impl Default for ReflectionBlock {
    fn default() -> Self {
        ReflectionBlock {
            coupling_ratio: 0.4,
            span_linewidths: 5.0,
            points: 801,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurcellBlock {
    pub depths_nm: Grid,
}

impl Default for PurcellBlock {
    fn default() -> Self {
        PurcellBlock {
            depths_nm: Grid::new(0.0, 150.0, 151),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output: PathBuf,
    pub format: FormatFlags,
    pub levels: LevelConfig,
    pub cavity: CavityMode,
    pub site: IonSite,
    pub noise: NoiseModel,
    pub chain: DetectionChain,
    pub protocol: ProtocolConfig,
    pub calibration: CalibrationTargets,
    pub ensemble: EnsembleConfig,
    pub bragg: BraggBlock,
    pub reflection: ReflectionBlock,
    pub purcell: PurcellBlock,
}

impl Default for RunConfig {
    /// Default site sits at the depth giving the 64x lifetime reduction.
    fn default() -> Self {
        let levels = LevelConfig::default();
        let cavity = CavityMode::default();
        let system = build_level_system(&levels).expect("default level system is valid");
        let depth = depth_for_reduction(&system, &IonSite::default(), &cavity, defaults::LIFETIME_REDUCTION)
            .expect("default cavity reaches the reference reduction");
        RunConfig {
            master_seed: 0,
            output: PathBuf::from("out"),
            format: FormatFlags::default(),
            levels,
            cavity,
            site: IonSite::at_depth(depth),
            noise: NoiseModel::default(),
            chain: DetectionChain::default(),
            protocol: ProtocolConfig::default(),
            calibration: CalibrationTargets::default(),
            ensemble: EnsembleConfig::default(),
            bragg: BraggBlock::default(),
            reflection: ReflectionBlock::default(),
            purcell: PurcellBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        build_level_system(&self.levels)?;
        self.cavity.validate()?;
        self.site.validate()?;
        self.noise.validate()?;
        self.chain.validate()?;
        self.protocol.validate()?;
        self.calibration.validate()?;
        self.ensemble.validate()?;
        self.bragg.stack.validate()?;
        self.bragg.wavelength_nm.validate("bragg.wavelength_nm")?;
        self.purcell.depths_nm.validate("purcell.depths_nm")?;
        let r = &self.reflection;
        if !(0.0..=1.0).contains(&r.coupling_ratio) {
            return Err(CliError::field("reflection.coupling_ratio", "must lie in [0, 1]"));
        }
        if !(r.span_linewidths > 0.0 && r.span_linewidths.is_finite()) {
            return Err(CliError::field("reflection.span_linewidths", "must be > 0"));
        }
        if r.points < 5 {
            return Err(CliError::field("reflection.points", "need at least 5"));
        }
        if !(r.noise >= 0.0 && r.noise.is_finite()) {
            return Err(CliError::field("reflection.noise", "must be >= 0"));
        }
        Ok(())
    }

    /// Compact JSON used for hashing and for the resolved-config artifact.
    pub fn to_json(&self, pretty: bool) -> String {
        if pretty {
            serde_json::to_string_pretty(self).expect("config serializes")
        } else {
            serde_json::to_string(self).expect("config serializes")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Reported measurement or design value.
    Paper,
    /// Computed from reported values.
    Derived,
    /// Standard reference data.
    Reference,
    /// Stand-in with no reported value.
    Placeholder,
    /// Solver, sampling or output setting.
    Numerical,
    User,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub field: String,
    pub source: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub config: RunConfig,
    pub audit: Vec<AuditEntry>,
}

impl Resolved {
    pub fn defaulted(&self) -> impl Iterator<Item = &AuditEntry> {
        self.audit.iter().filter(|a| a.source != Provenance::User)
    }
}

/// Values treated as a whole when merging user input over defaults.
const ATOMIC: &[&str] = &["protocol.thermal_weights", "levels.levels", "bragg.stack.cell"];

const PAPER: &[&str] = &[
    "cavity.nu0_ghz",
    "cavity.q",
    "cavity.v_norm",
    "cavity.field_halving_nm",
    "cavity.interface_fraction",
    "chain.grating_efficiency",
    "chain.splitter_fraction",
    "noise.tau_c",
    "calibration.",
    "protocol.readout_pulses",
    "protocol.repetition_period",
    "ensemble.concentration",
    "ensemble.zero_spin_peak_ghz",
    "bragg.stack.total_periods",
    "bragg.stack.tapered_periods",
    "bragg.stack.removed_periods",
    "bragg.stack.slab_thickness_nm",
    "bragg.stack.design_wavelength_nm",
];

const DERIVED: &[&str] = &[
    "levels.gamma_bulk",
    "levels.branch_a",
    "levels.branch_c",
    "levels.branch_aux",
    "site.depth_nm",
    "noise.sigma",
    "noise.gamma_phi",
    "protocol.ramsey_fit",
    "protocol.echo_fit",
];

const REFERENCE: &[&str] = &["ensemble.yb171_abundance", "ensemble.zero_spin_abundance"];

const NUMERICAL: &[&str] = &[
    "master_seed",
    "output",
    "format.",
    "protocol.shots",
    "protocol.tol",
    "protocol.noise_samples",
    "protocol.rabi_noise_samples",
    "protocol.pump_noise_samples",
    "protocol.lifetime_bins",
    "protocol.lifetime_span",
    "protocol.rabi_durations",
    "protocol.ramsey_delays",
    "protocol.echo_delays",
    "protocol.pump_detunings_mhz",
    "protocol.g2_",
    "protocol.poisson_counts",
    "ensemble.scan_ghz",
    "ensemble.lifetime_bins",
    "ensemble.shots",
    "bragg.wavelength_nm",
    "reflection.span_linewidths",
    "reflection.points",
    "reflection.noise",
    "purcell.",
];

fn matches(path: &str, patterns: &[&str]) -> bool {
    patterns.iter().any(|p| {
        if p.ends_with('.') || p.ends_with('_') {
            path.starts_with(p)
        } else {
            path == *p || path.starts_with(&format!("{p}."))
        }
    })
}

/// Where the default of a field comes from.
pub fn default_provenance(path: &str) -> Provenance {
    if matches(path, PAPER) {
        Provenance::Paper
    } else if matches(path, DERIVED) {
        Provenance::Derived
    } else if matches(path, REFERENCE) {
        Provenance::Reference
    } else if matches(path, NUMERICAL) {
        Provenance::Numerical
    } else {
        Provenance::Placeholder
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn merge(base: &mut Value, user: &Value, prefix: &str) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) if !ATOMIC.contains(&prefix) => {
            for (k, v) in u {
                let path = join(prefix, k);
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &path),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn audit(defaults: &Map<String, Value>, user: Option<&Map<String, Value>>, prefix: &str, out: &mut Vec<AuditEntry>) {
    for (k, v) in defaults {
        let path = join(prefix, k);
        let given = user.and_then(|u| u.get(k));
        match (v, given) {
            (Value::Object(inner), g) if !ATOMIC.contains(&path.as_str()) => {
                let g = match g {
                    Some(Value::Object(m)) => Some(m),
                    Some(_) => {
                        out.push(AuditEntry {
                            field: path,
                            source: Provenance::User,
                        });
                        continue;
                    }
                    None => None,
                };
                audit(inner, g, &path, out);
            }
            (_, Some(_)) => out.push(AuditEntry {
                field: path,
                source: Provenance::User,
            }),
            (_, None) => out.push(AuditEntry {
                source: default_provenance(&path),
                field: path,
            }),
        }
    }
}

/// Merge a JSON document over the defaults, reject unknown keys and
/// validate every block.
pub fn parse_config_str(text: &str) -> Result<Resolved, CliError> {
    let user: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(user_map) = &user else {
        return Err(CliError::field("<root>", "config must be a JSON object"));
    };
    let mut merged = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    let Value::Object(default_map) = merged.clone() else {
        unreachable!("RunConfig serializes to an object")
    };
    merge(&mut merged, &user, "");
    let config: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
        let path = e.path().to_string();
        CliError::field(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    let mut entries = Vec::new();
    audit(&default_map, Some(user_map), "", &mut entries);
    Ok(Resolved { config, audit: entries })
}

pub fn parse_config(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
