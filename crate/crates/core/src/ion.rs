//! Zero-field level structure of the 171Yb ion: ground and excited
//! hyperfine levels, the optical transitions A and C, and the branching of
//! excited-state decay between them.

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{ensure_positive, ensure_unit_interval, Error, Result};

pub const TRANSITION_A: &str = "A";
pub const TRANSITION_C: &str = "C";

const BRANCH_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrystalAxis {
    #[serde(rename = "a")]
    AAxis,
    #[serde(rename = "c")]
    CAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub name: String,
    pub manifold: Manifold,
    /// Offset from the reference level of its manifold, MHz.
    pub energy_mhz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub name: String,
    pub lower: usize,
    pub upper: usize,
    pub dipole_axis: CrystalAxis,
    /// Absolute optical frequency, GHz.
    pub frequency_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub name: String,
    pub manifold: Manifold,
    pub energy_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub lower: String,
    pub upper: String,
    pub frequency_ghz: f64,
}

/// Inputs to [`build_level_system`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub levels: Vec<LevelSpec>,
    pub transition_a: TransitionSpec,
    pub transition_c: TransitionSpec,
    /// Ground level collecting the decay that escapes both A and C.
    pub shelf: String,
    /// Bulk radiative decay rate, 1/s.
    pub gamma_bulk: f64,
    pub branch_a: f64,
    pub branch_c: f64,
    pub branch_aux: f64,
}

impl Default for LevelConfig {
    /// Default connectivity A = g1<->e0, C = g0<->e0, shelf gaux. Hyperfine
    /// offsets and absolute line positions are placeholders; only optical
    /// detunings enter the dynamics.
    fn default() -> Self {
        let branch_a = default_branch_a();
        let level = |name: &str, manifold, energy_mhz| LevelSpec {
            name: name.into(),
            manifold,
            energy_mhz,
        };
        let a_ghz = defaults::ZERO_SPIN_PEAK_GHZ + 2.5;
        let g1_mhz = 675.0;
        LevelConfig {
            levels: vec![
                level("g0", Manifold::Ground, 0.0),
                level("g1", Manifold::Ground, g1_mhz),
                level("gaux", Manifold::Ground, 0.0),
                level("e0", Manifold::Excited, 0.0),
            ],
            transition_a: TransitionSpec {
                lower: "g1".into(),
                upper: "e0".into(),
                frequency_ghz: a_ghz,
            },
            transition_c: TransitionSpec {
                lower: "g0".into(),
                upper: "e0".into(),
                frequency_ghz: a_ghz + g1_mhz * 1e-3,
            },
            shelf: "gaux".into(),
            gamma_bulk: 1.0 / defaults::BULK_LIFETIME,
            branch_a,
            branch_c: 1.0 - branch_a,
            branch_aux: 0.0,
        }
    }
}

/// A-branching consistent with the 41 us ion and its cyclicity of 10.
pub fn default_branch_a() -> f64 {
    let reduction = defaults::BULK_LIFETIME / defaults::CONTROL_ION_LIFETIME;
    branching_from_observables(reduction, defaults::A_CYCLICITY)
        .expect("reference observables are consistent")
}

/// Validated level structure. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    levels: Vec<Level>,
    transitions: Vec<Transition>,
    shelf: usize,
    gamma_bulk: f64,
    branch_a: f64,
    branch_c: f64,
    branch_aux: f64,
}

pub fn build_level_system(config: &LevelConfig) -> Result<LevelSystem> {
    ensure_positive("levels.gamma_bulk", config.gamma_bulk)?;
    ensure_unit_interval("levels.branch_a", config.branch_a)?;
    ensure_unit_interval("levels.branch_c", config.branch_c)?;
    ensure_unit_interval("levels.branch_aux", config.branch_aux)?;
    let sum = config.branch_a + config.branch_c + config.branch_aux;
    if (sum - 1.0).abs() > BRANCH_SUM_TOL {
        return Err(Error::invalid(
            "levels.branch_a",
            format!("branching fractions must sum to 1, got {sum}"),
        ));
    }
    if config.levels.is_empty() {
        return Err(Error::Empty("levels.levels"));
    }

    let mut levels: Vec<Level> = Vec::with_capacity(config.levels.len());
    for spec in &config.levels {
        if spec.name.is_empty() {
            return Err(Error::invalid("levels.levels", "level names must be non-empty"));
        }
        if levels.iter().any(|l| l.name == spec.name) {
            return Err(Error::invalid(
                "levels.levels",
                format!("duplicate level name `{}`", spec.name),
            ));
        }
        crate::error::ensure_finite("levels.levels.energy_mhz", spec.energy_mhz)?;
        levels.push(Level {
            name: spec.name.clone(),
            manifold: spec.manifold,
            energy_mhz: spec.energy_mhz,
        });
    }

    let index = |field: &str, name: &str, manifold: Manifold| -> Result<usize> {
        let idx = levels
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLevel(name.to_string()))?;
        if levels[idx].manifold != manifold {
            return Err(Error::invalid(
                field,
                format!("level `{name}` must be in the {manifold:?} manifold"),
            ));
        }
        Ok(idx)
    };

    let mut transitions = Vec::with_capacity(2);
    for (name, spec, axis) in [
        (TRANSITION_A, &config.transition_a, CrystalAxis::CAxis),
        (TRANSITION_C, &config.transition_c, CrystalAxis::AAxis),
    ] {
        let field = format!("levels.transition_{}", name.to_lowercase());
        ensure_positive(&field, spec.frequency_ghz)?;
        transitions.push(Transition {
            name: name.to_string(),
            lower: index(&field, &spec.lower, Manifold::Ground)?,
            upper: index(&field, &spec.upper, Manifold::Excited)?,
            dipole_axis: axis,
            frequency_ghz: spec.frequency_ghz,
        });
    }
    let (a, c) = (&transitions[0], &transitions[1]);
    if a.upper != c.upper {
        return Err(Error::invalid(
            "levels.transition_c",
            "A and C must share the excited level",
        ));
    }
    if a.lower == c.lower {
        return Err(Error::invalid(
            "levels.transition_c",
            "A and C must start from different ground levels",
        ));
    }
    let shelf = index("levels.shelf", &config.shelf, Manifold::Ground)?;
    if shelf == a.lower || shelf == c.lower {
        return Err(Error::invalid(
            "levels.shelf",
            "shelf level must differ from the A and C ground levels",
        ));
    }

    Ok(LevelSystem {
        levels,
        transitions,
        shelf,
        gamma_bulk: config.gamma_bulk,
        branch_a: config.branch_a,
        branch_c: config.branch_c,
        branch_aux: config.branch_aux,
    })
}

impl LevelSystem {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, name: &str) -> Result<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownTransition(name.to_string()))
    }

    pub fn level_index(&self, name: &str) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLevel(name.to_string()))
    }

    pub fn a(&self) -> &Transition {
        &self.transitions[0]
    }

    pub fn c(&self) -> &Transition {
        &self.transitions[1]
    }

    /// The excited level shared by A and C.
    pub fn excited(&self) -> usize {
        self.transitions[0].upper
    }

    pub fn shelf(&self) -> usize {
        self.shelf
    }

    pub fn ground_levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.manifold == Manifold::Ground)
            .map(|(i, _)| i)
    }

    pub fn gamma_bulk(&self) -> f64 {
        self.gamma_bulk
    }

    pub fn bulk_lifetime(&self) -> f64 {
        1.0 / self.gamma_bulk
    }

    pub fn branch_a(&self) -> f64 {
        self.branch_a
    }

    pub fn branch_c(&self) -> f64 {
        self.branch_c
    }

    pub fn branch_aux(&self) -> f64 {
        self.branch_aux
    }
}

/// Solve for the A-branching fraction given the measured lifetime
/// reduction and the A-transition cyclicity.
///
/// With total rate `G0 (1 + F bA)` and A rate `G0 bA (1 + F)` the two
/// observables fix `bA = (cyclicity + 1 - reduction) / (cyclicity + 1)`.
pub fn branching_from_observables(reduction: f64, cyclicity: f64) -> Result<f64> {
    ensure_positive("cyclicity", cyclicity)?;
    crate::error::ensure_finite("reduction", reduction)?;
    if reduction <= 1.0 {
        return Err(Error::invalid(
            "reduction",
            format!("lifetime reduction must exceed 1, got {reduction}"),
        ));
    }
    let branch = (cyclicity + 1.0 - reduction) / (cyclicity + 1.0);
    if branch <= 0.0 || branch >= 1.0 {
        return Err(Error::Infeasible(format!(
            "reduction {reduction} and cyclicity {cyclicity} imply branch_A = {branch}, outside (0, 1)"
        )));
    }
    Ok(branch)
}

/// Mean number of A photons emitted before the ion leaves the A cycle.
pub fn transition_cyclicity(levels: &LevelSystem, f_eff: f64) -> Result<f64> {
    crate::error::ensure_non_negative("f_eff", f_eff)?;
    let b = levels.branch_a();
    if b >= 1.0 {
        return Err(Error::invalid(
            "levels.branch_a",
            "fully cyclic A transition has unbounded cyclicity",
        ));
    }
    Ok(b * (1.0 + f_eff) / (1.0 - b))
}
