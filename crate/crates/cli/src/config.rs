//! The experiment configuration: a TOML file whose sections mirror the
//! library's own config types, so defaults, validation, and serialization
//! stay in one place.
//!
//! Every run writes a `manifest.toml` holding the fully resolved
//! configuration (all defaults materialized, the wealth extent made
//! explicit, the effective seed recorded) plus a `[provenance]` section
//! with checksums and solver telemetry. The manifest parses as a
//! configuration again — `[provenance]` is carried but never read — so
//! re-feeding a manifest reproduces the run exactly.

use serde::{Deserialize, Serialize};

use mfg_core::{
    default_extent, ActionGrid, GameInstance, InitialWealth, InteractionMode, ModelParams,
    SolverConfig, TimeGrid, UtilitySpec, WealthGrid,
};

/// Time grid section: dyadic order `n` and integer horizon `T`, giving
/// `T * 2^n` steps of length `2^-n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub order: u32,
    pub horizon: u32,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            order: 1,
            horizon: 300,
        }
    }
}

/// Wealth grid section. When the extent is omitted it is derived from the
/// initial law and the dynamics: the lower edge sits one full-throttle
/// cost run below the 0.1th percentile, the upper edge one reward per step
/// above the 99.9th.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WealthGridSection {
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

impl Default for WealthGridSection {
    fn default() -> Self {
        Self {
            nodes: 512,
            x_min: None,
            x_max: None,
        }
    }
}

/// Action grid section: node count on `[0, a_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionGridSection {
    pub nodes: usize,
}

impl Default for ActionGridSection {
    fn default() -> Self {
        Self { nodes: 128 }
    }
}

/// Refinement study section; the `--n-min` / `--n-max` flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    pub n_min: u32,
    pub n_max: u32,
}

impl Default for RefineSection {
    fn default() -> Self {
        Self { n_min: 0, n_max: 3 }
    }
}

/// Population simulation section; `--seed` overrides the seed.
///
/// `zero_policy` replaces the equilibrium policy with the idle policy,
/// which freezes every trajectory (no cost drift, no rewards) and is the
/// canonical degenerate check for the simulation plumbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_agents: usize,
    pub mode: InteractionMode,
    pub seed: u64,
    pub zero_policy: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_agents: 1000,
            mode: InteractionMode::Validation,
            seed: 1,
            zero_policy: false,
        }
    }
}

/// Output section; the `--out` flag overrides the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// The whole experiment file. Unknown keys anywhere are rejected; every
/// section may be omitted and defaults to the benchmark mining setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub utility: UtilitySpec,
    pub time: TimeSection,
    pub wealth_grid: WealthGridSection,
    pub action_grid: ActionGridSection,
    pub initial: InitialWealth,
    pub solver: SolverConfig,
    pub refine: RefineSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
    /// Run provenance written into manifests: command, version, telemetry,
    /// artifact checksums. Accepted on input and ignored, so a manifest is
    /// itself a valid configuration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<toml::Table>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            utility: UtilitySpec::CrraSqrt,
            time: TimeSection::default(),
            wealth_grid: WealthGridSection::default(),
            action_grid: ActionGridSection::default(),
            initial: InitialWealth::Normal {
                mean: 10.0,
                sd: 2.0,
            },
            solver: SolverConfig::default(),
            refine: RefineSection::default(),
            simulation: SimulationSection::default(),
            output: OutputSection::default(),
            provenance: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a configuration file, rejecting unknown keys.
    pub fn parse(text: &str) -> Result<Self, String> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-field checks beyond what the section types enforce.
    pub fn validate(&self) -> Result<(), String> {
        if self.refine.n_min > self.refine.n_max {
            return Err(format!(
                "refine.n_min {} exceeds refine.n_max {}",
                self.refine.n_min, self.refine.n_max
            ));
        }
        if self.simulation.n_agents == 0 {
            return Err("simulation.n_agents must be at least 1".into());
        }
        match (self.wealth_grid.x_min, self.wealth_grid.x_max) {
            (Some(lo), Some(hi)) if lo >= hi => {
                return Err(format!(
                    "wealth_grid extent [{lo}, {hi}] is empty or reversed"
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds the validated game instance this configuration describes.
    pub fn build_game(&self) -> Result<GameInstance, String> {
        let time = TimeGrid::new(self.time.order, self.time.horizon).map_err(|e| e.to_string())?;
        let (lo, hi) = default_extent(&self.initial, &self.model, &time);
        let x_min = self.wealth_grid.x_min.unwrap_or(lo);
        let x_max = self.wealth_grid.x_max.unwrap_or(hi);
        let wealth =
            WealthGrid::uniform(x_min, x_max, self.wealth_grid.nodes).map_err(|e| e.to_string())?;
        let actions = ActionGrid::uniform(self.model.a_max, self.action_grid.nodes)
            .map_err(|e| e.to_string())?;
        GameInstance::new(
            self.model,
            time,
            wealth,
            actions,
            self.utility.clone(),
            self.initial.clone(),
        )
        .map_err(|e| e.to_string())
    }

    /// The same configuration with every derived quantity pinned: the
    /// wealth extent the run actually used and the effective seed. The
    /// output directory is deliberately not echoed — the manifest lives
    /// inside the directory it describes, and a destination-dependent
    /// manifest would spoil byte-level comparison of identical runs.
    /// Feeding the result back in reproduces the run.
    pub fn resolved(&self, game: &GameInstance, seed: u64) -> ExperimentConfig {
        let mut resolved = self.clone();
        resolved.wealth_grid.x_min = Some(game.wealth().x_min());
        resolved.wealth_grid.x_max = Some(game.wealth().x_max());
        resolved.simulation.seed = seed;
        resolved.provenance = None;
        resolved
    }
}
