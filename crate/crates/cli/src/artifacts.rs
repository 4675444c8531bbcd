//! CSV and manifest emission, plus re-loading of solve artifacts.
//!
//! Every CSV carries a header row and a fixed column order. Floats are
//! printed with the shortest representation that parses back to the same
//! bits, so artifacts are lossless: a policy written to disk and read
//! back drives a simulation identically to the in-memory table.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use mfg_core::{
    EquilibriumResult, GameInstance, HashRateFlow, PolicyTable, PopulationTrajectory, TimeGrid,
    WealthStats,
};

use crate::config::ExperimentConfig;

/// One output directory and the checksums of everything written into it.
pub struct ArtifactSet {
    dir: PathBuf,
    checksums: Vec<(String, String)>,
}

impl ArtifactSet {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            checksums: Vec::new(),
        })
    }

    #[must_use]
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes one artifact and records its SHA-256.
    pub fn write(&mut self, name: &str, body: &str) -> io::Result<()> {
        let digest = Sha256::digest(body.as_bytes());
        self.checksums.push((name.to_string(), hex::encode(digest)));
        fs::write(self.dir.join(name), body)
    }

    /// Writes `manifest.toml`: the resolved configuration with a
    /// `[provenance]` section appended. The manifest is a valid
    /// configuration file and reproduces the run when fed back in.
    pub fn write_manifest(
        &mut self,
        resolved: &ExperimentConfig,
        command: &str,
        seed: u64,
        telemetry: toml::Table,
    ) -> io::Result<()> {
        let mut provenance = toml::Table::new();
        provenance.insert("command".into(), command.into());
        provenance.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        provenance.insert("seed".into(), toml::Value::Integer(seed as i64));
        for (key, value) in telemetry {
            provenance.insert(key, value);
        }
        let mut checksums = toml::Table::new();
        for (name, digest) in &self.checksums {
            checksums.insert(name.clone(), digest.clone().into());
        }
        provenance.insert("checksums".into(), toml::Value::Table(checksums));

        let mut manifest = resolved.clone();
        manifest.provenance = Some(provenance);
        let text = toml::to_string_pretty(&manifest)
            .map_err(|e| io::Error::other(format!("manifest serialization: {e}")))?;
        fs::write(self.dir.join("manifest.toml"), text)
    }
}

/// Shortest round-tripping decimal form of a float.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn eta_bar_csv(time: &TimeGrid, eta: &HashRateFlow) -> String {
    let mut out = String::from("k,t,eta_bar\n");
    for (k, value) in eta.values().iter().enumerate() {
        out.push_str(&format!("{k},{},{}\n", num(time.t(k)), num(*value)));
    }
    out
}

pub fn policy_csv(game: &GameInstance, policy: &PolicyTable) -> String {
    let mut out = String::from("k,x,a_star\n");
    for k in 0..policy.steps() {
        for (i, a) in policy.row(k).iter().enumerate() {
            out.push_str(&format!("{k},{},{}\n", num(game.wealth().x(i)), num(*a)));
        }
    }
    out
}

pub fn value_csv(game: &GameInstance, result: &EquilibriumResult) -> String {
    let mut out = String::from("k,x,v\n");
    for k in 0..result.values.rows() {
        for (i, v) in result.values.row(k).iter().enumerate() {
            out.push_str(&format!("{k},{},{}\n", num(game.wealth().x(i)), num(*v)));
        }
    }
    out
}

pub fn distribution_csv(game: &GameInstance, result: &EquilibriumResult) -> String {
    let mut out = String::from("k,x,mass\n");
    for k in 0..result.flow.rows() {
        for (i, mass) in result.flow.row(k).iter().enumerate() {
            out.push_str(&format!(
                "{k},{},{}\n",
                num(game.wealth().x(i)),
                num(*mass)
            ));
        }
    }
    out
}

pub fn trace_csv(result: &EquilibriumResult) -> String {
    let mut out = String::from("iter,residual\n");
    for (iter, residual) in result.residual_trace.iter().enumerate() {
        out.push_str(&format!("{iter},{}\n", num(*residual)));
    }
    out
}

/// One solved refinement level, as the CLI reports it.
pub struct StudyRow {
    pub order: u32,
    pub steps: usize,
    pub l1_to_next: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
}

pub fn refinement_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("n,K,L1_distance_to_next,iterations,wall_time_s\n");
    for row in rows {
        let distance = row.l1_to_next.map(num).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{distance},{},{}\n",
            row.order,
            row.steps,
            row.iterations,
            num(row.wall_time_s)
        ));
    }
    out
}

pub fn wealth_evolution_csv(game: &GameInstance, trajectory: &PopulationTrajectory) -> String {
    let mut out = String::from("t,x,density\n");
    for (k, step) in trajectory.steps().iter().enumerate() {
        let histogram = mfg_core::wealth_histogram(game.wealth(), &step.wealth);
        let t = num(game.time().t(k));
        for (i, density) in histogram.iter().enumerate() {
            out.push_str(&format!(
                "{t},{},{}\n",
                num(game.wealth().x(i)),
                num(*density)
            ));
        }
    }
    out
}

pub fn control_surface_csv(game: &GameInstance, policy: &PolicyTable) -> String {
    let mut out = String::from("t,x,a_star\n");
    for k in 0..policy.steps() {
        let t = num(game.time().t(k));
        for (i, a) in policy.row(k).iter().enumerate() {
            out.push_str(&format!("{t},{},{}\n", num(game.wealth().x(i)), num(*a)));
        }
    }
    out
}

pub fn stats_csv(time: &TimeGrid, stats: &[WealthStats]) -> String {
    let mut out = String::from("step,t,mean,variance,skewness,gini,dropout_fraction,control_mean\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.step,
            num(time.t(s.step)),
            num(s.mean),
            num(s.variance),
            num(s.skewness),
            num(s.gini),
            num(s.dropout_fraction),
            num(s.control_mean)
        ));
    }
    out
}

/// Per-decision-step population summary against the prescribed flow. The
/// terminal snapshot has no decision and appears only in `stats.csv`.
pub fn population_csv(stats: &[WealthStats], eta: &HashRateFlow) -> String {
    let mut out =
        String::from("step,mean_wealth,gini,dropout_fraction,empirical_control_mean,eta_bar\n");
    for (s, eta_k) in stats.iter().zip(eta.values()) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.step,
            num(s.mean),
            num(s.gini),
            num(s.dropout_fraction),
            num(s.control_mean),
            num(*eta_k)
        ));
    }
    out
}

pub fn best_response_csv(game: &GameInstance, policy: &PolicyTable) -> String {
    let mut out = String::from("k,x,a_star\n");
    for k in 0..policy.steps() {
        for (i, a) in policy.row(k).iter().enumerate() {
            out.push_str(&format!("{k},{},{}\n", num(game.wealth().x(i)), num(*a)));
        }
    }
    out
}

/// Writes the full set of solve artifacts into `set`.
pub fn write_solve_artifacts(
    set: &mut ArtifactSet,
    game: &GameInstance,
    result: &EquilibriumResult,
) -> io::Result<()> {
    set.write("eta_bar.csv", &eta_bar_csv(&result.time, &result.eta))?;
    set.write("policy.csv", &policy_csv(game, &result.policy))?;
    set.write("value.csv", &value_csv(game, result))?;
    set.write("distribution.csv", &distribution_csv(game, result))?;
    set.write("trace.csv", &trace_csv(result))
}

/// Solver telemetry recorded in the manifest next to the checksums.
pub fn solve_telemetry(result: &EquilibriumResult) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("converged".into(), result.converged.into());
    t.insert(
        "iterations".into(),
        toml::Value::Integer(result.iterations as i64),
    );
    if let Some(last) = result.residual_trace.last() {
        t.insert("residual".into(), (*last).into());
    }
    t.insert(
        "consistency_residual".into(),
        result.consistency_residual.into(),
    );
    t.insert("residual_bound".into(), result.residual_bound.into());
    t.insert("clamped_mass".into(), result.clamped_mass.into());
    t
}

/// Failure modes when pointing `--from-solve` at a directory.
pub enum LoadError {
    Missing(PathBuf),
    Corrupt(String),
}

fn read_artifact(dir: &Path, name: &str) -> Result<String, LoadError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|_| LoadError::Missing(path))
}

/// Third column of a CSV body, parsed as floats.
fn third_column(body: &str, name: &str) -> Result<Vec<f64>, LoadError> {
    let mut values = Vec::new();
    for (idx, line) in body.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').nth(2).ok_or_else(|| {
            LoadError::Corrupt(format!("{name} line {} has fewer than 3 fields", idx + 1))
        })?;
        let value = field.parse::<f64>().map_err(|_| {
            LoadError::Corrupt(format!("{name} line {}: unparsable value {field:?}", idx + 1))
        })?;
        values.push(value);
    }
    Ok(values)
}

/// Reads the equilibrium flow and policy a prior `solve` left in `dir`,
/// checked against the shape of `game`.
pub fn load_equilibrium(
    dir: &Path,
    game: &GameInstance,
) -> Result<(HashRateFlow, PolicyTable), LoadError> {
    let eta_values = third_column(&read_artifact(dir, "eta_bar.csv")?, "eta_bar.csv")?;
    let policy_values = third_column(&read_artifact(dir, "policy.csv")?, "policy.csv")?;
    let steps = game.time().steps();
    let nodes = game.wealth().len();
    if eta_values.len() != steps {
        return Err(LoadError::Corrupt(format!(
            "eta_bar.csv has {} steps, the configuration needs {steps}",
            eta_values.len()
        )));
    }
    if policy_values.len() != steps * nodes {
        return Err(LoadError::Corrupt(format!(
            "policy.csv has {} entries, the configuration needs {steps} x {nodes}",
            policy_values.len()
        )));
    }
    let bound = game.actions().bound();
    let eta = HashRateFlow::new(eta_values, bound)
        .map_err(|e| LoadError::Corrupt(format!("eta_bar.csv: {e}")))?;
    let policy = PolicyTable::new(policy_values, steps, nodes, bound)
        .map_err(|e| LoadError::Corrupt(format!("policy.csv: {e}")))?;
    Ok((eta, policy))
}
