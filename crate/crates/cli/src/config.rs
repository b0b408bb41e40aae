use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toric_game::game::BackendKind;
use toric_game::lattice::InstanceSpec;

/// Which state `exact` and `lemma1` evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StateChoice {
    /// Cat state matching the instance direction.
    Cat,
    /// Ground state |00>.
    Ground,
    /// Haar-like random state drawn from the seed.
    Random,
    /// Equal superposition of every basis state.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed gap for probabilities that should agree or equal 1.
    pub probability: f64,
    /// Allowed certificate residual.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            probability: 1e-9,
            residual: 1e-8,
        }
    }
}

/// Contents of a `--config` file. Every field is optional; command-line
/// flags take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub instance: Option<InstanceSpec>,
    /// Second game for `simul`.
    pub horizontal_instance: Option<InstanceSpec>,
    pub backend: Option<BackendKind>,
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    pub modulus: Option<u32>,
    pub out: Option<PathBuf>,
    pub lx: Option<usize>,
    pub ly: Option<usize>,
    pub teams: Option<Vec<usize>>,
    pub dual_size: Option<usize>,
    pub state: Option<StateChoice>,
    pub probes: Option<usize>,
    pub straight_only: Option<bool>,
    pub tolerances: Option<Tolerances>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Quantum backend (tableau needs M = 2).
    #[arg(long, global = true, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub rounds: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Local dimension M of every bond.
    #[arg(long, global = true)]
    pub modulus: Option<u32>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Torus width used when no instance is configured.
    #[arg(long, global = true)]
    pub lx: Option<usize>,
    /// Torus height used when no instance is configured.
    #[arg(long, global = true)]
    pub ly: Option<usize>,
    /// Team count, or a comma-separated list where a command takes several.
    #[arg(long, global = true, value_delimiter = ',')]
    pub teams: Option<Vec<usize>>,
    /// Dual-loop length for `classical-opt` (defaults to the team count).
    #[arg(long, global = true)]
    pub dual_size: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub state: Option<StateChoice>,
    /// Random probes for `uniqueness`.
    #[arg(long, global = true)]
    pub probes: Option<usize>,
    /// Restrict `uniqueness` to straight loops.
    #[arg(long, global = true)]
    pub straight_only: bool,
    /// Override both tolerances.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    s.parse().map_err(|e: toric_game::Error| e.to_string())
}

/// Flags merged over the config file.
#[derive(Clone, Debug)]
pub struct Settings {
    pub instance: Option<InstanceSpec>,
    pub horizontal_instance: Option<InstanceSpec>,
    pub backend: Option<BackendKind>,
    pub rounds: Option<u64>,
    pub seed: u64,
    pub modulus: Option<u32>,
    pub out: Option<PathBuf>,
    pub lx: Option<usize>,
    pub ly: Option<usize>,
    pub teams: Option<Vec<usize>>,
    pub dual_size: Option<usize>,
    pub state: Option<StateChoice>,
    pub probes: Option<usize>,
    pub straight_only: bool,
    pub tolerances: Tolerances,
}

impl Settings {
    pub fn resolve(command: &str, flags: Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &file.command {
            if c != command {
                bail!("config is for command {c:?}, invoked as {command:?}");
            }
        }
        let mut tolerances = file.tolerances.unwrap_or_default();
        if let Some(t) = flags.tol {
            tolerances = Tolerances {
                probability: t,
                residual: t,
            };
        }
        if !(tolerances.probability > 0.0 && tolerances.residual > 0.0) {
            bail!("tolerances must be positive");
        }
        Ok(Self {
            instance: file.instance,
            horizontal_instance: file.horizontal_instance,
            backend: flags.backend.or(file.backend),
            rounds: flags.rounds.or(file.rounds),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            modulus: flags.modulus.or(file.modulus),
            out: flags.out.or(file.out),
            lx: flags.lx.or(file.lx),
            ly: flags.ly.or(file.ly),
            teams: flags.teams.or(file.teams),
            dual_size: flags.dual_size.or(file.dual_size),
            state: flags.state.or(file.state),
            probes: flags.probes.or(file.probes),
            straight_only: flags.straight_only || file.straight_only.unwrap_or(false),
            tolerances,
        })
    }

    pub fn rounds(&self, default: u64) -> Result<u64> {
        let r = self.rounds.unwrap_or(default);
        if r == 0 {
            bail!("rounds must be at least 1");
        }
        Ok(r)
    }

    pub fn single_team_count(&self, default: usize) -> Result<usize> {
        match self.teams.as_deref() {
            None => Ok(default),
            Some([t]) => Ok(*t),
            Some(other) => bail!("expected a single team count, got {other:?}"),
        }
    }
}

/// Hex SHA-256 of the canonical JSON of the effective parameters.
pub fn config_hash(command: &str, params: &serde_json::Value) -> String {
    let canonical = serde_json::json!({ "command": command, "params": params });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}
