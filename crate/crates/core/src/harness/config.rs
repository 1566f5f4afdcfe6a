//! Run configuration document.
//!
//! ```toml
//! schema_version = 1
//! horizon = 2000
//! eta = 0.5            # or "rule"
//! seeds = [1, 2, 3]
//! output = "out"
//!
//! [game]
//! kind = "random-bilinear"
//! players = 2
//! actions = 3
//! dim = 2
//! contexts = 2
//!
//! [context_process]
//! kind = "markov"
//! transition = [[0.9, 0.1], [0.1, 0.9]]
//!
//! [[predictors]]        # one entry for all players, or one per player
//! kind = "noisy"
//! p = 0.3
//!
//! [sweep]
//! axis = "p"
//! values = [0.0, 0.1, 0.3]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::game::{GameSpec, GameSpecDoc};
use crate::generators;
use crate::prediction::PredictorConfig;
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub game: GameConfig,
    pub horizon: usize,
    pub eta: EtaSetting,
    #[serde(default)]
    pub context_process: ContextProcess,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<PredictorConfig>,
    /// All players draw prediction noise from one stream instead of one each.
    #[serde(default)]
    pub shared_prediction_stream: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_predictors() -> Vec<PredictorConfig> {
    vec![PredictorConfig::oracle()]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    Fixed(f64),
    Mode(EtaMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaMode {
    /// Pilot pass at `η = 1`, then rerun with the step-size rule applied to
    /// the pilot's mistakes and variation.
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameConfig {
    /// Game spec document on disk, resolved relative to the config file.
    File {
        path: PathBuf,
    },
    Inline(GameSpecDoc),
    /// `seed` defaults to one derived from the run seed.
    RandomBilinear {
        players: usize,
        actions: usize,
        dim: usize,
        contexts: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    #[serde(rename = "zero-sum-2p")]
    ZeroSum2p {
        actions: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    CyclicDemo,
    Separable {
        players: usize,
        actions: usize,
        contexts: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

/// How the realized context sequence is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContextProcess {
    /// `Z_t = (t / block) mod m`.
    Cycle {
        #[serde(default = "one")]
        block: usize,
    },
    /// Seeded Markov chain started at `initial`.
    Markov {
        #[serde(default)]
        seed: u64,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        initial: usize,
    },
    Script {
        sequence: Vec<usize>,
    },
}

fn one() -> usize {
    1
}

impl Default for ContextProcess {
    fn default() -> Self {
        ContextProcess::Cycle { block: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    P,
    Eta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative `game.path` entries are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let GameConfig::File { path: game_path } = &mut config.game {
            if game_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *game_path = dir.join(&*game_path);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |field: &str, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return err(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            );
        }
        if self.horizon < 1 {
            return err("horizon", "must be >= 1".into());
        }
        if let EtaSetting::Fixed(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return err("eta", format!("{eta} outside (0, 1]"));
            }
        }
        if self.predictors.is_empty() {
            return err("predictors", "at least one predictor is required".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "at least one seed is required".into());
        }
        match &self.context_process {
            ContextProcess::Cycle { block } if *block == 0 => {
                return err("context_process.block", "must be >= 1".into());
            }
            ContextProcess::Markov {
                transition,
                initial,
                ..
            } => {
                if *initial >= transition.len() {
                    return err(
                        "context_process.initial",
                        format!("{initial} is not a state"),
                    );
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != transition.len() {
                        return err(
                            &format!("context_process.transition[{i}]"),
                            format!("has {} entries, expected {}", row.len(), transition.len()),
                        );
                    }
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                        return err(
                            &format!("context_process.transition[{i}]"),
                            format!("not a probability row (sum {sum})"),
                        );
                    }
                }
            }
            ContextProcess::Script { sequence } if sequence.len() < self.horizon => {
                return err(
                    "context_process.sequence",
                    format!("{} entries for horizon {}", sequence.len(), self.horizon),
                );
            }
            _ => {}
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return err("sweep.values", "axis has no values".into());
            }
            for (i, v) in sweep.values.iter().enumerate() {
                let ok = match sweep.axis {
                    SweepAxis::P => (0.0..=1.0).contains(v),
                    SweepAxis::Eta => *v > 0.0 && *v <= 1.0,
                };
                if !ok {
                    return err(&format!("sweep.values[{i}]"), format!("{v} out of range"));
                }
            }
        }
        Ok(())
    }

    /// Canonical TOML text of this config.
    pub fn canonical_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`RunConfig::canonical_text`], hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Builds the game for `seed`.
    pub fn build_game(&self, seed: u64) -> Result<GameSpec, HarnessError> {
        let derived = |s: Option<u64>| s.unwrap_or_else(|| rng::mix(seed, 0x6761_6d65));
        let spec = match &self.game {
            GameConfig::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                GameSpec::from_toml_str(&text)
            }
            GameConfig::Inline(doc) => doc.clone().into_spec(),
            GameConfig::RandomBilinear {
                players,
                actions,
                dim,
                contexts,
                seed: s,
            } => generators::random_bilinear(*players, *actions, *dim, *contexts, derived(*s)),
            GameConfig::ZeroSum2p { actions, seed: s } => {
                generators::zero_sum_2p(*actions, derived(*s))
            }
            GameConfig::CyclicDemo => Ok(generators::cyclic_demo()),
            GameConfig::Separable {
                players,
                actions,
                contexts,
                seed: s,
            } => generators::separable(*players, *actions, *contexts, derived(*s)),
        };
        spec.map_err(|e| HarnessError::Config(format!("game: {e}")))
    }

    /// One predictor per player, expanding a single entry to every player.
    pub fn player_predictors(&self, players: usize) -> Result<Vec<PredictorConfig>, HarnessError> {
        match self.predictors.len() {
            1 => Ok(vec![self.predictors[0].clone(); players]),
            n if n == players => Ok(self.predictors.clone()),
            n => Err(HarnessError::Config(format!(
                "predictors: {n} entries for {players} players (give 1 or {players})"
            ))),
        }
    }
}

impl ContextProcess {
    /// The realized context of every round.
    pub fn generate(
        &self,
        contexts: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Vec<usize>, HarnessError> {
        use rand::Rng;
        match self {
            ContextProcess::Cycle { block } => Ok((0..horizon)
                .map(|t| (t / (*block).max(1)) % contexts)
                .collect()),
            ContextProcess::Markov {
                seed: process_seed,
                transition,
                initial,
            } => {
                if transition.len() != contexts {
                    return Err(HarnessError::Config(format!(
                        "context_process.transition: {} states for {contexts} contexts",
                        transition.len()
                    )));
                }
                let key = rng::mix(*process_seed, seed);
                let mut z = *initial;
                let mut out = Vec::with_capacity(horizon);
                for t in 0..horizon {
                    if t > 0 {
                        let u: f64 = rng::keyed(key, rng::CONTEXT_STREAM, t as u64).random();
                        let row = &transition[z];
                        let mut acc = 0.0;
                        // falls back to the last state with positive mass when rounding leaves u above the total
                        let mut next = row.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                        for (i, p) in row.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                next = i;
                                break;
                            }
                        }
                        z = next;
                    }
                    out.push(z);
                }
                Ok(out)
            }
            ContextProcess::Script { sequence } => {
                if sequence.len() < horizon {
                    return Err(HarnessError::Config(format!(
                        "context_process.sequence: {} entries for horizon {horizon}",
                        sequence.len()
                    )));
                }
                if let Some((i, z)) = sequence.iter().enumerate().find(|(_, z)| **z >= contexts) {
                    return Err(HarnessError::Config(format!(
                        "context_process.sequence[{i}]: {z} is not a context index"
                    )));
                }
                Ok(sequence[..horizon].to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
schema_version = 1
horizon = 10
eta = 0.5

[game]
kind = "cyclic-demo"
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(c.context_process, ContextProcess::Cycle { block: 1 });
        assert_eq!(c.predictors, vec![PredictorConfig::oracle()]);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.eta, EtaSetting::Fixed(0.5));
    }

    #[test]
    fn canonical_text_reparses() {
        let text = r#"
schema_version = 1
horizon = 100
eta = "rule"
seeds = [3, 4]

[game]
kind = "random-bilinear"
players = 2
actions = 3
dim = 2
contexts = 2

[context_process]
kind = "markov"
transition = [[0.9, 0.1], [0.2, 0.8]]

[[predictors]]
kind = "noisy"
p = 0.25
seed = 4

[sweep]
axis = "eta"
values = [0.1, 1.0]
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.eta, EtaSetting::Mode(EtaMode::Rule));
        let again = RunConfig::from_toml_str(&c.canonical_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.digest(), c.digest());
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = BASIC.replace("horizon = 10", "horizon = 0");
        let e = RunConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(e.contains("horizon"), "{e}");
        let bad = format!("{BASIC}\n[context_process]\nkind = \"markov\"\ntransition = [[0.5, 0.4], [0.5, 0.5]]\n");
        let e = RunConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(e.contains("transition[0]"), "{e}");
        let bad = BASIC.replace("eta = 0.5", "eta = 2.0");
        assert!(RunConfig::from_toml_str(&bad)
            .unwrap_err()
            .to_string()
            .contains("eta"));
        let bad = format!("{BASIC}\n[sweep]\naxis = \"p\"\nvalues = []\n");
        assert!(RunConfig::from_toml_str(&bad)
            .unwrap_err()
            .to_string()
            .contains("sweep"));
    }

    #[test]
    fn markov_process_is_seeded_and_sticky() {
        let p = ContextProcess::Markov {
            seed: 1,
            transition: vec![vec![0.95, 0.05], vec![0.05, 0.95]],
            initial: 0,
        };
        let a = p.generate(2, 2000, 9).unwrap();
        assert_eq!(a, p.generate(2, 2000, 9).unwrap());
        assert_ne!(a, p.generate(2, 2000, 10).unwrap());
        let switches = a.windows(2).filter(|w| w[0] != w[1]).count();
        assert!((50..=150).contains(&switches), "{switches}");
        assert_eq!(a[0], 0);
    }

    #[test]
    fn cycle_blocks() {
        let p = ContextProcess::Cycle { block: 2 };
        assert_eq!(p.generate(3, 8, 0).unwrap(), vec![0, 0, 1, 1, 2, 2, 0, 0]);
    }
}
