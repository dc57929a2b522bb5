use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainingError;
use crate::graph::SocialGraph;
use crate::scene::{read_scenario, validate_scenario, Augmentation, Scenario, ScenarioError};

/// One graph with the ids of the scenario variant and of its source scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub base_id: String,
    pub graph: SocialGraph,
}

/// Builds one graph per scenario, or four (original, mirrored, rotated,
/// mirrored and rotated) when `augment` is set. All variants keep the
/// labels of their source scenario.
pub fn build_dataset(scenarios: &[Scenario], augment: bool, spacing_s: f64) -> Result<Vec<Sample>, TrainingError> {
    let variants: &[Augmentation] = if augment {
        &Augmentation::ALL
    } else {
        &Augmentation::ALL[..1]
    };
    let mut out = Vec::with_capacity(scenarios.len() * variants.len());
    for s in scenarios {
        let violations = validate_scenario(s);
        if !violations.is_empty() {
            return Err(TrainingError::Scenario {
                id: s.id.clone(),
                source: ScenarioError::Semantic(violations),
            });
        }
        for aug in variants {
            let v = aug.apply(s);
            let graph = SocialGraph::from_scenario(&v, spacing_s).map_err(|e| match e {
                crate::graph::GraphError::Scenario(source) => TrainingError::Scenario {
                    id: v.id.clone(),
                    source,
                },
                other => other.into(),
            })?;
            out.push(Sample {
                id: v.id,
                base_id: s.id.clone(),
                graph,
            });
        }
    }
    Ok(out)
}

/// Reads every `*.json` scenario in a directory, sorted by file name.
pub fn load_scenarios(dir: impl AsRef<Path>) -> Result<Vec<Scenario>, TrainingError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            read_scenario(&p).map_err(|source| TrainingError::Scenario {
                id: p.display().to_string(),
                source,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        }
    }
}

/// Base-scenario ids of each split. Augmented variants follow their base id,
/// so no variant of a scenario leaks across splits.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplits {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn check_disjoint(&self) -> Result<(), TrainingError> {
        let mut owner: HashMap<&str, &'static str> = HashMap::new();
        for split in [Split::Train, Split::Dev, Split::Test] {
            for id in self.ids(split) {
                if let Some(first) = owner.insert(id, split.name()) {
                    return Err(TrainingError::OverlappingSplits {
                        id: id.clone(),
                        first,
                        second: split.name(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self, TrainingError> {
        let s: Self = serde_json::from_str(raw)?;
        s.check_disjoint()?;
        Ok(s)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TrainingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TrainingError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// SHA-256 of the canonical (compact) JSON form, hex encoded.
    pub fn sha256(&self) -> String {
        let compact = serde_json::to_vec(self).expect("plain data serializes");
        hex::encode(Sha256::digest(compact))
    }
}

/// Shuffles the distinct base ids with `seed` and deals out `dev` and `test`
/// ids; the rest go to training. Each list is returned sorted.
pub fn split_by_base(base_ids: &[String], dev: usize, test: usize, seed: u64) -> Result<DatasetSplits, TrainingError> {
    let unique: BTreeSet<&String> = base_ids.iter().collect();
    let mut ids: Vec<String> = unique.into_iter().cloned().collect();
    if dev + test >= ids.len() {
        return Err(TrainingError::EmptySplit("train"));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut dev_ids = ids[..dev].to_vec();
    let mut test_ids = ids[dev..dev + test].to_vec();
    let mut train_ids = ids[dev + test..].to_vec();
    dev_ids.sort();
    test_ids.sort();
    train_ids.sort();
    Ok(DatasetSplits {
        train: train_ids,
        dev: dev_ids,
        test: test_ids,
    })
}

/// Samples indexed by base id.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    by_base: HashMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        let mut by_base: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            by_base.entry(s.base_id.clone()).or_default().push(i);
        }
        Self { samples, by_base }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn base_ids(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.by_base.keys().collect();
        set.into_iter().cloned().collect()
    }

    /// Graphs of every sample whose base id is listed, in manifest order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&SocialGraph>, TrainingError> {
        let mut out = Vec::new();
        for id in ids {
            let idx = self.by_base.get(id).ok_or_else(|| TrainingError::UnknownId(id.clone()))?;
            out.extend(idx.iter().map(|&i| &self.samples[i].graph));
        }
        Ok(out)
    }

    pub fn split(&self, splits: &DatasetSplits, which: Split) -> Result<Vec<&SocialGraph>, TrainingError> {
        self.select(splits.ids(which))
    }
}
