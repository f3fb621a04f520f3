//! Flat `key = value` run configuration.

use std::collections::BTreeMap;

use lmht_core::dataset::{DatasetKind, SyntheticDataset};
use lmht_core::pipeline::{TrainConfig, TrainMode};
use lmht_core::qann::QcfsTrainConfig;
use lmht_core::{Error, Result};

/// Parsed configuration file. Lines are `key = value`; `#` starts a
/// comment; unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "arch",
    "levels",
    "horizon",
    "t_q",
    "lr",
    "weight_decay",
    "momentum",
    "epochs",
    "batch",
    "seed",
    "dataset",
    "n",
    "classes",
    "data_seed",
    "csv_path",
    "init",
];

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected key = value, got {raw:?}"),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unknown key {key:?}"),
                });
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn load(path: &str) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!(
                "bad value {v:?} for key {key:?}"
            ))),
        }
    }

    pub fn mode(&self) -> Result<RunMode> {
        match self.get("mode").unwrap_or("direct") {
            "direct" => Ok(RunMode::Direct),
            "vanilla" | "vanilla-reference" => Ok(RunMode::Vanilla),
            "qcfs" | "ann" => Ok(RunMode::Qcfs),
            "hybrid-finetune" => Ok(RunMode::HybridFinetune),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }

    pub fn arch(&self) -> Result<Vec<usize>> {
        let text = self
            .get("arch")
            .ok_or_else(|| Error::Config("missing arch".into()))?;
        let arch: Vec<usize> = text
            .split(',')
            .map(|w| {
                w.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad arch width {w:?}")))
            })
            .collect::<Result<_>>()?;
        if arch.len() < 2 {
            return Err(Error::Config("arch needs at least two widths".into()));
        }
        Ok(arch)
    }

    pub fn levels(&self) -> Result<u32> {
        self.parsed("levels", 2)
    }

    pub fn horizon(&self) -> Result<usize> {
        self.parsed("horizon", 2)
    }

    pub fn t_q(&self) -> Result<u32> {
        self.parsed("t_q", 4)
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed", 1)
    }

    pub fn epochs(&self) -> Result<usize> {
        self.parsed("epochs", 100)
    }

    pub fn init_checkpoint(&self) -> Option<&str> {
        self.get("init")
    }

    pub fn dataset(&self) -> Result<SyntheticDataset> {
        let kind = match self.get("dataset").unwrap_or("blobs") {
            "blobs" => DatasetKind::GaussianBlobs,
            "moons" => DatasetKind::TwoMoons,
            "csv" => DatasetKind::Csv(
                self.get("csv_path")
                    .ok_or_else(|| Error::Config("dataset=csv needs csv_path".into()))?
                    .to_string(),
            ),
            other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
        };
        Ok(SyntheticDataset {
            kind,
            n: self.parsed("n", 600)?,
            classes: self.parsed("classes", 3)?,
            seed: self.parsed("data_seed", 7)?,
        })
    }

    pub fn train_config(&self, mode: TrainMode) -> Result<TrainConfig> {
        Ok(TrainConfig {
            lr: self.parsed("lr", 0.05)?,
            weight_decay: self.parsed("weight_decay", 0.0)?,
            momentum: self.parsed("momentum", 0.0)?,
            epochs: self.epochs()?,
            batch_size: self.parsed("batch", 64)?,
            seed: self.seed()?,
            mode,
        })
    }

    pub fn qcfs_config(&self) -> Result<QcfsTrainConfig> {
        Ok(QcfsTrainConfig {
            lr: self.parsed("lr", 0.1)?,
            weight_decay: self.parsed("weight_decay", 0.0)?,
            epochs: self.epochs()?,
            batch_size: self.parsed("batch", 64)?,
            seed: self.seed()?,
        })
    }
}

/// Training entry selected by the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Direct,
    Vanilla,
    Qcfs,
    HybridFinetune,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let cfg = FileConfig::parse(
            "mode = direct\narch = 2,32,3\nlr = 0.05 # comment\n\n# full-line comment\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.mode().unwrap(), RunMode::Direct);
        assert_eq!(cfg.arch().unwrap(), vec![2, 32, 3]);
        assert_eq!(cfg.seed().unwrap(), 9);

        assert!(FileConfig::parse("no_such_key = 1\n").is_err());
        assert!(FileConfig::parse("just a line\n").is_err());
        let bad = FileConfig::parse("lr = fast\n").unwrap();
        assert!(bad.train_config(TrainMode::Direct).is_err());
    }
}
