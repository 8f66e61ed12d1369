//! Versioned JSON checkpoints keyed by parameter name.
//!
//! ```json
//! {
//!   "magic": "timetk-checkpoint",
//!   "version": 1,
//!   "config": { ...ModelConfig... },
//!   "parameters": [ { "name": "head.weight", "shape": [96, 24], "data": [...] }, ... ]
//! }
//! ```
//!
//! Values are written in shortest round-trip decimal form, so a save/load
//! cycle is bit-exact.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, TimeTk};
use crate::param::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &str = "timetk-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub version: u32,
    pub config: ModelConfig,
    pub parameters: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &TimeTk) -> Self {
        Checkpoint {
            magic: CHECKPOINT_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            parameters: model
                .store
                .iter()
                .map(|(_, p)| ParamRecord {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Total number of stored scalars.
    pub fn scalar_count(&self) -> usize {
        self.parameters.iter().map(|p| p.data.len()).sum()
    }

    /// Rebuilds the model from the stored config and overwrites every
    /// parameter with the stored values.
    pub fn into_model(self) -> Result<TimeTk> {
        let mut model = TimeTk::new(self.config.clone())?;
        load_into(&mut model.store, &self.parameters)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        match raw.get("magic").and_then(|m| m.as_str()) {
            Some(CHECKPOINT_MAGIC) => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "{}: bad magic header {other:?}",
                    path.display()
                )))
            }
        }
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "{}: unsupported version {other:?} (expected {CHECKPOINT_VERSION})",
                    path.display()
                )))
            }
        }
        Ok(serde_json::from_value(raw)?)
    }
}

/// Copies `records` into `store` by name. Every store parameter must be
/// present exactly once with a matching shape, and no extra names are allowed.
pub fn load_into(store: &mut ParamStore, records: &[ParamRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.name.as_str()) {
            return Err(Error::Checkpoint(format!("duplicate parameter `{}`", r.name)));
        }
        let id = store
            .id(&r.name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter `{}`", r.name)))?;
        let value = Tensor::new(&r.shape, r.data.clone())
            .map_err(|e| Error::Checkpoint(format!("parameter `{}`: {e}", r.name)))?;
        store
            .set_value(id, value)
            .map_err(|e| Error::Checkpoint(format!("parameter `{}`: {e}", r.name)))?;
    }
    if let Some((_, missing)) = store.iter().find(|(_, p)| !seen.contains(p.name.as_str())) {
        return Err(Error::Checkpoint(format!("missing parameter `{}`", missing.name)));
    }
    Ok(())
}

pub fn save_model(model: &TimeTk, path: &Path) -> Result<()> {
    Checkpoint::from_model(model).save(path)
}

pub fn load_model(path: &Path) -> Result<TimeTk> {
    Checkpoint::load(path)?.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    fn small() -> TimeTk {
        TimeTk::new(ModelConfig {
            n_vars: 2,
            lookback: 8,
            horizon: 3,
            offsets: 2,
            heads: 2,
            rbf_k: 3,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut model = small();
        for p in model.store.iter_mut() {
            for (i, v) in p.value.data_mut().iter_mut().enumerate() {
                *v += (i as f64 * 0.1).sin() / 3.0;
            }
        }
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.store.snapshot(), model.store.snapshot());
        assert_eq!(back.config(), model.config());
    }

    #[test]
    fn scalar_tally_matches_parameter_count() {
        for v in Variant::ALL {
            let model = TimeTk::new(ModelConfig {
                variant: v,
                ..small().config().clone()
            })
            .unwrap();
            assert_eq!(Checkpoint::from_model(&model).scalar_count(), model.parameter_count());
        }
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = small();
        let mut ck = Checkpoint::from_model(&model);

        ck.magic = "nope".into();
        ck.save(&path).unwrap();
        assert!(Checkpoint::load(&path).unwrap_err().to_string().contains("magic"));

        ck.magic = CHECKPOINT_MAGIC.into();
        ck.version = 99;
        ck.save(&path).unwrap();
        assert!(Checkpoint::load(&path).unwrap_err().to_string().contains("version"));

        let mut ck = Checkpoint::from_model(&model);
        ck.parameters.pop();
        assert!(ck.clone().into_model().unwrap_err().to_string().contains("missing"));
        let mut extra = Checkpoint::from_model(&model);
        extra.parameters.push(ParamRecord {
            name: "bogus".into(),
            shape: vec![1],
            data: vec![0.0],
        });
        assert!(extra.into_model().is_err());
        let mut wrong = Checkpoint::from_model(&model);
        wrong.parameters[0].shape = vec![wrong.parameters[0].data.len(), 1];
        assert!(wrong.into_model().is_err());
    }
}
