//! Checkpoint directories: `manifest.json` plus one raw little-endian
//! tensor file per parameter.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelBundle, NetConfig, ParamSet, Stage};
use crate::{Error, Real, Result};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "ctp-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub dtype: String,
    /// Latest pipeline stage, `null` for an untrained bundle.
    pub stage: Option<Stage>,
    pub stages: Vec<Stage>,
    pub config: NetConfig,
    pub net_config_hash: String,
    /// Hash of the run configuration that produced the checkpoint, if any.
    #[serde(default)]
    pub run_config_hash: Option<String>,
    pub tensors: Vec<TensorEntry>,
}

pub fn save<T: Real>(
    bundle: &ModelBundle<T>,
    dir: impl AsRef<Path>,
    run_config_hash: Option<&str>,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    let mut io_err = None;
    bundle.visit("", &mut |name, shape, data| {
        if io_err.is_some() {
            return;
        }
        let file = format!("{name}.bin");
        let mut bytes = Vec::with_capacity(data.len() * T::BYTES);
        for &x in data {
            x.write_le(&mut bytes);
        }
        if let Err(e) = std::fs::write(dir.join(&file), bytes) {
            io_err = Some(e);
        }
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            file,
        });
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        dtype: T::DTYPE.into(),
        stage: bundle.latest_stage(),
        stages: bundle.stages.clone(),
        config: bundle.config.clone(),
        net_config_hash: bundle.config.hash(),
        run_config_hash: run_config_hash.map(str::to_string),
        tensors,
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.as_ref().join(MANIFEST))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format `{}`", m.format)));
    }
    if m.net_config_hash != m.config.hash() {
        return Err(Error::Checkpoint(
            "manifest config hash does not match its config".into(),
        ));
    }
    Ok(m)
}

pub fn load<T: Real>(dir: impl AsRef<Path>) -> Result<(ModelBundle<T>, Manifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    if manifest.dtype != T::DTYPE {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, requested {}",
            manifest.dtype,
            T::DTYPE
        )));
    }
    let mut bundle = ModelBundle::<T>::new(manifest.config.clone(), 0)?;
    if manifest
        .tensors
        .iter()
        .any(|t| t.name.starts_with("finetune_"))
    {
        bundle.finetuned = Some((bundle.source_encoder.clone(), bundle.source_decoder.clone()));
    }
    bundle.stages = manifest.stages.clone();

    let mut data: BTreeMap<&str, (&TensorEntry, Vec<T>)> = BTreeMap::new();
    for entry in &manifest.tensors {
        let bytes = std::fs::read(dir.join(&entry.file))?;
        let want: usize = entry.shape.iter().product();
        if bytes.len() != want * T::BYTES {
            return Err(Error::Checkpoint(format!(
                "{}: {} bytes for shape {:?}",
                entry.file,
                bytes.len(),
                entry.shape
            )));
        }
        let values = bytes.chunks_exact(T::BYTES).map(T::read_le).collect();
        data.insert(entry.name.as_str(), (entry, values));
    }

    let mut expected_shapes = BTreeMap::new();
    bundle.visit("", &mut |name, shape, _| {
        expected_shapes.insert(name.to_string(), shape.to_vec());
    });
    if expected_shapes.len() != data.len() {
        return Err(Error::Checkpoint(format!(
            "manifest lists {} tensors, config implies {}",
            data.len(),
            expected_shapes.len()
        )));
    }
    for (name, shape) in &expected_shapes {
        match data.get(name.as_str()) {
            Some((entry, _)) if &entry.shape == shape => {}
            Some((entry, _)) => {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?}, config implies {shape:?}",
                    entry.shape
                )))
            }
            None => return Err(Error::Checkpoint(format!("missing tensor {name}"))),
        }
    }
    bundle.visit_mut("", &mut |name, dst| {
        dst.copy_from_slice(&data[name].1);
    });
    Ok((bundle, manifest))
}
