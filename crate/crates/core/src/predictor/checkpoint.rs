//! Checkpoint directories: `manifest.json` plus one `TEN` file per tensor.
//!
//! ```json
//! {"kind":"fcn","scale":{"rudy":..,"pin_rudy":..,"macro_region":..},
//!  "tensors":[{"name":"conv1.weight","shape":[8,3,3,3],"file":"conv1.weight.ten"}, ...]}
//! ```
//!
//! Tensors are listed in forward order and must match the architecture
//! exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GcnParams, FcnParams, Model, ModelKind, Parameters, Params};
use crate::error::{Error, Result};
use crate::features::ChannelScale;
use crate::tensor::{read_ten, write_ten, Tensor};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ModelKind,
    pub scale: ChannelScale,
    pub tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::MalformedCheckpoint(msg.into())
}

impl Manifest {
    /// Parses and validates a manifest against the architecture it names.
    pub fn parse(bytes: &[u8]) -> Result<Manifest> {
        let m: Manifest = serde_json::from_slice(bytes).map_err(|e| bad(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let s = self.scale;
        if ![s.rudy, s.pin_rudy, s.macro_region].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(bad("channel scales must be finite and positive"));
        }
        let expected = Params::expected_shapes(self.kind);
        if expected.len() != self.tensors.len() {
            return Err(bad(format!("expected {} tensors, found {}", expected.len(), self.tensors.len())));
        }
        for (i, ((name, shape), e)) in expected.iter().zip(&self.tensors).enumerate() {
            if &e.name != name || &e.shape != shape {
                return Err(bad(format!(
                    "tensor {i}: expected {name} {shape:?}, found {} {:?}",
                    e.name, e.shape
                )));
            }
            let plain = !e.file.is_empty()
                && e.file.ends_with(".ten")
                && e.file.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'-')
                && !e.file.starts_with('.');
            if !plain {
                return Err(bad(format!("tensor {i}: file name {:?} must be a plain .ten name", e.file)));
            }
        }
        Ok(())
    }
}

/// Assembles a model from a validated manifest and the raw contents of each
/// listed file.
pub fn assemble(manifest: &Manifest, mut read: impl FnMut(&str) -> Result<Vec<u8>>) -> Result<Model> {
    let mut params = Params::zeros(manifest.kind);
    for (entry, dst) in manifest.tensors.iter().zip(params.tensors_mut()) {
        let bytes = read(&entry.file)?;
        let (dims, data) = read_ten(&bytes).map_err(|e| bad(format!("{}: {e}", entry.file)))?;
        let want: usize = entry.shape.iter().product();
        if dims.iter().product::<usize>() != want {
            return Err(bad(format!("{}: holds {dims:?}, manifest says {:?}", entry.file, entry.shape)));
        }
        *dst = Tensor::from_vec(&entry.shape, data).map_err(|e| bad(format!("{}: {e}", entry.file)))?;
    }
    Ok(Model { params, scale: manifest.scale })
}

pub fn load(dir: &Path) -> Result<Model> {
    let manifest = Manifest::parse(&fs::read(dir.join(MANIFEST))?)?;
    assemble(&manifest, |f| Ok(fs::read(dir.join(f))?))
}

pub fn save(model: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    for (name, t) in model.params.tensors() {
        let file = format!("{name}.ten");
        let mut buf = Vec::new();
        write_ten(&mut buf, t.ten_dims(), t.data())?;
        fs::write(dir.join(&file), buf)?;
        tensors.push(TensorEntry { name, shape: t.shape().to_vec(), file });
    }
    let manifest = Manifest { kind: model.kind(), scale: model.scale, tensors };
    fs::write(dir.join(MANIFEST), crate::json::to_vec(&manifest)?)?;
    Ok(())
}

impl From<FcnParams> for Params {
    fn from(p: FcnParams) -> Self {
        Params::Fcn(p)
    }
}

impl From<GcnParams> for Params {
    fn from(p: GcnParams) -> Self {
        Params::Gcn(p)
    }
}
