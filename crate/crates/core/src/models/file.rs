//! Binary model file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "MZMF" | version u32 | config_len u64 | config JSON (UTF-8)
//! param_count u32 | param_count x (name_len u32 | name | ndim u32 | dims u64.. | f64 data..)
//! ```

use std::path::Path;

use super::{Model, ModelConfig};
use crate::dataprep::random_embeddings;
use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

pub const MAGIC: &[u8; 4] = b"MZMF";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::Format(format!("{what} too large")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let config = self.config.to_json();
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        let params = self.graph.params();
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.ndim() as u32).to_le_bytes());
            for &d in p.value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version}, this build reads version {FORMAT_VERSION}"
            )));
        }
        let config_len = r.len("config length")?;
        let config = std::str::from_utf8(r.take(config_len, "config")?)
            .map_err(|_| Error::Format("config is not UTF-8".into()))?;
        let config = ModelConfig::from_json(config).map_err(|e| Error::Format(e.to_string()))?;
        config.validate().map_err(|e| Error::Format(e.to_string()))?;

        let count = r.u32("parameter count")? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32("parameter name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32("rank")? as usize;
            if ndim > 8 {
                return Err(Error::Format(format!("parameter `{name}` has implausible rank {ndim}")));
            }
            let shape = (0..ndim).map(|_| r.len("dimension")).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::Format(format!("truncated data for parameter `{name}`")))?;
            let data = r
                .take(n * 8, "parameter data")?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let value = Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?;
            params.push((name, value));
        }
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }

        let stored = params.iter().map(|(_, v)| v.numel()).sum::<usize>();
        if Model::expected_param_count(&config) != Some(stored) {
            return Err(Error::Format(format!("config does not match the {stored} stored parameter values")));
        }

        // Rebuild the architecture, then overwrite every parameter in registration order.
        let skeleton_config = ModelConfig {
            embedding_file: None,
            ..config.clone()
        };
        let placeholder = random_embeddings(config.vocab_size, config.embedding_dim, 0)?;
        let mut model = Model::build_with_embeddings(&skeleton_config, placeholder)?;
        model.config = config;
        let slots = model.graph.params_mut();
        if slots.len() != params.len() {
            return Err(Error::Format(format!(
                "model has {} parameters, file has {}",
                slots.len(),
                params.len()
            )));
        }
        for (slot, (name, value)) in slots.iter_mut().zip(params) {
            if slot.name != name || slot.value.shape() != value.shape() {
                return Err(Error::Format(format!(
                    "parameter `{name}` {:?} does not match `{}` {:?}",
                    value.shape(),
                    slot.name,
                    slot.value.shape()
                )));
            }
            debug_assert_eq!(numel(value.shape()), slot.value.numel());
            slot.value = value;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn model() -> Model {
        Model::build(&ModelConfig::new(ModelKind::Arci, 7, 3, 4, 5)).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = model().to_bytes();
        assert_eq!(&bytes[..4], b"MZMF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), FORMAT_VERSION);
    }

    #[test]
    fn round_trip_preserves_parameters() {
        let m = model();
        let back = Model::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.config(), m.config());
        for (a, b) in m.graph().params().iter().zip(back.graph().params()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn truncation_and_version_errors() {
        let bytes = model().to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(Model::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&7u32.to_le_bytes());
        let msg = Model::from_bytes(&bad).unwrap_err().to_string();
        assert!(msg.contains('7') && msg.contains('1'), "{msg}");
        let mut extra = bytes;
        extra.push(0);
        assert!(Model::from_bytes(&extra).is_err());
    }
}
