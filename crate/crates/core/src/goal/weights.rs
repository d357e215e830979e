//! `TRLW` named-tensor container.
//!
//! ```text
//! magic  "TRLW"
//! u32    version (= 1)
//! u32    tensor_count
//! per tensor:
//!   u32  name_len, name bytes (UTF-8)
//!   u8   dtype (0 = float32)
//!   u8   ndim
//!   u32  dims[ndim]
//!   f32  payload[product(dims)], row-major
//! ```
//!
//! All integers and floats are little-endian; records are packed.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"TRLW";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("shape error for `{name}`: expected {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self, WeightsError> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(WeightsError::Length(format!(
                "tensor `{name}` declares dims {dims:?} ({expected} values) but holds {}",
                data.len()
            )));
        }
        Ok(Tensor { name, dims, data })
    }

    pub fn zeros(name: impl Into<String>, dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Tensor {
            name: name.into(),
            dims,
            data: vec![0.0; n],
        }
    }

    /// Bitwise payload equality (distinguishes NaN payloads and signed zeros).
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.name == other.name
            && self.dims == other.dims
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightContainer {
    pub version: u32,
    tensors: Vec<Tensor>,
}

impl Default for WeightContainer {
    fn default() -> Self {
        WeightContainer {
            version: VERSION,
            tensors: Vec::new(),
        }
    }
}

impl WeightContainer {
    pub fn new(tensors: Vec<Tensor>) -> Result<Self, WeightsError> {
        let mut c = WeightContainer::default();
        for t in tensors {
            c.push(t)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, tensor: Tensor) -> Result<(), WeightsError> {
        if self.get(&tensor.name).is_some() {
            return Err(WeightsError::DuplicateName(tensor.name));
        }
        let expected: usize = tensor.dims.iter().product();
        if expected != tensor.data.len() {
            return Err(WeightsError::Length(format!(
                "tensor `{}` declares {expected} values but holds {}",
                tensor.name,
                tensor.data.len()
            )));
        }
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Tensor `name` with exactly `dims`.
    pub fn expect(&self, name: &str, dims: &[usize]) -> Result<&Tensor, WeightsError> {
        let t = self
            .get(name)
            .ok_or_else(|| WeightsError::MissingTensor(name.to_string()))?;
        if t.dims != dims {
            return Err(WeightsError::Shape {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: t.dims.clone(),
            });
        }
        Ok(t)
    }

    pub fn bit_eq(&self, other: &WeightContainer) -> bool {
        self.version == other.version
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.bit_eq(b))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(WeightsError::Format(format!(
                "bad magic {:?}, expected \"TRLW\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(WeightsError::Format(format!("unsupported version {version}")));
        }
        let count = r.u32("tensor_count")? as usize;
        let mut names = HashSet::new();
        let mut tensors = Vec::with_capacity(count.min(4096));
        for i in 0..count {
            let name_len = r.u32("name_len")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
                .map_err(|_| WeightsError::Format(format!("tensor {i}: name is not UTF-8")))?
                .to_string();
            let dtype = r.u8("dtype")?;
            if dtype != DTYPE_F32 {
                return Err(WeightsError::Format(format!("tensor `{name}`: unsupported dtype {dtype}")));
            }
            let ndim = r.u8("ndim")? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32("dims")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| WeightsError::Length(format!("tensor `{name}`: dims {dims:?} overflow")))?;
            let payload = r.take(n.saturating_mul(4), &format!("payload of `{name}`"))?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if !names.insert(name.clone()) {
                return Err(WeightsError::DuplicateName(name));
            }
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(WeightsError::Length(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(WeightContainer { version, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightsError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            WeightsError::Length(format!(
                "truncated while reading {what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightsError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, what: &str) -> Result<u8, WeightsError> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn load_weights(path: &Path) -> Result<WeightContainer, WeightsError> {
    let bytes = fs::read(path).map_err(|source| WeightsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    WeightContainer::from_bytes(&bytes)
}

pub fn save_weights(weights: &WeightContainer, path: &Path) -> Result<(), WeightsError> {
    fs::write(path, weights.to_bytes()).map_err(|source| WeightsError::Io {
        path: path.to_path_buf(),
        source,
    })
}
