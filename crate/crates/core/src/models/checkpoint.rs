//! Versioned binary checkpoint container.
//!
//! Layout: magic bytes `FXSP`, format version `u16` LE, then named tensors
//! until EOF. Each tensor is `name_len u16 | name UTF-8 | ndims u8 |
//! dims u32 x ndims | values f64 LE`. Payloads are always written as `f64`
//! regardless of the scalar type the model runs at.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::draft::{DraftHead, DraftModel};
use super::embed::FeatureBasis;
use super::family::AnchorBlock;
use super::math::Mat;

pub const MAGIC: [u8; 4] = *b"FXSP";
pub const FORMAT_VERSION: u16 = 1;

/// One named tensor, stored as f64.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    fn new<T: Scalar>(name: &str, dims: Vec<usize>, values: &[T]) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        Self {
            name: name.to_string(),
            dims,
            data: values.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

/// A parsed checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u16,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            if name.len() > u16::MAX as usize {
                return Err(Error::Codec(format!("tensor name too long: {}", t.name)));
            }
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name)?;
            if t.dims.len() > u8::MAX as usize {
                return Err(Error::Codec("too many tensor dimensions".into()));
            }
            w.write_all(&[t.dims.len() as u8])?;
            for &d in &t.dims {
                if d > u32::MAX as usize {
                    return Err(Error::Codec("tensor dimension exceeds u32".into()));
                }
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let expect: usize = t.dims.iter().product();
            if expect != t.data.len() {
                return Err(Error::Codec(format!(
                    "tensor {} dims {:?} do not match {} values",
                    t.name,
                    t.dims,
                    t.data.len()
                )));
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Codec("checkpoint shorter than its magic bytes".into()))?;
        if magic != MAGIC {
            return Err(Error::Codec(format!("bad checkpoint magic {magic:?}")));
        }
        let mut ver = [0u8; 2];
        r.read_exact(&mut ver)
            .map_err(|_| Error::Codec("checkpoint truncated in version field".into()))?;
        let version = u16::from_le_bytes(ver);
        if version != FORMAT_VERSION {
            return Err(Error::Codec(format!("unsupported checkpoint version {version}")));
        }
        let mut tensors = Vec::new();
        loop {
            let mut len_buf = [0u8; 2];
            match r.read_exact(&mut len_buf) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            }
            let name_len = u16::from_le_bytes(len_buf) as usize;
            let mut name_buf = vec![0u8; name_len];
            r.read_exact(&mut name_buf)
                .map_err(|_| Error::Codec("checkpoint truncated in tensor name".into()))?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| Error::Codec("tensor name is not UTF-8".into()))?;
            let mut nd = [0u8; 1];
            r.read_exact(&mut nd)
                .map_err(|_| Error::Codec(format!("checkpoint truncated in dims of {name}")))?;
            let mut dims = Vec::with_capacity(nd[0] as usize);
            for _ in 0..nd[0] {
                let mut db = [0u8; 4];
                r.read_exact(&mut db)
                    .map_err(|_| Error::Codec(format!("checkpoint truncated in dims of {name}")))?;
                dims.push(u32::from_le_bytes(db) as usize);
            }
            let count: usize = dims.iter().product();
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let mut vb = [0u8; 8];
                r.read_exact(&mut vb)
                    .map_err(|_| Error::Codec(format!("checkpoint truncated in payload of {name}")))?;
                data.push(f64::from_le_bytes(vb));
            }
            tensors.push(NamedTensor { name, dims, data });
        }
        Ok(Self { version, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Codec(format!("checkpoint is missing tensor {name}")))
    }

    fn mat<T: Scalar>(&self, name: &str) -> Result<Mat<T>> {
        let t = self.tensor(name)?;
        if t.dims.len() != 2 {
            return Err(Error::Codec(format!("tensor {name} is not a matrix")));
        }
        Ok(Mat::from_vec(
            t.dims[0],
            t.dims[1],
            t.data.iter().map(|v| T::cast(*v)).collect(),
        ))
    }

    fn vector<T: Scalar>(&self, name: &str) -> Result<Vec<T>> {
        let t = self.tensor(name)?;
        if t.dims.len() != 1 {
            return Err(Error::Codec(format!("tensor {name} is not a vector")));
        }
        Ok(t.data.iter().map(|v| T::cast(*v)).collect())
    }
}

fn mat_tensor<T: Scalar>(name: &str, m: &Mat<T>) -> NamedTensor {
    NamedTensor::new(name, vec![m.rows(), m.cols()], m.data())
}

/// Serializes a draft model (shared anchor and head included, so the file is
/// self-contained; the training-only projection is not part of the model).
pub fn draft_to_checkpoint<T: Scalar>(draft: &DraftModel<T>) -> Checkpoint {
    let proxy = draft.proxy();
    Checkpoint {
        version: FORMAT_VERSION,
        tensors: vec![
            NamedTensor::new(
                "proxy.table",
                vec![proxy.vocab(), proxy.window(), proxy.dim()],
                proxy.table(),
            ),
            mat_tensor("anchor.weight", draft.anchor().weight()),
            NamedTensor::new("anchor.bias", vec![draft.anchor().bias().len()], draft.anchor().bias()),
            mat_tensor("head.w1", &draft.head().w1),
            NamedTensor::new("head.b1", vec![draft.head().b1.len()], &draft.head().b1),
            mat_tensor("head.w2", &draft.head().w2),
            NamedTensor::new("head.b2", vec![draft.head().b2.len()], &draft.head().b2),
            mat_tensor("lm_head.weight", draft.lm_head()),
        ],
    }
}

/// Reassembles a draft model from a checkpoint.
pub fn draft_from_checkpoint<T: Scalar>(ckpt: &Checkpoint) -> Result<DraftModel<T>> {
    let proxy_t = ckpt.tensor("proxy.table")?;
    if proxy_t.dims.len() != 3 {
        return Err(Error::Codec("proxy.table must have dims [vocab, window, dim]".into()));
    }
    let proxy = FeatureBasis::from_parts(
        proxy_t.dims[0],
        proxy_t.dims[1],
        proxy_t.dims[2],
        proxy_t.data.iter().map(|v| T::cast(*v)).collect(),
    )?;
    let anchor = AnchorBlock::from_parts(ckpt.mat("anchor.weight")?, ckpt.vector("anchor.bias")?)?;
    let head = DraftHead {
        w1: ckpt.mat("head.w1")?,
        b1: ckpt.vector("head.b1")?,
        w2: ckpt.mat("head.w2")?,
        b2: ckpt.vector("head.b2")?,
    };
    let lm_head: Mat<T> = ckpt.mat("lm_head.weight")?;
    if lm_head.cols() != proxy.dim() {
        return Err(Error::Codec("lm_head width does not match the feature dim".into()));
    }
    Ok(DraftModel::from_parts(proxy, Arc::new(anchor), head, Arc::new(lm_head)))
}
