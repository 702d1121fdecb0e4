//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "MFZ1"
//! version      u32      1
//! config       u32 x 13 input_channels, input_size, stage count (5),
//!                       5 stage widths, 5 conv counts
//! parameters   for each tensor in build order:
//!                u32 rank (4 for kernels, 1 for biases)
//!                u32 x rank dimensions
//!                f32 x product(dimensions) values
//! ```
//!
//! Nothing may follow the last tensor.

use std::fs;
use std::path::Path;

use super::network::{NetConfig, STAGES};
use crate::nn::{ParamKind, ParamStore, Shape, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MFZ1";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn checkpoint_to_bytes(params: &ParamStore<f32>, config: &NetConfig) -> Result<Vec<u8>> {
    config.validate()?;
    let layout = config.param_layout();
    if layout.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "config describes {} tensors, store holds {}",
            layout.len(),
            params.len()
        )));
    }
    let mut out = Vec::with_capacity(64 + params.numel() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, config.input_channels)?;
    put_u32(&mut out, config.input_size)?;
    put_u32(&mut out, STAGES)?;
    for &v in config.stage_channels.iter().chain(&config.convs_per_stage) {
        put_u32(&mut out, v)?;
    }
    for ((name, kind, dims), p) in layout.iter().zip(params.iter()) {
        let s = p.value.shape();
        if &p.name != name || [s.n, s.c, s.h, s.w] != *dims {
            return Err(Error::Checkpoint(format!(
                "parameter {} ({s}) does not match the config's {name}",
                p.name
            )));
        }
        match kind {
            ParamKind::Kernel => {
                put_u32(&mut out, 4)?;
                for &d in dims {
                    put_u32(&mut out, d)?;
                }
            }
            ParamKind::Bias => {
                put_u32(&mut out, 1)?;
                put_u32(&mut out, dims[0])?;
            }
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(ParamStore<f32>, NetConfig)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a fusion network checkpoint".into()));
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let input_channels = r.u32()?;
    let input_size = r.u32()?;
    let stages = r.u32()?;
    if stages != STAGES {
        return Err(Error::Checkpoint(format!("{stages} stages recorded, expected {STAGES}")));
    }
    let stage_channels = (0..STAGES).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let convs_per_stage = (0..STAGES).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let config = NetConfig {
        input_channels,
        stage_channels,
        convs_per_stage,
        input_size,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("stored config is invalid: {e}")))?;
    let mut store = ParamStore::new();
    for (name, kind, dims) in config.param_layout() {
        let rank = r.u32()?;
        let stored: Vec<usize> = (0..rank.min(4)).map(|_| r.u32()).collect::<Result<_>>()?;
        let expected: &[usize] = match kind {
            ParamKind::Kernel => &dims,
            ParamKind::Bias => &dims[..1],
        };
        if stored != expected {
            return Err(Error::Checkpoint(format!(
                "{name}: stored dimensions {stored:?} do not match {expected:?} from the config"
            )));
        }
        let shape = Shape::new(dims[0], dims[1], dims[2], dims[3])?;
        let raw = r.take(shape.numel() * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.push(name, kind, Tensor::from_vec(shape, data)?)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} unexpected bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok((store, config))
}

pub fn save_checkpoint(params: &ParamStore<f32>, config: &NetConfig, path: &Path) -> Result<()> {
    let bytes = checkpoint_to_bytes(params, config)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamStore<f32>, NetConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
