use super::{ModelSpec, SegmentationModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SPALCKPT";
const VERSION: u32 = 1;

/// Magic, version, class count, JSON model spec, then the flat `f64` parameters.
pub fn write_checkpoint(model: &dyn SegmentationModel) -> Vec<u8> {
    let spec = serde_json::to_vec(&model.spec()).expect("model spec serialises");
    let params = model.params();
    let mut out = Vec::with_capacity(28 + spec.len() + params.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Box<dyn SegmentationModel>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let num_classes = r.u32()? as usize;
    let len = r.u32()? as usize;
    let spec: ModelSpec = serde_json::from_slice(r.take(len)?)?;
    let n = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let mut model = spec.build(num_classes, 0)?;
    if model.params().len() != n {
        return Err(Error::LengthMismatch { what: "checkpoint parameters", got: n, expected: model.params().len() });
    }
    let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("parameter count overflow".into()))?)?;
    for (p, chunk) in model.params_mut().iter_mut().zip(raw.chunks_exact(8)) {
        *p = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(model)
}
