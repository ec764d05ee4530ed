//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "MLCR"  u16 version (1)
//! u32 config length, config as UTF-8 JSON
//! u32 tensor count
//! per tensor:
//!   u16 name length, UTF-8 name
//!   u8 rank, rank × u32 dims
//!   u8 dtype (0 = f32)
//!   product(dims) × f32
//! ```
//!
//! Tensors appear in parameter construction order.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MlCraist, ModelConfig};

pub const MAGIC: &[u8; 4] = b"MLCR";
pub const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

pub fn to_bytes(model: &MlCraist) -> Result<Vec<u8>> {
    let config = serde_json::to_string(&model.config).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(64 + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for p in model.store.iter() {
        let name = p.name.as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("name too long: {}", p.name)))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(p.dims.len() as u8);
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(DTYPE_F32);
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

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn str(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|e| Error::Format(format!("invalid UTF-8: {e}")))
    }
}

/// Read only the configuration block.
pub fn read_config(bytes: &[u8]) -> Result<ModelConfig> {
    let mut r = Reader { buf: bytes, pos: 0 };
    header(&mut r)
}

fn header(r: &mut Reader<'_>) -> Result<ModelConfig> {
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let text = r.str(len)?;
    serde_json::from_str(text).map_err(|e| Error::Format(format!("bad configuration block: {e}")))
}

pub fn from_bytes(bytes: &[u8]) -> Result<MlCraist> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let config = header(&mut r)?;
    config.validate()?;
    let mut model = MlCraist::new(config, 0)?;
    let count = r.u32()? as usize;
    if count != model.store.len() {
        return Err(Error::Format(format!(
            "expected {} tensors for this configuration, found {count}",
            model.store.len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = r.str(name_len)?;
        let id = model
            .store
            .find(name)
            .ok_or_else(|| Error::Format(format!("unexpected tensor `{name}`")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(Error::Format(format!("duplicate tensor `{name}`")));
        }
        let rank = r.u8()? as usize;
        let dims = (0..rank).map(|_| Ok(r.u32()? as usize)).collect::<Result<Vec<_>>>()?;
        let p = model.store.get_mut(id);
        if dims != p.dims {
            return Err(Error::Format(format!("`{name}` has dims {dims:?}, expected {:?}", p.dims)));
        }
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("`{name}` has unsupported dtype {dtype}")));
        }
        let raw = r.take(4 * p.numel())?;
        for (dst, src) in p.value.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(src.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save(model: &MlCraist, path: &Path) -> Result<()> {
    write_atomic(path, &to_bytes(model)?)
}

pub fn load(path: &Path) -> Result<MlCraist> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
