use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelError, ModelSpec, ModelState};
use crate::neuro::ComponentTag;

pub const MAGIC: &[u8; 8] = b"SMOGCAST";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    tag: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    params: Vec<ParamEntry>,
}

/// Layout: magic, u32 version, u32 header length, TOML header, raw
/// little-endian f64 values in header order, SHA-256 of everything before it.
pub fn write_model<W: Write>(model: &ModelState, out: &mut W) -> Result<(), ModelError> {
    let params = model.params();
    let header = Header {
        spec: model.spec.clone(),
        seed: model.seed,
        scaler_hash: model.scaler_hash.clone(),
        config_hash: model.config_hash.clone(),
        params: params
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                tag: p.tag.name(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let text = toml::to_string(&header).map_err(|e| ModelError::CorruptFile(e.to_string()))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    for p in &params {
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_model<R: Read>(input: &mut R) -> Result<ModelState, ModelError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let corrupt = |m: &str| ModelError::CorruptFile(m.to_string());
    if buf.len() < 16 || &buf[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != CONTAINER_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: CONTAINER_VERSION,
        });
    }
    if buf.len() < 16 + 32 {
        return Err(corrupt("truncated"));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let hlen = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
    let text = body
        .get(16..16 + hlen)
        .ok_or_else(|| corrupt("header length out of range"))?;
    let text = std::str::from_utf8(text).map_err(|_| corrupt("header is not UTF-8"))?;
    let header: Header = toml::from_str(text).map_err(|e| ModelError::CorruptFile(e.to_string()))?;
    let mut model = ModelState::build(&header.spec, header.seed)?;
    model.scaler_hash = header.scaler_hash;
    model.config_hash = header.config_hash;
    let mut values = body[16 + hlen..].chunks_exact(8);
    if body[16 + hlen..].len() % 8 != 0 {
        return Err(corrupt("ragged value block"));
    }
    let mut params = model.params_mut();
    if params.len() != header.params.len() {
        return Err(corrupt("parameter list does not match spec"));
    }
    for (p, entry) in params.iter_mut().zip(&header.params) {
        let tag: ComponentTag = entry.tag.parse()?;
        if p.name != entry.name || p.tag != tag || p.value.shape() != entry.shape.as_slice() {
            return Err(corrupt(&format!("parameter `{}` does not match spec", entry.name)));
        }
        for v in p.value.data_mut() {
            let bytes = values.next().ok_or_else(|| corrupt("value block too short"))?;
            *v = f64::from_le_bytes(bytes.try_into().unwrap());
        }
    }
    if values.next().is_some() {
        return Err(corrupt("trailing values"));
    }
    Ok(model)
}

pub fn save_model(model: &ModelState, path: &Path) -> Result<(), ModelError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(model, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelState, ModelError> {
    read_model(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
