//! Versioned binary checkpoint container: magic `EFDM`, format version, a
//! text config block, then named f64 tensors. Round trips are bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{DenoiserModel, ModelConfig};
use super::tape::Tensor;
use super::DiffusionError;

const MAGIC: &[u8; 4] = b"EFDM";
const VERSION: u32 = 1;

/// Writes the model plus free-form key=value extras (normalization stats,
/// geometry, schedule length) into one self-contained file.
pub fn save_checkpoint(
    path: &Path,
    model: &DenoiserModel,
    extras: &BTreeMap<String, String>,
) -> Result<(), DiffusionError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;

    let cfg = &model.cfg;
    let mut config = String::new();
    config.push_str(&format!("channels={}\n", cfg.channels));
    config.push_str(&format!("seq_len={}\n", cfg.seq_len));
    config.push_str(&format!("width={}\n", cfg.width));
    config.push_str(&format!("blocks={}\n", cfg.blocks));
    config.push_str(&format!("heads={}\n", cfg.heads));
    config.push_str(&format!("poly_degree={}\n", cfg.poly_degree));
    config.push_str(&format!("enable_trend={}\n", cfg.enable_trend));
    config.push_str(&format!("enable_seasonal={}\n", cfg.enable_seasonal));
    config.push_str(&format!("enable_residual={}\n", cfg.enable_residual));
    for (k, v) in extras {
        config.push_str(&format!("x.{k}={v}\n"));
    }
    out.write_all(&(config.len() as u64).to_le_bytes())?;
    out.write_all(config.as_bytes())?;

    out.write_all(&(model.params().len() as u32).to_le_bytes())?;
    for (name, tensor) in model.params() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&2u32.to_le_bytes())?; // rank
        out.write_all(&(tensor.rows as u32).to_le_bytes())?;
        out.write_all(&(tensor.cols as u32).to_le_bytes())?;
        for v in &tensor.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(DenoiserModel, BTreeMap<String, String>), DiffusionError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DiffusionError::BadCheckpoint("bad magic bytes".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(DiffusionError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let mut word8 = [0u8; 8];
    input.read_exact(&mut word8)?;
    let config_len = u64::from_le_bytes(word8) as usize;
    let mut config_bytes = vec![0u8; config_len];
    input.read_exact(&mut config_bytes)?;
    let config = String::from_utf8(config_bytes)
        .map_err(|e| DiffusionError::BadCheckpoint(format!("config block not utf-8: {e}")))?;

    let mut kv = BTreeMap::new();
    let mut extras = BTreeMap::new();
    for line in config.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| DiffusionError::BadCheckpoint(format!("bad config line: {line}")))?;
        if let Some(ext) = key.strip_prefix("x.") {
            extras.insert(ext.to_string(), value.to_string());
        } else {
            kv.insert(key.to_string(), value.to_string());
        }
    }
    let get = |key: &str| -> Result<&String, DiffusionError> {
        kv.get(key)
            .ok_or_else(|| DiffusionError::BadCheckpoint(format!("missing config key {key}")))
    };
    let parse_usize = |key: &str| -> Result<usize, DiffusionError> {
        get(key)?
            .parse()
            .map_err(|e| DiffusionError::BadCheckpoint(format!("{key}: {e}")))
    };
    let parse_bool = |key: &str| -> Result<bool, DiffusionError> {
        get(key)?
            .parse()
            .map_err(|e| DiffusionError::BadCheckpoint(format!("{key}: {e}")))
    };
    let cfg = ModelConfig {
        channels: parse_usize("channels")?,
        seq_len: parse_usize("seq_len")?,
        width: parse_usize("width")?,
        blocks: parse_usize("blocks")?,
        heads: parse_usize("heads")?,
        poly_degree: parse_usize("poly_degree")?,
        enable_trend: parse_bool("enable_trend")?,
        enable_seasonal: parse_bool("enable_seasonal")?,
        enable_residual: parse_bool("enable_residual")?,
    };

    input.read_exact(&mut word)?;
    let count = u32::from_le_bytes(word) as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut word)?;
        let name_len = u32::from_le_bytes(word) as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| DiffusionError::BadCheckpoint(format!("tensor name not utf-8: {e}")))?;
        input.read_exact(&mut word)?;
        let rank = u32::from_le_bytes(word);
        if rank != 2 {
            return Err(DiffusionError::BadCheckpoint(format!("{name}: unsupported rank {rank}")));
        }
        input.read_exact(&mut word)?;
        let rows = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let cols = u32::from_le_bytes(word) as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in &mut data {
            input.read_exact(&mut word8)?;
            *v = f64::from_le_bytes(word8);
        }
        params.push((name, Tensor::from_vec(rows, cols, data)));
    }
    let model = DenoiserModel::from_params(cfg, params);
    Ok((model, extras))
}
