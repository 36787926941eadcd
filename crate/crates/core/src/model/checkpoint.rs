use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelError, ModelParams, Result};

const MAGIC: &str = "listaformer-checkpoint v1";
const HEADER_END: &str = "---\n";

/// Configuration, weights and any extra `key = value` metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub extras: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Text header with the configuration and extras, a `---` line, then every
/// parameter as little-endian `f64` in serialization order.
pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut header = format!("{MAGIC}\n");
    for (k, v) in ck.config.to_pairs() {
        header.push_str(&format!("{k} = {v}\n"));
    }
    header.push_str(&format!("parameters = {}\n", ck.params.parameter_count()));
    for (k, v) in &ck.extras {
        header.push_str(&format!("{k} = {v}\n"));
    }
    header.push_str(HEADER_END);
    let mut out = header.into_bytes();
    for v in ck.params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |msg: String| ModelError::Checkpoint(msg);
    let split = bytes
        .windows(HEADER_END.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == HEADER_END.as_bytes())
        .ok_or_else(|| bad("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not utf-8".into()))?;
    let payload = &bytes[split + 1 + HEADER_END.len()..];
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint file".into()));
    }
    let mut config = ModelConfig::default();
    let mut declared = None;
    let mut extras = Vec::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("header line without '=': {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "parameters" {
            declared = Some(v.parse::<usize>().map_err(|_| bad(format!("bad parameter count {v:?}")))?);
        } else if !config.set(k, v)? {
            extras.push((k.to_string(), v.to_string()));
        }
    }
    let mut params = ModelParams::init(&config, 0)?;
    let count = params.parameter_count();
    if declared != Some(count) || payload.len() != 8 * count {
        return Err(bad(format!(
            "configuration implies {count} parameters; header declares {declared:?}, payload holds {} bytes",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    params.load_flat(&values)?;
    Ok(Checkpoint { config, params, extras })
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(ck)).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    decode_checkpoint(&bytes)
}
