//! Plain-text parameter snapshots.
//!
//! ```text
//! cfpt-model 1
//! config_hash 3f5c0e1a9b2d4c67
//! seed 0
//! input_dim 9
//! hidden_dims 32,32
//! init_regression_bias true
//! params 1410
//! <one parameter per line>
//! ```
//!
//! Floats are written in shortest round-trip form, so `load(save(m)) == m`.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::mlp::{Mlp, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "cfpt-model 1";

pub fn config_hash(cfg: &ModelConfig) -> String {
    let canonical = format!(
        "input_dim={};hidden_dims={:?};seed={};init_regression_bias={}",
        cfg.input_dim, cfg.hidden_dims, cfg.seed, cfg.init_regression_bias
    );
    Sha256::digest(canonical.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn to_string(model: &Mlp) -> String {
    let cfg = model.config();
    let hidden = cfg
        .hidden_dims
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "config_hash {}", config_hash(cfg));
    let _ = writeln!(out, "seed {}", cfg.seed);
    let _ = writeln!(out, "input_dim {}", cfg.input_dim);
    let _ = writeln!(out, "hidden_dims {hidden}");
    let _ = writeln!(out, "init_regression_bias {}", cfg.init_regression_bias);
    let _ = writeln!(out, "params {}", model.num_params());
    for p in model.params() {
        let _ = writeln!(out, "{p}");
    }
    out
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        path: "<snapshot>".into(),
        row: line,
        message: message.into(),
    }
}

pub fn from_str(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (n, line) = lines.next().ok_or_else(|| bad(0, format!("missing {key}")))?;
        if key == "magic" {
            return Ok((n, line.to_string()));
        }
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.to_string())),
            _ => Err(bad(n, format!("expected `{key} <value>`"))),
        }
    };
    let (n, magic) = field("magic")?;
    if magic != MAGIC {
        return Err(bad(n, format!("not a model snapshot (header {magic:?})")));
    }
    let (hash_line, hash) = field("config_hash")?;
    let parse_num = |(n, v): (usize, String)| v.parse::<u64>().map_err(|e| bad(n, e.to_string()));
    let seed = parse_num(field("seed")?)?;
    let input_dim = parse_num(field("input_dim")?)? as usize;
    let (n, hidden) = field("hidden_dims")?;
    let hidden_dims = if hidden.is_empty() {
        Vec::new()
    } else {
        hidden
            .split(',')
            .map(|h| h.parse::<usize>().map_err(|e| bad(n, e.to_string())))
            .collect::<Result<Vec<_>>>()?
    };
    let (n, flag) = field("init_regression_bias")?;
    let init_regression_bias = flag.parse::<bool>().map_err(|e| bad(n, e.to_string()))?;
    let count = parse_num(field("params")?)? as usize;

    let cfg = ModelConfig {
        input_dim,
        hidden_dims,
        seed,
        init_regression_bias,
    };
    if config_hash(&cfg) != hash {
        return Err(bad(hash_line, "config hash does not match header fields"));
    }
    let params = lines
        .map(|(n, l)| l.trim().parse::<f64>().map_err(|e| bad(n, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if params.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: params.len(),
        });
    }
    Mlp::from_params(&cfg, params)
}

pub fn save(model: &Mlp, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
