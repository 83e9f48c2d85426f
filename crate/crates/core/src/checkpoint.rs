//! Binary parameter container.
//!
//! Layout (all integers little-endian `u32`, floats little-endian IEEE-754
//! `f64`, strings as `u32` byte length followed by UTF-8):
//!
//! ```text
//! magic    b"AALSTMCK"
//! version  u32 (= 1)
//! meta     u32 count, then count x (key string, value string)
//! vocab    u32 count, then count x token string
//! params   u32 count, then count x (name string, rows u32, cols u32, rows*cols f64)
//! ```
//!
//! Values are stored bit-for-bit, so save followed by load reproduces every
//! parameter exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::cell::CellKind;
use crate::data::{Task, Vocabulary};
use crate::error::{Error, Result};
use crate::head::HeadKind;
use crate::model::{init_params, Model, ModelSpec};
use crate::params::Parameters;
use crate::tensor::{seeded_rng, Matrix};

pub const MAGIC: &[u8; 8] = b"AALSTMCK";
pub const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::arg(format!("{v} does not fit the container")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = read_u32(r)?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::parse("checkpoint", "string is not UTF-8"))
}

/// Writes every tensor of `params` as (name, shape, values).
pub fn write_params<W: Write, P: Parameters>(w: &mut W, params: &P) -> Result<()> {
    let ts = params.tensors();
    write_u32(w, ts.len())?;
    for t in ts {
        write_str(w, &t.name)?;
        write_u32(w, t.shape.0)?;
        write_u32(w, t.shape.1)?;
        for x in t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads tensors into an already-shaped `params`. Names, order and shapes
/// must match exactly.
pub fn read_params_into<R: Read, P: Parameters>(r: &mut R, params: &mut P) -> Result<()> {
    let n = read_u32(r)?;
    let ts = params.tensors_mut();
    if n != ts.len() {
        return Err(Error::config(format!(
            "checkpoint holds {n} tensors, model expects {}",
            ts.len()
        )));
    }
    for t in ts {
        let name = read_str(r)?;
        let shape = (read_u32(r)?, read_u32(r)?);
        if name != t.name || shape != t.shape {
            return Err(Error::config(format!(
                "checkpoint tensor {name} {}x{} does not match model tensor {} {}x{}",
                shape.0, shape.1, t.name, t.shape.0, t.shape.1
            )));
        }
        let mut b = [0u8; 8];
        for x in t.data.iter_mut() {
            r.read_exact(&mut b)?;
            *x = f64::from_le_bytes(b);
        }
    }
    Ok(())
}

pub fn write_model<W: Write>(w: &mut W, model: &Model) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION as usize)?;
    let s = &model.spec;
    let meta = [
        ("task", s.task.as_str().to_string()),
        ("cell", s.cell.as_str().to_string()),
        ("head", s.head.as_str().to_string()),
        ("embedding_dim", s.embedding_dim.to_string()),
        ("hidden_dim", s.hidden_dim.to_string()),
    ];
    write_u32(w, meta.len())?;
    for (k, v) in &meta {
        write_str(w, k)?;
        write_str(w, v)?;
    }
    write_u32(w, model.vocab.len())?;
    for t in model.vocab.tokens() {
        write_str(w, t)?;
    }
    write_params(w, &model.params)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<Model> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::parse("checkpoint", "file too short for a checkpoint header"))?;
    if &magic != MAGIC {
        return Err(Error::parse("checkpoint", "not a checkpoint file (bad magic)"));
    }
    let version = read_u32(r)?;
    if version != VERSION as usize {
        return Err(Error::parse(
            "checkpoint",
            format!("unsupported version {version} (expected {VERSION})"),
        ));
    }
    let n_meta = read_u32(r)?;
    let mut meta = std::collections::HashMap::new();
    for _ in 0..n_meta {
        let k = read_str(r)?;
        let v = read_str(r)?;
        meta.insert(k, v);
    }
    let get = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| Error::parse("checkpoint", format!("missing metadata key {k:?}")))
    };
    let dim = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::parse("checkpoint", format!("bad {k}")))
    };
    let spec = ModelSpec {
        task: get("task")?.parse::<Task>()?,
        cell: get("cell")?.parse::<CellKind>()?,
        head: get("head")?.parse::<HeadKind>()?,
        embedding_dim: dim("embedding_dim")?,
        hidden_dim: dim("hidden_dim")?,
    };
    spec.validate()?;

    let n_vocab = read_u32(r)?;
    let mut tokens = Vec::with_capacity(n_vocab);
    for _ in 0..n_vocab {
        tokens.push(read_str(r)?);
    }
    let vocab = Vocabulary::from_tokens(tokens.into_iter().skip(1));
    if vocab.len() != n_vocab {
        return Err(Error::parse("checkpoint", "vocabulary is not a list of distinct tokens"));
    }

    let words = Matrix::zeros(vocab.len(), spec.embedding_dim);
    let mut params = init_params(&spec, words, -1.0, 1.0, &mut seeded_rng(0))?;
    read_params_into(r, &mut params)?;
    Ok(Model { spec, vocab, params })
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_model(&mut r)
}
