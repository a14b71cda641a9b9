//! Binary parameter container.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! magic    8 bytes  "DSNTCKPT"
//! version  u32      1
//! length   u64      byte length of the JSON header
//! header   JSON     {"meta": <caller metadata>, "params": [{"name", "rows", "cols"}, ...]}
//! blobs    f64 LE   every parameter's values in header order, row major
//! ```
//!
//! Values are stored as raw IEEE bits so a round trip is exact, and the
//! header is written with a fixed key order so saving the same model twice
//! yields identical bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DSNTCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: Value,
    params: Vec<ParamEntry>,
}

pub fn write_checkpoint<W: Write>(mut w: W, meta: Value, store: &ParameterStore) -> Result<()> {
    let header = Header {
        meta,
        params: store
            .iter()
            .map(|(_, name, t)| ParamEntry {
                name: name.to_string(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, _, t) in store.iter() {
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint back into its metadata and a parameter store in saved order.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Value, ParameterStore)> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    read_exact(&mut r, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let mut len = [0u8; 8];
    read_exact(&mut r, &mut len, "header length")?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    read_exact(&mut r, &mut json, "header")?;
    let header: Header = serde_json::from_slice(&json)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;

    let mut store = ParameterStore::new();
    for entry in header.params {
        let n = entry.rows * entry.cols;
        let mut raw = vec![0u8; n * 8];
        read_exact(&mut r, &mut raw, &entry.name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store
            .insert(&entry.name, Tensor::from_vec(entry.rows, entry.cols, data))
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last parameter".into()));
    }
    Ok((header.meta, store))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint(format!("truncated at {what}")),
        _ => Error::Io(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn store() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("a", Tensor::from_vec(2, 2, vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300]))
            .unwrap();
        s.insert("b", Tensor::row_vector(vec![0.1, 0.2, 0.3])).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, json!({"k": 1}), &s).unwrap();
        let (meta, back) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(meta, json!({"k": 1}));
        for ((_, n1, t1), (_, n2, t2)) in s.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (x, y) in t1.data().iter().zip(t2.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let mut first = Vec::new();
        write_checkpoint(&mut first, json!({"z": [1, 2], "a": "x"}), &store()).unwrap();
        let (meta, back) = read_checkpoint(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_checkpoint(&mut second, meta, &back).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, json!(null), &store()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Checkpoint(_))));
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(cut), Err(Error::Checkpoint(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_checkpoint(long.as_slice()), Err(Error::Checkpoint(_))));
    }
}
