//! Frozen token embeddings: the binary `CEEM` file format and a hashed
//! stand-in for tests and demos.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ndcore::Tensor;
use crate::rng::stable_hash;

pub const CEEM_MAGIC: &[u8; 4] = b"CEEM";
pub const CEEM_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("not an embedding file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported embedding file version {0}")]
    Version(u32),
    #[error("embedding file ends early while reading {0}")]
    Truncated(&'static str),
    #[error("embedding file has trailing bytes after {0} examples")]
    TrailingBytes(u32),
    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("no embeddings for example {0:?}")]
    MissingId(String),
    #[error("example {id:?}: {found} embedding rows for {expected} tokens")]
    TokenCount { id: String, expected: usize, found: usize },
    #[error("example {id:?}: token {index} is {found:?} in the embedding file, {expected:?} in the tokenization")]
    PieceMismatch {
        id: String,
        index: usize,
        expected: String,
        found: String,
    },
    #[error("embedding dimension {found} does not match configured {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("example {id:?} has non-finite embedding values")]
    NonFinite { id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One example's token pieces and `n x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub pieces: Vec<String>,
    pub matrix: Tensor<f32>,
}

/// Contents of a `CEEM` file, keyed by example id.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingStore {
    dim: usize,
    order: Vec<String>,
    records: HashMap<String, EmbeddingRecord>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<(), EmbeddingError> {
        let (rows, cols) = record.matrix.dims2();
        if cols != self.dim && rows > 0 {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                found: cols,
            });
        }
        if rows != record.pieces.len() {
            return Err(EmbeddingError::TokenCount {
                id: record.id,
                expected: record.pieces.len(),
                found: rows,
            });
        }
        if !record.matrix.all_finite() {
            return Err(EmbeddingError::NonFinite { id: record.id });
        }
        if self.records.contains_key(&record.id) {
            return Err(EmbeddingError::DuplicateId(record.id));
        }
        self.order.push(record.id.clone());
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.records.get(id)
    }

    /// Records in file order.
    pub fn records(&self) -> impl Iterator<Item = &EmbeddingRecord> {
        self.order.iter().map(|id| &self.records[id])
    }

    pub fn read(mut source: impl Read) -> Result<Self, EmbeddingError> {
        let mut magic = [0u8; 4];
        read_exact(&mut source, &mut magic, "magic")?;
        if &magic != CEEM_MAGIC {
            return Err(EmbeddingError::BadMagic(magic));
        }
        let version = read_u32(&mut source, "version")?;
        if version != CEEM_VERSION {
            return Err(EmbeddingError::Version(version));
        }
        let dim = read_u32(&mut source, "dimension")? as usize;
        let count = read_u32(&mut source, "example count")?;
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..count {
            let id = read_string(&mut source, "example id")?;
            let n = read_u32(&mut source, "token count")? as usize;
            let pieces = (0..n)
                .map(|_| read_string(&mut source, "token piece"))
                .collect::<Result<Vec<_>, _>>()?;
            let mut bytes = vec![0u8; n * dim * 4];
            read_exact(&mut source, &mut bytes, "embedding matrix")?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let matrix = Tensor::new(vec![n, dim], data).expect("length computed from shape");
            store.insert(EmbeddingRecord { id, pieces, matrix })?;
        }
        let mut probe = [0u8; 1];
        if source.read(&mut probe)? != 0 {
            return Err(EmbeddingError::TrailingBytes(count));
        }
        Ok(store)
    }

    pub fn read_file(path: &Path) -> Result<Self, EmbeddingError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write(&self, mut sink: impl Write) -> Result<(), EmbeddingError> {
        sink.write_all(CEEM_MAGIC)?;
        for v in [CEEM_VERSION, self.dim as u32, self.order.len() as u32] {
            sink.write_all(&v.to_le_bytes())?;
        }
        for rec in self.records() {
            write_string(&mut sink, &rec.id)?;
            sink.write_all(&(rec.pieces.len() as u32).to_le_bytes())?;
            for p in &rec.pieces {
                write_string(&mut sink, p)?;
            }
            for v in rec.matrix.data() {
                sink.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<(), EmbeddingError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EmbeddingError::Truncated(what),
        _ => EmbeddingError::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &'static str) -> Result<u32, EmbeddingError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read, what: &'static str) -> Result<String, EmbeddingError> {
    let len = read_u32(r, what)? as usize;
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf, what)?;
    String::from_utf8(buf).map_err(|_| EmbeddingError::Utf8(what))
}

fn write_string(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

/// Deterministic vector for a token piece: values in `[-0.5, 0.5)`.
pub fn hashed_vector(piece: &str, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(piece.as_bytes()));
    (0..dim)
        .map(|_| {
            // top 24 bits → exact f32 in [0, 1)
            let u = (rng.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32);
            u - 0.5
        })
        .collect()
}

/// Source of the per-token embedding matrix.
#[derive(Clone, Debug)]
pub enum EmbeddingProvider {
    File(EmbeddingStore),
    Hashed { dim: usize },
}

impl EmbeddingProvider {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingProvider::File(s) => s.dim(),
            EmbeddingProvider::Hashed { dim } => *dim,
        }
    }

    /// Embeddings for the first `keep` of `pieces`. File-backed rows are
    /// checked piece by piece against the tokenization.
    pub fn embed(&self, id: &str, pieces: &[String], keep: usize) -> Result<Tensor<f32>, EmbeddingError> {
        let keep = keep.min(pieces.len());
        match self {
            EmbeddingProvider::Hashed { dim } => {
                let data = pieces[..keep].iter().flat_map(|p| hashed_vector(p, *dim)).collect();
                Ok(Tensor::new(vec![keep, *dim], data).expect("length computed from shape"))
            }
            EmbeddingProvider::File(store) => {
                let rec = store.get(id).ok_or_else(|| EmbeddingError::MissingId(id.to_owned()))?;
                verify_alignment(id, &rec.pieces, pieces)?;
                let dim = store.dim();
                let data = rec.matrix.data()[..keep * dim].to_vec();
                Ok(Tensor::new(vec![keep, dim], data).expect("length computed from shape"))
            }
        }
    }
}

/// Checks that the embedding file's pieces equal the tokenization's.
pub fn verify_alignment(id: &str, stored: &[String], expected: &[String]) -> Result<(), EmbeddingError> {
    if stored.len() != expected.len() {
        return Err(EmbeddingError::TokenCount {
            id: id.to_owned(),
            expected: expected.len(),
            found: stored.len(),
        });
    }
    if let Some(i) = stored.iter().zip(expected).position(|(a, b)| a != b) {
        return Err(EmbeddingError::PieceMismatch {
            id: id.to_owned(),
            index: i,
            expected: expected[i].clone(),
            found: stored[i].clone(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(3);
        s.insert(EmbeddingRecord {
            id: "0001.1".into(),
            pieces: vec!["Lo".into(), "##ss".into()],
            matrix: Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.0, 1e-3, -7.25]).unwrap(),
        })
        .unwrap();
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CEEM");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        let back = EmbeddingStore::read(buf.as_slice()).unwrap();
        assert_eq!(back.get("0001.1"), s.get("0001.1"));
    }

    #[test]
    fn format_guards() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingStore::read(bad.as_slice()), Err(EmbeddingError::BadMagic(_))));
        let short = &buf[..buf.len() - 2];
        assert!(matches!(EmbeddingStore::read(short), Err(EmbeddingError::Truncated(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(EmbeddingStore::read(long.as_slice()), Err(EmbeddingError::TrailingBytes(1))));
        let mut ver = buf;
        ver[4] = 9;
        assert!(matches!(EmbeddingStore::read(ver.as_slice()), Err(EmbeddingError::Version(9))));
    }

    #[test]
    fn alignment_checked() {
        let p = EmbeddingProvider::File(sample());
        let good = vec!["Lo".to_string(), "##ss".to_string()];
        assert_eq!(p.embed("0001.1", &good, 350).unwrap().shape(), &[2, 3]);
        assert_eq!(p.embed("0001.1", &good, 1).unwrap().shape(), &[1, 3]);
        let bad = vec!["Lo".to_string(), "ss".to_string()];
        assert!(matches!(p.embed("0001.1", &bad, 350), Err(EmbeddingError::PieceMismatch { index: 1, .. })));
        assert!(matches!(p.embed("nope", &good, 350), Err(EmbeddingError::MissingId(_))));
    }

    #[test]
    fn hashed_is_stable_and_bounded() {
        let a = hashed_vector("because", 768);
        assert_eq!(a, hashed_vector("because", 768));
        assert_ne!(a, hashed_vector("Because", 768));
        assert!(a.iter().all(|v| (-0.5..0.5).contains(v)));
        // pinned values guard against platform or dependency drift
        let head: Vec<u32> = hashed_vector("loss", 3).iter().map(|v| v.to_bits()).collect();
        assert_eq!(head, PINNED_LOSS);
    }

    const PINNED_LOSS: [u32; 3] = [1052463398, 1032839336, 3196453466];
}
