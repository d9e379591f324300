//! Binary persistence of a similarity matrix with its item vocabulary.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "WREC-SIM"
//! version    u32
//! kind       u8       index into SimilarityKind::ALL
//! form       u8       0 none, 1 primal, 2 dual, 3 auto
//! flags      u8       bit 0: lambda present
//! reserved   u8
//! dim        u32
//! lambda     f64
//! emb_dim    u32      0 when absent
//! values     dim*dim f64, row-major
//! vocab      dim x (u32 length, UTF-8 bytes)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use wrec::binio::{read_exact, read_f64s, read_u32, read_vocab, write_vocab};
use wrec::{ConfigSnapshot, DenseMatrix, Error, Result, RidgeForm, SimilarityKind, SimilarityMatrix};

const MAGIC: &[u8; 8] = b"WREC-SIM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub matrix: SimilarityMatrix,
    pub item_ids: Vec<String>,
}

fn kind_tag(kind: SimilarityKind) -> u8 {
    SimilarityKind::ALL.iter().position(|&k| k == kind).expect("kind listed in ALL") as u8
}

fn form_tag(form: Option<RidgeForm>) -> u8 {
    match form {
        None => 0,
        Some(RidgeForm::Primal) => 1,
        Some(RidgeForm::Dual) => 2,
        Some(RidgeForm::Auto) => 3,
    }
}

fn form_from_tag(tag: u8) -> Result<Option<RidgeForm>> {
    Ok(match tag {
        0 => None,
        1 => Some(RidgeForm::Primal),
        2 => Some(RidgeForm::Dual),
        3 => Some(RidgeForm::Auto),
        t => return Err(Error::Format(format!("unknown ridge form tag {t}"))),
    })
}

impl ModelFile {
    pub fn new(matrix: SimilarityMatrix, item_ids: Vec<String>) -> Result<Self> {
        if item_ids.len() != matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: matrix.dim(),
                found: item_ids.len(),
            });
        }
        Ok(ModelFile { matrix, item_ids })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        let m = &self.matrix;
        let cfg = &m.config;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[
            kind_tag(m.kind),
            form_tag(cfg.form),
            cfg.lambda.is_some() as u8,
            0,
        ])?;
        w.write_all(&(m.dim() as u32).to_le_bytes())?;
        w.write_all(&cfg.lambda.unwrap_or(0.0).to_le_bytes())?;
        w.write_all(&(cfg.embedding_dim.unwrap_or(0) as u32).to_le_bytes())?;
        for v in m.values.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        write_vocab(w, &self.item_ids)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        ModelFile::read(&mut BufReader::new(file))
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model file version {version}")));
        }
        let mut tags = [0u8; 4];
        read_exact(r, &mut tags)?;
        let kind = *SimilarityKind::ALL
            .get(tags[0] as usize)
            .ok_or_else(|| Error::Format(format!("unknown model kind tag {}", tags[0])))?;
        let form = form_from_tag(tags[1])?;
        let dim = read_u32(r)? as usize;
        let lambda = read_f64s(r, 1)?[0];
        let emb_dim = read_u32(r)? as usize;
        let values = read_f64s(r, dim * dim)?;
        let item_ids = read_vocab(r, dim)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::Format(e.to_string()))? != 0 {
            return Err(Error::Format("trailing bytes after model vocabulary".into()));
        }
        let config = ConfigSnapshot {
            lambda: (tags[2] & 1 == 1).then_some(lambda),
            form,
            embedding_dim: (emb_dim > 0).then_some(emb_dim),
        };
        let matrix = SimilarityMatrix::new(DenseMatrix::new(dim, dim, values)?, kind, config)?;
        ModelFile::new(matrix, item_ids)
    }
}
