//! The learned triple `(Ω, Q, W)` and its binary container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field          | type                          |
//! |----------------|-------------------------------|
//! | magic          | `b"SADL"`                     |
//! | version        | `u32` (= 1)                   |
//! | r, m, s, c     | `u32` each                    |
//! | Ω              | `r·m` `f64`, row-major        |
//! | Q              | `s·r` `f64`, row-major        |
//! | W              | `c·s` `f64`, row-major        |
//! | config length  | `u32`, bytes of UTF-8 text    |
//! | config         | `key = value` text            |

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::config::TrainConfig;
use crate::data::ByteReader;
use crate::error::{Error, Result};
use crate::linalg::shape;

const MAGIC: &[u8; 4] = b"SADL";
const VERSION: u32 = 1;

/// Tolerance on `‖ω_i‖₂ = 1` for every atom.
pub const ROW_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    omega: DMatrix<f64>,
    q: DMatrix<f64>,
    w: DMatrix<f64>,
    config: TrainConfig,
}

impl Model {
    /// Checks that `W·Q·Ω` chains and that every row of `Ω` is unit-norm.
    pub fn new(omega: DMatrix<f64>, q: DMatrix<f64>, w: DMatrix<f64>, config: TrainConfig) -> Result<Self> {
        if q.ncols() != omega.nrows() {
            return Err(Error::dims("Model::new", format!("Q with {} columns", omega.nrows()), shape(&q)));
        }
        if w.ncols() != q.nrows() {
            return Err(Error::dims("Model::new", format!("W with {} columns", q.nrows()), shape(&w)));
        }
        if w.nrows() == 0 {
            return Err(Error::InvalidData("model needs at least one class".into()));
        }
        for (i, row) in omega.row_iter().enumerate() {
            let norm = row.norm();
            if !((norm - 1.0).abs() <= ROW_NORM_TOL) {
                return Err(Error::InvalidData(format!(
                    "dictionary row {i} has norm {norm}, expected 1"
                )));
            }
        }
        if let Some(v) = q.iter().chain(w.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite model entry {v}")));
        }
        Ok(Model { omega, q, w, config })
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of atoms `r`.
    pub fn atoms(&self) -> usize {
        self.omega.nrows()
    }

    /// Feature dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.omega.ncols()
    }

    /// Length `s` of the structured representation.
    pub fn structure_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn classes(&self) -> usize {
        self.w.nrows()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let config = self.config.to_kv_string();
        let floats = self.omega.len() + self.q.len() + self.w.len();
        let mut out = Vec::with_capacity(28 + 8 * floats + config.len());
        out.extend_from_slice(MAGIC);
        for v in [
            VERSION,
            self.atoms() as u32,
            self.input_dim() as u32,
            self.structure_dim() as u32,
            self.classes() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for m in [&self.omega, &self.q, &self.w] {
            for row in m.row_iter() {
                for v in row.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected SADL".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let [atoms, m, s, c] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|v| v as usize);
        let mut read = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(rows, cols, &r.f64s(rows * cols)?))
        };
        let omega = read(atoms, m)?;
        let q = read(s, atoms)?;
        let w = read(c, s)?;
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
        let config = TrainConfig::from_kv_str(text)?;
        r.finish()?;
        Model::new(omega, q, w, config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
