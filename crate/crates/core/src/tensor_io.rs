//! Embedding matrices, paired embeddings, and their on-disk formats.
//!
//! Two embedding formats are supported:
//!
//! * `EMB1`: the magic bytes `EMB1`, then `u32` LE row count, `u32` LE column
//!   count, then `rows * cols` little-endian `f32` values in row-major order.
//!   Nothing follows the payload.
//! * TSV: one row per line, columns separated by a single TAB. A trailing
//!   empty line is allowed.
//!
//! Values are held as `f64` in memory. Every `f32` is exactly representable
//! as `f64`, so a load/save cycle of an `EMB1` file is byte-exact.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::bandwidth::Permutation;
use crate::error::{Error, Result};
use crate::reduce::dot;

pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";
const EMB1_HEADER_LEN: usize = 12;

/// Row norms below this are rejected by [`EmbeddingMatrix::normalize_rows`].
pub const MIN_ROW_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Emb1,
    Tsv,
}

impl EmbeddingFormat {
    /// Picks TSV for `.tsv`/`.txt` extensions and `EMB1` for everything else.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => EmbeddingFormat::Tsv,
            _ => EmbeddingFormat::Emb1,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "emb1" => Ok(EmbeddingFormat::Emb1),
            "tsv" => Ok(EmbeddingFormat::Tsv),
            other => Err(Error::Parameter(format!(
                "unknown embedding format {other:?}"
            ))),
        }
    }
}

/// Dense row-major `rows x cols` matrix of finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Data(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Capacity(format!("{rows}x{cols} overflows usize")))?;
        if data.len() != len {
            return Err(Error::Data(format!(
                "expected {len} values for a {rows}x{cols} matrix, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at row {}, column {}",
                data[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(EmbeddingMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Data(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        let r = self.row(i);
        dot(r, r).sqrt()
    }

    /// Scales every row to unit Euclidean norm.
    pub fn normalize_rows(&self) -> Result<Self> {
        let degenerate: Vec<usize> = (0..self.rows)
            .filter(|&i| {
                let norm = self.row_norm(i);
                norm.is_nan() || norm < MIN_ROW_NORM
            })
            .collect();
        if !degenerate.is_empty() {
            return Err(Error::DegenerateRow { rows: degenerate });
        }
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            let norm = self.row_norm(i);
            data.extend(self.row(i).iter().map(|v| v / norm));
        }
        Ok(EmbeddingMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Returns a copy whose row `t` is row `perm.order()[t]` of `self`.
    pub fn permute_rows(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.rows {
            return Err(Error::Parameter(format!(
                "permutation of length {} applied to {} rows",
                perm.len(),
                self.rows
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &src in perm.order() {
            data.extend_from_slice(self.row(src));
        }
        Ok(EmbeddingMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn to_emb1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(EMB1_HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&EMB1_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_emb1_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < EMB1_HEADER_LEN {
            return Err(Error::Format(format!(
                "EMB1 header needs {EMB1_HEADER_LEN} bytes, file has {}",
                bytes.len()
            )));
        }
        if bytes[..4] != EMB1_MAGIC {
            return Err(Error::Format(format!("bad magic {:02X?}", &bytes[..4])));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Format(format!("empty shape {rows}x{cols}")));
        }
        let payload_len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .filter(|&n| n <= isize::MAX as usize)
            .ok_or_else(|| Error::Capacity(format!("{rows}x{cols} exceeds addressable size")))?;
        let payload = &bytes[EMB1_HEADER_LEN..];
        if payload.len() != payload_len {
            return Err(Error::Format(format!(
                "{rows}x{cols} header expects {payload_len} payload bytes, found {}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn from_tsv_str(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        let mut cols = None;
        let mut data = Vec::new();
        for (lineno, line) in lines.iter().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let mut n = 0;
            for field in line.split('\t') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Format(format!("line {}: cannot parse {field:?}", lineno + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "line {}: non-finite value",
                        lineno + 1
                    )));
                }
                data.push(v);
                n += 1;
            }
            match cols {
                None => cols = Some(n),
                Some(c) if c != n => {
                    return Err(Error::Format(format!(
                        "line {}: {n} columns, expected {c}",
                        lineno + 1
                    )))
                }
                _ => {}
            }
        }
        let cols = cols.ok_or_else(|| Error::Format("empty TSV input".into()))?;
        Self::new(lines.len(), cols, data)
    }

    pub fn to_tsv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Row-aligned `(X, Y)`: row `i` of `x` and row `i` of `y` form a positive pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPair {
    x: EmbeddingMatrix,
    y: EmbeddingMatrix,
}

impl EmbeddingPair {
    pub fn new(x: EmbeddingMatrix, y: EmbeddingMatrix) -> Result<Self> {
        if x.rows != y.rows || x.cols != y.cols {
            return Err(Error::Data(format!(
                "X is {}x{} but Y is {}x{}",
                x.rows, x.cols, y.rows, y.cols
            )));
        }
        Ok(EmbeddingPair { x, y })
    }

    pub fn x(&self) -> &EmbeddingMatrix {
        &self.x
    }

    pub fn y(&self) -> &EmbeddingMatrix {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.rows
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols
    }

    /// `x_i . y_j`
    #[inline]
    pub fn score(&self, i: usize, j: usize) -> f64 {
        dot(self.x.row(i), self.y.row(j))
    }

    pub fn normalized(&self) -> Result<Self> {
        Ok(EmbeddingPair {
            x: self.x.normalize_rows()?,
            y: self.y.normalize_rows()?,
        })
    }

    /// Dense `N x N` matrix of `x_i . y_j`. Only meant for small `N`.
    pub fn score_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.score(i, j)).collect())
            .collect()
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    match format {
        EmbeddingFormat::Emb1 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            EmbeddingMatrix::from_emb1_bytes(&bytes)
        }
        EmbeddingFormat::Tsv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            EmbeddingMatrix::from_tsv_str(&text)
        }
    }
}

pub fn save_embeddings(
    m: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        EmbeddingFormat::Emb1 => m.to_emb1_bytes(),
        EmbeddingFormat::Tsv => m.to_tsv_string().into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn permutation_to_string(p: &Permutation) -> String {
    let mut out = String::with_capacity(p.len() * 6);
    for idx in p.order() {
        out.push_str(&idx.to_string());
        out.push('\n');
    }
    out
}

pub fn permutation_from_str(text: &str) -> Result<Permutation> {
    let mut order = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| {
            Error::Permutation(format!("line {}: not an index: {line:?}", lineno + 1))
        })?;
        order.push(idx);
    }
    Permutation::new(order)
}

pub fn save_permutation(p: &Permutation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(permutation_to_string(p).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_permutation(path: impl AsRef<Path>) -> Result<Permutation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    permutation_from_str(&text)
}
