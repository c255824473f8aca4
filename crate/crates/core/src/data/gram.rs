use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Features, Row};
use crate::error::{Error, Result};

/// A dense row-major kernel matrix between `rows` query points and `cols`
/// reference points.
#[derive(Clone, Debug, PartialEq)]
pub struct Gram {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Gram {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} Gram matrix",
                values.len()
            )));
        }
        Ok(Gram { rows, cols, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Sub-matrix with the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Gram {
        let values = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        Gram {
            rows: rows.len(),
            cols: cols.len(),
            values,
        }
    }
}

fn sq_dist(a: &Row, b: &Row, na: f64, nb: f64) -> f64 {
    match (a, b) {
        (Row::Dense(x), Row::Dense(y)) => x.iter().zip(*y).map(|(p, q)| (p - q) * (p - q)).sum(),
        _ => (na + nb - 2.0 * a.dot(b)).max(0.0),
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!(
            "RBF parameter {theta} must be positive"
        )));
    }
    Ok(())
}

/// `K_ij = exp(−θ‖x_i − x_j‖²)` over the rows of `x`.
pub fn rbf_gram(x: &Features, theta: f64) -> Result<Gram> {
    check_theta(theta)?;
    let n = x.n();
    let norms: Vec<f64> = (0..n).map(|i| x.row(i).sq_norm()).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in 0..i {
            let k = (-theta * sq_dist(&x.row(i), &x.row(j), norms[i], norms[j])).exp();
            values[i * n + j] = k;
            values[j * n + i] = k;
        }
    }
    Ok(Gram {
        rows: n,
        cols: n,
        values,
    })
}

/// RBF kernel between query rows `q` and reference rows `x`.
pub fn rbf_cross_gram(q: &Features, x: &Features, theta: f64) -> Result<Gram> {
    check_theta(theta)?;
    let nx: Vec<f64> = (0..x.n()).map(|j| x.row(j).sq_norm()).collect();
    let mut values = Vec::with_capacity(q.n() * x.n());
    for i in 0..q.n() {
        let r = q.row(i);
        let nr = r.sq_norm();
        for (j, &nj) in nx.iter().enumerate() {
            values.push((-theta * sq_dist(&r, &x.row(j), nr, nj)).exp());
        }
    }
    Ok(Gram {
        rows: q.n(),
        cols: x.n(),
        values,
    })
}

/// `K_ij = ⟨x_i, x_j⟩`.
pub fn linear_gram(x: &Features) -> Gram {
    let n = x.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = x.row(i).dot(&x.row(j));
            values[i * n + j] = k;
            values[j * n + i] = k;
        }
    }
    Gram {
        rows: n,
        cols: n,
        values,
    }
}

pub fn linear_cross_gram(q: &Features, x: &Features) -> Gram {
    let values = (0..q.n())
        .flat_map(|i| (0..x.n()).map(move |j| q.row(i).dot(&x.row(j))))
        .collect();
    Gram {
        rows: q.n(),
        cols: x.n(),
        values,
    }
}

/// Contents of the text sidecar that accompanies a raw Gram payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GramMeta {
    pub rows: usize,
    pub cols: usize,
    /// Lowercase hex SHA-256 of the payload.
    pub sha256: String,
}

pub fn gram_checksum(payload: &[u8]) -> String {
    Sha256::digest(payload)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parses `rows N`, `cols M` and `sha256 HEX` lines, in any order.
pub fn parse_gram_sidecar(text: &str) -> Result<GramMeta> {
    let (mut rows, mut cols, mut sha) = (None, None, None);
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(no + 1, format!("expected 'key value', got '{line}'")))?;
        let val = val.trim();
        let num = || {
            val.parse::<usize>()
                .map_err(|_| Error::parse(no + 1, format!("bad count '{val}'")))
        };
        let slot = match key {
            "rows" => {
                rows = Some(num()?);
                continue;
            }
            "cols" => {
                cols = Some(num()?);
                continue;
            }
            "sha256" => &mut sha,
            _ => return Err(Error::parse(no + 1, format!("unknown key '{key}'"))),
        };
        if val.len() != 64 || !val.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::parse(no + 1, "sha256 must be 64 hex digits"));
        }
        *slot = Some(val.to_ascii_lowercase());
    }
    match (rows, cols, sha) {
        (Some(rows), Some(cols), Some(sha256)) => Ok(GramMeta { rows, cols, sha256 }),
        _ => Err(Error::Format(
            "Gram sidecar needs rows, cols and sha256".into(),
        )),
    }
}

/// Decodes a little-endian row-major payload, checking size and checksum.
pub fn decode_gram(payload: &[u8], meta: &GramMeta) -> Result<Gram> {
    let expect = meta
        .rows
        .checked_mul(meta.cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("Gram dimensions overflow".into()))?;
    if payload.len() != expect {
        return Err(Error::Format(format!(
            "Gram payload has {} bytes, expected {expect}",
            payload.len()
        )));
    }
    if gram_checksum(payload) != meta.sha256 {
        return Err(Error::Format("Gram payload checksum mismatch".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite Gram entry".into()));
    }
    Gram::new(meta.rows, meta.cols, values)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Reads `path` and its `path.meta` sidecar.
pub fn read_gram(path: impl AsRef<Path>) -> Result<Gram> {
    let path = path.as_ref();
    let meta = parse_gram_sidecar(&fs::read_to_string(sidecar_path(path))?)?;
    decode_gram(&fs::read(path)?, &meta)
}

/// Writes the payload to `path` and the sidecar to `path.meta`.
pub fn write_gram(path: impl AsRef<Path>, gram: &Gram) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = gram.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let meta = format!(
        "rows {}\ncols {}\nsha256 {}\n",
        gram.rows,
        gram.cols,
        gram_checksum(&payload)
    );
    fs::write(path, &payload)?;
    fs::write(sidecar_path(path), meta)?;
    Ok(())
}
