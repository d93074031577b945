//! Eigencache files.
//!
//! ```text
//! graphseg-eigs v1 <N_D> <N_e> <method>
//! λ_0,λ_1,...,λ_{N_e-1}
//! x_00,x_01,...            (N_D rows of X, row-major)
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{SpectralBasis, SpectralMethod};
use crate::error::{Error, Result};
use crate::graph::hex;

fn join(values: impl Iterator<Item = f64>) -> String {
    values
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_eigs(basis: &SpectralBasis, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let x = basis.eigenvectors();
    let mut write = || -> std::io::Result<()> {
        writeln!(
            out,
            "graphseg-eigs v1 {} {} {}",
            basis.n_vertices(),
            basis.n_e(),
            basis.method().token()
        )?;
        writeln!(out, "{}", join(basis.eigenvalues().iter().copied()))?;
        for i in 0..x.nrows() {
            writeln!(out, "{}", join(x.row(i).iter().copied()))?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_eigs(path: &Path) -> Result<SpectralBasis> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut next_line = |lineno: usize| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| err(lineno, "unexpected end of file".into()))?
            .map_err(|e| Error::io(path, e))
    };

    let header = next_line(1)?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "graphseg-eigs" || h[1] != "v1" {
        return Err(err(1, format!("bad header {header:?}")));
    }
    let n: usize = h[2].parse().map_err(|_| err(1, "bad N_D".into()))?;
    let n_e: usize = h[3].parse().map_err(|_| err(1, "bad N_e".into()))?;
    let method = SpectralMethod::parse(h[4]).ok_or_else(|| err(1, format!("unknown method {:?}", h[4])))?;

    let parse_row = |text: &str, lineno: usize| -> Result<Vec<f64>> {
        let row: Result<Vec<f64>> = text
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| err(lineno, format!("bad number {c:?}"))))
            .collect();
        let row = row?;
        if row.len() != n_e {
            return Err(err(lineno, format!("expected {n_e} values, got {}", row.len())));
        }
        Ok(row)
    };
    let eigenvalues = parse_row(&next_line(2)?, 2)?;
    let mut data = Vec::with_capacity(n * n_e);
    for i in 0..n {
        data.extend(parse_row(&next_line(i + 3)?, i + 3)?);
    }
    let x = DMatrix::from_row_slice(n, n_e, &data);
    SpectralBasis::new(eigenvalues, x, method).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Directory of eigencache files keyed by a content hash of the operator
/// inputs and the solver parameters.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(SpectrumCache { dir })
    }

    pub fn key(input_hash: &str, n_e: usize, tol: f64, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(input_hash.as_bytes());
        h.update((n_e as u64).to_le_bytes());
        h.update(tol.to_bits().to_le_bytes());
        h.update(seed.to_le_bytes());
        hex(&h.finalize())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.eigs"))
    }

    pub fn get(&self, key: &str) -> Result<Option<SpectralBasis>> {
        let p = self.path_for(key);
        if !p.exists() {
            return Ok(None);
        }
        info!("spectrum cache hit: {}", p.display());
        read_eigs(&p).map(Some)
    }

    pub fn put(&self, key: &str, basis: &SpectralBasis) -> Result<PathBuf> {
        let p = self.path_for(key);
        let tmp = p.with_extension("eigs.tmp");
        write_eigs(basis, &tmp)?;
        fs::rename(&tmp, &p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Returns the cached basis for `key`, computing and storing it on a miss.
    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<SpectralBasis>,
    ) -> Result<SpectralBasis> {
        if let Some(b) = self.get(key)? {
            return Ok(b);
        }
        let b = compute()?;
        self.put(key, &b)?;
        Ok(b)
    }
}
