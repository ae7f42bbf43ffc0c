//! Output helpers: atomic writes, CSV and JSON emission, and the Wigner pair dump format.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::wigner::{EnsembleSpec, WignerPair};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Seventeen significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Header line plus one line per row, comma separated.
pub struct Csv {
    out: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv { out, width: header.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.width);
        self.out.push_str(&fields.join(","));
        self.out.push('\n');
    }

    pub fn num_row(&mut self, values: &[f64]) {
        let f: Vec<String> = values.iter().map(|&v| fmt17(v)).collect();
        self.row(&f);
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn dump_matrix(out: &mut String, name: &str, m: &CMat) {
    out.push_str(name);
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{} {}", fmt17(m[(i, j)].re), fmt17(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Text dump: `key=value` header, then `U` and `V` as row-major `re im` pairs.
pub fn pair_to_text(pair: &WignerPair) -> String {
    let mut out = pair.spec.to_kv();
    dump_matrix(&mut out, "U", &pair.u);
    dump_matrix(&mut out, "V", &pair.v);
    out
}

pub fn pair_from_text(text: &str) -> Result<WignerPair> {
    let mut lines = text.lines();
    let mut header = String::new();
    for line in lines.by_ref() {
        if line.trim() == "U" {
            break;
        }
        header.push_str(line);
        header.push('\n');
    }
    let spec = EnsembleSpec::from_kv(&header)?;
    let n = spec.n;
    let read = |lines: &mut std::str::Lines<'_>| -> Result<CMat> {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| Error::Invalid(format!("missing matrix row {i}")))?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Invalid(format!("row {i}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 2 * n {
                return Err(Error::Invalid(format!("row {i}: expected {} numbers, got {}", 2 * n, vals.len())));
            }
            for j in 0..n {
                m[(i, j)] = c(vals[2 * j], vals[2 * j + 1]);
            }
        }
        Ok(m)
    };
    let u = read(&mut lines)?;
    match lines.next().map(str::trim) {
        Some("V") => {}
        other => return Err(Error::Invalid(format!("expected 'V' marker, got {other:?}"))),
    }
    let v = read(&mut lines)?;
    WignerPair::from_matrices(u, v, spec)
}
