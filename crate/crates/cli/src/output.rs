//! Manifest hashing and deterministic CSV/JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 ≤ |v| < 1e12`.
pub fn fmt_g(v: f64) -> String {
    const PREC: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PREC {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (PREC - 1 - exp) as usize, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Hex SHA-256 of the compact JSON encoding of `config`.
pub fn manifest_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).context("serializing the run configuration")?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory plus the hash stamped into every file written there.
pub struct Sink {
    dir: PathBuf,
    hash: String,
}

impl Sink {
    pub fn new(dir: &Path, hash: String) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Pretty JSON with a top-level `manifest_hash` key.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<Value> {
        let mut v = serde_json::to_value(value).context("serializing report")?;
        if let Value::Object(map) = &mut v {
            map.insert("manifest_hash".into(), Value::String(self.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&v).context("serializing report")?;
        text.push('\n');
        self.write(name, &text)?;
        Ok(v)
    }

    /// A `# manifest_hash=…` line, the header, then one line per row.
    /// `None` cells are left empty.
    pub fn csv(
        &self,
        name: &str,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<Option<f64>>>,
    ) -> Result<()> {
        let mut text = format!("# manifest_hash={}\n{}\n", self.hash, header.join(","));
        for row in rows {
            let cells: Vec<String> = row
                .into_iter()
                .map(|c| c.map(fmt_g).unwrap_or_default())
                .collect();
            let _ = writeln!(text, "{}", cells.join(","));
        }
        self.write(name, &text)?;
        Ok(())
    }

    /// The manifest itself: the resolved config plus its hash.
    pub fn manifest<T: Serialize>(&self, config: &T) -> Result<()> {
        self.json("manifest.json", config).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (2.5, "2.5"),
            (-0.5, "-0.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-4, "0.0001"),
            (1.5e-5, "1.5e-05"),
            (0.909090909090909, "0.909090909091"),
            (1e100, "1e+100"),
            (999999999999.5, "1e+12"),
            (0.0, "0"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_g(v), want, "{v}");
        }
        assert_eq!(fmt_g(f64::NAN), "nan");
        assert_eq!(fmt_g(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn hash_is_stable() {
        let a = manifest_hash(&serde_json::json!({"seed": 0})).unwrap();
        assert_eq!(a, manifest_hash(&serde_json::json!({"seed": 0})).unwrap());
        assert_ne!(a, manifest_hash(&serde_json::json!({"seed": 1})).unwrap());
        assert_eq!(a.len(), 64);
    }
}
