//! Plain-text configuration and CSV layouts.
//!
//! Every CSV starts with a block of `# key = value` comment lines holding
//! the library version and the fully resolved configuration, followed by
//! one header row. Floats are printed with 17 significant digits.
//!
//! Kernel tensors use the columns `v,w,a,b,value` (index order v, v+, v',
//! v+'), list nonzero entries only, and carry `n_states` and `symmetrized`
//! in the comment block.

use crate::boltzmann::CollisionKernel;
use crate::error::{Error, Result};
use crate::kac::JumpEvent;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Ordered key=value configuration. Blank lines and `#` comments are
/// ignored; later assignments override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            c.set_assignment(line).map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` string.
    pub fn set_assignment(&mut self, s: &str) -> Result<()> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {s:?}")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse(format!("empty key in {s:?}")));
        }
        self.set(k, v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.map.insert(key.to_string(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("cannot parse {key} = {v:?}"))),
        }
    }

    /// Reads `key`, or records `default` so it shows up in output headers.
    pub fn get_or<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.set(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Parse(format!("missing required key {key}")))
    }

    /// Comma-separated floats.
    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_floats(key, v)).transpose()
    }

    /// Rows separated by `;`, entries by `,`.
    pub fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.raw(key)
            .map(|v| v.split(';').filter(|r| !r.trim().is_empty()).map(|r| parse_floats(key, r)).collect())
            .transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    /// `# key = value` lines, version first.
    pub fn header(&self, command: &str) -> String {
        let mut s = format!("# nonrev-kinetic {VERSION}\n# command = {command}\n");
        for (k, v) in &self.map {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }
}

fn parse_floats(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?} in {key}"))))
        .collect()
}

/// Writes a CSV of float rows.
pub fn write_csv(path: &Path, header: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = String::from(header);
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Comment-block entries of a CSV, and its data rows as strings.
pub fn read_csv(path: &Path) -> Result<(BTreeMap<String, String>, Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut meta = BTreeMap::new();
    let mut columns = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if line.trim().is_empty() {
            continue;
        } else if columns.is_none() {
            columns = Some(line.split(',').map(|s| s.trim().to_string()).collect());
        } else {
            rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
        }
    }
    Ok((meta, columns.unwrap_or_default(), rows))
}

pub fn write_kernel_csv(path: &Path, b: &CollisionKernel, symmetrized: bool, header: &str) -> Result<()> {
    let n = b.n_states();
    let mut s = format!("{header}# n_states = {n}\n# symmetrized = {symmetrized}\nv,w,a,b,value\n");
    for v in 0..n {
        for w in 0..n {
            let out = b.outgoing(v, w);
            for (ab, x) in out.iter().enumerate() {
                if *x != 0.0 {
                    let _ = writeln!(s, "{v},{w},{},{},{}", ab / n, ab % n, fmt_f64(*x));
                }
            }
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads a kernel tensor; returns it with its recorded symmetrization flag.
pub fn read_kernel_csv(path: &Path) -> Result<(CollisionKernel, bool)> {
    let (meta, cols, rows) = read_csv(path)?;
    let n: usize = meta
        .get("n_states")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: missing n_states", path.display())))?;
    let symmetrized = meta.get("symmetrized").map(|v| v == "true").unwrap_or(false);
    if cols != ["v", "w", "a", "b", "value"] {
        return Err(Error::Parse(format!("{}: expected columns v,w,a,b,value", path.display())));
    }
    let mut t = vec![0.0; n * n * n * n];
    for (i, r) in rows.iter().enumerate() {
        let bad = || Error::Parse(format!("{}: bad row {}", path.display(), i + 1));
        if r.len() != 5 {
            return Err(bad());
        }
        let mut idx = [0usize; 4];
        for k in 0..4 {
            idx[k] = r[k].parse().map_err(|_| bad())?;
            if idx[k] >= n {
                return Err(bad());
            }
        }
        let x: f64 = r[4].parse().map_err(|_| bad())?;
        t[((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]] = x;
    }
    Ok((CollisionKernel::dense(n, t)?, symmetrized))
}

pub fn write_events_csv(path: &Path, header: &str, events: &[JumpEvent]) -> Result<()> {
    let mut s = format!("{header}time,i,j,pre_i,pre_j,post_i,post_j\n");
    for e in events {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", fmt_f64(e.time), e.i, e.j, e.pre.0, e.pre.1, e.post.0, e.post.1);
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value).expect("json value") + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let mut c = Config::parse("# comment\nmodel = kuramoto-b\nM=32 # trailing\n\nrates = 0,1; 3,0\n").unwrap();
        assert_eq!(c.raw("model"), Some("kuramoto-b"));
        assert_eq!(c.require::<usize>("M").unwrap(), 32);
        assert_eq!(c.matrix("rates").unwrap().unwrap(), vec![vec![0.0, 1.0], vec![3.0, 0.0]]);
        assert!(c.get::<usize>("model").is_err());
        assert_eq!(c.get_or("T", 2.5).unwrap(), 2.5);
        assert!(c.header("x").contains("# T = 2.5"));
        assert!(Config::parse("novalue\n").is_err());
        c.set_assignment("M=64").unwrap();
        assert_eq!(c.require::<usize>("M").unwrap(), 64);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, std::f64::consts::PI] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn kernel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        let b = CollisionKernel::dense(2, (0..16).map(|i| 0.1 + i as f64 / 7.0).collect()).unwrap();
        write_kernel_csv(&p, &b, true, "# test\n").unwrap();
        let (c, sym) = read_kernel_csv(&p).unwrap();
        assert!(sym);
        assert_eq!(b.tensor().unwrap(), c.tensor().unwrap());
    }
}
