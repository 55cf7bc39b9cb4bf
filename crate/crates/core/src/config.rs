//! Flat key=value configuration files for experiments and graph
//! descriptions.
//!
//! The format is one `key = value` pair per line; blank lines and lines
//! starting with `#` are skipped. Keys are consumed by typed getters, and
//! [`KeyValueFile::finish`] rejects anything left over, so misspelled or
//! out-of-place keys fail loudly instead of being silently ignored. Values
//! given on the command line take precedence over file values; the
//! resolved set is echoed into the run's JSON summary.
//!
//! A graph file uses the same syntax with three fixed keys:
//!
//! ```text
//! # four sites in a row, reservoirs at the ends
//! vertices = 5
//! edges = 0-1, 1-2, 2-3, 3-4
//! boundary = 0:1.0, 4:2.0
//! ```
//!
//! `vertices` is the vertex count (ids `0..vertices`), `edges` lists
//! unordered pairs, and `boundary` lists `vertex:temperature` entries;
//! every vertex not listed there is interior.

use crate::graph::{build_graph, Graph, GraphError, Vertex};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: expected `key = value`")]
    MalformedLine(usize),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("unknown key(s): {0}")]
    UnknownKeys(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value `{value}` for {what}: {reason}")]
    BadValue { what: String, value: String, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn bad_value(what: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        what: what.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

/// A parsed key=value file that tracks which keys have been consumed.
#[derive(Debug, Clone)]
pub struct KeyValueFile {
    entries: Vec<(String, String, bool)>,
}

impl KeyValueFile {
    /// Parse from text; rejects malformed lines and duplicate keys.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(String, String, bool)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine(idx + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::MalformedLine(idx + 1));
            }
            if entries.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError::DuplicateKey(key));
            }
            entries.push((key, value, false));
        }
        Ok(KeyValueFile { entries })
    }

    /// Parse the file at `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// An empty file, for runs configured purely by flags.
    pub fn empty() -> Self {
        KeyValueFile { entries: Vec::new() }
    }

    /// Fetch and consume a key; `None` when absent.
    pub fn get(&mut self, key: &str) -> Option<String> {
        self.entries.iter_mut().find(|(k, _, _)| k == key).map(|(_, v, used)| {
            *used = true;
            v.clone()
        })
    }

    /// Fetch and parse a key with the given parser, passing absence through.
    pub fn get_with<T>(
        &mut self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, ConfigError>,
    ) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            Some(v) => parse(&v).map(Some),
            None => Ok(None),
        }
    }

    pub fn get_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get_with(key, |v| {
            v.parse::<usize>().map_err(|e| bad_value(key, v, &e.to_string()))
        })
    }

    pub fn get_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get_with(key, |v| {
            v.parse::<f64>()
                .map_err(|e| bad_value(key, v, &e.to_string()))
                .and_then(|x| {
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(bad_value(key, v, "must be finite"))
                    }
                })
        })
    }

    /// Every key/value pair, in file order, for provenance echoes.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v, _)| (k.as_str(), v.as_str()))
    }

    /// Error out if any key was never consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let leftover: Vec<&str> =
            self.entries.iter().filter(|(_, _, used)| !used).map(|(k, _, _)| k.as_str()).collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(leftover.join(", ")))
        }
    }
}

/// Parse a seed given in decimal or `0x` hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64, ConfigError> {
    let t = text.trim();
    let parsed = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        t.parse::<u64>()
    };
    parsed.map_err(|e| bad_value("seed", text, &e.to_string()))
}

/// Parse a `T_-,T_+` temperature pair.
pub fn parse_temps(text: &str) -> Result<(f64, f64), ConfigError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(bad_value("temps", text, "expected two comma-separated values"));
    }
    let mut out = [0.0f64; 2];
    for (slot, part) in out.iter_mut().zip(&parts) {
        let v: f64 =
            part.parse().map_err(|e: std::num::ParseFloatError| {
                bad_value("temps", text, &e.to_string())
            })?;
        if !v.is_finite() || v < 0.0 {
            return Err(bad_value("temps", text, "temperatures must be finite and nonnegative"));
        }
        *slot = v;
    }
    Ok((out[0], out[1]))
}

/// Parse a comma-separated list of 1-based integers (an edge permutation).
pub fn parse_permutation(text: &str) -> Result<Vec<usize>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .map(|p| p.parse::<usize>().map_err(|e| bad_value("perm", p, &e.to_string())))
        .collect()
}

/// Parse a comma-separated list of reals (sample times, horizons).
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| bad_value("list", p, &e.to_string()))
                .and_then(|x| {
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(bad_value("list", p, "must be finite"))
                    }
                })
        })
        .collect()
}

/// Parse a comma-separated list of nonnegative integers (lattice sizes).
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .map(|p| p.parse::<usize>().map_err(|e| bad_value("list", p, &e.to_string())))
        .collect()
}

/// Parse a particle placement `vertex:count,vertex:count`; a bare vertex
/// means one particle there.
pub fn parse_particles(text: &str) -> Result<Vec<(usize, u64)>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (v, k) = match p.split_once(':') {
                Some((v, k)) => (v.trim(), Some(k.trim())),
                None => (p, None),
            };
            let vertex = v
                .parse::<usize>()
                .map_err(|e| bad_value("particles", p, &e.to_string()))?;
            let count = match k {
                Some(k) => k
                    .parse::<u64>()
                    .map_err(|e| bad_value("particles", p, &e.to_string()))?,
                None => 1,
            };
            Ok((vertex, count))
        })
        .collect()
}

/// Build a graph from the key=value description format.
pub fn graph_from_text(text: &str) -> Result<Graph, ConfigError> {
    let mut kv = KeyValueFile::parse(text)?;
    let n = kv
        .get_usize("vertices")?
        .ok_or_else(|| ConfigError::MissingKey("vertices".into()))?;
    let edge_text = kv.get("edges").ok_or_else(|| ConfigError::MissingKey("edges".into()))?;
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    for part in edge_text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once('-')
            .ok_or_else(|| bad_value("edges", part, "expected `i-j`"))?;
        let i = a.trim().parse().map_err(|e: std::num::ParseIntError| {
            bad_value("edges", part, &e.to_string())
        })?;
        let j = b.trim().parse().map_err(|e: std::num::ParseIntError| {
            bad_value("edges", part, &e.to_string())
        })?;
        edges.push((i, j));
    }
    let boundary_text =
        kv.get("boundary").ok_or_else(|| ConfigError::MissingKey("boundary".into()))?;
    let mut temps: Vec<(Vertex, f64)> = Vec::new();
    for part in boundary_text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (v, t) = part
            .split_once(':')
            .ok_or_else(|| bad_value("boundary", part, "expected `vertex:temperature`"))?;
        let vertex = v.trim().parse().map_err(|e: std::num::ParseIntError| {
            bad_value("boundary", part, &e.to_string())
        })?;
        let temp = t.trim().parse().map_err(|e: std::num::ParseFloatError| {
            bad_value("boundary", part, &e.to_string())
        })?;
        temps.push((vertex, temp));
    }
    kv.finish()?;
    let interior: Vec<Vertex> =
        (0..n).filter(|v| !temps.iter().any(|(b, _)| b == v)).collect();
    Ok(build_graph(n, &interior, &edges, &temps)?)
}

/// Build a graph from a description file at `path`.
pub fn graph_from_file(path: impl AsRef<Path>) -> Result<Graph, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    graph_from_text(&text)
}
