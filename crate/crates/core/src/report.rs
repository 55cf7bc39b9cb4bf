//! Deterministic CSV and JSON report writers.
//!
//! CSV files carry a header row, use `.` as the decimal separator, and
//! print every real with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly — rerunning an experiment with the same seed
//! reproduces its CSV byte for byte. Wall-clock information is confined to
//! the JSON summary so it never perturbs the data files.

use serde_json::{json, Map, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Format a real with 17 significant digits; parses back to the same bits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streaming CSV writer with a fixed column count.
pub struct CsvFile {
    writer: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl CsvFile {
    /// Create (truncate) the file and write the header row.
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut writer = BufWriter::new(File::create(&path)?);
        writeln!(writer, "{}", header.join(","))?;
        Ok(CsvFile { writer, path, columns: header.len() })
    }

    /// Append one data row; fields must already be formatted.
    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns, "row width must match the header");
        writeln!(self.writer, "{}", fields.join(","))
    }

    /// Flush and return the file path for the summary's output list.
    pub fn finish(mut self) -> std::io::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// Builder for the JSON run summary: seed, package version, wall time,
/// resolved configuration echo, output files, and experiment-specific
/// fields.
pub struct Summary {
    started: Instant,
    fields: Map<String, Value>,
}

impl Summary {
    pub fn new(experiment: &str, seed: u64) -> Self {
        let mut fields = Map::new();
        fields.insert("experiment".into(), json!(experiment));
        fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        fields.insert("seed".into(), json!(seed));
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        fields.insert("started_unix_ms".into(), json!(stamp));
        Summary { started: Instant::now(), fields }
    }

    /// Attach an experiment-specific field.
    pub fn set(&mut self, key: &str, value: Value) -> &mut Self {
        self.fields.insert(key.to_string(), value);
        self
    }

    /// Backdate the start of the measured wall time, for summaries built
    /// after the work they describe.
    pub fn set_started(&mut self, at: Instant) {
        self.started = at;
    }

    /// Echo the fully resolved configuration for provenance.
    pub fn config_echo<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, String)>) {
        let mut map = Map::new();
        for (k, v) in entries {
            map.insert(k.to_string(), json!(v));
        }
        self.fields.insert("config".into(), Value::Object(map));
    }

    /// Record the produced data files.
    pub fn outputs(&mut self, paths: &[PathBuf]) {
        let list: Vec<Value> =
            paths.iter().map(|p| json!(p.display().to_string())).collect();
        self.fields.insert("outputs".into(), Value::Array(list));
    }

    /// Stamp the wall time and write the summary as pretty JSON.
    pub fn write(mut self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let elapsed = self.started.elapsed().as_secs_f64();
        self.fields.insert("wall_time_seconds".into(), json!(elapsed));
        let mut writer = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut writer, &Value::Object(self.fields))?;
        writeln!(writer)?;
        writer.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_exactly() {
        for x in [
            0.0,
            1.0 / 3.0,
            0.1,
            2.0f64.powi(-52),
            1.234567890123456e300,
            -9.0909090909090905e-3,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_real(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
            assert!(!s.contains(','), "decimal separator must be `.`");
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut csv = CsvFile::create(&path, &["replica", "value"]).unwrap();
        csv.row(&["0".into(), fmt_real(0.5)]).unwrap();
        csv.row(&["1".into(), fmt_real(1.0 / 3.0)]).unwrap();
        let written = csv.finish().unwrap();
        let text = std::fs::read_to_string(written).unwrap();
        assert_eq!(
            text,
            "replica,value\n0,5.0000000000000000e-1\n1,3.3333333333333331e-1\n"
        );
    }

    #[test]
    fn summary_carries_the_advertised_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let mut summary = Summary::new("demo", 7);
        summary.set("passed", json!(true));
        summary.config_echo([("replicas", "100".to_string())]);
        summary.outputs(&[PathBuf::from("demo.csv")]);
        summary.write(&path).unwrap();
        let parsed: Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed["experiment"], "demo");
        assert_eq!(parsed["seed"], 7);
        assert_eq!(parsed["passed"], true);
        assert_eq!(parsed["config"]["replicas"], "100");
        assert_eq!(parsed["outputs"][0], "demo.csv");
        assert!(parsed["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        assert!(parsed["started_unix_ms"].as_u64().unwrap() > 0);
        assert_eq!(parsed["version"], env!("CARGO_PKG_VERSION"));
    }
}
