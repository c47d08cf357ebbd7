use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const ARTIFACT: &str = "pulsed-qfi";

/// Provenance carried by every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    /// Subcommand options that are not part of the config.
    pub options: serde_json::Value,
}

impl Header {
    pub fn new(command: &str, config: &RunConfig, options: serde_json::Value) -> Self {
        Header {
            artifact: ARTIFACT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            options,
        }
    }
}

/// 17 significant digits; `nan` for undefined values.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn optional(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), float)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

/// Writes `# <header json>`, the column line, then the rows.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &Header,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf> {
    let (path, mut out) = create(dir, name)?;
    writeln!(out, "# {}", serde_json::to_string(header)?)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(columns)?;
    for row in rows {
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(path)
}

/// A JSON report with the header under `"header"`.
pub fn write_json(dir: &Path, name: &str, header: &Header, body: &impl Serialize) -> Result<PathBuf> {
    let (path, mut out) = create(dir, name)?;
    let doc = serde_json::json!({ "header": header, "result": body });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(path)
}

/// Header of a CSV written by [`write_csv`].
pub fn read_header(text: &str) -> Result<Header> {
    let first = text.lines().next().context("empty file")?;
    let json = first.strip_prefix("# ").context("missing `# {json}` header line")?;
    serde_json::from_str(json).context("malformed header")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
        assert_eq!(optional(None), "nan");
    }

    #[test]
    fn csv_header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { k: 4.0, ..RunConfig::default() };
        let header = Header::new("evolve", &config, serde_json::json!({"x": 1}));
        let rows = vec![vec![float(1.0), float(2.0)]];
        let path = write_csv(dir.path(), "t.csv", &header, &["a", "b"], rows).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(read_header(&text).unwrap(), header);
        assert_eq!(text.lines().nth(1), Some("a,b"));
        assert_eq!(text.lines().nth(2), Some("1.0000000000000000e0,2.0000000000000000e0"));
    }
}
