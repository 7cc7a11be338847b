//! Data files and run manifests.
//!
//! A data file is CSV with a block of `# key: value` comment lines in front
//! of the `scan_value,p_d,std_err,shots` table. Floats are written in their
//! shortest round-trip form, so identical results give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pulse::{Observable, ScanAxis, ScanPoint, ScanResult};

pub const FORMAT: &str = "ionsim-scan-v1";
pub const COLUMNS: [&str; 4] = ["scan_value", "p_d", "std_err", "shots"];

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    /// Header entries other than `format`, `axis`, `unit` and `observable`.
    pub metadata: BTreeMap<String, String>,
    pub result: ScanResult,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialises a scan with its metadata header.
pub fn format_scan(result: &ScanResult, metadata: &BTreeMap<String, String>) -> Result<String> {
    let mut out = Vec::new();
    writeln!(out, "# format: {FORMAT}")?;
    writeln!(out, "# axis: {}", result.axis.name())?;
    writeln!(out, "# unit: {}", result.axis.unit())?;
    writeln!(out, "# observable: {}", result.observable.name())?;
    for (k, v) in metadata {
        if k.contains(':') || k.contains('\n') || v.contains('\n') {
            return Err(Error::Data(format!("metadata entry '{k}' cannot be written to a header")));
        }
        writeln!(out, "# {k}: {v}")?;
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(COLUMNS).map_err(csv_err)?;
        for p in &result.points {
            w.write_record([
                p.scan_value.to_string(),
                p.p_d.to_string(),
                p.std_err.to_string(),
                p.shots.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Data(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

pub fn write_scan(path: &Path, result: &ScanResult, metadata: &BTreeMap<String, String>) -> Result<()> {
    std::fs::write(path, format_scan(result, metadata)?)?;
    Ok(())
}

/// Parses a data file. Files without `axis`/`observable` header lines are
/// read as repeat scans of a dark probability.
pub fn parse_scan(text: &str) -> Result<DataFile> {
    let mut metadata = BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.trim_start().strip_prefix('#') else { continue };
        if let Some((k, v)) = rest.split_once(':') {
            metadata.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let axis = match metadata.remove("axis") {
        Some(a) => ScanAxis::from_name(&a).ok_or_else(|| Error::Data(format!("unknown scan axis '{a}'")))?,
        None => ScanAxis::Repeat,
    };
    let observable = match metadata.remove("observable") {
        Some(o) => Observable::from_name(&o).ok_or_else(|| Error::Data(format!("unknown observable '{o}'")))?,
        None => Observable::DarkProbability,
    };
    if let Some(f) = metadata.remove("format") {
        if f != FORMAT {
            return Err(Error::Data(format!("unsupported format '{f}'")));
        }
    }
    metadata.remove("unit");

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != COLUMNS {
        return Err(Error::Data(format!("expected columns {}, found {}", COLUMNS.join(","), cols.join(","))));
    }
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| Error::Data(format!("row {}: '{}' is not a number", i + 1, &rec[j])))
        };
        let shots = rec[3].parse::<usize>().map_err(|_| Error::Data(format!("row {}: bad shot count '{}'", i + 1, &rec[3])))?;
        points.push(ScanPoint { scan_value: num(0)?, p_d: num(1)?, std_err: num(2)?, shots });
    }
    if points.is_empty() {
        return Err(Error::Data("the data file has no rows".into()));
    }
    Ok(DataFile { metadata, result: ScanResult { axis, observable, points } })
}

pub fn read_scan(path: &Path) -> Result<DataFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_scan(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Command that produced the outputs, e.g. `figure fig5`.
    pub command: String,
    pub seed: u64,
    pub shots: Option<usize>,
    pub config_sha256: String,
    /// The full configuration as TOML.
    pub config: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    pub files: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, seed: u64, shots: Option<usize>, config_toml: &str) -> Self {
        Self {
            tool: "ionsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            shots,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config: config_toml.to_string(),
            sequence_sha256: None,
            sequence: None,
            files: Vec::new(),
        }
    }

    pub fn with_sequence(mut self, source: &str) -> Self {
        self.sequence_sha256 = Some(sha256_hex(source.as_bytes()));
        self.sequence = Some(source.to_string());
        self
    }

    pub fn add_file(&mut self, name: &str, contents: &[u8]) {
        self.files.push(FileDigest { path: name.to_string(), sha256: sha256_hex(contents) });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}
