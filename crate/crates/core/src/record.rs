//! Multi-lead ECG records and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * CSV: a header row of lead names followed by one row per sample.
//! * Raw: a lead-major block of little-endian `f32` samples (`<stem>.f32`)
//!   with a JSON sidecar (`<stem>.json`) holding
//!   `{"rate": <int>, "length": <int>, "order": [...]}`.
//!
//! Samples are millivolts and are never rescaled on load.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard 12-lead names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeadName {
    I,
    II,
    III,
    #[serde(rename = "aVL")]
    AVL,
    #[serde(rename = "aVR")]
    AVR,
    #[serde(rename = "aVF")]
    AVF,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl LeadName {
    /// Canonical lead order used everywhere downstream.
    pub const CANONICAL: [LeadName; 12] = [
        LeadName::I,
        LeadName::II,
        LeadName::III,
        LeadName::AVL,
        LeadName::AVR,
        LeadName::AVF,
        LeadName::V1,
        LeadName::V2,
        LeadName::V3,
        LeadName::V4,
        LeadName::V5,
        LeadName::V6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LeadName::I => "I",
            LeadName::II => "II",
            LeadName::III => "III",
            LeadName::AVL => "aVL",
            LeadName::AVR => "aVR",
            LeadName::AVF => "aVF",
            LeadName::V1 => "V1",
            LeadName::V2 => "V2",
            LeadName::V3 => "V3",
            LeadName::V4 => "V4",
            LeadName::V5 => "V5",
            LeadName::V6 => "V6",
        }
    }

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        LeadName::CANONICAL
            .iter()
            .position(|&l| l == self)
            .expect("lead is in canonical list")
    }
}

impl fmt::Display for LeadName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LeadName {
    type Err = Error;

    /// Case-insensitive, so PTB-XL style `AVL` parses as well as `aVL`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        LeadName::CANONICAL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::UnknownLead(t.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lead {
    pub name: LeadName,
    pub samples: Vec<f64>,
}

/// Twelve named leads of equal length sampled at `sampling_rate` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    leads: Vec<Lead>,
    sampling_rate: u32,
    meta: BTreeMap<String, String>,
}

impl EcgRecord {
    /// Validates the record invariants. Lead order is kept as given; use
    /// [`reorder_leads`] to canonicalize.
    pub fn new(leads: Vec<Lead>, sampling_rate: u32, meta: BTreeMap<String, String>) -> Result<Self> {
        if leads.len() != 12 {
            return Err(Error::LeadCount(leads.len()));
        }
        if sampling_rate == 0 {
            return Err(Error::InvalidArgument("sampling rate must be positive".into()));
        }
        let mut seen = HashSet::new();
        for lead in &leads {
            if !seen.insert(lead.name) {
                return Err(Error::DuplicateLead(lead.name.to_string()));
            }
        }
        let expected = leads[0].samples.len();
        if expected < 2 {
            return Err(Error::SignalTooShort {
                needed: 2,
                got: expected,
            });
        }
        for lead in &leads {
            if lead.samples.len() != expected {
                return Err(Error::RaggedLeads {
                    lead: lead.name.to_string(),
                    expected,
                    found: lead.samples.len(),
                });
            }
            if let Some(index) = lead.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    lead: lead.name.to_string(),
                    index,
                });
            }
        }
        Ok(EcgRecord {
            leads,
            sampling_rate,
            meta,
        })
    }

    /// Builds a canonical-order record from channel names as they appear in
    /// a source file.
    pub fn from_named<S: AsRef<str>>(
        names: &[S],
        data: Vec<Vec<f64>>,
        sampling_rate: u32,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        if names.len() != 12 {
            return Err(Error::LeadCount(names.len()));
        }
        if data.len() != names.len() {
            return Err(Error::LeadCount(data.len()));
        }
        let leads = names
            .iter()
            .zip(data)
            .map(|(n, samples)| {
                Ok(Lead {
                    name: n.as_ref().parse()?,
                    samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(reorder_leads(EcgRecord::new(leads, sampling_rate, meta)?))
    }

    pub fn leads(&self) -> &[Lead] {
        &self.leads
    }

    pub fn into_leads(self) -> Vec<Lead> {
        self.leads
    }

    pub fn lead(&self, name: LeadName) -> Option<&[f64]> {
        self.leads.iter().find(|l| l.name == name).map(|l| l.samples.as_slice())
    }

    pub fn sampling_rate(&self) -> u32 {
        self.sampling_rate
    }

    /// Samples per lead.
    pub fn len(&self) -> usize {
        self.leads[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sampling_rate as f64
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    pub fn is_canonical(&self) -> bool {
        self.leads.iter().zip(LeadName::CANONICAL).all(|(l, c)| l.name == c)
    }
}

/// Permutes leads into canonical order. Sample data is moved, never touched.
pub fn reorder_leads(record: EcgRecord) -> EcgRecord {
    let EcgRecord {
        mut leads,
        sampling_rate,
        meta,
    } = record;
    leads.sort_by_key(|l| l.name.index());
    EcgRecord {
        leads,
        sampling_rate,
        meta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Raw,
}

impl RecordFormat {
    /// `.csv` selects CSV; `.json` and `.f32` select the raw pair.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "csv" => Ok(RecordFormat::Csv),
            Some(ext) if ext == "json" || ext == "f32" => Ok(RecordFormat::Raw),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer record format from {}",
                path.display()
            ))),
        }
    }
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(RecordFormat::Csv),
            "raw" => Ok(RecordFormat::Raw),
            other => Err(Error::InvalidArgument(format!("unknown record format {other:?}"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawHeader {
    rate: u32,
    length: usize,
    order: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

fn raw_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("f32"))
}

/// Loads a record. CSV files carry no sampling rate, so `csv_rate` supplies
/// it; it is ignored for raw records.
pub fn load_record(path: &Path, format: RecordFormat, csv_rate: u32) -> Result<EcgRecord> {
    let mut rec = match format {
        RecordFormat::Csv => load_csv(path, csv_rate)?,
        RecordFormat::Raw => load_raw(path)?,
    };
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        rec.meta.entry("record_id".into()).or_insert_with(|| stem.to_string());
    }
    Ok(rec)
}

fn load_csv(path: &Path, rate: u32) -> Result<EcgRecord> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.len() != 12 {
        return Err(Error::LeadCount(names.len()));
    }
    let mut data = vec![Vec::new(); 12];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != 12 {
            return Err(Error::LeadCount(rec.len()));
        }
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {} column {}: {field:?} is not a number", row + 2, col + 1)))?;
            data[col].push(v);
        }
    }
    EcgRecord::from_named(&names, data, rate, BTreeMap::new())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{other:?}")),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

fn load_raw(path: &Path) -> Result<EcgRecord> {
    let (json_path, block_path) = raw_paths(path);
    let header_text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: RawHeader = serde_json::from_str(&header_text)?;
    if header.order.len() != 12 {
        return Err(Error::LeadCount(header.order.len()));
    }
    let bytes = fs::read(&block_path).map_err(|e| Error::io(&block_path, e))?;
    let expected = 12 * header.length * 4;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "{}: expected {expected} bytes for 12 x {} samples, found {}",
            block_path.display(),
            header.length,
            bytes.len()
        )));
    }
    let data: Vec<Vec<f64>> = bytes
        .chunks_exact(header.length * 4)
        .map(|lead| {
            lead.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()
        })
        .collect();
    EcgRecord::from_named(&header.order, data, header.rate, header.meta)
}

/// Writes a record. Raw output stores `f32`, so it is lossless only for
/// samples that are exactly representable in single precision.
pub fn save_record(record: &EcgRecord, path: &Path, format: RecordFormat) -> Result<()> {
    match format {
        RecordFormat::Csv => {
            let columns: Vec<(&str, &[f64])> = record
                .leads
                .iter()
                .map(|l| (l.name.as_str(), l.samples.as_slice()))
                .collect();
            write_csv_columns(path, &columns)
        }
        RecordFormat::Raw => save_raw(record, path),
    }
}

/// Writes named columns that may differ in length; short columns get empty
/// cells. Used for unequalized reconstructions.
pub fn write_csv_columns(path: &Path, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(columns.iter().map(|(n, _)| *n))
        .map_err(|e| csv_error(path, e))?;
    let rows = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let mut row = Vec::with_capacity(columns.len());
    for i in 0..rows {
        row.clear();
        row.extend(
            columns
                .iter()
                .map(|(_, c)| c.get(i).map(|v| v.to_string()).unwrap_or_default()),
        );
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn save_raw(record: &EcgRecord, path: &Path) -> Result<()> {
    let (json_path, block_path) = raw_paths(path);
    let header = RawHeader {
        rate: record.sampling_rate,
        length: record.len(),
        order: record.leads.iter().map(|l| l.name.to_string()).collect(),
        meta: record.meta.clone(),
    };
    let mut bytes = Vec::with_capacity(12 * record.len() * 4);
    for lead in &record.leads {
        for &v in &lead.samples {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(&block_path, bytes).map_err(|e| Error::io(&block_path, e))?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
}

/// Lists loadable records in a directory (CSV files and raw sidecars),
/// sorted by path.
pub fn list_records(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => out.push(path),
            Some("json") if path.with_extension("f32").exists() => out.push(path),
            _ => {}
        }
    }
    out.sort();
    Ok(out)
}
