//! Lead-level and record-level conversion between samples and ECG language.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantize::{fit_codebook, CodeBook, FitReport};
use crate::record::{EcgRecord, Lead, LeadName};
use crate::trend::{
    extract_keypoints, extract_keypoints_from, fit_with_policy, KeyPoints, KeypointSource, LambdaPolicy, TrendOptions,
    DEFAULT_KINK_TOL,
};

/// Separator between lead blocks of a serialized record.
pub const LEAD_SEPARATOR: char = '/';

/// An alternating string of key-point (lowercase) and interval (uppercase)
/// letters that starts and ends with a key point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EcgLanguage(String);

/// Checks the alternation invariant.
pub fn validate_language(text: &str) -> Result<()> {
    if text.is_empty() {
        return Err(Error::MalformedLanguage {
            position: 0,
            reason: "empty string".into(),
        });
    }
    for (i, c) in text.chars().enumerate() {
        let want_lower = i % 2 == 0;
        let ok = if want_lower {
            c.is_ascii_lowercase()
        } else {
            c.is_ascii_uppercase()
        };
        if !ok {
            let reason = if !c.is_ascii_alphabetic() {
                format!("{c:?} is in neither alphabet")
            } else if want_lower {
                format!("expected a key-point letter, found {c:?}")
            } else {
                format!("expected an interval letter, found {c:?}")
            };
            return Err(Error::MalformedLanguage { position: i, reason });
        }
    }
    if text.len().is_multiple_of(2) {
        return Err(Error::MalformedLanguage {
            position: text.len(),
            reason: "string must end with a key-point letter".into(),
        });
    }
    Ok(())
}

impl EcgLanguage {
    pub fn parse(text: &str) -> Result<Self> {
        validate_language(text)?;
        Ok(EcgLanguage(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keypoint_count(&self) -> usize {
        self.0.len().div_ceil(2)
    }
}

impl fmt::Display for EcgLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for EcgLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EcgLanguage::parse(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub lambda: LambdaPolicy,
    pub trend: TrendOptions,
    pub kink_tol: f64,
    pub source: KeypointSource,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            lambda: LambdaPolicy::default(),
            trend: TrendOptions::default(),
            kink_tol: DEFAULT_KINK_TOL,
            source: KeypointSource::Fit,
        }
    }
}

/// Everything produced while encoding one lead.
#[derive(Debug, Clone)]
pub struct LeadEncoding {
    pub language: EcgLanguage,
    pub keypoints: KeyPoints,
    pub lambda: f64,
}

/// Runs the trend filter and returns the key points used for encoding.
pub fn lead_keypoints(x: &[f64], opts: &EncodeOptions) -> Result<(KeyPoints, f64)> {
    if x.len() < 3 {
        return Err(Error::SignalTooShort {
            needed: 3,
            got: x.len(),
        });
    }
    let fit = fit_with_policy(x, &opts.lambda, &opts.trend, opts.kink_tol)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: fit.iterations,
        });
    }
    let kp = match opts.source {
        KeypointSource::Fit => extract_keypoints(&fit, opts.kink_tol),
        KeypointSource::Raw => extract_keypoints_from(&fit, x, opts.kink_tol),
    };
    Ok((kp, fit.lambda))
}

/// Letters for a key-point sequence: `f_V(k₀) f_T(i₁ − i₀) f_V(k₁) …`.
pub fn keypoints_to_language(kp: &KeyPoints, cb: &CodeBook) -> Result<EcgLanguage> {
    let mut text = String::with_capacity(2 * kp.len());
    for (i, &v) in kp.values.iter().enumerate() {
        if i > 0 {
            text.push(cb.map_interval(kp.indices[i] - kp.indices[i - 1])?);
        }
        text.push(cb.map_voltage(v));
    }
    EcgLanguage::parse(&text)
}

pub fn encode_lead_detailed(x: &[f64], cb: &CodeBook, opts: &EncodeOptions) -> Result<LeadEncoding> {
    let (keypoints, lambda) = lead_keypoints(x, opts)?;
    Ok(LeadEncoding {
        language: keypoints_to_language(&keypoints, cb)?,
        keypoints,
        lambda,
    })
}

pub fn encode_lead(x: &[f64], cb: &CodeBook, opts: &EncodeOptions) -> Result<EcgLanguage> {
    encode_lead_detailed(x, cb, opts).map(|e| e.language)
}

/// Sample positions of the key points a string decodes to.
pub fn decode_positions(lang: &EcgLanguage, cb: &CodeBook) -> Result<Vec<usize>> {
    let chars: Vec<char> = lang.as_str().chars().collect();
    let mut pos = Vec::with_capacity(chars.len().div_ceil(2));
    let mut m = 0usize;
    pos.push(0);
    for pair in chars[1..].chunks(2) {
        m += cb.unmap_interval(pair[0])?;
        pos.push(m);
    }
    Ok(pos)
}

/// Piecewise-linear reconstruction. Output length is the last key-point
/// position plus one.
pub fn decode_lead(lang: &EcgLanguage, cb: &CodeBook) -> Result<Vec<f64>> {
    let chars: Vec<char> = lang.as_str().chars().collect();
    let mut x = vec![cb.unmap_voltage(chars[0])?];
    let mut m = 0usize;
    for pair in chars[1..].chunks(2) {
        let n = m + cb.unmap_interval(pair[0])?;
        let (xm, xn) = (x[m], cb.unmap_voltage(pair[1])?);
        let span = (n - m) as f64;
        x.extend((m + 1..n).map(|j| xm + (j - m) as f64 / span * (xn - xm)));
        x.push(xn);
        m = n;
    }
    Ok(x)
}

/// Twelve lead blocks in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcgLanguageRecord {
    blocks: Vec<EcgLanguage>,
}

impl EcgLanguageRecord {
    pub fn new(blocks: Vec<EcgLanguage>) -> Result<Self> {
        if blocks.len() != 12 {
            return Err(Error::LeadCount(blocks.len()));
        }
        Ok(EcgLanguageRecord { blocks })
    }

    pub fn blocks(&self) -> &[EcgLanguage] {
        &self.blocks
    }

    pub fn block(&self, lead: LeadName) -> &EcgLanguage {
        &self.blocks[lead.index()]
    }

    /// `/`-joined single-line form used inside `<es>…<ed>`.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.blocks.iter().map(|b| b.len() + 1).sum());
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push(LEAD_SEPARATOR);
            }
            out.push_str(b.as_str());
        }
        out
    }

    /// One block per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(b.as_str());
            out.push('\n');
        }
        out
    }

    /// Accepts either the `/`-joined form or one block per line.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let parts: Vec<&str> = if text.contains(LEAD_SEPARATOR) {
            text.split(LEAD_SEPARATOR).map(str::trim).collect()
        } else {
            text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
        };
        let blocks = parts.into_iter().map(EcgLanguage::parse).collect::<Result<Vec<_>>>()?;
        EcgLanguageRecord::new(blocks)
    }

    pub fn symbol_count(&self) -> usize {
        self.blocks.iter().map(EcgLanguage::len).sum()
    }
}

pub fn encode_record(record: &EcgRecord, cb: &CodeBook, opts: &EncodeOptions) -> Result<EcgLanguageRecord> {
    if record.sampling_rate() != cb.rate {
        return Err(Error::InvalidArgument(format!(
            "record is sampled at {} Hz but the codebook expects {} Hz",
            record.sampling_rate(),
            cb.rate
        )));
    }
    let rec = crate::record::reorder_leads(record.clone());
    let blocks = rec
        .leads()
        .par_iter()
        .map(|lead| encode_lead(&lead.samples, cb, opts))
        .collect::<Result<Vec<_>>>()?;
    EcgLanguageRecord::new(blocks)
}

/// Per-lead reconstructions; lengths may differ between leads.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRecord {
    pub leads: Vec<Lead>,
    pub rate: u32,
}

impl DecodedRecord {
    pub fn max_len(&self) -> usize {
        self.leads.iter().map(|l| l.samples.len()).max().unwrap_or(0)
    }

    pub fn is_ragged(&self) -> bool {
        let n = self.max_len();
        self.leads.iter().any(|l| l.samples.len() != n)
    }

    /// Pads every lead to the longest by holding its last value.
    pub fn equalize(mut self) -> Self {
        let n = self.max_len();
        for lead in &mut self.leads {
            let last = *lead.samples.last().expect("decoded leads are non-empty");
            lead.samples.resize(n, last);
        }
        self
    }

    /// Converts to a record, equalizing lengths first.
    pub fn into_record(self) -> Result<EcgRecord> {
        let rate = self.rate;
        let eq = self.equalize();
        EcgRecord::new(eq.leads, rate, BTreeMap::new())
    }
}

pub fn decode_record(rec: &EcgLanguageRecord, cb: &CodeBook) -> Result<DecodedRecord> {
    let leads = rec
        .blocks
        .iter()
        .zip(LeadName::CANONICAL)
        .map(|(b, name)| {
            Ok(Lead {
                name,
                samples: decode_lead(b, cb)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodedRecord { leads, rate: cb.rate })
}

/// Fits a codebook from preprocessed records: voltages are every sample of
/// every lead, intervals are the gaps between consecutive key points.
pub fn fit_codebook_from_records(records: &[EcgRecord], opts: &EncodeOptions) -> Result<(CodeBook, FitReport)> {
    let rate = match records.first() {
        Some(r) => r.sampling_rate(),
        None => return Err(Error::InvalidArgument("no records to fit a codebook from".into())),
    };
    if let Some(r) = records.iter().find(|r| r.sampling_rate() != rate) {
        return Err(Error::InvalidArgument(format!(
            "records mix sampling rates ({rate} Hz and {} Hz)",
            r.sampling_rate()
        )));
    }
    let leads: Vec<&[f64]> = records
        .iter()
        .flat_map(|r| r.leads().iter().map(|l| l.samples.as_slice()))
        .collect();
    let voltages: Vec<f64> = leads.iter().flat_map(|l| l.iter().copied()).collect();
    let per_lead = leads
        .par_iter()
        .map(|x| lead_keypoints(x, opts).map(|(kp, _)| kp.intervals().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let intervals: Vec<usize> = per_lead.into_iter().flatten().collect();
    fit_codebook(&voltages, &intervals, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::EDGES;

    fn book() -> CodeBook {
        // V_j = j / 10 + 0.1, T_j = j + 1
        CodeBook::new(
            (0..EDGES).map(|j| j as f64 / 10.0 + 0.1).collect(),
            (0..EDGES).map(|j| j as f64 + 1.0).collect(),
            250,
        )
        .unwrap()
    }

    #[test]
    fn alternation_is_enforced() {
        assert!(EcgLanguage::parse("aBc").is_ok());
        assert!(EcgLanguage::parse("a").is_ok());
        for bad in ["", "A", "aB", "ab", "aBC", "aB1", "a/c"] {
            assert!(EcgLanguage::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn single_letter_decodes_to_one_sample() {
        let cb = book();
        assert_eq!(decode_lead(&"a".parse().unwrap(), &cb).unwrap(), vec![0.1]);
    }

    #[test]
    fn interpolates_between_keypoints() {
        let cb = book();
        // 'D' -> T_3 = 4 samples, 'e' -> V_4 = 0.5
        let x = decode_lead(&"aDe".parse().unwrap(), &cb).unwrap();
        assert_eq!(x.len(), 5);
        for (j, v) in x.iter().enumerate() {
            let expected = 0.1 + j as f64 / 4.0 * (0.5 - 0.1);
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn positions_follow_intervals() {
        let cb = book();
        let lang = "aBcZd".parse().unwrap();
        assert_eq!(decode_positions(&lang, &cb).unwrap(), vec![0, 2, 52]);
        assert_eq!(decode_lead(&lang, &cb).unwrap().len(), 53);
    }

    #[test]
    fn record_serialization_forms() {
        let blocks: Vec<EcgLanguage> = (0..12)
            .map(|i| EcgLanguage::parse(if i % 2 == 0 { "aBc" } else { "d" }).unwrap())
            .collect();
        let rec = EcgLanguageRecord::new(blocks).unwrap();
        let joined = rec.serialize();
        assert_eq!(joined.matches('/').count(), 11);
        assert_eq!(EcgLanguageRecord::parse(&joined).unwrap(), rec);
        assert_eq!(EcgLanguageRecord::parse(&rec.to_lines()).unwrap(), rec);
        assert!(matches!(EcgLanguageRecord::parse("aBc/d"), Err(Error::LeadCount(2))));
    }

    #[test]
    fn equalize_pads_with_last_value() {
        let dec = DecodedRecord {
            leads: LeadName::CANONICAL
                .iter()
                .enumerate()
                .map(|(i, &name)| Lead {
                    name,
                    samples: vec![i as f64; 2 + i],
                })
                .collect(),
            rate: 250,
        };
        assert!(dec.is_ragged());
        let rec = dec.into_record().unwrap();
        assert_eq!(rec.len(), 13);
        assert_eq!(rec.lead(LeadName::I).unwrap()[12], 0.0);
    }
}
