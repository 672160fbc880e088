//! Fine-tuning samples: question/answer pairs joined with ECG-language
//! blocks wrapped in `<es>`/`<ed>`, written as JSONL.
//!
//! The prompt is `instruction ∥ input` and the full training sequence is
//! `prompt ∥ output`; `prompt_len_chars` marks where the loss mask ends.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::codec::{encode_record, EcgLanguageRecord, EncodeOptions};
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_record, PreprocessConfig};
use crate::quantize::CodeBook;
use crate::record::{list_records, load_record, RecordFormat};

pub const ECG_START: &str = "<es>";
pub const ECG_END: &str = "<ed>";

/// Placeholders: `{question_type}` and `{question}`.
pub const DEFAULT_TEMPLATE: &str =
    "You are given 12-lead ECGs written in ECG language.\nQuestion type: {question_type}\nQuestion: {question}\n";

pub const QUESTION_TYPES: [&str; 7] = [
    "single-choose",
    "single-query",
    "single-verify",
    "comparison_consecutive-verify",
    "comparison_consecutive-query",
    "comparison_irrelevant-verify",
    "comparison_irrelevant-query",
];

fn ids_as_strings<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    let values = Vec::<serde_json::Value>::deserialize(d)?;
    values
        .into_iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(s),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(serde::de::Error::custom(format!(
                "ecg id must be a string or number, got {other}"
            ))),
        })
        .collect()
}

/// One question/answer pair from the QA source file. Numeric ECG ids are
/// accepted and read as their decimal text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSource {
    pub question_type: String,
    pub question: String,
    pub answer: String,
    #[serde(deserialize_with = "ids_as_strings")]
    pub ecg_ids: Vec<String>,
}

impl QaSource {
    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() || self.answer.trim().is_empty() {
            return Err(Error::InvalidArgument("question and answer must be non-empty".into()));
        }
        if !(1..=2).contains(&self.ecg_ids.len()) {
            return Err(Error::InvalidArgument(format!(
                "a question refers to 1 or 2 ECGs, got {}",
                self.ecg_ids.len()
            )));
        }
        Ok(())
    }

    /// Comparison questions carry two ECGs.
    pub fn is_comparison(&self) -> bool {
        self.question_type.to_ascii_lowercase().starts_with("comparison")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneSample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub prompt_len_chars: usize,
}

impl FineTuneSample {
    /// `instruction ∥ input ∥ output`; the output starts at
    /// `prompt_len_chars` characters.
    pub fn full_sequence(&self) -> String {
        format!("{}{}{}", self.instruction, self.input, self.output)
    }

    /// Extracts the ECG blocks of `input` in order.
    pub fn blocks(&self) -> Result<Vec<EcgLanguageRecord>> {
        split_blocks(&self.input)?
            .into_iter()
            .map(EcgLanguageRecord::parse)
            .collect()
    }

    /// Checks tag balance, per-lead alternation and the prompt length.
    pub fn validate(&self) -> Result<()> {
        let blocks = self.blocks()?;
        if blocks.is_empty() {
            return Err(Error::Parse("sample has no ECG block".into()));
        }
        let want = self.instruction.chars().count() + self.input.chars().count();
        if self.prompt_len_chars != want {
            return Err(Error::Parse(format!(
                "prompt_len_chars is {} but the prompt has {want} characters",
                self.prompt_len_chars
            )));
        }
        Ok(())
    }
}

/// Returns the contents of every `<es>…<ed>` pair, rejecting unbalanced or
/// nested tags.
pub fn split_blocks(text: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let start = rest.find(ECG_START);
        let end = rest.find(ECG_END);
        match (start, end) {
            (None, None) => return Ok(out),
            (Some(s), Some(e)) if s < e => {
                let body = &rest[s + ECG_START.len()..e];
                if body.contains(ECG_START) {
                    return Err(Error::Parse("nested <es> tag".into()));
                }
                out.push(body);
                rest = &rest[e + ECG_END.len()..];
            }
            _ => return Err(Error::Parse("unbalanced <es>/<ed> tags".into())),
        }
    }
}

/// Wraps each record as `<es>` + `/`-joined leads + `<ed>`, in order.
pub fn ecg_input(blocks: &[&EcgLanguageRecord]) -> Result<String> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("at least one ECG block is required".into()));
    }
    let mut out = String::new();
    for b in blocks {
        out.push_str(ECG_START);
        out.push_str(&b.serialize());
        out.push_str(ECG_END);
    }
    Ok(out)
}

/// The full prompt `instruction ∥ <es>x₁<ed> ∥ …`.
pub fn assemble_prompt(instruction: &str, blocks: &[&EcgLanguageRecord]) -> Result<String> {
    Ok(format!("{instruction}{}", ecg_input(blocks)?))
}

pub fn render_instruction(template: &str, qa: &QaSource) -> String {
    template
        .replace("{question_type}", &qa.question_type)
        .replace("{question}", &qa.question)
}

/// Builds one sample from already-encoded ECGs, given in `qa.ecg_ids` order.
pub fn build_sample(qa: &QaSource, langs: &[&EcgLanguageRecord], template: &str) -> Result<FineTuneSample> {
    qa.validate()?;
    if langs.len() != qa.ecg_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "question refers to {} ECGs but {} were supplied",
            qa.ecg_ids.len(),
            langs.len()
        )));
    }
    let instruction = render_instruction(template, qa);
    let input = ecg_input(langs)?;
    let prompt_len_chars = instruction.chars().count() + input.chars().count();
    Ok(FineTuneSample {
        instruction,
        input,
        output: qa.answer.clone(),
        prompt_len_chars,
    })
}

pub fn load_qa(path: &Path) -> Result<Vec<QaSource>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub template: String,
    pub encode: EncodeOptions,
    /// Run the preprocessing chain on each record before encoding.
    pub preprocess: Option<PreprocessConfig>,
    pub csv_rate: u32,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            template: DEFAULT_TEMPLATE.to_string(),
            encode: EncodeOptions::default(),
            preprocess: None,
            csv_rate: crate::preprocess::CANONICAL_RATE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub written: usize,
    pub skipped: usize,
    /// Skip reason → count.
    pub reasons: BTreeMap<String, usize>,
}

/// Index of record files in a directory keyed by file stem.
pub fn index_records(dir: &Path) -> Result<HashMap<String, PathBuf>> {
    Ok(list_records(dir)?
        .into_iter()
        .filter_map(|p| {
            let stem = p.file_stem()?.to_str()?.to_string();
            Some((stem, p))
        })
        .collect())
}

fn encode_path(path: &Path, cb: &CodeBook, opts: &DatasetOptions) -> Result<EcgLanguageRecord> {
    let format = RecordFormat::from_path(path)?;
    let mut rec = load_record(path, format, opts.csv_rate)?;
    if let Some(pre) = &opts.preprocess {
        rec = preprocess_record(&rec, pre)?;
    }
    encode_record(&rec, cb, &opts.encode)
}

/// Builds samples for every QA pair. Each referenced record is encoded
/// once. Pairs that cannot be built are skipped and counted by reason;
/// output order follows the QA file.
pub fn build_samples(
    qas: &[QaSource],
    records: &HashMap<String, PathBuf>,
    cb: &CodeBook,
    opts: &DatasetOptions,
) -> (Vec<FineTuneSample>, DatasetSummary) {
    let mut ids: Vec<&str> = qas
        .iter()
        .flat_map(|q| q.ecg_ids.iter().map(String::as_str))
        .filter(|id| records.contains_key(*id))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let encoded: HashMap<&str, std::result::Result<EcgLanguageRecord, String>> = ids
        .par_iter()
        .map(|&id| (id, encode_path(&records[id], cb, opts).map_err(|e| e.to_string())))
        .collect();

    let results: Vec<std::result::Result<FineTuneSample, (String, String)>> = qas
        .par_iter()
        .enumerate()
        .map(|(i, qa)| {
            qa.validate()
                .map_err(|e| ("invalid qa".to_string(), format!("qa #{i}: {e}")))?;
            let mut langs = Vec::with_capacity(qa.ecg_ids.len());
            for id in &qa.ecg_ids {
                match encoded.get(id.as_str()) {
                    None => return Err(("unresolved id".into(), format!("qa #{i}: no record named {id:?}"))),
                    Some(Err(e)) => return Err(("encode failure".into(), format!("qa #{i}: record {id:?}: {e}"))),
                    Some(Ok(l)) => langs.push(l),
                }
            }
            build_sample(qa, &langs, &opts.template).map_err(|e| ("invalid qa".into(), format!("qa #{i}: {e}")))
        })
        .collect();

    let mut summary = DatasetSummary::default();
    let mut samples = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err((reason, detail)) => {
                log::warn!("skipping {detail}");
                summary.skipped += 1;
                *summary.reasons.entry(reason).or_default() += 1;
            }
        }
    }
    summary.written = samples.len();
    (samples, summary)
}

pub fn write_jsonl<W: Write>(samples: &[FineTuneSample], mut w: W) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn build_dataset(
    qa_path: &Path,
    record_dir: &Path,
    cb: &CodeBook,
    out_path: &Path,
    opts: &DatasetOptions,
) -> Result<DatasetSummary> {
    let qas = load_qa(qa_path)?;
    let records = index_records(record_dir)?;
    let (samples, summary) = build_samples(&qas, &records, cb, opts);
    let file = std::fs::File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(&samples, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(out_path, e))?;
    Ok(summary)
}
