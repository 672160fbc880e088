//! Symbolic ECG language codec.
//!
//! A preprocessed ECG lead is reduced to the kinks of an L1 trend-filter fit;
//! key-point voltages become lowercase letters and the gaps between key points
//! become uppercase letters, giving strings such as `aBcDe`. The mapping is
//! invertible up to quantization, so reconstructions can be aligned against the
//! source signal and token-level attention can be drawn back onto the waveform.
//!
//! Module map:
//!
//! * [`record`]: 12-lead records, CSV / raw `f32` I/O
//! * [`preprocess`]: notch, Butterworth, wavelet denoise, resampling
//! * [`trend`]: L1 trend filtering (ADMM with an exact active-set finish) and
//!   key-point extraction
//! * [`quantize`]: voltage / interval codebooks and letter maps
//! * [`codec`]: lead and record encode / decode
//! * [`align`]: R-peak detection, peak-aligned warping, fidelity metrics
//! * [`dataset`]: instruction-tuning JSONL builder
//! * [`count_bench`]: synthetic Z/Q counting benchmark
//! * [`attention`]: point/segment attention overlays rendered as SVG
//! * [`synth`]: synthetic P-QRS-T records for tests and smoke runs
//! * [`config`]: shared CLI configuration

pub mod align;
pub mod attention;
pub mod codec;
pub mod config;
pub mod count_bench;
pub mod dataset;
pub mod error;
pub mod preprocess;
pub mod quantize;
pub mod record;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
pub use record::{load_record, reorder_leads, save_record, EcgRecord, Lead, LeadName, RecordFormat};

/// Version of the codebook file format understood by this build.
pub const CODEBOOK_FORMAT_VERSION: &str = "1";
