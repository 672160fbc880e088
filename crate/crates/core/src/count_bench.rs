//! Synthetic Z/Q counting benchmark.
//!
//! Each input is 500 characters of `Z` with exactly three `Q`; the answer is
//! the smaller of the two adjacent Z-runs between them. Samples are built
//! constructively so every answer in `(50, 150]` can be hit exactly.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INSTRUCTION: &str = "What is the minimum number of 'Z' found in any substring that starts and ends with 'Q'?";
pub const STRING_LEN: usize = 500;
/// Answers lie in `(MIN_EXCLUSIVE, MAX_INCLUSIVE]`.
pub const MIN_EXCLUSIVE: usize = 50;
pub const MAX_INCLUSIVE: usize = 150;
pub const VALUE_COUNT: usize = MAX_INCLUSIVE - MIN_EXCLUSIVE;
pub const TEST_PER_VALUE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSample {
    pub input: String,
    pub output: usize,
    pub q_positions: [usize; 3],
}

/// JSONL line shape shared with the ECG dataset builder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountLine {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub prompt_len_chars: usize,
}

impl CountSample {
    pub fn to_line(&self) -> CountLine {
        CountLine {
            instruction: INSTRUCTION.to_string(),
            input: self.input.clone(),
            output: self.output.to_string(),
            prompt_len_chars: INSTRUCTION.chars().count() + self.input.chars().count(),
        }
    }
}

fn check_target(target: usize) -> Result<()> {
    if target <= MIN_EXCLUSIVE || target > MAX_INCLUSIVE {
        return Err(Error::InvalidArgument(format!(
            "target must lie in ({MIN_EXCLUSIVE}, {MAX_INCLUSIVE}], got {target}"
        )));
    }
    Ok(())
}

/// Places three `Q` so that the smaller adjacent gap is exactly `target`.
/// Which gap is the minimum is a fair coin; the other gap is uniform on
/// `[target, 497 − target]`; the leading offset is uniform over all
/// placements that fit.
pub fn gen_sample<R: Rng>(target: usize, rng: &mut R) -> Result<CountSample> {
    check_target(target)?;
    let max_other = STRING_LEN - 3 - target;
    let other = rng.random_range(target..=max_other);
    let (g1, g2) = if rng.random_bool(0.5) {
        (target, other)
    } else {
        (other, target)
    };
    let offset = rng.random_range(0..=STRING_LEN - 3 - g1 - g2);
    Ok(sample_from_gaps(offset, g1, g2))
}

/// Builds the sample with `Q` at `offset`, `offset + g1 + 1` and
/// `offset + g1 + g2 + 2`.
pub fn sample_from_gaps(offset: usize, g1: usize, g2: usize) -> CountSample {
    let q = [offset, offset + g1 + 1, offset + g1 + g2 + 2];
    assert!(q[2] < STRING_LEN, "placement does not fit in {STRING_LEN} characters");
    let mut bytes = vec![b'Z'; STRING_LEN];
    for &p in &q {
        bytes[p] = b'Q';
    }
    CountSample {
        input: String::from_utf8(bytes).expect("ASCII"),
        output: g1.min(g2),
        q_positions: q,
    }
}

/// Per-sample generator: the stream index keeps samples independent of
/// generation order and thread count.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!(
                "split must be 'train' or 'test', got {s:?}"
            ))),
        }
    }
}

/// Samples per answer value: `k` for train, fixed 10 for test.
pub fn per_value(split: Split, k: usize) -> Result<usize> {
    match split {
        Split::Test => Ok(TEST_PER_VALUE),
        Split::Train if k >= 1 => Ok(k),
        Split::Train => Err(Error::InvalidArgument("k must be at least 1".into())),
    }
}

/// Generates a full split. Targets are interleaved (51, 52, …, 150, 51, …)
/// so every prefix of 100 samples covers each value once.
pub fn gen_split(split: Split, k: usize, seed: u64) -> Result<Vec<CountSample>> {
    let per = per_value(split, k)?;
    // Keep the two splits on disjoint streams for a shared seed.
    let base = match split {
        Split::Train => 0u64,
        Split::Test => 1u64 << 63,
    };
    (0..per * VALUE_COUNT)
        .into_par_iter()
        .map(|i| {
            let target = MIN_EXCLUSIVE + 1 + i % VALUE_COUNT;
            gen_sample(target, &mut sample_rng(seed, base + i as u64))
        })
        .collect()
}

/// Brute-force minimum Z-count over every substring that starts and ends
/// with `Q`. `None` if fewer than two `Q`.
pub fn brute_force_min(input: &str) -> Option<usize> {
    let b = input.as_bytes();
    let mut best: Option<usize> = None;
    for i in 0..b.len() {
        if b[i] != b'Q' {
            continue;
        }
        let mut z = 0;
        for &c in &b[i + 1..] {
            if c == b'Q' {
                best = Some(best.map_or(z, |v| v.min(z)));
            } else if c == b'Z' {
                z += 1;
            }
        }
    }
    best
}

/// Structural checks plus brute-force agreement with the stated answer.
pub fn verify_sample(s: &CountSample) -> bool {
    let b = s.input.as_bytes();
    if b.len() != STRING_LEN || b.iter().any(|&c| c != b'Z' && c != b'Q') {
        return false;
    }
    let qs: Vec<usize> = (0..b.len()).filter(|&i| b[i] == b'Q').collect();
    if qs.len() != 3 || qs != s.q_positions {
        return false;
    }
    if s.output <= MIN_EXCLUSIVE || s.output > MAX_INCLUSIVE {
        return false;
    }
    brute_force_min(&s.input) == Some(s.output)
}

pub fn write_jsonl<W: Write>(samples: &[CountSample], mut w: W) -> Result<()> {
    for s in samples {
        let line = serde_json::to_string(&s.to_line())?;
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::Io {
                path: "<output>".into(),
                source: e,
            })?;
    }
    Ok(())
}

pub fn write_split(samples: &[CountSample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(samples, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
