//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime error (one `error: <kind>: <message>`
//! line on stderr), 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use ecg_abcde::align::record_fidelity;
use ecg_abcde::attention::{distribute_token_weights, project_weights, render_svg, AttentionDump, SvgStyle};
use ecg_abcde::codec::{
    decode_lead, decode_record, encode_record, fit_codebook_from_records, EcgLanguage, EcgLanguageRecord,
    LEAD_SEPARATOR,
};
use ecg_abcde::config::{LangLayout, PipelineConfig};
use ecg_abcde::count_bench::{gen_split, write_split, Split};
use ecg_abcde::dataset::{build_dataset, DatasetOptions};
use ecg_abcde::preprocess::preprocess_record;
use ecg_abcde::quantize::{load_codebook, save_codebook, CodeBook};
use ecg_abcde::record::{list_records, write_csv_columns};
use ecg_abcde::trend::{extract_keypoints, extract_keypoints_from, fit_with_policy, KeypointSource, LambdaPolicy};
use ecg_abcde::{load_record, save_record, EcgRecord, Error, LeadName, RecordFormat, Result, CODEBOOK_FORMAT_VERSION};

#[derive(Parser, Debug)]
#[command(name = "ecg-abcde", about = "ECG <-> ECG-language codec and dataset tools")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON pipeline config; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Keep output in input order for multi-record commands.
    #[arg(long, global = true)]
    stable_order: bool,
    /// Sampling rate of CSV inputs, which carry no rate of their own.
    #[arg(long, global = true)]
    csv_rate: Option<u32>,
}

#[derive(Args, Debug, Clone)]
struct EncodeFlags {
    /// `auto` or a nonnegative number.
    #[arg(long)]
    lambda: Option<LambdaPolicy>,
    #[arg(long, value_parser = parse_source)]
    keypoint_source: Option<KeypointSource>,
    /// Run the preprocessing chain before encoding.
    #[arg(long)]
    preprocess: bool,
}

fn parse_source(s: &str) -> std::result::Result<KeypointSource, String> {
    match s.to_ascii_lowercase().as_str() {
        "fit" => Ok(KeypointSource::Fit),
        "raw" => Ok(KeypointSource::Raw),
        _ => Err(format!("expected 'fit' or 'raw', got {s:?}")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter, denoise and resample a record (or every record in a directory).
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit voltage and interval codebooks from a directory of records.
    FitCodebook {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        encode: EncodeFlags,
    },
    /// Encode a 12-lead record to ECG language.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// `joined` ('/'-separated single line) or `lines` (one lead per line).
        #[arg(long)]
        layout: Option<LangLayout>,
        #[command(flatten)]
        encode: EncodeFlags,
    },
    /// Decode ECG language back to a record.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pad leads to a common length by holding their last value.
        #[arg(long)]
        equalize: bool,
    },
    /// Run the trend filter and dump key points per lead.
    Trendfit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lambda: Option<LambdaPolicy>,
        #[arg(long)]
        dump_keypoints: PathBuf,
        #[arg(long, value_parser = parse_source)]
        keypoint_source: Option<KeypointSource>,
    },
    /// Score a decoded record against its source after peak alignment.
    Fidelity {
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        lang: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Build an instruction-tuning JSONL file from QA pairs and records.
    BuildDataset {
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Instruction template file with {question_type} and {question}.
        #[arg(long)]
        template: Option<PathBuf>,
        #[command(flatten)]
        encode: EncodeFlags,
    },
    /// Generate the Z/Q counting benchmark.
    Countbench {
        /// Samples per answer value (train split).
        #[arg(long, default_value_t = 500)]
        k: usize,
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render token attention over a decoded lead as SVG.
    AttnViz {
        #[arg(long)]
        lang: PathBuf,
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Lead to draw when the language file holds a whole record.
        #[arg(long, default_value = "II")]
        lead: LeadName,
        #[arg(long)]
        title: Option<String>,
    },
}

fn version_text() -> String {
    format!(
        "{} (codebook format {CODEBOOK_FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let version: &'static str = Box::leak(version_text().into_boxed_str());
    let cmd = Cli::command().version(version);
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::from(1)
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
}

impl Ctx {
    fn codebook(&self, flag: &Option<PathBuf>) -> Result<CodeBook> {
        let path = flag
            .clone()
            .or_else(|| self.cfg.codebook.clone())
            .ok_or_else(|| Error::InvalidArgument("no codebook given (use --codebook or the config file)".into()))?;
        load_codebook(&path)
    }

    fn read_record(&self, path: &Path) -> Result<EcgRecord> {
        load_record(path, RecordFormat::from_path(path)?, self.cfg.csv_rate)
    }

    fn apply_encode_flags(&mut self, f: &EncodeFlags) {
        if let Some(l) = f.lambda {
            self.cfg.lambda = l;
        }
        if let Some(s) = f.keypoint_source {
            self.cfg.keypoint_source = s;
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(rate) = cli.global.csv_rate {
        cfg.csv_rate = rate;
    }
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot configure worker pool: {e}")))?;
    }
    // Multi-record outputs are always assembled in input order; the flag is
    // accepted so scripts can state the requirement explicitly.
    let _ = cli.global.stable_order;
    let mut ctx = Ctx { cfg };

    match cli.command {
        Command::Preprocess { input, out } => preprocess_cmd(&ctx, &input, &out),
        Command::FitCodebook { records, out, encode } => {
            ctx.apply_encode_flags(&encode);
            let paths = list_records(&records)?;
            let mut recs = paths
                .par_iter()
                .map(|p| ctx.read_record(p))
                .collect::<Result<Vec<_>>>()?;
            if encode.preprocess {
                recs = recs
                    .par_iter()
                    .map(|r| preprocess_record(r, &ctx.cfg.preprocess))
                    .collect::<Result<Vec<_>>>()?;
            }
            let (cb, report) = fit_codebook_from_records(&recs, &ctx.cfg.encode_options())?;
            if report.tied_interval_edges {
                log::warn!(
                    "only {} distinct interval values; tied edges were separated",
                    report.distinct_intervals
                );
            }
            save_codebook(&cb, &out)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Encode {
            input,
            codebook,
            out,
            layout,
            encode,
        } => {
            ctx.apply_encode_flags(&encode);
            let cb = ctx.codebook(&codebook)?;
            let mut rec = ctx.read_record(&input)?;
            if encode.preprocess {
                rec = preprocess_record(&rec, &ctx.cfg.preprocess)?;
            }
            let lang = encode_record(&rec, &cb, &ctx.cfg.encode_options())?;
            let text = match layout.unwrap_or(ctx.cfg.lang_layout) {
                LangLayout::Joined => format!("{}\n", lang.serialize()),
                LangLayout::Lines => lang.to_lines(),
            };
            write_text(&out, &text)
        }
        Command::Decode {
            input,
            codebook,
            out,
            equalize,
        } => {
            let cb = ctx.codebook(&codebook)?;
            let lang = EcgLanguageRecord::parse(&read_text(&input)?)?;
            let decoded = decode_record(&lang, &cb)?;
            let format = RecordFormat::from_path(&out)?;
            if equalize || !decoded.is_ragged() {
                save_record(&decoded.into_record()?, &out, format)
            } else if format == RecordFormat::Csv {
                let cols: Vec<(&str, &[f64])> = decoded
                    .leads
                    .iter()
                    .map(|l| (l.name.as_str(), l.samples.as_slice()))
                    .collect();
                write_csv_columns(&out, &cols)
            } else {
                Err(Error::InvalidArgument(
                    "decoded leads differ in length; raw output needs --equalize".into(),
                ))
            }
        }
        Command::Trendfit {
            input,
            lambda,
            dump_keypoints,
            keypoint_source,
        } => {
            if let Some(l) = lambda {
                ctx.cfg.lambda = l;
            }
            if let Some(s) = keypoint_source {
                ctx.cfg.keypoint_source = s;
            }
            let rec = ecg_abcde::reorder_leads(ctx.read_record(&input)?);
            let cfg = &ctx.cfg;
            let dumps = rec
                .leads()
                .par_iter()
                .map(|lead| {
                    let fit = fit_with_policy(&lead.samples, &cfg.lambda, &cfg.trend, cfg.kink_tol)?;
                    let kp = match cfg.keypoint_source {
                        KeypointSource::Fit => extract_keypoints(&fit, cfg.kink_tol),
                        KeypointSource::Raw => extract_keypoints_from(&fit, &lead.samples, cfg.kink_tol),
                    };
                    Ok(serde_json::json!({
                        "lead": lead.name,
                        "lambda": fit.lambda,
                        "objective": fit.objective,
                        "iterations": fit.iterations,
                        "converged": fit.converged,
                        "indices": kp.indices,
                        "values": kp.values,
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            write_json(&dump_keypoints, &dumps)
        }
        Command::Fidelity {
            orig,
            lang,
            codebook,
            report,
        } => {
            let cb = ctx.codebook(&codebook)?;
            let rec = ctx.read_record(&orig)?;
            let lang = EcgLanguageRecord::parse(&read_text(&lang)?)?;
            write_json(&report, &record_fidelity(&rec, &lang, &cb)?)
        }
        Command::BuildDataset {
            qa,
            records,
            codebook,
            out,
            template,
            encode,
        } => {
            ctx.apply_encode_flags(&encode);
            let cb = ctx.codebook(&codebook)?;
            let template = match template {
                Some(p) => read_text(&p)?,
                None => ctx.cfg.template.clone(),
            };
            let opts = DatasetOptions {
                template,
                encode: ctx.cfg.encode_options(),
                preprocess: encode.preprocess.then(|| ctx.cfg.preprocess.clone()),
                csv_rate: ctx.cfg.csv_rate,
            };
            let summary = build_dataset(&qa, &records, &cb, &out, &opts)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(())
        }
        Command::Countbench { k, split, out } => {
            let samples = gen_split(split, k, ctx.cfg.seed)?;
            write_split(&samples, &out)
        }
        Command::AttnViz {
            lang,
            dump,
            codebook,
            out,
            lead,
            title,
        } => {
            let cb = ctx.codebook(&codebook)?;
            let text = read_text(&lang)?;
            let text = text.trim();
            let dump = AttentionDump::load(&dump)?;
            let block = if text.contains(LEAD_SEPARATOR) || text.lines().count() > 1 {
                let rec = EcgLanguageRecord::parse(text)?;
                let weights = distribute_token_weights(&dump, &rec.serialize())?;
                let start: usize = rec.blocks()[..lead.index()].iter().map(EcgLanguage::len).sum();
                let b = rec.block(lead).clone();
                let w = weights[start..start + b.len()].to_vec();
                (b, w)
            } else {
                let b = EcgLanguage::parse(text)?;
                let w = distribute_token_weights(&dump, b.as_str())?;
                (b, w)
            };
            let overlay = project_weights(&block.0, &block.1, &cb)?;
            let recon = decode_lead(&block.0, &cb)?;
            let style = SvgStyle {
                title,
                ..SvgStyle::default()
            };
            write_text(&out, &render_svg(&overlay, &recon, &style)?)
        }
    }
}

fn preprocess_cmd(ctx: &Ctx, input: &Path, out: &Path) -> Result<()> {
    if !input.is_dir() {
        let rec = ctx.read_record(input)?;
        let processed = preprocess_record(&rec, &ctx.cfg.preprocess)?;
        return save_record(&processed, out, RecordFormat::from_path(out)?);
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let paths = list_records(input)?;
    paths.par_iter().try_for_each(|p| {
        let rec = ctx.read_record(p)?;
        let processed = preprocess_record(&rec, &ctx.cfg.preprocess)?;
        let name = p.file_name().expect("listed records have file names");
        save_record(&processed, &out.join(name), RecordFormat::from_path(p)?)
    })
}
