use std::collections::BTreeMap;
use std::path::Path;

use ecg_abcde::record::list_records;
use ecg_abcde::synth::{synth_ecg, SynthConfig};
use ecg_abcde::{load_record, save_record, EcgRecord, LeadName, RecordFormat};
use proptest::prelude::*;

fn f32_exact(rec: &EcgRecord) -> EcgRecord {
    let leads = rec
        .leads()
        .iter()
        .map(|l| ecg_abcde::Lead {
            name: l.name,
            samples: l.samples.iter().map(|&v| v as f32 as f64).collect(),
        })
        .collect();
    EcgRecord::new(leads, rec.sampling_rate(), rec.meta().clone()).unwrap()
}

fn sample_record() -> EcgRecord {
    let mut rec = synth_ecg(&SynthConfig {
        duration_secs: 2.0,
        seed: 4,
        ..Default::default()
    })
    .record;
    rec.meta_mut().insert("record_id".into(), "r1".into());
    rec
}

#[test]
fn csv_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r1.csv");
    let rec = sample_record();
    save_record(&rec, &path, RecordFormat::Csv).unwrap();
    let back = load_record(&path, RecordFormat::Csv, rec.sampling_rate()).unwrap();
    // CSV carries samples only; metadata is not preserved.
    assert_eq!(back.leads(), rec.leads());
    assert_eq!(back.sampling_rate(), rec.sampling_rate());
}

#[test]
fn raw_roundtrip_is_exact_for_f32_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r1.json");
    let rec = f32_exact(&sample_record());
    save_record(&rec, &path, RecordFormat::Raw).unwrap();
    assert!(path.with_extension("f32").exists());
    let back = load_record(&path, RecordFormat::Raw, 0).unwrap();
    assert_eq!(back, rec);
    // Either sidecar names the record.
    let back = load_record(&path.with_extension("f32"), RecordFormat::Raw, 0).unwrap();
    assert_eq!(back, rec);
}

#[test]
fn csv_columns_in_any_order_are_canonicalized() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shuffled.csv");
    let names = [
        "V6", "I", "aVF", "II", "V1", "III", "aVR", "V2", "aVL", "V3", "V4", "V5",
    ];
    let mut text = names.join(",") + "\n";
    for row in 0..4 {
        let cells: Vec<String> = names
            .iter()
            .map(|n| (n.parse::<LeadName>().unwrap().index() * 10 + row).to_string())
            .collect();
        text += &(cells.join(",") + "\n");
    }
    std::fs::write(&path, text).unwrap();
    let rec = load_record(&path, RecordFormat::Csv, 500).unwrap();
    assert_eq!(rec.sampling_rate(), 500);
    for (i, lead) in rec.leads().iter().enumerate() {
        assert_eq!(lead.name, LeadName::CANONICAL[i]);
        assert_eq!(
            lead.samples,
            vec![
                (i * 10) as f64,
                (i * 10 + 1) as f64,
                (i * 10 + 2) as f64,
                (i * 10 + 3) as f64
            ]
        );
    }
    assert_eq!(rec.meta().get("record_id").map(String::as_str), Some("shuffled"));
}

#[test]
fn malformed_inputs_are_typed_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let header = LeadName::CANONICAL.map(|l| l.as_str()).join(",");
    let eleven = LeadName::CANONICAL[..11]
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(",");
    let row = ["1"; 12].join(",");

    let p = write("eleven.csv", &format!("{eleven}\n{}\n", ["1"; 11].join(",")));
    assert_eq!(
        load_record(&p, RecordFormat::Csv, 250).unwrap_err().kind(),
        "lead_count"
    );

    let dup = header.replace("V6", "V5");
    let p = write("dup.csv", &format!("{dup}\n{row}\n{row}\n"));
    assert_eq!(
        load_record(&p, RecordFormat::Csv, 250).unwrap_err().kind(),
        "duplicate_lead"
    );

    let p = write(
        "nan.csv",
        &format!("{header}\n{row}\n{}\n", row.replacen('1', "NaN", 1)),
    );
    assert_eq!(
        load_record(&p, RecordFormat::Csv, 250).unwrap_err().kind(),
        "non_finite"
    );

    let p = write("text.csv", &format!("{header}\n{row}\n{}\n", row.replacen('1', "x", 1)));
    assert_eq!(load_record(&p, RecordFormat::Csv, 250).unwrap_err().kind(), "parse");

    let p = write(
        "unknown.csv",
        &format!("{}\n{row}\n{row}\n", header.replace("aVL", "aVX")),
    );
    assert_eq!(
        load_record(&p, RecordFormat::Csv, 250).unwrap_err().kind(),
        "unknown_lead"
    );
}

#[test]
fn unwritable_and_missing_paths_are_io_errors() {
    let rec = sample_record();
    let target = Path::new("/nonexistent-dir/sub/out.csv");
    assert_eq!(save_record(&rec, target, RecordFormat::Csv).unwrap_err().kind(), "io");
    assert_eq!(load_record(target, RecordFormat::Csv, 250).unwrap_err().kind(), "io");
    assert_eq!(
        load_record(&target.with_extension("json"), RecordFormat::Raw, 0)
            .unwrap_err()
            .kind(),
        "io"
    );
}

#[test]
fn truncated_raw_block_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    save_record(&sample_record(), &path, RecordFormat::Raw).unwrap();
    let block = path.with_extension("f32");
    let mut bytes = std::fs::read(&block).unwrap();
    bytes.truncate(bytes.len() - 4);
    std::fs::write(&block, bytes).unwrap();
    assert_eq!(load_record(&path, RecordFormat::Raw, 0).unwrap_err().kind(), "parse");
}

#[test]
fn format_inference_and_listing() {
    assert_eq!(RecordFormat::from_path(Path::new("a.CSV")).unwrap(), RecordFormat::Csv);
    assert_eq!(RecordFormat::from_path(Path::new("a.f32")).unwrap(), RecordFormat::Raw);
    assert!(RecordFormat::from_path(Path::new("a.txt")).is_err());

    let dir = tempfile::tempdir().unwrap();
    let rec = sample_record();
    save_record(&rec, &dir.path().join("b.csv"), RecordFormat::Csv).unwrap();
    save_record(&rec, &dir.path().join("a.json"), RecordFormat::Raw).unwrap();
    std::fs::write(dir.path().join("orphan.json"), "{}").unwrap();
    let listed: Vec<String> = list_records(dir.path())
        .unwrap()
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(listed, vec!["a.json", "b.csv"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn arbitrary_finite_values_survive_csv(values in prop::collection::vec(-1e6f64..1e6, 2..40), rate in 1u32..2000) {
        let data: Vec<Vec<f64>> = (0..12).map(|k| values.iter().map(|v| v + k as f64).collect()).collect();
        let names = LeadName::CANONICAL.map(|l| l.as_str());
        let rec = EcgRecord::from_named(&names, data, rate, BTreeMap::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_record(&rec, &path, RecordFormat::Csv).unwrap();
        let mut back = load_record(&path, RecordFormat::Csv, rate).unwrap();
        back.meta_mut().clear();
        prop_assert_eq!(back, rec);
    }
}
