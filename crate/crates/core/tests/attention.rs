mod common;

use std::path::PathBuf;

use ecg_abcde::attention::{
    color_hex, colormap, distribute_token_weights, luminance, project_weights, render_svg, AttentionDump, Overlay,
    SvgStyle,
};
use ecg_abcde::codec::{decode_lead, decode_positions, EcgLanguage};
use ecg_abcde::quantize::{LOWER, UPPER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn toy() -> (Overlay, Vec<f64>) {
    let cb = common::integer_codebook();
    let lang = EcgLanguage::parse("kCuAfHmBr").unwrap();
    let dump = AttentionDump {
        tokens: vec!["kC".into(), "u".into(), "Af".into(), "H".into(), "mBr".into()],
        weights: vec![0.25, 1.0, 0.5, 0.0, 0.75],
    };
    let w = distribute_token_weights(&dump, lang.as_str()).unwrap();
    let overlay = project_weights(&lang, &w, &cb).unwrap();
    (overlay, decode_lead(&lang, &cb).unwrap())
}

fn toy_style() -> SvgStyle {
    SvgStyle {
        width: 480.0,
        height: 200.0,
        title: Some("lead II <toy> & overlay".into()),
        ..Default::default()
    }
}

/// Random split of `text` into tokens of one to three characters.
fn random_tokens(text: &str, rng: &mut impl Rng) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let k = rng.random_range(1..=3).min(chars.len() - i);
        out.push(chars[i..i + k].iter().collect());
        i += k;
    }
    out
}

fn random_language(rng: &mut impl Rng, k: usize) -> EcgLanguage {
    let mut s = String::new();
    for i in 0..k {
        if i > 0 {
            s.push(UPPER[rng.random_range(0..26)]);
        }
        s.push(LOWER[rng.random_range(0..26)]);
    }
    EcgLanguage::parse(&s).unwrap()
}

#[test]
fn golden_svg_is_byte_identical() {
    let (overlay, recon) = toy();
    let svg = render_svg(&overlay, &recon, &toy_style()).unwrap();
    let path = golden_path("toy_overlay.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file present");
    assert_eq!(svg, golden);
    assert_eq!(render_svg(&overlay, &recon, &toy_style()).unwrap(), svg);
    assert!(svg.contains("&lt;toy&gt; &amp;"));
}

#[test]
fn broadcast_conserves_mass_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let k = rng.random_range(1..60);
        let lang = random_language(&mut rng, k);
        let tokens = random_tokens(lang.as_str(), &mut rng);
        // Dyadic weights keep every sum exact in binary floating point.
        let weights: Vec<f64> = tokens
            .iter()
            .map(|_| rng.random_range(0..1024) as f64 / 256.0)
            .collect();
        let dump = AttentionDump {
            tokens: tokens.clone(),
            weights: weights.clone(),
        };
        let w = distribute_token_weights(&dump, lang.as_str()).unwrap();
        assert_eq!(w.len(), lang.len());
        let expected: f64 = tokens
            .iter()
            .zip(&weights)
            .map(|(t, w)| t.chars().count() as f64 * w)
            .sum();
        assert_eq!(w.iter().sum::<f64>(), expected);
    }
}

#[test]
fn projected_indices_match_decoder_positions() {
    let cb = common::integer_codebook();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let k = rng.random_range(1..80);
        let lang = random_language(&mut rng, k);
        let w: Vec<f64> = (0..lang.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let overlay = project_weights(&lang, &w, &cb).unwrap();
        let recon = decode_lead(&lang, &cb).unwrap();
        // Independent walk over the string: lowercase letters sit at the
        // running sum of decoded intervals.
        let mut expected = vec![0usize];
        for c in lang.as_str().chars().filter(char::is_ascii_uppercase) {
            expected.push(expected.last().unwrap() + cb.unmap_interval(c).unwrap());
        }
        let points: Vec<usize> = overlay.points.iter().map(|p| p.0).collect();
        assert_eq!(points, expected);
        assert_eq!(points, decode_positions(&lang, &cb).unwrap());
        assert_eq!(*points.last().unwrap(), recon.len() - 1);
        for (k, s) in overlay.segments.iter().enumerate() {
            assert_eq!((s.0, s.1), (points[k], points[k + 1]));
        }
        let top = overlay
            .points
            .iter()
            .map(|p| p.1)
            .chain(overlay.segments.iter().map(|s| s.2))
            .fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-12);
        render_svg(&overlay, &recon, &SvgStyle::default()).unwrap();
    }
}

#[test]
fn dump_mismatches_are_reported() {
    let block = "aBc/dEf";
    let ok = AttentionDump {
        tokens: vec!["aB".into(), "c/".into(), "dEf".into()],
        weights: vec![1.0, 2.0, 3.0],
    };
    assert_eq!(
        distribute_token_weights(&ok, block).unwrap(),
        vec![1.0, 1.0, 2.0, 3.0, 3.0, 3.0]
    );
    let short = AttentionDump {
        tokens: vec!["aB".into()],
        weights: vec![1.0],
    };
    assert_eq!(
        distribute_token_weights(&short, block).unwrap_err().kind(),
        "dump_mismatch"
    );
    let uneven = AttentionDump {
        tokens: vec!["aB".into()],
        weights: vec![1.0, 2.0],
    };
    assert_eq!(
        distribute_token_weights(&uneven, block).unwrap_err().kind(),
        "dump_mismatch"
    );
    let negative = AttentionDump {
        tokens: vec!["aBc".into()],
        weights: vec![-1.0],
    };
    assert!(distribute_token_weights(&negative, "aBc").is_err());
    let cb = common::integer_codebook();
    let lang = EcgLanguage::parse("aBc").unwrap();
    assert_eq!(project_weights(&lang, &[1.0], &cb).unwrap_err().kind(), "dump_mismatch");
}

#[test]
fn colormap_is_monotone_in_luminance() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=1000 {
        let l = luminance(colormap(i as f64 / 1000.0));
        assert!(l > prev, "step {i}");
        prev = l;
    }
    assert_eq!(color_hex(0.0), "#440154");
    assert_eq!(color_hex(1.0), "#fde725");
}

#[test]
fn zero_weights_render_at_the_colormap_minimum() {
    let cb = common::integer_codebook();
    let lang = EcgLanguage::parse("aBcDe").unwrap();
    let overlay = project_weights(&lang, &[0.0; 5], &cb).unwrap();
    let svg = render_svg(&overlay, &decode_lead(&lang, &cb).unwrap(), &SvgStyle::default()).unwrap();
    let lo = color_hex(0.0);
    let coloured: Vec<&str> = svg
        .lines()
        .filter(|l| l.starts_with("<line") || l.starts_with("<circle"))
        .collect();
    assert_eq!(coloured.len(), 2 + 3);
    assert!(coloured.iter().all(|l| l.contains(&lo)));
}
