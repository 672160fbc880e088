//! Point–segment attention overlays rendered as SVG.
//!
//! Token weights dumped by an external model run are broadcast to the
//! letters they cover. Lowercase letters then colour key-point markers and
//! uppercase letters colour the line segment between their flanking key
//! points on the reconstructed waveform.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_positions, EcgLanguage, LEAD_SEPARATOR};
use crate::error::{Error, Result};
use crate::quantize::CodeBook;

/// Per-token weights as exported by the model-side dumper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

impl AttentionDump {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Broadcasts every token's weight to each of its characters. Lead
/// separators are dropped on both sides before the concatenation of the
/// tokens is compared with `block`; the result has one weight per letter.
pub fn distribute_token_weights(dump: &AttentionDump, block: &str) -> Result<Vec<f64>> {
    if dump.tokens.len() != dump.weights.len() {
        return Err(Error::DumpMismatch(format!(
            "{} tokens but {} weights",
            dump.tokens.len(),
            dump.weights.len()
        )));
    }
    if let Some(w) = dump.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "attention weights must be finite and nonnegative, got {w}"
        )));
    }
    let mut text = String::new();
    let mut out = Vec::new();
    for (tok, &w) in dump.tokens.iter().zip(&dump.weights) {
        for c in tok.chars().filter(|&c| c != LEAD_SEPARATOR) {
            text.push(c);
            out.push(w);
        }
    }
    let want: String = block.chars().filter(|&c| c != LEAD_SEPARATOR).collect();
    if text != want {
        let at = text.chars().zip(want.chars()).take_while(|(a, b)| a == b).count();
        return Err(Error::DumpMismatch(format!(
            "tokens do not concatenate to the ECG block (first difference at letter {at})"
        )));
    }
    Ok(out)
}

/// Attention projected onto decoded sample positions, max-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    /// `(sample index, weight)` per key-point letter.
    pub points: Vec<(usize, f64)>,
    /// `(start index, end index, weight)` per interval letter.
    pub segments: Vec<(usize, usize, f64)>,
}

pub fn project_weights(lang: &EcgLanguage, char_weights: &[f64], cb: &CodeBook) -> Result<Overlay> {
    if char_weights.len() != lang.len() {
        return Err(Error::DumpMismatch(format!(
            "{} weights for a string of {} letters",
            char_weights.len(),
            lang.len()
        )));
    }
    let pos = decode_positions(lang, cb)?;
    let max = char_weights.iter().cloned().fold(0.0, f64::max);
    let norm = |w: f64| if max > 0.0 { w / max } else { 0.0 };
    let points = pos
        .iter()
        .enumerate()
        .map(|(k, &p)| (p, norm(char_weights[2 * k])))
        .collect();
    let segments = pos
        .windows(2)
        .enumerate()
        .map(|(k, w)| (w[0], w[1], norm(char_weights[2 * k + 1])))
        .collect();
    Ok(Overlay { points, segments })
}

/// Anchors of the viridis colormap at 0, ¼, ½, ¾ and 1.
pub const VIRIDIS: [[u8; 3]; 5] = [
    [0x44, 0x01, 0x54],
    [0x3b, 0x52, 0x8b],
    [0x21, 0x91, 0x8c],
    [0x5e, 0xc9, 0x62],
    [0xfd, 0xe7, 0x25],
];

/// Linear interpolation between the viridis anchors; `t` is clamped to
/// `[0, 1]`.
pub fn colormap(t: f64) -> [f64; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [0, 1, 2].map(|c| a[c] as f64 + f * (b[c] as f64 - a[c] as f64))
}

pub fn color_hex(t: f64) -> String {
    let [r, g, b] = colormap(t).map(|v| v.round() as u8);
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Relative luminance (Rec. 709 weights) of an RGB triple.
pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub marker_radius: f64,
    pub segment_width: f64,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 960.0,
            height: 320.0,
            margin: 40.0,
            marker_radius: 3.0,
            segment_width: 3.0,
            title: None,
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the waveform with coloured segments, key-point markers and a
/// colour legend. Pure function of its inputs.
pub fn render_svg(overlay: &Overlay, recon: &[f64], style: &SvgStyle) -> Result<String> {
    if recon.is_empty() {
        return Err(Error::InvalidArgument("cannot render an empty waveform".into()));
    }
    let n = recon.len();
    let beyond = overlay
        .points
        .iter()
        .map(|p| p.0)
        .chain(overlay.segments.iter().map(|s| s.1))
        .find(|&i| i >= n);
    if let Some(i) = beyond {
        return Err(Error::InvalidArgument(format!(
            "overlay index {i} is outside a waveform of {n} samples"
        )));
    }

    let legend_w = 70.0;
    let plot_w = style.width - 2.0 * style.margin - legend_w;
    let plot_h = style.height - 2.0 * style.margin;
    let (lo, hi) = recon
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |i: usize| style.margin + if n > 1 { i as f64 / (n - 1) as f64 * plot_w } else { 0.0 };
    let py = |v: f64| style.margin + (hi - v) / span * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    // Writing to a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.2}" height="{:.2}" viewBox="0 0 {:.2} {:.2}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(w, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    if let Some(title) = &style.title {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14">{}</text>"#,
            style.margin,
            style.margin / 2.0,
            escape(title)
        );
    }

    let _ = write!(
        w,
        r##"<polyline fill="none" stroke="#b0b0b0" stroke-width="1" points=""##
    );
    for (i, &v) in recon.iter().enumerate() {
        if i > 0 {
            w.push(' ');
        }
        let _ = write!(w, "{:.2},{:.2}", px(i), py(v));
    }
    let _ = writeln!(w, r#""/>"#);

    let _ = writeln!(
        w,
        r#"<g stroke-linecap="round" stroke-width="{:.2}">"#,
        style.segment_width
    );
    for &(a, b, wt) in &overlay.segments {
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
            px(a),
            py(recon[a]),
            px(b),
            py(recon[b]),
            color_hex(wt)
        );
    }
    let _ = writeln!(w, "</g>");

    let _ = writeln!(w, r##"<g stroke="#202020" stroke-width="0.5">"##);
    for &(i, wt) in &overlay.points {
        let _ = writeln!(
            w,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
            px(i),
            py(recon[i]),
            style.marker_radius,
            color_hex(wt)
        );
    }
    let _ = writeln!(w, "</g>");

    // Legend: a vertical gradient bar from 0 (bottom) to 1 (top).
    let lx = style.width - style.margin - legend_w + 20.0;
    let _ = writeln!(w, r#"<defs><linearGradient id="attn" x1="0" y1="1" x2="0" y2="0">"#);
    for (k, c) in VIRIDIS.iter().enumerate() {
        let _ = writeln!(
            w,
            r##"<stop offset="{:.2}" stop-color="#{:02x}{:02x}{:02x}"/>"##,
            k as f64 / (VIRIDIS.len() - 1) as f64,
            c[0],
            c[1],
            c[2]
        );
    }
    let _ = writeln!(w, "</linearGradient></defs>");
    let _ = writeln!(
        w,
        r#"<rect x="{:.2}" y="{:.2}" width="12.00" height="{:.2}" fill="url(#attn)"/>"#,
        lx, style.margin, plot_h
    );
    for (label, y) in [("1.00", style.margin + 4.0), ("0.00", style.margin + plot_h)] {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{label}</text>"#,
            lx + 16.0,
            y
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">attention</text>"#,
        lx - 8.0,
        style.margin - 6.0
    );
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}
