//! Browser bindings for the static demo in `www/`.
//!
//! Every export returns a JSON string; the page does the DOM work. The
//! plain functions are usable (and tested) off the browser too.

use btss_core::analytics::au_type_table;
use btss_core::gaze::{classify_gaze, label_chain, GazeGeometry};
use btss_core::progression::{export_progression, render_svg};
use btss_core::segmentation::{segment_with_thresholds, SegmentOptions};
use btss_core::session::{parse_session_str, serialize_session, Session};
use btss_core::simulator::{simulate_session, CalibrationOptions, GeneratorParams};
use btss_core::states::{block_states, label_units, merge_spans, occupancy, HofRules};
use btss_core::thresholds::{derive_thresholds, IkiOptions, ThresholdSet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct AuRow {
    au_type: u8,
    start: i64,
    dur: i64,
    ins: usize,
    del: usize,
    edit: String,
    dur_l: i64,
    dur_r: i64,
    dur_s: i64,
}

#[derive(Serialize)]
struct View {
    session_id: String,
    kbi_ms: f64,
    pub_ms: f64,
    derived: bool,
    au_count: usize,
    kb_count: usize,
    pu_count: usize,
    /// Share of production units in H, O, F.
    occupancy: [f64; 3],
    /// Occurrence percentage per AU type 1, 2, 4, 5, 6, 8.
    type_pct: Vec<(u8, f64)>,
    aus: Vec<AuRow>,
    svg: String,
    tsv: String,
}

fn view(s: &Session, fixed: Option<(f64, f64)>, include_tsv: bool) -> Result<View, String> {
    let t = match fixed {
        Some((k, p)) if k > 0.0 && p > k => ThresholdSet::fixed(k, p),
        Some((k, p)) => return Err(format!("need 0 < KBI < PUB, got {k} and {p}")),
        None => derive_thresholds(s, IkiOptions::default()).map_err(|e| e.to_string())?,
    };
    let h = segment_with_thresholds(s, &t, &SegmentOptions::default()).map_err(|e| e.to_string())?;
    let g = classify_gaze(s, &h, &GazeGeometry::default());
    let labels = label_units(&h, &g, &HofRules::default());
    let spans = merge_spans(&labels);
    let doc = export_progression(s, &h, Some(&spans), (h.start, h.end));
    let table = au_type_table([(&h, &g)]);
    Ok(View {
        session_id: s.id.clone(),
        kbi_ms: t.kbi_ms,
        pub_ms: t.pub_ms,
        derived: fixed.is_none(),
        au_count: h.aus.len(),
        kb_count: h.kbs.len(),
        pu_count: h.pus.len(),
        occupancy: occupancy(&block_states(&labels)),
        type_pct: table.rows.iter().map(|r| (r.au_type.code(), r.occur_pct)).collect(),
        aus: h
            .aus
            .iter()
            .zip(&g.per_au)
            .map(|(a, d)| AuRow {
                au_type: a.au_type.code(),
                start: a.start,
                dur: a.dur,
                ins: a.ins,
                del: a.del,
                edit: a.edit.clone(),
                dur_l: d.linear,
                dur_r: d.refix,
                dur_s: d.scattered,
            })
            .collect(),
        svg: render_svg(&doc),
        tsv: if include_tsv { serialize_session(s) } else { String::new() },
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()))
}

/// Generates a session from thresholds, then segments it with the same thresholds.
pub fn simulate_view(kbi_ms: f64, pub_ms: f64, steps: usize, seed: u64) -> Result<String, String> {
    if !(kbi_ms > 0.0 && pub_ms > kbi_ms) {
        return Err(format!("need 0 < KBI < PUB, got {kbi_ms} and {pub_ms}"));
    }
    let p = GeneratorParams::calibrated(kbi_ms, pub_ms, &CalibrationOptions::default());
    let sim = simulate_session(&p, steps.clamp(1, 400), seed).map_err(|e| e.to_string())?;
    view(&sim.session, Some((kbi_ms, pub_ms)), true).map(|v| to_json(&v))
}

/// Segments a pasted session; thresholds are derived unless both are given.
pub fn segment_view(text: &str, kbi_ms: Option<f64>, pub_ms: Option<f64>) -> Result<String, String> {
    let s = parse_session_str(text, "pasted").map_err(|e| e.to_string())?;
    let fixed = kbi_ms.zip(pub_ms);
    view(&s, fixed, false).map(|v| to_json(&v))
}

/// Labels a chain of fixation points given as flat `[x0, y0, x1, y1, ...]`.
pub fn chain_labels(flat: &[f64], line_tol: f64, same_pos_radius: f64) -> Vec<String> {
    let geo = GazeGeometry { line_tol, same_pos_radius, ..Default::default() };
    let points: Vec<(f64, f64)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    label_chain(&points, &geo).iter().map(|l| format!("{l:?}")).collect()
}

#[wasm_bindgen]
pub fn simulate(kbi_ms: f64, pub_ms: f64, steps: u32, seed: u32) -> Result<String, JsError> {
    simulate_view(kbi_ms, pub_ms, steps as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn segment(text: &str, kbi_ms: Option<f64>, pub_ms: Option<f64>) -> Result<String, JsError> {
    segment_view(text, kbi_ms, pub_ms).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gaze_chain(flat: Vec<f64>, line_tol: f64, same_pos_radius: f64) -> String {
    to_json(&chain_labels(&flat, line_tol, same_pos_radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulated_view_round_trips_through_paste() {
        let out: serde_json::Value = serde_json::from_str(&simulate_view(374.0, 891.0, 20, 3).unwrap()).unwrap();
        assert!(out["svg"].as_str().unwrap().starts_with("<svg"));
        let tsv = out["tsv"].as_str().unwrap();
        let again: serde_json::Value = serde_json::from_str(&segment_view(tsv, Some(374.0), Some(891.0)).unwrap()).unwrap();
        assert_eq!(out["aus"], again["aus"]);
        assert_eq!(out["pu_count"], again["pu_count"]);
    }

    #[test]
    fn bad_input_is_an_error_not_a_panic() {
        assert!(segment_view("not a session", None, None).is_err());
        assert!(simulate_view(900.0, 300.0, 5, 1).is_err());
        assert!(segment_view("", Some(1.0), Some(2.0)).is_err());
    }

    #[test]
    fn chain_labels_one_per_point() {
        let labels = chain_labels(&[0.0, 0.0, 60.0, 0.0, 120.0, 2.0, 900.0, 400.0], 40.0, 30.0);
        assert_eq!(labels.len(), 4);
        assert_eq!(labels[1], "Linear");
        assert!(chain_labels(&[1.0], 40.0, 30.0).is_empty());
    }
}
