//! TSV and JSON output formats.

use anyhow::{anyhow, bail, Context, Result};
use btss_core::analytics::{AuTypeTable, Crosstab, LognormalFit, Summary, ThresholdSummary};
use btss_core::gaze::{GazeAnalysis, GazeDiagnostic, GazeRun};
use btss_core::segmentation::{
    ActivityUnit, FixationPart, KeystrokeBurst, PauseSpan, ProductionUnit, SegmentHierarchy,
};
use btss_core::session::Ms;
use btss_core::states::{HofSpan, Phases, UnitLabel};
use btss_core::styles::{Clustering, StyleFeatureVector, FEATURE_NAMES};
use btss_core::thresholds::{ExclusionReason, ThresholdSet};
use serde::Serialize;

/// Escapes tabs, newlines and backslashes so a value stays in one cell.
pub fn cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub enum ThresholdRow<'a> {
    Derived { session: &'a str, t: &'a ThresholdSet, exclusion: Option<ExclusionReason> },
    Failed { session: &'a str, message: &'a str },
}

pub fn thresholds_tsv(rows: &[ThresholdRow]) -> String {
    let mut out = String::from("session\tkbi_ms\tpub_ms\tkept\treason\n");
    for r in rows {
        match r {
            ThresholdRow::Derived { session, t, exclusion } => out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                cell(session),
                t.kbi_ms,
                t.pub_ms,
                exclusion.is_none(),
                opt(*exclusion)
            )),
            ThresholdRow::Failed { session, message } => {
                out.push_str(&format!("{}\t\t\tfalse\terror: {}\n", cell(session), cell(message)))
            }
        }
    }
    out
}

/// Per-AU table with the worked-example columns plus pattern durations.
pub fn aus_tsv(h: &SegmentHierarchy, g: &GazeAnalysis) -> String {
    let mut out = String::from("AU\tType\tStart\tDur\tIns\tDel\tTGnbr\tFixS\tTrtS\tFixT\tTrtT\tEdit\tKB\tPause\tPU\tDur_L\tDur_R\tDur_S\n");
    for (a, d) in h.aus.iter().zip(&g.per_au) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            a.id,
            a.au_type.code(),
            a.start,
            a.dur,
            a.ins,
            a.del,
            a.tgnbr,
            a.fix_s,
            a.trt_s,
            a.fix_t,
            a.trt_t,
            cell(&a.edit),
            opt(a.kb_id),
            opt(a.pause_id),
            opt(a.pu_id),
            d.linear,
            d.refix,
            d.scattered
        ));
    }
    out
}

#[derive(Serialize)]
pub struct AuRecord<'a> {
    #[serde(flatten)]
    pub au: &'a ActivityUnit,
    pub dur_l: Ms,
    pub dur_r: Ms,
    pub dur_s: Ms,
}

/// The `segments.json` document; `hof`, `units` and `phase` appear once labelled.
#[derive(Serialize)]
pub struct SegmentsDoc<'a> {
    pub session_id: &'a str,
    pub translator: &'a str,
    pub thresholds: &'a ThresholdSet,
    pub start: Ms,
    pub end: Ms,
    pub aus: Vec<AuRecord<'a>>,
    pub kbs: &'a [KeystrokeBurst],
    pub pauses: &'a [PauseSpan],
    pub pus: &'a [ProductionUnit],
    pub fixation_parts: &'a [FixationPart],
    pub gaze_runs: &'a [GazeRun],
    pub gaze_diagnostics: &'a [GazeDiagnostic],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hof: Option<&'a [HofSpan]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<&'a [UnitLabel]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<&'a Phases>,
}

impl<'a> SegmentsDoc<'a> {
    pub fn new(translator: &'a str, h: &'a SegmentHierarchy, g: &'a GazeAnalysis) -> Self {
        SegmentsDoc {
            session_id: &h.session_id,
            translator,
            thresholds: &h.thresholds,
            start: h.start,
            end: h.end,
            aus: h
                .aus
                .iter()
                .zip(&g.per_au)
                .map(|(au, d)| AuRecord { au, dur_l: d.linear, dur_r: d.refix, dur_s: d.scattered })
                .collect(),
            kbs: &h.kbs,
            pauses: &h.pauses,
            pus: &h.pus,
            fixation_parts: &h.fixation_parts,
            gaze_runs: &g.runs,
            gaze_diagnostics: &g.diagnostics,
            hof: None,
            units: None,
            phase: None,
        }
    }
}

pub fn features_tsv(vectors: &[StyleFeatureVector]) -> String {
    let mut out = String::from("session\ttranslator\tdegenerate");
    for n in FEATURE_NAMES {
        out.push_str(&format!("\trel_{n}"));
    }
    out.push('\n');
    for v in vectors {
        out.push_str(&format!("{}\t{}\t{}", cell(&v.session_id), cell(&v.translator), v.degenerate));
        for x in v.rel_icv {
            out.push_str(&format!("\t{x}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features_tsv(text: &str) -> Result<Vec<StyleFeatureVector>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| anyhow!("feature table is empty"))?;
    let expected = features_tsv(&[]);
    if header.trim_end() != expected.trim_end() {
        bail!("feature table header must be {:?}", expected.trim_end());
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if f.len() != 8 {
            bail!("line {}: expected 8 columns, got {}", i + 1, f.len());
        }
        let mut rel = [0.0f64; 5];
        for (j, x) in rel.iter_mut().enumerate() {
            *x = f[3 + j].parse().with_context(|| format!("line {}: bad number {:?}", i + 1, f[3 + j]))?;
            if !(*x > 0.0 && x.is_finite()) {
                bail!("line {}: feature {} must be positive", i + 1, FEATURE_NAMES[j]);
            }
        }
        out.push(StyleFeatureVector {
            session_id: f[0].to_string(),
            translator: f[1].to_string(),
            degenerate: f[2].parse().with_context(|| format!("line {}: degenerate must be true or false", i + 1))?,
            rel_icv: rel,
        });
    }
    if out.is_empty() {
        bail!("feature table has no rows");
    }
    Ok(out)
}

pub fn styles_tsv(c: &Clustering) -> String {
    let mut out = String::from("session\ttranslator\tcluster\tlabel\n");
    for a in &c.assignments {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", cell(&a.session_id), cell(&a.translator), a.cluster, opt(a.label)));
    }
    out
}

pub fn centroids_tsv(c: &Clustering) -> String {
    let mut out = String::from("cluster\tlabel\ttranslators");
    for n in FEATURE_NAMES {
        out.push_str(&format!("\trel_{n}"));
    }
    out.push('\n');
    for (i, centroid) in c.centroids.iter().enumerate() {
        let members = c.translator_cluster.values().filter(|&&k| k == i).count();
        let label = c.labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
        out.push_str(&format!("{i}\t{label}\t{members}"));
        for x in centroid {
            out.push_str(&format!("\t{x}"));
        }
        out.push('\n');
    }
    out
}

pub fn au_types_tsv(t: &AuTypeTable) -> String {
    let mut out = String::from(
        "type\tcount\toccur_pct\tmean_dur\trel_dur_l\trel_dur_r\trel_dur_s\trel_dur_other\tmean_ins\tmean_del\tmean_tgnbr\tms_per_keystroke\n",
    );
    for r in &t.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.au_type.code(),
            r.count,
            r.occur_pct,
            r.mean_dur,
            r.rel_dur_l,
            r.rel_dur_r,
            r.rel_dur_s,
            r.rel_dur_other,
            r.mean_ins,
            r.mean_del,
            r.mean_tgnbr,
            opt(r.ms_per_keystroke)
        ));
    }
    out
}

/// Human-readable AU type table, percentages as whole numbers.
pub fn au_types_text(t: &AuTypeTable) -> String {
    let mut out = format!("{:<5}{:>7}{:>9}{:>6}{:>6}{:>6}{:>7}{:>7}{:>7}\n", "Type", "Occur", "Dur", "L", "R", "S", "Ins", "Del", "TGnbr");
    for r in &t.rows {
        out.push_str(&format!(
            "{:<5}{:>6}%{:>9.0}{:>5}%{:>5}%{:>5}%{:>7.1}{:>7.1}{:>7.1}\n",
            r.au_type.code(),
            r.occur_pct.round(),
            r.mean_dur,
            r.rel_dur_l.round(),
            r.rel_dur_r.round(),
            r.rel_dur_s.round(),
            r.mean_ins,
            r.mean_del,
            r.mean_tgnbr
        ));
    }
    out.push_str(&format!("{} AUs\n", t.total_aus));
    out
}

pub fn thresholds_summary_tsv(s: &ThresholdSummary) -> String {
    let mut out = String::from("measure\tn\tmean\tmin\tmedian\tmax\tstd\n");
    let row = |name: &str, x: &Summary| format!("{name}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.n, x.mean, x.min, x.median, x.max, x.std);
    out.push_str(&row("kbi_ms", &s.kbi));
    out.push_str(&row("pub_ms", &s.pub_));
    out.push_str(&row("log_kbi", &s.log_kbi));
    out.push_str(&row("log_pub", &s.log_pub));
    out
}

pub fn correlation_tsv(n: usize, r: Option<f64>) -> String {
    format!("x\ty\tn\tr\nlog_kbi\tlog_pub\t{n}\t{}\n", opt(r))
}

pub fn crosstabs_tsv(tables: &[(&str, &Crosstab)]) -> String {
    let mut out = String::from("table\trow\tcolumn\tcount\tproportion\ttotal_dur\tmean_dur\n");
    for (name, t) in tables {
        let p = t.proportions();
        for (i, row) in t.rows.iter().enumerate() {
            for (j, col) in t.columns.iter().enumerate() {
                let c = &t.cells[i][j];
                let total: i64 = c.durations.iter().sum();
                let mean = if c.count > 0 { Some(total as f64 / c.count as f64) } else { None };
                out.push_str(&format!("{name}\t{row}\t{col}\t{}\t{}\t{total}\t{}\n", c.count, p[i][j], opt(mean)));
            }
        }
    }
    out
}

pub struct FitRow {
    pub scope: String,
    pub subject: String,
    pub fit: std::result::Result<LognormalFit, String>,
}

pub fn fits_tsv(rows: &[FitRow]) -> String {
    let mut out = String::from("scope\tsubject\tn\tmu\tsigma\tsigma_floored\tnote\n");
    for r in rows {
        match &r.fit {
            Ok(f) => out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t\n",
                cell(&r.scope),
                cell(&r.subject),
                f.n,
                f.mu,
                f.sigma,
                f.sigma_floored
            )),
            Err(e) => out.push_str(&format!("{}\t{}\t\t\t\t\t{}\n", cell(&r.scope), cell(&r.subject), cell(e))),
        }
    }
    out
}
