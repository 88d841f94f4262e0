//! Corpus-level statistics: AU type table, threshold summary, correlation,
//! lognormal fits and HOF cross-tabulations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::GazeAnalysis;
use crate::segmentation::{AuType, SegmentHierarchy};
use crate::states::{HofSpan, HofState, PhaseKind, Phases};
use crate::stats::{mean, median, sample_std};
use crate::thresholds::ThresholdSet;

// ---------------------------------------------------------------------------
// AU type table
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct TypeSums {
    count: u64,
    dur: f64,
    rel_l: f64,
    rel_r: f64,
    rel_s: f64,
    ins: f64,
    del: f64,
    tgnbr: f64,
}

/// Mergeable per-type sums; fold sessions in any grouping and merge.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuTypeAccumulator {
    sums: [TypeSums; 6],
}

fn type_slot(t: AuType) -> usize {
    AuType::ALL.iter().position(|&x| x == t).expect("known type")
}

impl AuTypeAccumulator {
    pub fn add(&mut self, h: &SegmentHierarchy, gaze: &GazeAnalysis) {
        for (i, au) in h.aus.iter().enumerate() {
            let s = &mut self.sums[type_slot(au.au_type)];
            let d = gaze.per_au.get(i).copied().unwrap_or_default();
            let dur = au.dur as f64;
            s.count += 1;
            s.dur += dur;
            if dur > 0.0 {
                s.rel_l += d.linear as f64 / dur;
                s.rel_r += d.refix as f64 / dur;
                s.rel_s += d.scattered as f64 / dur;
            }
            s.ins += au.ins as f64;
            s.del += au.del as f64;
            s.tgnbr += au.tgnbr as f64;
        }
    }

    pub fn merge(mut self, other: &AuTypeAccumulator) -> AuTypeAccumulator {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.count += b.count;
            a.dur += b.dur;
            a.rel_l += b.rel_l;
            a.rel_r += b.rel_r;
            a.rel_s += b.rel_s;
            a.ins += b.ins;
            a.del += b.del;
            a.tgnbr += b.tgnbr;
        }
        self
    }

    pub fn table(&self) -> AuTypeTable {
        let total: u64 = self.sums.iter().map(|s| s.count).sum();
        let rows = AuType::ALL
            .iter()
            .zip(&self.sums)
            .map(|(&au_type, s)| {
                let n = s.count as f64;
                let avg = |x: f64| if s.count > 0 { x / n } else { 0.0 };
                let (l, r, sc) = (avg(s.rel_l) * 100.0, avg(s.rel_r) * 100.0, avg(s.rel_s) * 100.0);
                let keystrokes = s.ins + s.del;
                AuTypeRow {
                    au_type,
                    count: s.count,
                    occur_pct: if total > 0 { 100.0 * n / total as f64 } else { 0.0 },
                    mean_dur: avg(s.dur),
                    rel_dur_l: l,
                    rel_dur_r: r,
                    rel_dur_s: sc,
                    rel_dur_other: if s.count > 0 { (100.0 - l - r - sc).max(0.0) } else { 0.0 },
                    mean_ins: avg(s.ins),
                    mean_del: avg(s.del),
                    mean_tgnbr: avg(s.tgnbr),
                    ms_per_keystroke: (keystrokes > 0.0).then(|| s.dur / keystrokes),
                }
            })
            .collect();
        AuTypeTable { total_aus: total, rows }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuTypeRow {
    pub au_type: AuType,
    pub count: u64,
    pub occur_pct: f64,
    pub mean_dur: f64,
    pub rel_dur_l: f64,
    pub rel_dur_r: f64,
    pub rel_dur_s: f64,
    pub rel_dur_other: f64,
    pub mean_ins: f64,
    pub mean_del: f64,
    pub mean_tgnbr: f64,
    /// Total duration over total keystrokes; `None` for types without typing.
    pub ms_per_keystroke: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuTypeTable {
    pub total_aus: u64,
    pub rows: Vec<AuTypeRow>,
}

impl AuTypeTable {
    pub fn row(&self, t: AuType) -> &AuTypeRow {
        &self.rows[type_slot(t)]
    }
}

pub fn au_type_table<'a>(items: impl IntoIterator<Item = (&'a SegmentHierarchy, &'a GazeAnalysis)>) -> AuTypeTable {
    let mut acc = AuTypeAccumulator::default();
    for (h, g) in items {
        acc.add(h, g);
    }
    acc.table()
}

// ---------------------------------------------------------------------------
// Threshold summary, correlation, lognormal fits
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    Ok(Summary {
        mean: mean(values).unwrap(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        median: median(values).unwrap(),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std: sample_std(values).unwrap(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub n: usize,
    pub kbi: Summary,
    pub pub_: Summary,
    pub log_kbi: Summary,
    pub log_pub: Summary,
}

pub fn threshold_summary(sets: &[ThresholdSet]) -> Result<ThresholdSummary> {
    let kbi: Vec<f64> = sets.iter().map(|t| t.kbi_ms).collect();
    let pub_: Vec<f64> = sets.iter().map(|t| t.pub_ms).collect();
    let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    Ok(ThresholdSummary {
        n: sets.len(),
        kbi: summarize(&kbi)?,
        pub_: summarize(&pub_)?,
        log_kbi: summarize(&ln(&kbi))?,
        log_pub: summarize(&ln(&pub_))?,
    })
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x).unwrap(), mean(y).unwrap());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Smallest sigma reported by a fit; identical samples hit it.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    pub sigma_floored: bool,
}

impl LognormalFit {
    pub fn distribution(&self) -> crate::stats::Lognormal {
        crate::stats::Lognormal::new(self.mu, self.sigma)
    }
}

pub fn fit_lognormal(durs: &[f64]) -> Result<LognormalFit> {
    if let Some(&bad) = durs.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::NonPositiveDuration(bad));
    }
    if durs.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: durs.len() });
    }
    let logs: Vec<f64> = durs.iter().map(|d| d.ln()).collect();
    let sigma = sample_std(&logs).unwrap();
    Ok(LognormalFit {
        mu: mean(&logs).unwrap(),
        sigma: sigma.max(SIGMA_FLOOR),
        n: durs.len(),
        sigma_floored: sigma < SIGMA_FLOOR,
    })
}

// ---------------------------------------------------------------------------
// Cross-tabulations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub count: u64,
    pub durations: Vec<i64>,
}

/// Counts with a row label per state and one column per category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crosstab {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
}

impl Crosstab {
    fn new(rows: Vec<String>, columns: Vec<String>) -> Self {
        let cells = vec![vec![Cell::default(); columns.len()]; rows.len()];
        Crosstab { rows, columns, cells }
    }

    fn add(&mut self, r: usize, c: usize, dur: i64) {
        self.cells[r][c].count += 1;
        self.cells[r][c].durations.push(dur);
    }

    pub fn merge(mut self, other: &Crosstab) -> Crosstab {
        for (ra, rb) in self.cells.iter_mut().zip(&other.cells) {
            for (a, b) in ra.iter_mut().zip(rb) {
                a.count += b.count;
                a.durations.extend_from_slice(&b.durations);
            }
        }
        self
    }

    /// Row-normalised proportions; empty rows stay all zero.
    pub fn proportions(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|row| {
                let total: u64 = row.iter().map(|c| c.count).sum();
                row.iter().map(|c| if total > 0 { c.count as f64 / total as f64 } else { 0.0 }).collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crosstabs {
    /// HOF state rows, AU type columns.
    pub hof_au: Crosstab,
    /// Phase rows, HOF state columns.
    pub phase_hof: Crosstab,
}

impl Crosstabs {
    pub fn empty() -> Self {
        Crosstabs {
            hof_au: Crosstab::new(
                HofState::ALL.iter().map(|s| s.to_string()).collect(),
                AuType::ALL.iter().map(|t| t.to_string()).collect(),
            ),
            phase_hof: Crosstab::new(
                PhaseKind::ALL.iter().map(|p| format!("{p:?}")).collect(),
                HofState::ALL.iter().map(|s| s.to_string()).collect(),
            ),
        }
    }

    pub fn merge(self, other: &Crosstabs) -> Crosstabs {
        Crosstabs { hof_au: self.hof_au.merge(&other.hof_au), phase_hof: self.phase_hof.merge(&other.phase_hof) }
    }
}

/// Counts AUs by the HOF span and phase containing their start.
pub fn crosstab(h: &SegmentHierarchy, spans: &[HofSpan], phases: &Phases) -> Crosstabs {
    let mut out = Crosstabs::empty();
    let mut si = 0;
    for au in &h.aus {
        while si + 1 < spans.len() && spans[si].end() <= au.start {
            si += 1;
        }
        let Some(span) = spans.get(si) else { break };
        let state = span.state.index();
        out.hof_au.add(state, type_slot(au.au_type), au.dur);
        let phase = PhaseKind::ALL.iter().position(|&k| k == phases.at(au.start)).unwrap();
        out.phase_hof.add(phase, state, au.dur);
    }
    out
}
