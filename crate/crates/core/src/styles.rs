//! Translator style features and must-link constrained k-means.
//!
//! Each session is summarised by the spread of its typing AUs (insertions,
//! deletions, duration) and by its KBI/PUB thresholds. Features are turned
//! into relative inverse coefficients of variation and clustered per
//! translator, so all sessions of one translator share a cluster.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::SegmentHierarchy;
use crate::stats::Moments;

pub const FEATURE_NAMES: [&str; 5] = ["ins", "del", "dur", "kbi", "pub"];

/// Relative std floor, as a fraction of the population mean.
pub const STD_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub session_id: String,
    pub translator: String,
    pub ins: Moments,
    pub del: Moments,
    pub dur: Moments,
    pub kbi_ms: f64,
    pub pub_ms: f64,
    /// Fewer than two typing AUs: the spread features are not meaningful.
    pub degenerate: bool,
}

impl SessionFeatures {
    fn au_moments(&self) -> [Moments; 3] {
        [self.ins, self.del, self.dur]
    }
}

pub fn session_features(translator: &str, h: &SegmentHierarchy) -> SessionFeatures {
    let typing: Vec<_> = h.aus.iter().filter(|a| a.au_type.is_typing()).collect();
    let m = |f: &dyn Fn(&crate::segmentation::ActivityUnit) -> f64| {
        Moments::from_values(&typing.iter().map(|a| f(a)).collect::<Vec<_>>())
    };
    SessionFeatures {
        session_id: h.session_id.clone(),
        translator: translator.to_string(),
        ins: m(&|a| a.ins as f64),
        del: m(&|a| a.del as f64),
        dur: m(&|a| a.dur as f64),
        kbi_ms: h.thresholds.kbi_ms,
        pub_ms: h.thresholds.pub_ms,
        degenerate: typing.len() < 2,
    }
}

/// Pooled AU-level moments and threshold means over a set of sessions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub ins: Moments,
    pub del: Moments,
    pub dur: Moments,
    pub kbi_mean: f64,
    pub pub_mean: f64,
    pub sessions: usize,
}

pub fn population_stats(features: &[SessionFeatures]) -> Result<PopulationStats> {
    if features.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let mut p = PopulationStats { sessions: features.len(), ..Default::default() };
    for f in features {
        p.ins = p.ins.merge(&f.ins);
        p.del = p.del.merge(&f.del);
        p.dur = p.dur.merge(&f.dur);
    }
    let n = features.len() as f64;
    p.kbi_mean = features.iter().map(|f| f.kbi_ms).sum::<f64>() / n;
    p.pub_mean = features.iter().map(|f| f.pub_ms).sum::<f64>() / n;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleFeatureVector {
    pub session_id: String,
    pub translator: String,
    pub rel_icv: [f64; 5],
    pub degenerate: bool,
}

fn floor_for(reference: f64) -> f64 {
    if reference.abs() > 0.0 {
        STD_FLOOR * reference.abs()
    } else {
        STD_FLOOR
    }
}

/// mean / std with both floored relative to the population mean.
pub fn icv(m: &Moments, population_mean: f64) -> f64 {
    let floor = floor_for(population_mean);
    m.mean.abs().max(floor) / m.std().max(floor)
}

pub fn relative_icv(f: &SessionFeatures, pop: &PopulationStats) -> StyleFeatureVector {
    let pops = [pop.ins, pop.del, pop.dur];
    let mut rel = [0.0; 5];
    for (i, (m, p)) in f.au_moments().iter().zip(pops.iter()).enumerate() {
        rel[i] = icv(m, p.mean) / icv(p, p.mean);
    }
    rel[3] = f.kbi_ms / pop.kbi_mean.max(floor_for(pop.kbi_mean));
    rel[4] = f.pub_ms / pop.pub_mean.max(floor_for(pop.pub_mean));
    StyleFeatureVector { session_id: f.session_id.clone(), translator: f.translator.clone(), rel_icv: rel, degenerate: f.degenerate }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Rapid,
    Deliberate,
    Confident,
    Balanced,
    Cautious,
}

impl Style {
    pub const ALL: [Style; 5] = [Style::Rapid, Style::Deliberate, Style::Confident, Style::Balanced, Style::Cautious];

    pub fn name(self) -> &'static str {
        match self {
            Style::Rapid => "rapid",
            Style::Deliberate => "deliberate",
            Style::Confident => "confident",
            Style::Balanced => "balanced",
            Style::Cautious => "cautious",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { k: 5, seed: 0, n_init: 10, max_iter: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleAssignment {
    pub session_id: String,
    pub translator: String,
    pub cluster: usize,
    pub label: Option<Style>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignments: Vec<StyleAssignment>,
    /// Centroids in relative-ICV units (geometric means of member translators).
    pub centroids: Vec<[f64; 5]>,
    pub labels: Option<Vec<Style>>,
    pub translator_cluster: BTreeMap<String, usize>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

fn dist2(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64; 5], centroids: &[[f64; 5]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &[[f64; 5]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 5]> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            d.iter().position(|&w| {
                u -= w;
                u < 0.0
            })
            .unwrap_or(points.len() - 1)
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[pick]);
    }
    centroids
}

/// Lloyd iterations; returns (assignment, centroids, inertia trace).
fn lloyd(points: &[[f64; 5]], mut centroids: Vec<[f64; 5]>, max_iter: usize) -> (Vec<usize>, Vec<[f64; 5]>, Vec<f64>) {
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            inertia += d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 5]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for j in 0..5 {
                sums[c][j] += p[j];
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] > 0 {
                *centroid = sums[c].map(|s| s / counts[c] as f64);
            }
        }
    }
    (assign, centroids, trace)
}

/// Assignments, centroids, final inertia and the inertia after each iteration.
pub type KMeansFit = (Vec<usize>, Vec<[f64; 5]>, f64, Vec<f64>);

/// K-means with k-means++ seeding and `n_init` restarts, keeping the lowest inertia.
pub fn kmeans(points: &[[f64; 5]], opts: &KMeansOptions) -> Result<KMeansFit> {
    if opts.k == 0 || opts.k > points.len() {
        return Err(Error::TooFewTranslators { k: opts.k, translators: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..opts.n_init.max(1) {
        let seeds = plus_plus_seeds(points, opts.k, &mut rng);
        let (assign, centroids, trace) = lloyd(points, seeds, opts.max_iter.max(1));
        let inertia: f64 = points.iter().zip(&assign).map(|(p, &c)| dist2(p, &centroids[c])).sum();
        if best.as_ref().is_none_or(|b| inertia < b.2) {
            best = Some((assign, centroids, inertia, trace));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn log_vector(v: &[f64; 5]) -> [f64; 5] {
    v.map(|x| x.max(f64::MIN_POSITIVE).ln())
}

/// Clusters translators (mean log relative-ICV vectors of their sessions)
/// and propagates the cluster to every session.
pub fn constrained_kmeans(vectors: &[StyleFeatureVector], opts: &KMeansOptions) -> Result<Clustering> {
    let mut by_translator: BTreeMap<&str, Vec<&StyleFeatureVector>> = BTreeMap::new();
    for v in vectors {
        by_translator.entry(v.translator.as_str()).or_default().push(v);
    }
    let names: Vec<&str> = by_translator.keys().copied().collect();
    let points: Vec<[f64; 5]> = by_translator
        .values()
        .map(|vs| {
            // degenerate sessions only count when a translator has nothing else
            let usable: Vec<&&StyleFeatureVector> = vs.iter().filter(|v| !v.degenerate).collect();
            let chosen: Vec<&StyleFeatureVector> =
                if usable.is_empty() { vs.clone() } else { usable.into_iter().copied().collect() };
            let mut acc = [0.0; 5];
            for v in &chosen {
                let l = log_vector(&v.rel_icv);
                for j in 0..5 {
                    acc[j] += l[j];
                }
            }
            acc.map(|s| s / chosen.len() as f64)
        })
        .collect();

    let (assign, centroids, inertia, inertia_trace) = kmeans(&points, opts)?;
    let translator_cluster: BTreeMap<String, usize> =
        names.iter().zip(&assign).map(|(n, &c)| (n.to_string(), c)).collect();
    let labels = (opts.k == 5).then(|| interpret_styles(&centroids));
    let assignments = vectors
        .iter()
        .map(|v| {
            let cluster = translator_cluster[&v.translator];
            StyleAssignment {
                session_id: v.session_id.clone(),
                translator: v.translator.clone(),
                cluster,
                label: labels.as_ref().map(|l| l[cluster]),
            }
        })
        .collect();
    Ok(Clustering {
        assignments,
        centroids: centroids.iter().map(|c| c.map(f64::exp)).collect(),
        labels,
        translator_cluster,
        inertia,
        inertia_trace,
    })
}

/// Names five centroids by profile. Coordinates are z-scored across the
/// centroids; labels are handed out greedily, cautious first, then
/// confident, deliberate, rapid, and the remaining centroid is balanced.
pub fn interpret_styles(centroids: &[[f64; 5]]) -> Vec<Style> {
    assert_eq!(centroids.len(), 5, "style interpretation needs five centroids");
    let n = centroids.len() as f64;
    let mut z = vec![[0.0; 5]; centroids.len()];
    for j in 0..5 {
        let mean = centroids.iter().map(|c| c[j]).sum::<f64>() / n;
        let sd = (centroids.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for (i, c) in centroids.iter().enumerate() {
            z[i][j] = if sd > 0.0 { (c[j] - mean) / sd } else { 0.0 };
        }
    }
    let (ins, del, dur, kbi, pubf) = (0, 1, 2, 3, 4);
    let mut labels: Vec<Option<Style>> = vec![None; centroids.len()];
    let pick = |score: &dyn Fn(&[f64; 5]) -> f64, maximise: bool, style: Style, labels: &mut Vec<Option<Style>>| {
        let mut best: Option<(usize, f64)> = None;
        for (i, zi) in z.iter().enumerate() {
            if labels[i].is_some() {
                continue;
            }
            let s = if maximise { score(zi) } else { -score(zi) };
            if best.is_none_or(|b| s > b.1) {
                best = Some((i, s));
            }
        }
        if let Some((i, _)) = best {
            labels[i] = Some(style);
        }
    };
    pick(&|c| c[del], true, Style::Cautious, &mut labels);
    pick(&|c| c[del], false, Style::Confident, &mut labels);
    pick(&|c| c[ins] + c[pubf], true, Style::Deliberate, &mut labels);
    pick(&|c| c[ins] + c[dur] + c[kbi], false, Style::Rapid, &mut labels);
    pick(&|_| 0.0, true, Style::Balanced, &mut labels);
    labels.into_iter().map(|l| l.expect("five labels for five centroids")).collect()
}
