use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use btss_core::analytics::{au_type_table, crosstab, fit_lognormal, pearson_r, threshold_summary, Crosstabs};
use btss_core::config::RunConfig;
use btss_core::progression::{export_progression, render_svg};
use btss_core::segmentation::AuType;
use btss_core::session::serialize_session;
use btss_core::simulator::{
    fit_generator_params, plan_corpus, simulate_planned, simulate_session, CalibrationOptions, CorpusSpec,
    GeneratorParams, LabelledSession,
};
use btss_core::styles::{constrained_kmeans, population_stats, relative_icv, session_features, Clustering, StyleFeatureVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{ClusterArgs, Common, IoArgs, RenderArgs, SegmentArgs, SimulateArgs};
use crate::io::{par_map, seed_from_env, write_json, write_text};
use crate::process::{file_id, fixed_thresholds, load_all, process_all, Failure, Processed};
use crate::tables::{
    au_types_text, au_types_tsv, aus_tsv, centroids_tsv, correlation_tsv, crosstabs_tsv, features_tsv, fits_tsv,
    parse_features_tsv, styles_tsv, thresholds_summary_tsv, thresholds_tsv, FitRow, SegmentsDoc, ThresholdRow,
};

/// Outcome of a subcommand: `Ok(false)` when some sessions failed validation.
pub type Outcome = Result<bool>;

pub struct Resolved {
    pub config: RunConfig,
    pub jobs: usize,
}

pub fn resolve(common: &Common) -> Result<Resolved> {
    let (mut config, keys) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            RunConfig::parse_with_keys(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))?
        }
        None => (RunConfig::default(), Vec::new()),
    };
    if common.no_filter {
        config.apply_filter = false;
    }
    // flag, then the config file, then the environment
    if let Some(seed) = common.seed {
        config.kmeans.seed = seed;
    } else if !keys.iter().any(|k| k == "seed") {
        if let Some(seed) = seed_from_env()? {
            config.kmeans.seed = seed;
        }
    }
    if common.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(Resolved { config, jobs: common.jobs })
}

fn report(failures: &[Failure]) {
    for f in failures {
        eprintln!("error: {}", f.report());
    }
}

fn single_or_dir(input: &Path, out: &Path, id: &str, name: &str) -> PathBuf {
    if input.is_file() {
        out.join(name)
    } else {
        out.join(file_id(id)).join(name)
    }
}

pub fn ingest(a: &IoArgs) -> Outcome {
    let r = resolve(&a.common)?;
    let (loaded, failed) = load_all(&a.input, r.jobs)?;
    report(&failed);
    let mut summary = String::from("session\tfile\tkeys\tfixations\tstatus\n");
    for l in &loaded {
        write_text(&a.out.join(format!("{}.tsv", file_id(&l.session.id))), &serialize_session(&l.session))?;
        let file = l.path.file_name().map(|f| f.to_string_lossy().to_string()).unwrap_or_default();
        summary.push_str(&format!("{}\t{}\t{}\t{}\tok\n", l.session.id, file, l.session.keys.len(), l.session.fixes.len()));
    }
    for f in &failed {
        let file = f.path.file_name().map(|f| f.to_string_lossy().to_string()).unwrap_or_default();
        summary.push_str(&format!("{}\t{}\t\t\terror: {}\n", f.session_id, file, crate::tables::cell(&f.message)));
    }
    write_text(&a.out.join("ingest.tsv"), &summary)?;
    Ok(failed.is_empty())
}

pub fn thresholds(a: &IoArgs) -> Outcome {
    let r = resolve(&a.common)?;
    let (loaded, mut failed) = load_all(&a.input, r.jobs)?;
    let results = par_map(r.jobs, &loaded, |l| btss_core::thresholds::derive_thresholds(&l.session, r.config.segment.iki))?;
    let mut rows = Vec::new();
    let mut owned: Vec<(String, Result<btss_core::ThresholdSet, String>)> = Vec::new();
    for (l, t) in loaded.iter().zip(results) {
        if let Err(e) = &t {
            failed.push(Failure { path: l.path.clone(), session_id: l.session.id.clone(), message: e.to_string() });
        }
        owned.push((l.session.id.clone(), t.map_err(|e| e.to_string())));
    }
    for f in &failed {
        if !owned.iter().any(|(id, _)| id == &f.session_id) {
            owned.push((f.session_id.clone(), Err(f.message.clone())));
        }
    }
    owned.sort_by(|a, b| a.0.cmp(&b.0));
    for (id, t) in &owned {
        rows.push(match t {
            Ok(t) => ThresholdRow::Derived {
                session: id,
                t,
                exclusion: if r.config.apply_filter { r.config.filter.check(t) } else { None },
            },
            Err(m) => ThresholdRow::Failed { session: id, message: m },
        });
    }
    report(&failed);
    write_text(&a.out.join("thresholds.tsv"), &thresholds_tsv(&rows))?;
    Ok(failed.is_empty())
}

fn write_segments(p: &Processed, path: &Path, labelled: bool) -> Result<()> {
    let mut doc = SegmentsDoc::new(&p.session.translator, &p.hierarchy, &p.gaze);
    if labelled {
        doc.hof = Some(&p.spans);
        doc.units = Some(&p.labels);
        doc.phase = Some(&p.phases);
    }
    write_json(path, &doc)?;
    write_text(&path.with_file_name(path.file_name().unwrap().to_string_lossy().replace("segments.json", "aus.tsv")), &aus_tsv(&p.hierarchy, &p.gaze))
}

fn segment_like(a: &SegmentArgs, labelled: bool) -> Outcome {
    let r = resolve(&a.io.common)?;
    let fixed = fixed_thresholds(a.kbi, a.pub_ms)?;
    let (loaded, mut failed) = load_all(&a.io.input, r.jobs)?;
    let (processed, f2) = process_all(&loaded, &r.config, fixed, r.jobs)?;
    failed.extend(f2);
    report(&failed);
    let written = par_map(r.jobs, &processed, |p| {
        write_segments(p, &single_or_dir(&a.io.input, &a.io.out, &p.session.id, "segments.json"), labelled)
    })?;
    written.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(failed.is_empty())
}

pub fn segment(a: &SegmentArgs) -> Outcome {
    segment_like(a, false)
}

pub fn label(a: &SegmentArgs) -> Outcome {
    segment_like(a, true)
}

fn kept(processed: &[Processed]) -> Vec<&Processed> {
    processed.iter().filter(|p| p.exclusion.is_none()).collect()
}

fn feature_vectors(kept: &[&Processed]) -> Result<Vec<StyleFeatureVector>> {
    let features: Vec<_> = kept.iter().map(|p| session_features(&p.session.translator, &p.hierarchy)).collect();
    let pop = population_stats(&features)?;
    Ok(features.iter().map(|f| relative_icv(f, &pop)).collect())
}

pub fn features(a: &IoArgs) -> Outcome {
    let r = resolve(&a.common)?;
    let (loaded, mut failed) = load_all(&a.input, r.jobs)?;
    let (processed, f2) = process_all(&loaded, &r.config, None, r.jobs)?;
    failed.extend(f2);
    report(&failed);
    let vectors = feature_vectors(&kept(&processed))?;
    write_text(&a.out.join("features.tsv"), &features_tsv(&vectors))?;
    Ok(failed.is_empty())
}

fn write_clustering(out: &Path, c: &Clustering) -> Result<()> {
    write_text(&out.join("styles.tsv"), &styles_tsv(c))?;
    write_text(&out.join("centroids.tsv"), &centroids_tsv(c))
}

pub fn cluster(a: &ClusterArgs) -> Outcome {
    let mut r = resolve(&a.common)?;
    if let Some(k) = a.k {
        r.config.kmeans.k = k;
    }
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let vectors = parse_features_tsv(&text).with_context(|| format!("{}", a.input.display()))?;
    let c = constrained_kmeans(&vectors, &r.config.kmeans)?;
    write_clustering(&a.out, &c)?;
    Ok(true)
}

/// Writes the corpus tables; returns the number of sessions analysed.
fn write_analysis(out: &Path, kept: &[&Processed]) -> Result<Option<String>> {
    if kept.is_empty() {
        bail!("no sessions left to analyse");
    }
    let table = au_type_table(kept.iter().map(|p| (&p.hierarchy, &p.gaze)));
    write_text(&out.join("au_types.tsv"), &au_types_tsv(&table))?;

    let sets: Vec<_> = kept.iter().map(|p| *p.thresholds()).collect();
    write_text(&out.join("thresholds_summary.tsv"), &thresholds_summary_tsv(&threshold_summary(&sets)?))?;
    let lk: Vec<f64> = sets.iter().map(|t| t.kbi_ms.ln()).collect();
    let lp: Vec<f64> = sets.iter().map(|t| t.pub_ms.ln()).collect();
    write_text(&out.join("correlation.tsv"), &correlation_tsv(sets.len(), pearson_r(&lk, &lp).ok()))?;

    let tabs = kept
        .iter()
        .map(|p| crosstab(&p.hierarchy, &p.spans, &p.phases))
        .fold(Crosstabs::empty(), |acc, x| acc.merge(&x));
    write_text(&out.join("crosstabs.tsv"), &crosstabs_tsv(&[("hof_au", &tabs.hof_au), ("phase_hof", &tabs.phase_hof)]))?;

    let mut fits = Vec::new();
    let all: Vec<f64> = kept.iter().flat_map(|p| p.hierarchy.aus.iter().map(|a| a.dur as f64)).collect();
    fits.push(FitRow { scope: "population".into(), subject: "all".into(), fit: fit_lognormal(&all).map_err(|e| e.to_string()) });
    for t in AuType::ALL {
        let d: Vec<f64> =
            kept.iter().flat_map(|p| p.hierarchy.aus.iter().filter(|a| a.au_type == t).map(|a| a.dur as f64)).collect();
        fits.push(FitRow { scope: "population".into(), subject: format!("type_{}", t.code()), fit: fit_lognormal(&d).map_err(|e| e.to_string()) });
    }
    for p in kept {
        let d: Vec<f64> = p.hierarchy.aus.iter().map(|a| a.dur as f64).collect();
        fits.push(FitRow { scope: p.session.id.clone(), subject: "all".into(), fit: fit_lognormal(&d).map_err(|e| e.to_string()) });
    }
    write_text(&out.join("fits.tsv"), &fits_tsv(&fits))?;
    Ok(Some(au_types_text(&table)))
}

pub fn analyze(a: &IoArgs) -> Outcome {
    let r = resolve(&a.common)?;
    let (loaded, mut failed) = load_all(&a.input, r.jobs)?;
    let (processed, f2) = process_all(&loaded, &r.config, None, r.jobs)?;
    failed.extend(f2);
    report(&failed);
    if let Some(text) = write_analysis(&a.out, &kept(&processed))? {
        print!("{text}");
    }
    Ok(failed.is_empty())
}

pub fn render(a: &RenderArgs) -> Outcome {
    let r = resolve(&a.seg.io.common)?;
    let fixed = fixed_thresholds(a.seg.kbi, a.seg.pub_ms)?;
    let (loaded, mut failed) = load_all(&a.seg.io.input, r.jobs)?;
    let (processed, f2) = process_all(&loaded, &r.config, fixed, r.jobs)?;
    failed.extend(f2);
    report(&failed);
    for p in &processed {
        let window = (a.from.unwrap_or(p.hierarchy.start), a.to.unwrap_or(p.hierarchy.end));
        let doc = export_progression(&p.session, &p.hierarchy, Some(&p.spans), window);
        let base = a.seg.io.out.join(file_id(&p.session.id));
        write_json(&base.with_extension("json"), &doc)?;
        write_text(&base.with_extension("svg"), &render_svg(&doc))?;
    }
    Ok(failed.is_empty())
}

pub fn simulate(a: &SimulateArgs) -> Outcome {
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let env_seed = seed_from_env()?;
    if let Some(n) = a.sessions {
        if a.params.is_some() {
            bail!("--params cannot be combined with --sessions; corpus sessions use calibrated parameters");
        }
        let spec = CorpusSpec {
            sessions: n,
            translators: a.translators,
            steps: a.steps,
            seed: a.seed.or(env_seed).unwrap_or(0),
            ..Default::default()
        };
        let plan = plan_corpus(&spec, &CalibrationOptions::default())?;
        let results = par_map(a.jobs, &plan, |p| -> Result<()> {
            let sim = simulate_planned(p, spec.steps)?;
            write_text(&a.out.join(format!("{}.tsv", file_id(&p.id))), &serialize_session(&sim.session))
        })?;
        results.into_iter().collect::<Result<Vec<_>>>()?;
        #[derive(Serialize)]
        struct PlanRow<'a> {
            id: &'a str,
            translator: &'a str,
            kbi_ms: f64,
            pub_ms: f64,
            seed: u64,
        }
        let rows: Vec<PlanRow> = plan
            .iter()
            .map(|p| PlanRow {
                id: &p.id,
                translator: &p.translator,
                kbi_ms: p.params.thresholds.kbi_ms,
                pub_ms: p.params.thresholds.pub_ms,
                seed: p.seed,
            })
            .collect();
        write_json(&a.out.join("corpus.json"), &serde_json::json!({ "spec": spec, "sessions": rows }))?;
        return Ok(true);
    }
    let params: GeneratorParams = match &a.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}: not a generator parameter file", path.display()))?
        }
        None => GeneratorParams::calibrated(a.kbi, a.pub_ms, &CalibrationOptions::default()),
    };
    let seed = a.seed.or(env_seed).unwrap_or(params.seed);
    let sim = simulate_session(&params, a.steps, seed)?;
    write_text(&a.out, &serialize_session(&sim.session))?;
    if let Some(t) = &a.trace {
        write_json(t, &sim.trace)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct SessionStatus {
    id: String,
    file: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    sessions_total: usize,
    sessions_kept: usize,
    sessions: Vec<SessionStatus>,
    clustering: String,
    generator_fit: String,
    outputs: Vec<String>,
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().to_string()).unwrap_or_default()
}

pub fn pipeline(a: &IoArgs) -> Outcome {
    let r = resolve(&a.common)?;
    let config_text = r.config.to_text();
    let digest = Sha256::digest(config_text.as_bytes());
    let config_sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();

    let (loaded, mut failed) = load_all(&a.input, r.jobs)?;
    let (processed, f2) = process_all(&loaded, &r.config, None, r.jobs)?;
    failed.extend(f2);
    report(&failed);

    let mut outputs = vec!["config.txt".to_string(), "thresholds.tsv".to_string()];
    write_text(&a.out.join("config.txt"), &config_text)?;

    let mut rows = Vec::new();
    for p in &processed {
        rows.push((p.session.id.clone(), Some((*p.thresholds(), p.exclusion)), String::new()));
    }
    for f in &failed {
        rows.push((f.session_id.clone(), None, f.message.clone()));
    }
    rows.sort_by(|x, y| x.0.cmp(&y.0));
    let trows: Vec<ThresholdRow> = rows
        .iter()
        .map(|(id, t, m)| match t {
            Some((t, e)) => ThresholdRow::Derived { session: id, t, exclusion: *e },
            None => ThresholdRow::Failed { session: id, message: m },
        })
        .collect();
    write_text(&a.out.join("thresholds.tsv"), &thresholds_tsv(&trows))?;

    let written = par_map(r.jobs, &processed, |p| {
        write_segments(p, &a.out.join("sessions").join(format!("{}.segments.json", file_id(&p.session.id))), true)
    })?;
    written.into_iter().collect::<Result<Vec<_>>>()?;
    for p in &processed {
        let id = file_id(&p.session.id);
        outputs.push(format!("sessions/{id}.segments.json"));
        outputs.push(format!("sessions/{id}.aus.tsv"));
    }

    let kept = kept(&processed);
    let mut clustering = "skipped: no sessions kept".to_string();
    let mut generator_fit = clustering.clone();
    if !kept.is_empty() {
        let vectors = feature_vectors(&kept)?;
        write_text(&a.out.join("features.tsv"), &features_tsv(&vectors))?;
        outputs.push("features.tsv".into());
        clustering = match constrained_kmeans(&vectors, &r.config.kmeans) {
            Ok(c) => {
                write_clustering(&a.out, &c)?;
                outputs.push("styles.tsv".into());
                outputs.push("centroids.tsv".into());
                format!("ok: k={} seed={}", r.config.kmeans.k, r.config.kmeans.seed)
            }
            Err(e) => format!("skipped: {e}"),
        };
        write_analysis(&a.out, &kept)?;
        for f in ["au_types.tsv", "thresholds_summary.tsv", "correlation.tsv", "crosstabs.tsv", "fits.tsv"] {
            outputs.push(f.into());
        }
        let corpus: Vec<LabelledSession> = kept
            .iter()
            .map(|p| LabelledSession { session: &p.session, hierarchy: &p.hierarchy, gaze: &p.gaze, labels: &p.labels })
            .collect();
        generator_fit = match fit_generator_params(&corpus) {
            Ok(params) => {
                write_json(&a.out.join("generator_params.json"), &params)?;
                outputs.push("generator_params.json".into());
                "ok".into()
            }
            Err(e) => format!("skipped: {e}"),
        };
    }

    let mut sessions: Vec<SessionStatus> = processed
        .iter()
        .map(|p| SessionStatus {
            id: p.session.id.clone(),
            file: file_name(&p.path),
            status: if p.exclusion.is_some() { "excluded".into() } else { "ok".into() },
            reason: p.exclusion.map(|e| e.to_string()),
        })
        .chain(failed.iter().map(|f| SessionStatus {
            id: f.session_id.clone(),
            file: file_name(&f.path),
            status: "error".into(),
            reason: Some(f.message.clone()),
        }))
        .collect();
    sessions.sort_by(|x, y| x.id.cmp(&y.id).then(x.file.cmp(&y.file)));
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "btss",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256,
        sessions_total: sessions.len(),
        sessions_kept: kept.len(),
        sessions,
        clustering,
        generator_fit,
        outputs,
    };
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(failed.is_empty())
}
