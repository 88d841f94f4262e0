//! Hierarchical Markov generator for synthetic sessions.
//!
//! A HOF chain is walked step by step. Each step emits production units,
//! each opened by a PUB pause; a PU is a run of keystroke bursts separated
//! by KBI pauses, and a burst is a run of words typed with sub-KBI IKIs
//! ending on a delimiter. Fixations are laid out on a two-column page (ST
//! left, TT right) so that the gaze classifier has something to classify.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::fit_lognormal;
use crate::error::{Error, Result};
use crate::gaze::GazeAnalysis;
use crate::segmentation::{AuType, SegmentHierarchy};
use crate::session::{FixationEvent, KeyAction, KeyEvent, Ms, Session, Window};
use crate::states::{block_states, HofState, UnitLabel, UnitRef};
use crate::stats::{median, normal_quantile, Lognormal};
use crate::thresholds::ThresholdSet;

/// Shifted geometric distribution on 1, 2, 3, ... with mean `1 / p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometric {
    pub p: f64,
}

impl Geometric {
    pub fn with_mean(mean: f64) -> Self {
        Geometric { p: (1.0 / mean.max(1.0)).clamp(1e-6, 1.0) }
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.p >= 1.0 {
            return 1;
        }
        let u: f64 = 1.0 - rng.gen::<f64>();
        let k = (u.ln() / (1.0 - self.p).ln()).floor();
        1 + k.min(1e6) as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageGeometry {
    pub st_left: f64,
    pub st_right: f64,
    pub tt_left: f64,
    pub tt_right: f64,
    pub top: f64,
    pub line_height: f64,
    pub lines: u32,
}

impl Default for PageGeometry {
    fn default() -> Self {
        PageGeometry { st_left: 40.0, st_right: 600.0, tt_left: 700.0, tt_right: 1260.0, top: 80.0, line_height: 40.0, lines: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    pub pu_count: Geometric,
    pub kbs_per_pu: Geometric,
    pub words_per_kb: Geometric,
    /// Letters per word; every word is followed by one delimiter.
    pub word_len: Geometric,
    pub within_iki: Lognormal,
    pub between_iki: Lognormal,
    pub kbi_pause: Lognormal,
    pub pub_pause: Lognormal,
    /// Upper bound on PUB pauses as a multiple of the PUB threshold.
    pub pub_cap_factor: Option<f64>,
    /// Probability that a word ends with one or two backspaces.
    pub deletion_prob: f64,
    /// Gaze during bursts: AU types 4, 5, 6.
    pub typing_gaze: [f64; 3],
    /// Gaze during pauses: source, target, none.
    pub pause_gaze: [f64; 3],
    /// Transition patterns: linear, re-fixation, scattered.
    pub gaze_mix: [f64; 3],
    pub fix_dur: Lognormal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateTable<T> {
    pub h: T,
    pub o: T,
    pub f: T,
}

impl<T> StateTable<T> {
    pub fn get(&self, s: HofState) -> &T {
        match s {
            HofState::H => &self.h,
            HofState::O => &self.o,
            HofState::F => &self.f,
        }
    }

    pub fn get_mut(&mut self, s: HofState) -> &mut T {
        match s {
            HofState::H => &mut self.h,
            HofState::O => &mut self.o,
            HofState::F => &mut self.f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Initial state distribution in H, O, F order.
    pub hof_init: [f64; 3],
    /// Row-stochastic transitions in H, O, F order.
    pub hof_transition: [[f64; 3]; 3],
    pub states: StateTable<StateParams>,
    pub thresholds: ThresholdSet,
    pub geometry: PageGeometry,
    pub seed: u64,
}

/// Stationary occupancy used by [`GeneratorParams::calibrated`], in H, O, F order.
pub const TARGET_OCCUPANCY: [f64; 3] = [0.24, 0.06, 0.70];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Log-scale spread of between-word IKIs (and of the pauses cut from them).
    pub between_sigma: f64,
    pub within_sigma: f64,
    pub word_len_mean: f64,
    pub fix_dur_median: f64,
    pub fix_dur_sigma: f64,
    /// Weight of staying in the current state; the rest redraws from the target occupancy.
    pub persistence: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            between_sigma: 0.8,
            within_sigma: 0.5,
            word_len_mean: 5.0,
            fix_dur_median: 220.0,
            fix_dur_sigma: 0.35,
            persistence: 0.5,
        }
    }
}

impl GeneratorParams {
    /// Parameters whose sessions reproduce the given thresholds when re-derived.
    ///
    /// Between-word IKIs, KBI pauses and PUB pauses are all cut from a single
    /// lognormal with median `pub / 3`; burst and unit lengths are geometric
    /// with the tail masses of that lognormal above KBI and PUB, so the
    /// between-word stream as a whole keeps its median. Within-word IKIs are
    /// truncated below KBI with a location chosen so that their median is
    /// `kbi / 2`.
    pub fn calibrated(kbi_ms: f64, pub_ms: f64, opts: &CalibrationOptions) -> GeneratorParams {
        let between = Lognormal::with_median(pub_ms / 3.0, opts.between_sigma);
        let q_kbi = 1.0 - between.cdf(kbi_ms);
        let q_pub = 1.0 - between.cdf(pub_ms);
        let within = truncated_median_lognormal(kbi_ms / 2.0, opts.within_sigma, 1.0, kbi_ms);
        let base = StateParams {
            pu_count: Geometric { p: 1.0 },
            kbs_per_pu: Geometric { p: (q_pub / q_kbi).clamp(1e-6, 1.0) },
            words_per_kb: Geometric { p: q_kbi.clamp(1e-6, 1.0) },
            word_len: Geometric::with_mean(opts.word_len_mean),
            within_iki: within,
            between_iki: between,
            kbi_pause: between,
            pub_pause: between,
            pub_cap_factor: None,
            deletion_prob: 0.0,
            typing_gaze: [0.4, 0.2, 0.4],
            pause_gaze: [0.0, 0.0, 1.0],
            gaze_mix: [0.4, 0.4, 0.2],
            fix_dur: Lognormal::with_median(opts.fix_dur_median, opts.fix_dur_sigma),
        };
        let h = StateParams { deletion_prob: 0.35, pause_gaze: [0.0, 1.0, 0.0], gaze_mix: [0.0, 1.0, 0.0], typing_gaze: [0.3, 0.1, 0.6], ..base };
        let o = StateParams { deletion_prob: 0.02, pause_gaze: [1.0, 0.0, 0.0], gaze_mix: [1.0, 0.0, 0.0], typing_gaze: [0.3, 0.6, 0.1], ..base };
        let f = StateParams { deletion_prob: 0.03, pub_cap_factor: Some(2.0), ..base };
        let a = opts.persistence;
        let mut transition = [[0.0; 3]; 3];
        for (i, row) in transition.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (1.0 - a) * TARGET_OCCUPANCY[j] + if i == j { a } else { 0.0 };
            }
        }
        GeneratorParams {
            hof_init: TARGET_OCCUPANCY,
            hof_transition: transition,
            states: StateTable { h, o, f },
            thresholds: ThresholdSet::fixed(kbi_ms, pub_ms),
            geometry: PageGeometry::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let simplex = |name: &str, v: &[f64; 3]| -> Result<()> {
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!("{name} is not a probability vector: {v:?}")));
            }
            Ok(())
        };
        simplex("hof_init", &self.hof_init)?;
        for (i, row) in self.hof_transition.iter().enumerate() {
            simplex(&format!("hof_transition row {i}"), row)?;
        }
        let (kbi, pub_ms) = (self.thresholds.kbi_ms, self.thresholds.pub_ms);
        if !(kbi.is_finite() && kbi > 1.0) {
            return bad(format!("KBI threshold must exceed 1 ms, got {kbi}"));
        }
        if !(pub_ms.is_finite() && pub_ms.ceil() > kbi.ceil()) {
            return bad(format!("PUB threshold {pub_ms} leaves no room above KBI {kbi}"));
        }
        let g = &self.geometry;
        if !(g.st_right > g.st_left && g.tt_right > g.tt_left && g.line_height > 0.0 && g.lines >= 2) {
            return bad("page geometry is degenerate".to_string());
        }
        for s in HofState::ALL {
            let p = self.states.get(s);
            let name = |f: &str| format!("state {s} {f}");
            for (f, geo) in [("pu_count", p.pu_count), ("kbs_per_pu", p.kbs_per_pu), ("words_per_kb", p.words_per_kb), ("word_len", p.word_len)] {
                if !(geo.p > 0.0 && geo.p <= 1.0) {
                    return bad(format!("{} must have p in (0, 1], got {}", name(f), geo.p));
                }
            }
            for (f, ln) in [
                ("within_iki", p.within_iki),
                ("between_iki", p.between_iki),
                ("kbi_pause", p.kbi_pause),
                ("pub_pause", p.pub_pause),
                ("fix_dur", p.fix_dur),
            ] {
                if !(ln.sigma > 0.0 && ln.sigma.is_finite() && ln.mu.is_finite()) {
                    return bad(format!("{} needs a finite mu and sigma > 0", name(f)));
                }
            }
            if let Some(c) = p.pub_cap_factor {
                if !(c > 1.0) || (c * pub_ms).ceil() <= pub_ms.ceil() {
                    return bad(format!("{} must leave room above the PUB threshold", name("pub_cap_factor")));
                }
            }
            if !(0.0..=1.0).contains(&p.deletion_prob) {
                return bad(format!("{} must be a probability", name("deletion_prob")));
            }
            simplex(&name("typing_gaze"), &p.typing_gaze)?;
            simplex(&name("pause_gaze"), &p.pause_gaze)?;
            simplex(&name("gaze_mix"), &p.gaze_mix)?;
        }
        Ok(())
    }
}

/// Lognormal whose restriction to `[lo, hi)` has the given median.
pub fn truncated_median_lognormal(target: f64, sigma: f64, lo: f64, hi: f64) -> Lognormal {
    let gap = |mu: f64| {
        let d = Lognormal::new(mu, sigma);
        d.cdf(target) - (d.cdf(lo) + d.cdf(hi)) / 2.0
    };
    // gap decreases in mu
    let (mut a, mut b) = (lo.max(1e-9).ln() - 10.0 * sigma, hi.ln() + 10.0 * sigma);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if gap(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Lognormal::new(0.5 * (a + b), sigma)
}

/// Integer milliseconds in `[lo, hi)` closest to `x`.
fn to_ms(x: f64, lo: f64, hi: f64) -> Ms {
    let lo_i = lo.ceil() as Ms;
    let hi_i = if hi.is_finite() { hi.ceil() as Ms - 1 } else { Ms::MAX / 4 };
    (x.round().min((Ms::MAX / 4) as f64) as Ms).clamp(lo_i, hi_i.max(lo_i))
}

fn choose<R: Rng + ?Sized>(rng: &mut R, weights: &[f64; 3]) -> usize {
    let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(2)
}

fn state_from(i: usize) -> HofState {
    HofState::ALL[i]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockTrace {
    pub step: usize,
    pub state: HofState,
    /// Opening pause. Zero length only for a first block whose pause had no
    /// gaze, since nothing would be recorded before the first key.
    pub pause_start: Ms,
    pub pause_dur: Ms,
    pub pu_start: Ms,
    pub pu_end: Ms,
    pub kbi_pauses: Vec<Ms>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub steps: Vec<HofState>,
    pub blocks: Vec<BlockTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub session: Session,
    pub trace: GenerationTrace,
}

const LETTERS: &[char] = &['e', 't', 'a', 'o', 'i', 'n', 's', 'h', 'r', 'd', 'l', 'c', 'u', 'm', 'w', 'f', 'g', 'y', 'p', 'b'];

struct Generator<'a> {
    p: &'a GeneratorParams,
    rng: ChaCha8Rng,
    keys: Vec<KeyEvent>,
    fixes: Vec<FixationEvent>,
    text: Vec<char>,
    line: [u32; 2],
    pos: [(f64, f64); 2],
}

impl Generator<'_> {
    fn kbi(&self) -> f64 {
        self.p.thresholds.kbi_ms
    }

    fn iki(&mut self, d: Lognormal) -> Ms {
        let kbi = self.kbi();
        let x = d.sample_truncated(&mut self.rng, 1.0, kbi);
        to_ms(x, 1.0, kbi)
    }

    fn press(&mut self, t: Ms, glyph: char) {
        self.text.push(glyph);
        self.keys.push(KeyEvent::insert(t, glyph));
    }

    fn backspace(&mut self, t: Ms) {
        let removed = self.text.pop().unwrap_or(' ');
        self.keys.push(KeyEvent::delete(t, removed));
    }

    /// Types one burst starting at `t`; returns the burst end (last key + 1 ms).
    fn burst(&mut self, sp: &StateParams, mut t: Ms) -> Ms {
        let words = sp.words_per_kb.sample(&mut self.rng);
        for w in 0..words {
            if w > 0 {
                t += self.iki(sp.between_iki);
            }
            let len = sp.word_len.sample(&mut self.rng);
            for i in 0..len {
                if i > 0 {
                    t += self.iki(sp.within_iki);
                }
                let c = LETTERS[self.rng.gen_range(0..LETTERS.len())];
                self.press(t, c);
            }
            if self.rng.gen_bool(sp.deletion_prob) {
                let n = self.rng.gen_range(1..=len.min(2));
                for _ in 0..n {
                    t += self.iki(sp.within_iki);
                    self.backspace(t);
                }
            }
            t += self.iki(sp.within_iki);
            let delimiter = match self.rng.gen_range(0..20) {
                0 => ',',
                1 => '.',
                _ => ' ',
            };
            self.press(t, delimiter);
        }
        t + 1
    }

    fn next_position(&mut self, w: usize, pattern: usize, fresh: bool) -> (f64, f64) {
        let g = self.p.geometry;
        let (left, right) = if w == 0 { (g.st_left, g.st_right) } else { (g.tt_left, g.tt_right) };
        let line_y = |line: u32| g.top + line as f64 * g.line_height;
        if fresh {
            self.line[w] = self.rng.gen_range(0..g.lines);
            let x = left + self.rng.gen_range(0.0..30.0);
            self.pos[w] = (x, line_y(self.line[w]));
            return self.pos[w];
        }
        let (x, _) = self.pos[w];
        let next = match pattern {
            0 => {
                let nx = x + self.rng.gen_range(40.0..=100.0);
                if nx > right {
                    self.line[w] = (self.line[w] + 1) % g.lines;
                    (left + self.rng.gen_range(0.0..30.0), line_y(self.line[w]) + self.rng.gen_range(-3.0..=3.0))
                } else {
                    (nx, line_y(self.line[w]) + self.rng.gen_range(-3.0..=3.0))
                }
            }
            1 => {
                let nx = (x + self.rng.gen_range(-15.0..=15.0)).clamp(left, right);
                (nx, line_y(self.line[w]) + self.rng.gen_range(-5.0..=5.0))
            }
            _ => {
                // at least five lines away, i.e. a vertical jump well above 150 px
                let far: Vec<u32> = (0..g.lines).filter(|&l| l.abs_diff(self.line[w]) >= 5).collect();
                if let Some(&l) = far.get(self.rng.gen_range(0..far.len().max(1))) {
                    self.line[w] = l;
                }
                (self.rng.gen_range(left..right), line_y(self.line[w]))
            }
        };
        self.pos[w] = next;
        next
    }

    /// Fills `[a, b)` with fixations on one window, 15-45 ms saccade gaps between them.
    fn fixations(&mut self, sp: &StateParams, a: Ms, b: Ms, window: Window) {
        let w = match window {
            Window::Source => 0,
            Window::Target => 1,
        };
        // nothing recorded yet: the first fixation opens the session
        let lead = if self.keys.is_empty() && self.fixes.is_empty() { 0 } else { self.rng.gen_range(15..=45) };
        let mut t = a + lead;
        let mut fresh = true;
        loop {
            let room = b - 15 - t;
            if room < 60 {
                break;
            }
            let x = sp.fix_dur.sample_truncated(&mut self.rng, 60.0, (room + 1).min(900) as f64);
            let dur = to_ms(x, 60.0, (room + 1) as f64);
            let pattern = choose(&mut self.rng, &sp.gaze_mix);
            let (fx, fy) = self.next_position(w, pattern, fresh);
            fresh = false;
            self.fixes.push(FixationEvent::new(t, dur, window, (fx * 10.0).round() / 10.0, (fy * 10.0).round() / 10.0));
            t += dur + self.rng.gen_range(15..=45);
        }
    }

    fn pause_gaze(&mut self, sp: &StateParams, a: Ms, b: Ms) {
        match choose(&mut self.rng, &sp.pause_gaze) {
            0 => self.fixations(sp, a, b, Window::Source),
            1 => self.fixations(sp, a, b, Window::Target),
            _ => {}
        }
    }

    fn typing_gaze(&mut self, sp: &StateParams, a: Ms, b: Ms) {
        match choose(&mut self.rng, &sp.typing_gaze) {
            1 => self.fixations(sp, a, b, Window::Source),
            2 => self.fixations(sp, a, b, Window::Target),
            _ => {}
        }
    }
}

/// Walks `steps` HOF states and emits the resulting session.
pub fn simulate_session(p: &GeneratorParams, steps: usize, seed: u64) -> Result<Simulation> {
    if steps == 0 {
        return Err(Error::EmptyKeyStream);
    }
    p.validate()?;
    let mut g = Generator {
        p,
        rng: ChaCha8Rng::seed_from_u64(seed),
        keys: Vec::new(),
        fixes: Vec::new(),
        text: Vec::new(),
        line: [0; 2],
        pos: [(0.0, 0.0); 2],
    };
    let (kbi, pub_ms) = (p.thresholds.kbi_ms, p.thresholds.pub_ms);
    let mut trace = GenerationTrace::default();
    let mut state = state_from(choose(&mut g.rng, &p.hof_init));
    let mut t: Ms = 0;
    for step in 0..steps {
        if step > 0 {
            state = state_from(choose(&mut g.rng, &p.hof_transition[state.index()]));
        }
        trace.steps.push(state);
        let sp = *p.states.get(state);
        for _ in 0..sp.pu_count.sample(&mut g.rng) {
            let cap = sp.pub_cap_factor.map_or(f64::INFINITY, |c| c * pub_ms);
            let x = sp.pub_pause.sample_truncated(&mut g.rng, pub_ms, cap);
            let mut pause = to_ms(x, pub_ms, cap);
            g.pause_gaze(&sp, t, t + pause);
            if g.fixes.is_empty() && g.keys.is_empty() {
                // a silent opening pause leaves no trace in the recording
                pause = 0;
            }
            let pause_start = t;
            t += pause;
            let pu_start = t;
            let mut kbi_pauses = Vec::new();
            for kb in 0..sp.kbs_per_pu.sample(&mut g.rng) {
                if kb > 0 {
                    let x = sp.kbi_pause.sample_truncated(&mut g.rng, kbi, pub_ms);
                    let gap = to_ms(x, kbi, pub_ms);
                    g.pause_gaze(&sp, t, t + gap);
                    kbi_pauses.push(gap);
                    t += gap;
                }
                let start = t;
                t = g.burst(&sp, start);
                g.typing_gaze(&sp, start, t);
            }
            trace.blocks.push(BlockTrace { step, state, pause_start, pause_dur: pause, pu_start, pu_end: t, kbi_pauses });
        }
    }
    let mut session = Session::new(format!("sim-{seed}"), g.keys, g.fixes);
    session.translator = "sim".to_string();
    session.sort_events();
    Ok(Simulation { session, trace })
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

/// Session-level threshold population: log KBI and log PUB are bivariate normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub sessions: usize,
    pub translators: usize,
    pub steps: usize,
    pub log_kbi_mean: f64,
    pub log_kbi_sd: f64,
    pub log_pub_mean: f64,
    pub log_pub_sd: f64,
    pub correlation: f64,
    /// Force the drawn log thresholds to the configured sample mean, spread
    /// and correlation instead of leaving them to sampling noise.
    pub exact_moments: bool,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            sessions: 50,
            translators: 10,
            steps: 30,
            log_kbi_mean: 5.78,
            log_kbi_sd: 0.38,
            log_pub_mean: 6.80,
            log_pub_sd: 0.47,
            correlation: 0.72,
            exact_moments: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedSession {
    pub id: String,
    pub translator: String,
    pub params: GeneratorParams,
    pub seed: u64,
}

/// Draws per-session thresholds and seeds; simulate each entry independently.
pub fn plan_corpus(spec: &CorpusSpec, opts: &CalibrationOptions) -> Result<Vec<PlannedSession>> {
    if spec.sessions == 0 || spec.translators == 0 || spec.steps == 0 {
        return Err(Error::InvalidParams("corpus needs sessions, translators and steps".to_string()));
    }
    if !(spec.correlation.abs() <= 1.0) {
        return Err(Error::InvalidParams(format!("correlation {} outside [-1, 1]", spec.correlation)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.sessions;
    let r = spec.correlation;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        let mut z: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let a = normal_quantile(rng.gen_range(1e-12..1.0 - 1e-12));
                let b = normal_quantile(rng.gen_range(1e-12..1.0 - 1e-12));
                (a, b)
            })
            .collect();
        if spec.exact_moments && n >= 3 {
            whiten(&mut z);
        }
        z.into_iter()
            .map(|(z1, z2)| {
                let kbi = (spec.log_kbi_mean + spec.log_kbi_sd * z1).exp();
                let pub_ms = (spec.log_pub_mean + spec.log_pub_sd * (r * z1 + (1.0 - r * r).sqrt() * z2)).exp();
                (kbi, pub_ms)
            })
            .collect()
    };
    // thresholds must leave room for KBI pauses; redraw the whole population
    // so that exact sample moments survive
    let usable = |t: &(f64, f64)| t.0 >= 20.0 && t.1 >= t.0 * 1.2;
    let mut thresholds = draw(&mut rng);
    for _ in 0..1000 {
        if thresholds.iter().all(usable) {
            break;
        }
        thresholds = draw(&mut rng);
    }
    let width = n.to_string().len().max(3);
    let tw = spec.translators.to_string().len().max(2);
    let mut out = Vec::with_capacity(n);
    for (i, (kbi, pub_ms)) in thresholds.into_iter().enumerate() {
        let kbi = kbi.max(20.0).round();
        let pub_ms = pub_ms.max(kbi * 1.2).round();
        let seed = rng.gen::<u64>();
        let mut params = GeneratorParams::calibrated(kbi, pub_ms, opts);
        params.seed = seed;
        out.push(PlannedSession {
            id: format!("s{i:0width$}"),
            translator: format!("t{:0tw$}", i % spec.translators),
            params,
            seed,
        });
    }
    Ok(out)
}

/// Centres both columns, decorrelates the second from the first and scales
/// both to unit sample variance.
fn whiten(z: &mut [(f64, f64)]) {
    let n = z.len() as f64;
    let (ma, mb) = z.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    for p in z.iter_mut() {
        p.0 -= ma;
        p.1 -= mb;
    }
    let saa: f64 = z.iter().map(|p| p.0 * p.0).sum();
    let sab: f64 = z.iter().map(|p| p.0 * p.1).sum();
    for p in z.iter_mut() {
        p.1 -= sab / saa * p.0;
    }
    let sbb: f64 = z.iter().map(|p| p.1 * p.1).sum();
    let (ka, kb) = (((n - 1.0) / saa).sqrt(), ((n - 1.0) / sbb).sqrt());
    for p in z.iter_mut() {
        p.0 *= ka;
        p.1 *= kb;
    }
}

pub fn simulate_planned(plan: &PlannedSession, steps: usize) -> Result<Simulation> {
    let mut sim = simulate_session(&plan.params, steps, plan.seed)?;
    sim.session.id = plan.id.clone();
    sim.session.translator = plan.translator.clone();
    Ok(sim)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

pub const SMOOTHING: f64 = 0.5;

/// Initial distribution and transition matrix from state sequences, with
/// additive smoothing.
pub fn fit_hof_chain(sequences: &[Vec<HofState>], smoothing: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut init = [smoothing; 3];
    let mut trans = [[smoothing; 3]; 3];
    for seq in sequences {
        if let Some(first) = seq.first() {
            init[first.index()] += 1.0;
        }
        for w in seq.windows(2) {
            trans[w[0].index()][w[1].index()] += 1.0;
        }
    }
    let norm = |v: [f64; 3]| {
        let s: f64 = v.iter().sum();
        v.map(|x| x / s)
    };
    (norm(init), trans.map(norm))
}

/// One labelled session as input to [`fit_generator_params`].
#[derive(Clone, Copy, Debug)]
pub struct LabelledSession<'a> {
    pub session: &'a Session,
    pub hierarchy: &'a SegmentHierarchy,
    pub gaze: &'a GazeAnalysis,
    pub labels: &'a [UnitLabel],
}

#[derive(Default)]
struct StateSamples {
    kbs_per_pu: Vec<f64>,
    words_per_kb: Vec<f64>,
    letters_per_word: Vec<f64>,
    within: Vec<f64>,
    between: Vec<f64>,
    kbi_pauses: Vec<f64>,
    pub_pauses: Vec<f64>,
    deletions: f64,
    words: f64,
    typing_gaze: [f64; 3],
    pause_gaze: [f64; 3],
    gaze_mix: [f64; 3],
    fix_durs: Vec<f64>,
}

fn smooth(v: [f64; 3]) -> [f64; 3] {
    let v = v.map(|x| x + SMOOTHING);
    let s: f64 = v.iter().sum();
    v.map(|x| x / s)
}

/// Fits generator parameters to labelled sessions, one HOF step per production unit.
pub fn fit_generator_params(corpus: &[LabelledSession<'_>]) -> Result<GeneratorParams> {
    if corpus.is_empty() {
        return Err(Error::InvalidParams("cannot fit an empty corpus".to_string()));
    }
    let mut sequences = Vec::new();
    let mut samples: StateTable<StateSamples> = StateTable { h: Default::default(), o: Default::default(), f: Default::default() };
    let mut kbis = Vec::new();
    let mut pubs = Vec::new();

    for item in corpus {
        let h = item.hierarchy;
        let s = item.session;
        kbis.push(h.thresholds.kbi_ms);
        pubs.push(h.thresholds.pub_ms);
        let states = block_states(item.labels);
        sequences.push(states.clone());

        // opening pause per PU
        let mut opening: Vec<Option<usize>> = vec![None; h.pus.len()];
        let mut last_pause = None;
        for l in item.labels {
            match l.profile.unit {
                UnitRef::Pause(p) => last_pause = Some(p),
                UnitRef::Pu(pu) => opening[pu] = last_pause.take(),
            }
        }

        let mut key_idx = 0;
        let mut fix_idx = 0;
        for (pu, &state) in h.pus.iter().zip(&states) {
            let acc = samples.get_mut(state);
            acc.kbs_per_pu.push(pu.kb_ids.len() as f64);
            if let Some(p) = opening[pu.id] {
                acc.pub_pauses.push(h.pauses[p].dur as f64);
                let au_ids = &h.pauses[p].au_ids;
                acc.pause_gaze[dominant_window(h, au_ids)] += 1.0;
            }
            for &p in &pu.internal_kbi_ids {
                acc.kbi_pauses.push(h.pauses[p].dur as f64);
                acc.pause_gaze[dominant_window(h, &h.pauses[p].au_ids)] += 1.0;
            }
            for &k in &pu.kb_ids {
                let kb = &h.kbs[k];
                let words: usize = kb.au_ids.iter().map(|&a| h.aus[a].tgnbr).sum();
                let words = words.max(1) as f64;
                acc.words_per_kb.push(words);
                acc.letters_per_word.push((kb.ins as f64 / words - 1.0).max(1.0));
                acc.words += words;
                acc.deletions += kb.del as f64;
                let mut typed = [0.0; 3];
                for &a in &kb.au_ids {
                    let au = &h.aus[a];
                    match au.au_type {
                        AuType::Typing => typed[0] += au.dur as f64,
                        AuType::TypingSourceReading => typed[1] += au.dur as f64,
                        AuType::TypingTargetReading => typed[2] += au.dur as f64,
                        _ => {}
                    }
                }
                let dominant = (0..3).max_by(|&i, &j| typed[i].total_cmp(&typed[j]).then(j.cmp(&i))).unwrap();
                acc.typing_gaze[dominant] += 1.0;

                // IKIs between keystrokes inside this burst
                while key_idx < s.keys.len() && s.keys[key_idx].time < kb.start {
                    key_idx += 1;
                }
                let mut prev: Option<&KeyEvent> = None;
                while key_idx < s.keys.len() && s.keys[key_idx].time < kb.end() {
                    let key = &s.keys[key_idx];
                    if let Some(pk) = prev {
                        let iki = (key.time - pk.time) as f64;
                        if key.is_alnum && iki > 0.0 {
                            if pk.is_alnum {
                                acc.within.push(iki);
                            } else if pk.action == KeyAction::Insert {
                                acc.between.push(iki);
                            }
                        }
                    }
                    prev = Some(key);
                    key_idx += 1;
                }
            }
            let block_start = opening[pu.id].map_or(pu.start, |p| h.pauses[p].start);
            while fix_idx < s.fixes.len() && s.fixes[fix_idx].start < block_start {
                fix_idx += 1;
            }
            while fix_idx < s.fixes.len() && s.fixes[fix_idx].start < pu.end() {
                acc.fix_durs.push(s.fixes[fix_idx].dur as f64);
                fix_idx += 1;
            }
        }
        for (i, au) in h.aus.iter().enumerate() {
            let state = au_state(item.labels, &states, au.start);
            let d = item.gaze.per_au[i];
            let acc = samples.get_mut(state);
            acc.gaze_mix[0] += d.linear as f64;
            acc.gaze_mix[1] += d.refix as f64;
            acc.gaze_mix[2] += d.scattered as f64;
        }
    }

    let kbi = median(&kbis).unwrap();
    let pub_ms = median(&pubs).unwrap();
    let (hof_init, hof_transition) = fit_hof_chain(&sequences, SMOOTHING);
    let defaults = GeneratorParams::calibrated(kbi, pub_ms.max(kbi * 1.2), &CalibrationOptions::default());
    let fit_or = |v: &[f64], fallback: Lognormal| fit_lognormal(v).map(|f| f.distribution()).unwrap_or(fallback);
    let mean_or = |v: &[f64], fallback: f64| if v.is_empty() { fallback } else { v.iter().sum::<f64>() / v.len() as f64 };

    let mut states = defaults.states;
    for s in HofState::ALL {
        let acc = samples.get(s);
        let d = *defaults.states.get(s);
        *states.get_mut(s) = StateParams {
            pu_count: Geometric { p: 1.0 },
            kbs_per_pu: Geometric::with_mean(mean_or(&acc.kbs_per_pu, d.kbs_per_pu.mean())),
            words_per_kb: Geometric::with_mean(mean_or(&acc.words_per_kb, d.words_per_kb.mean())),
            word_len: Geometric::with_mean(mean_or(&acc.letters_per_word, d.word_len.mean())),
            within_iki: fit_or(&acc.within, d.within_iki),
            between_iki: fit_or(&acc.between, d.between_iki),
            kbi_pause: fit_or(&acc.kbi_pauses, d.kbi_pause),
            pub_pause: fit_or(&acc.pub_pauses, d.pub_pause),
            pub_cap_factor: None,
            deletion_prob: if acc.words > 0.0 { (acc.deletions / acc.words).min(1.0) } else { d.deletion_prob },
            typing_gaze: smooth(acc.typing_gaze),
            pause_gaze: smooth(acc.pause_gaze),
            gaze_mix: smooth(acc.gaze_mix),
            fix_dur: fit_or(&acc.fix_durs, d.fix_dur),
        };
    }
    Ok(GeneratorParams {
        hof_init,
        hof_transition,
        states,
        thresholds: ThresholdSet::fixed(kbi, pub_ms.max(kbi * 1.2)),
        geometry: PageGeometry::default(),
        seed: 0,
    })
}

fn dominant_window(h: &SegmentHierarchy, au_ids: &[usize]) -> usize {
    let (s, t) = au_ids.iter().fold((0, 0), |(s, t), &a| (s + h.aus[a].trt_s, t + h.aus[a].trt_t));
    match (s, t) {
        (0, 0) => 2,
        (s, t) if s >= t => 0,
        _ => 1,
    }
}

/// State of the unit (by block) covering time `t`.
fn au_state(labels: &[UnitLabel], blocks: &[HofState], t: Ms) -> HofState {
    let mut block = 0usize;
    let mut pending_pause_state: Option<HofState> = None;
    for l in labels {
        let state = match l.profile.unit {
            UnitRef::Pu(_) => {
                let s = blocks.get(block).copied().unwrap_or(l.state);
                block += 1;
                pending_pause_state = None;
                s
            }
            UnitRef::Pause(_) => {
                // an opening pause belongs to the block it opens
                let s = blocks.get(block).copied().unwrap_or(l.state);
                pending_pause_state = Some(s);
                s
            }
        };
        if l.profile.start <= t && t < l.profile.end {
            return state;
        }
    }
    pending_pause_state.unwrap_or(HofState::F)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::validate_session;

    fn params() -> GeneratorParams {
        GeneratorParams::calibrated(374.0, 891.0, &CalibrationOptions::default())
    }

    #[test]
    fn zero_steps_is_an_error() {
        assert!(matches!(simulate_session(&params(), 0, 1), Err(Error::EmptyKeyStream)));
    }

    #[test]
    fn identity_chain_stays_in_flow() {
        let mut p = params();
        p.hof_init = [0.0, 0.0, 1.0];
        p.hof_transition = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let sim = simulate_session(&p, 50, 3).unwrap();
        assert!(sim.trace.steps.iter().all(|&s| s == HofState::F));
        assert!(sim.trace.blocks.iter().all(|b| b.state == HofState::F));
    }

    #[test]
    fn generated_sessions_are_valid_and_seeded() {
        let p = params();
        let a = simulate_session(&p, 40, 9).unwrap();
        assert!(validate_session(&a.session).is_empty());
        assert_eq!(a, simulate_session(&p, 40, 9).unwrap());
        assert_ne!(a.session, simulate_session(&p, 40, 10).unwrap().session);
    }

    #[test]
    fn invalid_simplex_is_rejected() {
        let mut p = params();
        p.hof_init = [0.5, 0.5, 0.5];
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
        let mut p = params();
        p.thresholds = ThresholdSet::fixed(500.0, 400.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn truncated_median_solver_hits_target() {
        let d = truncated_median_lognormal(187.0, 0.5, 1.0, 374.0);
        let (a, b) = (d.cdf(1.0), d.cdf(374.0));
        assert!((d.cdf(187.0) - (a + b) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_mean_matches() {
        let g = Geometric::with_mean(4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20000;
        let m = (0..n).map(|_| g.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((m - 4.0).abs() < 0.1, "{m}");
    }

    #[test]
    fn alternating_labels_give_permutation_like_transitions() {
        use HofState::*;
        let seq = vec![vec![H, F, H, F, H, F, H, F, H, F, H, F]];
        let (_, t) = fit_hof_chain(&seq, SMOOTHING);
        // H -> F: 6 of 6 observed, plus smoothing
        assert!((t[0][2] - 6.5 / 7.5).abs() < 1e-12);
        assert!((t[2][0] - 5.5 / 6.5).abs() < 1e-12);
        assert!(t[0][0] < 0.1 && t[2][2] < 0.1);
    }

    #[test]
    fn all_flow_corpus_has_flow_dominated_row() {
        let seq = vec![vec![HofState::F; 30]];
        let (init, t) = fit_hof_chain(&seq, SMOOTHING);
        assert!((t[2][2] - 29.5 / 30.5).abs() < 1e-12);
        assert!((init[2] - 1.5 / 2.5).abs() < 1e-12);
    }
}
