#![allow(dead_code)]

use fastread::corpus::Relevance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small weighted SVM problem in dense form.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Relevance>,
    /// Per-example upper bound `C · class weight`.
    pub upper: Vec<f64>,
}

fn sgn(l: Relevance) -> f64 {
    if l.is_relevant() {
        1.0
    } else {
        -1.0
    }
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting; `None`
/// when `a` is numerically singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (k, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[col + 1 + k] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact optimum of `½(‖w‖² + b²) + Σ upper_i · hinge_i` via its dual
/// `max Σα − ½αᵀQα, 0 ≤ α ≤ upper`, with `Q_ij = y_i y_j (x_i·x_j + 1)`.
///
/// Every α is tried at 0, at its bound, or free; the free values solve the
/// stationarity equations. Some optimum has linearly independent free
/// vectors, so skipping singular systems loses nothing, and the best
/// feasible candidate is the optimum. Returns the optimal objective.
pub fn exact_optimum(inst: &Instance) -> f64 {
    let n = inst.x.len();
    let y: Vec<f64> = inst.y.iter().map(|&l| sgn(l)).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dot: f64 = inst.x[i].iter().zip(&inst.x[j]).map(|(a, b)| a * b).sum();
                    y[i] * y[j] * (dot + 1.0)
                })
                .collect()
        })
        .collect();
    let dual = |alpha: &[f64]| {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += alpha[i] * alpha[j] * q[i][j];
            }
        }
        alpha.iter().sum::<f64>() - 0.5 * quad
    };

    let mut best = f64::NEG_INFINITY;
    for mut code in 0..3usize.pow(n as u32) {
        // 0: lower bound, 1: upper bound, 2: free
        let mut state = vec![0u8; n];
        for s in state.iter_mut() {
            *s = (code % 3) as u8;
            code /= 3;
        }
        let mut alpha: Vec<f64> = (0..n).map(|i| if state[i] == 1 { inst.upper[i] } else { 0.0 }).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| q[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q[i][j] * alpha[j]).sum::<f64>())
                .collect();
            let Some(sol) = solve(a, b) else { continue };
            if free
                .iter()
                .zip(&sol)
                .any(|(&i, &v)| v < -1e-9 || v > inst.upper[i] + 1e-9)
            {
                continue;
            }
            for (&i, &v) in free.iter().zip(&sol) {
                alpha[i] = v.clamp(0.0, inst.upper[i]);
            }
        }
        best = best.max(dual(&alpha));
    }
    best
}

/// Primal objective of a dense model.
pub fn primal(inst: &Instance, w: &[f64], b: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let loss: f64 = inst
        .x
        .iter()
        .zip(&inst.y)
        .zip(&inst.upper)
        .map(|((x, &l), &u)| {
            let s: f64 = x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            u * (1.0 - sgn(l) * s).max(0.0)
        })
        .sum();
    reg + loss
}

/// Random instance with 2..=6 points in 1..=3 dims and both classes present.
pub fn random_instance(rng: &mut ChaCha8Rng, c: f64, weighted: bool) -> Instance {
    let n = rng.random_range(2..=6);
    let d = rng.random_range(1..=3);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let mut y: Vec<Relevance> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Relevance::Relevant } else { Relevance::Irrelevant })
        .collect();
    y[0] = Relevance::Relevant;
    y[1] = Relevance::Irrelevant;
    let (wr, wi) = if weighted {
        (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0))
    } else {
        (1.0, 1.0)
    };
    let upper = y.iter().map(|l| c * if l.is_relevant() { wr } else { wi }).collect();
    Instance { x, y, upper }
}

/// Separable instance: labels from a random hyperplane, points closer than
/// `margin` to it are rejected.
pub fn separable_instance(rng: &mut ChaCha8Rng, margin: f64) -> Instance {
    let d = rng.random_range(1..=3);
    let n = rng.random_range(2..=6);
    let normal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    let normal: Vec<f64> = normal.iter().map(|v| v / norm).collect();
    let offset = rng.random_range(-0.5..0.5);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s: f64 = p.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() - offset;
        if s.abs() < margin {
            continue;
        }
        // make sure both classes appear
        let want = match x.len() {
            0 => Some(true),
            1 => Some(false),
            _ => None,
        };
        if want.is_some_and(|w| w != (s > 0.0)) {
            continue;
        }
        y.push(if s > 0.0 { Relevance::Relevant } else { Relevance::Irrelevant });
        x.push(p);
    }
    let upper = vec![100.0; n];
    Instance { x, y, upper }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type Samples = Vec<(String, Vec<f64>)>;

/// Three planted groups of treatments. Each group has a base sample; its
/// members are copies jittered by at most 5% of the base IQR, and group
/// centers are at least 24 spreads apart. Returns the samples and the planted
/// rank of each treatment name.
pub fn planted_groups(rng: &mut ChaCha8Rng) -> (Samples, Vec<(String, usize)>) {
    let n = 30;
    let mut samples = Vec::new();
    let mut truth = Vec::new();
    let spreads: Vec<f64> = (0..3).map(|_| rng.random_range(10.0..40.0)).collect();
    let mut center = rng.random_range(100.0..500.0);
    let mut name = 0;
    for group in 0..3 {
        let spread = spreads[group];
        let base: Vec<f64> = (0..n).map(|_| center + rng.random_range(-spread..spread)).collect();
        let members = rng.random_range(1..=3);
        for _ in 0..members {
            let jitter = 0.05 * spread;
            let v: Vec<f64> = base.iter().map(|b| b + rng.random_range(-jitter..=jitter)).collect();
            let label = format!("T{name:02}");
            name += 1;
            samples.push((label.clone(), v));
            truth.push((label, group + 1));
        }
        // the IQR of a uniform(±s) sample is about s
        if group < 2 {
            let wider = spread.max(spreads[group + 1]);
            center += rng.random_range(12.0..20.0) * 2.0 * wider;
        }
    }
    // present in a shuffled order
    use rand::seq::SliceRandom;
    samples.shuffle(rng);
    (samples, truth)
}

/// Tf-idf simulation data for a synthetic corpus.
pub fn synthetic_data(name: &str, n: usize, n_rel: usize, seed: u64) -> fastread::eval::SimulationData {
    let corpus = fastread::synthetic::generate(&fastread::synthetic::SyntheticSpec::new(name, n, n_rel, seed));
    fastread::eval::SimulationData::from_corpus(&corpus, &fastread::features::TfidfVectorizer::default()).unwrap()
}

/// Checks one HUTM run against the reference loop: identical replay, the
/// phase schedule, and the size of every training set. Returns the number
/// of stable-phase retrains seen.
pub fn check_algorithm1(data: &fastread::eval::SimulationData, seed: u64) -> Result<usize, String> {
    use fastread::active::{Phase, TreatmentCode, TreatmentConfig};
    use fastread::eval::{simulate_traced, SimOptions};

    let cfg = TreatmentConfig::default();
    let opts = SimOptions::default();
    let (a, trace) = simulate_traced(data, TreatmentCode::FASTREAD, &cfg, seed, &opts).map_err(|e| e.to_string())?;
    let (b, trace_b) = simulate_traced(data, TreatmentCode::FASTREAD, &cfg, seed, &opts).map_err(|e| e.to_string())?;
    let queries = |t: &[fastread::eval::RoundTrace]| t.iter().map(|r| r.queried.clone()).collect::<Vec<_>>();
    if queries(&trace) != queries(&trace_b) || a.x95 != b.x95 {
        return Err("replay produced a different query sequence".into());
    }

    let mut stable_retrains = 0;
    for (k, r) in trace.iter().enumerate() {
        let found = r.found_before;
        let irrelevant = r.labeled_before - found;
        let want = if found == 0 || irrelevant == 0 {
            Phase::Random
        } else if found < cfg.t2 {
            Phase::Uncertainty
        } else {
            Phase::Certainty
        };
        if r.phase != want {
            return Err(format!("round {k}: phase {} with {found} relevant, {irrelevant} irrelevant", r.phase));
        }
        if found == 0 || irrelevant == 0 {
            if r.trained.is_some() {
                return Err(format!("round {k}: trained on a single class"));
            }
            continue;
        }
        let size = r.trained.ok_or_else(|| format!("round {k}: HUTM skipped a retrain"))?;
        let expected = if found >= cfg.t2 {
            stable_retrains += 1;
            found + found.min(irrelevant)
        } else {
            r.labeled_before
        };
        if size != expected || r.undersampled != (found >= cfg.t2) {
            return Err(format!("round {k}: training set {size}, expected {expected}"));
        }
    }
    Ok(stable_retrains)
}

/// What a client sees of a session at one point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub status: fastread::service::Status,
    pub curve: Vec<(usize, usize)>,
    pub next: Option<fastread::service::Batch>,
}

pub fn observe(s: &mut fastread::service::Session) -> Observed {
    Observed {
        status: s.status(),
        curve: s.curve().to_vec(),
        next: s.next_batch().ok(),
    }
}

/// One randomized crash-replay trial. A reference session codes a random
/// number of batches (mostly truthfully, sometimes re-coding an earlier
/// study); after every journal append the on-disk files are snapshotted.
/// Each snapshot, optionally with a torn half-written line appended, is
/// reopened and must show the same status, curve, and next batch as the
/// live session did at that point.
pub fn crash_replay_trial(trial: u64, corpus: &fastread::corpus::Corpus) -> Result<usize, String> {
    use fastread::active::{TreatmentCode, TreatmentConfig};
    use fastread::corpus::Code;
    use fastread::service::{LabelEvent, Session};

    let mut r = rng(1000 + trial);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let code = if trial % 5 == 4 {
        // a frozen learner takes the other recovery path
        "HUSM".parse().unwrap()
    } else {
        TreatmentCode::FASTREAD
    };
    let seed = r.random();
    let cfg = TreatmentConfig::default();
    let mut live = Session::create(tmp.path(), "live", corpus.clone(), code, seed, cfg).map_err(|e| e.to_string())?;
    let journal = live.dir().join("journal.jsonl");

    let rounds = r.random_range(1..=40usize);
    let mut checkpoints = vec![(Vec::new(), observe(&mut live))];
    for _ in 0..rounds {
        let Ok(batch) = live.next_batch() else { break };
        let take = r.random_range(1..=batch.ids.len());
        let mut labels: Vec<LabelEvent> = batch.ids[..take]
            .iter()
            .map(|&id| {
                let truth = corpus.studies[id].oracle_label.unwrap().is_relevant();
                let yes = if r.random_bool(0.05) { !truth } else { truth };
                LabelEvent { id, code: if yes { Code::Yes } else { Code::No } }
            })
            .collect();
        if r.random_bool(0.2) {
            if let Some(&old) = live.state().labeled().first() {
                labels.push(LabelEvent { id: old, code: Code::Yes });
            }
        }
        live.submit(labels).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&journal).map_err(|e| e.to_string())?;
        checkpoints.push((bytes, observe(&mut live)));
    }

    for (k, (bytes, want)) in checkpoints.iter().enumerate() {
        let dir = tmp.path().join(format!("crash{k}"));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for f in ["corpus.csv", "meta.json"] {
            std::fs::copy(live.dir().join(f), dir.join(f)).map_err(|e| e.to_string())?;
        }
        let mut on_disk = bytes.clone();
        if r.random_bool(0.5) {
            // the next append was cut short
            on_disk.extend_from_slice(br#"{"seq":99,"labels":[{"id":1,"co"#);
        }
        std::fs::write(dir.join("journal.jsonl"), on_disk).map_err(|e| e.to_string())?;
        let mut back = Session::open(&dir, cfg).map_err(|e| format!("checkpoint {k}: {e}"))?;
        let got = observe(&mut back);
        if &got != want {
            return Err(format!("trial {trial} checkpoint {k}: recovered {got:?}, live {want:?}"));
        }
    }
    Ok(checkpoints.len() - 1)
}
