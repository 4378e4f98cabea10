//! Acceptance suite. Each criterion is checked against an oracle written
//! here, independently of the library code it exercises, and reported as one
//! PASS/FAIL line. The process exits nonzero if any criterion fails.

use eyespot::classifier::{Loss, MlpParams};
use eyespot::config::{Config, Sidecar};
use eyespot::dataset::Preprocessor;
use eyespot::detector::{detect, is_skin};
use eyespot::gabor::{convolve, make_kernel, Envelope, GaborKernel, GaborParams};
use eyespot::imaging::{hsv_to_rgb, load_image, rgb_to_hsv, rgb_to_lab, ImageGray, Rect};
use eyespot::metrics::{accuracy, sensitivity, specificity, ConfusionCounts};
use eyespot::morphology::{
    close, connected_components, dilate, erode, label_components, open, BinaryMask, Connectivity, StructElement,
};
use eyespot_cli::{cmd_eval, cmd_make_dataset, cmd_synth, cmd_train, EvalArgs, MakeDatasetArgs, SynthArgs, TrainArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))?;
    Ok(took)
}

// ---------------------------------------------------------------- 1

fn random_net(rng: &mut ChaCha8Rng, n_in: usize, n_hidden: usize) -> MlpParams {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (w1, b1, w2) = (v(n_in * n_hidden), v(n_hidden), v(n_hidden));
    MlpParams::from_parts(n_in, n_hidden, w1, b1, w2, rng.random_range(-1.0..1.0)).unwrap()
}

fn gradient_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..100 {
        let n_in = rng.random_range(1..=8);
        let n_hidden = rng.random_range(1..=6);
        let base = random_net(&mut rng, n_in, n_hidden);
        let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        for loss in [Loss::Mse, Loss::CrossEntropy] {
            let g = base.backprop_gradient(&x, t, loss).unwrap();
            let analytic: Vec<f64> = g.w1.iter().chain(&g.b1).chain(&g.w2).chain([&g.b2]).copied().collect();
            for (k, a) in analytic.iter().enumerate() {
                let numeric = {
                    let mut plus = base.clone();
                    *param_mut(&mut plus, k) += h;
                    let mut minus = base.clone();
                    *param_mut(&mut minus, k) -= h;
                    (plus.loss(&x, t, loss).unwrap() - minus.loss(&x, t, loss).unwrap()) / (2.0 * h)
                };
                // Absolute error for gradients too small for a meaningful ratio.
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    ensure(worst < 1e-6, || format!("worst relative error {worst:.3e}"))?;
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!(
        "{checked} partials, worst relative error {worst:.2e}, {took:.2?}"
    ))
}

fn param_mut(m: &mut MlpParams, k: usize) -> &mut f64 {
    let (a, b, c) = (m.w1.len(), m.b1.len(), m.w2.len());
    if k < a {
        &mut m.w1[k]
    } else if k < a + b {
        &mut m.b1[k - a]
    } else if k < a + b + c {
        &mut m.w2[k - a - b]
    } else {
        &mut m.b2
    }
}

// ---------------------------------------------------------------- 2

fn convolution_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let img = ImageGray::new(w, h, (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let size = 2 * rng.random_range(0..=6) + 1;
        let params = GaborParams {
            wavelength: rng.random_range(2.0..10.0),
            orientation: rng.random_range(0.0..std::f64::consts::PI),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            aspect: rng.random_range(0.3..1.5),
            envelope: Envelope::Sigma(rng.random_range(0.5..4.0)),
        };
        let kernel = if rng.random_bool(0.5) {
            make_kernel(&params, Some(size)).unwrap()
        } else {
            GaborKernel::from_taps(
                size,
                (0..size * size).map(|_| rng.random_range(-1.0..1.0)).collect(),
                params,
            )
            .unwrap()
        };
        let fast = convolve(&img, &kernel);
        let c = (size / 2) as isize;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for v in -c..=c {
                    for u in -c..=c {
                        let (sx, sy) = (x - u, y - v);
                        if sx >= 0 && sy >= 0 && sx < w as isize && sy < h as isize {
                            acc += kernel.tap(u, v) * img.get(sx as usize, sy as usize);
                        }
                    }
                }
                worst = worst.max((acc - fast.get(x as usize, y as usize)).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:.3e}"))?;
    let took = within(Duration::from_secs(5), started)?;
    Ok(format!("50 pairs, max difference {worst:.2e}, {took:.2?}"))
}

// ---------------------------------------------------------------- 3

fn subset(a: &BinaryMask, b: &BinaryMask) -> bool {
    a.bits().iter().zip(b.bits()).all(|(x, y)| !x || *y)
}

/// Places a 16x16 mask in a canvas with a background margin wide enough
/// that no 3x3 operation reaches the canvas edge.
fn embed(m: &BinaryMask, pad: usize) -> BinaryMask {
    BinaryMask::from_fn(m.width() + 2 * pad, m.height() + 2 * pad, |x, y| {
        x >= pad && y >= pad && x - pad < m.width() && y - pad < m.height() && m.get(x - pad, y - pad)
    })
    .unwrap()
}

/// Breadth-first flood fill; returns the pixel sets of the components.
fn flood_fill(m: &BinaryMask, eight: bool) -> Vec<BTreeSet<(usize, usize)>> {
    let (w, h) = (m.width(), m.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut set = BTreeSet::new();
            let mut queue = VecDeque::from([(x, y)]);
            seen[y * w + x] = true;
            while let Some((px, py)) = queue.pop_front() {
                set.insert((px, py));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if m.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push(set);
        }
    }
    out
}

fn morphology_laws() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pad = 4;
    for i in 0..200 {
        let density = rng.random_range(0.1..0.9);
        let bits: Vec<bool> = (0..256).map(|_| rng.random_bool(density)).collect();
        let raw = BinaryMask::new(16, 16, bits).unwrap();
        let a = embed(&raw, pad);
        let mut se_bits: Vec<bool> = (0..9).map(|_| rng.random_bool(0.6)).collect();
        se_bits[4] = true;
        let se = StructElement::new(3, 3, se_bits).unwrap();
        let fail = |law: &str| format!("mask {i}: {law}");

        // Outside the image reads as background for a mask and for its
        // complement alike, so duality is compared where the element fits.
        let (lhs, rhs) = (dilate(&a, &se), erode(&a.complement(), &se.reflect()).complement());
        let interior = |m: &BinaryMask| m.crop(Rect::new(1, 1, m.width() - 2, m.height() - 2)).unwrap();
        ensure(interior(&lhs) == interior(&rhs), || fail("duality"))?;
        ensure(subset(&erode(&a, &se), &a), || fail("erosion anti-extensive"))?;
        ensure(subset(&a, &dilate(&a, &se)), || fail("dilation extensive"))?;
        ensure(subset(&open(&a, &se), &a), || fail("opening anti-extensive"))?;
        ensure(subset(&a, &close(&a, &se)), || fail("closing extensive"))?;
        ensure(open(&open(&a, &se), &se) == open(&a, &se), || {
            fail("opening idempotent")
        })?;
        ensure(close(&close(&a, &se), &se) == close(&a, &se), || {
            fail("closing idempotent")
        })?;

        // a subset b of a by dropping random pixels
        let b = BinaryMask::new(
            a.width(),
            a.height(),
            a.bits().iter().map(|&x| x && rng.random_bool(0.7)).collect(),
        )
        .unwrap();
        for (name, f) in [
            ("erode", erode as fn(&BinaryMask, &StructElement) -> BinaryMask),
            ("dilate", dilate),
            ("open", open),
            ("close", close),
        ] {
            ensure(subset(&f(&b, &se), &f(&a, &se)), || fail(&format!("{name} monotone")))?;
        }

        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let (labels, comps) = label_components(&raw, conn);
            let mut ours: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); comps.len()];
            for (k, &l) in labels.iter().enumerate() {
                if l > 0 {
                    ours[l as usize - 1].insert((k % 16, k / 16));
                }
            }
            let oracle = flood_fill(&raw, eight);
            ensure(ours == oracle, || {
                fail(&format!("{conn:?} components differ from flood fill"))
            })?;
            for (c, set) in connected_components(&raw, conn).iter().zip(&oracle) {
                let xs = set.iter().map(|p| p.0);
                let ys = set.iter().map(|p| p.1);
                let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
                let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
                ensure(c.area == set.len(), || fail("component area"))?;
                ensure(c.bbox.to_array() == [x0, y0, x1 - x0 + 1, y1 - y0 + 1], || {
                    fail("component bbox")
                })?;
            }
        }
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!(
        "200 masks, 4- and 8-connected labelling match flood fill, {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 4

fn gabor_correctness() -> Outcome {
    let params = GaborParams {
        wavelength: 4.0,
        orientation: 0.0,
        phase: 0.0,
        aspect: 1.0,
        envelope: Envelope::Sigma(2.0),
    };
    let k = make_kernel(&params, Some(9)).unwrap();
    ensure(k.tap(0, 0) == 1.0, || format!("centre tap {}", k.tap(0, 0)))?;
    let expected = (-0.5f64).exp() * std::f64::consts::PI.cos();
    let got = k.tap(2, 0);
    ensure((got - expected).abs() <= 1e-12, || {
        format!("tap (2,0) = {got}, expected {expected}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_period = 0.0f64;
    for _ in 0..200 {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let p = GaborParams {
            wavelength: rng.random_range(2.0..12.0),
            orientation: theta,
            phase: 0.0,
            aspect: rng.random_range(0.2..2.0),
            envelope: Envelope::Bandwidth(rng.random_range(0.5..2.0)),
        };
        let size = 2 * rng.random_range(1..=10) + 1;
        let k = make_kernel(&p, Some(size)).unwrap();
        let flipped = make_kernel(
            &GaborParams {
                orientation: theta + std::f64::consts::PI,
                ..p
            },
            Some(size),
        )
        .unwrap();
        let c = (size / 2) as isize;
        for y in -c..=c {
            for x in -c..=c {
                ensure(k.tap(x, y) == k.tap(-x, -y), || {
                    format!("not point-symmetric at ({x},{y}), theta {theta}")
                })?;
                worst_period = worst_period.max((k.tap(x, y) - flipped.tap(x, y)).abs());
            }
        }
    }
    // theta + pi differs from theta by one rounding of the angle
    ensure(worst_period <= 1e-12, || {
        format!("theta and theta+pi differ by {worst_period:.3e}")
    })?;
    Ok(format!(
        "tap (2,0) = {got:.6}, 200 kernels symmetric, theta period error {worst_period:.1e}"
    ))
}

// ---------------------------------------------------------------- 5

fn colour_fidelity() -> Outcome {
    let white = rgb_to_lab(255, 255, 255);
    ensure(
        (white.l - 100.0).abs() < 0.01 && white.a.abs() < 0.01 && white.b.abs() < 0.01,
        || format!("white -> {white:?}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100_000 {
        let rgb: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let back = hsv_to_rgb(rgb_to_hsv(rgb[0], rgb[1], rgb[2]));
        ensure(back == rgb, || format!("{rgb:?} -> {back:?}"))?;
    }
    // A pixel whose hue sits exactly on either band edge is not skin.
    for _ in 0..1000 {
        let rgb: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let h = rgb_to_hsv(rgb[0], rgb[1], rgb[2]).h;
        if h <= 0.0 || h >= 0.999 {
            continue;
        }
        ensure(!is_skin(rgb, (h, 1.0)) && !is_skin(rgb, (0.0, h)), || {
            format!("{rgb:?} on band edge {h}")
        })?;
        ensure(is_skin(rgb, (h * 0.999, (h + 1.0) / 2.0)), || {
            format!("{rgb:?} inside band")
        })?;
    }
    Ok(format!(
        "white -> L {:.4} a {:.1e} b {:.1e}, 1e5 HSV round trips exact",
        white.l, white.a, white.b
    ))
}

// ---------------------------------------------------------------- 6, 7, 8

const TRAIN_SEEDS: [u64; 3] = [42, 43, 44];

/// Settings of the desk-scale experiment. Everything not listed keeps its
/// default (40 variants per eye, 200 hidden units, 3 mining rounds).
const EXPERIMENT_CONFIG: &str = "seed = 42\n[train]\nepochs = 5\n";

struct Corpus {
    dir: PathBuf,
    cfg: Config,
    train_manifest: PathBuf,
    heldout_manifest: PathBuf,
    cache: PathBuf,
}

struct Run {
    model: PathBuf,
    eval_json: PathBuf,
    heldout_fp: Vec<usize>,
    report: eyespot::metrics::EvalReport,
}

fn prepare(dir: &Path) -> anyhow::Result<Corpus> {
    let cfg = Config::parse(EXPERIMENT_CONFIG)?;
    let sink = &mut std::io::sink();
    let train_dir = dir.join("train");
    let heldout_dir = dir.join("heldout");
    cmd_synth(
        &cfg,
        &SynthArgs {
            out: train_dir.clone(),
            faces: Some(60),
            scenery: Some(60),
            seed: Some(42),
        },
        sink,
    )?;
    cmd_synth(
        &cfg,
        &SynthArgs {
            out: heldout_dir.clone(),
            faces: Some(40),
            scenery: Some(40),
            seed: Some(43),
        },
        sink,
    )?;
    let cache = dir.join("eyes.eyeds");
    cmd_make_dataset(
        &cfg,
        &MakeDatasetArgs {
            manifest: train_dir.join("manifest.jsonl"),
            out: cache.clone(),
            seed: None,
            augment_count: None,
        },
        sink,
    )?;
    Ok(Corpus {
        dir: dir.to_path_buf(),
        cfg,
        train_manifest: train_dir.join("manifest.jsonl"),
        heldout_manifest: heldout_dir.join("manifest.jsonl"),
        cache,
    })
}

fn train_and_eval(c: &Corpus, seed: u64) -> anyhow::Result<Run> {
    let sink = &mut std::io::sink();
    let model = c.dir.join(format!("model_{seed}.bin"));
    let summary = cmd_train(
        &c.cfg,
        &TrainArgs {
            dataset: c.cache.clone(),
            manifest: c.train_manifest.clone(),
            out: model.clone(),
            heldout: Some(c.heldout_manifest.clone()),
            seed: Some(seed),
            epochs: None,
            rounds: None,
            hidden: None,
        },
        sink,
    )?;
    let eval_json = c.dir.join(format!("eval_{seed}.json"));
    let report = cmd_eval(
        &c.cfg,
        &EvalArgs {
            manifest: c.heldout_manifest.clone(),
            model: model.clone(),
            json_out: Some(eval_json.clone()),
            iou: Some(0.25),
            threshold: None,
        },
        sink,
    )?;
    Ok(Run {
        model,
        eval_json,
        heldout_fp: summary.heldout_fp,
        report,
    })
}

/// Detections on each held-out face against those on its mirror image.
fn mirror_error(c: &Corpus, model_path: &Path) -> anyhow::Result<f64> {
    let model = eyespot::classifier::load_model(model_path)?;
    let meta = Sidecar::load(model_path)?.expect("train writes a sidecar");
    let pre = Preprocessor::new(&meta.preprocess, meta.layout.window_w, meta.layout.window_h)?;
    let manifest = eyespot::dataset::Manifest::load(&c.heldout_manifest)?;
    let mut worst = 0.0f64;
    for e in manifest.eyes() {
        let img = load_image(&e.resolved)?;
        let w = img.width() as f64;
        let plain = detect(&img, &model, &meta.layout, &pre, &c.cfg.pipeline)?;
        let mirrored = detect(&img.flip_horizontal(), &model, &meta.layout, &pre, &c.cfg.pipeline)?;
        anyhow::ensure!(
            plain.detections.len() == mirrored.detections.len(),
            "{}: {} detections, {} when mirrored",
            e.path,
            plain.detections.len(),
            mirrored.detections.len()
        );
        for d in &plain.detections {
            let (cx, cy) = d.bbox.center();
            let best = mirrored
                .detections
                .iter()
                .map(|m| {
                    let (mx, my) = m.bbox.center();
                    ((w - mx - cx).powi(2) + (my - cy).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
    }
    Ok(worst)
}

fn end_to_end(c: &Corpus, run: &Run, took: Duration) -> Outcome {
    let r = &run.report;
    let fmt = |v: Option<f64>| v.map_or("undefined".into(), |v| format!("{v:.3}"));
    let summary = format!(
        "sensitivity {} specificity {} accuracy {} success {:.3} max centre error {} px",
        fmt(r.sensitivity),
        fmt(r.specificity),
        fmt(r.accuracy),
        r.success_rate,
        fmt(r.max_center_error)
    );
    let ok = r.sensitivity.is_some_and(|v| v >= 0.9)
        && r.specificity.is_some_and(|v| v >= 0.9)
        && r.success_rate >= 0.9
        && r.max_center_error.is_none_or(|e| e <= 3.0);
    ensure(ok, || summary.clone())?;
    ensure(took < Duration::from_secs(300), || {
        format!("{summary}; took {took:.1?}")
    })?;
    let mirror = mirror_error(c, &run.model).map_err(|e| format!("{summary}; mirror check: {e:#}"))?;
    ensure(mirror <= 2.0, || {
        format!("{summary}; mirrored detections off by {mirror:.2} px")
    })?;
    Ok(format!("{summary}, mirror error {mirror:.2} px, {took:.1?}"))
}

fn bootstrap_behaviour(fps: &[(u64, Vec<usize>)]) -> Outcome {
    let lines: Vec<String> = fps.iter().map(|(s, fp)| format!("seed {s}: {fp:?}")).collect();
    let good = fps
        .iter()
        .filter(|(_, fp)| fp.len() >= 2 && fp.windows(2).all(|w| w[1] <= w[0]))
        .count();
    let text = format!("{} ({good}/3 non-increasing)", lines.join(", "));
    ensure(good >= 2, || text.clone())?;
    Ok(text)
}

fn determinism(first: (&Corpus, &Run), second: (&Corpus, &Run)) -> Outcome {
    let same = |a: &Path, b: &Path| -> Result<usize, String> {
        let (x, y) = (
            std::fs::read(a).map_err(|e| e.to_string())?,
            std::fs::read(b).map_err(|e| e.to_string())?,
        );
        ensure(x == y, || format!("{} and {} differ", a.display(), b.display()))?;
        Ok(x.len())
    };
    let cache = same(&first.0.cache, &second.0.cache)?;
    let model = same(&first.1.model, &second.1.model)?;
    let eval = same(&first.1.eval_json, &second.1.eval_json)?;
    Ok(format!(
        "cache {cache} B, model {model} B, eval JSON {eval} B identical"
    ))
}

// ---------------------------------------------------------------- 9

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..1000 {
        // every fourth tuple zeroes some counts to reach the undefined cases
        let mut n = || {
            if i % 4 == 0 && rng.random_bool(0.5) {
                0
            } else {
                rng.random_range(0..10_000u64)
            }
        };
        let c = ConfusionCounts::new(n(), n(), n(), n());
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let expect = [
            ratio(c.tp, c.tp + c.fn_),
            ratio(c.tn, c.tn + c.fp),
            ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_),
        ];
        let got = [sensitivity(&c), specificity(&c), accuracy(&c)];
        ensure(got == expect, || format!("{c:?}: got {got:?}, expected {expect:?}"))?;
    }
    let zero = ConfusionCounts::new(0, 0, 0, 0);
    ensure(
        sensitivity(&zero).is_none() && specificity(&zero).is_none() && accuracy(&zero).is_none(),
        || "all-zero counts gave a number".into(),
    )?;
    ensure(eyespot::metrics::success_rate(&[]).is_err(), || {
        "success rate of no images".into()
    })?;
    Ok("1000 tuples exact, zero denominators undefined".into())
}

// ----------------------------------------------------------------

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gradient oracle", gradient_oracle()),
        (2, "convolution oracle", convolution_oracle()),
        (3, "morphology laws", morphology_laws()),
        (4, "gabor correctness", gabor_correctness()),
        (5, "colour fidelity", colour_fidelity()),
    ];

    let experiment = || -> anyhow::Result<(Outcome, Outcome, Outcome)> {
        let (dir_a, dir_b) = (tempfile::tempdir()?, tempfile::tempdir()?);
        let started = Instant::now();
        let corpus = prepare(dir_a.path())?;
        let first = train_and_eval(&corpus, TRAIN_SEEDS[0])?;
        let took = started.elapsed();
        let e2e = end_to_end(&corpus, &first, took);

        let mut fps = vec![(TRAIN_SEEDS[0], first.heldout_fp.clone())];
        for &seed in &TRAIN_SEEDS[1..] {
            fps.push((seed, train_and_eval(&corpus, seed)?.heldout_fp));
        }
        let boot = bootstrap_behaviour(&fps);

        let corpus_b = prepare(dir_b.path())?;
        let repeat = train_and_eval(&corpus_b, TRAIN_SEEDS[0])?;
        let det = determinism((&corpus, &first), (&corpus_b, &repeat));
        Ok((e2e, boot, det))
    };
    match experiment() {
        Ok((a, b, c)) => {
            results.push((6, "synthetic end-to-end", a));
            results.push((7, "bootstrap behaviour", b));
            results.push((8, "determinism", c));
        }
        Err(e) => {
            for (n, name) in [
                (6, "synthetic end-to-end"),
                (7, "bootstrap behaviour"),
                (8, "determinism"),
            ] {
                results.push((n, name, Err(format!("pipeline error: {e:#}"))));
            }
        }
    }
    results.push((9, "metric identities", metric_identities()));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
