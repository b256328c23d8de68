//! End-to-end acceptance suite. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veinpulse::error::Error;
use veinpulse::frame::Frame;
use veinpulse::hr::{self, TrendSeries};
use veinpulse::morph::{self, StructuringElement};
use veinpulse::pipeline::{self, Preset};
use veinpulse::roi::{localize_finger, FingerMask};
use veinpulse::synth::{GroundTruth, Phantom, PhantomSpec, VesselSpec};
use veinpulse::track::{width_series, TrackingPolicy};
use veinpulse::veinmap::{self, binarize, Method, ScoreField, VeinMap};
use veinpulse::{pgm, render_phantom, PipelineConfig, VideoSequence};

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn record(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn phantom(jitter: f64, seed: u64) -> PhantomSpec {
    PhantomSpec {
        jitter_px_per_frame: jitter,
        seed,
        ..PhantomSpec::default()
    }
}

fn bpm(video: &VideoSequence, method: Method) -> (f64, f64, Vec<String>) {
    let cfg = PipelineConfig::default();
    let t = Instant::now();
    let out = single_threaded(|| pipeline::monitor(video, method, Preset::for_method(method), &cfg))
        .expect("monitor");
    (out.analysis.result.bpm, t.elapsed().as_secs_f64(), out.analysis.warnings)
}

fn label(method: Method) -> &'static str {
    pipeline::method_name(method)
}

const METHODS: [Method; 2] = [Method::MaxCurvature, Method::RepeatedLineTracking];

fn criterion_1_and_3(report: &mut Report) {
    let (jitter5, _) = render_phantom(&phantom(5.0, 11)).unwrap();
    let (still, _) = render_phantom(&phantom(0.0, 11)).unwrap();
    let (jitter10, _) = render_phantom(&phantom(10.0, 11)).unwrap();
    for method in METHODS {
        let (b, secs, _) = bpm(&jitter5, method);
        report.record(
            "1",
            &format!("77-bpm phantom, jitter 5, {}", label(method)),
            (72.0..=82.0).contains(&b) && secs < 60.0,
            format!("bpm {b:.1} (want 72..=82), {secs:.1} s single-threaded (want < 60)"),
        );
    }
    for method in METHODS {
        let (b0, _, _) = bpm(&still, method);
        let (b10, _, _) = bpm(&jitter10, method);
        let diff = (b10 - b0).abs();
        report.record(
            "3",
            &format!("jitter 10 vs jitter-free, {}", label(method)),
            diff <= 3.0,
            format!("bpm {b10:.1} vs {b0:.1}, |diff| {diff:.1} (want <= 3)"),
        );
    }
}

fn criterion_2(report: &mut Report) {
    let spec = PhantomSpec {
        seed: 21,
        ..PhantomSpec::near_infrared()
    };
    let (video, _) = render_phantom(&spec).unwrap();
    let cfg = PipelineConfig::default();
    let out = pipeline::monitor(&video, Method::RepeatedLineTracking, Preset::PaperRlt, &cfg).unwrap();
    let n = out.analysis.result.peak_count;
    report.record(
        "2",
        "75-bpm near-infrared phantom, rlt",
        n.abs_diff(75) <= 5,
        format!("{n} peaks (want 75 +/- 5)"),
    );
}

fn straight_vessel_spec() -> PhantomSpec {
    PhantomSpec {
        duration_s: 1.0 / 30.0,
        vessels: vec![VesselSpec {
            center_row: 48.0,
            base_width: 5.0,
            modulation_amplitude: 0.0,
            orientation_deg: 90.0,
        }],
        seed: 4,
        ..PhantomSpec::default()
    }
}

fn criterion_4(report: &mut Report) {
    let cfg = PipelineConfig::default();
    let (video, _) = render_phantom(&straight_vessel_spec()).unwrap();
    let frame = &video.frames()[0];
    let mask = localize_finger(frame, cfg.edge_half_height).unwrap();
    let field = veinmap::max_curvature(frame, &mask, cfg.curvature_sigma).unwrap();
    let map = binarize(&field, cfg.binarize_percentile).unwrap();
    let center = frame.width() / 2;
    let (mut rows, mut good) = (0, 0);
    for y in 0..frame.height() {
        if !mask.inside(center, y) {
            continue;
        }
        rows += 1;
        if let Some(c) = row_run_center(&map, y, center) {
            if (c - center as f64).abs() <= 1.0 {
                good += 1;
            }
        }
    }
    let frac = good as f64 / rows as f64;
    report.record(
        "4",
        "max curvature centerline on straight vessel",
        frac >= 0.95,
        format!("{good}/{rows} mask rows within +/-1 px ({:.1}%, want >= 95%)", frac * 100.0),
    );

    let spec = PhantomSpec { seed: 5, ..PhantomSpec::default() };
    let p = Phantom::new(spec).unwrap();
    let frame = p.render_frame(0);
    let mask = localize_finger(&frame, cfg.edge_half_height).unwrap();
    let field = veinmap::repeated_line_tracking(&frame, &mask, 3000, cfg.rlt_valley_radius, 0).unwrap();
    let vessel = p.truth().vessel_mask(0);
    let (on, off) = mean_on_off(&field, &vessel, &mask);
    report.record(
        "4",
        "line tracking locus contrast",
        on > 5.0 * off,
        format!("vessel mean {on:.2} vs background mean {off:.3}, ratio {:.1} (want > 5)", on / off.max(f64::MIN_POSITIVE)),
    );
}

/// Center column of the foreground run in row `y` nearest `x0`.
fn row_run_center(map: &VeinMap, y: usize, x0: usize) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    let mut x = 0;
    while x < map.width() {
        if map.get(x, y) {
            let l = x;
            while x < map.width() && map.get(x, y) {
                x += 1;
            }
            let c = (l + x - 1) as f64 / 2.0;
            let d = (c - x0 as f64).abs();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        } else {
            x += 1;
        }
    }
    best.map(|(_, c)| c)
}

fn mean_on_off(field: &ScoreField, vessel: &VeinMap, mask: &FingerMask) -> (f64, f64) {
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..field.height() {
        for x in 0..field.width() {
            if !mask.inside(x, y) {
                continue;
            }
            if vessel.get(x, y) {
                on += field.get(x, y);
                n_on += 1.0;
            } else {
                off += field.get(x, y);
                n_off += 1.0;
            }
        }
    }
    (on / n_on, off / n_off)
}

/// Share of finger pixels farther than 2 px from any vessel that are marked.
fn false_positive_rate(map: &VeinMap, truth: &GroundTruth, frame: usize, mask: &FingerMask) -> f64 {
    let near = morph::dilate(&truth.vessel_mask(frame), &StructuringElement::square(2).unwrap());
    let (mut fp, mut n) = (0usize, 0usize);
    for y in 0..map.height() {
        for x in 0..map.width() {
            if mask.inside(x, y) && !near.get(x, y) {
                n += 1;
                fp += usize::from(map.get(x, y));
            }
        }
    }
    fp as f64 / n as f64
}

fn speckle_spec() -> PhantomSpec {
    PhantomSpec {
        duration_s: 10.0 / 30.0,
        noise_sigma: 0.06,
        seed: 8,
        ..PhantomSpec::default()
    }
}

fn criterion_5(report: &mut Report) {
    let cfg = PipelineConfig::default();
    let p = Phantom::new(speckle_spec()).unwrap();
    let mut rates = [[0.0; 2]; 2];
    for (m, method) in METHODS.into_iter().enumerate() {
        for i in 0..p.frame_count() {
            let frame = p.render_frame(i);
            let maps = pipeline::process_frame(&frame, method, Preset::for_method(method), &cfg, i).unwrap();
            rates[m][0] += false_positive_rate(&maps.raw, p.truth(), i, &maps.mask);
            rates[m][1] += false_positive_rate(&maps.post, p.truth(), i, &maps.mask);
        }
        for r in &mut rates[m] {
            *r /= p.frame_count() as f64;
        }
    }
    let [[mc_raw, mc_post], [rlt_raw, rlt_post]] = rates;
    report.record(
        "5",
        "speckle phantom raw false positives, rlt vs max curvature",
        rlt_raw >= 3.0 * mc_raw,
        format!(
            "rlt {:.2}% vs maxcurv {:.2}%, ratio {:.1} (want >= 3)",
            rlt_raw * 100.0,
            mc_raw * 100.0,
            rlt_raw / mc_raw.max(f64::MIN_POSITIVE)
        ),
    );
    report.record(
        "5",
        "speckle phantom post-processed false positives",
        mc_post < 0.01 && rlt_post < 0.01,
        format!("maxcurv {:.2}%, rlt {:.2}% (want both < 1%)", mc_post * 100.0, rlt_post * 100.0),
    );
}

fn criterion_6(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    const CASES: usize = 200;

    let mut worst: f64 = 0.0;
    for _ in 0..CASES {
        let window = 2 * rng.random_range(1..8usize) + 1;
        let order = rng.random_range(0..window.min(6));
        let coeffs: Vec<f64> = (0..=order).map(|_| rng.random_range(-2.0..2.0)).collect();
        let n = rng.random_range(window..window + 60);
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            })
            .collect();
        let s = hr::savitzky_golay(&TrendSeries::raw(x.clone(), 30.0).unwrap(), window, order).unwrap();
        for (a, b) in x.iter().zip(&s.values) {
            worst = worst.max((a - b).abs());
        }
    }
    report.record(
        "6",
        "Savitzky-Golay exact on polynomials",
        worst < 1e-9,
        format!("{CASES} cases, max |error| {worst:.2e} (want < 1e-9)"),
    );

    let mut ok = true;
    for _ in 0..CASES {
        let r = rng.random_range(1..3);
        let se = if rng.random_bool(0.5) {
            StructuringElement::square(r).unwrap()
        } else {
            StructuringElement::disk(r).unwrap()
        };
        // a background border of the element radius keeps the frame edge
        // out of the duality
        let (w, h) = (rng.random_range(3..20) + 2 * r, rng.random_range(3..20) + 2 * r);
        let density = rng.random_range(0.1..0.9);
        let mut x = VeinMap::empty(w, h);
        for py in r..h - r {
            for px in r..w - r {
                x.set(px, py, rng.random_bool(density));
            }
        }
        let dual = morph::dilate(&x.complement(), &se.reflected()).complement();
        let opened = morph::open(&x, &se);
        ok &= morph::erode(&x, &se) == dual;
        ok &= morph::open(&opened, &se) == opened;
        ok &= x.is_subset_of(&morph::dilate(&x, &se));
        ok &= morph::erode(&x, &se).is_subset_of(&x);
        let mut y = x.clone();
        y.set(rng.random_range(r..w - r), rng.random_range(r..h - r), true);
        ok &= morph::dilate(&x, &se).is_subset_of(&morph::dilate(&y, &se));
        ok &= morph::erode(&x, &se).is_subset_of(&morph::erode(&y, &se));
    }
    report.record(
        "6",
        "morphology duality, idempotence, monotonicity",
        ok,
        format!("{CASES} random maps"),
    );

    let mut ok = true;
    for _ in 0..CASES {
        let (w, h) = (rng.random_range(2..16), rng.random_range(2..16));
        let mut scores: Vec<f64> = (0..w * h)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..5.0) })
            .collect();
        scores[0] = 1.0;
        let f = ScoreField::from_scores(w, h, scores, Method::MaxCurvature, &FingerMask::full(w, h)).unwrap();
        let p = rng.random_range(0.0..99.0);
        let q = rng.random_range(p..99.9);
        ok &= binarize(&f, q).unwrap().is_subset_of(&binarize(&f, p).unwrap());
    }
    report.record("6", "binarize subset monotonicity", ok, format!("{CASES} random fields"));

    let spec = PhantomSpec { duration_s: 0.5, seed: 99, ..PhantomSpec::default() };
    let (a, _) = render_phantom(&spec).unwrap();
    let (b, _) = render_phantom(&spec).unwrap();
    let synth_same = a.frames() == b.frames();
    let frame = &a.frames()[0];
    let mask = localize_finger(frame, 4).unwrap();
    let r1 = veinmap::repeated_line_tracking(frame, &mask, 2000, 14.0, 3).unwrap();
    let r2 = veinmap::repeated_line_tracking(frame, &mask, 2000, 14.0, 3).unwrap();
    let r3 = single_threaded(|| veinmap::repeated_line_tracking(frame, &mask, 2000, 14.0, 3).unwrap());
    report.record(
        "6",
        "seeded determinism of line tracking and phantom",
        synth_same && r1 == r2 && r1 == r3,
        format!("phantom identical: {synth_same}, locus identical: {}", r1 == r2 && r1 == r3),
    );

    let mut ok = true;
    for _ in 0..CASES {
        let slope = rng.random_range(-5.0..5.0);
        let offset = rng.random_range(-10.0..10.0);
        let fps = rng.random_range(1.0..120.0);
        let n = rng.random_range(3..50);
        let x = (0..n).map(|i| offset + slope * i as f64).collect();
        let d = hr::differentiate(&TrendSeries::raw(x, fps).unwrap()).unwrap();
        ok &= d.values.iter().all(|v| (v - slope * fps).abs() <= 1e-9 * (1.0 + (slope * fps).abs()));
    }
    report.record("6", "differentiate exact on linear series", ok, format!("{CASES} random lines"));
}

fn criterion_7(report: &mut Report) {
    let spec = PhantomSpec {
        vessels: vec![VesselSpec {
            modulation_amplitude: 0.0,
            ..PhantomSpec::default().vessels[0]
        }],
        seed: 17,
        ..PhantomSpec::default()
    };
    let (video, _) = render_phantom(&spec).unwrap();
    for method in METHODS {
        let (b, _, warnings) = bpm(&video, method);
        let peaks = (b * video.duration_s() / 60.0).round() as usize;
        report.record(
            "7",
            &format!("zero-modulation phantom, {}", label(method)),
            peaks <= 2 && !warnings.is_empty(),
            format!("{peaks} peaks (want <= 2), {} warning(s)", warnings.len()),
        );
    }

    let mask = FingerMask::full(16, 16);
    let zero = ScoreField::from_scores(16, 16, vec![0.0; 256], Method::MaxCurvature, &mask).unwrap();
    let err = binarize(&zero, 80.0);
    report.record(
        "7",
        "all-zero score field",
        matches!(err, Err(Error::EmptyMap)),
        format!("{:?}", err.map(|m| m.count())),
    );

    let maps: Vec<VeinMap> = (0..100)
        .map(|i| {
            let mut m = VeinMap::empty(32, 32);
            if i % 4 != 0 {
                for x in 0..32 {
                    for y in 14..19 {
                        m.set(x, y, true);
                    }
                }
            }
            m
        })
        .collect();
    let lib_err = width_series(&maps, &[], &TrackingPolicy::default(), 30.0);
    let lib_ok = matches!(&lib_err, Err(e @ Error::TrackingFailure { gapped: 25, total: 100 }) if e.exit_code() == 3);

    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    let p = Phantom::new(PhantomSpec { duration_s: 4.0, seed: 2, ..PhantomSpec::default() }).unwrap();
    for i in 0..p.frame_count() {
        let f = if i % 4 == 1 {
            Frame::filled(128, 96, 0.5).unwrap()
        } else {
            p.render_frame(i)
        };
        pgm::write(&frames.join(format!("f{i:04}.pgm")), f.width(), f.height(), &f.denormalize()).unwrap();
    }
    let out = Command::new(env!("CARGO_BIN_EXE_veinpulse"))
        .args(["monitor", "--fps", "30", "--frames"])
        .arg(&frames)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr);
    report.record(
        "7",
        "more than 20% tracking gaps",
        lib_ok && out.status.code() == Some(3) && stderr.contains("tracking failure"),
        format!("library: {lib_err:?}; cli exit {:?}: {}", out.status.code(), stderr.trim()),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0, total: 0 };
    let t = Instant::now();
    criterion_1_and_3(&mut report);
    criterion_2(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    println!(
        "acceptance: {} of {} checks passed in {:.0} s",
        report.total - report.failed,
        report.total,
        t.elapsed().as_secs_f64()
    );
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
