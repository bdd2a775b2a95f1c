// Acceptance suite. Runs without the libtest harness so every criterion
// prints one PASS/FAIL line; the process exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use binaural_scene::dsp;
use binaural_scene::metrics::{
    estimate_direction, eval_pair, gcc_phat_lag, magnitude_error, reference_render, Lateral, MetricConfig,
};
use binaural_scene::mixer::{mix, Timeline};
use binaural_scene::pipeline::{run_render, RunConfig, SceneInput};
use binaural_scene::renderer::{render_event, wola_roundtrip, BinauralClip, FramePlan};
use binaural_scene::scene::{parse_scene, parse_scene_line, SceneError, SceneEvent, SourcePose};
use binaural_scene::source::{synth_test_signal, MonoClip, SignalKind};
use binaural_scene::spatializer::{hrir_field, parametric_field, Ear, HrirSet, SpatialConfig, TransferField};

const SR: u32 = 16_000;

type Outcome = Result<String, String>;
type Check = Box<dyn Fn(&SceneError) -> bool>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn render(clip: &MonoClip, field: &TransferField) -> BinauralClip {
    let plan = FramePlan { fft_size: field.fft_size, ..FramePlan::default() }.padded_for(field);
    render_event(clip, field, &plan).expect("render")
}

fn parametric(clip: &MonoClip, az: f64, el: f64, d: f64) -> BinauralClip {
    let plan = FramePlan::default();
    let pose = SourcePose::from_spherical(az, el, d);
    let field = parametric_field(&pose, plan.frame_count(clip.len()), plan.fft_size, SR, &SpatialConfig::default())
        .expect("field");
    render(clip, &field)
}

fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn wola_identity() -> Outcome {
    let clip = MonoClip { samples: white_noise(SR as usize, 1), sample_rate: SR };
    let plan = FramePlan::default();
    let start = Instant::now();
    let back = wola_roundtrip(&clip, &plan).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let err = back.samples.iter().zip(&clip.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err < 1e-6 && secs < 0.1, format!("max abs error {err:.2e}, {:.1} ms", secs * 1e3))
}

fn fourier_shift() -> Outcome {
    let plan = FramePlan::default();
    let n = 12_000;
    let mut train = vec![0.0; n];
    for i in (13..n).step_by(97) {
        train[i] = 1.0;
    }
    let clip = MonoClip { samples: train.clone(), sample_rate: SR };
    let mut worst_int = 0.0f64;
    for d in [1usize, 7, 100, 511, 600, 1000] {
        let field = TransferField::uniform(plan.fft_size, plan.frame_count(n), 1.0, d as f64);
        let out = render(&clip, &field);
        for t in plan.frame_length..n - plan.frame_length {
            let want = if t >= d { train[t - d] } else { 0.0 };
            worst_int = worst_int.max((out.left[t] - want).abs());
        }
    }

    // band-limited input: the phase ramp and the time-domain windowed sinc
    // approximate the same ideal delay only where both are flat
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tones: Vec<(f64, f64)> = (0..50).map(|_| (rng.random_range(40.0..3500.0), rng.random_range(0.0..2.0 * PI))).collect();
    let x: Vec<f64> = (0..n)
        .map(|i| tones.iter().map(|(f, p)| (2.0 * PI * f * i as f64 / SR as f64 + p).sin()).sum::<f64>() / 50.0)
        .collect();
    let clip = MonoClip { samples: x.clone(), sample_rate: SR };
    let field = TransferField::uniform(plan.fft_size, plan.frame_count(n), 1.0, 2.5);
    let out = render(&clip, &field);
    let half = 96isize;
    let (mut sig, mut noise) = (0.0, 0.0);
    for t in plan.frame_length..n - plan.frame_length {
        let want: f64 = (t as isize - half..t as isize + half)
            .map(|m| x[m as usize] * dsp::windowed_sinc(t as f64 - m as f64 - 2.5, 1.0, half as f64))
            .sum();
        sig += want * want;
        noise += (out.left[t] - want).powi(2);
    }
    let snr = 10.0 * (sig / noise).log10();
    check(worst_int < 1e-9 && snr > 60.0, format!("integer max error {worst_int:.2e}, fractional 2.5 SNR {snr:.1} dB"))
}

fn inverse_square() -> Outcome {
    let clip = MonoClip { samples: white_noise(SR as usize, 3), sample_rate: SR };
    let band = |c: &BinauralClip| {
        dsp::band_energy(&c.left, SR, 200.0, 6000.0) + dsp::band_energy(&c.right, SR, 200.0, 6000.0)
    };
    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    for (az, el, d) in [(30.0, 0.0, 2.0), (-120.0, 20.0, 5.0), (0.0, 0.0, 10.0)] {
        let ratio = band(&parametric(&clip, az, el, d)) / band(&parametric(&clip, az, el, 2.0 * d));
        worst = worst.max((ratio / 4.0 - 1.0).abs());
        ratios.push(format!("{ratio:.4}"));
    }
    check(worst <= 0.01, format!("energy ratios d:2d = [{}]", ratios.join(", ")))
}

fn itd() -> Outcome {
    let cfg = SpatialConfig::default();
    let clip = MonoClip { samples: white_noise(SR as usize / 2, 4), sample_rate: SR };
    let out = parametric(&clip, 90.0, 0.0, 1.0);
    let lag = gcc_phat_lag(&out.left, &out.right, (SR / 1000) as usize);
    let woodworth = cfg.head_radius * (PI / 2.0 + 1.0) / cfg.speed_of_sound * SR as f64;
    check(
        (lag - woodworth).abs() <= 1.0,
        format!("GCC-PHAT lag {lag:.3} samples, Woodworth {woodworth:.3} samples ({:.4} ms)", woodworth * 1e3 / SR as f64),
    )
}

fn loss_suite() -> Outcome {
    let cfg = MetricConfig::default();
    if cfg.weights != [1e3, 1.0, 10.0, 1.0] {
        return Err(format!("default weights {:?}", cfg.weights));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nonzero = 0;
    let mut worst_total = 0.0f64;
    for i in 0..100 {
        let len = rng.random_range(1500..6000);
        let x = BinauralClip::new(white_noise(len, 100 + i), white_noise(len, 500 + i), SR);
        let r = eval_pair(&x, &x, &cfg).map_err(|e| e.to_string())?;
        if [r.l2, r.l_phs, r.l_iid, r.l_stft, r.l_mag, r.total] != [0.0; 6] {
            nonzero += 1;
        }
        let y = x.scaled(rng.random_range(0.2..0.9)).swapped();
        let r = eval_pair(&y, &x, &cfg).map_err(|e| e.to_string())?;
        let expected = 1e3 * r.l2 + r.l_phs + 10.0 * r.l_iid + r.l_stft;
        worst_total = worst_total.max((r.total - expected).abs() / expected);
    }
    check(
        nonzero == 0 && worst_total <= 1e-12,
        format!("{nonzero}/100 identical pairs nonzero, worst weighted-total relative error {worst_total:.1e}"),
    )
}

fn direction_oracle() -> Outcome {
    let start = Instant::now();
    let clip = synth_test_signal(SignalKind::Noise, 0.5, SR, 6);
    let mut correct = 0;
    let mut total = 0;
    let mut misses = Vec::new();
    for az in [-150.0, -120.0, -90.0, -60.0, -30.0, 30.0, 60.0, 90.0, 120.0, 150.0] {
        for el in [-45.0, 0.0, 45.0] {
            let est = estimate_direction(&parametric(&clip, az, el, 2.0), None).map_err(|e| e.to_string())?;
            let truth = if az < 0.0 { Lateral::Left } else { Lateral::Right };
            total += 1;
            if est.lateral == truth {
                correct += 1;
            } else {
                misses.push(format!("({az},{el})"));
            }
        }
    }
    let acc = correct as f64 / total as f64;
    let secs = start.elapsed().as_secs_f64();
    check(
        acc >= 0.95 && secs < 30.0,
        format!("left/right {correct}/{total} = {:.1}% in {secs:.2} s{}", acc * 100.0, misses.iter().map(|m| format!(" miss {m}")).collect::<String>()),
    )
}

fn mixer_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for trial in 0..40 {
        let count = rng.random_range(1..=8);
        let placements: Vec<(BinauralClip, f64)> = (0..count)
            .map(|i| {
                let len = rng.random_range(100..3000);
                let l = white_noise(len, trial * 100 + i).iter().map(|v| v * 0.1).collect();
                let r = white_noise(len, trial * 100 + i + 50).iter().map(|v| v * 0.1).collect();
                (BinauralClip::new(l, r, SR), rng.random_range(0..4000) as f64 / SR as f64)
            })
            .collect();
        let mut all = Timeline::new(SR);
        for (c, s) in &placements {
            all.place(c.clone(), *s).map_err(|e| e.to_string())?;
        }
        let (together, report) = mix(&all).map_err(|e| e.to_string())?;
        if report.gain != 1.0 {
            return Err("normalization triggered in a no-normalization trial".into());
        }
        let mut order: Vec<usize> = (0..count as usize).collect();
        order.sort_by_key(|&i| ((placements[i].1 * SR as f64).round() as usize, i));
        let mut sum = BinauralClip::silent(together.len(), SR);
        for i in order {
            let mut one = Timeline::new(SR);
            one.place(placements[i].0.clone(), placements[i].1).map_err(|e| e.to_string())?;
            let part = mix(&one).map_err(|e| e.to_string())?.0.resized(together.len());
            sum.left.iter_mut().zip(&part.left).for_each(|(d, s)| *d += s);
            sum.right.iter_mut().zip(&part.right).for_each(|(d, s)| *d += s);
        }
        if sum != together {
            mismatches += 1;
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = dir.path().join("scene.txt");
    std::fs::write(&scene, "rain@2@0, 60@4@0\ndog barking@1@-90, -30@2@0.5\nchirp@1.5@135, 10@3@1\n")
        .map_err(|e| e.to_string())?;
    let run = |name: &str, workers: usize| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let cfg = RunConfig {
            input: Some(SceneInput::Scene(scene.clone())),
            out: Some(out.clone()),
            workers,
            seed: 11,
            ..RunConfig::default()
        };
        run_render(&cfg).map_err(|e| e.to_json())?;
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a.wav", 1)?, run("b.wav", 4)?);
    check(
        mismatches == 0 && a == b,
        format!("{mismatches}/40 superposition mismatches, pipeline WAVs identical: {} ({} bytes)", a == b, a.len()),
    )
}

fn random_event(rng: &mut ChaCha8Rng) -> SceneEvent {
    const WORDS: [&str; 8] = ["dog", "rain", "distant", "bell", "car horn", "footsteps", "wind", "bird"];
    let label = (0..rng.random_range(1..4)).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ");
    let q = |v: f64, places: i32| (v * 10f64.powi(places)).round() / 10f64.powi(places);
    SceneEvent::new(
        label,
        q(rng.random_range(0.01..30.0), 3),
        q(rng.random_range(-540.0..540.0), 4),
        q(rng.random_range(-90.0..=90.0), 2),
        q(rng.random_range(0.05..500.0), 3),
        q(rng.random_range(0.0..120.0), 2),
    )
    .expect("generated event is valid")
}

fn parser_corpus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let events: Vec<SceneEvent> = (0..200).map(|_| random_event(&mut rng)).collect();
    let mut lossy = 0;
    for e in &events {
        if parse_scene_line(&e.to_record()).ok().as_ref() != Some(e) {
            lossy += 1;
        }
    }
    let text: String = events.iter().map(|e| e.to_record() + "\n").collect();
    let whole_file = parse_scene(&text).map(|s| s.events == events).unwrap_or(false);

    type Expect = fn(&SceneError) -> bool;
    let count: Expect = |e| matches!(e, SceneError::FieldCount { field: "record", .. });
    let position: Expect = |e| matches!(e, SceneError::FieldCount { field: "azimuth, elevation", .. });
    let number = |f: &'static str| move |e: &SceneError| matches!(e, SceneError::NumberParse { field, .. } if *field == f);
    let range = |f: &'static str| move |e: &SceneError| matches!(e, SceneError::RangeViolation { field, .. } if *field == f);
    let cases: Vec<(&str, Check)> = vec![
        ("dog@1@0, 0@1", Box::new(count)),
        ("dog@1@0, 0@1@0@2", Box::new(count)),
        ("dog barking", Box::new(count)),
        ("", Box::new(count)),
        ("dog@1@0@1@0", Box::new(position)),
        ("dog@1@0, 0, 5@1@0", Box::new(position)),
        ("dog@abc@0, 0@1@0", Box::new(number("duration"))),
        ("dog@1e3@0, 0@1@0", Box::new(number("duration"))),
        ("dog@1@left, 0@1@0", Box::new(number("azimuth"))),
        ("dog@1@0, @1@0", Box::new(number("elevation"))),
        ("dog@1@0, 0@far@0", Box::new(number("distance"))),
        ("dog@1@0, 0@1@1.2.3", Box::new(number("start_time"))),
        ("dog@1@0, 0@1@-", Box::new(number("start_time"))),
        ("dog@0@0, 0@1@0", Box::new(range("duration"))),
        ("dog@-2@0, 0@1@0", Box::new(range("duration"))),
        ("dog@1@0, 90.5@1@0", Box::new(range("elevation"))),
        ("dog@1@0, -91@1@0", Box::new(range("elevation"))),
        ("dog@1@0, 0@0@0", Box::new(range("distance"))),
        ("dog@1@0, 0@1@-0.5", Box::new(range("start_time"))),
        ("   @1@0, 0@1@0", Box::new(range("label"))),
    ];
    let mut wrong = Vec::new();
    for (line, expect) in &cases {
        match parse_scene_line(line) {
            Err(e) if expect(&e) && e.line() == Some(1) => {}
            other => wrong.push(format!("{line:?} -> {other:?}")),
        }
    }
    check(
        lossy == 0 && whole_file && wrong.is_empty(),
        format!("{lossy}/200 lossy round-trips, file parse ok: {whole_file}, {}/20 malformed mis-typed{}", wrong.len(), wrong.iter().map(|w| format!("; {w}")).collect::<String>()),
    )
}

fn hrir_backend() -> Outcome {
    let cfg = SpatialConfig::default();
    let set = HrirSet::synthetic(SR, &cfg);
    let k = 2048;
    let mut worst = 0.0f64;
    for (az, el) in [(0.0, 0.0), (45.0, 15.0), (-135.0, -30.0), (90.0, 45.0)] {
        let stored = set.points().iter().find(|p| p.azimuth == az && p.elevation == el).expect("grid point");
        // one meter: the free-field factor is exactly one
        let pose = SourcePose::from_spherical(az, el, 1.0);
        let field = hrir_field(&pose, 1, k, &set, &cfg).map_err(|e| e.to_string())?;
        for ear in [Ear::Left, Ear::Right] {
            let h = stored.ear(ear);
            if set.interpolate(az, el, ear) != h {
                return Err(format!("interpolated response differs from stored at ({az}, {el})"));
            }
            let transfer = field.frames[0].ear(ear);
            let peak = h.iter().map(|v| v.abs()).sum::<f64>();
            for bin in (0..k).step_by(7) {
                let w = -2.0 * PI * bin as f64 / k as f64;
                let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| {
                    (re + v * (w * n as f64).cos(), im + v * (w * n as f64).sin())
                });
                let dft = (re * re + im * im).sqrt();
                worst = worst.max((transfer.scale[bin] - dft).abs() / peak);
            }
        }
    }

    let clip = synth_test_signal(SignalKind::Noise, 1.0, SR, 9);
    let plan = FramePlan::default();
    let pose = SourcePose::from_spherical(0.0, 0.0, 1.5);
    let field = hrir_field(&pose, plan.frame_count(clip.len()), k, &set, &cfg).map_err(|e| e.to_string())?;
    let ours = render(&clip, &field);
    let matched = reference_render(&clip, &pose, &set, &cfg).map_err(|e| e.to_string())?;
    let mismatched =
        reference_render(&clip, &SourcePose::from_spherical(90.0, 0.0, 1.5), &set, &cfg).map_err(|e| e.to_string())?;
    let res = MetricConfig::default().phase_resolution;
    let n = ours.len().min(matched.len()).min(mismatched.len());
    let l_match = magnitude_error(&ours.resized(n), &matched.resized(n), res);
    let l_mismatch = magnitude_error(&ours.resized(n), &mismatched.resized(n), res);
    check(
        worst <= 1e-9 && l_match.is_finite() && l_match < l_mismatch,
        format!("on-grid transfer error {worst:.1e}, L_mag az0 {l_match:.5} < az90 {l_mismatch:.5}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("WOLA identity round-trip", wola_identity),
        ("Fourier-shift delay oracle", fourier_shift),
        ("inverse-square energy law", inverse_square),
        ("ITD matches Woodworth", itd),
        ("loss suite zeros and weighting", loss_suite),
        ("direction oracle closed loop", direction_oracle),
        ("mixer superposition and determinism", mixer_and_determinism),
        ("parser corpus", parser_corpus),
        ("HRIR backend", hrir_backend),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {status}: {name}: {detail}", i + 1);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
