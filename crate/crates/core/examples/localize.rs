// Closed-loop direction estimates: render at known directions, classify.

use std::sync::Arc;

use binaural_scene::metrics::{estimate_direction, Templates};
use binaural_scene::renderer::{render_event, FramePlan};
use binaural_scene::scene::SourcePose;
use binaural_scene::source::{synth_test_signal, SignalKind};
use binaural_scene::spatializer::{HrirSet, SpatialConfig, Spatializer};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (sr, cfg) = (16_000, SpatialConfig::default());
    let set = Arc::new(HrirSet::synthetic(sr, &cfg));
    let templates = Templates::from_hrir_set(&set);
    let backends = [("parametric", Spatializer::Parametric(cfg)), ("hrir", Spatializer::Hrir { set, config: cfg })];
    let clip = synth_test_signal(SignalKind::Noise, 0.5, sr, 2);
    let plan = FramePlan::default();
    for (name, sp) in &backends {
        for (az, el) in [(-60.0, 0.0), (45.0, 30.0), (150.0, -30.0)] {
            let pose = SourcePose::from_spherical(az, el, 2.0);
            let field = sp.field(&pose, plan.frame_count(clip.len()), plan.fft_size, sr)?;
            let out = render_event(&clip, &field, &plan.padded_for(&field))?;
            let est = estimate_direction(&out, (*name == "hrir").then_some(&templates))?;
            println!(
                "{name:>10} az {az:>5} el {el:>4}: {:?} {:?} {:?} (confidence {:.2})",
                est.lateral, est.front_rear, est.vertical, est.confidence
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("localize example failed");
}
