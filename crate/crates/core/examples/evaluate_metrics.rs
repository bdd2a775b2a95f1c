// Score a render against a reference with the loss-style metrics.

use binaural_scene::metrics::{eval_pair, MetricConfig};
use binaural_scene::renderer::{render_event, FramePlan};
use binaural_scene::scene::SourcePose;
use binaural_scene::source::{synth_test_signal, SignalKind};
use binaural_scene::spatializer::{parametric_field, SpatialConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sr = 16_000;
    let clip = synth_test_signal(SignalKind::Noise, 0.5, sr, 1);
    let plan = FramePlan::default();
    let render = |az: f64| -> Result<_, Box<dyn std::error::Error>> {
        let pose = SourcePose::from_spherical(az, 0.0, 1.0);
        let field = parametric_field(&pose, plan.frame_count(clip.len()), plan.fft_size, sr, &SpatialConfig::default())?;
        // a fixed pad keeps every render the same length
        Ok(render_event(&clip, &field, &FramePlan { pad: 64, ..plan })?)
    };
    let reference = render(30.0)?;
    let cfg = MetricConfig::default();
    println!("{:>6} {:>9} {:>7} {:>7} {:>7} {:>8}", "az", "l2", "L_phs", "L_IID", "L_STFT", "total");
    for az in [30.0, 40.0, 90.0, -30.0] {
        let r = eval_pair(&render(az)?, &reference, &cfg)?;
        println!("{az:>6} {:>9.5} {:>7.3} {:>7.3} {:>7.3} {:>8.3}", r.l2, r.l_phs, r.l_iid, r.l_stft, r.total);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("evaluate_metrics example failed");
}
