// Save a synthetic HRIR grid, load it back, and compare the frame-wise
// render with direct convolution.

use std::sync::Arc;

use binaural_scene::metrics::{magnitude_error, reference_render, MetricConfig};
use binaural_scene::renderer::{render_event, FramePlan};
use binaural_scene::scene::SourcePose;
use binaural_scene::source::{synth_test_signal, SignalKind};
use binaural_scene::spatializer::{HrirSet, SpatialConfig, Spatializer};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (sr, cfg) = (16_000, SpatialConfig::default());
    let dir = tempfile::tempdir()?;
    HrirSet::synthetic(sr, &cfg).save_dir(dir.path())?;
    let set = Arc::new(HrirSet::load_dir(dir.path())?);
    println!("{} directions, elevations {:?}", set.points().len(), set.elevations());

    let spatializer = Spatializer::Hrir { set: set.clone(), config: cfg };
    let clip = synth_test_signal(SignalKind::Noise, 0.5, sr, 5);
    let plan = FramePlan::default();
    for az in [0.0, 37.5, 120.0] {
        let pose = SourcePose::from_spherical(az, 10.0, 1.5);
        let field = spatializer.field(&pose, plan.frame_count(clip.len()), plan.fft_size, sr)?;
        let ours = render_event(&clip, &field, &plan.padded_for(&field))?;
        let reference = reference_render(&clip, &pose, &set, &cfg)?;
        let n = ours.len().min(reference.len());
        let err = magnitude_error(&ours.resized(n), &reference.resized(n), MetricConfig::default().phase_resolution);
        println!("az {az:>6}: L_mag vs direct convolution {err:.5}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("hrir_backend example failed");
}
