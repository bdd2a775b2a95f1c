// Render one event through the frame-wise renderer and write a stereo WAV.

use binaural_scene::renderer::{render_event, FramePlan};
use binaural_scene::scene::SourcePose;
use binaural_scene::source::{synth_test_signal, SignalKind};
use binaural_scene::spatializer::{parametric_field, SpatialConfig};
use binaural_scene::wav::{write_wav, WavEncoding};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sr = 16_000;
    let clip = synth_test_signal(SignalKind::Noise, 1.0, sr, 3);
    let plan = FramePlan::default();
    let pose = SourcePose::from_spherical(60.0, 0.0, 3.0);
    let field = parametric_field(&pose, plan.frame_count(clip.len()), plan.fft_size, sr, &SpatialConfig::default())?;
    let plan = plan.padded_for(&field);
    let out = render_event(&clip, &field, &plan)?;
    println!("{} input samples -> {} output samples (pad {})", clip.len(), out.len(), plan.pad);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("event.wav");
    write_wav(&path, &[&out.left, &out.right], sr, WavEncoding::Float32)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("render_event example failed");
}
