// Inspect the spherical-head transfer field around the listener.

use binaural_scene::scene::SourcePose;
use binaural_scene::spatializer::{parametric_field, SpatialConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SpatialConfig::default();
    let (sr, k) = (16_000, 2048);
    let bin_4k = 4000 * k / sr as usize;
    println!("{:>6} {:>10} {:>10} {:>12}", "az", "shift L", "shift R", "ILD@4kHz dB");
    for az in [-90.0, -45.0, 0.0, 45.0, 90.0, 135.0] {
        let field = parametric_field(&SourcePose::from_spherical(az, 0.0, 2.0), 1, k, sr, &cfg)?;
        field.check_invariants()?;
        let f = &field.frames[0];
        let ild = 20.0 * (f.left.scale[bin_4k] / f.right.scale[bin_4k]).log10();
        println!("{az:>6} {:>10.3} {:>10.3} {ild:>12.2}", f.left.shift[0], f.right.shift[0]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("parametric_field example failed");
}
