// Place rendered clips on a timeline and mix them.

use binaural_scene::mixer::{mix, Timeline};
use binaural_scene::renderer::BinauralClip;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sr = 8000;
    let tone = |freq: f64, secs: f64, amp: f64| {
        let n = (secs * sr as f64) as usize;
        let x: Vec<f64> = (0..n).map(|i| amp * (std::f64::consts::TAU * freq * i as f64 / sr as f64).sin()).collect();
        BinauralClip::new(x.clone(), x, sr)
    };
    let mut timeline = Timeline::new(sr);
    timeline.place(tone(440.0, 3.0, 0.6), 0.0)?;
    timeline.place(tone(440.0, 4.0, 0.6), 2.0)?;
    let (out, report) = mix(&timeline)?;
    println!("{:.1} s, peak {:.3}, gain {:.4}", out.len() as f64 / sr as f64, report.mix_peak, report.gain);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("mix_timeline example failed");
}
