// Parse `@` records, print them back, and show the typed errors.

use binaural_scene::scene::{parse_scene, parse_scene_line, SceneError};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let text = "\
# rain scene
sr=22050
rain on a tin roof@8@0, 60@4@0
thunder@3.5@-150, 30@800@2.25
";
    let scene = parse_scene(text)?;
    println!("{} events at {} Hz, {:.2} s long", scene.events.len(), scene.sample_rate, scene.timeline_length());
    for e in &scene.events {
        println!("  {e}");
    }
    assert_eq!(parse_scene(&scene.to_text())?, scene);

    for bad in ["dog@1@0@1@0", "dog@x@0, 0@1@0", "dog@1@0, 95@1@0"] {
        let err: SceneError = parse_scene_line(bad).unwrap_err();
        println!("  {bad:<18} -> {err}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("parse_scene example failed");
}
