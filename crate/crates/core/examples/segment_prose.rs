// Offline segmentation of prose with a custom keyword position table.

use binaural_scene::segmenter::{segment_text, DefaultsTable, SegmenterConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let prose = "A dog barks on the left for 3 seconds. Then a car horn honks behind, 10 meters away. \
                 At 1.5 seconds a bird sings.";
    let mut table = DefaultsTable::default();
    table.entries.extend(DefaultsTable::parse("car horn = 180, 0, 15\n")?.entries);
    let cfg = SegmenterConfig { defaults_table: table, ..SegmenterConfig::default() };
    let scene = segment_text(prose, &cfg)?;
    for e in &scene.events {
        println!("{e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("segment_prose example failed");
}
