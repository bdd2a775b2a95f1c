// Fetch mono clips from the synthesizer and from a corpus directory.

use binaural_scene::scene::parse_scene_line;
use binaural_scene::source::{corpus_file_name, fetch_mono, synth_test_signal, SignalKind, SourceBackend};
use binaural_scene::wav::{write_wav, WavEncoding};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let event = parse_scene_line("church bell@1.5@30, 10@20@0")?;

    // a 44.1 kHz corpus file is resampled and fitted to the event duration
    let bell = synth_test_signal(SignalKind::Sine { freq_hz: 660.0 }, 2.0, 44_100, 0);
    write_wav(dir.path().join(corpus_file_name(&event.label)), &[&bell.samples], 44_100, WavEncoding::Pcm16)?;
    let corpus = SourceBackend::Corpus { dirs: vec![dir.path().to_path_buf()] };
    let from_corpus = fetch_mono(&event, &corpus, 16_000)?;
    let synth = fetch_mono(&event, &SourceBackend::Synth { seed: 7 }, 16_000)?;
    println!("corpus: {} samples, synth: {} samples", from_corpus.len(), synth.len());

    let missing = parse_scene_line("tuba@1@0, 0@1@0")?;
    println!("{}", fetch_mono(&missing, &corpus, 16_000).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("mono_sources example failed");
}
