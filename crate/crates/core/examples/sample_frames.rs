//! Samples a synthetic clip on the fixed grid and writes the normalized frames.
//!
//!     cargo run --example sample_frames -- [duration_s] [interval_s] [out_dir]

use std::path::PathBuf;

use roadscene::ingest::{sample_frames, write_frame_dir, SyntheticDecoder, VideoClip};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4.5);
    let interval: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.5);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("roadscene-frames"));

    let clip = VideoClip {
        clip_id: "demo".into(),
        source_path: "demo.mp4".into(),
        duration_s: duration,
        region_tag: "urban".into(),
        captured_at: None,
    };
    // 640x360 source, so every frame goes through the center crop.
    let seq = sample_frames(&clip, interval, &SyntheticDecoder::new(640, 360, 1))?;
    for (t, f) in seq.frame_times().iter().zip(seq.frames()) {
        println!("t={t:>5.2}s  {}x{}", f.width(), f.height());
    }
    let paths = write_frame_dir(&out, &seq, None)?;
    println!("{} frames -> {}", paths.len(), out.join("demo").display());
    println!("digest {}", seq.content_digest());
    Ok(())
}
