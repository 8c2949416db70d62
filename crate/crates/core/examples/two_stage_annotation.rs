//! Scene agent, then risk agent, on one clip with the offline mock provider.

use std::sync::Arc;

use roadscene::agent::{run_two_stage, AgentClient, MockProvider, ProviderConfig, ResponseCache};
use roadscene::annotation::unify;
use roadscene::ingest::{sample_frames, SyntheticDecoder, VideoClip};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clip = VideoClip {
        clip_id: "junction_07".into(),
        source_path: "junction_07.mp4".into(),
        duration_s: 5.0,
        region_tag: "urban".into(),
        captured_at: None,
    };
    let frames = sample_frames(&clip, 0.5, &SyntheticDecoder::new(320, 240, 3))?;

    let provider = Arc::new(MockProvider::new(11));
    let cache = Arc::new(ResponseCache::in_memory());
    let scene = AgentClient::new(ProviderConfig::mock("scene"), provider.clone(), cache.clone())?;
    let risk = AgentClient::new(ProviderConfig::mock("risk"), provider, cache)?;

    let out = run_two_stage(&frames, &scene, &risk).map_err(|f| f.to_string())?;
    let label = unify(&out.clip_id, &out.scene, frames.clip_id(), &out.risk)?;
    println!("{}\n", label.unified_text);
    println!("--- evaluation template ---\n{}", label.template_text);

    // Same requests again: answered from the cache.
    run_two_stage(&frames, &scene, &risk).map_err(|f| f.to_string())?;
    println!("\nnetwork calls: {}", scene.network_calls() + risk.network_calls());
    Ok(())
}
