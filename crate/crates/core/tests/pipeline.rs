//! Library-level run of the annotation pipeline with a recording provider.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use roadscene::agent::{
    parse_scene_response, run_batch, AgentClient, AgentRequest, MockDefect, MockProvider, Provider, ProviderConfig,
    ProviderError, ResponseCache, Stage,
};
use roadscene::annotation::{emit_sft_record, split_unified, template_matches, unify, TargetKind};
use roadscene::ingest::{sample_frames, write_frame_dir, FrameSequence, SyntheticDecoder, VideoClip};

/// Wraps a provider and keeps every (stage, clip, user text, reply) it sees.
struct Recorder {
    inner: MockProvider,
    log: Mutex<Vec<(Stage, String, String, String)>>,
}

impl Provider for Recorder {
    fn complete(&self, request: &AgentRequest<'_>, config: &ProviderConfig) -> Result<String, ProviderError> {
        let reply = self.inner.complete(request, config)?;
        let clip = request.clip_id().unwrap_or_default().to_string();
        self.log.lock().unwrap().push((request.stage, clip, request.user_text.clone(), reply.clone()));
        Ok(reply)
    }
}

fn clips(n: usize) -> Vec<FrameSequence> {
    let dec = SyntheticDecoder::new(64, 48, 9);
    (0..n)
        .map(|i| {
            let clip = VideoClip {
                clip_id: format!("clip_{i:02}"),
                source_path: format!("v/{i}.mp4").into(),
                duration_s: 3.0 + 0.5 * (i % 9) as f64,
                region_tag: "urban".into(),
                captured_at: None,
            };
            sample_frames(&clip, 0.5, &dec).unwrap()
        })
        .collect()
}

fn agents(provider: Arc<dyn Provider>, cache: Arc<ResponseCache>) -> (AgentClient, AgentClient) {
    let risk = ProviderConfig { max_retries: 3, ..ProviderConfig::mock("risk-model") };
    (
        AgentClient::new(ProviderConfig::mock("scene-model"), provider.clone(), cache.clone()).unwrap(),
        AgentClient::new(risk, provider, cache).unwrap(),
    )
}

#[test]
fn risk_requests_embed_the_scene_summary_for_every_clip() {
    let rec = Arc::new(Recorder { inner: MockProvider::new(4), log: Mutex::new(Vec::new()) });
    let (scene, risk) = agents(rec.clone(), Arc::new(ResponseCache::in_memory()));
    let frames = clips(12);
    let out = run_batch(&frames, &scene, &risk, 3);
    assert!(out.iter().all(Result::is_ok));

    let log = rec.log.lock().unwrap();
    assert_eq!(log.len(), 24);
    let mut summaries = BTreeMap::new();
    for (stage, clip, _, reply) in log.iter() {
        if *stage == Stage::Scene {
            summaries.insert(clip.clone(), parse_scene_response(reply).unwrap().summary);
        }
    }
    for (stage, clip, text, _) in log.iter().filter(|e| e.0 == Stage::Risk) {
        assert_eq!(*stage, Stage::Risk);
        assert!(text.contains(&summaries[clip]), "{clip}");
    }
}

#[test]
fn transient_failures_are_retried_and_others_quarantined() {
    let mock = MockProvider::new(6)
        .with_defect("clip_01", Stage::Risk, MockDefect::Transient(2))
        .with_defect("clip_02", Stage::Scene, MockDefect::MissingSection("congestion".into()))
        .with_defect("clip_03", Stage::Risk, MockDefect::Malformed)
        .with_defect("clip_04", Stage::Scene, MockDefect::Transient(9));
    let (scene, risk) = agents(Arc::new(mock), Arc::new(ResponseCache::in_memory()));
    let frames = clips(6);
    let out = run_batch(&frames, &scene, &risk, 2);

    assert!(out[0].is_ok() && out[1].is_ok() && out[5].is_ok());
    let kinds: Vec<(String, String)> = out[2..5]
        .iter()
        .map(|r| {
            let q = r.as_ref().unwrap_err().quarantine();
            (q.stage, q.error_kind)
        })
        .collect();
    assert_eq!(kinds[0], ("scene".into(), "missing_dimension".into()));
    assert_eq!(kinds[1], ("risk".into(), "malformed_response".into()));
    assert_eq!(kinds[2], ("scene".into(), "retries_exhausted".into()));
    // 6 scene calls + 3 extra scene retries for clip_04, 4 risk calls + 2 retries for clip_01.
    assert_eq!(scene.network_calls() + risk.network_calls(), 6 + 3 + 4 + 2);
}

#[test]
fn unified_labels_and_records_from_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, risk) = agents(Arc::new(MockProvider::new(8)), Arc::new(ResponseCache::in_memory()));
    let frames = clips(10);
    let out = run_batch(&frames, &scene, &risk, 4);
    for (seq, res) in frames.iter().zip(out) {
        let res = res.unwrap();
        let u = unify(&res.clip_id, &res.scene, seq.clip_id(), &res.risk).unwrap();
        let (s, r) = split_unified(&u.unified_text).unwrap();
        assert_eq!(s, res.scene.render());
        assert_eq!(r, res.risk.render());
        assert!(template_matches(&u.template_text));

        let paths = write_frame_dir(dir.path(), seq, None).unwrap();
        let rec = emit_sft_record(seq.clip_id(), &paths, &u, TargetKind::Unified).unwrap();
        assert_eq!(rec.assistant_text(), u.unified_text);
        let again = emit_sft_record(seq.clip_id(), &paths, &u, TargetKind::Unified).unwrap();
        assert_eq!(serde_json::to_string(&rec).unwrap(), serde_json::to_string(&again).unwrap());
    }
}

#[test]
fn shared_cache_makes_second_batch_free() {
    let cache = Arc::new(ResponseCache::in_memory());
    let frames = clips(5);
    let (s1, r1) = agents(Arc::new(MockProvider::new(2)), cache.clone());
    let first = run_batch(&frames, &s1, &r1, 2);
    let (s2, r2) = agents(Arc::new(MockProvider::new(2)), cache);
    let second = run_batch(&frames, &s2, &r2, 2);
    assert_eq!(s2.network_calls() + r2.network_calls(), 0);
    let text = |v: &[Result<roadscene::agent::TwoStageOutput, _>]| {
        v.iter().map(|r| r.as_ref().unwrap().risk.render()).collect::<Vec<_>>()
    };
    assert_eq!(text(&first), text(&second));
}
