use serde::{Deserialize, Serialize};

use super::parse::{parse_risk_response, parse_scene_response, ParseError};
use super::prompts::{build_risk_prompt, build_scene_prompt, Stage};
use super::provider::{AgentClient, CallError};
use super::types::{RiskReport, SceneAnnotation};
use crate::ingest::FrameSequence;

/// Why a clip dropped out of a batch, and at which stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageFailure {
    pub clip_id: String,
    pub stage: Stage,
    pub kind: String,
    pub detail: String,
}

impl StageFailure {
    fn from_call(clip_id: &str, stage: Stage, e: CallError) -> Self {
        Self { clip_id: clip_id.into(), stage, kind: e.kind().into(), detail: e.to_string() }
    }

    fn from_parse(clip_id: &str, stage: Stage, e: ParseError) -> Self {
        Self { clip_id: clip_id.into(), stage, kind: e.kind().into(), detail: e.to_string() }
    }

    pub fn quarantine(&self) -> QuarantineRecord {
        QuarantineRecord {
            clip_id: self.clip_id.clone(),
            stage: self.stage.as_str().into(),
            error_kind: self.kind.clone(),
            detail: self.detail.clone(),
        }
    }
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "clip {} failed at {} stage ({}): {}", self.clip_id, self.stage, self.kind, self.detail)
    }
}

impl std::error::Error for StageFailure {}

/// One line of a quarantine report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub clip_id: String,
    pub stage: String,
    pub error_kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutput {
    pub clip_id: String,
    pub scene: SceneAnnotation,
    pub risk: RiskReport,
}

/// Scene call, then a risk call fed the scene agent's output as produced.
pub fn run_two_stage(
    frames: &FrameSequence,
    scene_agent: &AgentClient,
    risk_agent: &AgentClient,
) -> Result<TwoStageOutput, StageFailure> {
    let id = frames.clip_id();
    let raw = scene_agent
        .call(&build_scene_prompt(frames))
        .map_err(|e| StageFailure::from_call(id, Stage::Scene, e))?;
    let scene = parse_scene_response(&raw).map_err(|e| StageFailure::from_parse(id, Stage::Scene, e))?;

    let request = build_risk_prompt(frames, &scene).map_err(|e| StageFailure::from_parse(id, Stage::Scene, e))?;
    let raw = risk_agent.call(&request).map_err(|e| StageFailure::from_call(id, Stage::Risk, e))?;
    let risk = parse_risk_response(&raw).map_err(|e| StageFailure::from_parse(id, Stage::Risk, e))?;
    risk.validate().map_err(|e| StageFailure::from_parse(id, Stage::Risk, e))?;
    Ok(TwoStageOutput { clip_id: id.to_string(), scene, risk })
}

/// Runs every clip with at most `concurrency` clips in flight. Results keep input order.
pub fn run_batch(
    clips: &[FrameSequence],
    scene_agent: &AgentClient,
    risk_agent: &AgentClient,
    concurrency: usize,
) -> Vec<Result<TwoStageOutput, StageFailure>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        clips
            .par_iter()
            .map(|f| run_two_stage(f, scene_agent, risk_agent))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agent::cache::ResponseCache;
    use crate::agent::mock::{MockDefect, MockProvider};
    use crate::agent::provider::ProviderConfig;
    use crate::ingest::{sample_frames, SyntheticDecoder, VideoClip};

    fn clips(n: usize) -> Vec<FrameSequence> {
        let dec = SyntheticDecoder::new(48, 32, 5);
        (0..n)
            .map(|i| {
                let clip = VideoClip {
                    clip_id: format!("clip_{i:02}"),
                    source_path: "x".into(),
                    duration_s: 3.0,
                    region_tag: "t".into(),
                    captured_at: None,
                };
                sample_frames(&clip, 0.5, &dec).unwrap()
            })
            .collect()
    }

    fn clients(mock: Arc<MockProvider>) -> (AgentClient, AgentClient) {
        let cache = Arc::new(ResponseCache::in_memory());
        (
            AgentClient::new(ProviderConfig::mock("scene-m"), mock.clone(), cache.clone()).unwrap(),
            AgentClient::new(ProviderConfig::mock("risk-m"), mock, cache).unwrap(),
        )
    }

    #[test]
    fn ten_clips_complete() {
        let frames = clips(10);
        let (s, r) = clients(Arc::new(MockProvider::new(1)));
        let out = run_batch(&frames, &s, &r, 4);
        assert_eq!(out.len(), 10);
        for (f, res) in frames.iter().zip(&out) {
            let pair = res.as_ref().unwrap();
            assert_eq!(pair.clip_id, f.clip_id());
            assert!(pair.scene.validate().is_ok());
            assert!(pair.risk.validate().is_ok());
        }
        assert_eq!(s.network_calls() + r.network_calls(), 20);
    }

    #[test]
    fn stage_one_failure_skips_stage_two() {
        let frames = clips(3);
        let mock = Arc::new(MockProvider::new(1).with_defect("clip_01", Stage::Scene, MockDefect::BadEnum));
        let (s, r) = clients(mock);
        let out = run_batch(&frames, &s, &r, 2);
        let err = out[1].as_ref().unwrap_err();
        assert_eq!(err.stage, Stage::Scene);
        assert_eq!(err.kind, "unrecognized_enum");
        assert_eq!(s.network_calls(), 3);
        assert_eq!(r.network_calls(), 2);
        assert_eq!(err.quarantine().stage, "scene");
    }

    #[test]
    fn risk_failure_is_attributed() {
        let frames = clips(2);
        let mock = Arc::new(MockProvider::new(1).with_defect("clip_00", Stage::Risk, MockDefect::Auth));
        let (s, r) = clients(mock);
        let err = run_two_stage(&frames[0], &s, &r).unwrap_err();
        assert_eq!((err.stage, err.kind.as_str()), (Stage::Risk, "auth"));
        assert!(err.detail.contains("clip_00"));
    }

    #[test]
    fn risk_request_contains_scene_summary() {
        let frames = clips(4);
        let (s, r) = clients(Arc::new(MockProvider::new(2)));
        for f in &frames {
            let out = run_two_stage(f, &s, &r).unwrap();
            let req = build_risk_prompt(f, &out.scene).unwrap();
            assert!(req.user_text.contains(&out.scene.summary));
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let frames = clips(6);
        let (s1, r1) = clients(Arc::new(MockProvider::new(3)));
        let (s2, r2) = clients(Arc::new(MockProvider::new(3)));
        assert_eq!(run_batch(&frames, &s1, &r1, 3), run_batch(&frames, &s2, &r2, 1));
    }
}
