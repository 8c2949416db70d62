//! Versioned prompt assets and the request builders for both agents.

use serde::{Deserialize, Serialize};

use super::parse::ParseError;
use super::types::SceneAnnotation;
use crate::ingest::FrameSequence;

/// Bumped whenever any prompt asset changes; stamped into every annotation.
pub const PROMPT_VERSION: &str = "traffic-cot/v1";

pub const SCENE_SYSTEM: &str = include_str!("../../assets/prompts/scene_system.txt");
pub const SCENE_USER: &str = include_str!("../../assets/prompts/scene_user.txt");
pub const RISK_SYSTEM: &str = include_str!("../../assets/prompts/risk_system.txt");
pub const RISK_USER: &str = include_str!("../../assets/prompts/risk_user.txt");
pub const TRAINING_SYSTEM: &str = include_str!("../../assets/prompts/training_system.txt");
pub const TRAINING_USER: &str = include_str!("../../assets/prompts/training_user.txt");
pub const TEMPLATE_USER: &str = include_str!("../../assets/prompts/template_user.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Scene,
    Risk,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Scene => "scene",
            Stage::Risk => "risk",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One chat-completion request to an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRequest<'a> {
    pub role_header: String,
    pub user_text: String,
    pub attached_frames: Option<&'a FrameSequence>,
    pub stage: Stage,
}

impl AgentRequest<'_> {
    /// Clip the attached frames belong to, if any.
    pub fn clip_id(&self) -> Option<&str> {
        self.attached_frames.map(FrameSequence::clip_id)
    }
}

fn fill(template: &str, frames: &FrameSequence) -> String {
    template
        .replace("{frame_count}", &frames.len().to_string())
        .replace("{interval_s}", &frames.interval_s().to_string())
}

pub fn build_scene_prompt(frames: &FrameSequence) -> AgentRequest<'_> {
    AgentRequest {
        role_header: SCENE_SYSTEM.trim_end().to_string(),
        user_text: fill(SCENE_USER, frames).trim_end().to_string(),
        attached_frames: Some(frames),
        stage: Stage::Scene,
    }
}

/// Builds the risk request around the scene agent's output. Rejects an
/// incomplete scene so no provider call is made for it.
pub fn build_risk_prompt<'a>(frames: &'a FrameSequence, scene: &SceneAnnotation) -> Result<AgentRequest<'a>, ParseError> {
    scene.validate()?;
    let user_text = fill(RISK_USER, frames).replace("{scene}", scene.agent_text().trim());
    Ok(AgentRequest {
        role_header: RISK_SYSTEM.trim_end().to_string(),
        user_text: user_text.trim_end().to_string(),
        attached_frames: Some(frames),
        stage: Stage::Risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::mock::mock_scene_text;
    use crate::agent::parse::parse_scene_response;
    use crate::agent::types::SceneField;
    use crate::ingest::{sample_frames, SyntheticDecoder, VideoClip};

    fn frames(id: &str) -> FrameSequence {
        let clip = VideoClip {
            clip_id: id.into(),
            source_path: "x".into(),
            duration_s: 3.0,
            region_tag: "t".into(),
            captured_at: None,
        };
        sample_frames(&clip, 0.5, &SyntheticDecoder::new(64, 48, 1)).unwrap()
    }

    #[test]
    fn scene_prompt_has_each_heading_once() {
        let f = frames("a");
        let req = build_scene_prompt(&f);
        for field in SceneField::DIMENSIONS {
            assert_eq!(req.user_text.matches(field.heading()).count(), 1, "{}", field.heading());
        }
        assert!(req.user_text.contains("Summary:"));
        assert!(req.user_text.contains("7 frames"));
        assert_eq!(req.stage, Stage::Scene);
        assert_eq!(req.clip_id(), Some("a"));
    }

    #[test]
    fn scene_prompt_is_deterministic() {
        let f = frames("a");
        assert_eq!(build_scene_prompt(&f), build_scene_prompt(&f));
    }

    #[test]
    fn risk_prompt_embeds_scene_output() {
        let f = frames("b");
        let scene = parse_scene_response(&mock_scene_text(3, "b")).unwrap();
        let req = build_risk_prompt(&f, &scene).unwrap();
        assert!(req.user_text.contains(&scene.summary));
        assert!(req.user_text.contains(scene.raw_text.trim()));
        assert_eq!(req.stage, Stage::Risk);
        assert_eq!(build_risk_prompt(&f, &scene).unwrap(), req);
    }

    #[test]
    fn risk_prompt_rejects_incomplete_scene() {
        let f = frames("c");
        let mut scene = parse_scene_response(&mock_scene_text(3, "c")).unwrap();
        scene.congestion.text.clear();
        assert_eq!(build_risk_prompt(&f, &scene).unwrap_err(), ParseError::MissingDimension("congestion"));
    }

    #[test]
    fn training_prompt_names_every_dimension() {
        assert!(TRAINING_USER.contains("a two-part response"));
        for field in SceneField::DIMENSIONS {
            assert!(TRAINING_USER.contains(field.heading()));
        }
        for field in crate::agent::types::RiskField::DIMENSIONS {
            assert!(TRAINING_USER.contains(field.heading()));
        }
    }
}
