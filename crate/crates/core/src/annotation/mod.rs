//! Unified pseudo-labels, the evaluation template, tokenization and SFT records.

pub mod sft;
pub mod tokenizer;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{RiskReport, SceneAnnotation, PROMPT_VERSION};

pub use sft::{emit_sft_record, validate_sft_record, write_sft_dataset, SftMessage, SftRecord, TargetKind};
pub use tokenizer::{tokenize, TokenSequence, Tokenizer, WordVocab, BOS_ID, EOS_ID, MAX_SEQ_LEN};

/// Placed between the scene and risk renders in every unified label.
pub const SEPARATOR: &str = "\n\n<<<SCENE_END>>>\n<<<RISK_BEGIN>>>\n\n";

pub const TEMPLATE_GRAMMAR: &str = include_str!("../../assets/template_grammar.regex");

static TEMPLATE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(TEMPLATE_GRAMMAR.trim_end()).expect("template grammar compiles"));

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("scene belongs to clip {scene} but risk report to clip {risk}")]
    ClipMismatch { scene: String, risk: String },
    #[error("unified text for clip {0} has no separator")]
    NoSeparator(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedAnnotation {
    pub clip_id: String,
    pub scene: SceneAnnotation,
    pub risk: RiskReport,
    pub unified_text: String,
    pub template_text: String,
    pub prompt_version: String,
}

/// Joins a clip's scene and risk outputs into one label.
///
/// The clip ids are passed separately because the parsed annotations do not
/// carry them.
pub fn unify(
    scene_clip: &str,
    scene: &SceneAnnotation,
    risk_clip: &str,
    risk: &RiskReport,
) -> Result<UnifiedAnnotation, AnnotationError> {
    if scene_clip != risk_clip {
        return Err(AnnotationError::ClipMismatch { scene: scene_clip.into(), risk: risk_clip.into() });
    }
    let unified_text = format!("{}{SEPARATOR}{}", scene.render(), risk.render());
    let template_text = TemplateFields::from_parts(scene, risk).render();
    Ok(UnifiedAnnotation {
        clip_id: scene_clip.into(),
        scene: scene.clone(),
        risk: risk.clone(),
        unified_text,
        template_text,
        prompt_version: PROMPT_VERSION.into(),
    })
}

/// Splits a unified label back into its scene and risk renders.
pub fn split_unified(text: &str) -> Option<(&str, &str)> {
    text.split_once(SEPARATOR)
}

pub fn render_template(unified: &UnifiedAnnotation) -> String {
    TemplateFields::from_parts(&unified.scene, &unified.risk).render()
}

pub fn template_matches(text: &str) -> bool {
    TEMPLATE_RE.is_match(text)
}

/// One value per template line, already flattened to a single line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateFields {
    pub time_of_day: String,
    pub weather: String,
    pub pavement: String,
    pub speed: String,
    pub congestion: String,
    pub vehicle_behavior: String,
    pub summary: String,
    pub overall: String,
    pub justification: String,
    pub environmental: String,
    pub behavior: String,
    pub flow: String,
    pub alerts: String,
    pub safe_speed: String,
}

fn one_line(text: &str) -> String {
    let s = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if s.is_empty() {
        "none".into()
    } else {
        s
    }
}

impl TemplateFields {
    pub fn from_parts(scene: &SceneAnnotation, risk: &RiskReport) -> Self {
        let alerts = if risk.alerts.is_empty() {
            "none".to_string()
        } else {
            risk.alerts.iter().map(|a| one_line(&a.replace(';', ","))).collect::<Vec<_>>().join("; ")
        };
        Self {
            time_of_day: scene.time_of_day.level.label().into(),
            weather: scene.weather.level.label().into(),
            pavement: scene.pavement.level.label().into(),
            speed: scene.traffic_flow_speed.level.label().into(),
            congestion: scene.congestion.level.label().into(),
            vehicle_behavior: one_line(&scene.vehicle_behavior),
            summary: one_line(&scene.summary),
            overall: risk.overall_level.label().into(),
            justification: one_line(&risk.justification),
            environmental: one_line(&risk.environmental_risk),
            behavior: one_line(&risk.behavior_risk),
            flow: one_line(&risk.flow_risk),
            alerts,
            safe_speed: risk.safe_speed.to_string(),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let c = TEMPLATE_RE.captures(text)?;
        let g = |name: &str| c[name].to_string();
        Some(Self {
            time_of_day: g("time_of_day"),
            weather: g("weather"),
            pavement: g("pavement"),
            speed: g("speed"),
            congestion: g("congestion"),
            vehicle_behavior: g("vehicle_behavior"),
            summary: g("summary"),
            overall: g("overall"),
            justification: g("justification"),
            environmental: g("environmental"),
            behavior: g("behavior"),
            flow: g("flow"),
            alerts: g("alerts"),
            safe_speed: format!("{} {}", &c["speed_value"], &c["speed_unit"]),
        })
    }

    pub fn render(&self) -> String {
        format!(
            "[Scene]\n\
             Time of Day: {}\n\
             Road Weather: {}\n\
             Pavement Wetness: {}\n\
             Traffic Speed: {}\n\
             Congestion: {}\n\
             Vehicle Behavior: {}\n\
             Scene Summary: {}\n\
             [Risk]\n\
             Overall Risk Level: {}\n\
             Risk Justification: {}\n\
             Environmental Risk: {}\n\
             Vehicle Behavior Risk: {}\n\
             Traffic Flow Risk: {}\n\
             Alerts: {}\n\
             Suggested Safe Speed: {}",
            self.time_of_day,
            self.weather,
            self.pavement,
            self.speed,
            self.congestion,
            self.vehicle_behavior,
            self.summary,
            self.overall,
            self.justification,
            self.environmental,
            self.behavior,
            self.flow,
            self.alerts,
            self.safe_speed,
        )
    }
}
