//! Two-stage agent orchestration: prompts, providers, parsing.

pub mod cache;
pub mod http;
pub mod mock;
pub mod parse;
pub mod pipeline;
pub mod prompts;
pub mod provider;
pub mod types;

pub use cache::ResponseCache;
pub use http::HttpProvider;
pub use mock::{mock_risk_text, mock_scene_text, MockDefect, MockProvider};
pub use parse::{parse_risk_response, parse_scene_response, ParseError};
pub use pipeline::{run_batch, run_two_stage, QuarantineRecord, StageFailure, TwoStageOutput};
pub use prompts::{build_risk_prompt, build_scene_prompt, AgentRequest, Stage, PROMPT_VERSION};
pub use provider::{call_provider, AgentClient, CallError, CallOutcome, Provider, ProviderConfig, ProviderError};
pub use types::{
    Congestion, Graded, Pavement, RiskField, RiskLevel, RiskReport, SafeSpeed, SceneAnnotation, SceneField,
    SpeedLevel, SpeedUnit, TimeOfDay, Weather,
};
