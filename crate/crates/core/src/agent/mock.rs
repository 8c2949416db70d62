//! Offline stand-ins for both agents.
//!
//! Output is a pure function of `(seed, clip_id, stage)`. Defects can be
//! injected per clip and stage to exercise parsing and quarantine paths.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::prompts::{AgentRequest, Stage};
use super::provider::{Provider, ProviderConfig, ProviderError};
use super::types::{capitalize, Congestion, Pavement, RiskLevel, SpeedLevel, TimeOfDay, Weather};
use crate::ingest::clip_seed;

/// A fault to inject for one (clip, stage).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockDefect {
    /// Drop the section with this field name (e.g. "congestion", "alerts").
    MissingSection(String),
    /// Replace the leading category word with one outside the vocabulary.
    BadEnum,
    /// Fail with a malformed-response error.
    Malformed,
    /// Fail with an authentication error.
    Auth,
    /// Fail transiently this many times, then answer normally.
    Transient(u32),
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    time: TimeOfDay,
    weather: Weather,
    pavement: Pavement,
    speed: SpeedLevel,
    congestion: Congestion,
    behavior: usize,
    detail: usize,
    mph: bool,
}

const BEHAVIORS: &[&str] = &[
    "Vehicles hold their lanes with steady gaps and no abrupt maneuvers.",
    "A sedan changes lanes to pass a slower truck; other drivers keep their lanes.",
    "Several cars brake briefly near the ramp merge before resuming speed.",
    "One vehicle drifts toward the shoulder, then corrects; the rest travel in order.",
    "Drivers accelerate out of the curve and keep consistent following distances.",
    "A pickup brakes hard behind a merging vehicle, causing a short ripple of brake lights.",
];

const LIGHT_DETAIL: &[&str] = &[
    "Headlights and streetlights are the main illumination.",
    "Ambient light is bright and shadows are visible.",
    "The sky is evenly lit and lane markings are easy to see.",
];

fn draw(seed: u64, clip_id: &str) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed(seed, clip_id));
    let time = *TimeOfDay::ALL.choose(&mut rng).expect("non-empty");
    let weather = *Weather::ALL.choose(&mut rng).expect("non-empty");
    let pavement = match weather {
        Weather::Clear | Weather::Foggy => {
            if rng.random_bool(0.8) {
                Pavement::Dry
            } else {
                Pavement::Wet
            }
        }
        Weather::Rainy => {
            if rng.random_bool(0.85) {
                Pavement::Wet
            } else {
                Pavement::Flooded
            }
        }
        Weather::Snowy => Pavement::Snowy,
    };
    let congestion = *Congestion::ALL.choose(&mut rng).expect("non-empty");
    let speed = match congestion {
        Congestion::Light => *[SpeedLevel::High, SpeedLevel::Medium].choose(&mut rng).expect("non-empty"),
        Congestion::Moderate => SpeedLevel::Medium,
        Congestion::Heavy => SpeedLevel::Low,
    };
    Draw {
        time,
        weather,
        pavement,
        speed,
        congestion,
        behavior: rng.random_range(0..BEHAVIORS.len()),
        detail: rng.random_range(0..LIGHT_DETAIL.len()),
        mph: rng.random_bool(0.8),
    }
}

fn weather_detail(w: Weather) -> &'static str {
    match w {
        Weather::Clear => "No precipitation and good visibility to the horizon.",
        Weather::Foggy => "Haze softens distant vehicles and reduces visibility.",
        Weather::Rainy => "Droplets and streaks indicate active rainfall.",
        Weather::Snowy => "Falling flakes and white roadside banks are visible.",
    }
}

fn pavement_detail(p: Pavement) -> &'static str {
    match p {
        Pavement::Dry => "The surface is matte with no reflections.",
        Pavement::Wet => "The surface is shiny and reflects headlights.",
        Pavement::Flooded => "Water pools across the right lane.",
        Pavement::Snowy => "Slush covers the lane edges.",
    }
}

fn flow_text(s: SpeedLevel) -> &'static str {
    match s {
        SpeedLevel::High => "Traffic moves freely at a high speed level.",
        SpeedLevel::Medium => "Traffic moves steadily at a medium speed level.",
        SpeedLevel::Low => "Traffic creeps forward at a low speed level with frequent stops.",
    }
}

fn congestion_detail(c: Congestion) -> &'static str {
    match c {
        Congestion::Light => "Gaps between vehicles are wide.",
        Congestion::Moderate => "Vehicles are spaced a few lengths apart.",
        Congestion::Heavy => "Vehicles are queued bumper to bumper.",
    }
}

fn risk_level(d: &Draw) -> RiskLevel {
    let mut points = 0;
    points += matches!(d.time, TimeOfDay::Nighttime) as u32;
    points += match d.pavement {
        Pavement::Dry => 0,
        Pavement::Wet => 1,
        Pavement::Flooded | Pavement::Snowy => 2,
    };
    points += matches!(d.weather, Weather::Foggy) as u32;
    points += matches!(d.congestion, Congestion::Heavy) as u32;
    points += (d.behavior == 5) as u32;
    match points {
        0 => RiskLevel::Low,
        1 | 2 => RiskLevel::Moderate,
        _ => RiskLevel::High,
    }
}

/// The scene analysis the mock scene agent returns for `clip_id`.
pub fn mock_scene_text(seed: u64, clip_id: &str) -> String {
    scene_text(&draw(seed, clip_id), None)
}

/// The risk report the mock risk agent returns for `clip_id`.
pub fn mock_risk_text(seed: u64, clip_id: &str) -> String {
    risk_text(&draw(seed, clip_id), None)
}

fn scene_text(d: &Draw, defect: Option<&MockDefect>) -> String {
    let weather_word = if defect == Some(&MockDefect::BadEnum) {
        "Hazy".to_string()
    } else {
        capitalize(d.weather.label())
    };
    let summary = format!(
        "A {} {} scene on {} pavement with {} congestion; traffic moves at a {} speed level.",
        d.weather.label(),
        d.time.label(),
        d.pavement.label(),
        d.congestion.label(),
        d.speed.label(),
    );
    let sections = [
        ("time_of_day", format!("1. **Time of Day**: {}. {}", capitalize(d.time.label()), LIGHT_DETAIL[d.detail])),
        ("weather", format!("2. **Road Weather Conditions**: {weather_word}. {}", weather_detail(d.weather))),
        (
            "pavement",
            format!("3. **Pavement Wetness Condition**: {}. {}", capitalize(d.pavement.label()), pavement_detail(d.pavement)),
        ),
        ("vehicle_behavior", format!("4. **Vehicle Behavior**: {}", BEHAVIORS[d.behavior])),
        ("traffic_flow_speed", format!("5. **Traffic Flow and Speed**: {}", flow_text(d.speed))),
        (
            "congestion",
            format!("6. **Congestion Level**: {}. {}", capitalize(d.congestion.label()), congestion_detail(d.congestion)),
        ),
        ("summary", format!("\n**Summary**: {summary}")),
    ];
    let mut out = String::from("Let me analyze the frames step by step.\n\n");
    for (name, text) in sections {
        if matches!(defect, Some(MockDefect::MissingSection(n)) if n == name) {
            continue;
        }
        out.push_str(&text);
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn risk_text(d: &Draw, defect: Option<&MockDefect>) -> String {
    let level = risk_level(d);
    let level_word = if defect == Some(&MockDefect::BadEnum) {
        "Elevated".to_string()
    } else {
        capitalize(level.label())
    };
    let environmental = match (d.time, d.pavement) {
        (TimeOfDay::Nighttime, Pavement::Dry) => "Darkness limits hazard detection, though the dry surface gives normal traction.",
        (TimeOfDay::Daytime, Pavement::Dry) => "Good light and a dry surface give normal traction and braking distance.",
        (_, Pavement::Wet) => "The wet surface reduces tire grip and lengthens braking distance.",
        (_, Pavement::Flooded) => "Pooled water raises the risk of hydroplaning.",
        (_, Pavement::Snowy) => "Slush sharply reduces traction and lateral stability.",
    };
    let behavior = if d.behavior == 5 {
        "Hard braking suggests a hazard near the merge."
    } else {
        "Driving appears controlled with no erratic maneuvers."
    };
    let flow = match d.congestion {
        Congestion::Light => "Flow is stable with wide spacing and low rear-end exposure.",
        Congestion::Moderate => "Spacing tightens at times, adding some rear-end exposure.",
        Congestion::Heavy => "Stop-and-go queues create rear-end collision exposure.",
    };
    let justification = match level {
        RiskLevel::Low => "Conditions are favorable and traffic is orderly.",
        RiskLevel::Moderate => "One or two factors call for extra caution.",
        RiskLevel::High => "Several compounding factors demand reduced speed.",
    };
    let mut alerts = Vec::new();
    if !matches!(d.pavement, Pavement::Dry) {
        alerts.push(format!("Slow down on {} pavement", d.pavement.label()));
    }
    if matches!(d.weather, Weather::Foggy) || matches!(d.time, TimeOfDay::Nighttime) {
        alerts.push("Use low-beam headlights".to_string());
    }
    if matches!(d.congestion, Congestion::Heavy) || d.behavior == 5 {
        alerts.push("Increase following distance".to_string());
    }
    let base: f64 = match level {
        RiskLevel::Low => 65.0,
        RiskLevel::Moderate => 50.0,
        RiskLevel::High => 35.0,
    };
    let speed = if d.mph {
        format!("{base} mph")
    } else {
        format!("{} km/h", (base * 1.6 / 5.0).round() * 5.0)
    };

    let alert_body = if alerts.is_empty() {
        "None".to_string()
    } else {
        alerts.iter().map(|a| format!("- {a}")).collect::<Vec<_>>().join("\n")
    };
    let sections = [
        ("environmental_risk", format!("### Environmental Risk Factors\n{environmental}")),
        ("behavior_risk", format!("### Vehicle Behavior Risk\n{behavior}")),
        ("flow_risk", format!("### Traffic Flow Risk\n{flow}")),
        ("overall_level", format!("### Overall Safety Risk Level\n{level_word}. {justification}")),
        ("alerts", format!("### Alerts\n{alert_body}")),
        ("safe_speed", format!("### Suggested Safety Speed\n{speed}")),
    ];
    let mut out = Vec::new();
    for (name, text) in sections {
        if matches!(defect, Some(MockDefect::MissingSection(n)) if n == name) {
            continue;
        }
        out.push(text);
    }
    out.join("\n\n")
}

/// Deterministic provider for both stages.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    defects: HashMap<(String, Stage), MockDefect>,
    transient_left: Mutex<HashMap<(String, Stage), u32>>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn with_defect(mut self, clip_id: &str, stage: Stage, defect: MockDefect) -> Self {
        let key = (clip_id.to_string(), stage);
        if let MockDefect::Transient(n) = defect {
            self.transient_left.get_mut().expect("lock").insert(key.clone(), n);
        }
        self.defects.insert(key, defect);
        self
    }

    /// Total `complete` invocations, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &AgentRequest<'_>, _config: &ProviderConfig) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let clip_id = request
            .clip_id()
            .ok_or_else(|| ProviderError::Rejected("mock provider needs attached frames".into()))?;
        let key = (clip_id.to_string(), request.stage);
        let defect = self.defects.get(&key);
        match defect {
            Some(MockDefect::Auth) => return Err(ProviderError::Auth("mock: invalid api key".into())),
            Some(MockDefect::Malformed) => return Err(ProviderError::Malformed("mock: response had no content".into())),
            Some(MockDefect::Transient(_)) => {
                let mut left = self.transient_left.lock().expect("lock");
                if let Some(n) = left.get_mut(&key).filter(|n| **n > 0) {
                    *n -= 1;
                    return Err(ProviderError::Transient("mock: 503 service unavailable".into()));
                }
            }
            _ => {}
        }
        let d = draw(self.seed, clip_id);
        Ok(match request.stage {
            Stage::Scene => scene_text(&d, defect),
            Stage::Risk => {
                if !request.user_text.contains("<<<SCENE") {
                    return Err(ProviderError::Rejected("mock: risk request without scene analysis".into()));
                }
                risk_text(&d, defect)
            }
        })
    }
}
