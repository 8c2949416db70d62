use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::ParseError;

macro_rules! closed_vocab {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            /// Case-insensitive lookup of a single word, accepting a few common variants.
            pub fn from_word(word: &str) -> Option<Self> {
                match word.to_ascii_lowercase().as_str() {
                    $($label $(| $alias)* => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

closed_vocab!(TimeOfDay {
    Daytime => "daytime" | "day" | "daylight",
    Nighttime => "nighttime" | "night" | "nightime" | "night-time",
});

closed_vocab!(Weather {
    Clear => "clear",
    Foggy => "foggy" | "fog",
    Rainy => "rainy" | "rain" | "raining",
    Snowy => "snowy" | "snow" | "snowing",
});

closed_vocab!(Pavement {
    Dry => "dry",
    Wet => "wet",
    Flooded => "flooded",
    Snowy => "snowy" | "snow-covered",
});

closed_vocab!(SpeedLevel {
    High => "high",
    Medium => "medium",
    Low => "low",
});

closed_vocab!(Congestion {
    Light => "light",
    Moderate => "moderate",
    Heavy => "heavy",
});

closed_vocab!(RiskLevel {
    Low => "low",
    Moderate => "moderate",
    High => "high",
});

/// A categorical dimension together with the verbatim section text it was read from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graded<T> {
    pub level: T,
    pub text: String,
}

impl<T> Graded<T> {
    pub fn new(level: T, text: impl Into<String>) -> Self {
        Self { level, text: text.into() }
    }
}

/// The six scene dimensions plus the closing summary, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SceneField {
    TimeOfDay,
    Weather,
    Pavement,
    VehicleBehavior,
    TrafficFlowSpeed,
    Congestion,
    Summary,
}

impl SceneField {
    pub const DIMENSIONS: [SceneField; 6] = [
        SceneField::TimeOfDay,
        SceneField::Weather,
        SceneField::Pavement,
        SceneField::VehicleBehavior,
        SceneField::TrafficFlowSpeed,
        SceneField::Congestion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneField::TimeOfDay => "time_of_day",
            SceneField::Weather => "weather",
            SceneField::Pavement => "pavement",
            SceneField::VehicleBehavior => "vehicle_behavior",
            SceneField::TrafficFlowSpeed => "traffic_flow_speed",
            SceneField::Congestion => "congestion",
            SceneField::Summary => "summary",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            SceneField::TimeOfDay => "Time of Day",
            SceneField::Weather => "Road Weather Conditions",
            SceneField::Pavement => "Pavement Wetness Condition",
            SceneField::VehicleBehavior => "Vehicle Behavior",
            SceneField::TrafficFlowSpeed => "Traffic Flow and Speed",
            SceneField::Congestion => "Congestion Level",
            SceneField::Summary => "Summary",
        }
    }
}

/// Risk report sections, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RiskField {
    EnvironmentalRisk,
    BehaviorRisk,
    FlowRisk,
    OverallLevel,
    Alerts,
    SafeSpeed,
}

impl RiskField {
    pub const DIMENSIONS: [RiskField; 4] = [
        RiskField::EnvironmentalRisk,
        RiskField::BehaviorRisk,
        RiskField::FlowRisk,
        RiskField::OverallLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RiskField::EnvironmentalRisk => "environmental_risk",
            RiskField::BehaviorRisk => "behavior_risk",
            RiskField::FlowRisk => "flow_risk",
            RiskField::OverallLevel => "overall_level",
            RiskField::Alerts => "alerts",
            RiskField::SafeSpeed => "safe_speed",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            RiskField::EnvironmentalRisk => "Environmental Risk Factors",
            RiskField::BehaviorRisk => "Vehicle Behavior Risk",
            RiskField::FlowRisk => "Traffic Flow Risk",
            RiskField::OverallLevel => "Overall Safety Risk Level",
            RiskField::Alerts => "Alerts",
            RiskField::SafeSpeed => "Suggested Safety Speed",
        }
    }
}

/// Structured output of the scene-understanding agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub time_of_day: Graded<TimeOfDay>,
    pub weather: Graded<Weather>,
    pub pavement: Graded<Pavement>,
    pub vehicle_behavior: String,
    pub traffic_flow_speed: Graded<SpeedLevel>,
    pub congestion: Graded<Congestion>,
    pub summary: String,
    pub raw_text: String,
}

impl SceneAnnotation {
    fn section_text(&self, field: SceneField) -> &str {
        match field {
            SceneField::TimeOfDay => &self.time_of_day.text,
            SceneField::Weather => &self.weather.text,
            SceneField::Pavement => &self.pavement.text,
            SceneField::VehicleBehavior => &self.vehicle_behavior,
            SceneField::TrafficFlowSpeed => &self.traffic_flow_speed.text,
            SceneField::Congestion => &self.congestion.text,
            SceneField::Summary => &self.summary,
        }
    }

    /// Every dimension and the summary must carry text.
    pub fn validate(&self) -> Result<(), ParseError> {
        for field in SceneField::DIMENSIONS.into_iter().chain([SceneField::Summary]) {
            if self.section_text(field).trim().is_empty() {
                return Err(ParseError::MissingDimension(field.name()));
            }
        }
        Ok(())
    }

    /// Canonical headed rendering; parses back to the same fields.
    pub fn render(&self) -> String {
        let mut out = String::from("Scene Analysis\n");
        for (i, field) in SceneField::DIMENSIONS.into_iter().enumerate() {
            out.push_str(&format!("{}. {}: {}\n", i + 1, field.heading(), self.section_text(field)));
        }
        out.push_str(&format!("{}: {}", SceneField::Summary.heading(), self.summary));
        out
    }

    /// What the risk agent sees: the scene agent's output exactly as produced.
    pub fn agent_text(&self) -> String {
        if self.raw_text.trim().is_empty() {
            self.render()
        } else {
            self.raw_text.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedUnit {
    #[serde(rename = "mph")]
    Mph,
    #[serde(rename = "km/h")]
    Kmh,
}

impl SpeedUnit {
    pub fn label(self) -> &'static str {
        match self {
            SpeedUnit::Mph => "mph",
            SpeedUnit::Kmh => "km/h",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().as_str() {
            "mph" => Some(SpeedUnit::Mph),
            "km/h" | "kmh" | "kph" | "kmph" => Some(SpeedUnit::Kmh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeSpeed {
    pub value: f64,
    pub unit: SpeedUnit,
}

impl fmt::Display for SafeSpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit.label())
    }
}

/// Structured output of the risk-reasoning agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub environmental_risk: String,
    pub behavior_risk: String,
    pub flow_risk: String,
    pub overall_level: RiskLevel,
    pub justification: String,
    pub alerts: Vec<String>,
    pub safe_speed: SafeSpeed,
    pub raw_text: String,
}

impl RiskReport {
    pub fn validate(&self) -> Result<(), ParseError> {
        for (field, text) in [
            (RiskField::EnvironmentalRisk, &self.environmental_risk),
            (RiskField::BehaviorRisk, &self.behavior_risk),
            (RiskField::FlowRisk, &self.flow_risk),
        ] {
            if text.trim().is_empty() {
                return Err(ParseError::MissingDimension(field.name()));
            }
        }
        if !(self.safe_speed.value.is_finite() && self.safe_speed.value > 0.0) {
            return Err(ParseError::UnrecognizedEnum {
                dimension: RiskField::SafeSpeed.name(),
                value: self.safe_speed.to_string(),
            });
        }
        Ok(())
    }

    pub fn overall_text(&self) -> String {
        let label = capitalize(self.overall_level.label());
        if self.justification.is_empty() {
            label
        } else {
            format!("{label}. {}", self.justification)
        }
    }

    /// Canonical headed rendering; an empty alert list renders as `Alerts: none`.
    pub fn render(&self) -> String {
        let mut out = String::from("Risk Report\n");
        let sections = [
            (RiskField::EnvironmentalRisk, self.environmental_risk.clone()),
            (RiskField::BehaviorRisk, self.behavior_risk.clone()),
            (RiskField::FlowRisk, self.flow_risk.clone()),
            (RiskField::OverallLevel, self.overall_text()),
        ];
        for (i, (field, text)) in sections.iter().enumerate() {
            out.push_str(&format!("{}. {}: {}\n", i + 1, field.heading(), text));
        }
        if self.alerts.is_empty() {
            out.push_str("Alerts: none\n");
        } else {
            out.push_str("Alerts:\n");
            for alert in &self.alerts {
                out.push_str(&format!("- {alert}\n"));
            }
        }
        out.push_str(&format!("{}: {}", RiskField::SafeSpeed.heading(), self.safe_speed));
        out
    }
}

pub(crate) fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
