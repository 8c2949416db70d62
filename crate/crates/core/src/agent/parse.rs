//! Heading-anchored parsing of agent responses.
//!
//! A heading line is an optional markdown prefix (`#`, list number, bullet,
//! `**`), a known heading name, optional closing emphasis, then either the end
//! of the line or a colon followed by inline content. Everything up to the next
//! heading line belongs to that section. Text before the first heading is ignored.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::types::{
    Congestion, Graded, Pavement, RiskField, RiskLevel, RiskReport, SafeSpeed, SceneAnnotation, SceneField,
    SpeedLevel, SpeedUnit, TimeOfDay, Weather,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing dimension {0}")]
    MissingDimension(&'static str),
    #[error("unrecognized value {value:?} for {dimension}")]
    UnrecognizedEnum { dimension: &'static str, value: String },
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::MissingDimension(_) => "missing_dimension",
            ParseError::UnrecognizedEnum { .. } => "unrecognized_enum",
        }
    }
}

const SCENE_HEADINGS: &[(SceneField, &[&str])] = &[
    (SceneField::TimeOfDay, &["time of day"]),
    (
        SceneField::Weather,
        &["road weather conditions", "road weather condition", "weather conditions", "weather condition", "weather"],
    ),
    (
        SceneField::Pavement,
        &[
            "pavement wetness condition",
            "pavement surface wetness",
            "pavement wetness",
            "pavement condition",
            "pavement",
        ],
    ),
    (SceneField::VehicleBehavior, &["vehicle behavior", "vehicle behaviour"]),
    (
        SceneField::TrafficFlowSpeed,
        &["traffic flow and speed", "traffic flow & speed", "traffic flow"],
    ),
    (SceneField::Congestion, &["congestion level", "congestion"]),
    (SceneField::Summary, &["summary", "overall summary", "scene summary"]),
];

const RISK_HEADINGS: &[(RiskField, &[&str])] = &[
    (RiskField::EnvironmentalRisk, &["environmental risk factors", "environmental risk"]),
    (
        RiskField::BehaviorRisk,
        &["vehicle behavior risk", "vehicle behaviour risk", "behavior risk"],
    ),
    (RiskField::FlowRisk, &["traffic flow risk", "flow risk"]),
    (
        RiskField::OverallLevel,
        &["overall safety risk level", "overall risk level", "overall safety risk", "overall risk"],
    ),
    (RiskField::Alerts, &["alerts"]),
    (
        RiskField::SafeSpeed,
        &["suggested safety speed", "suggested safe speed", "safe speed", "recommended speed"],
    ),
];

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn strip_markers(mut s: &str) -> &str {
    s = s.trim_start().trim_start_matches('#').trim_start();
    // list numbering like "3." or "3)"
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = s[digits..].strip_prefix(['.', ')']) {
            s = rest.trim_start();
        }
    }
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = s.strip_prefix(bullet) {
            s = rest.trim_start();
        }
    }
    s.trim_start_matches(['*', '_']).trim_start()
}

/// Returns the field and inline content if `line` is a heading line.
fn match_heading<F: Copy>(line: &str, table: &[(F, &[&str])]) -> Option<(F, String)> {
    let s = strip_markers(line);
    let mut best: Option<(usize, F, &str)> = None;
    for &(field, aliases) in table {
        for alias in aliases {
            if let Some(rest) = strip_prefix_ci(s, alias) {
                if best.is_none_or(|(len, _, _)| alias.len() > len) {
                    best = Some((alias.len(), field, rest));
                }
            }
        }
    }
    let (_, field, rest) = best?;
    let rest = rest.trim_start_matches(['*', '_']).trim_end();
    if rest.is_empty() {
        return Some((field, String::new()));
    }
    let inline = rest.strip_prefix(':')?;
    let inline = inline.trim_start_matches(['*', '_']).trim();
    Some((field, inline.to_string()))
}

/// Splits `raw` into sections keyed by field. The first occurrence of a heading wins.
fn split_sections<F: Copy + PartialEq>(raw: &str, table: &[(F, &[&str])]) -> Vec<(F, String)> {
    let mut sections: Vec<(F, Vec<String>)> = Vec::new();
    let mut current: Option<usize> = None;
    for line in raw.lines() {
        if let Some((field, inline)) = match_heading(line, table) {
            if sections.iter().any(|(f, _)| *f == field) {
                current = None;
                continue;
            }
            sections.push((field, if inline.is_empty() { vec![] } else { vec![inline] }));
            current = Some(sections.len() - 1);
        } else if let Some(idx) = current {
            sections[idx].1.push(line.to_string());
        }
    }
    sections
        .into_iter()
        .map(|(f, lines)| (f, lines.join("\n").trim().to_string()))
        .collect()
}

fn section<F: Copy + PartialEq>(sections: &[(F, String)], field: F, name: &'static str) -> Result<String, ParseError> {
    sections
        .iter()
        .find(|(f, _)| *f == field)
        .map(|(_, body)| body.clone())
        .filter(|body| !body.is_empty())
        .ok_or(ParseError::MissingDimension(name))
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '/'))
        .map(|w| w.trim_matches('-'))
        .filter(|w| !w.is_empty())
}

/// Reads the category label that opens a section ("Rainy." -> rainy).
fn leading_enum<T>(body: &str, dimension: &'static str, lookup: impl Fn(&str) -> Option<T>) -> Result<T, ParseError> {
    let first = words(body).next().unwrap_or("");
    lookup(first).ok_or_else(|| ParseError::UnrecognizedEnum { dimension, value: first.to_string() })
}

pub fn parse_scene_response(raw: &str) -> Result<SceneAnnotation, ParseError> {
    let sections = split_sections(raw, SCENE_HEADINGS);
    let get = |field: SceneField| section(&sections, field, field.name());

    let time_text = get(SceneField::TimeOfDay)?;
    let weather_text = get(SceneField::Weather)?;
    let pavement_text = get(SceneField::Pavement)?;
    let vehicle_behavior = get(SceneField::VehicleBehavior)?;
    let flow_text = get(SceneField::TrafficFlowSpeed)?;
    let congestion_text = get(SceneField::Congestion)?;
    let summary = get(SceneField::Summary)?;

    let time_of_day = leading_enum(&time_text, SceneField::TimeOfDay.name(), TimeOfDay::from_word)?;
    let weather = leading_enum(&weather_text, SceneField::Weather.name(), Weather::from_word)?;
    let pavement = leading_enum(&pavement_text, SceneField::Pavement.name(), Pavement::from_word)?;
    let congestion = leading_enum(&congestion_text, SceneField::Congestion.name(), Congestion::from_word)?;
    // Flow is free text; the speed level may appear anywhere in it.
    let speed = words(&flow_text)
        .find_map(SpeedLevel::from_word)
        .ok_or_else(|| ParseError::UnrecognizedEnum {
            dimension: SceneField::TrafficFlowSpeed.name(),
            value: flow_text.lines().next().unwrap_or("").to_string(),
        })?;

    Ok(SceneAnnotation {
        time_of_day: Graded::new(time_of_day, time_text),
        weather: Graded::new(weather, weather_text),
        pavement: Graded::new(pavement, pavement_text),
        vehicle_behavior,
        traffic_flow_speed: Graded::new(speed, flow_text),
        congestion: Graded::new(congestion, congestion_text),
        summary,
        raw_text: raw.to_string(),
    })
}

static SPEED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*(mph|km/h|kmh|kph|kmph)\b").expect("valid regex"));

fn parse_safe_speed(body: &str) -> Result<SafeSpeed, ParseError> {
    let bad = || ParseError::UnrecognizedEnum {
        dimension: RiskField::SafeSpeed.name(),
        value: body.lines().next().unwrap_or("").to_string(),
    };
    let caps = SPEED_RE.captures(body).ok_or_else(bad)?;
    let value: f64 = caps[1].parse().map_err(|_| bad())?;
    let unit = SpeedUnit::from_word(&caps[2]).ok_or_else(bad)?;
    if value <= 0.0 {
        return Err(bad());
    }
    Ok(SafeSpeed { value, unit })
}

fn strip_bullet(line: &str) -> Option<&str> {
    let t = line.trim();
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = t.strip_prefix(bullet) {
            return Some(rest.trim());
        }
    }
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = t[digits..].strip_prefix(['.', ')']) {
            return Some(rest.trim());
        }
    }
    None
}

fn is_none_marker(text: &str) -> bool {
    let t = text.trim().trim_end_matches('.').trim().to_ascii_lowercase();
    matches!(t.as_str(), "" | "none" | "n/a" | "no alerts" | "no alerts.")
}

fn parse_alerts(body: &str) -> Vec<String> {
    let bulleted: Vec<String> = body.lines().filter_map(strip_bullet).map(str::to_string).collect();
    let items: Vec<String> = if bulleted.is_empty() {
        body.lines()
            .flat_map(|l| l.split(';'))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    } else {
        bulleted
    };
    if items.len() == 1 && is_none_marker(&items[0]) {
        return Vec::new();
    }
    items.into_iter().filter(|s| !s.is_empty()).collect()
}

pub fn parse_risk_response(raw: &str) -> Result<RiskReport, ParseError> {
    let sections = split_sections(raw, RISK_HEADINGS);
    let get = |field: RiskField| section(&sections, field, field.name());

    let environmental_risk = get(RiskField::EnvironmentalRisk)?;
    let behavior_risk = get(RiskField::BehaviorRisk)?;
    let flow_risk = get(RiskField::FlowRisk)?;
    let overall = get(RiskField::OverallLevel)?;
    let overall_level = leading_enum(&overall, RiskField::OverallLevel.name(), RiskLevel::from_word)?;
    let justification = {
        let first = words(&overall).next().unwrap_or("");
        let start = overall.find(first).map_or(0, |i| i + first.len());
        overall[start..]
            .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ':' | ',' | ';' | '-' | '*'))
            .trim()
            .to_string()
    };
    // An alerts heading with no body means "no alerts"; a missing heading is an error.
    let alerts = match sections.iter().find(|(f, _)| *f == RiskField::Alerts) {
        Some((_, body)) => parse_alerts(body),
        None => return Err(ParseError::MissingDimension(RiskField::Alerts.name())),
    };
    let safe_speed = parse_safe_speed(&get(RiskField::SafeSpeed)?)?;

    Ok(RiskReport {
        environmental_risk,
        behavior_risk,
        flow_risk,
        overall_level,
        justification,
        alerts,
        safe_speed,
        raw_text: raw.to_string(),
    })
}
