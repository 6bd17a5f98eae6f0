use super::{LaneRelation, TtcReport};

pub const DEFAULT_TTC_THRESHOLD: f64 = 5.0;

/// Text observation made of template sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextObs(pub String);

impl TextObs {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for TextObs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn same_lane_sentence(ttc: f64) -> String {
    format!("A collision will be happening in {ttc:.1}s.")
}

pub fn lane_change_sentence(ttc: f64, relation: LaneRelation) -> String {
    let side = match relation {
        LaneRelation::Left => "left",
        LaneRelation::Right => "right",
        LaneRelation::Same => panic!("lane change sentences need an adjacent lane"),
    };
    format!("A collision would happen in {ttc:.1}s if ego makes a {side} lane change.")
}

pub fn no_collision_sentence(threshold: f64) -> String {
    format!("No foreseeable collision in {threshold}s.")
}

/// Sentences in order same lane, left, right; within a group by
/// increasing ttc. Only ttc strictly below `threshold` is described.
pub fn describe_text(report: &TtcReport, threshold: f64) -> TextObs {
    let pick = |relation: LaneRelation, front_only: bool| {
        let mut ttcs: Vec<f64> = report
            .by_relation(relation)
            .filter(|e| e.ttc < threshold && (e.ahead || !front_only))
            .map(|e| e.ttc)
            .collect();
        ttcs.sort_by(f64::total_cmp);
        ttcs
    };
    let mut sentences: Vec<String> = pick(LaneRelation::Same, true).into_iter().map(same_lane_sentence).collect();
    if sentences.is_empty() {
        sentences.push(no_collision_sentence(threshold));
    }
    for relation in [LaneRelation::Left, LaneRelation::Right] {
        sentences.extend(pick(relation, false).into_iter().map(|t| lane_change_sentence(t, relation)));
    }
    TextObs(sentences.join(" "))
}

/// Structure recovered from a text observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedText {
    pub no_collision: bool,
    pub same: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Inverse of [`describe_text`]; `None` if any sentence is not a template.
pub fn parse_text(text: &str, threshold: f64) -> Option<ParsedText> {
    let mut parsed = ParsedText::default();
    let clear = no_collision_sentence(threshold);
    let parts: Vec<&str> = text.split(". ").collect();
    let last = parts.len() - 1;
    for (i, part) in parts.into_iter().enumerate() {
        let owned;
        let sentence = if i < last {
            owned = format!("{part}.");
            owned.as_str()
        } else {
            part
        };
        if sentence == clear {
            parsed.no_collision = true;
        } else if let Some(t) = sentence
            .strip_prefix("A collision will be happening in ")
            .and_then(|s| s.strip_suffix("s."))
        {
            parsed.same.push(parse_ttc(t)?);
        } else if let Some(t) = sentence.strip_prefix("A collision would happen in ") {
            let (ttc, side) = t.split_once("s if ego makes a ")?;
            let ttc = parse_ttc(ttc)?;
            match side {
                "left lane change." => parsed.left.push(ttc),
                "right lane change." => parsed.right.push(ttc),
                _ => return None,
            }
        } else {
            return None;
        }
    }
    Some(parsed)
}

fn parse_ttc(s: &str) -> Option<f64> {
    let (int, frac) = s.split_once('.')?;
    let ok = !int.is_empty() && frac.len() == 1 && s.chars().all(|c| c.is_ascii_digit() || c == '.');
    ok.then(|| s.parse().ok()).flatten()
}
