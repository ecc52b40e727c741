use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Detail,
    Coverage,
    Coherence,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Detail => "detail",
            MetricKind::Coverage => "coverage",
            MetricKind::Coherence => "coherence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageScores {
    pub group1: Option<f64>,
    pub group2: Option<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum MetricValue {
    Detail(u64),
    Coverage(CoverageScores),
    Coherence(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricParseError {
    #[error("no '{label}' line found in judge output")]
    Missing { label: &'static str },
    #[error("'{label}' value {value} is outside {range}")]
    OutOfRange { label: &'static str, value: String, range: &'static str },
}

const NUMBER: &str = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)";

struct Patterns {
    detail: Regex,
    group1: Regex,
    group2: Regex,
    average: Regex,
    coherence: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let mk = |label: &str| Regex::new(&format!(r"(?i){label}\W{{0,4}}?({NUMBER})")).expect("valid regex");
        Patterns {
            detail: mk(r"total\s+number\s+of\s+details"),
            group1: mk(r"caption\s+group\s*1"),
            group2: mk(r"caption\s+group\s*2"),
            average: mk(r"average\s+score"),
            coherence: mk(r"coherence\s+score"),
        }
    })
}

fn last_match<'a>(re: &Regex, text: &'a str) -> Option<&'a str> {
    re.captures_iter(text).last().map(|c| c.get(1).expect("group").as_str())
}

fn unit(label: &'static str, raw: &str) -> Result<f64, MetricParseError> {
    let out_of_range = || MetricParseError::OutOfRange {
        label,
        value: raw.to_string(),
        range: "[0, 1]",
    };
    let v: f64 = raw.parse().map_err(|_| out_of_range())?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(out_of_range())
    }
}

fn optional_unit(label: &'static str, re: &Regex, text: &str) -> Result<Option<f64>, MetricParseError> {
    last_match(re, text).map(|raw| unit(label, raw)).transpose()
}

/// Reads a judge reply in the fixed format its prompt requests.
///
/// Labels match case-insensitively and the last occurrence wins. For
/// coverage, a missing average is taken as the mean of the two groups.
pub fn parse_metric_output(text: &str, kind: MetricKind) -> Result<MetricValue, MetricParseError> {
    let p = patterns();
    match kind {
        MetricKind::Detail => {
            let label = "Total number of details";
            let raw = last_match(&p.detail, text).ok_or(MetricParseError::Missing { label })?;
            let out_of_range = || MetricParseError::OutOfRange {
                label,
                value: raw.to_string(),
                range: "non-negative integers",
            };
            let v: f64 = raw.parse().map_err(|_| out_of_range())?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(out_of_range());
            }
            Ok(MetricValue::Detail(v as u64))
        }
        MetricKind::Coverage => {
            let group1 = optional_unit("Caption Group 1", &p.group1, text)?;
            let group2 = optional_unit("Caption Group 2", &p.group2, text)?;
            let average = match (optional_unit("Average score", &p.average, text)?, group1, group2) {
                (Some(a), _, _) => a,
                (None, Some(a), Some(b)) => (a + b) / 2.0,
                _ => return Err(MetricParseError::Missing { label: "Average score" }),
            };
            Ok(MetricValue::Coverage(CoverageScores { group1, group2, average }))
        }
        MetricKind::Coherence => {
            let label = "Coherence Score";
            let raw = last_match(&p.coherence, text).ok_or(MetricParseError::Missing { label })?;
            Ok(MetricValue::Coherence(unit(label, raw)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detail_count() {
        assert_eq!(parse_metric_output("Total number of details: 42", MetricKind::Detail), Ok(MetricValue::Detail(42)));
        assert_eq!(parse_metric_output("TOTAL NUMBER OF DETAILS: 7.", MetricKind::Detail), Ok(MetricValue::Detail(7)));
        assert!(matches!(parse_metric_output("Total number of details: -3", MetricKind::Detail), Err(MetricParseError::OutOfRange { .. })));
        assert!(matches!(parse_metric_output("Total number of details: 2.5", MetricKind::Detail), Err(MetricParseError::OutOfRange { .. })));
        assert!(matches!(parse_metric_output("lots of details", MetricKind::Detail), Err(MetricParseError::Missing { .. })));
    }

    #[test]
    fn coverage_triple() {
        let text = "Score of story coverage for Caption Group 1: 0.60. Score of story coverage for Caption Group 2: 0.64. Average score: 0.62.";
        let MetricValue::Coverage(c) = parse_metric_output(text, MetricKind::Coverage).unwrap() else { panic!() };
        assert_eq!((c.group1, c.group2, c.average), (Some(0.60), Some(0.64), 0.62));
    }

    #[test]
    fn coverage_average_only_and_derived() {
        let MetricValue::Coverage(c) = parse_metric_output("Average score: 0.85", MetricKind::Coverage).unwrap() else { panic!() };
        assert_eq!((c.group1, c.group2, c.average), (None, None, 0.85));
        let MetricValue::Coverage(c) = parse_metric_output("caption group 1: 0.5\ncaption group 2: 0.7", MetricKind::Coverage).unwrap() else { panic!() };
        assert!((c.average - 0.6).abs() < 1e-12);
        assert!(parse_metric_output("Caption Group 1: 0.5", MetricKind::Coverage).is_err());
    }

    #[test]
    fn coherence_range_and_last_wins() {
        assert_eq!(parse_metric_output("Coherence Score: 0.77", MetricKind::Coherence), Ok(MetricValue::Coherence(0.77)));
        assert!(matches!(parse_metric_output("Coherence Score: 1.3", MetricKind::Coherence), Err(MetricParseError::OutOfRange { .. })));
        let text = "Example: Coherence Score: xx\nMy answer. coherence score: 0.4";
        assert_eq!(parse_metric_output(text, MetricKind::Coherence), Ok(MetricValue::Coherence(0.4)));
        let text = "Coherence Score: 0.2 ... on reflection, Coherence Score: 0.9";
        assert_eq!(parse_metric_output(text, MetricKind::Coherence), Ok(MetricValue::Coherence(0.9)));
    }
}
