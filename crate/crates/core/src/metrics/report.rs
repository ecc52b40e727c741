use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::emd::CostMode;
use super::judge::MetricOutcome;
use crate::prompt::CoverageScores;

/// Which text of a run is being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStage {
    /// Round-0 captions read as if they were the story.
    Captions,
    Initial,
    Refined,
    Ultimate,
}

impl EvalStage {
    pub const ALL: [EvalStage; 4] = [EvalStage::Captions, EvalStage::Initial, EvalStage::Refined, EvalStage::Ultimate];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalStage::Captions => "captions",
            EvalStage::Initial => "initial",
            EvalStage::Refined => "refined",
            EvalStage::Ultimate => "ultimate",
        }
    }

    pub fn file_name(self) -> String {
        format!("eval_{}.json", self.as_str())
    }
}

/// Settings that make scores comparable across reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub cost_mode: CostMode,
    pub emd_scale: f64,
    pub sentence_splitter: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            cost_mode: CostMode::Dissimilarity,
            emd_scale: 100.0,
            sentence_splitter: "terminal punctuation with abbreviation guard, per chunk".into(),
        }
    }
}

/// Metric bundle for one album at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub album_id: String,
    pub stage: EvalStage,
    pub sentence_count: usize,
    pub emd: MetricOutcome<f64>,
    pub detail: MetricOutcome<u64>,
    pub coverage: MetricOutcome<CoverageScores>,
    pub coherence: MetricOutcome<f64>,
    pub backends: BTreeMap<String, String>,
    pub settings: EvalSettings,
}

/// Mean of each metric over the albums where it was measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: EvalStage,
    pub albums: usize,
    pub mean_sentences: f64,
    pub emd: Option<f64>,
    pub detail: Option<f64>,
    pub coverage: Option<f64>,
    pub coherence: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One summary per stage present in `reports`, in stage order.
pub fn aggregate(reports: &[EvalReport]) -> Vec<StageSummary> {
    let mut by_stage: BTreeMap<EvalStage, Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        by_stage.entry(r.stage).or_default().push(r);
    }
    by_stage
        .into_iter()
        .map(|(stage, rs)| StageSummary {
            stage,
            albums: rs.len(),
            mean_sentences: mean(rs.iter().map(|r| r.sentence_count as f64)).unwrap_or(0.0),
            emd: mean(rs.iter().filter_map(|r| r.emd.value().copied())),
            detail: mean(rs.iter().filter_map(|r| r.detail.value().map(|&d| d as f64))),
            coverage: mean(rs.iter().filter_map(|r| r.coverage.value().map(|c| c.average))),
            coherence: mean(rs.iter().filter_map(|r| r.coherence.value().copied())),
        })
        .collect()
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "skipped".to_string(), |x| format!("{x:.digits$}"))
}

/// Aligned plain-text table: one row per stage.
pub fn render_table(summaries: &[StageSummary]) -> String {
    let header = ["Stage", "Albums", "#Sentence", "EMD", "Detail", "Coverage", "Coherence"];
    let rows: Vec<[String; 7]> = summaries
        .iter()
        .map(|s| {
            [
                s.stage.as_str().to_string(),
                s.albums.to_string(),
                format!("{:.2}", s.mean_sentences),
                cell(s.emd, 2),
                cell(s.detail, 2),
                cell(s.coverage, 2),
                cell(s.coherence, 2),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).expect("write to string");
    };
    line(&mut out, &header);
    line(&mut out, &widths.map(|w| "-".repeat(w)).iter().map(String::as_str).collect::<Vec<_>>());
    for r in &rows {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Qualitative trend checks over the stage means. Informational only.
///
/// Expects Detail to rise from stage to stage and the ultimate story's EMD
/// to be lower than the initial story's, over at least `min_albums` albums.
pub fn trend_diagnostic(summaries: &[StageSummary], min_albums: usize) -> Vec<String> {
    let mut out = Vec::new();
    let albums = summaries.iter().map(|s| s.albums).min().unwrap_or(0);
    if albums < min_albums {
        out.push(format!("trend check: needs at least {min_albums} albums per stage, have {albums}; not evaluated"));
        return out;
    }
    let details: Vec<(EvalStage, f64)> = summaries.iter().filter_map(|s| s.detail.map(|d| (s.stage, d))).collect();
    if details.len() >= 2 {
        let rising = details.windows(2).all(|w| w[1].1 > w[0].1);
        let chain: Vec<String> = details.iter().map(|(s, d)| format!("{} {d:.2}", s.as_str())).collect();
        out.push(format!(
            "trend check: detail {} across stages ({})",
            if rising { "increases" } else { "does not increase" },
            chain.join(" -> ")
        ));
    } else {
        out.push("trend check: detail measured for fewer than two stages; not evaluated".into());
    }
    let emd = |stage| summaries.iter().find(|s| s.stage == stage).and_then(|s| s.emd);
    match (emd(EvalStage::Initial), emd(EvalStage::Ultimate)) {
        (Some(i), Some(u)) => out.push(format!(
            "trend check: ultimate EMD {u:.2} {} initial EMD {i:.2}",
            if u < i { "<" } else { ">=" }
        )),
        _ => out.push("trend check: EMD missing for the initial or ultimate stage; not evaluated".into()),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(album: &str, stage: EvalStage, detail: u64, emd: f64) -> EvalReport {
        EvalReport {
            album_id: album.into(),
            stage,
            sentence_count: 10,
            emd: MetricOutcome::Measured { value: emd },
            detail: MetricOutcome::Measured { value: detail },
            coverage: MetricOutcome::skipped("offline"),
            coherence: MetricOutcome::skipped("offline"),
            backends: BTreeMap::new(),
            settings: EvalSettings::default(),
        }
    }

    #[test]
    fn aggregates_per_stage() {
        let rs = vec![
            report("a", EvalStage::Initial, 10, 20.0),
            report("b", EvalStage::Initial, 20, 10.0),
            report("a", EvalStage::Captions, 5, 30.0),
        ];
        let s = aggregate(&rs);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].stage, EvalStage::Captions);
        assert_eq!(s[1].albums, 2);
        assert_eq!(s[1].detail, Some(15.0));
        assert_eq!(s[1].emd, Some(15.0));
        assert_eq!(s[1].coverage, None);
        let table = render_table(&s);
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("skipped"));
    }

    #[test]
    fn trend_needs_enough_albums() {
        let s = aggregate(&[report("a", EvalStage::Initial, 1, 1.0)]);
        assert!(trend_diagnostic(&s, 3)[0].contains("not evaluated"));
    }

    #[test]
    fn trend_reports_direction() {
        let mut rs = Vec::new();
        for a in ["a", "b", "c"] {
            rs.push(report(a, EvalStage::Initial, 10, 18.0));
            rs.push(report(a, EvalStage::Ultimate, 20, 16.0));
        }
        let lines = trend_diagnostic(&aggregate(&rs), 3);
        assert!(lines[0].contains("increases"));
        assert!(lines[1].contains("16.00 < initial"));
    }
}
