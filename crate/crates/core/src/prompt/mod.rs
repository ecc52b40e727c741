//! Renders the storytelling and judge prompts and turns chat replies back
//! into structured data.

mod metric_output;
mod records;
mod repair;
mod template;

use serde_json::json;

use crate::backends::ChatMessage;
use crate::model::PairRecord;
pub use metric_output::{parse_metric_output, CoverageScores, MetricKind, MetricParseError, MetricValue};
pub use records::{parse_pair_records, parse_story_list, ParseFailure, ParseFailureKind, ParsedRecords, RequiredKey};
pub use repair::repair_json;
pub use template::{PromptTemplate, TemplateError, TemplateId, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("cannot render {0} from an empty list")]
    Empty(&'static str),
    #[error("record {index} ({img_path}) lacks '{field}'")]
    MissingField { index: usize, img_path: String, field: &'static str },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

/// The two user turns of the initial step: the story request, then the
/// request to restructure that story as records. The caller sends the first
/// turn, appends the model's answer, then sends the second.
pub fn render_initial(templates: &TemplateSet, records: &[PairRecord]) -> Result<[ChatMessage; 2], PromptError> {
    if records.is_empty() {
        return Err(PromptError::Empty("captions"));
    }
    let list: Vec<_> = records.iter().map(|r| json!({"img_path": r.img_path, "caption": r.caption})).collect();
    let first = templates.get(TemplateId::Initial).render(&[("captions", &to_json(&list))])?;
    let second = templates.get(TemplateId::InitialStructure).render(&[])?;
    Ok([ChatMessage::user(first), ChatMessage::user(second)])
}

/// Revision prompt. Each record's current story (latest refined, else
/// initial) is sent under `initial_story`.
pub fn render_refine(templates: &TemplateSet, records: &[PairRecord]) -> Result<Vec<ChatMessage>, PromptError> {
    if records.is_empty() {
        return Err(PromptError::Empty("records"));
    }
    let missing = |index: usize, r: &PairRecord, field| PromptError::MissingField {
        index,
        img_path: r.img_path.clone(),
        field,
    };
    fn nonblank(s: Option<&str>) -> Option<&str> {
        s.filter(|s| !s.trim().is_empty())
    }
    let mut list = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.caption.trim().is_empty() {
            return Err(missing(i, r, "caption"));
        }
        let story = nonblank(r.current_story()).ok_or_else(|| missing(i, r, "initial_story"))?;
        let refine = nonblank(r.refine_caption.as_deref()).ok_or_else(|| missing(i, r, "refine_caption"))?;
        list.push(json!({
            "img_path": r.img_path,
            "caption": r.caption,
            "initial_story": story,
            "refine_caption": refine,
        }));
    }
    let text = templates.get(TemplateId::Refine).render(&[("records", &to_json(&list))])?;
    Ok(vec![ChatMessage::user(text)])
}

/// Coherence pass over the per-photo stories, stating the required count.
pub fn render_ultimate(templates: &TemplateSet, stories: &[String]) -> Result<Vec<ChatMessage>, PromptError> {
    if stories.is_empty() {
        return Err(PromptError::Empty("stories"));
    }
    let count = stories.len().to_string();
    let text = templates.get(TemplateId::Ultimate).render(&[("stories", &to_json(&stories)), ("count", &count)])?;
    Ok(vec![ChatMessage::user(text)])
}

fn require_story(story: &str) -> Result<(), PromptError> {
    if story.trim().is_empty() {
        Err(PromptError::Empty("story"))
    } else {
        Ok(())
    }
}

pub fn render_detail(templates: &TemplateSet, story: &str) -> Result<Vec<ChatMessage>, PromptError> {
    require_story(story)?;
    Ok(vec![ChatMessage::user(templates.get(TemplateId::Detail).render(&[("story", story)])?)])
}

/// Coverage prompt comparing the story with plain (`group1`) and story-aware (`group2`) captions.
pub fn render_coverage(templates: &TemplateSet, story: &str, group1: &[String], group2: &[String]) -> Result<Vec<ChatMessage>, PromptError> {
    require_story(story)?;
    if group1.is_empty() || group2.is_empty() {
        return Err(PromptError::Empty("caption group"));
    }
    let join = |g: &[String]| g.iter().map(|c| c.trim()).collect::<Vec<_>>().join(" ");
    let text = templates
        .get(TemplateId::Coverage)
        .render(&[("captions_group1", &join(group1)), ("captions_group2", &join(group2)), ("story", story)])?;
    Ok(vec![ChatMessage::user(text)])
}

pub fn render_coherence(templates: &TemplateSet, story: &str) -> Result<Vec<ChatMessage>, PromptError> {
    require_story(story)?;
    Ok(vec![ChatMessage::user(templates.get(TemplateId::Coherence).render(&[("story", story)])?)])
}

pub fn render_vivid(templates: &TemplateSet, caption: &str) -> Result<Vec<ChatMessage>, PromptError> {
    if caption.trim().is_empty() {
        return Err(PromptError::Empty("caption"));
    }
    Ok(vec![ChatMessage::user(templates.get(TemplateId::VividRewrite).render(&[("caption", caption)])?)])
}

pub fn render_antonym(templates: &TemplateSet, story: &str) -> Result<Vec<ChatMessage>, PromptError> {
    require_story(story)?;
    Ok(vec![ChatMessage::user(templates.get(TemplateId::AntonymSwap).render(&[("story", story)])?)])
}

/// Follow-up user turn asking the model to fix a reply that failed to parse.
pub fn corrective_tip(failure: &ParseFailure) -> String {
    match &failure.kind {
        ParseFailureKind::CountMismatch { expected, found } => {
            format!("You returned {found} stories; return exactly {expected}.")
        }
        ParseFailureKind::PathMutation => {
            "Some \"img_path\" values were changed. Return the list again with every \"img_path\" copied exactly from the input.".to_string()
        }
        ParseFailureKind::MissingKey => format!("Your answer is incomplete: {}. Return the full JSON list again.", failure.detail),
        ParseFailureKind::MalformedJson => "Your answer could not be read as JSON. Return only the JSON list, with no other text.".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(caps: &[&str]) -> Vec<PairRecord> {
        caps.iter().enumerate().map(|(i, c)| PairRecord::new(format!("alb/{i}.jpg"), *c)).collect()
    }

    #[test]
    fn initial_keeps_caption_order() {
        let t = TemplateSet::defaults();
        let [first, second] = render_initial(&t, &recs(&["a dog", "a beach"])).unwrap();
        let a = first.content.find("a dog").unwrap();
        let b = first.content.find("a beach").unwrap();
        assert!(a < b);
        for key in ["img_path", "caption", "initial_story"] {
            assert!(second.content.contains(key));
        }
        assert_eq!(render_initial(&t, &[]).unwrap_err(), PromptError::Empty("captions"));
    }

    #[test]
    fn initial_mentions_each_caption_once() {
        let caps: Vec<String> = (0..10).map(|i| format!("caption number {i}x")).collect();
        let refs: Vec<&str> = caps.iter().map(String::as_str).collect();
        let [first, _] = render_initial(&TemplateSet::defaults(), &recs(&refs)).unwrap();
        for c in &caps {
            assert_eq!(first.content.matches(c.as_str()).count(), 1, "{c}");
        }
    }

    #[test]
    fn refine_embeds_records() {
        let t = TemplateSet::defaults();
        let mut rs = recs(&["c0"]);
        rs[0].initial_story = Some("s0".into());
        rs[0].refine_caption = Some("rc0".into());
        let msgs = render_refine(&t, &rs).unwrap();
        assert!(msgs[0].content.contains("\"alb/0.jpg\""));
        rs[0].refine_caption = None;
        match render_refine(&t, &rs).unwrap_err() {
            PromptError::MissingField { img_path, field, .. } => {
                assert_eq!(img_path, "alb/0.jpg");
                assert_eq!(field, "refine_caption");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn refine_list_has_one_entry_per_record() {
        let mut rs = recs(&["c"; 10]);
        for r in &mut rs {
            r.initial_story = Some("s".into());
            r.refine_caption = Some("rc".into());
        }
        let msgs = render_refine(&TemplateSet::defaults(), &rs).unwrap();
        let data = msgs[0].content.rsplit("Data: ").next().unwrap();
        let v: Vec<serde_json::Value> = serde_json::from_str(data).unwrap();
        assert_eq!(v.len(), 10);
    }

    #[test]
    fn ultimate_states_count() {
        let t = TemplateSet::defaults();
        let ten: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        assert!(render_ultimate(&t, &ten).unwrap()[0].content.contains("10 stories"));
        assert!(render_ultimate(&t, &ten[..3]).unwrap()[0].content.contains("3 stories"));
        assert!(render_ultimate(&t, &[]).is_err());
    }

    #[test]
    fn count_tip_text() {
        let f = ParseFailure::new(ParseFailureKind::CountMismatch { expected: 10, found: 9 }, "", "");
        assert_eq!(corrective_tip(&f), "You returned 9 stories; return exactly 10.");
    }

    #[test]
    fn judge_prompts_embed_story() {
        let t = TemplateSet::defaults();
        assert!(render_detail(&t, "once upon").unwrap()[0].content.ends_with("Story: once upon"));
        let cov = render_coverage(&t, "tale", &["a".into()], &["b".into()]).unwrap();
        assert!(cov[0].content.contains("Caption group 1: a"));
        assert!(render_coherence(&t, " ").is_err());
    }
}
