use albumstory::backends::{DecodingParams, FnChat};
use albumstory::dataset::{
    build_manifest, synthesize_triplets, triplets_to_jsonl, validate_triplet_lines, ManifestError, ParagraphRecord, FRAMES_PER_COLLECTION,
};
use albumstory::prompt::TemplateSet;

fn frames_tree(spec: &[(&str, &str, usize)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (cat, id, n) in spec {
        let d = dir.path().join(cat).join(id);
        std::fs::create_dir_all(&d).unwrap();
        for i in 0..*n {
            std::fs::write(d.join(format!("{:04}.jpg", i + 1)), [i as u8]).unwrap();
        }
    }
    dir
}

#[test]
fn five_categories_of_ten_frames() {
    let cats = ["birthday", "camping", "christmas", "travel", "wedding"];
    let spec: Vec<(&str, String, usize)> = cats
        .iter()
        .flat_map(|c| (0..6).map(move |k| (*c, format!("{c}-{k}"), FRAMES_PER_COLLECTION)))
        .collect();
    let spec: Vec<(&str, &str, usize)> = spec.iter().map(|(c, id, n)| (*c, id.as_str(), *n)).collect();
    let dir = frames_tree(&spec);
    let manifest = build_manifest(dir.path(), true).unwrap();
    assert_eq!(manifest.collections.len(), 30);
    assert!(manifest.collections.iter().all(|c| c.frames.len() == 10));
    assert_eq!(build_manifest(dir.path(), true).unwrap().to_json(), manifest.to_json());
    let albums = manifest.albums();
    assert!(albums.iter().all(|a| albumstory::model::validate_album(a).is_empty()));
}

#[test]
fn strict_mode_reports_every_violation() {
    let dir = frames_tree(&[("travel", "short", 9), ("travel", "ok", 10), ("hobby", "odd", 10)]);
    match build_manifest(dir.path(), true).unwrap_err() {
        ManifestError::Violations(v) => {
            assert_eq!(v.len(), 2);
            assert!(v.iter().any(|x| x.message == "expected 10, found 9"));
        }
        e => panic!("{e}"),
    }
}

#[test]
fn synthesis_to_validated_jsonl() {
    let chat = FnChat::new("rewriter", |msgs| {
        let prompt = &msgs[0].content;
        Ok(if prompt.contains("antonym") || prompt.contains("opposite") {
            "A gloomy, empty street under a dim sky.".to_string()
        } else {
            "A cheerful, crowded street under a bright sky.".to_string()
        })
    });
    let records: Vec<ParagraphRecord> = (0..8)
        .map(|i| ParagraphRecord {
            image_ref: format!("vg/{i}.jpg"),
            detailed_caption: format!("A busy street with {i} people and a clear sky."),
        })
        .collect();
    let summary = synthesize_triplets(&records, &chat, &TemplateSet::defaults(), &DecodingParams::default(), 3);
    assert_eq!(summary.triplets.len(), 8);
    assert_eq!(summary.skipped, 0);
    let text = triplets_to_jsonl(&summary.triplets);
    assert_eq!(text.lines().count(), 8);
    assert!(validate_triplet_lines(&text).is_valid());
    let order: Vec<&str> = summary.triplets.iter().map(|t| t.image_ref.as_str()).collect();
    let want: Vec<String> = (0..8).map(|i| format!("vg/{i}.jpg")).collect();
    assert_eq!(order, want);
}
