//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.

#![allow(dead_code)]

use std::sync::Arc;

use albumstory::backends::{Backends, Captioner, ChatModel, Counted, MockCaptioner, MockStoryteller};
use albumstory::model::{Album, RunConfig};
use albumstory::pipeline::MemoryImageStore;
use rand::Rng;

/// Minimum transport cost with uniform marginals, by enumerating every
/// basic solution (spanning tree of the bipartite cell graph).
///
/// Flows are scaled by `n * m`, which makes every basic flow an integer.
pub fn brute_force_uniform_transport(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let scale = (n * m) as i64;
    let supply = vec![m as i64; n];
    let demand = vec![n as i64; m];
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    for_each_combination(cells.len(), k, &mut |idx| {
        let tree: Vec<(usize, usize)> = idx.iter().map(|&c| cells[c]).collect();
        if !is_spanning_tree(&tree, n, m) {
            return;
        }
        if let Some(flows) = tree_flows(&tree, &supply, &demand) {
            let total: f64 = tree.iter().zip(&flows).map(|(&(i, j), &f)| f as f64 / scale as f64 * cost[i][j]).sum();
            best = best.min(total);
        }
    });
    best
}

fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for c in start..n {
            if n - c < k - cur.len() {
                break;
            }
            cur.push(c);
            rec(c + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

fn is_spanning_tree(tree: &[(usize, usize)], n: usize, m: usize) -> bool {
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(i, j) in tree {
        let a = find(&mut parent, i);
        let b = find(&mut parent, n + j);
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Flows on a spanning tree by repeatedly settling a leaf node.
/// `None` when any flow comes out negative.
fn tree_flows(tree: &[(usize, usize)], supply: &[i64], demand: &[i64]) -> Option<Vec<i64>> {
    let n = supply.len();
    let mut residual: Vec<i64> = supply.iter().chain(demand).copied().collect();
    let mut flows: Vec<Option<i64>> = vec![None; tree.len()];
    for _ in 0..tree.len() {
        let node = (0..residual.len()).find(|&v| {
            tree.iter()
                .enumerate()
                .filter(|(e, &(i, j))| flows[*e].is_none() && (i == v || n + j == v))
                .count()
                == 1
        })?;
        let (e, &(i, j)) = tree
            .iter()
            .enumerate()
            .find(|(e, &(i, j))| flows[*e].is_none() && (i == node || n + j == node))
            .expect("leaf edge");
        let f = residual[node];
        flows[e] = Some(f);
        residual[i] -= f;
        residual[n + j] -= f;
    }
    let flows: Vec<i64> = flows.into_iter().map(|f| f.expect("all settled")).collect();
    flows.iter().all(|&f| f >= 0).then_some(flows)
}

/// Character-level Levenshtein distance, textbook two-row DP.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn random_string(rng: &mut impl Rng, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', ' ', 'é', 'ß', '日', '.'];
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

pub fn random_costs(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..=2.0)).collect()).collect()
}

const SCENES: &[&str] = &[
    "tent pitched beside a calm lake",
    "campfire with marshmallows at dusk",
    "hikers on a rocky ridge trail",
    "canoe drifting near pine trees",
    "stars above the dark campsite",
    "breakfast cooked on a camp stove",
    "dog sleeping in a hammock",
    "map spread on a wooden table",
    "sunrise fog over the valley",
    "packing the car to go home",
];

/// A camping album of `n` photos whose bytes are descriptive tags.
pub fn fixture_album(n: usize) -> (Album, MemoryImageStore) {
    let id = format!("fixture{n}");
    let paths: Vec<String> = (0..n).map(|i| format!("camping/{id}/{i:04}.jpg")).collect();
    let mut store = MemoryImageStore::new();
    for (i, p) in paths.iter().enumerate() {
        store.insert(p.clone(), format!("{} {i}", SCENES[i % SCENES.len()]));
    }
    (Album::from_paths(id, "camping", paths), store)
}

/// Mock backends with counted captioner and chat.
pub struct CountedBackends {
    pub backends: Backends,
    pub captioner: Arc<Counted<MockCaptioner>>,
    pub chat: Arc<Counted<MockStoryteller>>,
}

pub fn counted_mock_backends(config: &RunConfig) -> CountedBackends {
    let mut backends = Backends::mock(config.seed);
    let captioner = Arc::new(Counted::new(MockCaptioner::new()));
    let chat = Arc::new(Counted::new(MockStoryteller::new(config.seed)));
    backends.captioner = captioner.clone() as Arc<dyn Captioner>;
    backends.chat = chat.clone() as Arc<dyn ChatModel>;
    CountedBackends { backends, captioner, chat }
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Reply fixtures as `(name, reply text, expectation)`, sorted by name.
pub fn reply_fixtures() -> Vec<(String, String, serde_json::Value)> {
    let dir = fixtures_dir().join("replies");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .expect("fixture dir")
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_suffix(".txt").map(str::to_string))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let reply = std::fs::read_to_string(dir.join(format!("{name}.txt"))).expect("reply");
            let expect = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json"))).expect("expectation")).expect("expectation JSON");
            (name, reply, expect)
        })
        .collect()
}

/// Checks one reply fixture against its expectation.
pub fn check_reply_fixture(reply: &str, expect: &serde_json::Value) -> Result<(), String> {
    use albumstory::prompt::{parse_pair_records, parse_story_list, repair_json, ParseFailure, ParseFailureKind, RequiredKey};

    let once = repair_json(reply);
    if repair_json(&once) != once {
        return Err("repair_json is not idempotent".into());
    }
    let strs = |k: &str| -> Vec<String> {
        expect[k].as_array().map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect()).unwrap_or_default()
    };
    let (result, warnings): (Result<Vec<String>, ParseFailure>, Vec<String>) = match expect["parser"].as_str() {
        Some("pair_records") => {
            let key = match expect["key"].as_str() {
                Some("refine_story") => RequiredKey::RefineStory,
                _ => RequiredKey::InitialStory,
            };
            match parse_pair_records(reply, &strs("paths"), key) {
                Ok(parsed) => {
                    let paths: Vec<String> = parsed.records.iter().map(|r| r.img_path.clone()).collect();
                    if paths != strs("paths") {
                        return Err(format!("records not aligned: {paths:?}"));
                    }
                    let stories = parsed
                        .records
                        .iter()
                        .map(|r| match key {
                            RequiredKey::InitialStory => r.initial_story.clone().unwrap_or_default(),
                            RequiredKey::RefineStory => r.refine_story.clone().unwrap_or_default(),
                        })
                        .collect();
                    (Ok(stories), parsed.warnings)
                }
                Err(f) => (Err(f), Vec::new()),
            }
        }
        Some("story_list") => (parse_story_list(reply, 3), Vec::new()),
        other => return Err(format!("unknown parser {other:?}")),
    };
    let outcome = expect["outcome"].as_str().unwrap_or_default();
    match (outcome, result) {
        ("ok", Ok(stories)) => {
            if stories != strs("stories") {
                return Err(format!("stories differ: {stories:?}"));
            }
            for w in strs("warnings_contain") {
                if !warnings.iter().any(|x| x.contains(&w)) {
                    return Err(format!("no warning mentioning {w:?} in {warnings:?}"));
                }
            }
            if strs("warnings_contain").is_empty() && !warnings.is_empty() {
                return Err(format!("unexpected warnings {warnings:?}"));
            }
            Ok(())
        }
        ("ok", Err(f)) => Err(format!("expected success, got {f}")),
        (want, Ok(_)) => Err(format!("expected {want}, parsed successfully")),
        (want, Err(f)) => {
            let got = match f.kind {
                ParseFailureKind::MalformedJson => "malformed_json",
                ParseFailureKind::CountMismatch { expected, found } => {
                    if expect["expected"].as_u64() != Some(expected as u64) || expect["found"].as_u64() != Some(found as u64) {
                        return Err(format!("count mismatch {expected}/{found} differs from expectation"));
                    }
                    "count_mismatch"
                }
                ParseFailureKind::PathMutation => "path_mutation",
                ParseFailureKind::MissingKey => "missing_key",
            };
            if got == want {
                Ok(())
            } else {
                Err(format!("expected {want}, got {got} ({f})"))
            }
        }
    }
}
