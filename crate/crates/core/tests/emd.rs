use albumstory::backends::{Embedder, EmbeddingVector, SemanticEmbedder};
use albumstory::metrics::{cost_matrix, emd_from_embeddings, emd_score, CostMode, EmdError, TransportProblem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector<f64> {
    EmbeddingVector::normalized((0..dim).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

#[test]
fn identical_sets_score_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=6 {
        let images: Vec<_> = (0..n).map(|_| random_unit(&mut rng, 32)).collect();
        let r = emd_from_embeddings(&images, &images, CostMode::Dissimilarity).unwrap();
        assert!(r.score.abs() < 1e-9, "n={n}: {}", r.score);
    }
}

#[test]
fn sentence_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..=5), rng.gen_range(1..=7));
        let images: Vec<_> = (0..n).map(|_| random_unit(&mut rng, 16)).collect();
        let mut sentences: Vec<_> = (0..m).map(|_| random_unit(&mut rng, 16)).collect();
        let a = emd_from_embeddings(&images, &sentences, CostMode::Dissimilarity).unwrap().score;
        sentences.shuffle(&mut rng);
        let b = emd_from_embeddings(&images, &sentences, CostMode::Dissimilarity).unwrap().score;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn cost_scaling_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let images: Vec<_> = (0..n).map(|_| random_unit(&mut rng, 8)).collect();
        let sentences: Vec<_> = (0..m).map(|_| random_unit(&mut rng, 8)).collect();
        let cost = cost_matrix(&images, &sentences, CostMode::Dissimilarity).unwrap();
        let base = TransportProblem::uniform(cost.clone()).unwrap().solve().unwrap().total_cost;
        let lambda = rng.gen_range(0.1..10.0);
        let scaled = TransportProblem::uniform(cost * lambda).unwrap().solve().unwrap().total_cost;
        assert!((scaled - lambda * base).abs() < 1e-9);
    }
}

#[test]
fn opposite_vectors_cost_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_unit(&mut rng, 8);
    let r = emd_from_embeddings(std::slice::from_ref(&u), &[u.negated()], CostMode::Dissimilarity).unwrap();
    assert!((r.score - 200.0).abs() < 1e-9);
    let raw = emd_from_embeddings(std::slice::from_ref(&u), &[u.negated()], CostMode::RawSimilarity).unwrap();
    assert!((raw.score + 100.0).abs() < 1e-9);
}

#[test]
fn single_precision_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let images: Vec<_> = (0..4).map(|_| random_unit(&mut rng, 16)).collect();
    let sentences: Vec<_> = (0..6).map(|_| random_unit(&mut rng, 16)).collect();
    let d = emd_from_embeddings(&images, &sentences, CostMode::Dissimilarity).unwrap().score;
    let i32s: Vec<EmbeddingVector<f32>> = images.iter().map(|v| v.cast()).collect();
    let s32s: Vec<EmbeddingVector<f32>> = sentences.iter().map(|v| v.cast()).collect();
    let s = emd_from_embeddings(&i32s, &s32s, CostMode::Dissimilarity).unwrap().score;
    assert!((d - s as f64).abs() < 1e-3);
}

#[test]
fn mismatched_dimensions_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let err = emd_from_embeddings(&[random_unit(&mut rng, 4)], &[random_unit(&mut rng, 5)], CostMode::Dissimilarity).unwrap_err();
    assert_eq!(err, EmdError::DimMismatch(4, 5));
    assert_eq!(emd_from_embeddings::<f64>(&[], &[random_unit(&mut rng, 4)], CostMode::Dissimilarity).unwrap_err(), EmdError::Empty("images"));
}

#[test]
fn embedder_scores_matching_text_lower() {
    let embedder = SemanticEmbedder::new(0, 64);
    let images: Vec<Vec<u8>> = vec![b"red kite over the beach".to_vec(), b"sandcastle with a flag".to_vec()];
    let matching = vec!["A red kite over the beach.".to_string(), "A sandcastle with a flag.".to_string()];
    let unrelated = vec!["Quarterly tax forms.".to_string(), "Printer ink prices.".to_string()];
    let good = emd_score(&images, &matching, &embedder, CostMode::Dissimilarity).unwrap();
    let bad = emd_score(&images, &unrelated, &embedder, CostMode::Dissimilarity).unwrap();
    assert!(good < bad, "{good} vs {bad}");
    assert!(embedder.embed_text("").is_err());
}
