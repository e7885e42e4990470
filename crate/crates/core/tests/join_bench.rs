use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tabvec::embed::{write_embedding_file, BackendConfig, Embedder};
use tabvec::join::{JoinEncoder, DEFAULT_THRESHOLDS};
use tabvec::pipeline::{run_join_benchmark, JoinPair, PipelineConfig};
use tabvec::table::Table;

fn word(rng: &mut ChaCha8Rng, alphabet: &[u8]) -> String {
    (0..rng.random_range(6..12)).map(|_| alphabet[rng.random_range(0..alphabet.len())] as char).collect()
}

/// Right keys share no character with left keys; only the vectors say
/// which entities correspond.
#[test]
fn embeddings_outrank_tfidf_on_semantic_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut records: Vec<(String, Vec<f64>)> = Vec::new();
    let mut pairs = Vec::new();
    for p in 0..3 {
        let n = 40;
        let left: Vec<String> = (0..n).map(|_| word(&mut rng, b"abcdefghijklm")).collect();
        let right: Vec<String> = (0..n).map(|_| word(&mut rng, b"NOPQRSTUVWXYZ")).collect();
        for (l, r) in left.iter().zip(&right) {
            let v: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
            let noisy: Vec<f64> = v.iter().map(|x| x + 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            records.push((l.clone(), v));
            records.push((r.clone(), noisy));
        }
        pairs.push(JoinPair {
            name: format!("pair{p}"),
            left: Table::new("l", vec!["k".into()], vec![left]).unwrap(),
            right: Table::new("r", vec!["k".into()], vec![right]).unwrap(),
            left_key: "k".into(),
            right_key: "k".into(),
            gold: (0..n).map(Some).collect(),
        });
    }
    let path = dir.path().join("vectors.jsonl");
    write_embedding_file(&path, records.iter().map(|(t, v)| (t.as_str(), v.as_slice()))).unwrap();
    let embedder = Embedder::from_config(&BackendConfig::file(&path)).unwrap();
    let report = run_join_benchmark(
        &pairs,
        &[JoinEncoder::Tfidf, JoinEncoder::Embedding],
        Some(JoinEncoder::Tfidf),
        &DEFAULT_THRESHOLDS,
        &PipelineConfig::default(),
        Some(&embedder),
    )
    .unwrap();
    assert_eq!(report.pooled_rank("embedding"), Some(1.0));
    assert_eq!(report.pooled_rank("tfidf"), Some(2.0));
    for cell in report.cells.iter().filter(|c| c.method == "embedding") {
        assert_eq!(cell.mean, 1.0, "{}", cell.dataset);
    }
}
