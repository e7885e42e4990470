use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tabvec::learn::{logreg_fit, out_of_fold, roc_auc, stacking_ensemble};
use tabvec::FeatureMatrix;

fn column(values: &[f64], rows: &[usize]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows.iter().map(|&i| vec![values[i]]).collect(), vec!["f".into()]).unwrap()
}

/// Each base model sees one of two independent halves of the signal.
#[test]
fn stacking_complementary_bases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 1200;
    let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<bool> = (0..n).map(|i| a[i] + b[i] + 0.5 * noise[i] > 0.0).collect();
    let train: Vec<usize> = (0..800).collect();
    let test: Vec<usize> = (800..n).collect();
    let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();

    let base = |feature: &[f64]| {
        let oof = out_of_fold(&y_train, 1, |tr, te| {
            let tr_rows: Vec<usize> = tr.iter().map(|&i| train[i]).collect();
            let te_rows: Vec<usize> = te.iter().map(|&i| train[i]).collect();
            let labels: Vec<bool> = tr_rows.iter().map(|&i| y[i]).collect();
            logreg_fit(&column(feature, &tr_rows), &labels, 1e-3)?.predict_proba(&column(feature, &te_rows))
        })
        .unwrap();
        let full = logreg_fit(&column(feature, &train), &y_train, 1e-3).unwrap();
        (oof, full.predict_proba(&column(feature, &test)).unwrap())
    };
    let (oof_a, test_a) = base(&a);
    let (oof_b, test_b) = base(&b);
    let stacked = stacking_ensemble(&[oof_a, oof_b], &y_train, &[test_a.clone(), test_b.clone()]).unwrap();

    let auc_a = roc_auc(&test_a, &y_test).unwrap();
    let auc_b = roc_auc(&test_b, &y_test).unwrap();
    let auc_s = roc_auc(&stacked, &y_test).unwrap();
    assert!(auc_s >= auc_a.max(auc_b) - 0.01, "stacked {auc_s} vs bases {auc_a}, {auc_b}");
    assert!(auc_s > auc_a.max(auc_b) + 0.05, "complementary halves should add up: {auc_s}");
}
