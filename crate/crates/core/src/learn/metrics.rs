use crate::error::{Error, Result};

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann–Whitney U over average ranks).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("ROC-AUC needs both classes".into()));
    }
    let ranks = average_ranks(scores);
    let pos_rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// 1-based ascending ranks, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Mean over tasks of each method's rank, where rank 1 is the best (highest)
/// score of a task and ties share the average rank.
///
/// `scores[m][t]` is method `m` on task `t`; `NaN` marks a missing entry.
pub fn mean_rank(scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n_methods = scores.len();
    if n_methods == 0 {
        return Err(Error::invalid("mean_rank needs at least one method"));
    }
    let n_tasks = scores[0].len();
    if n_tasks == 0 || scores.iter().any(|s| s.len() != n_tasks) {
        return Err(Error::invalid("every method must be scored on the same non-empty task list"));
    }
    if scores.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::invalid("missing entry in score matrix"));
    }
    let mut totals = vec![0.0; n_methods];
    for t in 0..n_tasks {
        let negated: Vec<f64> = scores.iter().map(|s| -s[t]).collect();
        for (total, r) in totals.iter_mut().zip(average_ranks(&negated)) {
            *total += r;
        }
    }
    Ok(totals.into_iter().map(|t| t / n_tasks as f64).collect())
}

/// Mean and standard error (sample standard deviation over √n).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn auc_hand_cases() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(), 0.75);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn rank_hand_cases() {
        assert_eq!(mean_rank(&[vec![0.9, 0.8], vec![0.5, 0.1]]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(mean_rank(&[vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap(), vec![1.5, 1.5]);
        // task 0: A=0.9 B=0.8 C=0.7 -> 1,2,3 ; task 1: A=0.6 B=0.9 C=0.6 -> 2.5,1,2.5
        let r = mean_rank(&[vec![0.9, 0.6], vec![0.8, 0.9], vec![0.7, 0.6]]).unwrap();
        assert_eq!(r, vec![1.75, 1.5, 2.75]);
        assert!(mean_rank(&[vec![0.1, f64::NAN]]).is_err());
        assert!(mean_rank(&[vec![0.1, 0.2], vec![0.3]]).is_err());
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mean_rank_ignores_monotone_rescaling(
            scores in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 3),
            a in 0.1f64..10.0,
        ) {
            let transformed: Vec<Vec<f64>> = scores
                .iter()
                .map(|s| s.iter().map(|v| a * v.powi(3) + 1.0).collect())
                .collect();
            prop_assert_eq!(mean_rank(&scores).unwrap(), mean_rank(&transformed).unwrap());
        }
    }
}
