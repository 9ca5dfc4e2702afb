use super::DownstreamError;

/// Probability that a random positive outscores a random negative, with ties
/// counted one half (average-rank formulation).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, DownstreamError> {
    if scores.len() != labels.len() {
        return Err(DownstreamError::LengthMismatch(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DownstreamError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64, DownstreamError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(DownstreamError::LengthMismatch(pred.len(), target.len()));
    }
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}
