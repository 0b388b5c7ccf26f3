use crate::error::{Error, Result};

/// Rank scores `(n + 1) - rank`, where rank 1 is the best value. Tied values
/// share the average of the ranks they span, so scores always sum to
/// `n (n + 1) / 2`.
pub fn rank_scores(values: &[f64], higher_better: bool) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(format!("ranking needs at least 2 models, got {n}")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("value to rank: {v}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if higher_better {
            c.reverse()
        } else {
            c
        }
    });
    let mut scores = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            scores[k] = (n + 1) as f64 - rank;
        }
        i = j;
    }
    Ok(scores)
}
