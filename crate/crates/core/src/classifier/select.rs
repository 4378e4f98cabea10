use crate::{Error, Result};

/// Indices of the `k` largest scores, best first; ties go to the lower index.
pub fn competitive_select(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}
