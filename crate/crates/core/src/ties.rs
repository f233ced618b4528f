//! Deterministic ordering of criterion vectors. Values closer than a small
//! fraction of the vector's max-norm are treated as equal and ordered by
//! index, so that mirror candidates such as `z` and `p - z`, whose criteria
//! agree up to roundoff, resolve to the smaller residue on every code path.

/// Relative resolution below which two criterion values count as tied.
pub const TIE_RTOL: f64 = 1e-12;

pub fn tie_tolerance(values: &[f64]) -> f64 {
    TIE_RTOL * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Smallest index whose value is within the tie tolerance of the minimum.
pub fn argmin(values: &[f64]) -> usize {
    argmin_among(values, 0..values.len(), tie_tolerance(values))
}

/// [`argmin`] restricted to `indices`.
pub fn argmin_among(values: &[f64], indices: impl IntoIterator<Item = usize> + Clone, tol: f64) -> usize {
    let min = indices
        .clone()
        .into_iter()
        .map(|i| values[i])
        .fold(f64::INFINITY, f64::min);
    indices
        .into_iter()
        .filter(|&i| values[i] <= min + tol)
        .min()
        .expect("nonempty index set")
}

/// Indices ordered by value; runs of tied values are ordered by index.
pub fn order(values: &[f64]) -> Vec<usize> {
    let tol = tie_tolerance(values);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut start = 0;
    while start < idx.len() {
        let base = values[idx[start]];
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] <= base + tol {
            end += 1;
        }
        idx[start..end].sort_unstable();
        start = end;
    }
    idx
}

/// `ceil(tau * p)` clamped to `[1, p]`.
pub fn candidate_count(tau: f64, p: usize) -> usize {
    ((tau * p as f64).ceil() as usize).clamp(1, p)
}

/// The `ceil(tau p)` best indices under [`order`].
pub fn best_candidates(theta: &[f64], tau: f64) -> Vec<usize> {
    let mut o = order(theta);
    o.truncate(candidate_count(tau, theta.len()));
    o
}

/// Among the `ceil(tau p)` smallest `theta` entries, the index minimising
/// `t_hat`; ties go to the smaller index at both stages.
pub fn select_candidate(theta: &[f64], t_hat: &[f64], tau: f64) -> usize {
    assert_eq!(theta.len(), t_hat.len(), "criterion vectors differ in length");
    let cands = best_candidates(theta, tau);
    argmin_among(t_hat, cands, tie_tolerance(t_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let theta = [3.0, 1.0, 2.0, 5.0, 4.0];
        let t_hat = [9.0, 9.0, 1.0, 0.0, 0.0];
        assert_eq!(best_candidates(&theta, 0.5), vec![1, 2, 0]);
        assert_eq!(select_candidate(&theta, &t_hat, 0.5), 2);
    }

    #[test]
    fn single_candidate_is_theta_argmin() {
        let theta = [3.0, 1.0, 2.0, 5.0, 4.0];
        let t_hat = [0.0, 9.0, 0.0, 0.0, 0.0];
        assert_eq!(select_candidate(&theta, &t_hat, 0.1), 1);
    }

    #[test]
    fn near_ties_go_to_smaller_index() {
        let v = [2.0, 1.0 + 1e-15, 3.0, 1.0];
        assert_eq!(argmin(&v), 1);
        assert_eq!(order(&v), vec![1, 3, 0, 2]);
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(candidate_count(0.5, 5), 3);
        assert_eq!(candidate_count(0.5, 7), 4);
        assert_eq!(candidate_count(1e-9, 7), 1);
        assert_eq!(candidate_count(0.999, 7), 7);
    }
}
