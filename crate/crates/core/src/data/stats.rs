use crate::scalar::Real;

/// Median with the even-length convention of averaging the two central values.
/// Returns `None` for an empty slice. NaNs must be filtered out by the caller.
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    })
}

/// Most frequent code; ties go to the smallest code.
pub fn mode(codes: &[u32]) -> Option<u32> {
    let max = *codes.iter().max()?;
    let mut counts = vec![0usize; max as usize + 1];
    for &c in codes {
        counts[c as usize] += 1;
    }
    let mut best = 0;
    for (k, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = k;
        }
    }
    Some(best as u32)
}
