use super::AnalysisError;

/// Presentation orders for `k` conditions, `k * replicates` rows.
///
/// For even `k` the base square is balanced for first-order carryover: row
/// `i` is `i, i+1, i-1, i+2, i-2, ...` (mod `k`), so every condition directly
/// follows every other condition exactly once. For odd `k` it is cyclic. The
/// base square is repeated `replicates` times. Entries are 0-based condition
/// indices.
pub fn latin_square(k: usize, replicates: usize) -> Result<Vec<Vec<usize>>, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::TooFew {
            what: "conditions",
            min: 2,
            got: k,
        });
    }
    if replicates < 1 {
        return Err(AnalysisError::TooFew {
            what: "replicates",
            min: 1,
            got: replicates,
        });
    }
    let base: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|pos| {
                    if k % 2 == 1 {
                        return (i + pos) % k;
                    }
                    // 0, +1, -1, +2, -2, ...
                    let step = pos.div_ceil(2);
                    if pos % 2 == 1 {
                        (i + step) % k
                    } else {
                        (i + k - step % k) % k
                    }
                })
                .collect()
        })
        .collect();
    Ok(base.iter().cycle().take(k * replicates).cloned().collect())
}
