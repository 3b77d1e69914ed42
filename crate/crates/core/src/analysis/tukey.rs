use super::qtable::q_critical_05;
use super::{AnalysisError, AnovaResult, StudyTable};

#[derive(Debug, Clone, PartialEq)]
pub struct TukeyPair {
    pub i: usize,
    pub j: usize,
    /// `mean_i - mean_j`
    pub mean_diff: f64,
    pub q_statistic: f64,
    pub significant_at_05: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TukeyResult {
    pub q_critical: f64,
    pub pairs: Vec<TukeyPair>,
}

/// Tukey HSD over all condition pairs using the ANOVA error term:
/// `q = |mean_i - mean_j| / sqrt(MS_error / n)`.
pub fn tukey_hsd(
    table: &StudyTable,
    anova: &AnovaResult,
    alpha: f64,
) -> Result<TukeyResult, AnalysisError> {
    if alpha != 0.05 {
        return Err(AnalysisError::UnsupportedAlpha(alpha));
    }
    let k = table.k();
    let q_critical = q_critical_05(k, anova.df_error as f64)?;
    let se = (anova.ms_error / table.n() as f64).sqrt();
    let means = &anova.condition_means;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let mean_diff = means[i] - means[j];
            let q_statistic = if mean_diff == 0.0 {
                0.0
            } else {
                mean_diff.abs() / se
            };
            pairs.push(TukeyPair {
                i,
                j,
                mean_diff,
                q_statistic,
                significant_at_05: q_statistic >= q_critical,
            });
        }
    }
    Ok(TukeyResult { q_critical, pairs })
}
