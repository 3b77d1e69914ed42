use super::special::f_sf;
use super::{AnalysisError, StudyTable};

/// One-way repeated-measures ANOVA: condition effect tested against the
/// condition × subject residual, with subject variance partitioned out.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_error: usize,
    pub p: f64,
    pub condition_means: Vec<f64>,
    pub grand_mean: f64,
    pub ms_error: f64,
    pub ss_total: f64,
    pub ss_subjects: f64,
    pub ss_conditions: f64,
    pub ss_error: f64,
}

// Sums of squares below this fraction of SS_total are treated as zero.
const REL_ZERO: f64 = 1e-14;

pub fn rm_anova(table: &StudyTable) -> Result<AnovaResult, AnalysisError> {
    let (n, k) = (table.n(), table.k());
    let x = table.values();
    let nf = n as f64;
    let kf = k as f64;

    let grand = x.iter().flatten().sum::<f64>() / (nf * kf);
    let subject_means: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let condition_means: Vec<f64> = (0..k)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ss_total: f64 = x.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_subjects = kf
        * subject_means
            .iter()
            .map(|m| (m - grand).powi(2))
            .sum::<f64>();
    let ss_conditions = nf
        * condition_means
            .iter()
            .map(|m| (m - grand).powi(2))
            .sum::<f64>();
    // Equal to SS_total - SS_subj - SS_cond; summed from residuals to avoid
    // cancellation.
    let mut ss_error = 0.0;
    for (i, row) in x.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            ss_error += (v - subject_means[i] - condition_means[j] + grand).powi(2);
        }
    }

    let df_between = k - 1;
    let df_error = (k - 1) * (n - 1);
    let ms_error = ss_error / df_error as f64;

    let no_effect = ss_total == 0.0 || ss_conditions <= REL_ZERO * ss_total;
    let (f, p) = if no_effect {
        (0.0, 1.0)
    } else {
        if ss_error <= REL_ZERO * ss_total {
            return Err(AnalysisError::Degenerate);
        }
        let f = (ss_conditions / df_between as f64) / ms_error;
        (f, f_sf(f, df_between as f64, df_error as f64)?)
    };

    Ok(AnovaResult {
        f,
        df_between,
        df_error,
        p,
        condition_means,
        grand_mean: grand,
        ms_error,
        ss_total,
        ss_subjects,
        ss_conditions,
        ss_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_columns_give_zero_f() {
        let t = StudyTable::from_matrix(vec![
            vec![1.0, 1.0, 1.0],
            vec![2.0, 2.0, 2.0],
            vec![0.5, 0.5, 0.5],
        ])
        .unwrap();
        let r = rm_anova(&t).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn perfectly_additive_effect_is_degenerate() {
        let t =
            StudyTable::from_matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(rm_anova(&t), Err(AnalysisError::Degenerate));
    }

    #[test]
    fn dfs_for_twelve_by_four() {
        let values = (0..12)
            .map(|i| {
                (0..4)
                    .map(|j| ((i * 7 + j * 3) % 11) as f64 * 0.01 + 0.1)
                    .collect()
            })
            .collect();
        let r = rm_anova(&StudyTable::from_matrix(values).unwrap()).unwrap();
        assert_eq!((r.df_between, r.df_error), (3, 33));
    }

    #[test]
    fn hand_computed_example() {
        // grand 5, SS_total 54, SS_subj 0, SS_cond 146/3, SS_err 16/3
        let t = StudyTable::from_matrix(vec![
            vec![3.0, 5.0, 7.0],
            vec![2.0, 6.0, 7.0],
            vec![1.0, 5.0, 9.0],
        ])
        .unwrap();
        let r = rm_anova(&t).unwrap();
        assert!((r.grand_mean - 5.0).abs() < 1e-12);
        assert!((r.ss_total - 54.0).abs() < 1e-12);
        assert!((r.ss_subjects - 0.0).abs() < 1e-12);
        assert!((r.ss_conditions - 146.0 / 3.0).abs() < 1e-12);
        assert!((r.ss_error - 16.0 / 3.0).abs() < 1e-12);
        assert!((r.ss_total - r.ss_subjects - r.ss_conditions - r.ss_error).abs() < 1e-12);
        assert!((r.f - 18.25).abs() < 1e-12);
        // F(2, 4) upper tail has the closed form (1 + F/2)^-2
        assert!((r.p - (1.0f64 + 18.25 / 2.0).powi(-2)).abs() < 1e-12);
    }
}
