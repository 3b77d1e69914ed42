//! Plain-text and CSV renderings of analysis results.

use std::fmt::Write;

use super::{AnovaResult, RankSums, StudyTable, TukeyResult};

pub fn anova_text(table: &StudyTable, measure: &str, anova: &AnovaResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "repeated-measures ANOVA on {measure}");
    let _ = writeln!(
        s,
        "participants = {}, conditions = {}",
        table.n(),
        table.k()
    );
    let _ = writeln!(s, "df = ({}, {})", anova.df_between, anova.df_error);
    let _ = writeln!(s, "F = {:.4}", anova.f);
    let _ = writeln!(s, "p = {:.4}", anova.p);
    let _ = writeln!(s, "MS_error = {:.6}", anova.ms_error);
    let _ = writeln!(s, "grand mean = {:.6}", anova.grand_mean);
    for (label, m) in table.conditions().iter().zip(&anova.condition_means) {
        let _ = writeln!(s, "mean[{label}] = {m:.6}");
    }
    s
}

/// Pairwise table: `a,b,mean_diff,q,q_crit,significant_05`.
pub fn tukey_csv(table: &StudyTable, tukey: &TukeyResult) -> String {
    let mut s = String::from("a,b,mean_diff,q,q_crit,significant_05\n");
    let labels = table.conditions();
    for p in &tukey.pairs {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.4},{:.4},{}",
            labels[p.i],
            labels[p.j],
            p.mean_diff,
            p.q_statistic,
            tukey.q_critical,
            p.significant_at_05
        );
    }
    s
}

/// `condition,rank_sum,place`, best first.
pub fn ranks_csv(conditions: &[String], sums: &RankSums) -> String {
    let mut s = String::from("condition,rank_sum,place\n");
    for (place, &j) in sums.order.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", conditions[j], sums.totals[j], place + 1);
    }
    s
}
