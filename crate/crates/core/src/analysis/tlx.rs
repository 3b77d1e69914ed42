use crate::persistence::ScoreReportRow;
use crate::track::Condition;

use super::AnalysisError;

pub const DEFAULT_TLX_SCALE_MAX: f64 = 20.0;

/// One raw NASA-TLX questionnaire: mental, physical, temporal, performance,
/// effort, frustration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlxResponse {
    subscales: [f64; 6],
    scale_max: f64,
}

impl TlxResponse {
    pub fn new(subscales: [f64; 6], scale_max: f64) -> Result<Self, AnalysisError> {
        if !(scale_max.is_finite() && scale_max > 0.0) {
            return Err(AnalysisError::Domain(format!(
                "scale_max {scale_max} must be positive"
            )));
        }
        if let Some(v) = subscales.iter().find(|v| !(0.0..=scale_max).contains(*v)) {
            return Err(AnalysisError::Domain(format!(
                "TLX subscale {v} outside [0, {scale_max}]"
            )));
        }
        Ok(Self {
            subscales,
            scale_max,
        })
    }

    pub fn subscales(&self) -> [f64; 6] {
        self.subscales
    }
}

/// Unweighted mean of the six subscales, rescaled to [0, 100].
pub fn tlx_overall(resp: &TlxResponse) -> f64 {
    resp.subscales.iter().sum::<f64>() / 6.0 * (100.0 / resp.scale_max)
}

/// Mean overall TLX per condition over the rows that carry all six
/// subscales. Returns `(condition, mean, responses)` in C1..C4 order.
pub fn tlx_by_condition(
    rows: &[ScoreReportRow],
    scale_max: f64,
) -> Result<Vec<(Condition, f64, usize)>, AnalysisError> {
    let mut out = Vec::new();
    for c in Condition::ALL {
        let mut sum = 0.0;
        let mut count = 0;
        for (i, r) in rows.iter().enumerate().filter(|(_, r)| r.condition == c) {
            let Some(sub) = r.tlx.iter().copied().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            let resp = TlxResponse::new(sub.try_into().expect("six subscales"), scale_max)
                .map_err(|e| AnalysisError::Input {
                    line: i + 2,
                    detail: e.to_string(),
                })?;
            sum += tlx_overall(&resp);
            count += 1;
        }
        if count > 0 {
            out.push((c, sum / count as f64, count));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_scores() {
        assert_eq!(tlx_overall(&TlxResponse::new([0.0; 6], 20.0).unwrap()), 0.0);
        assert_eq!(
            tlx_overall(&TlxResponse::new([20.0; 6], 20.0).unwrap()),
            100.0
        );
        assert_eq!(
            tlx_overall(&TlxResponse::new([10.0; 6], 20.0).unwrap()),
            50.0
        );
        assert_eq!(
            tlx_overall(&TlxResponse::new([7.0; 6], 10.0).unwrap()),
            70.0
        );
    }

    #[test]
    fn out_of_range() {
        assert!(TlxResponse::new([21.0, 0.0, 0.0, 0.0, 0.0, 0.0], 20.0).is_err());
        assert!(TlxResponse::new([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 20.0).is_err());
        assert!(TlxResponse::new([0.0; 6], 0.0).is_err());
    }
}
