use std::io::Read;

use super::AnalysisError;

/// Per-condition preference totals; lower is better.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSums {
    pub totals: Vec<usize>,
    /// Condition indices, best (lowest total) first; ties keep index order.
    pub order: Vec<usize>,
}

/// Sums ranks per condition (1st = 1 point, 2nd = 2 points, ...). Each row is
/// one participant's ranks for conditions `0..k` and must be a permutation of
/// `1..=k`.
pub fn rank_sum(rankings: &[Vec<usize>]) -> Result<RankSums, AnalysisError> {
    let k = rankings.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(AnalysisError::TooFew {
            what: "ranking rows",
            min: 1,
            got: 0,
        });
    }
    let mut totals = vec![0; k];
    for (row, ranks) in rankings.iter().enumerate() {
        let mut seen = vec![false; k];
        let ok = ranks.len() == k
            && ranks
                .iter()
                .all(|&r| (1..=k).contains(&r) && !std::mem::replace(&mut seen[r - 1], true));
        if !ok {
            return Err(AnalysisError::NotPermutation { row, k });
        }
        for (t, r) in totals.iter_mut().zip(ranks) {
            *t += r;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&j| totals[j]);
    Ok(RankSums { totals, order })
}

/// Rankings loaded from a long-form CSV with header
/// `participant,condition,rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rankings {
    pub participants: Vec<String>,
    pub conditions: Vec<String>,
    pub ranks: Vec<Vec<usize>>,
}

pub fn load_rankings<R: Read>(input: R) -> Result<Rankings, AnalysisError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| AnalysisError::Input {
            line: 1,
            detail: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != ["participant", "condition", "rank"] {
        return Err(AnalysisError::Input {
            line: 1,
            detail: "expected header `participant,condition,rank`".into(),
        });
    }
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| AnalysisError::Input {
            line,
            detail: e.to_string(),
        })?;
        let rank = rec[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| AnalysisError::Input {
                line,
                detail: format!("rank `{}` is not a positive integer", &rec[2]),
            })?;
        entries.push((rec[0].to_owned(), rec[1].to_owned(), rank));
    }

    let mut participants: Vec<String> = Vec::new();
    let mut conditions: Vec<String> = Vec::new();
    for (p, c, _) in &entries {
        if !participants.contains(p) {
            participants.push(p.clone());
        }
        if !conditions.contains(c) {
            conditions.push(c.clone());
        }
    }
    conditions.sort();
    let mut ranks = vec![vec![0usize; conditions.len()]; participants.len()];
    for (p, c, r) in &entries {
        let i = participants.iter().position(|x| x == p).unwrap();
        let j = conditions.iter().position(|x| x == c).unwrap();
        if ranks[i][j] != 0 {
            return Err(AnalysisError::DuplicateCell {
                participant: p.clone(),
                condition: c.clone(),
            });
        }
        ranks[i][j] = *r;
    }
    for (i, row) in ranks.iter().enumerate() {
        if let Some(j) = row.iter().position(|r| *r == 0) {
            return Err(AnalysisError::MissingCell {
                participant: participants[i].clone(),
                condition: conditions[j].clone(),
            });
        }
    }
    Ok(Rankings {
        participants,
        conditions,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rankings() {
        let rows = vec![vec![1, 2, 3, 4]; 12];
        let r = rank_sum(&rows).unwrap();
        assert_eq!(r.totals, vec![12, 24, 36, 48]);
        assert_eq!(r.order, vec![0, 1, 2, 3]);
        assert_eq!(r.totals.iter().sum::<usize>(), 120);
    }

    #[test]
    fn single_participant() {
        let r = rank_sum(&[vec![3, 1, 4, 2]]).unwrap();
        assert_eq!(r.totals, vec![3, 1, 4, 2]);
        assert_eq!(r.order, vec![1, 3, 0, 2]);
    }

    #[test]
    fn rejects_non_permutations() {
        assert_eq!(
            rank_sum(&[vec![1, 2, 3, 4], vec![1, 1, 3, 4]]),
            Err(AnalysisError::NotPermutation { row: 1, k: 4 })
        );
        assert!(rank_sum(&[vec![1, 2, 3, 5]]).is_err());
        assert!(rank_sum(&[vec![1, 2, 3, 4], vec![1, 2, 3]]).is_err());
        assert!(rank_sum(&[vec![0, 1]]).is_err());
        assert!(rank_sum(&[]).is_err());
    }

    #[test]
    fn loads_long_form_csv() {
        let text = "participant,condition,rank\nP1,C2,1\nP1,C1,2\nP2,C1,1\nP2,C2,2\n";
        let r = load_rankings(text.as_bytes()).unwrap();
        assert_eq!(r.conditions, ["C1", "C2"]);
        assert_eq!(r.ranks, vec![vec![2, 1], vec![1, 2]]);
        let missing = "participant,condition,rank\nP1,C2,1\nP1,C1,2\nP2,C1,1\n";
        assert!(matches!(
            load_rankings(missing.as_bytes()),
            Err(AnalysisError::MissingCell { .. })
        ));
        let bad = "participant,condition,rank\nP1,C2,x\n";
        assert!(matches!(
            load_rankings(bad.as_bytes()),
            Err(AnalysisError::Input { line: 2, .. })
        ));
    }
}
