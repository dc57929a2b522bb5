//! Rater agreement, the human baseline MSE and absolute-error histograms.
//!
//! Scores live on the 0..=100 scale with six reference values
//! (0, 20, 40, 60, 80, 100). Kappa works on category indices; off-grid
//! scores are snapped to the nearest reference value.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// The reference values of the rating scale.
pub const RATING_SCALE: [f64; 6] = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0];

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("DEGENERATE: kappa is undefined when both raters put all mass in one category")]
    Degenerate,
    #[error("no rating pairs")]
    Empty,
    #[error("category {index} outside 0..{k}")]
    CategoryOutOfRange { index: usize, k: usize },
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("SHAPE: {0}")]
    Shape(String),
    #[error("SHAPE_MISMATCH: {preds} predictions vs {labels} labels")]
    ShapeMismatch { preds: usize, labels: usize },
    #[error("score {0} is outside 0..=100")]
    ScoreOutOfRange(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Index of the reference value nearest to `score` (ties go up).
pub fn score_category(score: f64) -> usize {
    (score.clamp(0.0, 100.0) / 20.0 + 0.5).floor().min(5.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingPair {
    pub sample_id: String,
    pub rating_a: f64,
    pub rating_b: f64,
}

/// Linearly weighted kappa over category indices in `0..k`.
///
/// `(sum w o - sum w e) / (1 - sum w e)` with agreement weights
/// `w_ij = 1 - |i - j| / (k - 1)`, observed proportions `o` and the outer
/// product `e` of the two raters' marginals.
pub fn weighted_kappa_indices(pairs: &[(usize, usize)], k: usize) -> Result<f64, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::TooFewCategories(k));
    }
    if pairs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let weight = |i: usize, j: usize| 1.0 - i.abs_diff(j) as f64 / (k - 1) as f64;
    let n = pairs.len() as f64;
    let mut row = vec![0.0; k];
    let mut col = vec![0.0; k];
    let mut observed = 0.0;
    for &(a, b) in pairs {
        for index in [a, b] {
            if index >= k {
                return Err(AnalysisError::CategoryOutOfRange { index, k });
            }
        }
        row[a] += 1.0 / n;
        col[b] += 1.0 / n;
        observed += weight(a, b);
    }
    observed /= n;
    let mut expected = 0.0;
    for (i, p) in row.iter().enumerate() {
        for (j, q) in col.iter().enumerate() {
            expected += weight(i, j) * p * q;
        }
    }
    let denom = 1.0 - expected;
    if denom.abs() < 1e-12 {
        return Err(AnalysisError::Degenerate);
    }
    Ok((observed - expected) / denom)
}

/// Kappa on the six-value rating scale.
pub fn linear_weighted_kappa(pairs: &[RatingPair]) -> Result<f64, AnalysisError> {
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (score_category(p.rating_a), score_category(p.rating_b)))
        .collect();
    weighted_kappa_indices(&idx, RATING_SCALE.len())
}

/// One row of a ratings CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub sample_id: String,
    pub rater_id: String,
    /// 1 for the first scoring of a sample, 2 for the duplicate.
    pub pass: u8,
    /// `q1` or `q2`.
    pub q: String,
    pub score: f64,
}

pub fn read_ratings(reader: impl Read) -> Result<Vec<RatingRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: RatingRecord = rec?;
        if !(0.0..=100.0).contains(&rec.score) {
            return Err(AnalysisError::ScoreOutOfRange(rec.score));
        }
        out.push(rec);
    }
    Ok(out)
}

fn scores_of<'a>(
    records: &'a [RatingRecord],
    q: &'a str,
    rater: &'a str,
    pass: u8,
) -> impl Iterator<Item = (&'a str, f64)> + 'a {
    records
        .iter()
        .filter(move |r| r.q.eq_ignore_ascii_case(q) && r.rater_id == rater && r.pass == pass)
        .map(|r| (r.sample_id.as_str(), r.score))
}

/// First and second scoring of the same samples by one rater.
pub fn intra_rater_pairs(records: &[RatingRecord], q: &str, rater: &str) -> Vec<RatingPair> {
    let second: BTreeMap<&str, f64> = scores_of(records, q, rater, 2).collect();
    let first: BTreeMap<&str, f64> = scores_of(records, q, rater, 1).collect();
    first
        .into_iter()
        .filter_map(|(id, a)| {
            second.get(id).map(|&b| RatingPair {
                sample_id: id.to_string(),
                rating_a: a,
                rating_b: b,
            })
        })
        .collect()
}

/// First-pass scores of samples rated by both raters.
pub fn inter_rater_pairs(records: &[RatingRecord], q: &str, rater_a: &str, rater_b: &str) -> Vec<RatingPair> {
    let b: BTreeMap<&str, f64> = scores_of(records, q, rater_b, 1).collect();
    let a: BTreeMap<&str, f64> = scores_of(records, q, rater_a, 1).collect();
    a.into_iter()
        .filter_map(|(id, sa)| {
            b.get(id).map(|&sb| RatingPair {
                sample_id: id.to_string(),
                rating_a: sa,
                rating_b: sb,
            })
        })
        .collect()
}

/// Rater-by-rater agreement: intra-rater kappa on the diagonal, inter-rater elsewhere.
#[derive(Debug)]
pub struct KappaMatrix {
    pub raters: Vec<String>,
    pub values: Vec<Vec<Result<f64, AnalysisError>>>,
}

pub fn kappa_matrix(records: &[RatingRecord], q: &str) -> KappaMatrix {
    let raters: Vec<String> = records
        .iter()
        .filter(|r| r.q.eq_ignore_ascii_case(q))
        .map(|r| r.rater_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let values = raters
        .iter()
        .map(|a| {
            raters
                .iter()
                .map(|b| {
                    let pairs = if a == b {
                        intra_rater_pairs(records, q, a)
                    } else {
                        inter_rater_pairs(records, q, a, b)
                    };
                    linear_weighted_kappa(&pairs)
                })
                .collect()
        })
        .collect();
    KappaMatrix { raters, values }
}

/// Scores given to one sample by one rater in each pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterScore {
    pub rater_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateSet {
    pub sample_id: String,
    pub scores: Vec<RaterScore>,
}

/// Groups the scores of question `q` into duplicate sets of 8 scores
/// (4 raters, 2 passes each). Samples with a different count are skipped.
pub fn duplicate_sets(records: &[RatingRecord], q: &str) -> Vec<DuplicateSet> {
    let mut by_sample: BTreeMap<&str, Vec<RaterScore>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.q.eq_ignore_ascii_case(q)) {
        by_sample.entry(&r.sample_id).or_default().push(RaterScore {
            rater_id: r.rater_id.clone(),
            score: r.score,
        });
    }
    by_sample
        .into_iter()
        .filter(|(_, s)| s.len() == 8)
        .map(|(id, scores)| DuplicateSet {
            sample_id: id.to_string(),
            scores,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMse {
    pub per_rater: BTreeMap<String, f64>,
    pub average: f64,
}

/// MSE of each rater's scores against the mean of the 8 scores of each
/// sample, on the unit scale.
pub fn human_baseline_mse(samples: &[DuplicateSet]) -> Result<BaselineMse, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in samples {
        if s.scores.len() != 8 {
            return Err(AnalysisError::Shape(format!(
                "sample {} has {} scores, expected 8",
                s.sample_id,
                s.scores.len()
            )));
        }
        let reference = s.scores.iter().map(|r| r.score).sum::<f64>() / 8.0 / 100.0;
        for r in &s.scores {
            let e = acc.entry(r.rater_id.clone()).or_default();
            e.0 += (r.score / 100.0 - reference).powi(2);
            e.1 += 1;
        }
    }
    let per_rater: BTreeMap<String, f64> = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let average = per_rater.values().sum::<f64>() / per_rater.len() as f64;
    Ok(BaselineMse { per_rater, average })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistogram {
    /// `n_bins + 1` increasing edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl ErrorHistogram {
    pub fn write_csv(&self, writer: impl Write) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of `|pred - label|` over `[0, 1]`; bins are right-open except the last.
pub fn error_histogram(preds: &[f64], labels: &[f64], n_bins: usize) -> Result<ErrorHistogram, AnalysisError> {
    if preds.len() != labels.len() {
        return Err(AnalysisError::ShapeMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if n_bins == 0 {
        return Err(AnalysisError::Shape("n_bins must be at least 1".into()));
    }
    let mut counts = vec![0; n_bins];
    for (p, l) in preds.iter().zip(labels) {
        let e = (p - l).abs().min(1.0);
        let bin = ((e * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(ErrorHistogram {
        edges: (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect(),
        counts,
        total: preds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cohen's disagreement form on the full confusion matrix:
    /// `1 - sum v_ij o_ij / sum v_ij e_ij` with `v_ij = |i - j|`.
    fn brute_force_kappa(pairs: &[(usize, usize)], k: usize) -> f64 {
        let n = pairs.len() as f64;
        let mut confusion = vec![vec![0.0; k]; k];
        for &(a, b) in pairs {
            confusion[a][b] += 1.0;
        }
        let rows: Vec<f64> = (0..k).map(|i| confusion[i].iter().sum::<f64>() / n).collect();
        let cols: Vec<f64> = (0..k).map(|j| (0..k).map(|i| confusion[i][j]).sum::<f64>() / n).collect();
        let (mut vo, mut ve) = (0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let v = i.abs_diff(j) as f64;
                vo += v * confusion[i][j] / n;
                ve += v * rows[i] * cols[j];
            }
        }
        1.0 - vo / ve
    }

    #[test]
    fn perfect_and_opposite_agreement() {
        let perfect = [(0, 0), (1, 1), (2, 2), (5, 5), (3, 3)];
        assert_eq!(weighted_kappa_indices(&perfect, 6).unwrap(), 1.0);
        let opposite = [(0, 1), (0, 1), (1, 0), (1, 0)];
        assert_eq!(weighted_kappa_indices(&opposite, 2).unwrap(), -1.0);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert!(matches!(weighted_kappa_indices(&[(2, 2), (2, 2)], 6), Err(AnalysisError::Degenerate)));
        assert!(matches!(weighted_kappa_indices(&[], 6), Err(AnalysisError::Empty)));
        assert!(matches!(weighted_kappa_indices(&[(0, 6)], 6), Err(AnalysisError::CategoryOutOfRange { .. })));
        assert!(matches!(weighted_kappa_indices(&[(0, 0)], 1), Err(AnalysisError::TooFewCategories(1))));
    }

    #[test]
    fn off_grid_scores_snap_to_nearest() {
        assert_eq!(score_category(0.0), 0);
        assert_eq!(score_category(9.9), 0);
        assert_eq!(score_category(10.0), 1);
        assert_eq!(score_category(71.0), 4);
        assert_eq!(score_category(100.0), 5);
        let pairs = vec![
            RatingPair {
                sample_id: "a".into(),
                rating_a: 2.0,
                rating_b: 0.0,
            },
            RatingPair {
                sample_id: "b".into(),
                rating_a: 98.0,
                rating_b: 100.0,
            },
        ];
        assert_eq!(linear_weighted_kappa(&pairs).unwrap(), 1.0);
    }

    #[test]
    fn baseline_mse_examples() {
        let set = |scores: [f64; 8]| DuplicateSet {
            sample_id: "s".into(),
            scores: scores
                .iter()
                .enumerate()
                .map(|(i, &score)| RaterScore {
                    rater_id: format!("r{}", i / 2 + 1),
                    score,
                })
                .collect(),
        };
        let same = human_baseline_mse(&[set([40.0; 8])]).unwrap();
        assert!(same.per_rater.values().all(|v| *v == 0.0));
        assert_eq!(same.average, 0.0);

        let split = human_baseline_mse(&[set([0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 100.0, 100.0])]).unwrap();
        assert_eq!(split.per_rater.len(), 4);
        assert!(split.per_rater.values().all(|v| *v == 0.25));
        assert_eq!(split.average, 0.25);

        let mut short = set([0.0; 8]);
        short.scores.pop();
        assert!(matches!(human_baseline_mse(&[short]), Err(AnalysisError::Shape(_))));
    }

    #[test]
    fn histogram_examples() {
        let h = error_histogram(&[0.5, 0.5], &[0.5, 0.5], 10).unwrap();
        assert_eq!(h.counts[0], 2);
        let h = error_histogram(&[0.05, 0.15], &[0.0, 0.0], 10).unwrap();
        assert_eq!(&h.counts[..3], &[1, 1, 0]);
        let h = error_histogram(&[1.0], &[0.0], 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 1]);
        assert!(matches!(error_histogram(&[0.1], &[], 4), Err(AnalysisError::ShapeMismatch { .. })));

        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_low,bin_high,count\n0,0.25,0\n0.25,0.5,0\n0.5,0.75,0\n0.75,1,1\n"
        );
    }

    #[test]
    fn ratings_csv_to_kappa_matrix() {
        let csv = "sample_id,rater_id,pass,q,score\n\
                   s1,alice,1,q1,80\ns1,alice,2,q1,80\ns2,alice,1,q1,20\ns2,alice,2,q1,40\n\
                   s1,bob,1,q1,60\ns2,bob,1,q1,20\ns3,bob,1,q1,0\n\
                   s1,alice,1,q2,10\n";
        let recs = read_ratings(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 8);
        let intra = intra_rater_pairs(&recs, "q1", "alice");
        assert_eq!(intra.len(), 2);
        let inter = inter_rater_pairs(&recs, "Q1", "alice", "bob");
        assert_eq!(inter.len(), 2);
        let m = kappa_matrix(&recs, "q1");
        assert_eq!(m.raters, vec!["alice", "bob"]);
        assert!(m.values[0][0].is_ok());
        assert!(m.values[1][1].is_err());
        assert_eq!(m.values[0][1].as_ref().unwrap(), m.values[1][0].as_ref().unwrap());

        assert!(read_ratings("sample_id,rater_id,pass,q,score\ns,a,1,q1,120\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn closed_form_matches_confusion_matrix(
            k in 2usize..8,
            raw in prop::collection::vec((0usize..1000, 0usize..1000), 1..60),
        ) {
            let pairs: Vec<(usize, usize)> = raw.iter().map(|(a, b)| (a % k, b % k)).collect();
            match weighted_kappa_indices(&pairs, k) {
                Ok(kappa) => {
                    prop_assert!((kappa - brute_force_kappa(&pairs, k)).abs() < 1e-12);
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&kappa));
                }
                Err(AnalysisError::Degenerate) => {
                    prop_assert!(pairs.iter().all(|p| *p == pairs[0] && p.0 == p.1));
                }
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn kappa_is_shift_invariant(raw in prop::collection::vec((0usize..3, 0usize..3), 2..40), shift in 0usize..3) {
            let pairs: Vec<_> = raw.clone();
            let shifted: Vec<_> = raw.iter().map(|(a, b)| (a + shift, b + shift)).collect();
            let (a, b) = (weighted_kappa_indices(&pairs, 6), weighted_kappa_indices(&shifted, 6));
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn histogram_counts_sum_and_ignore_order(
            data in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..100),
            bins in 1usize..20,
        ) {
            let (p, l): (Vec<f64>, Vec<f64>) = data.iter().cloned().unzip();
            let h = error_histogram(&p, &l, bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), data.len());
            let (mut rp, mut rl) = (p.clone(), l.clone());
            rp.reverse();
            rl.reverse();
            prop_assert_eq!(&error_histogram(&rp, &rl, bins).unwrap(), &h);
            prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
