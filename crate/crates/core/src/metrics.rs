//! Confusion accounting for detections against ground-truth eye boxes, and
//! the summary measures built from it.
//!
//! Ratios with a zero denominator are `None`, never a number.

use crate::detector::{Detection, ScoredCandidate};
use crate::imaging::Rect;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.tn + o.tn, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// TP / (TP + FN)
pub fn sensitivity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

/// TN / (TN + FP)
pub fn specificity(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tn, c.tn + c.fp)
}

/// (TP + TN) / (TP + TN + FP + FN)
pub fn accuracy(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp + c.tn, c.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum MatchCriterion {
    /// Intersection over union at least this value.
    Iou(f64),
    /// Detection centre lies inside the truth box.
    CenterInside,
}

impl Default for MatchCriterion {
    fn default() -> Self {
        MatchCriterion::Iou(0.25)
    }
}

impl MatchCriterion {
    /// Match quality, or `None` when the pair does not qualify.
    fn quality(&self, det: &Rect, truth: &Rect) -> Option<f64> {
        let iou = det.iou(truth);
        match *self {
            MatchCriterion::Iou(t) => (iou >= t).then_some(iou),
            MatchCriterion::CenterInside => {
                let (cx, cy) = det.center();
                let inside = cx >= truth.x as f64 - 0.5
                    && cx <= truth.right() as f64 - 0.5
                    && cy >= truth.y as f64 - 0.5
                    && cy <= truth.bottom() as f64 - 0.5;
                inside.then_some(iou)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub detection: usize,
    pub truth: usize,
    /// Distance between the detection and truth box centres, in pixels.
    pub center_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub counts: ConfusionCounts,
    pub matches: Vec<MatchedPair>,
    pub truths: usize,
}

impl ImageResult {
    /// Every ground-truth eye was matched by a detection.
    pub fn success(&self) -> bool {
        self.matches.len() == self.truths
    }
}

/// Greedy one-to-one matching by descending detection score.
///
/// Each detection takes the best-quality unmatched truth it qualifies for
/// (ties broken by truth box position, so truth order never matters).
/// Matched detections are TP, unmatched ones FP, unmatched truths FN.
/// Rejected candidates that qualify for no truth box are TN; rejected
/// candidates lying on a truth box add nothing, since that truth is already
/// counted once as TP or FN.
pub fn match_detections(
    dets: &[Detection],
    rejected: &[ScoredCandidate],
    truth: &[Rect],
    criterion: MatchCriterion,
) -> ImageResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; truth.len()];
    let mut matches = Vec::new();
    for d in order {
        let best = (0..truth.len())
            .filter(|&t| !taken[t])
            .filter_map(|t| criterion.quality(&dets[d].bbox, &truth[t]).map(|q| (t, q)))
            .max_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| truth[b.0].to_array().cmp(&truth[a.0].to_array()))
            });
        if let Some((t, _)) = best {
            taken[t] = true;
            let (dx, dy) = (
                dets[d].bbox.center().0 - truth[t].center().0,
                dets[d].bbox.center().1 - truth[t].center().1,
            );
            matches.push(MatchedPair {
                detection: d,
                truth: t,
                center_error: dx.hypot(dy),
            });
        }
    }
    matches.sort_by_key(|m| m.detection);
    let tp = matches.len() as u64;
    let tn = rejected
        .iter()
        .filter(|c| truth.iter().all(|t| criterion.quality(&c.bbox, t).is_none()))
        .count() as u64;
    ImageResult {
        counts: ConfusionCounts::new(tp, tn, dets.len() as u64 - tp, truth.len() as u64 - tp),
        matches,
        truths: truth.len(),
    }
}

/// Fraction of images in which every ground-truth eye was matched.
pub fn success_rate(results: &[ImageResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("image results"));
    }
    Ok(results.iter().filter(|r| r.success()).count() as f64 / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub success_rate: f64,
    /// Largest centre error over matched eyes in successful images.
    pub max_center_error: Option<f64>,
}

impl EvalReport {
    pub fn from_results(results: &[ImageResult]) -> Result<Self> {
        let counts: ConfusionCounts = results.iter().map(|r| r.counts).sum();
        let max_center_error = results
            .iter()
            .filter(|r| r.success())
            .flat_map(|r| r.matches.iter().map(|m| m.center_error))
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
        Ok(Self {
            images: results.len(),
            counts,
            sensitivity: sensitivity(&counts),
            specificity: specificity(&counts),
            accuracy: accuracy(&counts),
            success_rate: success_rate(results)?,
            max_center_error,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Aligned two-column table; undefined ratios print as `undefined`.
    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{:.1}%", 100.0 * v));
        let c = &self.counts;
        let rows = [
            ("Images", self.images.to_string()),
            ("TP", c.tp.to_string()),
            ("TN", c.tn.to_string()),
            ("FP", c.fp.to_string()),
            ("FN", c.fn_.to_string()),
            ("Sensitivity", pct(self.sensitivity)),
            ("Specificity", pct(self.specificity)),
            ("Accuracy", pct(self.accuracy)),
            ("Success rate", pct(Some(self.success_rate))),
            (
                "Max centre error",
                self.max_center_error
                    .map_or_else(|| "undefined".to_string(), |e| format!("{e:.2} px")),
            ),
        ];
        let key_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let val_w = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let rule = format!("{}\n", "-".repeat(key_w + val_w + 3));
        let mut out = rule.clone();
        for (k, v) in rows {
            out.push_str(&format!("{k:<key_w$} | {v:>val_w$}\n"));
        }
        out.push_str(&rule);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(x: usize, y: usize, score: f64) -> Detection {
        Detection {
            bbox: Rect::new(x, y, 10, 6),
            score,
            face: Rect::new(0, 0, 100, 100),
        }
    }

    fn iou() -> MatchCriterion {
        MatchCriterion::default()
    }

    #[test]
    fn matching_examples() {
        let truth = [Rect::new(10, 10, 10, 6)];
        let r = match_detections(&[det(10, 10, 0.9)], &[], &truth, iou());
        assert_eq!(r.counts, ConfusionCounts::new(1, 0, 0, 0));
        assert!(r.success());
        let r = match_detections(&[det(50, 50, 0.9)], &[], &truth, iou());
        assert_eq!(r.counts, ConfusionCounts::new(0, 0, 1, 1));
        let r = match_detections(&[det(10, 10, 0.9), det(11, 10, 0.8)], &[], &truth, iou());
        assert_eq!(r.counts, ConfusionCounts::new(1, 0, 1, 0));
        assert_eq!(r.matches[0].detection, 0);
    }

    #[test]
    fn rejected_candidates() {
        let truth = [Rect::new(10, 10, 10, 6)];
        let off = ScoredCandidate {
            bbox: Rect::new(60, 60, 8, 8),
            score: 0.1,
        };
        let on = ScoredCandidate {
            bbox: Rect::new(10, 10, 10, 6),
            score: 0.2,
        };
        let r = match_detections(&[], &[off, on], &truth, iou());
        assert_eq!(r.counts, ConfusionCounts::new(0, 1, 0, 1));
        assert!(!r.success());
    }

    #[test]
    fn center_inside_criterion() {
        let truth = [Rect::new(10, 10, 30, 30)];
        let small = Detection {
            bbox: Rect::new(20, 20, 4, 4),
            score: 0.9,
            face: truth[0],
        };
        assert_eq!(match_detections(&[small], &[], &truth, iou()).counts.tp, 0);
        assert_eq!(
            match_detections(&[small], &[], &truth, MatchCriterion::CenterInside)
                .counts
                .tp,
            1
        );
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(sensitivity(&ConfusionCounts::new(3, 0, 0, 1)), Some(0.75));
        assert_eq!(accuracy(&ConfusionCounts::new(1, 1, 0, 0)), Some(1.0));
        assert_eq!(sensitivity(&ConfusionCounts::new(0, 5, 5, 0)), None);
        assert_eq!(specificity(&ConfusionCounts::new(5, 0, 0, 5)), None);
        assert_eq!(accuracy(&ConfusionCounts::default()), None);
    }

    fn result(success: bool) -> ImageResult {
        let truth = [Rect::new(10, 10, 10, 6)];
        let dets = if success { vec![det(10, 10, 0.9)] } else { vec![] };
        match_detections(&dets, &[], &truth, iou())
    }

    #[test]
    fn success_rates() {
        assert_eq!(success_rate(&vec![result(true); 5]).unwrap(), 1.0);
        let mut mixed = vec![result(true); 49];
        mixed.push(result(false));
        assert!((success_rate(&mixed).unwrap() - 0.98).abs() < 1e-15);
        assert!(success_rate(&[]).is_err());
    }

    #[test]
    fn report_json_and_table() {
        let report = EvalReport::from_results(&[result(true), result(false)]).unwrap();
        assert_eq!(report.counts, ConfusionCounts::new(1, 0, 0, 1));
        assert_eq!(report.specificity, None);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(v["specificity"].is_null());
        assert_eq!(v["counts"]["fn"], 1);
        let table = report.to_table();
        assert!(table.contains("Specificity") && table.contains("undefined"));
        assert!(table.contains("50.0%"));
        let widths: Vec<usize> = table.lines().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }

    fn arb_counts() -> impl Strategy<Value = ConfusionCounts> {
        (0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000).prop_map(|(a, b, c, d)| ConfusionCounts::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn scaling_invariance(c in arb_counts(), k in 1u64..50) {
            let s = ConfusionCounts::new(c.tp * k, c.tn * k, c.fp * k, c.fn_ * k);
            prop_assert_eq!(sensitivity(&c).is_some(), sensitivity(&s).is_some());
            if let (Some(a), Some(b)) = (sensitivity(&c), sensitivity(&s)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            if let (Some(a), Some(b)) = (specificity(&c), specificity(&s)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn accuracy_identity(c in arb_counts()) {
            if let Some(a) = accuracy(&c) {
                prop_assert!((a * c.total() as f64 - (c.tp + c.tn) as f64).abs() < 1e-12 * c.total() as f64);
            }
        }

        #[test]
        fn merge_is_associative_and_commutative(a in arb_counts(), b in arb_counts(), c in arb_counts()) {
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a + b, b + a);
        }

        #[test]
        fn truth_order_does_not_matter(
            boxes in proptest::collection::vec((0usize..60, 0usize..60), 1..6),
            dets in proptest::collection::vec((0usize..60, 0usize..60, 0.0f64..1.0), 0..6),
        ) {
            let truth: Vec<Rect> = boxes.iter().map(|&(x, y)| Rect::new(x, y, 10, 6)).collect();
            let mut reversed = truth.clone();
            reversed.reverse();
            let d: Vec<Detection> = dets.iter().map(|&(x, y, s)| det(x, y, s)).collect();
            let a = match_detections(&d, &[], &truth, iou());
            let b = match_detections(&d, &[], &reversed, iou());
            prop_assert_eq!(a.counts, b.counts);
        }
    }
}
