//! Precision, recall and F1 over binary masks, with an optional distance
//! tolerance that credits matches within `d` voxels.
//!
//! With tolerance `d`:
//!
//! ```text
//! p' = |dilate(G, d) ∧ S| / |S|
//! r' = |G ∧ dilate(S, d)| / |G|
//! ```
//!
//! and F1 is the harmonic mean of `p'` and `r'`. At `d = 0` these reduce to
//! the usual precision and recall.

mod dilate;
mod oracle;
mod report;

pub use dilate::{dilate3, squared_distance_transform, Structuring};
pub use oracle::brute_force_dt;
pub use report::{snr_binned, BinReport, BinnedSample, SnrBinnedReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{BinaryMask3D, Dims};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mask dimensions differ: {0} vs {1}")]
    DimsMismatch(Dims, Dims),
    #[error("no samples to evaluate")]
    Empty,
    #[error("invalid SNR {0}")]
    InvalidSnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// Which quantities hit a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Degeneracy {
    /// Nothing predicted; precision set to 0.
    pub empty_prediction: bool,
    /// Empty ground truth; recall set to 0.
    pub empty_truth: bool,
    /// `p + r = 0`; F1 set to 0.
    pub zero_f1: bool,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.empty_prediction || self.empty_truth || self.zero_f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tolerance: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Predicted voxels credited as correct (numerator of precision).
    pub matched_pred: u64,
    pub total_pred: u64,
    /// Ground-truth voxels recovered (numerator of recall).
    pub matched_gt: u64,
    pub total_gt: u64,
    pub degenerate: Degeneracy,
}

impl MetricReport {
    fn from_ratios(tolerance: u32, matched_pred: u64, total_pred: u64, matched_gt: u64, total_gt: u64) -> Self {
        let mut degenerate = Degeneracy::default();
        let precision = if total_pred == 0 {
            degenerate.empty_prediction = true;
            0.0
        } else {
            matched_pred as f64 / total_pred as f64
        };
        let recall = if total_gt == 0 {
            degenerate.empty_truth = true;
            0.0
        } else {
            matched_gt as f64 / total_gt as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate.zero_f1 = true;
            0.0
        };
        MetricReport { tolerance, precision, recall, f1, matched_pred, total_pred, matched_gt, total_gt, degenerate }
    }

    pub const CSV_HEADER: &'static str = "tolerance,precision,recall,f1,matched_pred,total_pred,matched_gt,total_gt,degenerate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.tolerance,
            self.precision,
            self.recall,
            self.f1,
            self.matched_pred,
            self.total_pred,
            self.matched_gt,
            self.total_gt,
            self.degenerate.any()
        )
    }
}

fn check_dims(g: &BinaryMask3D, s: &BinaryMask3D) -> Result<(), MetricsError> {
    if g.dims() != s.dims() {
        return Err(MetricsError::DimsMismatch(g.dims(), s.dims()));
    }
    Ok(())
}

/// Voxelwise confusion counts of prediction `s` against truth `g`.
pub fn confusion(g: &BinaryMask3D, s: &BinaryMask3D) -> Result<ConfusionCounts, MetricsError> {
    check_dims(g, s)?;
    let mut c = ConfusionCounts::default();
    for (&gt, &pred) in g.bits().iter().zip(s.bits()) {
        match (gt, pred) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn prf(c: &ConfusionCounts) -> MetricReport {
    MetricReport::from_ratios(0, c.tp, c.tp + c.fp, c.tp, c.tp + c.fn_)
}

fn and_count(a: &BinaryMask3D, b: &BinaryMask3D) -> u64 {
    a.bits().iter().zip(b.bits()).filter(|(&x, &y)| x && y).count() as u64
}

/// Distance-tolerant precision, recall and F1.
pub fn dt_prf(g: &BinaryMask3D, s: &BinaryMask3D, d: u32, se: Structuring) -> Result<MetricReport, MetricsError> {
    check_dims(g, s)?;
    let matched_pred = and_count(&dilate3(g, d, se), s);
    let matched_gt = and_count(g, &dilate3(s, d, se));
    Ok(MetricReport::from_ratios(d, matched_pred, s.count() as u64, matched_gt, g.count() as u64))
}

/// One report per tolerance in `0..=d_max`.
pub fn dt_curve(
    g: &BinaryMask3D,
    s: &BinaryMask3D,
    d_max: u32,
    se: Structuring,
) -> Result<Vec<MetricReport>, MetricsError> {
    (0..=d_max).map(|d| dt_prf(g, s, d, se)).collect()
}

/// Two-column `tolerance value` table for one metric of a curve.
pub fn curve_table(curve: &[MetricReport], metric: &str) -> Option<String> {
    let pick: fn(&MetricReport) -> f64 = match metric {
        "precision" => |r| r.precision,
        "recall" => |r| r.recall,
        "f1" => |r| r.f1,
        _ => return None,
    };
    let mut out = format!("tolerance {metric}\n");
    for r in curve {
        out.push_str(&format!("{} {}\n", r.tolerance, pick(r)));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims4() -> Dims {
        Dims::new(4, 4, 4).unwrap()
    }

    fn point(n: usize, at: (usize, usize, usize)) -> BinaryMask3D {
        let mut m = BinaryMask3D::empty(Dims::new(n, n, n).unwrap()).unwrap();
        m.set(at.0, at.1, at.2, true);
        m
    }

    #[test]
    fn confusion_examples() {
        let g = BinaryMask3D::from_fn(dims4(), |x, y, z| x + 4 * y + 16 * z < 10).unwrap();
        let c = confusion(&g, &g).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 10, fp: 0, fn_: 0, tn: 54 });

        let empty = BinaryMask3D::empty(dims4()).unwrap();
        assert_eq!(confusion(&g, &empty).unwrap().fn_, 10);

        let comp = BinaryMask3D::from_vec(dims4(), g.bits().iter().map(|b| !b).collect()).unwrap();
        let c = confusion(&g, &comp).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));

        let other = BinaryMask3D::empty(Dims::new(2, 2, 2).unwrap()).unwrap();
        assert!(matches!(confusion(&g, &other), Err(MetricsError::DimsMismatch(..))));
    }

    #[test]
    fn prf_examples() {
        let r = prf(&ConfusionCounts { tp: 1, ..Default::default() });
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = prf(&ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 0 });
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        let r = prf(&ConfusionCounts { tp: 0, fp: 3, fn_: 2, tn: 1 });
        assert_eq!(r.f1, 0.0);
        assert!(r.degenerate.zero_f1);
    }

    #[test]
    fn neighbouring_voxels() {
        let g = point(5, (2, 2, 2));
        let s = point(5, (3, 2, 2));
        let r0 = dt_prf(&g, &s, 0, Structuring::Ball).unwrap();
        assert_eq!(r0.f1, 0.0);
        let r1 = dt_prf(&g, &s, 1, Structuring::Ball).unwrap();
        assert_eq!((r1.precision, r1.recall, r1.f1), (1.0, 1.0, 1.0));
        assert_eq!(brute_force_dt(&g, &s, 1, Structuring::Ball).unwrap(), r1);
    }

    #[test]
    fn tolerance_zero_is_standard() {
        let g = BinaryMask3D::from_fn(dims4(), |x, y, z| (x + y * z) % 3 == 0).unwrap();
        let s = BinaryMask3D::from_fn(dims4(), |x, y, z| (x * y + z) % 2 == 0).unwrap();
        assert_eq!(dt_prf(&g, &s, 0, Structuring::Ball).unwrap(), prf(&confusion(&g, &s).unwrap()));
    }

    #[test]
    fn identical_masks_are_perfect_at_every_tolerance() {
        let g = BinaryMask3D::from_fn(dims4(), |x, _, z| x == z).unwrap();
        for d in 0..4 {
            let r = dt_prf(&g, &g, d, Structuring::Ball).unwrap();
            assert_eq!((r.precision, r.recall), (1.0, 1.0));
        }
    }

    #[test]
    fn empty_prediction_is_flagged() {
        let g = point(4, (1, 1, 1));
        let s = BinaryMask3D::empty(g.dims()).unwrap();
        let r = dt_prf(&g, &s, 2, Structuring::Ball).unwrap();
        assert!(r.degenerate.empty_prediction);
        assert_eq!(r.precision, 0.0);
        assert_eq!(brute_force_dt(&g, &s, 2, Structuring::Ball).unwrap().degenerate, r.degenerate);
    }

    #[test]
    fn curve_saturates() {
        let g = point(6, (0, 0, 0));
        let s = point(6, (5, 5, 5));
        let curve = dt_curve(&g, &s, 9, Structuring::Ball).unwrap();
        assert_eq!(curve.len(), 10);
        assert_eq!(dt_curve(&g, &s, 0, Structuring::Ball).unwrap().len(), 1);
        let last = curve.last().unwrap();
        assert_eq!((last.precision, last.recall, last.f1), (1.0, 1.0, 1.0));
        for w in curve.windows(2) {
            assert!(w[1].f1 >= w[0].f1);
        }
        let table = curve_table(&curve, "f1").unwrap();
        assert_eq!(table.lines().count(), 11);
        assert!(curve_table(&curve, "iou").is_none());
    }

    #[test]
    fn swap_swaps_precision_and_recall() {
        let g = BinaryMask3D::from_fn(dims4(), |x, y, _| x == y).unwrap();
        let s = BinaryMask3D::from_fn(dims4(), |x, _, z| x == 0 || z == 3).unwrap();
        for d in 0..3 {
            let a = dt_prf(&g, &s, d, Structuring::Ball).unwrap();
            let b = dt_prf(&s, &g, d, Structuring::Ball).unwrap();
            assert_eq!((a.precision, a.recall), (b.recall, b.precision));
        }
    }
}
