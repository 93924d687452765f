//! Validation reports grouped by sample SNR.

use serde::{Deserialize, Serialize};

use super::{confusion, prf, ConfusionCounts, MetricReport, MetricsError};
use crate::par;
use crate::synth::{snr_bin, SnrBin};
use crate::volume::BinaryMask3D;

/// One evaluated sample. Noise-free samples carry `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct BinnedSample {
    pub ground_truth: BinaryMask3D,
    pub prediction: BinaryMask3D,
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: SnrBin,
    pub label: String,
    pub samples: usize,
    pub counts: ConfusionCounts,
    /// Metrics from counts pooled over the bin's samples.
    pub pooled: MetricReport,
    /// Mean of per-sample F1, or `None` for an empty bin.
    pub mean_f1: Option<f64>,
}

impl BinReport {
    pub fn occupied(&self) -> bool {
        self.samples > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBinnedReport {
    /// The four reporting bins in order, followed by out-of-range bins that
    /// received samples.
    pub bins: Vec<BinReport>,
    pub counts: ConfusionCounts,
    pub overall: MetricReport,
    /// Per-sample F1 averaged over the whole set.
    pub mean_f1: f64,
}

impl SnrBinnedReport {
    pub fn bin(&self, bin: SnrBin) -> Option<&BinReport> {
        self.bins.iter().find(|b| b.bin == bin)
    }

    pub const CSV_HEADER: &'static str = "bin,samples,tp,fp,fn,tn,precision,recall,f1,mean_f1";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let mut row = |label: &str, samples: usize, c: &ConfusionCounts, r: &MetricReport, mean: Option<f64>| {
            out.push_str(&format!(
                "{label},{samples},{},{},{},{},{},{},{},{}\n",
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                r.precision,
                r.recall,
                r.f1,
                mean.map_or(String::new(), |m| m.to_string())
            ));
        };
        for b in &self.bins {
            row(&b.label, b.samples, &b.counts, &b.pooled, b.mean_f1);
        }
        let n = self.bins.iter().map(|b| b.samples).sum();
        row("overall", n, &self.counts, &self.overall, Some(self.mean_f1));
        out
    }
}

/// Pools confusion counts per SNR bin and overall.
pub fn snr_binned(samples: &[BinnedSample]) -> Result<SnrBinnedReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let per_sample = par::try_map_range(samples.len(), |i| {
        let s = &samples[i];
        let bin = snr_bin(s.snr).map_err(|_| MetricsError::InvalidSnr(s.snr))?;
        let counts = confusion(&s.ground_truth, &s.prediction)?;
        Ok::<_, MetricsError>((bin, counts, prf(&counts).f1))
    })?;

    let mut order: Vec<SnrBin> = (0..4).map(SnrBin::Bin).collect();
    for extra in [SnrBin::Below, SnrBin::Above] {
        if per_sample.iter().any(|(b, _, _)| *b == extra) {
            order.push(extra);
        }
    }
    let bins = order
        .into_iter()
        .map(|bin| {
            let members: Vec<_> = per_sample.iter().filter(|(b, _, _)| *b == bin).collect();
            let counts: ConfusionCounts = members.iter().map(|(_, c, _)| *c).sum();
            let mean_f1 =
                (!members.is_empty()).then(|| members.iter().map(|(_, _, f)| f).sum::<f64>() / members.len() as f64);
            BinReport { bin, label: bin.label().to_string(), samples: members.len(), counts, pooled: prf(&counts), mean_f1 }
        })
        .collect();

    let counts: ConfusionCounts = per_sample.iter().map(|(_, c, _)| *c).sum();
    let mean_f1 = per_sample.iter().map(|(_, _, f)| f).sum::<f64>() / per_sample.len() as f64;
    Ok(SnrBinnedReport { bins, counts, overall: prf(&counts), mean_f1 })
}
