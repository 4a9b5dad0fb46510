//! Sampling-probability and training-count summaries of a buffer.

use serde::{Deserialize, Serialize};

use super::buffer::PrioritizedBuffer;
use crate::scalar::Scalar;

/// Lower edge exponents of the decade histogram: `[1e-2, 1e-1)`, ..., `[1e5, 1e6)`.
/// Values outside the range are clamped into the first or last bin.
pub const HISTOGRAM_DECADES: std::ops::Range<i32> = -2..6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    pub phase_tag: Option<u8>,
    pub count: usize,
    /// Median of `p_i / sum(p)` divided by the uniform probability `1 / occupied`.
    pub median_relative_probability: f64,
    pub mean_visit_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorityDiagnostics {
    pub occupied: usize,
    pub per_phase: Vec<PhaseDiagnostics>,
    pub histogram: Vec<HistogramBin>,
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl<S: Scalar> PrioritizedBuffer<S> {
    pub fn diagnostics(&self) -> PriorityDiagnostics {
        let occupied = self.len();
        let total = self.tree().total().as_f64();
        let mut histogram: Vec<HistogramBin> = HISTOGRAM_DECADES
            .map(|k| HistogramBin { lower: 10f64.powi(k), upper: 10f64.powi(k + 1), count: 0 })
            .collect();
        if occupied == 0 || total <= 0.0 {
            return PriorityDiagnostics { occupied, per_phase: Vec::new(), histogram };
        }

        // phase tags are small; index None as slot 0 and Some(t) as t + 1
        let mut rel: Vec<Vec<f64>> = Vec::new();
        let mut visits: Vec<u64> = Vec::new();
        for (_, t, r) in self.occupied() {
            let key = t.phase_tag.map_or(0, |p| p as usize + 1);
            if rel.len() <= key {
                rel.resize_with(key + 1, Vec::new);
                visits.resize(key + 1, 0);
            }
            let p = r.priority.as_f64();
            rel[key].push(p * occupied as f64 / total);
            visits[key] += r.visit_count;

            let decade = if p > 0.0 { p.log10().floor() as i32 } else { HISTOGRAM_DECADES.start };
            let bin = decade.clamp(HISTOGRAM_DECADES.start, HISTOGRAM_DECADES.end - 1) - HISTOGRAM_DECADES.start;
            histogram[bin as usize].count += 1;
        }

        let per_phase = rel
            .into_iter()
            .zip(visits)
            .enumerate()
            .filter(|(_, (r, _))| !r.is_empty())
            .map(|(key, (mut r, v))| PhaseDiagnostics {
                phase_tag: key.checked_sub(1).map(|t| t as u8),
                count: r.len(),
                mean_visit_count: v as f64 / r.len() as f64,
                median_relative_probability: median(&mut r),
            })
            .collect();
        PriorityDiagnostics { occupied, per_phase, histogram }
    }
}
