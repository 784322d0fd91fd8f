//! Robust single-depth extraction from noisy depth patches.
//!
//! The depth samples inside a detection bounding box mix target returns,
//! background returns, and sensor noise. The target depth is recovered by
//! histogramming the in-range samples, finding local peaks, pruning peaks
//! with below-average support, and returning the mean depth of the nearest
//! surviving peak (the target is assumed to be the nearest coherent object
//! in the box).
//!
//! When every sample saturates outside the measurable range the target is
//! either very close or beyond range; [`out_of_range_depth`] disambiguates
//! by how much of the image the bounding box covers.

use alloc::vec;
use alloc::vec::Vec;

// Required at the minimum supported toolchain, where f64 math is not in
// core; newer toolchains may leave it idle.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from depth extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DepthError {
    /// The patch contains no samples.
    #[error("empty depth patch")]
    EmptyPatch,
    /// The measurable range is not `0 < range_min < range_max`.
    #[error("invalid depth range")]
    InvalidRange,
    /// Histograms need at least 3 bins for peak analysis.
    #[error("bin count must be at least 3")]
    InvalidBinCount,
    /// The histogram has no local peak (e.g. perfectly flat counts).
    #[error("histogram has no peaks")]
    NoPeaks,
}

/// Depth samples collected inside one bounding box, plus the sensor's
/// measurable range. Non-finite samples are dropped at construction;
/// out-of-range samples are kept (they signal saturation) but excluded
/// from histogramming.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPatch {
    samples: Vec<f64>,
    range_min: f64,
    range_max: f64,
}

impl DepthPatch {
    /// Creates a patch, dropping non-finite samples. Errors unless
    /// `0 < range_min < range_max`.
    pub fn new(samples: Vec<f64>, range_min: f64, range_max: f64) -> Result<Self, DepthError> {
        if !(range_min > 0.0 && range_min < range_max && range_max.is_finite()) {
            return Err(DepthError::InvalidRange);
        }
        let mut samples = samples;
        samples.retain(|s| s.is_finite());
        Ok(Self {
            samples,
            range_min,
            range_max,
        })
    }

    /// All retained (finite) samples.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Lower bound of the measurable range, meters.
    pub fn range_min(&self) -> f64 {
        self.range_min
    }

    /// Upper bound of the measurable range, meters.
    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    /// Whether the patch holds no samples at all.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples inside `[range_min, range_max]`.
    pub fn in_range_count(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| **s >= self.range_min && **s <= self.range_max)
            .count()
    }
}

/// A uniform histogram of the in-range samples of a [`DepthPatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthHistogram {
    /// Number of bins.
    pub bin_count: usize,
    /// Bin edges, `bin_count + 1` ascending values spanning the range.
    pub bin_edges: Vec<f64>,
    /// Per-bin sample counts; sums to the number of in-range samples.
    pub counts: Vec<usize>,
    /// Per-bin mean of member samples; empty bins hold the bin center.
    pub bin_means: Vec<f64>,
}

impl DepthHistogram {
    /// Width of one bin, meters.
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }
}

/// Histograms the in-range samples of `patch` into `bin_count` uniform bins
/// over `[range_min, range_max]`. A sample equal to `range_max` lands in the
/// last bin. Errors on an empty patch or `bin_count < 3`.
pub fn build_histogram(patch: &DepthPatch, bin_count: usize) -> Result<DepthHistogram, DepthError> {
    if bin_count < 3 {
        return Err(DepthError::InvalidBinCount);
    }
    if patch.is_empty() {
        return Err(DepthError::EmptyPatch);
    }
    let lo = patch.range_min;
    let hi = patch.range_max;
    let width = (hi - lo) / bin_count as f64;

    let mut counts = vec![0usize; bin_count];
    let mut sums = vec![0.0f64; bin_count];
    for &s in &patch.samples {
        if s < lo || s > hi {
            continue;
        }
        let idx = (((s - lo) / width) as usize).min(bin_count - 1);
        counts[idx] += 1;
        sums[idx] += s;
    }

    let mut bin_edges = Vec::with_capacity(bin_count + 1);
    for i in 0..=bin_count {
        bin_edges.push(lo + width * i as f64);
    }
    let bin_means = counts
        .iter()
        .zip(&sums)
        .enumerate()
        .map(|(i, (&c, &sum))| {
            if c > 0 {
                sum / c as f64
            } else {
                lo + width * (i as f64 + 0.5)
            }
        })
        .collect();

    Ok(DepthHistogram {
        bin_count,
        bin_edges,
        counts,
        bin_means,
    })
}

/// Indices whose count strictly exceeds every existing neighbor, ascending.
/// Boundary bins compare against their single neighbor; plateaus are not
/// peaks.
pub fn peak_indices(counts: &[usize]) -> Vec<usize> {
    let n = counts.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let above_left = i == 0 || counts[i] > counts[i - 1];
        let above_right = i + 1 == n || counts[i] > counts[i + 1];
        if above_left && above_right {
            peaks.push(i);
        }
    }
    peaks
}

/// Local peaks of the histogram counts; see [`peak_indices`].
pub fn find_peaks(h: &DepthHistogram) -> Vec<usize> {
    peak_indices(&h.counts)
}

/// Selects the target depth from a histogram: among local peaks, prune those
/// with a count below the mean peak count, then return the bin mean of the
/// nearest (smallest-depth) survivor. Errors if no peak exists.
pub fn select_depth(h: &DepthHistogram) -> Result<f64, DepthError> {
    let peaks = find_peaks(h);
    if peaks.is_empty() {
        return Err(DepthError::NoPeaks);
    }
    // Keep peaks with count >= mean peak count, compared exactly in
    // integers: c * n >= sum.
    let sum: usize = peaks.iter().map(|&i| h.counts[i]).sum();
    let n = peaks.len();
    let survivor = peaks
        .iter()
        .copied()
        .find(|&i| h.counts[i] * n >= sum)
        .expect("at least the largest peak survives pruning");
    Ok(h.bin_means[survivor])
}

/// Depth to assume when every sample saturates outside the measurable range:
/// a bounding box covering at least `threshold` of the image area means the
/// target is very close (`range_min`), otherwise it is beyond range
/// (`range_max`).
pub fn out_of_range_depth(
    bbox_area_fraction: f64,
    threshold: f64,
    range_min: f64,
    range_max: f64,
) -> f64 {
    if bbox_area_fraction >= threshold {
        range_min
    } else {
        range_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn patch(samples: Vec<f64>) -> DepthPatch {
        DepthPatch::new(samples, 2.0, 15.0).unwrap()
    }

    #[test]
    fn histogram_single_value() {
        let h = build_histogram(&patch(vec![2.5; 10]), 40).unwrap();
        let nonzero: Vec<usize> = (0..40).filter(|&i| h.counts[i] > 0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(h.counts[nonzero[0]], 10);
        assert_abs_diff_eq!(h.bin_means[nonzero[0]], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn histogram_two_clusters() {
        let mut samples = vec![5.0; 30];
        samples.extend(vec![12.0; 10]);
        let h = build_histogram(&patch(samples), 40).unwrap();
        let nonzero: Vec<(usize, usize)> = h
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero[0].1, 30);
        assert_eq!(nonzero[1].1, 10);
    }

    #[test]
    fn histogram_uniform_counts_near_expected() {
        // 4000 uniform samples over 40 bins: each count should fall within
        // 3 sigma of 100 (binomial n=4000, p=1/40, sigma ~ 9.87).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(2.0..15.0)).collect();
        let h = build_histogram(&patch(samples), 40).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 4000);
        for &c in &h.counts {
            assert!((c as f64 - 100.0).abs() <= 29.7, "count {c} outside 3 sigma");
        }
    }

    #[test]
    fn histogram_discards_out_of_range() {
        let h = build_histogram(&patch(vec![1.0, 2.5, 2.5, 20.0]), 40).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 2);
    }

    #[test]
    fn histogram_rejects_empty_and_bad_bins() {
        assert_eq!(build_histogram(&patch(vec![]), 40), Err(DepthError::EmptyPatch));
        assert_eq!(
            build_histogram(&patch(vec![3.0]), 2),
            Err(DepthError::InvalidBinCount)
        );
    }

    #[test]
    fn histogram_max_value_lands_in_last_bin() {
        let h = build_histogram(&patch(vec![15.0]), 40).unwrap();
        assert_eq!(h.counts[39], 1);
    }

    #[test]
    fn patch_drops_non_finite() {
        let p = patch(vec![3.0, f64::NAN, f64::INFINITY, 4.0]);
        assert_eq!(p.samples(), &[3.0, 4.0]);
        assert_eq!(p.in_range_count(), 2);
    }

    #[test]
    fn patch_rejects_bad_range() {
        assert_eq!(
            DepthPatch::new(vec![3.0], 15.0, 2.0).map(|_| ()),
            Err(DepthError::InvalidRange)
        );
        assert_eq!(
            DepthPatch::new(vec![3.0], 0.0, 2.0).map(|_| ()),
            Err(DepthError::InvalidRange)
        );
    }

    #[test]
    fn peaks_interior() {
        assert_eq!(peak_indices(&[0, 5, 0, 3, 0]), vec![1, 3]);
    }

    #[test]
    fn peaks_boundary() {
        assert_eq!(peak_indices(&[5, 0, 0]), vec![0]);
        assert_eq!(peak_indices(&[0, 0, 5]), vec![2]);
    }

    #[test]
    fn peaks_monotone_increasing() {
        assert_eq!(peak_indices(&[1, 2, 3, 4, 9]), vec![4]);
    }

    #[test]
    fn peaks_plateau_is_not_a_peak() {
        assert_eq!(peak_indices(&[0, 4, 4, 0]), Vec::<usize>::new());
        assert_eq!(peak_indices(&[2, 2, 2]), Vec::<usize>::new());
    }

    fn hist_from_counts(counts: Vec<usize>, means: Vec<f64>) -> DepthHistogram {
        let n = counts.len();
        let edges: Vec<f64> = (0..=n).map(|i| 2.0 + i as f64 * 13.0 / n as f64).collect();
        DepthHistogram {
            bin_count: n,
            bin_edges: edges,
            counts,
            bin_means: means,
        }
    }

    #[test]
    fn select_prunes_minor_peak() {
        // Peaks of 30 and 10: mean peak count 20 prunes the far peak.
        let mut counts = vec![0usize; 40];
        let mut means: Vec<f64> = (0..40).map(|i| 2.0 + 0.325 * (i as f64 + 0.5)).collect();
        counts[9] = 30;
        means[9] = 5.02;
        counts[30] = 10;
        means[30] = 12.1;
        let h = hist_from_counts(counts, means);
        assert_abs_diff_eq!(select_depth(&h).unwrap(), 5.02, epsilon = 1e-12);
    }

    #[test]
    fn select_single_peak() {
        let mut counts = vec![0usize; 40];
        let mut means: Vec<f64> = (0..40).map(|i| 2.0 + 0.325 * (i as f64 + 0.5)).collect();
        counts[16] = 4;
        means[16] = 7.3;
        let h = hist_from_counts(counts, means);
        assert_abs_diff_eq!(select_depth(&h).unwrap(), 7.3, epsilon = 1e-12);
    }

    #[test]
    fn select_many_peaks_reduced_to_one() {
        // One dominant cluster among seven minor ones spread over 6-15 m;
        // pruning keeps only the dominant peak.
        let mut counts = vec![0usize; 40];
        let dominant = 13; // ~6.4 m
        counts[dominant] = 50;
        for k in 0..7 {
            counts[16 + 3 * k] = 3;
        }
        let means: Vec<f64> = (0..40).map(|i| 2.0 + 0.325 * (i as f64 + 0.5)).collect();
        let h = hist_from_counts(counts.clone(), means.clone());
        assert_eq!(find_peaks(&h).len(), 8);
        assert_abs_diff_eq!(select_depth(&h).unwrap(), means[dominant], epsilon = 1e-12);
    }

    #[test]
    fn select_errors_on_flat_histogram() {
        let h = hist_from_counts(vec![2, 2, 2, 2], vec![0.0; 4]);
        assert_eq!(select_depth(&h), Err(DepthError::NoPeaks));
    }

    #[test]
    fn select_output_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..300);
            let samples: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..16.0)).collect();
            let p = patch(samples);
            if p.in_range_count() == 0 {
                continue;
            }
            let h = build_histogram(&p, 40).unwrap();
            if let Ok(d) = select_depth(&h) {
                assert!((2.0..=15.0).contains(&d), "selected {d} outside range");
            }
        }
    }

    #[test]
    fn select_recovers_true_depth_among_noise() {
        // Half the samples cluster within one bin width of the true depth,
        // the rest are uniform clutter; the selected depth should fall
        // within one bin width of truth in at least 95% of trials.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bin_width = 13.0 / 40.0;
        let trials = 300;
        let mut hits = 0;
        for _ in 0..trials {
            let d_true = rng.random_range(2.5..14.5);
            let mut samples = Vec::new();
            for _ in 0..60 {
                samples.push(d_true + rng.random_range(-0.5 * bin_width..0.5 * bin_width));
            }
            for _ in 0..60 {
                samples.push(rng.random_range(2.0..15.0));
            }
            let h = build_histogram(&patch(samples), 40).unwrap();
            let d = select_depth(&h).unwrap();
            if (d - d_true).abs() <= bin_width {
                hits += 1;
            }
        }
        assert!(
            hits as f64 >= 0.95 * trials as f64,
            "only {hits}/{trials} trials recovered the true depth"
        );
    }

    #[test]
    fn out_of_range_rules() {
        assert_eq!(out_of_range_depth(0.9, 0.25, 2.0, 15.0), 2.0);
        assert_eq!(out_of_range_depth(0.001, 0.25, 2.0, 15.0), 15.0);
        assert_eq!(out_of_range_depth(0.25, 0.25, 2.0, 15.0), 2.0);
    }
}
