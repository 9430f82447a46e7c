//! Uniform-bin histograms of margin samples.

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    Count(usize),
    Width(f64),
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Count(DEFAULT_BINS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` increasing bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count-weighted mean of the bin centers.
    pub fn mass_center(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| 0.5 * (self.edges[i] + self.edges[i + 1]) * *c as f64)
            .sum::<f64>()
            / total
    }
}

/// Uniform bins over `[min, max]` of `samples`; bins are left-closed and
/// right-open except the last, which is closed. A degenerate range gives a
/// single unit-width bin centered on the value.
pub fn build_histogram(samples: &[f64], binning: Binning) -> Histogram {
    assert!(!samples.is_empty(), "histogram of no samples");
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Histogram {
            edges: vec![lo - 0.5, hi + 0.5],
            counts: vec![samples.len() as u64],
        };
    }
    let bins = match binning {
        Binning::Count(n) => n.max(1),
        Binning::Width(w) => (((hi - lo) / w).ceil() as usize).max(1),
    };
    let width = match binning {
        Binning::Count(_) => (hi - lo) / bins as f64,
        Binning::Width(w) => w,
    };
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    if let Binning::Count(_) = binning {
        edges[bins] = hi;
    }
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let k = (((x - lo) / width).floor() as usize).min(bins - 1);
        // guard against rounding across an edge
        let k = if x < edges[k] { k - 1 } else if k + 1 < bins && x >= edges[k + 1] { k + 1 } else { k };
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_sample() {
        let h = build_histogram(&[3.0], Binning::default());
        assert_eq!(h.counts, vec![1]);
        assert_eq!(h.edges, vec![2.5, 3.5]);
    }

    #[test]
    fn hand_binning() {
        let h = build_histogram(&[0.0, 1.0, 2.0, 3.0], Binning::Count(2));
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.edges, vec![0.0, 1.5, 3.0]);
        let h = build_histogram(&[0.0, 1.0, 2.0, 3.0], Binning::Count(3));
        // [0,1) [1,2) [2,3]
        assert_eq!(h.counts, vec![1, 1, 2]);
    }

    #[test]
    fn width_binning() {
        let h = build_histogram(&[0.0, 0.5, 1.0, 2.2], Binning::Width(1.0));
        assert_eq!(h.counts, vec![2, 1, 1]);
        assert_eq!(h.edges.len(), 4);
    }

    #[test]
    fn mass_center_follows_shift() {
        let a = build_histogram(&[1.0, 2.0, 3.0], Binning::Count(4));
        let b = build_histogram(&[0.0, 1.0, 2.0], Binning::Count(4));
        assert!(b.mass_center() < a.mass_center());
    }

    proptest! {
        #[test]
        fn counts_sum_to_n(xs in prop::collection::vec(-1e3f64..1e3, 1..300), bins in 1usize..40) {
            let h = build_histogram(&xs, Binning::Count(bins));
            prop_assert_eq!(h.total(), xs.len() as u64);
            for (i, &x) in xs.iter().enumerate() {
                prop_assert!(x >= h.edges[0] && x <= *h.edges.last().unwrap(), "sample {}", i);
            }
        }
    }
}
