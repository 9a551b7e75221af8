//! Per-dimension quantile binning: the one-token-per-dimension baseline.
//!
//! Each dimension is cut into `num_bins` equal-mass bins over the training
//! values that fall inside the `[clip.0, clip.1]` empirical quantile range.
//! Bins are half-open `[edge_k, edge_{k+1})`; the first bin extends to
//! negative infinity and the last to positive infinity, so out-of-range
//! values saturate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantile::{median_sorted, quantile_sorted, sorted};

pub const BINNING_FORMAT: &str = "actok-binning";
pub const BINNING_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_NUM_BINS: usize = 256;
pub const DEFAULT_CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Error, PartialEq)]
pub enum BinningError {
    #[error("cannot fit bins on an empty sample")]
    Empty,
    #[error("num_bins must be >= 2, got {0}")]
    TooFewBins(usize),
    #[error("clip quantiles must satisfy 0 <= low < high <= 1, got ({0}, {1})")]
    BadClip(f64, f64),
    #[error("sample {index} has {found} dimensions, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("action dimension {found} does not match scheme dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("token id {token} out of range for {num_bins} bins")]
    TokenOutOfRange { token: u32, num_bins: usize },
    #[error("invalid model file: {0}")]
    Format(String),
}

/// Fitted per-dimension bin edges and reconstruction centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    format: String,
    version: u32,
    num_bins: usize,
    clip: (f64, f64),
    /// `edges[d]` has `num_bins - 1` strictly ascending entries.
    edges: Vec<Vec<f64>>,
    /// `centers[d]` has `num_bins` entries; `centers[d][k]` lies in bin `k`.
    centers: Vec<Vec<f64>>,
}

impl BinningScheme {
    /// Fits with 256 bins and (0.01, 0.99) clip quantiles.
    pub fn fit(actions: &[Vec<f64>]) -> Result<Self, BinningError> {
        Self::fit_with(actions, DEFAULT_NUM_BINS, DEFAULT_CLIP)
    }

    pub fn fit_with(
        actions: &[Vec<f64>],
        num_bins: usize,
        clip: (f64, f64),
    ) -> Result<Self, BinningError> {
        if num_bins < 2 {
            return Err(BinningError::TooFewBins(num_bins));
        }
        if !(0.0..=1.0).contains(&clip.0) || !(0.0..=1.0).contains(&clip.1) || clip.0 >= clip.1 {
            return Err(BinningError::BadClip(clip.0, clip.1));
        }
        let first = actions.first().ok_or(BinningError::Empty)?;
        let dims = first.len();
        if dims == 0 {
            return Err(BinningError::Empty);
        }
        for (index, a) in actions.iter().enumerate() {
            if a.len() != dims {
                return Err(BinningError::Ragged {
                    index,
                    expected: dims,
                    found: a.len(),
                });
            }
        }

        let mut edges = Vec::with_capacity(dims);
        let mut centers = Vec::with_capacity(dims);
        for d in 0..dims {
            let column: Vec<f64> = actions.iter().map(|a| a[d]).collect();
            let (e, c) = fit_dimension(&column, num_bins, clip);
            edges.push(e);
            centers.push(c);
        }
        Ok(Self {
            format: BINNING_FORMAT.into(),
            version: BINNING_FORMAT_VERSION,
            num_bins,
            clip,
            edges,
            centers,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn dims(&self) -> usize {
        self.edges.len()
    }

    pub fn clip(&self) -> (f64, f64) {
        self.clip
    }

    pub fn edges(&self, dim: usize) -> &[f64] {
        &self.edges[dim]
    }

    pub fn centers(&self, dim: usize) -> &[f64] {
        &self.centers[dim]
    }

    /// Bin index of a single value in dimension `dim`.
    pub fn bin_of(&self, dim: usize, value: f64) -> u32 {
        // Number of edges <= value; ties go to the upper bin.
        self.edges[dim].partition_point(|&e| e <= value) as u32
    }

    pub fn encode(&self, action: &[f64]) -> Result<Vec<u32>, BinningError> {
        self.check_dims(action.len())?;
        Ok(action
            .iter()
            .enumerate()
            .map(|(d, &v)| self.bin_of(d, v))
            .collect())
    }

    pub fn decode(&self, tokens: &[u32]) -> Result<Vec<f64>, BinningError> {
        self.check_dims(tokens.len())?;
        tokens
            .iter()
            .enumerate()
            .map(|(d, &t)| {
                self.centers[d]
                    .get(t as usize)
                    .copied()
                    .ok_or(BinningError::TokenOutOfRange {
                        token: t,
                        num_bins: self.num_bins,
                    })
            })
            .collect()
    }

    /// Width of the bin holding `value`, with the outer bins bounded by the
    /// nearest center or edge.
    pub fn bin_width(&self, dim: usize, value: f64) -> f64 {
        let k = self.bin_of(dim, value) as usize;
        let e = &self.edges[dim];
        let c = &self.centers[dim];
        let lo = if k == 0 { c[0].min(value) } else { e[k - 1] };
        let hi = if k == e.len() { c[k].max(value) } else { e[k] };
        hi - lo
    }

    fn check_dims(&self, found: usize) -> Result<(), BinningError> {
        if found != self.dims() {
            return Err(BinningError::DimensionMismatch {
                expected: self.dims(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheme serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BinningError> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| BinningError::Format(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), BinningError> {
        let bad = |m: String| Err(BinningError::Format(m));
        if self.format != BINNING_FORMAT || self.version != BINNING_FORMAT_VERSION {
            return bad(format!(
                "unsupported format {} v{}",
                self.format, self.version
            ));
        }
        if self.edges.len() != self.centers.len() {
            return bad("edge and center dimension counts differ".into());
        }
        for (d, (e, c)) in self.edges.iter().zip(&self.centers).enumerate() {
            if e.len() + 1 != self.num_bins || c.len() != self.num_bins {
                return bad(format!("dimension {d}: wrong edge/center count"));
            }
            if !e.windows(2).all(|w| w[0] < w[1]) {
                return bad(format!("dimension {d}: edges not strictly ascending"));
            }
            if !c.iter().all(|v| v.is_finite()) {
                return bad(format!("dimension {d}: non-finite center"));
            }
        }
        Ok(())
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

fn fit_dimension(column: &[f64], num_bins: usize, clip: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let all = sorted(column);
    let lo = quantile_sorted(&all, clip.0);
    let hi = quantile_sorted(&all, clip.1);
    let inside: Vec<f64> = all
        .iter()
        .copied()
        .filter(|v| (lo..=hi).contains(v))
        .collect();
    // `lo` and `hi` are interpolated, so `inside` may be empty for tiny samples.
    let base = if inside.is_empty() {
        vec![lo, hi]
    } else {
        inside
    };

    let mut edges: Vec<f64> = (1..num_bins)
        .map(|k| quantile_sorted(&base, k as f64 / num_bins as f64))
        .collect();
    // Ties (constant or discrete dimensions) are split by the smallest
    // representable step so the bins stay strictly ordered.
    for k in 1..edges.len() {
        if edges[k] <= edges[k - 1] {
            edges[k] = next_up(edges[k - 1]);
        }
    }

    // Centers are medians of the clipped training values in each bin.
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); num_bins];
    for &v in &all {
        let v = v.clamp(lo, hi);
        let k = edges.partition_point(|&e| e <= v);
        members[k].push(v);
    }
    let centers = members
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if !m.is_empty() {
                // `all` is sorted and clamping is monotone, so `m` is sorted.
                return median_sorted(m);
            }
            empty_bin_center(&edges, k, lo, hi)
        })
        .collect();
    (edges, centers)
}

fn empty_bin_center(edges: &[f64], k: usize, lo: f64, hi: f64) -> f64 {
    let last = edges.len();
    if k == 0 {
        let upper = edges[0];
        let mid = lo + (upper - lo) / 2.0;
        if mid < upper {
            mid
        } else {
            next_down(upper)
        }
    } else if k == last {
        let lower = edges[last - 1];
        if hi > lower {
            lower + (hi - lower) / 2.0
        } else {
            lower
        }
    } else {
        let (a, b) = (edges[k - 1], edges[k]);
        let mid = a + (b - a) / 2.0;
        if mid < b {
            mid
        } else {
            a
        }
    }
}
