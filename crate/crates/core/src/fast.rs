//! Compressed action-chunk codec.
//!
//! Encode: per-dimension affine map of the fitted `[low, high]` quantile box
//! onto `[-1, 1]` (with clipping), orthonormal DCT along the configured axis,
//! scale by `gamma` and round half away from zero, clamp to `[-K, K]`, zigzag
//! to `[0, 2K]`, flatten row-major, then BPE. Decode runs the same stages
//! backwards; BPE and zigzag are lossless, so the only loss is rounding and
//! clamping of the coefficients.
//!
//! Rounding moves each coefficient by at most `1 / (2 gamma)`. The inverse
//! DCT is orthogonal, so an unsaturated chunk inside the box comes back
//! within `sqrt(L) / (2 gamma) * max_d(range_d / 2)` in the infinity norm,
//! where `L` is the transform length. [`FastModel::round_trip_bound`] returns
//! that figure.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::{BpeError, BpeModel, DEFAULT_MAX_VOCAB};
use crate::dct::{dct_forward_with, dct_inverse_with, DctAxis, DctPlan};
use crate::matrix::Matrix;
use crate::quantile::{quantile_sorted, sorted};
use crate::trajectory::{ActionChunk, ChunkError, ChunkOrigin, ChunkSpec};

pub const FAST_FORMAT: &str = "actok-fast";
pub const FAST_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CLAMP: u32 = 127;
pub const DEFAULT_NORM_QUANTILES: (f64, f64) = (0.01, 0.99);
/// Saturation fraction above which the clamp bound is escalated.
pub const SATURATION_LIMIT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum FastError {
    #[error("no chunks to fit on")]
    Empty,
    #[error("either a quantization scale or a target error is required")]
    MissingScale,
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Shape(#[from] ChunkError),
    #[error("tokens decode to {found} symbols, a {}x{} chunk needs {}", spec.n, spec.d, spec.len())]
    MalformedChunk { spec: ChunkSpec, found: usize },
    #[error(transparent)]
    Bpe(#[from] BpeError),
    #[error("target error {target} unreachable: best p99 error {achieved} at scale {scale}")]
    Calibration {
        target: f64,
        achieved: f64,
        scale: f64,
    },
    #[error("invalid model file: {0}")]
    Format(String),
}

/// Zigzag map of signed integers onto naturals: 0, -1, 1, -2, 2 -> 0, 1, 2, 3, 4.
pub fn zigzag(v: i64) -> u32 {
    if v >= 0 {
        (2 * v) as u32
    } else {
        (-2 * v - 1) as u32
    }
}

pub fn unzigzag(z: u32) -> i64 {
    let z = i64::from(z);
    if z % 2 == 0 {
        z / 2
    } else {
        -(z + 1) / 2
    }
}

/// Round half away from zero, then clamp to `[-clamp, clamp]`. Returns the
/// integer and whether it saturated.
pub fn quantize(coeff: f64, scale: f64, clamp: u32) -> (i64, bool) {
    let q = (coeff * scale).round();
    let k = f64::from(clamp);
    if q > k {
        (clamp as i64, true)
    } else if q < -k {
        (-(clamp as i64), true)
    } else {
        (q as i64, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRange {
    pub low: f64,
    pub high: f64,
}

impl NormRange {
    pub fn is_degenerate(&self) -> bool {
        self.high <= self.low
    }

    pub fn width(&self) -> f64 {
        (self.high - self.low).max(0.0)
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let v = v.clamp(self.low, self.high);
        (2.0 * (v - self.low) / (self.high - self.low) - 1.0).clamp(-1.0, 1.0)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            return self.low;
        }
        (self.low + (y + 1.0) / 2.0 * (self.high - self.low)).clamp(self.low, self.high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleChoice {
    Fixed(f64),
    /// Calibrate to a p99 round-trip error in normalized units.
    Target(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastConfig {
    pub chunk: ChunkSpec,
    pub axis: DctAxis,
    pub scale: Option<ScaleChoice>,
    pub clamp: u32,
    pub max_vocab: u32,
    pub norm_quantiles: (f64, f64),
    /// Double `clamp` while more than 1% of training coefficients saturate.
    pub escalate_clamp: bool,
}

impl FastConfig {
    pub fn new(chunk: ChunkSpec, scale: ScaleChoice) -> Self {
        Self {
            chunk,
            axis: DctAxis::default(),
            scale: Some(scale),
            clamp: DEFAULT_CLAMP,
            max_vocab: DEFAULT_MAX_VOCAB,
            norm_quantiles: DEFAULT_NORM_QUANTILES,
            escalate_clamp: true,
        }
    }

    fn validate(&self) -> Result<(), FastError> {
        let bad = |m: &str| Err(FastError::InvalidConfig(m.into()));
        if self.clamp == 0 {
            return bad("clamp bound must be >= 1");
        }
        let (lo, hi) = self.norm_quantiles;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return bad("normalization quantiles must satisfy 0 <= low < high <= 1");
        }
        if 2 * self.clamp + 1 > self.max_vocab {
            return bad("base alphabet 2K+1 exceeds max_vocab");
        }
        match self.scale {
            None => Err(FastError::MissingScale),
            Some(ScaleChoice::Fixed(g)) if !(g > 0.0 && g.is_finite()) => {
                bad("scale must be positive and finite")
            }
            Some(ScaleChoice::Target(t)) if !(t > 0.0) => bad("target error must be positive"),
            _ => Ok(()),
        }
    }
}

/// Statistics gathered while fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub chunks: usize,
    pub scale: f64,
    pub clamp: u32,
    pub base_alphabet: u32,
    pub vocab_used: u32,
    pub merges: usize,
    pub saturation_fraction: f64,
    pub mean_tokens_per_chunk: f64,
    pub max_tokens_per_chunk: usize,
    pub baseline_tokens_per_chunk: usize,
    pub compression_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastModel {
    format: String,
    version: u32,
    chunk: ChunkSpec,
    axis: DctAxis,
    norm: Vec<NormRange>,
    scale: f64,
    clamp: u32,
    bpe: BpeModel,
}

/// Per-dimension `(low, high)` quantiles over every timestep of every chunk.
pub fn fit_normalization(
    chunks: &[ActionChunk],
    d: usize,
    quantiles: (f64, f64),
) -> Vec<NormRange> {
    (0..d)
        .map(|j| {
            let col: Vec<f64> = chunks.iter().flat_map(|c| c.values.column(j)).collect();
            let s = sorted(&col);
            NormRange {
                low: quantile_sorted(&s, quantiles.0),
                high: quantile_sorted(&s, quantiles.1),
            }
        })
        .collect()
}

/// The lossy stages of the codec without BPE: used for fitting and calibration.
struct Quantizer<'a> {
    chunk: ChunkSpec,
    axis: DctAxis,
    norm: &'a [NormRange],
    plan: DctPlan,
}

impl<'a> Quantizer<'a> {
    fn new(chunk: ChunkSpec, axis: DctAxis, norm: &'a [NormRange]) -> Self {
        Self {
            chunk,
            axis,
            norm,
            plan: DctPlan::new(axis.length(chunk.n, chunk.d)),
        }
    }

    fn normalize(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for r in 0..out.rows() {
            for (v, n) in out.row_mut(r).iter_mut().zip(self.norm) {
                *v = n.normalize(*v);
            }
        }
        out
    }

    fn denormalize(&self, normalized: &Matrix) -> Matrix {
        let mut out = normalized.clone();
        for r in 0..out.rows() {
            for (v, n) in out.row_mut(r).iter_mut().zip(self.norm) {
                *v = n.denormalize(*v);
            }
        }
        out
    }

    fn coefficients(&self, values: &Matrix) -> Matrix {
        dct_forward_with(&self.normalize(values), self.axis, &self.plan)
    }

    fn from_coefficients(&self, coeffs: &Matrix) -> Matrix {
        self.denormalize(&dct_inverse_with(coeffs, self.axis, &self.plan))
    }

    /// Zigzagged symbols and the number of saturated coefficients.
    fn symbols(&self, values: &Matrix, scale: f64, clamp: u32) -> (Vec<u32>, usize) {
        let coeffs = self.coefficients(values);
        let mut saturated = 0;
        let symbols = coeffs
            .as_slice()
            .iter()
            .map(|&c| {
                let (q, sat) = quantize(c, scale, clamp);
                saturated += usize::from(sat);
                zigzag(q)
            })
            .collect();
        (symbols, saturated)
    }

    fn dequantize(&self, symbols: &[u32], scale: f64) -> Matrix {
        let data = symbols
            .iter()
            .map(|&s| unzigzag(s) as f64 / scale)
            .collect();
        Matrix::from_vec(self.chunk.n, self.chunk.d, data).expect("symbol count checked")
    }

    /// Largest normalized-unit error after quantizing and inverting, with the
    /// result clipped to the normalized box as decode does.
    fn normalized_error(&self, values: &Matrix, scale: f64, clamp: u32) -> f64 {
        let x = self.normalize(values);
        let c = dct_forward_with(&x, self.axis, &self.plan);
        let mut q = c.clone();
        for v in q.as_mut_slice() {
            *v = quantize(*v, scale, clamp).0 as f64 / scale;
        }
        let mut back = dct_inverse_with(&q, self.axis, &self.plan);
        for v in back.as_mut_slice() {
            *v = v.clamp(-1.0, 1.0);
        }
        // Degenerate dimensions decode to a constant regardless.
        let mut err: f64 = 0.0;
        for r in 0..x.rows() {
            for (j, n) in self.norm.iter().enumerate() {
                if !n.is_degenerate() {
                    err = err.max((back.get(r, j) - x.get(r, j)).abs());
                }
            }
        }
        err
    }
}

fn check_chunks(chunks: &[ActionChunk], spec: ChunkSpec) -> Result<(), FastError> {
    if chunks.is_empty() {
        return Err(FastError::Empty);
    }
    for c in chunks {
        c.check_spec(spec)?;
    }
    Ok(())
}

fn p99(mut errors: Vec<f64>) -> f64 {
    errors.sort_by(f64::total_cmp);
    quantile_sorted(&errors, 0.99)
}

/// Smallest scale whose held-out p99 round-trip error (normalized units) is
/// within `target_err`.
///
/// Scales `1, 2, 4, ..., 2^16` are tried in turn; the first passing power of
/// two is then refined by 8 bisection steps against its failing predecessor.
/// The held-out split is every tenth chunk (all chunks when fewer than ten).
pub fn calibrate_scale(
    chunks: &[ActionChunk],
    target_err: f64,
    cfg: &FastConfig,
) -> Result<f64, FastError> {
    check_chunks(chunks, cfg.chunk)?;
    if !(target_err > 0.0) {
        return Err(FastError::InvalidConfig(
            "target error must be positive".into(),
        ));
    }
    let norm = fit_normalization(chunks, cfg.chunk.d, cfg.norm_quantiles);
    let quant = Quantizer::new(cfg.chunk, cfg.axis, &norm);
    let held: Vec<&ActionChunk> = if chunks.len() >= 10 {
        chunks.iter().skip(9).step_by(10).collect()
    } else {
        chunks.iter().collect()
    };
    let measure = |scale: f64| {
        p99(held
            .par_iter()
            .map(|c| quant.normalized_error(&c.values, scale, cfg.clamp))
            .collect())
    };

    let mut best = (f64::INFINITY, 0.0);
    let mut failing = None;
    for k in 0..=16 {
        let scale = f64::from(1u32 << k);
        let err = measure(scale);
        if err <= target_err {
            let Some(mut lo) = failing else {
                return Ok(scale);
            };
            let mut hi = scale;
            for _ in 0..8 {
                let mid = 0.5 * (lo + hi);
                if measure(mid) <= target_err {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        if err < best.0 {
            best = (err, scale);
        }
        failing = Some(scale);
    }
    Err(FastError::Calibration {
        target: target_err,
        achieved: best.0,
        scale: best.1,
    })
}

/// Fits normalization, picks the scale, and trains BPE over the quantized
/// symbol stream of every chunk.
pub fn fit_fast(
    chunks: &[ActionChunk],
    cfg: &FastConfig,
) -> Result<(FastModel, FitSummary), FastError> {
    cfg.validate()?;
    check_chunks(chunks, cfg.chunk)?;
    let scale = match cfg.scale.ok_or(FastError::MissingScale)? {
        ScaleChoice::Fixed(g) => g,
        ScaleChoice::Target(t) => calibrate_scale(chunks, t, cfg)?,
    };
    let norm = fit_normalization(chunks, cfg.chunk.d, cfg.norm_quantiles);
    let quant = Quantizer::new(cfg.chunk, cfg.axis, &norm);

    let mut warnings = Vec::new();
    let mut clamp = cfg.clamp;
    let total = (chunks.len() * cfg.chunk.len()) as f64;
    let (corpus, saturation) = loop {
        let coded: Vec<(Vec<u32>, usize)> = chunks
            .par_iter()
            .map(|c| quant.symbols(&c.values, scale, clamp))
            .collect();
        let saturated: usize = coded.iter().map(|(_, s)| s).sum();
        let frac = saturated as f64 / total;
        let corpus: Vec<Vec<u32>> = coded.into_iter().map(|(s, _)| s).collect();
        if frac < SATURATION_LIMIT || !cfg.escalate_clamp || 2 * (2 * clamp) + 1 > cfg.max_vocab {
            if frac >= SATURATION_LIMIT {
                let msg = format!(
                    "{:.2}% of coefficients saturate at clamp {clamp}; lower the scale or raise max_vocab",
                    100.0 * frac
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            break (corpus, frac);
        }
        let msg = format!(
            "{:.2}% of coefficients saturate at clamp {clamp}; escalating to {}",
            100.0 * frac,
            2 * clamp
        );
        warn!("{msg}");
        warnings.push(msg);
        clamp *= 2;
    };

    let bpe = BpeModel::train(&corpus, 2 * clamp + 1, cfg.max_vocab)?;
    let model = FastModel {
        format: FAST_FORMAT.into(),
        version: FAST_FORMAT_VERSION,
        chunk: cfg.chunk,
        axis: cfg.axis,
        norm,
        scale,
        clamp,
        bpe,
    };
    let lengths: Vec<usize> = corpus
        .par_iter()
        .map(|s| model.bpe.encode(s).map(|t| t.len()))
        .collect::<Result<_, _>>()?;
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    let baseline = cfg.chunk.len();
    let summary = FitSummary {
        chunks: chunks.len(),
        scale,
        clamp,
        base_alphabet: model.bpe.base_alphabet_size(),
        vocab_used: model.bpe.vocab_size(),
        merges: model.bpe.merges().len(),
        saturation_fraction: saturation,
        mean_tokens_per_chunk: mean,
        max_tokens_per_chunk: lengths.iter().copied().max().unwrap_or(0),
        baseline_tokens_per_chunk: baseline,
        compression_ratio: mean / baseline as f64,
        warnings,
    };
    Ok((model, summary))
}

impl FastModel {
    pub fn chunk_spec(&self) -> ChunkSpec {
        self.chunk
    }

    pub fn axis(&self) -> DctAxis {
        self.axis
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn clamp(&self) -> u32 {
        self.clamp
    }

    pub fn normalization(&self) -> &[NormRange] {
        &self.norm
    }

    pub fn bpe(&self) -> &BpeModel {
        &self.bpe
    }

    pub fn vocab_size(&self) -> u32 {
        self.bpe.vocab_size()
    }

    fn quantizer(&self) -> Quantizer<'_> {
        Quantizer::new(self.chunk, self.axis, &self.norm)
    }

    /// Length of the 1-D transform.
    pub fn transform_len(&self) -> usize {
        self.axis.length(self.chunk.n, self.chunk.d)
    }

    /// Worst-case infinity-norm reconstruction error for a chunk inside the
    /// normalization box whose coefficients do not saturate.
    pub fn round_trip_bound(&self) -> f64 {
        let half_range = self
            .norm
            .iter()
            .map(|n| n.width() / 2.0)
            .fold(0.0, f64::max);
        (self.transform_len() as f64).sqrt() / (2.0 * self.scale) * half_range
    }

    /// Normalized DCT coefficients of a chunk, before quantization.
    pub fn coefficients(&self, chunk: &ActionChunk) -> Result<Matrix, FastError> {
        chunk.check_spec(self.chunk)?;
        Ok(self.quantizer().coefficients(&chunk.values))
    }

    /// Inverse DCT and denormalization of continuous coefficients.
    pub fn from_coefficients(&self, coeffs: &Matrix) -> Result<Matrix, FastError> {
        if coeffs.shape() != (self.chunk.n, self.chunk.d) {
            return Err(ChunkError::ShapeMismatch {
                expected: self.chunk,
                found: ChunkSpec {
                    n: coeffs.rows(),
                    d: coeffs.cols(),
                },
            }
            .into());
        }
        Ok(self.quantizer().from_coefficients(coeffs))
    }

    /// Base symbols (before BPE) and the count of saturated coefficients.
    pub fn symbols(&self, chunk: &ActionChunk) -> Result<(Vec<u32>, usize), FastError> {
        chunk.check_spec(self.chunk)?;
        Ok(self
            .quantizer()
            .symbols(&chunk.values, self.scale, self.clamp))
    }

    pub fn encode(&self, chunk: &ActionChunk) -> Result<Vec<u32>, FastError> {
        let (symbols, _) = self.symbols(chunk)?;
        Ok(self.bpe.encode(&symbols)?)
    }

    /// Rebuilds a chunk from base symbols. The symbol count must be exactly `n * d`.
    pub fn decode_symbols(&self, symbols: &[u32]) -> Result<ActionChunk, FastError> {
        if symbols.len() != self.chunk.len() {
            return Err(FastError::MalformedChunk {
                spec: self.chunk,
                found: symbols.len(),
            });
        }
        let alphabet = self.bpe.base_alphabet_size();
        if let Some(&symbol) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(BpeError::SymbolOutOfRange { symbol, alphabet }.into());
        }
        let quant = self.quantizer();
        let coeffs = quant.dequantize(symbols, self.scale);
        let values = quant.from_coefficients(&coeffs);
        Ok(ActionChunk::new(values, ChunkOrigin::default())?)
    }

    pub fn decode(&self, tokens: &[u32]) -> Result<ActionChunk, FastError> {
        let symbols = self.bpe.decode(tokens)?;
        self.decode_symbols(&symbols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, FastError> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| FastError::Format(e.to_string()))?;
        // Round-trip the embedded BPE model through its own validation.
        let bpe = BpeModel::from_json(&model.bpe.to_json())?;
        let model = Self { bpe, ..model };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), FastError> {
        let bad = |m: String| Err(FastError::Format(m));
        if self.format != FAST_FORMAT || self.version != FAST_FORMAT_VERSION {
            return bad(format!(
                "unsupported format {} v{}",
                self.format, self.version
            ));
        }
        if self.chunk.n == 0 || self.chunk.d == 0 {
            return bad("empty chunk spec".into());
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale {} must be positive", self.scale));
        }
        if self.clamp == 0 {
            return bad("clamp must be >= 1".into());
        }
        if self.bpe.base_alphabet_size() != 2 * self.clamp + 1 {
            return bad("BPE base alphabet does not match the clamp bound".into());
        }
        if self.norm.len() != self.chunk.d {
            return bad("normalization dimension count differs from chunk spec".into());
        }
        if self
            .norm
            .iter()
            .any(|n| !(n.low.is_finite() && n.high.is_finite()) || n.high < n.low)
        {
            return bad("normalization ranges must be finite and ordered".into());
        }
        Ok(())
    }

    /// SHA-256 of the model file contents.
    pub fn fingerprint(&self) -> String {
        crate::sha256_hex(self.to_json().as_bytes())
    }
}
