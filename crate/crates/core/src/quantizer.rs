//! Lloyd-Max quantizers for a unit-variance Gaussian source and their
//! application to complex baseband samples.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{QuantizerSpec, Resolution};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::standard_normal_pair;
use crate::scalar::{norm_mass, norm_pdf, Real};

/// Upper bound on Lloyd iterations.
pub const MAX_ITERATIONS: usize = 10_000;
pub const MAX_BITS: u32 = 12;

/// MMSE-optimal scalar quantizer for `N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydMaxCodebook<T> {
    bits: u32,
    thresholds: Vec<T>,
    levels: Vec<T>,
    distortion: T,
    iterations: usize,
}

/// Cell statistics under the standard normal for a given level placement.
struct CellStats<T> {
    centroids: Vec<T>,
    // d centroid_i / d lower edge, d centroid_i / d upper edge
    d_lower: Vec<T>,
    d_upper: Vec<T>,
}

fn edges_of<T: Real>(levels: &[T]) -> Vec<T> {
    let mut e = Vec::with_capacity(levels.len() + 1);
    e.push(T::neg_infinity());
    e.extend(levels.windows(2).map(|w| (w[0] + w[1]) * T::lit(0.5)));
    e.push(T::infinity());
    e
}

fn cell_stats<T: Real>(levels: &[T]) -> CellStats<T> {
    let edges = edges_of(levels);
    let n = levels.len();
    let mut centroids = Vec::with_capacity(n);
    let mut d_lower = Vec::with_capacity(n);
    let mut d_upper = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (edges[i], edges[i + 1]);
        let p = norm_mass(a, b);
        let (pa, pb) = (norm_pdf(a), norm_pdf(b));
        let c = (pa - pb) / p;
        centroids.push(c);
        d_lower.push(if a.is_finite() {
            pa * (c - a) / p
        } else {
            T::zero()
        });
        d_upper.push(if b.is_finite() {
            pb * (b - c) / p
        } else {
            T::zero()
        });
    }
    CellStats {
        centroids,
        d_lower,
        d_upper,
    }
}

/// Newton step for `y - centroid(y) = 0`; the Jacobian is tridiagonal.
fn newton_step<T: Real>(levels: &[T], stats: &CellStats<T>) -> Option<Vec<T>> {
    let n = levels.len();
    let half = T::lit(0.5);
    let mut sub = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut sup = vec![T::zero(); n];
    let mut rhs = vec![T::zero(); n];
    for i in 0..n {
        diag[i] = T::one() - half * (stats.d_lower[i] + stats.d_upper[i]);
        if i > 0 {
            sub[i] = -half * stats.d_lower[i];
        }
        if i + 1 < n {
            sup[i] = -half * stats.d_upper[i];
        }
        rhs[i] = stats.centroids[i] - levels[i];
    }
    // Thomas algorithm
    for i in 1..n {
        if diag[i - 1] == T::zero() {
            return None;
        }
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    let mut step = vec![T::zero(); n];
    if diag[n - 1] == T::zero() {
        return None;
    }
    step[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        step[i] = (rhs[i] - sup[i] * step[i + 1]) / diag[i];
    }
    let next: Vec<T> = levels.iter().zip(&step).map(|(&y, &s)| y + s).collect();
    let ordered = next.windows(2).all(|w| w[0] < w[1]) && next.iter().all(|y| y.is_finite());
    ordered.then_some(next)
}

fn max_residual<T: Real>(levels: &[T], centroids: &[T]) -> T {
    levels
        .iter()
        .zip(centroids)
        .map(|(&y, &c)| (y - c).abs())
        .fold(T::zero(), T::max)
}

/// Mean squared error of `levels` on `N(0,1)`, from per-cell moments.
fn distortion_of<T: Real>(levels: &[T]) -> T {
    let edges = edges_of(levels);
    let mut total = T::zero();
    for (i, &y) in levels.iter().enumerate() {
        let (a, b) = (edges[i], edges[i + 1]);
        let p = norm_mass(a, b);
        let (pa, pb) = (norm_pdf(a), norm_pdf(b));
        let m1 = pa - pb;
        let xa = if a.is_finite() { a * pa } else { T::zero() };
        let xb = if b.is_finite() { b * pb } else { T::zero() };
        let m2 = p + xa - xb;
        total += m2 - T::lit(2.0) * y * m1 + y * y * p;
    }
    total
}

/// Designs the `bits`-bit Lloyd-Max quantizer for `N(0, 1)`.
///
/// Levels start at the normal quantiles `(2i+1)/2^(b+1)`. Each iteration
/// takes a Newton step on the centroid fixed-point equations when that step
/// keeps the levels ordered and shrinks the residual, and a plain Lloyd step
/// otherwise. Iteration stops when the largest level change falls below
/// `1e-12` (or a few ulps for `f32`).
pub fn design_codebook<T: Real>(bits: u32) -> Result<LloydMaxCodebook<T>> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::invalid(format!(
            "Lloyd-Max design supports 1..={MAX_BITS} bits, got {bits}"
        )));
    }
    let n = 1usize << bits;
    let denom = T::lit((1u64 << (bits + 1)) as f64);
    let mut levels: Vec<T> = (0..n)
        .map(|i| (T::lit((2 * i + 1) as f64) / denom).inv_norm_cdf())
        .collect();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));

    let mut iterations = 0;
    let mut stats = cell_stats(&levels);
    let mut residual = max_residual(&levels, &stats.centroids);
    while residual >= tol {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::numeric(
                "design_codebook",
                format!("{bits}-bit design stalled at residual {residual} after {iterations} iterations"),
            ));
        }
        iterations += 1;
        let candidate = newton_step(&levels, &stats).and_then(|next| {
            let s = cell_stats(&next);
            let r = max_residual(&next, &s.centroids);
            (r < residual).then_some((next, s, r))
        });
        match candidate {
            Some((next, s, r)) => {
                levels = next;
                stats = s;
                residual = r;
            }
            None => {
                levels = stats.centroids.clone();
                stats = cell_stats(&levels);
                residual = max_residual(&levels, &stats.centroids);
            }
        }
    }
    levels = stats.centroids;

    // exact mirror symmetry
    for i in 0..n / 2 {
        let v = (levels[n - 1 - i] - levels[i]) * T::lit(0.5);
        levels[i] = -v;
        levels[n - 1 - i] = v;
    }
    let thresholds: Vec<T> = levels
        .windows(2)
        .map(|w| (w[0] + w[1]) * T::lit(0.5))
        .collect();
    let distortion = distortion_of(&levels);
    Ok(LloydMaxCodebook {
        bits,
        thresholds,
        levels,
        distortion,
        iterations,
    })
}

/// Serialized form of a codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookRecord {
    pub bits: u32,
    pub thresholds: Vec<f64>,
    pub levels: Vec<f64>,
    pub distortion: f64,
}

impl<T: Real> LloydMaxCodebook<T> {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn distortion(&self) -> T {
        self.distortion
    }

    /// Iterations the design needed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// AQNM gain `1 - distortion`.
    pub fn alpha(&self) -> T {
        T::one() - self.distortion
    }

    /// Index of the cell holding `x`; a value on a threshold goes up.
    #[inline]
    pub fn cell_index(&self, x: T) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    /// Quantizes a unit-variance sample.
    #[inline]
    pub fn quantize_unit(&self, x: T) -> T {
        self.levels[self.cell_index(x)]
    }

    pub fn to_record(&self) -> CodebookRecord {
        CodebookRecord {
            bits: self.bits,
            thresholds: self.thresholds.iter().map(|t| t.to_f64_lossy()).collect(),
            levels: self.levels.iter().map(|t| t.to_f64_lossy()).collect(),
            distortion: self.distortion.to_f64_lossy(),
        }
    }

    /// JSON export: `{"bits":..,"thresholds":[..],"levels":[..],"distortion":..}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }

    pub fn from_record(r: &CodebookRecord) -> Result<Self> {
        let n = 1usize
            .checked_shl(r.bits)
            .filter(|_| r.bits >= 1 && r.bits <= MAX_BITS)
            .ok_or_else(|| Error::invalid(format!("bad bit count {}", r.bits)))?;
        if r.levels.len() != n || r.thresholds.len() != n - 1 {
            return Err(Error::invalid(
                "level/threshold counts do not match the bit count",
            ));
        }
        if !r.levels.windows(2).all(|w| w[0] < w[1]) || !r.levels.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(
                "levels must be finite and strictly increasing",
            ));
        }
        for (i, &t) in r.thresholds.iter().enumerate() {
            if !(r.levels[i] < t && t < r.levels[i + 1]) {
                return Err(Error::invalid(format!(
                    "threshold {i} does not separate its levels"
                )));
            }
        }
        if !(r.distortion > 0.0 && r.distortion < 1.0) {
            return Err(Error::invalid("distortion must lie in (0, 1)"));
        }
        Ok(Self {
            bits: r.bits,
            thresholds: r.thresholds.iter().map(|&x| T::lit(x)).collect(),
            levels: r.levels.iter().map(|&x| T::lit(x)).collect(),
            distortion: T::lit(r.distortion),
            iterations: 0,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: CodebookRecord =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("codebook record: {e}")))?;
        Self::from_record(&r)
    }

    /// Git-style content hash: SHA-256 of `"blob <len>\0" + json`.
    pub fn digest(&self) -> String {
        let json = self.to_json();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", json.len()).as_bytes());
        h.update(json.as_bytes());
        hex::encode(h.finalize())
    }
}

/// Receiver front end: an ideal converter or a Lloyd-Max quantizer per rail.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer<T> {
    FullPrecision,
    LloydMax(LloydMaxCodebook<T>),
}

impl<T: Real> Quantizer<T> {
    pub fn design(resolution: Resolution) -> Result<Self> {
        match resolution {
            Resolution::FullPrecision => Ok(Quantizer::FullPrecision),
            Resolution::Bits(b) => design_codebook(b).map(Quantizer::LloydMax),
        }
    }

    pub fn resolution(&self) -> Resolution {
        match self {
            Quantizer::FullPrecision => Resolution::FullPrecision,
            Quantizer::LloydMax(cb) => Resolution::Bits(cb.bits()),
        }
    }

    /// Spec carrying the designed (not tabulated) gain.
    pub fn spec(&self) -> QuantizerSpec<T> {
        match self {
            Quantizer::FullPrecision => QuantizerSpec::full_precision(),
            Quantizer::LloydMax(cb) => QuantizerSpec::with_alpha(self.resolution(), cb.alpha())
                .expect("designed gain lies in (0, 1)"),
        }
    }

    pub fn codebook(&self) -> Option<&LloydMaxCodebook<T>> {
        match self {
            Quantizer::FullPrecision => None,
            Quantizer::LloydMax(cb) => Some(cb),
        }
    }

    #[inline]
    fn apply(&self, z: Complex<T>, rail_std: T) -> Complex<T> {
        match self {
            Quantizer::FullPrecision => z,
            Quantizer::LloydMax(cb) => Complex::new(
                cb.quantize_unit(z.re / rail_std) * rail_std,
                cb.quantize_unit(z.im / rail_std) * rail_std,
            ),
        }
    }
}

fn check_finite<T: Real>(signal: &CMatrix<T>) -> Result<()> {
    if signal
        .as_slice()
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        Ok(())
    } else {
        Err(Error::invalid("signal contains non-finite samples"))
    }
}

fn check_variance<T: Real>(v: T) -> Result<T> {
    if v > T::zero() && v.is_finite() {
        Ok((v * T::lit(0.5)).sqrt())
    } else {
        Err(Error::invalid(format!(
            "input variance {v} must be positive"
        )))
    }
}

/// Quantizes every real and imaginary rail of `signal`, with the quantizer
/// matched to a per-complex-sample variance `input_variance`.
pub fn quantize_block<T: Real>(
    signal: &CMatrix<T>,
    quantizer: &Quantizer<T>,
    input_variance: T,
) -> Result<CMatrix<T>> {
    check_finite(signal)?;
    let rail = check_variance(input_variance)?;
    Ok(signal.map(|z| quantizer.apply(z, rail)))
}

/// As [`quantize_block`], with one matching variance per row (antenna).
pub fn quantize_block_rows<T: Real>(
    signal: &CMatrix<T>,
    quantizer: &Quantizer<T>,
    row_variances: &[T],
) -> Result<CMatrix<T>> {
    if row_variances.len() != signal.rows() {
        return Err(Error::invalid("one variance per row is required"));
    }
    check_finite(signal)?;
    let rails = row_variances
        .iter()
        .map(|&v| check_variance(v))
        .collect::<Result<Vec<_>>>()?;
    let mut out = signal.clone();
    for (i, &rail) in rails.iter().enumerate() {
        for z in out.row_mut(i) {
            *z = quantizer.apply(*z, rail);
        }
    }
    Ok(out)
}

/// Least-squares gain of `Q(y)` on `y` over seeded standard-normal draws.
pub fn empirical_alpha<T: Real>(
    quantizer: &Quantizer<T>,
    n_samples: usize,
    seed: u64,
) -> Result<T> {
    if n_samples < 100_000 {
        return Err(Error::invalid("empirical_alpha needs at least 1e5 samples"));
    }
    let cb = match quantizer {
        Quantizer::FullPrecision => return Ok(T::one()),
        Quantizer::LloydMax(cb) => cb,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cross = 0.0f64;
    let mut energy = 0.0f64;
    let mut take = |x: f64| {
        let q = cb.quantize_unit(T::lit(x)).to_f64_lossy();
        cross += q * x;
        energy += x * x;
    };
    for _ in 0..n_samples / 2 {
        let (a, b) = standard_normal_pair(&mut rng);
        take(a);
        take(b);
    }
    if n_samples % 2 == 1 {
        take(standard_normal_pair(&mut rng).0);
    }
    Ok(T::lit(cross / energy))
}
