//! Seeded Monte Carlo uplink: Rayleigh block fading, DFT pilots, quantized
//! LMMSE estimation, quantized data reception, ZF detection and Gray
//! demapping.
//!
//! Every block draws from its own ChaCha stream keyed by `(seed, block)`, so
//! the per-block error counts, and therefore every reported number, do not
//! depend on the number of workers.

mod link;
mod qam;

pub use link::{
    build_pilots, estimate_channel, estimate_channel_full_precision, zf_detect, PilotMatrix,
};
pub use qam::GrayQamMapper;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{LinkParameters, QuantizerSpec};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantizer::{quantize_block, quantize_block_rows, Quantizer};
use crate::rng::{block_rng, complex_normal};
use crate::scalar::Real;

pub const DEFAULT_SYMBOLS_PER_BLOCK: usize = 500;
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

/// Variance the quantizer is matched to before each conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// `p_u K + 1` on every antenna: the average over channel draws.
    #[default]
    Statistical,
    /// `p_u |h_i|^2 + 1` on antenna `i`: the variance given the channel.
    PerAntenna,
}

impl InputScaling {
    fn row_variances<T: Real>(self, h: &CMatrix<T>, tx_power: T) -> Vec<T> {
        match self {
            InputScaling::Statistical => {
                vec![tx_power * T::lit(h.cols() as f64) + T::one(); h.rows()]
            }
            InputScaling::PerAntenna => (0..h.rows())
                .map(|i| tx_power * h.row(i).iter().map(|z| z.norm_sqr()).sum::<T>() + T::one())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    pub params: LinkParameters<T>,
    pub quantizer: Quantizer<T>,
    pub n_blocks: usize,
    pub symbols_per_block: usize,
    pub seed: u64,
    pub csi_mode: CsiMode,
    pub scaling: InputScaling,
}

/// Echo of a configuration for run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfigRecord {
    pub n_antennas: usize,
    pub n_users: usize,
    pub pilot_len: Option<usize>,
    pub tx_power: f64,
    pub mod_order: u32,
    pub resolution: String,
    pub alpha: f64,
    pub codebook_digest: Option<String>,
    pub n_blocks: usize,
    pub symbols_per_block: usize,
    pub seed: u64,
    pub csi_mode: CsiMode,
    pub scaling: InputScaling,
    /// Fresh pilots and a fresh estimate in every fading block.
    pub channel_estimate: String,
}

impl<T: Real> SimConfig<T> {
    pub fn new(
        params: LinkParameters<T>,
        quantizer: Quantizer<T>,
        csi_mode: CsiMode,
        seed: u64,
    ) -> Self {
        Self {
            params,
            quantizer,
            n_blocks: 1,
            symbols_per_block: DEFAULT_SYMBOLS_PER_BLOCK,
            seed,
            csi_mode,
            scaling: InputScaling::Statistical,
        }
    }

    pub fn with_blocks(mut self, n_blocks: usize) -> Self {
        self.n_blocks = n_blocks;
        self
    }

    pub fn with_symbols_per_block(mut self, n: usize) -> Self {
        self.symbols_per_block = n;
        self
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_tx_power(mut self, tx_power: T) -> Self {
        self.params = self.params.with_tx_power(tx_power);
        self
    }

    /// Integer pilot length used in simulation: `ceil(tau)`.
    pub fn pilot_symbols(&self) -> Option<usize> {
        self.params
            .pilot_len
            .map(|t| t.ceil().to_usize().unwrap_or(usize::MAX))
    }

    pub fn spec(&self) -> QuantizerSpec<T> {
        self.quantizer.spec()
    }

    pub fn bits_per_block(&self) -> u64 {
        (self.params.n_users * self.symbols_per_block) as u64
            * self.params.mod_order.bits_per_symbol() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_blocks == 0 || self.symbols_per_block == 0 {
            return Err(Error::invalid("zero bits would be simulated"));
        }
        if self.csi_mode == CsiMode::Estimated {
            match self.pilot_symbols() {
                None => return Err(Error::invalid("estimated CSI needs a pilot length")),
                Some(t) if t < self.params.n_users => {
                    return Err(Error::invalid(format!(
                        "pilot length {t} is shorter than K = {}",
                        self.params.n_users
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn record(&self) -> SimConfigRecord {
        let p = &self.params;
        SimConfigRecord {
            n_antennas: p.n_antennas,
            n_users: p.n_users,
            pilot_len: self.pilot_symbols(),
            tx_power: p.tx_power.to_f64_lossy(),
            mod_order: p.mod_order.get(),
            resolution: self.quantizer.resolution().to_string(),
            alpha: self.spec().alpha().to_f64_lossy(),
            codebook_digest: self.quantizer.codebook().map(|c| c.digest()),
            n_blocks: self.n_blocks,
            symbols_per_block: self.symbols_per_block,
            seed: self.seed,
            csi_mode: self.csi_mode,
            scaling: self.scaling,
            channel_estimate: "per_block".into(),
        }
    }
}

fn gaussian_matrix<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
}

/// `sqrt(p_u) H X + W`.
fn receive<T: Real, R: Rng>(
    rng: &mut R,
    h: &CMatrix<T>,
    x: &CMatrix<T>,
    tx_power: T,
) -> CMatrix<T> {
    let mut y = h.mul(x);
    y.scale(tx_power.sqrt());
    y.add_assign(&gaussian_matrix(rng, h.rows(), x.cols()));
    y
}

fn quantize<T: Real>(
    y: &CMatrix<T>,
    quantizer: &Quantizer<T>,
    scaling: InputScaling,
    h: &CMatrix<T>,
    tx_power: T,
) -> Result<CMatrix<T>> {
    match scaling {
        InputScaling::Statistical => {
            quantize_block(y, quantizer, tx_power * T::lit(h.cols() as f64) + T::one())
        }
        InputScaling::PerAntenna => {
            quantize_block_rows(y, quantizer, &scaling.row_variances(h, tx_power))
        }
    }
}

/// Channel draw plus, in estimated mode, the pilot phase and its estimate.
struct Fading<T> {
    channel: CMatrix<T>,
    estimate: CMatrix<T>,
}

fn draw_fading<T: Real, R: Rng>(
    rng: &mut R,
    cfg: &SimConfig<T>,
    pilots: Option<&PilotMatrix<T>>,
) -> Result<Fading<T>> {
    let p = &cfg.params;
    let h = gaussian_matrix::<T, _>(rng, p.n_antennas, p.n_users);
    let estimate = match pilots {
        None => h.clone(),
        Some(s) => {
            let yp = receive(rng, &h, s.matrix(), p.tx_power);
            let ypq = quantize(&yp, &cfg.quantizer, cfg.scaling, &h, p.tx_power)?;
            estimate_channel(&ypq, s, p.tx_power, cfg.spec().alpha())?
        }
    };
    Ok(Fading {
        channel: h,
        estimate,
    })
}

/// Bit errors and bits of one block.
fn ber_block<T: Real>(
    cfg: &SimConfig<T>,
    pilots: Option<&PilotMatrix<T>>,
    mapper: &GrayQamMapper<T>,
    block: u64,
) -> Result<(u64, u64)> {
    let mut rng = block_rng(cfg.seed, block);
    let p = &cfg.params;
    let fading = draw_fading(&mut rng, cfg, pilots)?;
    let side = p.mod_order.side();
    let k = p.n_users;
    let t = cfg.symbols_per_block;
    let mut idx = Vec::with_capacity(k * t);
    let x = CMatrix::from_fn(k, t, |_, _| {
        let (ji, jq) = (rng.random_range(0..side), rng.random_range(0..side));
        idx.push((ji, jq));
        mapper.symbol(ji, jq)
    });
    let y = receive(&mut rng, &fading.channel, &x, p.tx_power);
    let yq = quantize(&y, &cfg.quantizer, cfg.scaling, &fading.channel, p.tx_power)?;
    let s_hat = zf_detect(&yq, &fading.estimate, p.tx_power, cfg.spec().alpha())?;
    let errors: u64 = s_hat
        .as_slice()
        .iter()
        .zip(&idx)
        .map(|(&z, &(ji, jq))| mapper.bit_errors(ji, jq, z) as u64)
        .sum();
    Ok((errors, cfg.bits_per_block()))
}

/// Bit error rate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerEstimate {
    pub fn from_counts(errors: u64, bits: u64) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("zero bits simulated"));
        }
        let n = bits as f64;
        let p = errors as f64 / n;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Ok(Self {
            errors,
            bits,
            ber: p,
            ci_low: if errors == 0 {
                0.0
            } else {
                (center - half).max(0.0)
            },
            ci_high: if errors == bits {
                1.0
            } else {
                (center + half).min(1.0)
            },
        })
    }
}

fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::numeric("thread_pool", e.to_string()))?;
    Ok(pool.install(f))
}

fn prepare<T: Real>(cfg: &SimConfig<T>) -> Result<Option<PilotMatrix<T>>> {
    cfg.validate()?;
    match cfg.csi_mode {
        CsiMode::Perfect => Ok(None),
        CsiMode::Estimated => {
            let tau = cfg.pilot_symbols().expect("validated");
            build_pilots(cfg.params.n_users, tau).map(Some)
        }
    }
}

fn count_blocks<T: Real>(
    cfg: &SimConfig<T>,
    pilots: Option<&PilotMatrix<T>>,
    blocks: std::ops::Range<u64>,
) -> Result<(u64, u64)> {
    let mapper = GrayQamMapper::new(cfg.params.mod_order);
    blocks
        .into_par_iter()
        .map(|b| ber_block(cfg, pilots, &mapper, b))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
}

/// Runs `cfg.n_blocks` blocks on `workers` threads.
pub fn run_ber<T: Real>(cfg: &SimConfig<T>, workers: usize) -> Result<BerEstimate> {
    let pilots = prepare(cfg)?;
    let (e, b) = with_workers(workers, || {
        count_blocks(cfg, pilots.as_ref(), 0..cfg.n_blocks as u64)
    })??;
    BerEstimate::from_counts(e, b)
}

/// Runs blocks in doubling batches until at least `min_errors` errors are
/// seen or `max_blocks` blocks are spent. The stopping point depends only
/// on the per-block counts, so the result is worker-independent.
pub fn run_ber_min_errors<T: Real>(
    cfg: &SimConfig<T>,
    min_errors: u64,
    max_blocks: usize,
    workers: usize,
) -> Result<BerEstimate> {
    let pilots = prepare(cfg)?;
    let (mut errors, mut bits, mut done) = (0u64, 0u64, 0u64);
    let mut batch = cfg.n_blocks.max(1) as u64;
    with_workers(workers, || -> Result<()> {
        while errors < min_errors && done < max_blocks as u64 {
            let end = (done + batch).min(max_blocks as u64);
            let (e, b) = count_blocks(cfg, pilots.as_ref(), done..end)?;
            errors += e;
            bits += b;
            done = end;
            batch *= 2;
        }
        Ok(())
    })??;
    BerEstimate::from_counts(errors, bits)
}

/// Blocks needed for `100 / target_ber` bits.
pub fn blocks_for_target<T: Real>(cfg: &SimConfig<T>, target_ber: f64) -> usize {
    let bits = (100.0 / target_ber).ceil();
    ((bits / cfg.bits_per_block() as f64).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrorEstimate {
    /// Mean of `|h - h^|^2` over all entries and blocks.
    pub mean: f64,
    /// Standard error from the spread of per-block means.
    pub std_error: f64,
    pub n_blocks: usize,
}

/// Empirical per-entry channel estimation error variance.
pub fn run_estimation_error<T: Real>(
    cfg: &SimConfig<T>,
    workers: usize,
) -> Result<EstimationErrorEstimate> {
    if cfg.csi_mode != CsiMode::Estimated {
        return Err(Error::invalid("estimation error needs estimated CSI"));
    }
    let pilots = prepare(cfg)?.expect("estimated mode");
    let entries = (cfg.params.n_antennas * cfg.params.n_users) as f64;
    let per_block: Vec<f64> = with_workers(workers, || {
        (0..cfg.n_blocks as u64)
            .into_par_iter()
            .map(|b| {
                let mut rng = block_rng(cfg.seed, b);
                let f = draw_fading(&mut rng, cfg, Some(&pilots))?;
                Ok(f.channel.sub(&f.estimate).frobenius_sq().to_f64_lossy() / entries)
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    let n = per_block.len() as f64;
    let mean = per_block.iter().sum::<f64>() / n;
    let var = if per_block.len() > 1 {
        per_block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        f64::NAN
    };
    Ok(EstimationErrorEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_blocks: per_block.len(),
    })
}

/// Per-antenna comparison of the quantization noise power with the additive
/// model's `alpha (1 - alpha) diag(p_u H H^H + I)` for one channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCovarianceCheck {
    pub empirical: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Correlation coefficient between `n_q` and `y`, per antenna.
    pub correlation: Vec<f64>,
    pub samples: usize,
}

impl NoiseCovarianceCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.empirical
            .iter()
            .zip(&self.predicted)
            .map(|(e, p)| ((e - p) / p).abs())
            .fold(0.0, f64::max)
    }
}

/// Draws one channel, sends `samples` random symbol vectors and measures
/// `n_q = Q(y) - alpha y` on every antenna.
pub fn quantization_noise_check<T: Real>(
    params: &LinkParameters<T>,
    quantizer: &Quantizer<T>,
    scaling: InputScaling,
    samples: usize,
    seed: u64,
) -> Result<NoiseCovarianceCheck> {
    params.validate()?;
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = block_rng(seed, u64::MAX);
    let h = gaussian_matrix::<T, _>(&mut rng, params.n_antennas, params.n_users);
    let alpha = quantizer.spec().alpha();
    let pu = params.tx_power;
    let n = params.n_antennas;
    let mapper = GrayQamMapper::<T>::new(params.mod_order);
    let side = params.mod_order.side();
    let predicted: Vec<f64> = InputScaling::PerAntenna
        .row_variances(&h, pu)
        .iter()
        .map(|v| (alpha * (T::one() - alpha) * *v).to_f64_lossy())
        .collect();
    let mut power = vec![0.0f64; n];
    let mut cross = vec![0.0f64; n];
    let mut ypow = vec![0.0f64; n];
    let chunk = 1000;
    let mut left = samples;
    while left > 0 {
        let t = left.min(chunk);
        left -= t;
        let x = CMatrix::from_fn(params.n_users, t, |_, _| {
            mapper.symbol(rng.random_range(0..side), rng.random_range(0..side))
        });
        let y = receive(&mut rng, &h, &x, pu);
        let yq = quantize(&y, quantizer, scaling, &h, pu)?;
        for i in 0..n {
            for (q, v) in yq.row(i).iter().zip(y.row(i)) {
                let nq = q - v * alpha;
                let (nq_re, nq_im) = (nq.re.to_f64_lossy(), nq.im.to_f64_lossy());
                let (v_re, v_im) = (v.re.to_f64_lossy(), v.im.to_f64_lossy());
                power[i] += nq_re * nq_re + nq_im * nq_im;
                cross[i] += nq_re * v_re + nq_im * v_im;
                ypow[i] += v_re * v_re + v_im * v_im;
            }
        }
    }
    let s = samples as f64;
    Ok(NoiseCovarianceCheck {
        empirical: power.iter().map(|p| p / s).collect(),
        correlation: (0..n)
            .map(|i| cross[i] / (power[i] * ypow[i]).sqrt())
            .collect(),
        predicted,
        samples,
    })
}

/// One simulated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub estimate: BerEstimate,
    pub seed: u64,
}

impl BerPoint {
    pub const CSV_HEADER: &'static str = "ebn0_db,ber,ci_low,ci_high,bits_simulated,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.8e},{:.8e},{:.8e},{:.8e},{},{}",
            self.ebn0_db,
            self.estimate.ber,
            self.estimate.ci_low,
            self.estimate.ci_high,
            self.estimate.bits,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ebn0_to_pu, QamOrder, Resolution};

    fn cfg(n: usize, k: usize, tau: f64, pu: f64, res: Resolution) -> SimConfig<f64> {
        let params = LinkParameters::new(n, k, Some(tau), pu, QamOrder::QAM16).unwrap();
        SimConfig::new(
            params,
            Quantizer::design(res).unwrap(),
            CsiMode::Estimated,
            11,
        )
    }

    #[test]
    fn noise_and_channel_are_unit_variance() {
        let mut rng = block_rng(5, 0);
        let m = gaussian_matrix::<f64, _>(&mut rng, 200, 500);
        let vals: Vec<f64> = m.as_slice().iter().map(|z| z.norm_sqr()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 3.0 * (var / n).sqrt(), "{mean}");
    }

    #[test]
    fn pure_noise_gives_coin_flips() {
        let c = SimConfig::new(
            LinkParameters::new(
                16,
                4,
                Some(4.0),
                ebn0_to_pu(-60.0, QamOrder::QPSK),
                QamOrder::QPSK,
            )
            .unwrap(),
            Quantizer::design(Resolution::Bits(3)).unwrap(),
            CsiMode::Estimated,
            3,
        )
        .with_blocks(40);
        let r = run_ber(&c, 2).unwrap();
        assert!(r.ci_low < 0.5 && 0.5 < r.ci_high, "{r:?}");
        assert!((r.ber - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_across_workers() {
        let c = cfg(32, 4, 8.0, 0.5, Resolution::Bits(2))
            .with_blocks(24)
            .with_symbols_per_block(50);
        let a = run_ber(&c, 1).unwrap();
        assert_eq!(a, run_ber(&c, 3).unwrap());
        assert_eq!(a, run_ber(&c, 8).unwrap());
        let e = run_ber_min_errors(&c, 500, 400, 1).unwrap();
        assert_eq!(e, run_ber_min_errors(&c, 500, 400, 5).unwrap());
        assert!(e.errors >= 500);
    }

    #[test]
    fn full_precision_unit_alpha_estimate_is_exact_shrinkage() {
        // alpha = 1, tau = K = 20, p_u = 1: error variance 1/21
        let mut c = cfg(32, 20, 20.0, 1.0, Resolution::FullPrecision).with_blocks(400);
        c.seed = 4;
        let r = run_estimation_error(&c, 4).unwrap();
        assert!((r.mean - 1.0 / 21.0).abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn noise_power_matches_additive_model_per_antenna() {
        let params = LinkParameters::new(24, 20, None, 1.0, QamOrder::QAM16).unwrap();
        let q = Quantizer::design(Resolution::Bits(2)).unwrap();
        let chk =
            quantization_noise_check(&params, &q, InputScaling::PerAntenna, 100_000, 2).unwrap();
        assert!(
            chk.max_relative_error() < 0.05,
            "{}",
            chk.max_relative_error()
        );
    }

    #[test]
    fn config_record_and_validation() {
        let c = cfg(16, 4, 5.5, 1.0, Resolution::Bits(3));
        assert_eq!(c.pilot_symbols(), Some(6));
        let r = c.record();
        assert_eq!(r.channel_estimate, "per_block");
        assert!(r.codebook_digest.is_some());
        assert!(cfg(16, 4, 3.0, 1.0, Resolution::Bits(3))
            .validate()
            .is_err());
        assert!(c.clone().with_blocks(0).validate().is_err());
        assert!(BerEstimate::from_counts(0, 0).is_err());
    }

    #[test]
    fn wilson_interval_bounds() {
        let e = BerEstimate::from_counts(0, 1000).unwrap();
        assert_eq!(e.ci_low, 0.0);
        assert!(e.ci_high > 0.0 && e.ci_high < 0.01);
        let e = BerEstimate::from_counts(100, 100_000).unwrap();
        assert!(e.ci_low < 1e-3 && e.ci_high > 1e-3);
    }
}
