//! Closed-form performance model of a coarsely quantized massive-MIMO uplink.
//!
//! Everything here is a pure function of its arguments. The quantizer enters
//! only through its additive-quantization-noise gain `alpha`, and all
//! quantized expressions collapse to their full-precision counterparts when
//! `alpha == 1`.

mod ber;
pub mod oracle;

pub use ber::{
    b_value, ber, ber_closed_form, ber_coefficient, ber_from_gamma0, ber_two_term,
    ber_two_term_from_gamma0, mu, two_term_coefficients, BerExpression, BerTerm, BerTerms,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{db_to_linear, linear_to_db, Real};

/// AQNM gains of MMSE (Lloyd-Max) quantizers for 1..=5 bits.
pub const ALPHA_TABLE: [f64; 5] = [0.6366, 0.8825, 0.96546, 0.990503, 0.997501];

/// ADC resolution per real rail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resolution {
    Bits(u32),
    FullPrecision,
}

impl Resolution {
    pub fn bits(self) -> Option<u32> {
        match self {
            Resolution::Bits(b) => Some(b),
            Resolution::FullPrecision => None,
        }
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::FullPrecision => f.write_str("full"),
        }
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "full" | "inf" | "full_precision" | "fp" => Ok(Resolution::FullPrecision),
            _ => {
                let b: u32 = t
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad resolution `{t}`")))?;
                if b == 0 {
                    return Err(Error::invalid("resolution must be at least 1 bit"));
                }
                Ok(Resolution::Bits(b))
            }
        }
    }
}

/// AQNM gain for a resolution: tabulated for `b <= 5`, the high-resolution
/// approximation `1 - (pi*sqrt(3)/2) 2^(-2b)` above that, exactly one for
/// full precision.
pub fn alpha_of_bits<T: Real>(resolution: Resolution) -> Result<T> {
    match resolution {
        Resolution::FullPrecision => Ok(T::one()),
        Resolution::Bits(0) => Err(Error::invalid("resolution must be at least 1 bit")),
        Resolution::Bits(b) if b <= 5 => Ok(T::lit(ALPHA_TABLE[(b - 1) as usize])),
        Resolution::Bits(b) => {
            let c = T::PI() * T::lit(3.0).sqrt() / T::lit(2.0);
            Ok(T::one() - c * T::lit(2.0).powi(-2 * b as i32))
        }
    }
}

/// Resolution together with its AQNM gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec<T> {
    resolution: Resolution,
    alpha: T,
}

impl<T: Real> QuantizerSpec<T> {
    /// Uses the tabulated gain for the resolution.
    pub fn new(resolution: Resolution) -> Result<Self> {
        Ok(Self {
            resolution,
            alpha: alpha_of_bits(resolution)?,
        })
    }

    pub fn bits(bits: u32) -> Result<Self> {
        Self::new(Resolution::Bits(bits))
    }

    pub fn full_precision() -> Self {
        Self {
            resolution: Resolution::FullPrecision,
            alpha: T::one(),
        }
    }

    /// Overrides the gain, e.g. with one measured from a designed codebook.
    pub fn with_alpha(resolution: Resolution, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        match resolution {
            Resolution::FullPrecision if alpha != T::one() => {
                Err(Error::invalid("full precision requires alpha = 1"))
            }
            Resolution::Bits(0) => Err(Error::invalid("resolution must be at least 1 bit")),
            _ => Ok(Self { resolution, alpha }),
        }
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn is_full_precision(&self) -> bool {
        self.resolution == Resolution::FullPrecision
    }
}

/// Square QAM constellation size `M = 4^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct QamOrder(u32);

impl QamOrder {
    pub const QPSK: QamOrder = QamOrder(4);
    pub const QAM16: QamOrder = QamOrder(16);
    pub const QAM64: QamOrder = QamOrder(64);
    pub const QAM256: QamOrder = QamOrder(256);

    pub fn new(m: u32) -> Result<Self> {
        // 4, 16, ..., 4^10
        if m >= 4 && m.is_power_of_two() && m.trailing_zeros().is_multiple_of(2) && m <= 1 << 20 {
            Ok(QamOrder(m))
        } else {
            Err(Error::invalid(format!("{m} is not a square QAM order")))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `sqrt(M)`, the number of PAM levels per rail.
    pub fn side(self) -> u32 {
        1 << (self.0.trailing_zeros() / 2)
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.0.trailing_zeros()
    }

    pub fn bits_per_rail(self) -> u32 {
        self.0.trailing_zeros() / 2
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        QamOrder::new(m)
    }
}

impl From<QamOrder> for u32 {
    fn from(m: QamOrder) -> u32 {
        m.0
    }
}

/// Operating point of the uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParameters<T> {
    pub n_antennas: usize,
    pub n_users: usize,
    /// Pilot length. Real-valued so solvers can move it continuously.
    pub pilot_len: Option<T>,
    /// Linear per-user SNR `p_u`.
    pub tx_power: T,
    pub mod_order: QamOrder,
}

impl<T: Real> LinkParameters<T> {
    pub fn new(
        n_antennas: usize,
        n_users: usize,
        pilot_len: Option<T>,
        tx_power: T,
        mod_order: QamOrder,
    ) -> Result<Self> {
        let p = Self {
            n_antennas,
            n_users,
            pilot_len,
            tx_power,
            mod_order,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        if self.n_antennas < self.n_users {
            return Err(Error::invalid(format!(
                "N = {} antennas cannot separate K = {} users",
                self.n_antennas, self.n_users
            )));
        }
        if !(self.tx_power > T::zero()) || !self.tx_power.is_finite() {
            return Err(Error::invalid("transmit power must be positive and finite"));
        }
        if let Some(tau) = self.pilot_len {
            if !(tau > T::zero()) || !tau.is_finite() {
                return Err(Error::invalid("pilot length must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn with_tx_power(mut self, tx_power: T) -> Self {
        self.tx_power = tx_power;
        self
    }

    pub fn with_pilot_len(mut self, tau: T) -> Self {
        self.pilot_len = Some(tau);
        self
    }

    pub fn with_antennas(mut self, n: usize) -> Self {
        self.n_antennas = n;
        self
    }

    pub fn with_users(mut self, k: usize) -> Self {
        self.n_users = k;
        self
    }

    fn tau(&self) -> Result<T> {
        self.pilot_len
            .ok_or_else(|| Error::invalid("pilot length is required with estimated CSI"))
    }

    /// Degrees of freedom of the post-ZF SNR distribution, `2(N-K+1)`.
    pub fn dof(&self) -> usize {
        2 * (self.n_antennas - self.n_users + 1)
    }
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha = {alpha} outside (0, 1]")))
    }
}

fn check_positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} must be positive")))
    }
}

/// Quantization loss factor `L(alpha, p_u) = 1 + ((1-alpha)/alpha)(K p_u + 1)`.
pub fn l_factor<T: Real>(alpha: T, tx_power: T, n_users: usize) -> Result<T> {
    check_alpha(alpha)?;
    check_positive("tx_power", tx_power)?;
    if n_users == 0 {
        return Err(Error::invalid("at least one user is required"));
    }
    Ok(l_unchecked(alpha, tx_power, n_users))
}

#[inline]
fn l_unchecked<T: Real>(alpha: T, pu: T, k: usize) -> T {
    if alpha == T::one() {
        return T::one();
    }
    T::one() + (T::one() - alpha) / alpha * (T::lit(k as f64) * pu + T::one())
}

/// Variance of the combined additive and quantization noise on pilots,
/// `alpha^2 + alpha(1-alpha)(K p_u + 1)`.
pub fn combined_pilot_noise_variance<T: Real>(alpha: T, tx_power: T, n_users: usize) -> Result<T> {
    check_alpha(alpha)?;
    check_positive("tx_power", tx_power)?;
    let k = T::lit(n_users as f64);
    Ok(alpha * alpha + alpha * (T::one() - alpha) * (k * tx_power + T::one()))
}

/// Per-entry variances of the LMMSE estimate and its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationQuality<T> {
    pub var_estimate: T,
    pub var_error: T,
}

pub fn estimation_variances<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
) -> Result<EstimationQuality<T>> {
    params.validate()?;
    let tau = params.tau()?;
    let l = l_factor(quant.alpha(), params.tx_power, params.n_users)?;
    let tp = tau * params.tx_power;
    Ok(EstimationQuality {
        var_estimate: tp / (l + tp),
        var_error: l / (l + tp),
    })
}

/// High-power floor of the estimation error variance,
/// `(1-alpha)K / ((1-alpha)K + alpha tau)`.
pub fn error_variance_floor<T: Real>(alpha: T, n_users: usize, pilot_len: T) -> Result<T> {
    check_alpha(alpha)?;
    check_positive("pilot_len", pilot_len)?;
    let k = T::lit(n_users as f64);
    let q = (T::one() - alpha) * k;
    Ok(q / (q + alpha * pilot_len))
}

/// Minimal quantized pilot length whose estimation error does not exceed that
/// of a full-precision system using `tau_ref` pilots at power `pu_ref`.
pub fn pilot_compensation_estimation<T: Real>(
    tau_ref: T,
    pu_ref: T,
    pu_q: T,
    alpha: T,
    n_users: usize,
) -> Result<T> {
    check_positive("tau_ref", tau_ref)?;
    check_positive("pu_ref", pu_ref)?;
    let l = l_factor(alpha, pu_q, n_users)?;
    Ok(tau_ref * (pu_ref / pu_q) * l)
}

/// Which channel knowledge and receiver precision a `gamma0` describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsiRegime {
    PerfectCsiFullPrecision,
    PerfectCsiQuantized,
    ImperfectCsiFullPrecision,
    ImperfectCsiQuantized,
}

impl CsiRegime {
    pub fn from_flags(estimated_csi: bool, quantized: bool) -> Self {
        match (estimated_csi, quantized) {
            (false, false) => CsiRegime::PerfectCsiFullPrecision,
            (false, true) => CsiRegime::PerfectCsiQuantized,
            (true, false) => CsiRegime::ImperfectCsiFullPrecision,
            (true, true) => CsiRegime::ImperfectCsiQuantized,
        }
    }

    /// Regime implied by a quantizer: full precision maps to the
    /// full-precision column.
    pub fn for_quantizer<T: Real>(estimated_csi: bool, quant: &QuantizerSpec<T>) -> Self {
        Self::from_flags(estimated_csi, !quant.is_full_precision())
    }

    pub fn estimated_csi(self) -> bool {
        matches!(
            self,
            CsiRegime::ImperfectCsiFullPrecision | CsiRegime::ImperfectCsiQuantized
        )
    }

    pub fn quantized(self) -> bool {
        matches!(
            self,
            CsiRegime::PerfectCsiQuantized | CsiRegime::ImperfectCsiQuantized
        )
    }
}

/// Deterministic SIQNR scale `gamma0` of the scaled chi-square post-ZF SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrModel<T> {
    pub regime: CsiRegime,
    pub gamma0: T,
    pub dof: usize,
}

pub fn gamma0<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    regime: CsiRegime,
) -> Result<SinrModel<T>> {
    params.validate()?;
    let pu = params.tx_power;
    let k = T::lit(params.n_users as f64);
    let g = match regime {
        CsiRegime::PerfectCsiFullPrecision => pu,
        CsiRegime::PerfectCsiQuantized => pu / l_factor(quant.alpha(), pu, params.n_users)?,
        CsiRegime::ImperfectCsiFullPrecision => {
            let tau = params.tau()?;
            pu * pu * tau / (T::one() + (k + tau) * pu)
        }
        CsiRegime::ImperfectCsiQuantized => {
            let tau = params.tau()?;
            let l = l_factor(quant.alpha(), pu, params.n_users)?;
            pu * pu * tau / (l * (l + (k + tau) * pu))
        }
    };
    Ok(SinrModel {
        regime,
        gamma0: g,
        dof: params.dof(),
    })
}

/// Upper limit of a quantity that may grow without bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ceiling<T> {
    Finite(T),
    Unbounded,
}

impl<T: Real> Ceiling<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Ceiling::Finite(x) => Some(x),
            Ceiling::Unbounded => None,
        }
    }
}

/// Limit of `gamma0` as `p_u -> inf`. `pilot_len = None` selects perfect CSI.
pub fn gamma0_asymptote<T: Real>(
    quant: &QuantizerSpec<T>,
    n_users: usize,
    pilot_len: Option<T>,
) -> Result<Ceiling<T>> {
    let alpha = quant.alpha();
    check_alpha(alpha)?;
    if alpha == T::one() {
        return Ok(Ceiling::Unbounded);
    }
    let k = T::lit(n_users as f64);
    let perfect = alpha / (k * (T::one() - alpha));
    Ok(Ceiling::Finite(match pilot_len {
        None => perfect,
        Some(tau) => {
            check_positive("pilot_len", tau)?;
            perfect * alpha * tau / (k + alpha * tau)
        }
    }))
}

/// Result of a compensation solve that may have no solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Compensation<T> {
    Required(T),
    Infeasible,
}

impl<T: Real> Compensation<T> {
    pub fn required(self) -> Option<T> {
        match self {
            Compensation::Required(x) => Some(x),
            Compensation::Infeasible => None,
        }
    }
}

/// Minimal quantized pilot length at power `pu_q` that matches the `gamma0`
/// of a full-precision, estimated-CSI system running `(pu_ref, tau_ref)`.
pub fn joint_compensation<T: Real>(
    tau_ref: T,
    pu_ref: T,
    pu_q: T,
    alpha: T,
    n_users: usize,
) -> Result<Compensation<T>> {
    check_positive("tau_ref", tau_ref)?;
    check_positive("pu_ref", pu_ref)?;
    let l = l_factor(alpha, pu_q, n_users)?;
    let k = T::lit(n_users as f64);
    let num = pu_ref * pu_ref * tau_ref * l * (l + k * pu_q);
    let den =
        pu_q * pu_q * (T::one() + (k + tau_ref) * pu_ref) - pu_q * pu_ref * pu_ref * tau_ref * l;
    if den <= T::zero() {
        Ok(Compensation::Infeasible)
    } else {
        Ok(Compensation::Required(num / den))
    }
}

/// `p_u = 2 log2(M) Eb/N0`.
pub fn ebn0_to_pu<T: Real>(ebn0_db: T, mod_order: QamOrder) -> T {
    T::lit(2.0 * mod_order.bits_per_symbol() as f64) * db_to_linear(ebn0_db)
}

pub fn pu_to_ebn0<T: Real>(pu: T, mod_order: QamOrder) -> T {
    linear_to_db(pu / T::lit(2.0 * mod_order.bits_per_symbol() as f64))
}
