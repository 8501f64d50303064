use num_complex::Complex;

use crate::analytic::l_factor;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Cholesky};
use crate::scalar::Real;

/// `K x tau` pilot block with unit-modulus entries and orthogonal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix<T> {
    entries: CMatrix<T>,
}

impl<T: Real> PilotMatrix<T> {
    /// Wraps custom pilots. Orthogonality is not required; a singular Gram
    /// matrix surfaces later as a numeric failure in estimation.
    pub fn from_matrix(entries: CMatrix<T>) -> Result<Self> {
        if entries.rows() == 0 || entries.cols() == 0 {
            return Err(Error::invalid("pilot matrix must be non-empty"));
        }
        Ok(Self { entries })
    }

    pub fn n_users(&self) -> usize {
        self.entries.rows()
    }

    pub fn len(&self) -> usize {
        self.entries.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.cols() == 0
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    /// `S S^H`.
    pub fn gram(&self) -> CMatrix<T> {
        self.entries.mul_adjoint(&self.entries)
    }
}

/// First `K` rows of the `tau`-point DFT matrix, `S[k][t] = exp(-2 pi i k t / tau)`.
pub fn build_pilots<T: Real>(n_users: usize, pilot_len: usize) -> Result<PilotMatrix<T>> {
    if n_users == 0 || pilot_len < n_users {
        return Err(Error::invalid(format!(
            "{n_users} orthogonal pilots need length >= {n_users}, got {pilot_len}"
        )));
    }
    let tau = pilot_len as f64;
    let entries = CMatrix::from_fn(n_users, pilot_len, |k, t| {
        // reduce k t mod tau first so the phase stays small and exact
        let phase = -std::f64::consts::TAU * ((k * t) % pilot_len) as f64 / tau;
        let (s, c) = phase.sin_cos();
        Complex::new(T::lit(c), T::lit(s))
    });
    Ok(PilotMatrix { entries })
}

fn lmmse<T: Real>(
    received: &CMatrix<T>,
    pilots: &PilotMatrix<T>,
    tx_power: T,
    loading: T,
    prefactor: T,
) -> Result<CMatrix<T>> {
    if received.cols() != pilots.len() {
        return Err(Error::invalid(format!(
            "received pilots have {} columns, pilot length is {}",
            received.cols(),
            pilots.len()
        )));
    }
    let mut g = pilots.gram();
    g.scale(tx_power);
    for k in 0..g.rows() {
        g[(k, k)].re += loading;
    }
    let chol = Cholesky::factor(&g).map_err(|e| match e {
        Error::NumericFailure { detail, .. } => Error::numeric(
            "estimate_channel",
            format!("pilot Gram matrix is singular: {detail}"),
        ),
        other => other,
    })?;
    // H^ = c Y S^H G^-1, so H^^H = c G^-1 (S Y^H)
    let sy = pilots.matrix().mul_adjoint(received);
    let mut out = chol.solve(&sy).adjoint();
    out.scale(prefactor);
    Ok(out)
}

/// Full-precision LMMSE estimate `sqrt(p_u) Y S^H (p_u S S^H + I)^-1`.
pub fn estimate_channel_full_precision<T: Real>(
    received: &CMatrix<T>,
    pilots: &PilotMatrix<T>,
    tx_power: T,
) -> Result<CMatrix<T>> {
    lmmse(received, pilots, tx_power, T::one(), tx_power.sqrt())
}

/// Quantized-pilot estimate `(1/alpha) sqrt(p_u) Y_q S^H (p_u S S^H + L I)^-1`.
/// With `alpha = 1` this is exactly the full-precision estimator.
pub fn estimate_channel<T: Real>(
    received: &CMatrix<T>,
    pilots: &PilotMatrix<T>,
    tx_power: T,
    alpha: T,
) -> Result<CMatrix<T>> {
    let l = l_factor(alpha, tx_power, pilots.n_users())?;
    lmmse(received, pilots, tx_power, l, tx_power.sqrt() / alpha)
}

/// ZF output `(H^^H H^)^-1 H^^H y_q / (alpha sqrt(p_u))`, one column per
/// symbol time.
pub fn zf_detect<T: Real>(
    received: &CMatrix<T>,
    estimate: &CMatrix<T>,
    tx_power: T,
    alpha: T,
) -> Result<CMatrix<T>> {
    if received.rows() != estimate.rows() {
        return Err(Error::invalid("received block and estimate disagree on N"));
    }
    if estimate.rows() < estimate.cols() {
        return Err(Error::invalid("ZF needs N >= K"));
    }
    let gram = estimate.adjoint_mul(estimate);
    let chol = Cholesky::factor(&gram).map_err(|e| {
        Error::numeric(
            "zf_detect",
            format!("channel estimate is rank deficient; condition number exceeds 1/eps ({e})"),
        )
    })?;
    let cond = chol.condition_estimate();
    if !(cond < T::one() / (T::epsilon() * T::lit(64.0))) {
        return Err(Error::numeric(
            "zf_detect",
            format!("channel estimate is rank deficient; condition number estimate {cond}"),
        ));
    }
    let mut out = chol.solve(&estimate.adjoint_mul(received));
    out.scale(T::one() / (alpha * tx_power.sqrt()));
    Ok(out)
}
