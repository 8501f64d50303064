//! Numerical-integration route to the average BER.
//!
//! Averages the AWGN Gray-QAM bit error probability against the density of
//! the post-ZF SNR variable directly, without the binomial identity used by
//! the closed form. Used as an independent check.

use super::{ber_coefficient, gamma0, CsiRegime, LinkParameters, QamOrder, QuantizerSpec};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::{q_func, Real};

const REL_TOL: f64 = 1e-13;
const MAX_SEGMENTS: usize = 400;

/// `ln Q(z)`, switching to a continued fraction for the far tail where
/// `Q` itself underflows.
pub fn ln_q<T: Real>(z: T) -> T {
    if z < T::lit(25.0) {
        return q_func(z).ln();
    }
    // Q(z) = phi(z) / (z + 1/(z + 2/(z + 3/(z + ...)))), modified Lentz
    let tiny = T::lit(1e-300);
    let mut f = z;
    let mut c = z;
    let mut d = T::zero();
    for n in 1..200 {
        let a = T::lit(n as f64);
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() < T::lit(1e-16) {
            break;
        }
    }
    let ln_phi = -(z * z) * T::lit(0.5) - T::lit(0.5) * (T::lit(2.0) * T::PI()).ln();
    ln_phi - f.ln()
}

/// Log density of the sum of `n` unit-mean exponentials (equivalently, half a
/// chi-square variable with `2n` degrees of freedom).
fn ln_density<T: Real>(x: T, n: usize, ln_gamma_n: T) -> T {
    let nf = T::lit(n as f64);
    if x <= T::zero() {
        return if n == 1 { T::zero() } else { T::neg_infinity() };
    }
    (nf - T::one()) * x.ln() - x - ln_gamma_n
}

/// `E[Q(sqrt(c X))]` for `X` the sum of `n` unit-mean exponentials.
pub fn averaged_tail<T: Real>(c: T, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("need at least one diversity branch"));
    }
    let nf = T::lit(n as f64);
    let ln_gamma_n = nf.ln_gamma();
    let g = |x: T| -> T {
        let lq = ln_q((c * x).sqrt());
        (lq + ln_density(x, n, ln_gamma_n)).exp()
    };

    // Integrand ~ x^(n-1) exp(-x(1 + c/2)); its mass sits around the mode
    // with spread sqrt(n)/(1 + c/2).
    let rate = T::one() + c * T::lit(0.5);
    let mode = (nf - T::one()) / rate;
    let spread = nf.sqrt().max(T::one()) / rate;

    let mut edges = vec![T::zero()];
    let first = (mode - T::lit(8.0) * spread).max(T::zero());
    if first > T::zero() {
        edges.push(first);
    }
    let mut x = mode.max(first);
    let mut step = spread;
    for _ in 0..4 {
        x += step;
        edges.push(x);
    }
    let mut total = T::zero();
    for w in edges.windows(2) {
        total += integrate(g, w[0], w[1], T::zero(), T::lit(REL_TOL), MAX_SEGMENTS)?;
    }
    // Walk outward with growing steps until the tail is negligible.
    let mut lo = *edges.last().expect("non-empty");
    for _ in 0..200 {
        step *= T::lit(2.0);
        let hi = lo + step;
        let piece = integrate(g, lo, hi, T::zero(), T::lit(REL_TOL), MAX_SEGMENTS)?;
        total += piece;
        lo = hi;
        if piece <= total * T::lit(1e-17) {
            return Ok(total);
        }
    }
    Err(Error::numeric(
        "ber_numeric_oracle",
        format!("tail did not decay for c = {c}, n = {n}"),
    ))
}

/// Average BER by quadrature for an explicit `gamma0`.
pub fn ber_numeric_from_gamma0<T: Real>(
    gamma0: T,
    n_antennas: usize,
    n_users: usize,
    m: QamOrder,
) -> Result<T> {
    if n_antennas < n_users || n_users == 0 {
        return Err(Error::invalid("need N >= K >= 1"));
    }
    let n = n_antennas - n_users + 1;
    let side = m.side();
    let mut total = T::zero();
    for k in 1..=m.bits_per_rail() {
        for i in 0..(side - (side >> k)) {
            let odd = T::lit((2 * i + 1) as f64);
            let c = T::lit(3.0) * odd * odd * gamma0 / T::lit(m.get() as f64 - 1.0);
            total += ber_coefficient::<T>(m, k, i) * averaged_tail(c, n)?;
        }
    }
    Ok(total)
}

pub fn ber_numeric_oracle<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    regime: CsiRegime,
) -> Result<T> {
    let sinr = gamma0(params, quant, regime)?;
    ber_numeric_from_gamma0(
        sinr.gamma0,
        params.n_antennas,
        params.n_users,
        params.mod_order,
    )
}
