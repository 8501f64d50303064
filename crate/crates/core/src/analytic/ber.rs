//! Average uncoded Gray M-QAM BER under ZF detection.
//!
//! The AWGN bit error probability of square QAM is a signed sum of Gaussian
//! tails `F(k,i) Q(sqrt(3(2i+1)^2 gamma/(M-1)))`. Averaging each tail over
//! the post-ZF SNR `gamma0 X`, with `X` the sum of `N-K+1` unit-mean
//! exponentials, gives `B(mu_i)`.

use serde::{Deserialize, Serialize};

use super::{gamma0, CsiRegime, LinkParameters, QamOrder, QuantizerSpec, SinrModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which BER expression a caller wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BerExpression {
    /// Only the `i = 0, 1` tails.
    #[default]
    TwoTerm,
    FullSum,
}

/// One `(k, i)` summand of the double sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerTerm<T> {
    pub k: u32,
    pub i: u32,
    pub coefficient: T,
}

/// Every ingredient of a closed-form evaluation. `mus[i]` and `b_values[i]`
/// are shared by all `k` that reach index `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerTerms<T> {
    pub terms: Vec<BerTerm<T>>,
    pub mus: Vec<T>,
    pub b_values: Vec<T>,
}

impl<T: Real> BerTerms<T> {
    pub fn coefficients(&self) -> impl Iterator<Item = T> + '_ {
        self.terms.iter().map(|t| t.coefficient)
    }

    pub fn total(&self) -> T {
        self.terms
            .iter()
            .map(|t| t.coefficient * self.b_values[t.i as usize])
            .sum()
    }
}

/// `F(k, i)` for square QAM of order `m`.
pub fn ber_coefficient<T: Real>(m: QamOrder, k: u32, i: u32) -> T {
    let side = m.side() as u64;
    let log_side = m.bits_per_rail() as f64;
    let pow = 1u64 << (k - 1);
    let i = i as u64;
    let floor_a = i * pow / side;
    // floor(i 2^(k-1)/sqrt(M) + 1/2) in integers
    let floor_b = (2 * i * pow + side) / (2 * side);
    let sign = if floor_a.is_multiple_of(2) { 1.0 } else { -1.0 };
    let num = 2.0 * sign * (pow as f64 - floor_b as f64);
    T::lit(num / (side as f64 * log_side))
}

/// Upper index (exclusive) of `i` for a given `k`: `(1 - 2^-k) sqrt(M)`.
fn i_count(m: QamOrder, k: u32) -> u32 {
    let side = m.side();
    side - (side >> k)
}

/// Coefficients of `B(mu_0)` and `B(mu_1)` in the two-term truncation.
pub fn two_term_coefficients<T: Real>(m: QamOrder) -> (T, T) {
    let side = m.side() as f64;
    let denom = side * m.bits_per_rail() as f64;
    (
        T::lit(2.0 * (side - 1.0) / denom),
        T::lit(2.0 * (side - 2.0) / denom),
    )
}

/// Argument scale of the `i`-th tail: `c_i = 3(2i+1)^2 gamma0/(M-1)`.
#[inline]
fn c_of<T: Real>(m: QamOrder, i: u32, gamma0: T) -> T {
    let odd = T::lit((2 * i + 1) as f64);
    T::lit(3.0) * odd * odd * gamma0 / T::lit(m.get() as f64 - 1.0)
}

/// `mu_i = sqrt(c_i / (2 + c_i))`.
pub fn mu<T: Real>(m: QamOrder, i: u32, gamma0: T) -> T {
    let c = c_of(m, i, gamma0);
    (c / (T::lit(2.0) + c)).sqrt()
}

/// `B(mu) = ((1-mu)/2)^n sum_{j<n} C(n-1+j, j) ((1+mu)/2)^j` with
/// `n = N-K+1`, where `mu = sqrt(c/(2+c))`.
///
/// Summed in log space; `(1-mu)/2` is taken as `1/((2+c)(1+mu))`, which keeps
/// full relative precision as `mu -> 1`.
pub fn b_value<T: Real>(c: T, n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    if c <= T::zero() {
        // zero SNR: every tail is 1/2
        return T::lit(0.5);
    }
    if c.is_infinite() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let mu = (c / (two + c)).sqrt();
    let ln_lo = -((two + c) * (T::one() + mu)).ln();
    let ln_hi = ((T::one() + mu) / two).ln();
    let nf = T::lit(n as f64);

    let mut log_terms = Vec::with_capacity(n);
    let mut lt = nf * ln_lo;
    log_terms.push(lt);
    for j in 0..n - 1 {
        let jf = T::lit(j as f64);
        lt += ((nf + jf) / (jf + T::one())).ln() + ln_hi;
        log_terms.push(lt);
    }
    let peak = log_terms.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = log_terms.iter().map(|&x| (x - peak).exp()).sum();
    (peak + s.ln()).exp()
}

/// BER for a given `gamma0`, antenna count and user count.
pub fn ber_from_gamma0<T: Real>(
    gamma0: T,
    n_antennas: usize,
    n_users: usize,
    m: QamOrder,
) -> Result<(T, BerTerms<T>)> {
    if n_antennas < n_users || n_users == 0 {
        return Err(Error::invalid(format!(
            "need N >= K >= 1, got N = {n_antennas}, K = {n_users}"
        )));
    }
    if !(gamma0 >= T::zero()) {
        return Err(Error::invalid("gamma0 must be non-negative"));
    }
    let n = n_antennas - n_users + 1;
    let log_side = m.bits_per_rail();
    let max_i = i_count(m, log_side);

    let mus: Vec<T> = (0..max_i).map(|i| mu(m, i, gamma0)).collect();
    let b_values: Vec<T> = (0..max_i).map(|i| b_value(c_of(m, i, gamma0), n)).collect();
    let mut terms = Vec::new();
    for k in 1..=log_side {
        for i in 0..i_count(m, k) {
            terms.push(BerTerm {
                k,
                i,
                coefficient: ber_coefficient(m, k, i),
            });
        }
    }
    let bt = BerTerms {
        terms,
        mus,
        b_values,
    };
    Ok((bt.total(), bt))
}

fn check_model<T: Real>(params: &LinkParameters<T>, sinr: &SinrModel<T>) -> Result<()> {
    if !(sinr.gamma0 > T::zero()) || !sinr.gamma0.is_finite() {
        return Err(Error::invalid(format!(
            "gamma0 = {} must be finite and positive",
            sinr.gamma0
        )));
    }
    debug_assert_eq!(sinr.dof, params.dof());
    Ok(())
}

/// Full double-sum closed form.
pub fn ber_closed_form<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    regime: CsiRegime,
) -> Result<(T, BerTerms<T>)> {
    let sinr = gamma0(params, quant, regime)?;
    check_model(params, &sinr)?;
    ber_from_gamma0(
        sinr.gamma0,
        params.n_antennas,
        params.n_users,
        params.mod_order,
    )
}

/// Truncation keeping the `i = 0, 1` tails.
pub fn ber_two_term<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    regime: CsiRegime,
) -> Result<T> {
    let sinr = gamma0(params, quant, regime)?;
    check_model(params, &sinr)?;
    Ok(ber_two_term_from_gamma0(
        sinr.gamma0,
        params.n_antennas - params.n_users + 1,
        params.mod_order,
    ))
}

pub fn ber_two_term_from_gamma0<T: Real>(gamma0: T, n: usize, m: QamOrder) -> T {
    let (c0, c1) = two_term_coefficients::<T>(m);
    let mut ber = c0 * b_value(c_of(m, 0, gamma0), n);
    if c1 != T::zero() {
        ber += c1 * b_value(c_of(m, 1, gamma0), n);
    }
    ber
}

/// Dispatches to the selected expression.
pub fn ber<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    regime: CsiRegime,
    expression: BerExpression,
) -> Result<T> {
    match expression {
        BerExpression::TwoTerm => ber_two_term(params, quant, regime),
        BerExpression::FullSum => ber_closed_form(params, quant, regime).map(|(b, _)| b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
    }

    /// Direct evaluation of the binomial form, valid for small `n`.
    fn b_direct(c: f64, n: usize) -> f64 {
        let mu = (c / (2.0 + c)).sqrt();
        let lo = ((1.0 - mu) / 2.0).powi(n as i32);
        (0..n)
            .map(|j| binom((n - 1 + j) as u64, j as u64) * ((1.0 + mu) / 2.0).powi(j as i32))
            .sum::<f64>()
            * lo
    }

    #[test]
    fn coefficient_table_for_16qam() {
        let m = QamOrder::QAM16;
        let f = |k, i| ber_coefficient::<f64>(m, k, i);
        assert_eq!(f(1, 0), 0.25);
        assert_eq!(f(1, 1), 0.25);
        assert_eq!(f(2, 0), 0.5);
        assert_eq!(f(2, 1), 0.25);
        assert_eq!(f(2, 2), -0.25);
    }

    #[test]
    fn two_term_coefficients_are_the_i0_i1_coefficient_sums() {
        for m in [
            QamOrder::QPSK,
            QamOrder::QAM16,
            QamOrder::QAM64,
            QamOrder::QAM256,
        ] {
            let (c0, c1) = two_term_coefficients::<f64>(m);
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for k in 1..=m.bits_per_rail() {
                for i in 0..i_count(m, k) {
                    match i {
                        0 => s0 += ber_coefficient::<f64>(m, k, i),
                        1 => s1 += ber_coefficient::<f64>(m, k, i),
                        _ => {}
                    }
                }
            }
            assert_relative_eq!(c0, s0, epsilon = 1e-15);
            assert_relative_eq!(c1, s1, epsilon = 1e-15);
        }
    }

    #[test]
    fn awgn_limit_coefficients_give_half_at_zero_snr() {
        // With gamma -> 0 every Q tail is 1/2, so BER = sum F / 2 = 1/2.
        for m in [
            QamOrder::QPSK,
            QamOrder::QAM16,
            QamOrder::QAM64,
            QamOrder::QAM256,
        ] {
            let (b, _) = ber_from_gamma0(0.0f64, 10, 10, m).unwrap();
            assert_relative_eq!(b, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn b_value_matches_direct_binomial_sum() {
        for n in [1usize, 2, 5, 17, 40] {
            for c in [1e-3, 0.1, 1.0, 7.0, 55.0] {
                assert_relative_eq!(b_value(c, n), b_direct(c, n), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn single_branch_reduces_to_closed_form_rayleigh() {
        for c in [0.01f64, 0.5, 3.0, 1e4] {
            let mu = (c / (2.0 + c)).sqrt();
            assert_relative_eq!(b_value(c, 1), (1.0 - mu) / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn b_value_stays_accurate_at_high_snr() {
        // (1-mu)/2 ~ 1/(2c) for large c; the naive subtraction loses it.
        let c = 1e12f64;
        let b = b_value(c, 1);
        assert_relative_eq!(b, 1.0 / (2.0 * c), max_relative = 1e-9);
        assert!(b_value(1e3f64, 30) > 0.0);
    }

    #[test]
    fn large_diversity_order_does_not_overflow() {
        let b = b_value(0.2f64, 1025);
        assert!(b.is_finite() && b > 0.0 && b < 0.5);
    }

    #[test]
    fn qpsk_has_a_single_term() {
        let (ber, terms) = ber_from_gamma0(0.7f64, 30, 10, QamOrder::QPSK).unwrap();
        assert_eq!(terms.terms.len(), 1);
        assert_eq!(terms.terms[0].coefficient, 1.0);
        assert_eq!(ber, terms.b_values[0]);
    }

    #[test]
    fn two_term_equals_full_sum_for_qpsk() {
        let p = LinkParameters::new(64, 8, Some(16.0), 0.8, QamOrder::QPSK).unwrap();
        let q = QuantizerSpec::bits(2).unwrap();
        let full = ber_closed_form(&p, &q, CsiRegime::ImperfectCsiQuantized)
            .unwrap()
            .0;
        let two = ber_two_term(&p, &q, CsiRegime::ImperfectCsiQuantized).unwrap();
        assert_eq!(full, two);
    }

    #[test]
    fn truncation_error_is_small_for_256qam() {
        let q = QuantizerSpec::<f64>::bits(5).unwrap();
        for pu in [1.0, 10.0, 100.0] {
            let p = LinkParameters::new(256, 20, Some(20.0), pu, QamOrder::QAM256).unwrap();
            let full = ber_closed_form(&p, &q, CsiRegime::ImperfectCsiQuantized)
                .unwrap()
                .0;
            let two = ber_two_term(&p, &q, CsiRegime::ImperfectCsiQuantized).unwrap();
            assert!(
                ((two - full) / full).abs() < 0.05,
                "pu={pu}: {two} vs {full}"
            );
        }
    }

    #[test]
    fn mus_lie_in_unit_interval_and_b_in_half_open() {
        let (_, t) = ber_from_gamma0(0.3f64, 100, 20, QamOrder::QAM256).unwrap();
        assert!(t.mus.iter().all(|&m| m > 0.0 && m < 1.0));
        assert!(t.b_values.iter().all(|&b| b > 0.0 && b < 1.0));
        assert!(t.mus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mu_formula_matches_imperfect_quantized_form() {
        // Substituting the imperfect-CSI quantized gamma0 into the generic mu.
        let (pu, tau, k, alpha) = (0.8f64, 30.0, 12usize, 0.8825);
        let m = QamOrder::QAM64;
        let p = LinkParameters::new(80, k, Some(tau), pu, m).unwrap();
        let q = QuantizerSpec::with_alpha(crate::analytic::Resolution::Bits(2), alpha).unwrap();
        let g = gamma0(&p, &q, CsiRegime::ImperfectCsiQuantized)
            .unwrap()
            .gamma0;
        let l = 1.0 + (1.0 - alpha) / alpha * (k as f64 * pu + 1.0);
        for i in 0..3u32 {
            let a = 3.0 * ((2 * i + 1) as f64).powi(2) * pu * pu * tau;
            let direct = (a / (2.0 * 63.0 * l * (l + (k as f64 + tau) * pu) + a)).sqrt();
            assert_relative_eq!(mu(m, i, g), direct, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_more_users_than_antennas() {
        assert!(ber_from_gamma0(1.0f64, 3, 4, QamOrder::QPSK).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let b32 = b_value(2.0f32, 10);
        let b64 = b_value(2.0f64, 10);
        assert!((b32 as f64 / b64 - 1.0).abs() < 1e-5);
    }
}
