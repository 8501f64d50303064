//! Design-space searches on top of the analytic BER.
//!
//! All searches assume the BER is monotone: decreasing in power, in pilot
//! length and in antennas, increasing in users. By default they evaluate the
//! two-term expression; [`BerExpression::FullSum`] switches to the full sum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    ber, ber_from_gamma0, ebn0_to_pu, gamma0_asymptote, BerExpression, Ceiling, CsiRegime,
    LinkParameters, QamOrder, QuantizerSpec,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const EBN0_MIN_DB: f64 = -60.0;
pub const EBN0_MAX_DB: f64 = 60.0;
pub const EBN0_TOL_DB: f64 = 0.01;
pub const ANTENNA_CAP: usize = 4096;

/// Search result that may have no solution in range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility<T> {
    Feasible(T),
    Infeasible,
}

impl<T: Copy> Feasibility<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Analytic model a search evaluates: CSI regime and BER expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub estimated_csi: bool,
    pub expression: BerExpression,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            estimated_csi: true,
            expression: BerExpression::TwoTerm,
        }
    }
}

impl Model {
    pub fn full_sum(mut self) -> Self {
        self.expression = BerExpression::FullSum;
        self
    }

    pub fn perfect_csi(mut self) -> Self {
        self.estimated_csi = false;
        self
    }

    fn regime<T: Real>(&self, quant: &QuantizerSpec<T>) -> CsiRegime {
        CsiRegime::for_quantizer(self.estimated_csi, quant)
    }

    pub fn ber<T: Real>(&self, params: &LinkParameters<T>, quant: &QuantizerSpec<T>) -> Result<T> {
        ber(params, quant, self.regime(quant), self.expression)
    }
}

fn check_target<T: Real>(target: T) -> Result<()> {
    if target > T::zero() && target < T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "target BER {target} must lie in (0, 0.5)"
        )))
    }
}

fn ber_at_ebn0<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    model: Model,
    ebn0_db: T,
) -> Result<T> {
    let p = params.with_tx_power(ebn0_to_pu(ebn0_db, params.mod_order));
    model.ber(&p, quant)
}

/// True when even the power-limit SINR misses the target.
fn ceiling_blocks<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    model: Model,
    target: T,
) -> Result<bool> {
    let tau = if model.estimated_csi {
        params.pilot_len
    } else {
        None
    };
    match gamma0_asymptote(quant, params.n_users, tau)? {
        Ceiling::Unbounded => Ok(false),
        Ceiling::Finite(g) => {
            let limit = match model.expression {
                BerExpression::FullSum => {
                    ber_from_gamma0(g, params.n_antennas, params.n_users, params.mod_order)?.0
                }
                BerExpression::TwoTerm => crate::analytic::ber_two_term_from_gamma0(
                    g,
                    params.n_antennas - params.n_users + 1,
                    params.mod_order,
                ),
            };
            Ok(limit > target)
        }
    }
}

/// Smallest Eb/N0 (dB) meeting `target`, to 0.01 dB, searched on [-60, 60].
/// The upper end of the final bracket is returned, so the point is feasible.
pub fn required_ebn0<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    target: T,
    model: Model,
) -> Result<Feasibility<T>> {
    check_target(target)?;
    params.validate()?;
    if ceiling_blocks(params, quant, model, target)? {
        return Ok(Feasibility::Infeasible);
    }
    let (mut lo, mut hi) = (T::lit(EBN0_MIN_DB), T::lit(EBN0_MAX_DB));
    if ber_at_ebn0(params, quant, model, hi)? > target {
        return Ok(Feasibility::Infeasible);
    }
    if ber_at_ebn0(params, quant, model, lo)? <= target {
        return Ok(Feasibility::Feasible(lo));
    }
    let tol = T::lit(EBN0_TOL_DB);
    while hi - lo > tol {
        let mid = (lo + hi) * T::lit(0.5);
        if ber_at_ebn0(params, quant, model, mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Feasibility::Feasible(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityPoint<T> {
    pub pilot_len: T,
    /// `None` where no power meets the target.
    pub ebn0_db: Option<T>,
    pub feasible: bool,
}

/// Required Eb/N0 along a grid of pilot lengths.
pub fn frontier_tau_power<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    target: T,
    tau_grid: &[T],
    model: Model,
) -> Result<Vec<FeasibilityPoint<T>>> {
    let k = T::lit(params.n_users as f64);
    if let Some(&bad) = tau_grid.iter().find(|&&t| !(t >= k)) {
        return Err(Error::invalid(format!(
            "pilot length {bad} is shorter than K"
        )));
    }
    tau_grid
        .par_iter()
        .map(|&tau| {
            let r = required_ebn0(&params.with_pilot_len(tau), quant, target, model)?;
            Ok(FeasibilityPoint {
                pilot_len: tau,
                ebn0_db: r.value(),
                feasible: r.is_feasible(),
            })
        })
        .collect()
}

fn meets<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    model: Model,
    target: T,
) -> Result<bool> {
    Ok(model.ber(params, quant)? <= target)
}

/// Fewest antennas meeting `target` at `ebn0_db`; `params.n_antennas` is
/// ignored. Searches up to `cap` antennas.
pub fn min_antennas<T: Real>(
    params: &LinkParameters<T>,
    quant: &QuantizerSpec<T>,
    target: T,
    ebn0_db: T,
    cap: usize,
    model: Model,
) -> Result<Feasibility<usize>> {
    check_target(target)?;
    let k = params.n_users;
    if cap < k {
        return Err(Error::invalid("antenna cap is below the number of users"));
    }
    let base = params
        .with_antennas(k)
        .with_tx_power(ebn0_to_pu(ebn0_db, params.mod_order));
    let ok = |n: usize| meets(&base.with_antennas(n), quant, model, target);
    if ok(k)? {
        return Ok(Feasibility::Feasible(k));
    }
    // ok(lo) is false, ok(hi) true once bracketed
    let mut lo = k;
    let mut hi = (2 * k).max(k + 1).min(cap);
    loop {
        if ok(hi)? {
            break;
        }
        if hi == cap {
            return Ok(Feasibility::Infeasible);
        }
        lo = hi;
        hi = (2 * hi).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Feasibility::Feasible(hi))
}

/// Most users meeting `target`, searched over `1..=min(N, floor(tau))`.
/// Zero when even a single user misses.
pub fn max_users<T: Real>(
    n_antennas: usize,
    quant: &QuantizerSpec<T>,
    pilot_len: T,
    mod_order: QamOrder,
    target: T,
    ebn0_db: T,
    model: Model,
) -> Result<usize> {
    check_target(target)?;
    let tau_cap = pilot_len.floor().to_usize().unwrap_or(0);
    let k_cap = n_antennas.min(tau_cap);
    if k_cap == 0 {
        return Err(Error::invalid("need at least one antenna and pilot symbol"));
    }
    let pu = ebn0_to_pu(ebn0_db, mod_order);
    let base = LinkParameters::new(n_antennas, 1, Some(pilot_len), pu, mod_order)?;
    let ok = |k: usize| meets(&base.with_users(k), quant, model, target);
    if !ok(1)? {
        return Ok(0);
    }
    if ok(k_cap)? {
        return Ok(k_cap);
    }
    let (mut lo, mut hi) = (1, k_cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Receiver power budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Figure of merit, J per conversion step.
    pub fom: f64,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
    /// RF chain power per antenna, W.
    pub rf_per_antenna: f64,
    /// Fixed overhead, W.
    pub static_power: f64,
    /// Watts per unit of linear `p_u`.
    pub noise_ref: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            fom: 1432.1e-15,
            sample_rate: 100e6,
            rf_per_antenna: 0.0,
            static_power: 0.0,
            noise_ref: 1e-3,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.fom,
            self.sample_rate,
            self.rf_per_antenna,
            self.static_power,
            self.noise_ref,
        ];
        if all.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(
                "power model entries must be finite and non-negative",
            ))
        }
    }

    /// Power of one ADC at `bits`: `FOM f_s 2^b`.
    pub fn adc_power(&self, bits: u32) -> f64 {
        self.fom * self.sample_rate * 2f64.powi(bits as i32)
    }
}

/// `K p_u noise_ref + N (2 P_ADC + P_RF) + P_other`.
pub fn total_power(
    model: &PowerModel,
    n_antennas: usize,
    n_users: usize,
    pu: f64,
    bits: u32,
) -> Result<f64> {
    model.validate()?;
    Ok(n_users as f64 * pu * model.noise_ref
        + n_antennas as f64 * (2.0 * model.adc_power(bits) + model.rf_per_antenna)
        + model.static_power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n_antennas: usize,
    /// `None` marks an infeasible `(b, N)` pair.
    pub ebn0_db: Option<f64>,
    pub pu: Option<f64>,
    pub total_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub bits: u32,
    pub points: Vec<PowerPoint>,
}

/// Sign change of `P_lower - P_upper` between adjacent resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub lower_bits: u32,
    pub upper_bits: u32,
    /// First antenna count after the change of sign.
    pub n_antennas: usize,
    /// True when the lower resolution becomes the cheaper one.
    pub lower_becomes_cheaper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudy {
    pub curves: Vec<PowerCurve>,
    /// `(bits, N, P_total)` of the cheapest feasible point.
    pub optimum: Option<(u32, usize, f64)>,
    pub crossings: Vec<Crossing>,
}

/// Settings shared by the power sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSweep {
    pub n_users: usize,
    pub pilot_len: f64,
    pub mod_order: QamOrder,
    pub target: f64,
    pub model: Model,
}

fn power_curve(
    sweep: &PowerSweep,
    power: &PowerModel,
    bits: u32,
    n_range: &[usize],
) -> Result<PowerCurve> {
    let quant = QuantizerSpec::<f64>::bits(bits)?;
    let points = n_range
        .par_iter()
        .map(|&n| {
            let params = LinkParameters::new(
                n,
                sweep.n_users,
                Some(sweep.pilot_len),
                1.0,
                sweep.mod_order,
            )?;
            let e = required_ebn0(&params, &quant, sweep.target, sweep.model)?.value();
            let pu = e.map(|e| ebn0_to_pu(e, sweep.mod_order));
            let total = pu
                .map(|pu| total_power(power, n, sweep.n_users, pu, bits))
                .transpose()?;
            Ok(PowerPoint {
                n_antennas: n,
                ebn0_db: e,
                pu,
                total_power: total,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerCurve { bits, points })
}

/// The sign test uses only the terms that differ between the two curves, so
/// `P_RF` and `P_other` cannot perturb it through rounding.
fn crossings_between(
    power: &PowerModel,
    n_users: usize,
    lower: &PowerCurve,
    upper: &PowerCurve,
) -> Vec<Crossing> {
    let adc_gap = 2.0 * (power.adc_power(upper.bits) - power.adc_power(lower.bits));
    let mut out = Vec::new();
    let mut prev: Option<bool> = None;
    for (a, b) in lower.points.iter().zip(&upper.points) {
        let (Some(pa), Some(pb)) = (a.pu, b.pu) else {
            continue;
        };
        let tx_gap = n_users as f64 * power.noise_ref * (pa - pb);
        let cheaper = tx_gap < a.n_antennas as f64 * adc_gap;
        if let Some(p) = prev {
            if p != cheaper {
                out.push(Crossing {
                    lower_bits: lower.bits,
                    upper_bits: upper.bits,
                    n_antennas: a.n_antennas,
                    lower_becomes_cheaper: cheaper,
                });
            }
        }
        prev = Some(cheaper);
    }
    out
}

/// Total-power curves over `n_range` for each resolution in `bits`, their
/// minimum and the crossings of adjacent curves.
pub fn power_optimal_resolution(
    power: &PowerModel,
    sweep: &PowerSweep,
    bits: &[u32],
    n_range: &[usize],
) -> Result<PowerStudy> {
    power.validate()?;
    check_target(sweep.target)?;
    if bits.is_empty() || n_range.is_empty() {
        return Err(Error::invalid("empty resolution or antenna range"));
    }
    let mut bits = bits.to_vec();
    bits.sort_unstable();
    bits.dedup();
    let curves = bits
        .iter()
        .map(|&b| power_curve(sweep, power, b, n_range))
        .collect::<Result<Vec<_>>>()?;
    let optimum = curves
        .iter()
        .flat_map(|c| {
            c.points
                .iter()
                .filter_map(move |p| p.total_power.map(|t| (c.bits, p.n_antennas, t)))
        })
        .fold(None, |best: Option<(u32, usize, f64)>, cand| match best {
            Some(b) if b.2 <= cand.2 => Some(b),
            _ => Some(cand),
        });
    let crossings = curves
        .windows(2)
        .flat_map(|w| crossings_between(power, sweep.n_users, &w[0], &w[1]))
        .collect();
    Ok(PowerStudy {
        curves,
        optimum,
        crossings,
    })
}

/// `noise_ref` that puts the crossing of the `bits` and `bits + 1` curves at
/// exactly `n_antennas`. At fixed `N` the two totals differ by
/// `K noise_ref (pu_b - pu_{b+1}) - 2 N (P_ADC(b+1) - P_ADC(b))`.
pub fn calibrate_noise_ref(
    power: &PowerModel,
    sweep: &PowerSweep,
    bits: u32,
    n_antennas: usize,
) -> Result<f64> {
    let pu_at = |b: u32| -> Result<f64> {
        let params = LinkParameters::new(
            n_antennas,
            sweep.n_users,
            Some(sweep.pilot_len),
            1.0,
            sweep.mod_order,
        )?;
        let q = QuantizerSpec::bits(b)?;
        match required_ebn0(&params, &q, sweep.target, sweep.model)? {
            Feasibility::Feasible(e) => Ok(ebn0_to_pu(e, sweep.mod_order)),
            Feasibility::Infeasible => Err(Error::invalid(format!(
                "{b}-bit receiver cannot reach the target with {n_antennas} antennas"
            ))),
        }
    };
    let (lo, hi) = (pu_at(bits)?, pu_at(bits + 1)?);
    if !(lo > hi) {
        return Err(Error::invalid(
            "the lower resolution does not need more power; no crossing",
        ));
    }
    let adc_gap = power.adc_power(bits + 1) - power.adc_power(bits);
    Ok(2.0 * n_antennas as f64 * adc_gap / (sweep.n_users as f64 * (lo - hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn link(n: usize, k: usize, tau: f64, m: QamOrder) -> LinkParameters<f64> {
        LinkParameters::new(n, k, Some(tau), 1.0, m).unwrap()
    }

    fn q(b: u32) -> QuantizerSpec<f64> {
        QuantizerSpec::bits(b).unwrap()
    }

    #[test]
    fn scenario_one_points() {
        let fp = QuantizerSpec::full_precision();
        let e = required_ebn0(
            &link(256, 20, 20.0, QamOrder::QAM16),
            &fp,
            1e-3,
            Model::default(),
        )
        .unwrap();
        assert!((e.value().unwrap() + 12.9).abs() < 0.1, "{e:?}");
        let e = required_ebn0(
            &link(256, 20, 50.0, QamOrder::QAM16),
            &q(3),
            1e-3,
            Model::default(),
        )
        .unwrap();
        assert!((e.value().unwrap() + 13.4).abs() < 0.1, "{e:?}");
    }

    #[test]
    fn one_bit_sixteen_qam_cannot_reach_one_percent() {
        let e = required_ebn0(
            &link(256, 20, 20.0, QamOrder::QAM16),
            &q(1),
            1e-2,
            Model::default(),
        )
        .unwrap();
        assert_eq!(e, Feasibility::Infeasible);
    }

    #[test]
    fn returned_point_meets_target() {
        let p = link(128, 10, 15.0, QamOrder::QAM64);
        let m = Model::default();
        let e = required_ebn0(&p, &q(4), 1e-3, m).unwrap().value().unwrap();
        assert!(ber_at_ebn0(&p, &q(4), m, e).unwrap() <= 1e-3);
        assert!(ber_at_ebn0(&p, &q(4), m, e - 0.011).unwrap() > 1e-3);
    }

    #[test]
    fn antenna_brackets_are_tight() {
        let p = link(20, 20, 30.0, QamOrder::QAM16);
        let m = Model::default();
        for (b, want) in [(2u32, 308usize), (3, 141), (4, 98)] {
            let n = min_antennas(&p, &q(b), 1e-3, -8.0, ANTENNA_CAP, m)
                .unwrap()
                .value()
                .unwrap();
            assert!((n as i64 - want as i64).abs() <= 2, "b={b}: {n}");
            let at = |n: usize| ber_at_ebn0(&p.with_antennas(n), &q(b), m, -8.0).unwrap();
            assert!(at(n) <= 1e-3 && at(n - 1) > 1e-3);
        }
        let fp = min_antennas(
            &p,
            &QuantizerSpec::full_precision(),
            1e-3,
            -8.0,
            ANTENNA_CAP,
            m,
        )
        .unwrap();
        assert!(fp.value().unwrap() < 98);
        assert_eq!(
            min_antennas(&p, &q(1), 1e-3, -40.0, 64, m).unwrap(),
            Feasibility::Infeasible
        );
    }

    #[test]
    fn user_brackets_are_tight() {
        let m = Model::default();
        let k = max_users(256, &q(3), 40.0, QamOrder::QAM16, 1e-4, -10.7, m).unwrap();
        assert_eq!(k, 20);
        let at =
            |k: usize| ber_at_ebn0(&link(256, k, 40.0, QamOrder::QAM16), &q(3), m, -10.7).unwrap();
        assert!(at(k) <= 1e-4 && at(k + 1) > 1e-4);
        assert_eq!(
            max_users(256, &q(1), 40.0, QamOrder::QAM16, 1e-4, -60.0, m).unwrap(),
            0
        );
        for e in [-10.0, 0.0, 30.0] {
            assert!(max_users(256, &q(2), 40.0, QamOrder::QAM16, 1e-4, e, m).unwrap() < 20);
        }
    }

    #[test]
    fn adc_power_constants() {
        let pm = PowerModel::default();
        assert!((pm.adc_power(3) - 1.1457e-3).abs() < 1e-7);
        assert!((pm.adc_power(1) - 0.2864e-3).abs() < 1e-7);
        assert_eq!(total_power(&pm, 0, 0, 5.0, 3).unwrap(), 0.0);
        let busy = PowerModel {
            static_power: 2.5,
            ..pm
        };
        assert_eq!(total_power(&busy, 0, 0, 5.0, 3).unwrap(), 2.5);
        assert!(total_power(&PowerModel { fom: -1.0, ..pm }, 1, 1, 1.0, 1).is_err());
    }

    fn qpsk_sweep() -> PowerSweep {
        PowerSweep {
            n_users: 20,
            pilot_len: 40.0,
            mod_order: QamOrder::QPSK,
            target: 1e-3,
            model: Model::default(),
        }
    }

    #[test]
    fn calibrated_crossing_lands_on_request() {
        let sweep = qpsk_sweep();
        let mut pm = PowerModel::default();
        pm.noise_ref = calibrate_noise_ref(&pm, &sweep, 1, 300).unwrap();
        let ns: Vec<usize> = (280..=320).collect();
        let study = power_optimal_resolution(&pm, &sweep, &[1, 2], &ns).unwrap();
        let c: Vec<_> = study.crossings.iter().collect();
        assert_eq!(c.len(), 1);
        assert!((c[0].n_antennas as i64 - 300).abs() <= 1, "{c:?}");
        assert!(c[0].lower_becomes_cheaper);
    }

    #[test]
    fn adc_dominated_optimum_is_lowest_feasible_resolution() {
        let sweep = qpsk_sweep();
        let pm = PowerModel {
            noise_ref: 0.0,
            ..PowerModel::default()
        };
        let ns: Vec<usize> = (260..=300).step_by(10).collect();
        let study = power_optimal_resolution(&pm, &sweep, &[1, 2, 3], &ns).unwrap();
        assert_eq!(study.optimum.unwrap().0, 1);
    }

    #[test]
    fn frontier_flags_two_bit_points() {
        let p = link(256, 40, 40.0, QamOrder::QAM16);
        let pts =
            frontier_tau_power(&p, &q(2), 1e-4, &[40.0, 80.0, 200.0], Model::default()).unwrap();
        assert!(pts.iter().all(|p| !p.feasible && p.ebn0_db.is_none()));
        assert!(frontier_tau_power(&p, &q(2), 1e-4, &[10.0], Model::default()).is_err());
        assert!(required_ebn0(&p, &q(2), 0.5, Model::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn frontier_is_monotone(k in 2usize..24, extra in 0usize..200, b in 2u32..6, m in 0usize..3) {
            let m = [QamOrder::QPSK, QamOrder::QAM16, QamOrder::QAM64][m];
            let p = link(k + extra + 8, k, k as f64, m);
            let taus: Vec<f64> = (0..5).map(|i| k as f64 * (1.0 + 0.75 * i as f64)).collect();
            let target = 1e-3;
            let model = Model::default();
            let lo = frontier_tau_power(&p, &q(b), target, &taus, model).unwrap();
            let hi = frontier_tau_power(&p, &q(b + 1), target, &taus, model).unwrap();
            let tol = EBN0_TOL_DB + 1e-9;
            for w in lo.windows(2) {
                if let (Some(a), Some(c)) = (w[0].ebn0_db, w[1].ebn0_db) {
                    prop_assert!(c <= a + tol);
                }
                prop_assert!(!(w[0].feasible && !w[1].feasible));
            }
            for (a, c) in lo.iter().zip(&hi) {
                match (a.ebn0_db, c.ebn0_db) {
                    (Some(a), Some(c)) => prop_assert!(c <= a + tol),
                    (Some(_), None) => prop_assert!(false, "higher resolution infeasible"),
                    _ => {}
                }
            }
        }

        #[test]
        fn feasible_points_meet_target(k in 1usize..30, extra in 0usize..300, b in 1u32..6, t in 0.0f64..2.0, lt in -5.0f64..-1.5) {
            let target = 10f64.powf(lt);
            let p = link(k + extra, k, k as f64 * (1.0 + t), QamOrder::QAM16);
            let model = Model::default();
            if let Feasibility::Feasible(e) = required_ebn0(&p, &q(b), target, model).unwrap() {
                let got = ber_at_ebn0(&p, &q(b), model, e).unwrap();
                prop_assert!(got <= target * 1.02);
            }
        }

        #[test]
        fn crossings_ignore_rf_and_static_power(rf in 0.0f64..0.5, st in 0.0f64..50.0) {
            let sweep = qpsk_sweep();
            let ns: Vec<usize> = (240..=280).step_by(4).collect();
            let base = PowerModel { noise_ref: 0.0102, ..PowerModel::default() };
            let a = power_optimal_resolution(&base, &sweep, &[1, 2], &ns).unwrap();
            let moved = PowerModel { rf_per_antenna: rf, static_power: st, ..base };
            let b = power_optimal_resolution(&moved, &sweep, &[1, 2], &ns).unwrap();
            prop_assert_eq!(a.crossings, b.crossings);
        }
    }
}
