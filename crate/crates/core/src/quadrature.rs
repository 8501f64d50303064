//! Adaptive 15-point Gauss-Kronrod integration.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Segment<T> {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod += s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += s * T::lit(WG[j / 2]);
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` by bisecting the worst segment until the
/// summed error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_segments: usize,
) -> Result<T> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(T::zero());
    }
    let mut segments = vec![gk15(&mut f, a, b)];
    loop {
        let value: T = segments.iter().map(|s| s.value).sum();
        let error: T = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::numeric(
                "quadrature",
                "integrand produced a non-finite value",
            ));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(value);
        }
        if segments.len() >= max_segments {
            return Err(Error::numeric(
                "quadrature",
                format!(
                    "no convergence after {} segments on [{a}, {b}]: value {value}, error estimate {error}",
                    segments.len()
                ),
            ));
        }
        let (worst, _) =
            segments
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(wi, we), (i, s)| {
                    if s.error > we {
                        (i, s.error)
                    } else {
                        (wi, we)
                    }
                });
        let s = segments.swap_remove(worst);
        let mid = (s.a + s.b) * T::lit(0.5);
        segments.push(gk15(&mut f, s.a, mid));
        segments.push(gk15(&mut f, mid, s.b));
    }
}
