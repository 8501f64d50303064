use num_complex::Complex;

use crate::analytic::QamOrder;
use crate::scalar::Real;

#[inline]
fn gray(j: u32) -> u32 {
    j ^ (j >> 1)
}

/// Gray-labelled square QAM with unit mean energy. Each rail carries
/// `log2(sqrt(M))` bits; the in-phase bits are the high half of the label.
#[derive(Debug, Clone, Copy)]
pub struct GrayQamMapper<T> {
    mod_order: QamOrder,
    side: u32,
    /// Half the spacing between adjacent rail levels.
    d: T,
}

impl<T: Real> GrayQamMapper<T> {
    pub fn new(mod_order: QamOrder) -> Self {
        let m = mod_order.get() as f64;
        Self {
            mod_order,
            side: mod_order.side(),
            d: T::lit((1.5 / (m - 1.0)).sqrt()),
        }
    }

    pub fn mod_order(&self) -> QamOrder {
        self.mod_order
    }

    /// Rail amplitude for level index `j` in `0..side`.
    #[inline]
    pub fn rail_level(&self, j: u32) -> T {
        T::lit((2 * j) as f64 - (self.side - 1) as f64) * self.d
    }

    /// Nearest level index to `x`.
    #[inline]
    pub fn rail_index(&self, x: T) -> u32 {
        let s = T::lit((self.side - 1) as f64);
        let j = ((x / self.d + s) * T::lit(0.5)).round();
        if !(j > T::zero()) {
            0
        } else if j >= s {
            self.side - 1
        } else {
            j.to_u32().unwrap_or(0)
        }
    }

    #[inline]
    pub fn rail_label(&self, j: u32) -> u32 {
        gray(j)
    }

    /// Symbol for rail indices `(i, q)`.
    #[inline]
    pub fn symbol(&self, ji: u32, jq: u32) -> Complex<T> {
        Complex::new(self.rail_level(ji), self.rail_level(jq))
    }

    /// Full Gray label of a symbol given its rail indices.
    #[inline]
    pub fn label(&self, ji: u32, jq: u32) -> u32 {
        (gray(ji) << self.mod_order.bits_per_rail()) | gray(jq)
    }

    /// Bit errors between a transmitted index pair and the decision on `z`.
    #[inline]
    pub fn bit_errors(&self, ji: u32, jq: u32, z: Complex<T>) -> u32 {
        let (ri, rq) = (self.rail_index(z.re), self.rail_index(z.im));
        (gray(ji) ^ gray(ri)).count_ones() + (gray(jq) ^ gray(rq)).count_ones()
    }

    /// Every constellation point with its label.
    pub fn constellation(&self) -> Vec<(Complex<T>, u32)> {
        let mut pts = Vec::with_capacity(self.mod_order.get() as usize);
        for ji in 0..self.side {
            for jq in 0..self.side {
                pts.push((self.symbol(ji, jq), self.label(ji, jq)));
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy_and_gray_neighbours() {
        for m in [4u32, 16, 64, 256] {
            let q = GrayQamMapper::<f64>::new(QamOrder::new(m).unwrap());
            let pts = q.constellation();
            let e: f64 = pts.iter().map(|(s, _)| s.norm_sqr()).sum::<f64>() / m as f64;
            assert!((e - 1.0).abs() < 1e-14, "M={m}");
            let mut labels: Vec<u32> = pts.iter().map(|p| p.1).collect();
            labels.sort_unstable();
            labels.dedup();
            assert_eq!(labels.len(), m as usize);
            let side = q.mod_order().side();
            for j in 0..side - 1 {
                assert_eq!((q.rail_label(j) ^ q.rail_label(j + 1)).count_ones(), 1);
            }
        }
    }

    #[test]
    fn threshold_demapping() {
        let q = GrayQamMapper::<f64>::new(QamOrder::QAM16);
        for ji in 0..4 {
            for jq in 0..4 {
                let s = q.symbol(ji, jq);
                assert_eq!(q.bit_errors(ji, jq, s), 0);
                assert_eq!(
                    q.bit_errors(ji, jq, s * 0.999 + Complex::new(0.01, -0.01)),
                    0
                );
            }
        }
        assert_eq!(q.rail_index(100.0), 3);
        assert_eq!(q.rail_index(-100.0), 0);
        // outermost to innermost neighbour flips one bit
        assert_eq!(q.bit_errors(0, 0, q.symbol(1, 0)), 1);
        assert_eq!(q.bit_errors(0, 0, q.symbol(3, 3)), 2);
    }
}
