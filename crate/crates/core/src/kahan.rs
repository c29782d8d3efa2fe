use num_complex::Complex64;

/// Kahan compensated accumulator for complex terms, added in call order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: Complex64,
    compensation: Complex64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: Complex64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

impl core::iter::FromIterator<Complex64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let terms = core::iter::once(Complex64::new(1.0, 0.0))
            .chain(core::iter::repeat_n(Complex64::new(1e-16, 1e-16), 10_000));
        let naive: Complex64 = terms.clone().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        let kahan: KahanSum = terms.collect();
        assert_eq!(naive.re, 1.0);
        assert!((kahan.value().re - (1.0 + 1e-12)).abs() < 1e-15);
        assert!((kahan.value().im - 1e-12).abs() < 1e-24);
    }
}
