use crate::error::{Error, Result};

/// Uniform collocated grid on the unit torus [0,1)^3.
///
/// The period is fixed at 1: all internal computation is carried out in
/// dimensionless variables (unit box, viscosity 1/2), and physical scales
/// enter only through the scaling map in the iteration driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    /// Creates a grid with `n` samples per axis. `n` must be even and >= 4
    /// (power-of-two sizes are fastest, but any even size transforms).
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::BadGridSize(n));
        }
        Ok(Self { n })
    }

    /// Samples per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Torus period (always exactly 1).
    #[inline]
    pub fn period(&self) -> f64 {
        1.0
    }

    /// Grid spacing 1/n; spacing * n equals the period exactly.
    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of sample points n^3.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of the sample at integer coordinates (i1, i2, i3),
    /// row-major with x3 fastest.
    #[inline]
    pub fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n + i2) * self.n + i3
    }

    /// Physical coordinates of the sample at (i1, i2, i3).
    #[inline]
    pub fn point(&self, i1: usize, i2: usize, i3: usize) -> [f64; 3] {
        let h = self.spacing();
        [i1 as f64 * h, i2 as f64 * h, i3 as f64 * h]
    }

    /// Signed integer wavenumber for FFT bin `i`, in (-n/2, n/2].
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Largest wavenumber kept by the 2/3-rule dealiasing mask.
    ///
    /// Products of two fields supported on |k| <= keep alias onto
    /// wavenumbers of magnitude >= n - 2*keep > keep, so the kept band is
    /// exactly alias-free for quadratic nonlinearities.
    #[inline]
    pub fn dealias_keep(&self) -> i64 {
        (self.n as i64 + 2) / 3 - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_odd_sizes() {
        assert!(GridSpec::new(2).is_err());
        assert!(GridSpec::new(7).is_err());
        assert!(GridSpec::new(0).is_err());
        assert!(GridSpec::new(4).is_ok());
        assert!(GridSpec::new(48).is_ok());
    }

    #[test]
    fn spacing_times_n_is_exact() {
        for n in [4, 8, 16, 32, 48, 64] {
            let g = GridSpec::new(n).unwrap();
            assert_eq!(g.spacing() * g.n() as f64, 1.0);
        }
    }

    #[test]
    fn wavenumbers_cover_half_open_band() {
        let g = GridSpec::new(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn dealias_band_is_alias_free() {
        // Aliased images of |k| <= 2*keep must land outside |k| <= keep.
        for n in [4, 8, 16, 32, 48, 64] {
            let g = GridSpec::new(n).unwrap();
            let keep = g.dealias_keep();
            assert!(keep >= 1, "n = {n} keeps at least one mode");
            assert!(
                n as i64 - 2 * keep > keep,
                "n = {n}, keep = {keep}: alias collision"
            );
        }
    }
}
