//! Deterministic streaming statistics.
//!
//! Monte Carlo reductions are performed per fixed-size block of consecutive
//! sample indices and then combined in block order, so the result is
//! bit-identical for a given seed regardless of thread count.

/// Running mean / second-moment accumulator (Welford form), combinable in a
/// fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Merges `other` on the right; merge order is part of the determinism
    /// contract, so callers combine blocks in index order.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let total = n1 + n2;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.n += other.n;
    }

    #[inline]
    pub fn count(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Fixed-size block accumulator for vector-valued samples: each component is
/// tracked independently; blocks merge in index order.
#[derive(Debug, Clone)]
pub struct VectorStats<const D: usize> {
    pub comps: [RunningStats; D],
}

impl<const D: usize> Default for VectorStats<D> {
    fn default() -> Self {
        Self {
            comps: [RunningStats::default(); D],
        }
    }
}

impl<const D: usize> VectorStats<D> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: [f64; D]) {
        for (s, v) in self.comps.iter_mut().zip(x) {
            s.push(v);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.merge(b);
        }
    }

    pub fn mean(&self) -> [f64; D] {
        let mut out = [0.0; D];
        for (o, s) in out.iter_mut().zip(&self.comps) {
            *o = s.mean();
        }
        out
    }

    pub fn std_error(&self) -> [f64; D] {
        let mut out = [0.0; D];
        for (o, s) in out.iter_mut().zip(&self.comps) {
            *o = s.std_error();
        }
        out
    }
}

/// Default number of consecutive sample indices per reduction block.
pub const BLOCK_SIZE: u64 = 4096;

/// Splits `[0, total)` into consecutive index blocks of `block` samples.
pub fn block_ranges(total: u64, block: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + block).min(total);
        out.push((start, end));
        start = end;
    }
    out
}
