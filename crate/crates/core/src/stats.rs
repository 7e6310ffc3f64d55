//! Order-independent accumulation of Monte Carlo moments.
//!
//! Replications are grouped into fixed-size chunks; each chunk accumulates
//! its own compensated moments and chunks are merged in index order.  The
//! result is bit-identical whether chunks were computed serially or in
//! parallel.

/// Fixed replication chunk size shared by serial and parallel drivers.
pub const CHUNK: usize = 1024;

/// Running (count, mean, M2) with Neumaier-compensated mean updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: u64,
    mean: f64,
    comp: f64,
    m2: f64,
}

impl Default for Moments {
    fn default() -> Self {
        Moments {
            count: 0,
            mean: 0.0,
            comp: 0.0,
            m2: 0.0,
        }
    }
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        let upd = delta / self.count as f64;
        // compensated mean += upd
        let t = self.mean + upd;
        self.comp += if self.mean.abs() >= upd.abs() {
            (self.mean - t) + upd
        } else {
            (upd - t) + self.mean
        };
        self.mean = t;
        self.m2 += delta * (x - (self.mean + self.comp));
    }

    /// Chan's pairwise combine; call in fixed chunk order for determinism.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let d = other.corrected_mean() - self.corrected_mean();
        let n = n1 + n2;
        let mean = self.corrected_mean() + d * (n2 / n);
        self.m2 += other.m2 + d * d * (n1 * n2 / n);
        self.mean = mean;
        self.comp = 0.0;
        self.count += other.count;
    }

    fn corrected_mean(&self) -> f64 {
        self.mean + self.comp
    }

    pub fn mean(&self) -> f64 {
        self.corrected_mean()
    }

    /// Sample variance (n-1 denominator).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count as f64 - 1.0)).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        #[allow(unused_imports)]
        use num_traits::Float;
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Splits `reps` into `[start, end)` chunk ranges of size [`CHUNK`].
pub fn chunk_ranges(reps: u64) -> impl Iterator<Item = (u64, u64)> {
    let c = CHUNK as u64;
    let n_chunks = reps.div_ceil(c);
    (0..n_chunks).map(move |i| (i * c, ((i + 1) * c).min(reps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_match_direct() {
        let xs: alloc::vec::Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.13).collect();
        let mut m = Moments::default();
        for &x in &xs {
            m.push(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        assert_abs_diff_eq!(m.mean(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance(), var, epsilon = 1e-9);
    }

    #[test]
    fn merge_equals_serial() {
        let xs: alloc::vec::Vec<f64> = (0..4096).map(|i| (i as f64).sin()).collect();
        let mut serial = Moments::default();
        for &x in &xs {
            serial.push(x);
        }
        let mut merged = Moments::default();
        for chunk in xs.chunks(CHUNK) {
            let mut m = Moments::default();
            for &x in chunk {
                m.push(x);
            }
            merged.merge(&m);
        }
        assert_abs_diff_eq!(serial.mean(), merged.mean(), epsilon = 1e-14);
        assert_abs_diff_eq!(serial.variance(), merged.variance(), epsilon = 1e-10);
    }
}
