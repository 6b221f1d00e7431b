//! Deterministic splittable pseudo-random streams.
//!
//! Every stochastic component of the pipeline draws from a [`Stream`] derived
//! from the run seed plus a tag path, e.g. `(seed, orbit, arc)` for the
//! simulator or `(seed, tree index)` for forest training. Derivation is
//! algebraic, so parallel consumers never share state and serial/parallel
//! runs produce bit-identical results.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood's `mix64` finalizer over
//! a Weyl sequence with increment 0x9E3779B97F4A7C15). Any implementation in
//! any language that reproduces these constants reproduces every draw
//! bit-for-bit; the only caveat is the Poisson sampler, which calls `exp`
//! once per <= 30-rate chunk and therefore assumes a correctly rounded
//! (or cross-platform-identical) `exp`.

const WEYL: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    /// Root stream for a user seed.
    pub fn new(seed: u64) -> Self {
        Stream { state: mix64(seed) }
    }

    /// Derive an independent child stream from a tag path.
    ///
    /// Child state = fold of `mix64(state + WEYL ^ mix64(tag + WEYL))` over
    /// the tags, so `derive(s, &[a])` and `derive(s, &[a, b])` never collide
    /// and tag order matters.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut s = mix64(seed);
        for &tag in path {
            s = mix64(s.wrapping_add(WEYL) ^ mix64(tag.wrapping_add(WEYL)));
        }
        Stream { state: s }
    }

    /// Child stream of this stream (keyed, not positional).
    pub fn child(&self, tag: u64) -> Self {
        Stream {
            state: mix64(self.state.wrapping_add(WEYL) ^ mix64(tag.wrapping_add(WEYL))),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(WEYL);
        mix64(self.state)
    }

    /// Uniform in [0, 1): top 53 bits scaled by 2^-53.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Plain modulo; the bias is < n / 2^64 and
    /// irrelevant at our n, while staying trivially portable.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Poisson draw via Knuth's product method, chunked so the per-chunk
    /// rate stays <= 30 (keeps exp(-rate) far from underflow and bounds the
    /// expected draw count). Poisson additivity makes the chunked sum exact
    /// in distribution.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        debug_assert!(lambda >= 0.0 && lambda.is_finite());
        let mut total = 0u64;
        let mut remaining = lambda;
        while remaining > 30.0 {
            total += self.poisson_small(30.0);
            remaining -= 30.0;
        }
        total + self.poisson_small(remaining)
    }

    fn poisson_small(&mut self, lambda: f64) -> u64 {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut p = 1.0f64;
        loop {
            p *= self.next_f64();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Partial Fisher-Yates: draw `k` distinct values from `0..n`.
    /// Consumes exactly `k` generator steps; output order is the draw order.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic() {
        let mut a = Stream::new(42);
        let mut b = Stream::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_streams_differ_by_path() {
        let mut a = Stream::derive(7, &[1]);
        let mut b = Stream::derive(7, &[2]);
        let mut c = Stream::derive(7, &[1, 2]);
        let (xa, xb, xc) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(xb, xc);
    }

    #[test]
    fn unit_interval_bounds() {
        let mut s = Stream::new(3);
        for _ in 0..10_000 {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn poisson_zero_rate_is_zero() {
        let mut s = Stream::new(5);
        for _ in 0..100 {
            assert_eq!(s.poisson(0.0), 0);
        }
    }

    #[test]
    fn poisson_mean_close_to_rate() {
        let mut s = Stream::new(11);
        let n = 20_000;
        for &lambda in &[0.5, 4.0, 45.0] {
            let sum: u64 = (0..n).map(|_| s.poisson(lambda)).sum();
            let mean = sum as f64 / n as f64;
            // 5 standard errors of the sample mean
            let se = (lambda / n as f64).sqrt();
            assert!(
                (mean - lambda).abs() < 5.0 * se,
                "lambda={lambda} mean={mean}"
            );
        }
    }

    #[test]
    fn sample_distinct_has_no_duplicates() {
        let mut s = Stream::new(9);
        let mut picks = s.sample_distinct(100, 40);
        picks.sort_unstable();
        picks.dedup();
        assert_eq!(picks.len(), 40);
        assert!(picks.iter().all(|&p| p < 100));
    }
}
