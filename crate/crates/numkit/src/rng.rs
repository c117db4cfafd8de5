/// Counter-based splittable pseudo-random generator.
///
/// Each `(seed, stream_id)` pair names an independent stream: the draw at
/// counter `n` is a pure function of `(seed, stream_id, n)`, so parallel
/// consumers never need to coordinate. All randomness in the workspace flows
/// through this type; nothing reads ambient entropy.
#[derive(Debug, Clone)]
pub struct Rng {
    pub seed: u64,
    pub stream_id: u64,
    key: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = mix(mix(seed ^ GOLDEN) ^ stream_id.wrapping_mul(GOLDEN));
        Rng {
            seed,
            stream_id,
            key,
            counter: 0,
            cached_normal: None,
        }
    }

    /// Derives an independent stream from this generator's seed.
    pub fn stream(&self, stream_id: u64) -> Rng {
        Rng::new(self.seed, self.stream_id.wrapping_mul(GOLDEN) ^ stream_id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at these ranges.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw (Box-Muller, second value cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the logarithm stays finite
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }
}
