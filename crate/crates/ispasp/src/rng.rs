//! Seeded pseudo-random number generation.
//!
//! Every randomized object in this crate draws from its own stream so that
//! adding or reordering experiments never perturbs existing results. A stream
//! is identified by `(master seed, label)` and derived as follows:
//!
//! * the label is hashed with 64-bit FNV-1a,
//! * the hash is mixed with the master seed through SplitMix64
//!   (Steele, Lea, Flood 2014), and
//! * the resulting 64-bit value seeds a xoshiro256++ generator
//!   (Blackman, Vigna 2019) whose 256-bit state is expanded from the seed by
//!   four further SplitMix64 steps, as recommended by the xoshiro authors.
//!
//! Both recurrences operate on `u64` words only, so identical seeds produce
//! identical streams on every platform. Gaussian variates come from the
//! Box-Muller transform applied to the 53-bit uniform output.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// The documented split function: a 64-bit seed for the stream identified by
/// `(master, label)`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut state = master ^ fnv1a(label);
    splitmix64(&mut state)
}

/// xoshiro256++ generator with a Box-Muller spare slot.
#[derive(Debug, Clone)]
pub struct Prng {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn from_seed(seed: u64) -> Self {
        let mut state = seed;
        let mut s = [0u64; 4];
        for word in &mut s {
            *word = splitmix64(&mut state);
        }
        if s == [0; 4] {
            // xoshiro state must not be all zero
            s[0] = 0x9e37_79b9_7f4a_7c15;
        }
        Prng {
            s,
            spare_normal: None,
        }
    }

    /// Stream for `(master, label)`; see the module docs for the derivation.
    pub fn stream(master: u64, label: &str) -> Self {
        Prng::from_seed(derive_seed(master, label))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, hi)`.
    pub fn uniform(&mut self, hi: f64) -> f64 {
        self.next_f64() * hi
    }

    /// Unbiased integer in `[0, n)` via Lemire's multiply-shift with rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let m = u128::from(x) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal variate (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `[0, n)`, returned sorted.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} distinct values from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
