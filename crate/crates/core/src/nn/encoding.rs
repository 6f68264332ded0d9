use std::f64::consts::PI;

/// Sinusoidal positional encoding applied independently to every input
/// dimension: `[z, sin(2^0 π z), cos(2^0 π z), …, sin(2^{L-1} π z), cos(2^{L-1} π z)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosEncConfig {
    pub num_frequencies: usize,
    pub include_identity: bool,
}

impl Default for PosEncConfig {
    fn default() -> Self {
        Self { num_frequencies: 6, include_identity: true }
    }
}

impl PosEncConfig {
    pub fn features_per_input(&self) -> usize {
        usize::from(self.include_identity) + 2 * self.num_frequencies
    }

    pub fn encoded_dim(&self, input_dim: usize) -> usize {
        input_dim * self.features_per_input()
    }

    /// Writes the encoding of `z` into `out` (length `encoded_dim(z.len())`).
    pub fn encode_into<T: crate::nn::Real>(&self, z: &[f64], out: &mut [T]) {
        let per = self.features_per_input();
        assert_eq!(out.len(), z.len() * per, "encoding buffer size");
        for (zi, chunk) in z.iter().zip(out.chunks_exact_mut(per)) {
            let mut o = 0;
            if self.include_identity {
                chunk[0] = T::of(*zi);
                o = 1;
            }
            let mut freq = PI;
            for _ in 0..self.num_frequencies {
                let (s, c) = (freq * zi).sin_cos();
                chunk[o] = T::of(s);
                chunk[o + 1] = T::of(c);
                o += 2;
                freq *= 2.0;
            }
        }
    }

    pub fn encode(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.encoded_dim(z.len())];
        self.encode_into(z, &mut out);
        out
    }
}
