use super::{MlpParams, NnError, Real};

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamW<T> {
    pub fn new(num_params: usize, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
        }
    }

    pub fn for_params(params: &MlpParams<T>, weight_decay: f64) -> Self {
        Self::new(params.len(), weight_decay)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. Non-finite gradients leave state and parameters untouched.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::DimensionMismatch(format!(
                "optimizer holds {} moments, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(i));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let decay = T::of(1.0 - lr * self.weight_decay);
        let step_size = T::of(lr / bc1);
        let inv_sqrt_bc2 = T::of(1.0 / bc2.sqrt());
        let eps = T::of(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *p = *p * decay;
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p = *p - step_size * *m / (v.sqrt() * inv_sqrt_bc2 + eps);
        }
        Ok(())
    }

    pub fn step_params(&mut self, params: &mut MlpParams<T>, grads: &MlpParams<T>, lr: f64) -> Result<(), NnError> {
        if !params.same_shape(grads) {
            return Err(NnError::DimensionMismatch("gradient shape differs from parameters".into()));
        }
        self.step(params.as_mut_slice(), grads.as_slice(), lr)
    }
}
