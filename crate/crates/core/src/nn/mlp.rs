//! Fully connected network with ReLU hidden layers and a linear head.
//!
//! Parameters live in one flat buffer, layer by layer: the `in x out`
//! row-major weight matrix followed by the `out` biases. Activations are
//! row-major `batch x width`.

use super::{NnError, Real};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

/// Layer widths for `input → hidden × depth → output`.
pub fn architecture(input: usize, hidden_width: usize, hidden_layers: usize, output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden_layers + 2);
    dims.push(input);
    dims.extend(std::iter::repeat_n(hidden_width, hidden_layers));
    dims.push(output);
    dims
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Real> MlpParams<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0), "invalid layer dims {dims:?}");
        Self { dims: dims.to_vec(), data: vec![T::zero(); param_count(dims)] }
    }

    /// He-uniform hidden layers, biases zero, and an all-zero output layer.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let last = p.num_layers() - 1;
        for l in 0..last {
            let fan_in = p.dims[l];
            let bound = (6.0 / fan_in as f64).sqrt();
            let (w, _) = p.layer_mut(l);
            for x in w.iter_mut() {
                *x = T::of(rng.random_range(-bound..bound));
            }
        }
        p
    }

    /// Every parameter drawn from `U(-scale, scale)`; used by tests that need
    /// a non-trivial output layer.
    pub fn random_uniform<R: Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        for x in p.data.iter_mut() {
            *x = T::of(rng.random_range(-scale..scale));
        }
        p
    }

    pub fn from_parts(dims: &[usize], data: Vec<T>) -> Result<Self, NnError> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(NnError::DimensionMismatch(format!("invalid layer dims {dims:?}")));
        }
        if data.len() != param_count(dims) {
            return Err(NnError::DimensionMismatch(format!(
                "{} parameters for dims {dims:?}, expected {}",
                data.len(),
                param_count(dims)
            )));
        }
        Ok(Self { dims: dims.to_vec(), data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn offset(&self, l: usize) -> usize {
        param_count(&self.dims[..=l])
    }

    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let start = self.offset(l);
        let (w, rest) = self.data[start..].split_at(i * o);
        (w, &rest[..o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let start = self.offset(l);
        let (w, rest) = self.data[start..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    pub fn same_shape(&self, other: &MlpParams<T>) -> bool {
        self.dims == other.dims
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> MlpParams<U> {
        MlpParams { dims: self.dims.clone(), data: self.data.iter().map(|x| U::of(x.f64())).collect() }
    }

    /// Single-sample forward pass.
    pub fn forward_one(&self, features: &[T]) -> Result<Vec<T>, NnError> {
        let mut ws = Workspace::default();
        Ok(forward(self, features, 1, &mut ws)?.to_vec())
    }
}

/// Activation buffers reused across forward/backward calls.
#[derive(Debug, Default, Clone)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    grad_a: Vec<T>,
    grad_b: Vec<T>,
}

/// Batched forward pass; returns the `batch x output` slice held in `ws`.
pub fn forward<'w, T: Real>(
    params: &MlpParams<T>,
    input: &[T],
    batch: usize,
    ws: &'w mut Workspace<T>,
) -> Result<&'w [T], NnError> {
    let in_dim = params.input_dim();
    if input.len() != batch * in_dim {
        return Err(NnError::DimensionMismatch(format!(
            "input has {} values, expected {batch} x {in_dim}",
            input.len()
        )));
    }
    let layers = params.num_layers();
    ws.acts.resize_with(layers, Vec::new);
    for l in 0..layers {
        let (i, o) = (params.dims[l], params.dims[l + 1]);
        let (w, b) = params.layer(l);
        let (done, rest) = ws.acts.split_at_mut(l);
        let prev: &[T] = if l == 0 { input } else { &done[l - 1] };
        let out = &mut rest[0];
        out.resize(batch * o, T::zero());
        for row in out.chunks_exact_mut(o) {
            row.copy_from_slice(b);
        }
        T::gemm(batch, i, o, T::one(), prev, false, w, false, T::one(), out);
        if l + 1 < layers {
            for x in out.iter_mut() {
                *x = x.max(T::zero());
            }
        }
    }
    Ok(&ws.acts[layers - 1])
}

/// Reverse pass for the activations cached by the preceding [`forward`]
/// call. `d_out` is the loss gradient w.r.t. the outputs; `grad` is
/// overwritten with the parameter gradient.
pub fn backward<T: Real>(
    params: &MlpParams<T>,
    input: &[T],
    batch: usize,
    ws: &mut Workspace<T>,
    d_out: &[T],
    grad: &mut MlpParams<T>,
) -> Result<(), NnError> {
    let layers = params.num_layers();
    if !grad.same_shape(params) {
        return Err(NnError::DimensionMismatch("gradient shape differs from parameters".into()));
    }
    if ws.acts.len() != layers || ws.acts[layers - 1].len() != batch * params.output_dim() {
        return Err(NnError::DimensionMismatch("workspace does not hold a matching forward pass".into()));
    }
    if d_out.len() != batch * params.output_dim() {
        return Err(NnError::DimensionMismatch("output gradient has the wrong size".into()));
    }
    let Workspace { acts, grad_a, grad_b } = ws;
    grad_a.clear();
    grad_a.extend_from_slice(d_out);
    for l in (0..layers).rev() {
        let (i, o) = (params.dims[l], params.dims[l + 1]);
        let prev: &[T] = if l == 0 { input } else { &acts[l - 1] };
        {
            let (gw, gb) = grad.layer_mut(l);
            T::gemm(i, batch, o, T::one(), prev, true, grad_a, false, T::zero(), gw);
            gb.fill(T::zero());
            for row in grad_a.chunks_exact(o) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g = *g + d;
                }
            }
        }
        if l > 0 {
            let (w, _) = params.layer(l);
            grad_b.resize(batch * i, T::zero());
            T::gemm(batch, o, i, T::one(), grad_a, false, w, true, T::zero(), grad_b);
            for (g, &h) in grad_b.iter_mut().zip(prev) {
                *g = if h > T::zero() { *g } else { T::zero() };
            }
            std::mem::swap(grad_a, grad_b);
        }
    }
    Ok(())
}
