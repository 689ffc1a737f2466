//! Fully-connected Q-network: rectifier hidden layers, identity output,
//! hand-written backpropagation and Adam.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ActionId;

/// Network weights stored flat. Layer `l` occupies
/// `[W_l (out x in, row-major) | b_l (out)]` starting at `offsets[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let k = AdamStep {
            b1,
            b2,
            a1: 1.0 - b1,
            a2: 1.0 - b2,
            step_size: lr / c1,
            inv_c2_sqrt: 1.0 / c2.sqrt(),
            eps: self.eps,
        };
        let n = params.len();
        let (m, v, g) = (&mut self.m[..n], &mut self.v[..n], &grads[..n]);
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was just detected on this CPU
            return unsafe { k.run_avx2(params, m, v, g) };
        }
        k.run(params, m, v, g)
    }
}

#[derive(Clone, Copy)]
struct AdamStep {
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    step_size: f64,
    inv_c2_sqrt: f64,
    eps: f64,
}

impl AdamStep {
    #[inline(always)]
    fn run(self, p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]) {
        for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(g) {
            *m = self.b1 * *m + self.a1 * g;
            // a long run of zero gradients decays m into subnormals, which are
            // orders of magnitude slower and far below any parameter's precision
            if m.abs() < f64::MIN_POSITIVE {
                *m = 0.0;
            }
            *v = self.b2 * *v + self.a2 * g * g;
            *p -= self.step_size * *m / (v.sqrt() * self.inv_c2_sqrt + self.eps);
        }
    }

    // Same arithmetic, wider registers; no fused multiply-add so results match `run`.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    fn run_avx2(self, p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]) {
        self.run(p, m, v, g)
    }
}

/// One supervised Q sample: move `Q(state, action)` toward `target`.
#[derive(Debug, Clone, Copy)]
pub struct QSample<'a> {
    pub state: &'a [f64],
    pub action: ActionId,
    pub target: f64,
}

const SMALL_BATCH: usize = 4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was just detected on this CPU
        return unsafe { dot_avx2(a, b) };
    }
    dot_lanes(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_lanes(a, b)
}

#[inline(always)]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    // independent lanes so the loop vectorizes
    const L: usize = 8;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; L];
    let full = n - n % L;
    for (x, y) in a[..full].chunks_exact(L).zip(b[..full].chunks_exact(L)) {
        let x: &[f64; L] = x.try_into().expect("chunk");
        let y: &[f64; L] = y.try_into().expect("chunk");
        for j in 0..L {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = 0.0;
    for j in full..n {
        tail += a[j] * b[j];
    }
    acc.iter().sum::<f64>() + tail
}

/// Largest value, `-inf` for an empty slice. NaN entries are skipped.
pub fn max_value(values: &[f64]) -> f64 {
    const L: usize = 8;
    let mut acc = [f64::NEG_INFINITY; L];
    let chunks = values.chunks_exact(L);
    let tail = chunks.remainder();
    for c in chunks {
        let c: &[f64; L] = c.try_into().expect("chunk");
        for j in 0..L {
            acc[j] = acc[j].max(c[j]);
        }
    }
    acc.iter().chain(tail).copied().fold(f64::NEG_INFINITY, f64::max)
}

fn layer_len(input: usize, output: usize) -> usize {
    input * output + output
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c` on strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= (m - 1) * rsa + k.saturating_sub(1) * csa + usize::from(k > 0));
    assert!(b.len() >= k.saturating_sub(1) * rsb + (n - 1) * csb + usize::from(k > 0));
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is exclusively borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl MlpParams {
    /// All-zero network with the given layer sizes `[input, hidden.., outputs]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0;
        for w in sizes.windows(2) {
            offsets.push(total);
            total += layer_len(w[0], w[1]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Uniform fan-in initialization, bound `1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in 0..net.layer_count() {
            let bound = 1.0 / (net.sizes[l] as f64).sqrt();
            let (w, b) = net.layer_mut(l);
            for x in w.iter_mut().chain(b.iter_mut()) {
                *x = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub(crate) fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters supplied for a network needing {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn action_count(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }

    /// Overwrite with `other`, reusing this allocation.
    pub fn copy_from(&mut self, other: &MlpParams) {
        self.sizes.clone_from(&other.sizes);
        self.params.clone_from(&other.params);
        self.offsets.clone_from(&other.offsets);
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weights (row-major `out x in`) and biases of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        self.params[start..start + layer_len(i, o)].split_at(i * o)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        self.params[start..start + layer_len(i, o)].split_at_mut(i * o)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Action values for a single input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Action values for `batch` inputs stored row-major; returns `batch x actions`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        if inputs.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "expected {} inputs of width {}, got {} values",
                batch,
                self.input_dim(),
                inputs.len()
            )));
        }
        Ok(self.layers(inputs.to_vec(), batch, batch <= SMALL_BATCH))
    }

    /// [`forward_batch`](Self::forward_batch) evaluated once per distinct
    /// input row. Row `r` of the full result is row `map[r]` of the returned
    /// outputs, bit for bit.
    pub fn forward_distinct(&self, inputs: &[f64], batch: usize) -> Result<(Vec<f64>, Vec<usize>)> {
        let dim = self.input_dim();
        if inputs.len() != batch * dim {
            return Err(Error::Shape(format!(
                "expected {batch} inputs of width {dim}, got {} values",
                inputs.len()
            )));
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(batch);
        let mut distinct = Vec::with_capacity(inputs.len());
        let map = inputs
            .chunks_exact(dim)
            .take(batch)
            .map(|row| {
                let key = row.iter().map(|v| v.to_bits()).collect();
                *seen.entry(key).or_insert_with(|| {
                    distinct.extend_from_slice(row);
                    distinct.len() / dim - 1
                })
            })
            .collect::<Vec<_>>();
        let rows = seen.len();
        // per-row results depend on the kernel, not on the row count
        Ok((self.layers(distinct, rows, batch <= SMALL_BATCH), map))
    }

    fn layers(&self, mut x: Vec<f64>, batch: usize, small: bool) -> Vec<f64> {
        for l in 0..self.layer_count() {
            x = self.affine(l, &x, batch, small);
            if l + 1 < self.layer_count() {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        x
    }

    fn affine(&self, l: usize, x: &[f64], batch: usize, small: bool) -> Vec<f64> {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let (w, b) = self.layer(l);
        let mut z: Vec<f64> = Vec::with_capacity(batch * o);
        if small {
            // packing dominates gemm at this size; plain dot products win
            for xr in x.chunks_exact(i) {
                z.extend(w.chunks_exact(i).zip(b).map(|(row, bias)| bias + dot(row, xr)));
            }
            return z;
        }
        for _ in 0..batch {
            z.extend_from_slice(b);
        }
        gemm(batch, i, o, x, (i, 1), w, (1, i), 1.0, &mut z);
        z
    }

    /// Mean squared error on the taken actions and its gradient w.r.t. every
    /// parameter, accumulated into `grads` (which is overwritten).
    pub fn loss_and_grad(&self, batch: &[QSample<'_>], grads: &mut Vec<f64>) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let n = batch.len();
        let dim = self.input_dim();
        let actions = self.action_count();
        let mut input = Vec::with_capacity(n * dim);
        for s in batch {
            if s.state.len() != dim {
                return Err(Error::Shape(format!(
                    "state has {} features, network expects {dim}",
                    s.state.len()
                )));
            }
            if s.action.0 >= actions {
                return Err(Error::InvalidAction {
                    index: s.action.0,
                    count: actions,
                });
            }
            if !s.target.is_finite() {
                return Err(Error::Numeric(format!("non-finite target {}", s.target)));
            }
            input.extend_from_slice(s.state);
        }
        grads.clear();
        grads.resize(self.params.len(), 0.0);

        let last = self.layer_count() - 1;
        // activations[l] is the input to layer l
        let mut activations = Vec::with_capacity(self.layer_count());
        activations.push(input);
        for l in 0..last {
            let mut z = self.affine(l, &activations[l], n, n <= SMALL_BATCH);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            activations.push(z);
        }

        // output layer, taken actions only
        let hidden = self.sizes[last];
        let (w_out, b_out) = self.layer(last);
        let h_last = &activations[last];
        let mut loss = 0.0;
        let mut delta_h = vec![0.0; n * hidden];
        {
            let start = self.offsets[last];
            let (gw, gb) = grads[start..start + layer_len(hidden, actions)].split_at_mut(hidden * actions);
            for (b, s) in batch.iter().enumerate() {
                let a = s.action.0;
                let h = &h_last[b * hidden..(b + 1) * hidden];
                let row = &w_out[a * hidden..(a + 1) * hidden];
                let q = b_out[a] + row.iter().zip(h).map(|(w, x)| w * x).sum::<f64>();
                let err = q - s.target;
                loss += err * err;
                let d = 2.0 * err / n as f64;
                gb[a] += d;
                for (g, x) in gw[a * hidden..(a + 1) * hidden].iter_mut().zip(h) {
                    *g += d * x;
                }
                for (dh, w) in delta_h[b * hidden..(b + 1) * hidden].iter_mut().zip(row) {
                    *dh = d * w;
                }
            }
        }
        let loss = loss / n as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }

        // hidden layers
        let mut delta = delta_h;
        for l in (0..last).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            // rectifier derivative, using the post-activation output
            for (d, &a) in delta.iter_mut().zip(&activations[l + 1]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let x = &activations[l];
            let start = self.offsets[l];
            let (gw, gb) = grads[start..start + layer_len(i, o)].split_at_mut(i * o);
            for row in delta.chunks_exact(o) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            gemm(o, n, i, &delta, (1, o), x, (i, 1), 1.0, gw);
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut next = vec![0.0; n * i];
                gemm(n, o, i, &delta, (o, 1), w, (i, 1), 0.0, &mut next);
                delta = next;
            }
        }
        Ok(loss)
    }

    /// One Adam step on the batch; returns the pre-update loss.
    pub fn train_step(
        &mut self,
        adam: &mut Adam,
        batch: &[QSample<'_>],
        lr: f64,
        scratch: &mut Vec<f64>,
    ) -> Result<f64> {
        let loss = self.loss_and_grad(batch, scratch)?;
        adam.apply(&mut self.params, scratch, lr);
        if !self.is_finite() {
            return Err(Error::Numeric("parameters diverged".into()));
        }
        Ok(loss)
    }
}
