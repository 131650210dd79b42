//! Fully connected tanh network over a flat parameter vector.
//!
//! Layer `l` stores its weight matrix (`out × in`, row-major) followed by its
//! bias. Every layer but the last applies `tanh`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    activations: Vec<Array2<f64>>,
}

impl Mlp {
    /// Zero-initialized network with the given layer widths.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs at least input and output widths");
        let n = Self::param_count_for(sizes);
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Orthogonal initialization; hidden layers use `hidden_gain`, the output
    /// layer `output_gain`. Biases start at zero.
    pub fn orthogonal(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut impl Rng) -> Self {
        let mut mlp = Self::zeros(sizes);
        let layers = mlp.num_layers();
        for l in 0..layers {
            let (rows, cols) = mlp.layer_shape(l);
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let q = orthogonal_matrix(rows, cols, rng);
            let (w_off, _) = mlp.layer_offsets(l);
            for r in 0..rows {
                for c in 0..cols {
                    mlp.params[w_off + r * cols + c] = gain * q[(r, c)];
                }
            }
        }
        mlp
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::param_count_for(&sizes)).then_some(Self { sizes, params })
    }

    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(out, in)` for layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.sizes[l + 1], self.sizes[l])
    }

    /// Offsets of the weight and bias blocks of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (rows, cols) = self.layer_shape(l);
        (start, start + rows * cols)
    }

    fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w_off, b_off) = self.layer_offsets(l);
        ArrayView2::from_shape(self.layer_shape(l), &self.params[w_off..b_off]).unwrap()
    }

    fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b_off) = self.layer_offsets(l);
        let rows = self.sizes[l + 1];
        ArrayView1::from(&self.params[b_off..b_off + rows])
    }

    /// Batched forward pass; `input` is `batch × in`.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> (Array2<f64>, MlpCache) {
        let layers = self.num_layers();
        let mut activations = Vec::with_capacity(layers);
        let mut x = input.to_owned();
        for l in 0..layers {
            let mut z = x.dot(&self.weight(l).t());
            z += &self.bias(l);
            activations.push(x);
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            x = z;
        }
        (x, MlpCache { activations })
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let layers = self.num_layers();
        let mut x = input.to_owned();
        for l in 0..layers {
            let mut z = x.dot(&self.weight(l).t());
            z += &self.bias(l);
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            x = z;
        }
        x
    }

    /// Single-sample forward pass.
    pub fn predict_one(&self, input: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, input.len()), input).unwrap();
        self.predict(view).into_raw_vec_and_offset().0
    }

    /// Backpropagates `grad_output` (`batch × out`, the loss gradient with
    /// respect to the network output) and accumulates into `grad`, a flat
    /// buffer laid out like the parameters.
    pub fn backward(&self, cache: &MlpCache, grad_output: Array2<f64>, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let mut delta = grad_output;
        for l in (0..self.num_layers()).rev() {
            let a = &cache.activations[l];
            let (w_off, b_off) = self.layer_offsets(l);
            let (rows, cols) = self.layer_shape(l);
            let gw = delta.t().dot(a);
            for (g, v) in grad[w_off..b_off].iter_mut().zip(gw.iter()) {
                *g += v;
            }
            let gb = delta.sum_axis(Axis(0));
            for (g, v) in grad[b_off..b_off + rows].iter_mut().zip(gb.iter()) {
                *g += v;
            }
            debug_assert_eq!(a.ncols(), cols);
            if l > 0 {
                let mut next = delta.dot(&self.weight(l));
                next.zip_mut_with(a, |d, act| *d *= 1.0 - act * act);
                delta = next;
            }
        }
    }
}

/// `rows × cols` matrix with orthonormal rows or columns.
fn orthogonal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let (tall_r, tall_c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let g = DMatrix::from_fn(tall_r, tall_c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes the distribution uniform over orthogonal matrices
    for j in 0..tall_c {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}
