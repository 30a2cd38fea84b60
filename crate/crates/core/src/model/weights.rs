use super::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

/// One pre-norm block. Projections act on row vectors: `y = x · W`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    pub attn_norm: Vec<T>,
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    /// Rows `h·head_dim..(h+1)·head_dim` carry head `h`'s output.
    pub wo: Matrix<T>,
    pub mlp_norm: Vec<T>,
    /// Column `k` is the gate read-out of hidden unit `k`.
    pub w_gate: Matrix<T>,
    pub w_up: Matrix<T>,
    /// Row `k` is the write-out of hidden unit `k`.
    pub w_down: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<T> {
    pub config: ModelConfig,
    pub embedding: Matrix<T>,
    pub layers: Vec<LayerWeights<T>>,
    pub final_norm: Vec<T>,
    pub lm_head: Matrix<T>,
}

pub type TensorView<'a, T> = (String, Vec<usize>, &'a [T]);
pub type TensorViewMut<'a, T> = (String, Vec<usize>, &'a mut [T]);

impl<T: Real> LayerWeights<T> {
    fn zeros(c: &ModelConfig) -> Self {
        let d = c.d_model;
        Self {
            attn_norm: vec![T::one(); d],
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            mlp_norm: vec![T::one(); d],
            w_gate: Matrix::zeros(d, c.d_ff),
            w_up: Matrix::zeros(d, c.d_ff),
            w_down: Matrix::zeros(c.d_ff, d),
        }
    }
}

impl<T: Real> ModelWeights<T> {
    /// All matrices zero, all norm scales one.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        Ok(Self {
            config: c.clone(),
            embedding: Matrix::zeros(c.vocab_size, c.d_model),
            layers: (0..c.n_layers).map(|_| LayerWeights::zeros(c)).collect(),
            final_norm: vec![T::one(); c.d_model],
            lm_head: Matrix::zeros(c.d_model, c.vocab_size),
        })
    }

    /// Same shapes with every entry zero, norm scales included. Used for
    /// gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, _, t) in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
        z
    }

    pub fn tensors(&self) -> Vec<TensorView<'_, T>> {
        fn m<T: Real>(name: String, x: &Matrix<T>) -> TensorView<'_, T> {
            (name, vec![x.rows(), x.cols()], x.as_slice())
        }
        let mut out = Vec::new();
        out.push(m("embedding".into(), &self.embedding));
        for (l, lw) in self.layers.iter().enumerate() {
            out.push((
                format!("layers.{l}.attn_norm"),
                vec![lw.attn_norm.len()],
                &lw.attn_norm,
            ));
            out.push(m(format!("layers.{l}.wq"), &lw.wq));
            out.push(m(format!("layers.{l}.wk"), &lw.wk));
            out.push(m(format!("layers.{l}.wv"), &lw.wv));
            out.push(m(format!("layers.{l}.wo"), &lw.wo));
            out.push((
                format!("layers.{l}.mlp_norm"),
                vec![lw.mlp_norm.len()],
                &lw.mlp_norm,
            ));
            out.push(m(format!("layers.{l}.w_gate"), &lw.w_gate));
            out.push(m(format!("layers.{l}.w_up"), &lw.w_up));
            out.push(m(format!("layers.{l}.w_down"), &lw.w_down));
        }
        out.push(("final_norm".into(), vec![self.final_norm.len()], &self.final_norm));
        out.push(m("lm_head".into(), &self.lm_head));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        fn m<T: Real>(name: String, x: &mut Matrix<T>) -> TensorViewMut<'_, T> {
            let shape = vec![x.rows(), x.cols()];
            (name, shape, x.as_mut_slice())
        }
        let mut out = Vec::new();
        out.push(m("embedding".into(), &mut self.embedding));
        for (l, lw) in self.layers.iter_mut().enumerate() {
            let n = lw.attn_norm.len();
            out.push((
                format!("layers.{l}.attn_norm"),
                vec![n],
                lw.attn_norm.as_mut_slice(),
            ));
            out.push(m(format!("layers.{l}.wq"), &mut lw.wq));
            out.push(m(format!("layers.{l}.wk"), &mut lw.wk));
            out.push(m(format!("layers.{l}.wv"), &mut lw.wv));
            out.push(m(format!("layers.{l}.wo"), &mut lw.wo));
            let n = lw.mlp_norm.len();
            out.push((
                format!("layers.{l}.mlp_norm"),
                vec![n],
                lw.mlp_norm.as_mut_slice(),
            ));
            out.push(m(format!("layers.{l}.w_gate"), &mut lw.w_gate));
            out.push(m(format!("layers.{l}.w_up"), &mut lw.w_up));
            out.push(m(format!("layers.{l}.w_down"), &mut lw.w_down));
        }
        let n = self.final_norm.len();
        out.push(("final_norm".into(), vec![n], self.final_norm.as_mut_slice()));
        out.push(m("lm_head".into(), &mut self.lm_head));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        let v = |x: &[T]| x.iter().map(|&a| U::of(a.as_f64())).collect::<Vec<U>>();
        ModelWeights {
            config: self.config.clone(),
            embedding: self.embedding.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    attn_norm: v(&l.attn_norm),
                    wq: l.wq.cast(),
                    wk: l.wk.cast(),
                    wv: l.wv.cast(),
                    wo: l.wo.cast(),
                    mlp_norm: v(&l.mlp_norm),
                    w_gate: l.w_gate.cast(),
                    w_up: l.w_up.cast(),
                    w_down: l.w_down.cast(),
                })
                .collect(),
            final_norm: v(&self.final_norm),
            lm_head: self.lm_head.cast(),
        }
    }

    pub fn layer(&self, layer: usize) -> Result<&LayerWeights<T>> {
        self.layers
            .get(layer)
            .ok_or_else(|| Error::Index(format!("layer {layer} of {}", self.layers.len())))
    }

    pub fn layer_mut(&mut self, layer: usize) -> Result<&mut LayerWeights<T>> {
        let n = self.layers.len();
        self.layers
            .get_mut(layer)
            .ok_or_else(|| Error::Index(format!("layer {layer} of {n}")))
    }
}
