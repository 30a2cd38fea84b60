use super::forward::{forward_cached, ForwardCache};
use super::loss::log_sum_exp;
use super::rope::RopeTable;
use super::{sigmoid, LossValue, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::{dot, rms_norm_backward, Matrix, Real};

/// One training sequence. Row `i` of the logits is scored against
/// `targets[i]` wherever `mask[i]` holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<u32>,
    pub targets: Vec<u32>,
    pub mask: Vec<bool>,
}

impl Sample {
    /// Next-token prediction over a window: predicts `tokens[1..]` from
    /// `tokens[..n-1]`, every position scored.
    pub fn next_token(tokens: &[u32]) -> Self {
        let n = tokens.len().saturating_sub(1);
        Self {
            input: tokens[..n].to_vec(),
            targets: tokens[1..].to_vec(),
            mask: vec![true; n],
        }
    }
}

/// `acc += aᵀ · b`
fn add_at_b<T: Real>(acc: &mut Matrix<T>, a: &Matrix<T>, b: &Matrix<T>) {
    for i in 0..a.rows() {
        acc.add_outer(a.row(i), b.row(i));
    }
}

/// `a · bᵀ`
fn a_bt<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(a.rows(), b.rows(), |i, j| dot(a.row(i), b.row(j)))
}

fn add_into<T: Real>(acc: &mut Matrix<T>, x: &Matrix<T>) {
    for (a, &b) in acc.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *a += b;
    }
}

fn norm_backward_rows<T: Real>(
    h: &Matrix<T>,
    scale: &[T],
    eps: T,
    dout: &Matrix<T>,
    dscale: &mut [T],
) -> Matrix<T> {
    let mut dx = Matrix::zeros(h.rows(), h.cols());
    for i in 0..h.rows() {
        let g = rms_norm_backward(h.row(i), scale, eps, dout.row(i), dscale);
        dx.row_mut(i).copy_from_slice(&g);
    }
    dx
}

fn backward_one<T: Real>(
    w: &ModelWeights<T>,
    cache: ForwardCache<T>,
    tokens: &[u32],
    dlogits: Matrix<T>,
    grads: &mut ModelWeights<T>,
) {
    let c = &w.config;
    let eps = T::of(c.rms_eps);
    let len = tokens.len();
    let hd = c.head_dim();
    let rope = RopeTable::<T>::new(len, hd, c.rope_theta);
    let scale = T::one() / T::of(hd as f64).sqrt();

    add_at_b(&mut grads.lm_head, &cache.x_final, &dlogits);
    let dx = a_bt(&dlogits, &w.lm_head);
    let mut dh = norm_backward_rows(&cache.h_final, &w.final_norm, eps, &dx, &mut grads.final_norm);

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        let lw = &w.layers[l];
        let g = &mut grads.layers[l];

        // MLP
        add_at_b(&mut g.w_down, &lc.act, &dh);
        let dact = a_bt(&dh, &lw.w_down);
        let mut dgate = Matrix::zeros(len, c.d_ff);
        let mut dup = Matrix::zeros(len, c.d_ff);
        for i in 0..len {
            for k in 0..c.d_ff {
                let a = lc.gate.get(i, k);
                let s = sigmoid(a);
                let da = dact.get(i, k);
                dup.set(i, k, da * a * s);
                dgate.set(i, k, da * lc.up.get(i, k) * s * (T::one() + a * (T::one() - s)));
            }
        }
        add_at_b(&mut g.w_gate, &lc.x_mlp, &dgate);
        add_at_b(&mut g.w_up, &lc.x_mlp, &dup);
        let mut dx_mlp = a_bt(&dgate, &lw.w_gate);
        add_into(&mut dx_mlp, &a_bt(&dup, &lw.w_up));
        let mut dh_mid = dh;
        add_into(
            &mut dh_mid,
            &norm_backward_rows(&lc.h_mid, &lw.mlp_norm, eps, &dx_mlp, &mut g.mlp_norm),
        );

        // attention
        add_at_b(&mut g.wo, &lc.ctx, &dh_mid);
        let dctx = a_bt(&dh_mid, &lw.wo);
        let mut dq = Matrix::zeros(len, c.d_model);
        let mut dk = Matrix::zeros(len, c.d_model);
        let mut dv = Matrix::zeros(len, c.d_model);
        let mut dp = vec![T::zero(); len];
        for h in 0..c.n_heads {
            let r = h * hd..(h + 1) * hd;
            let p = &lc.probs[h];
            for i in 0..len {
                let dci = &dctx.row(i)[r.clone()];
                let mut weighted = T::zero();
                for j in 0..=i {
                    let pij = p.get(i, j);
                    dp[j] = dot(dci, &lc.v.row(j)[r.clone()]);
                    weighted += pij * dp[j];
                    for (a, &b) in dv.row_mut(j)[r.clone()].iter_mut().zip(dci) {
                        *a += pij * b;
                    }
                }
                for j in 0..=i {
                    let ds = p.get(i, j) * (dp[j] - weighted) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    for t in 0..hd {
                        let qi = lc.q.get(i, h * hd + t);
                        let kj = lc.k.get(j, h * hd + t);
                        dq.row_mut(i)[h * hd + t] += ds * kj;
                        dk.row_mut(j)[h * hd + t] += ds * qi;
                    }
                }
            }
        }
        for i in 0..len {
            for h in 0..c.n_heads {
                rope.apply(&mut dq.row_mut(i)[h * hd..(h + 1) * hd], i, true);
                rope.apply(&mut dk.row_mut(i)[h * hd..(h + 1) * hd], i, true);
            }
        }
        add_at_b(&mut g.wq, &lc.x_attn, &dq);
        add_at_b(&mut g.wk, &lc.x_attn, &dk);
        add_at_b(&mut g.wv, &lc.x_attn, &dv);
        let mut dx_attn = a_bt(&dq, &lw.wq);
        add_into(&mut dx_attn, &a_bt(&dk, &lw.wk));
        add_into(&mut dx_attn, &a_bt(&dv, &lw.wv));
        dh = dh_mid;
        add_into(
            &mut dh,
            &norm_backward_rows(&lc.h_in, &lw.attn_norm, eps, &dx_attn, &mut g.attn_norm),
        );
    }

    for (i, &t) in tokens.iter().enumerate() {
        for (a, &b) in grads.embedding.row_mut(t as usize).iter_mut().zip(dh.row(i)) {
            *a += b;
        }
    }
}

/// Mean masked cross-entropy over the whole batch (every scored position
/// weighs the same) and its gradient with respect to every parameter. A
/// batch with no scored positions yields zero loss and zero gradients.
pub fn loss_and_grad<T: Real>(
    weights: &ModelWeights<T>,
    batch: &[Sample],
) -> Result<(LossValue, ModelWeights<T>)> {
    let mut grads = weights.zeros_like();
    for s in batch {
        if s.targets.len() != s.input.len() || s.mask.len() != s.input.len() {
            return Err(Error::Dimension(format!(
                "sample with {} inputs, {} targets, {} mask entries",
                s.input.len(),
                s.targets.len(),
                s.mask.len()
            )));
        }
        if let Some(&t) = s
            .targets
            .iter()
            .find(|&&t| t as usize >= weights.config.vocab_size)
        {
            return Err(Error::Input(format!("target {t} out of vocab")));
        }
    }
    let count: usize = batch.iter().map(|s| s.mask.iter().filter(|&&m| m).count()).sum();
    if count == 0 {
        return Ok((LossValue { mean: 0.0, count: 0 }, grads));
    }
    let inv_n = 1.0 / count as f64;
    let mut total = 0.0;
    for s in batch {
        if !s.mask.iter().any(|&m| m) {
            continue;
        }
        let cache = forward_cached(weights, &s.input)?;
        let v = weights.config.vocab_size;
        let mut dlogits = Matrix::zeros(s.input.len(), v);
        for i in 0..s.input.len() {
            if !s.mask[i] {
                continue;
            }
            let row = cache.logits.row(i);
            let lse = log_sum_exp(row);
            let t = s.targets[i] as usize;
            total += lse - row[t].as_f64();
            let drow = dlogits.row_mut(i);
            for (d, &z) in drow.iter_mut().zip(row) {
                *d = T::of((z.as_f64() - lse).exp() * inv_n);
            }
            drow[t] -= T::of(inv_n);
        }
        backward_one(weights, cache, &s.input, dlogits, &mut grads);
    }
    Ok((
        LossValue {
            mean: total * inv_n,
            count,
        },
        grads,
    ))
}
