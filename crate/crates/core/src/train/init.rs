use crate::error::Result;
use crate::model::{ModelConfig, ModelWeights};
use crate::numerics::{Real, RngState};

pub const INIT_STD: f64 = 0.02;

/// Gaussian init with std 0.02; `wo` and `w_down` are further scaled by
/// `1/sqrt(2·n_layers)`. Norm scales start at one.
pub fn init_weights<T: Real>(config: &ModelConfig, seed: u64) -> Result<ModelWeights<T>> {
    let mut w = ModelWeights::<T>::zeros(config)?;
    let out_scale = if config.n_layers > 0 {
        1.0 / (2.0 * config.n_layers as f64).sqrt()
    } else {
        1.0
    };
    let root = RngState::new(seed);
    for (i, (name, _, t)) in w.tensors_mut().into_iter().enumerate() {
        if name.ends_with("norm") {
            continue;
        }
        let std = if name.ends_with(".wo") || name.ends_with(".w_down") {
            INIT_STD * out_scale
        } else {
            INIT_STD
        };
        let mut rng = root.split(i as u64);
        for x in t.iter_mut() {
            *x = T::of(std * rng.normal());
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_with_unit_scales() {
        let c = ModelConfig::default();
        let a = init_weights::<f32>(&c, 5).unwrap();
        let b = init_weights::<f32>(&c, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.final_norm.iter().all(|&s| s == 1.0));
        assert!(a
            .layers
            .iter()
            .all(|l| l.attn_norm.iter().chain(&l.mlp_norm).all(|&s| s == 1.0)));
        let e = a.embedding.as_slice();
        let var = e.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / e.len() as f64;
        assert!((var.sqrt() - 0.02).abs() < 0.002);
    }
}
