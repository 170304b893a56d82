use ndarray::Zip;

use super::{MlpNet, ParamGrads};
use crate::error::{Error, Result};

/// Adaptive moment estimation with bias correction. Minimizes: parameters
/// move against the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub(super) t: u64,
    pub(super) m: ParamGrads,
    pub(super) v: ParamGrads,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(net: &MlpNet, lr: f64) -> Self {
        Self {
            lr,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
            t: 0,
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &ParamGrads {
        &self.m
    }

    pub fn second_moments(&self) -> &ParamGrads {
        &self.v
    }

    pub fn step(&mut self, net: &mut MlpNet, grads: &ParamGrads) -> Result<()> {
        if !grads.same_shape(net) || !self.m.same_shape(net) {
            return Err(Error::Config(
                "gradient or optimizer state does not match the network shape".into(),
            ));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let params = net.layers_mut();
        for (i, layer) in params.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            Zip::from(&mut layer.weights).and(mw).and(vw).and(gw).for_each(update);
            Zip::from(&mut layer.biases).and(mb).and(vb).and(gb).for_each(update);
        }
        Ok(())
    }
}
