//! Adam optimizer with bias correction.

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: first and second moment estimates per parameter tensor,
/// allocated lazily on the first step.
pub struct Adam {
    config: AdamConfig,
    step_count: u64,
    moments: Vec<(Tensor, Tensor)>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        assert!(config.lr > 0.0, "learning rate must be positive");
        assert!(
            (0.0..1.0).contains(&config.beta1),
            "beta1 must be in [0, 1)"
        );
        assert!(
            (0.0..1.0).contains(&config.beta2),
            "beta2 must be in [0, 1)"
        );
        assert!(config.eps > 0.0, "epsilon must be positive");
        Adam {
            config,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }

    /// Applies one update. `params` and `grads` must stay aligned (same
    /// tensors in the same order) across every call.
    pub fn step(&mut self, params: &mut [(String, &mut Tensor)], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "params/grads misaligned");
        if self.moments.is_empty() {
            self.moments = grads
                .iter()
                .map(|g| {
                    (
                        Tensor::zeros(g.shape().to_vec()),
                        Tensor::zeros(g.shape().to_vec()),
                    )
                })
                .collect();
        }
        assert_eq!(
            self.moments.len(),
            params.len(),
            "parameter set changed size"
        );

        self.step_count += 1;
        let c = self.config;
        let corr1 = 1.0 - c.beta1.powi(self.step_count as i32);
        let corr2 = 1.0 - c.beta2.powi(self.step_count as i32);

        for (((name, p), g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.moments.iter_mut())
        {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch for {name}");
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..gd.len() {
                md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
                vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / corr1;
                let v_hat = vd[i] / corr2;
                pd[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
    }
}
