use serde::{Deserialize, Serialize};

use crate::error::{GdmError, Result};

/// Which edges age on a learning iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeAging {
    /// Only edges incident to the best-matching unit.
    #[default]
    BmuIncident,
    /// Every edge in the network.
    Global,
}

/// Learning constants of one Gamma-GWR network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    /// Activity below which a new neuron may be inserted.
    pub insertion_threshold: f64,
    /// BMU habituation must be below this for an insertion.
    pub habituation_threshold: f64,
    pub tau_b: f64,
    pub tau_n: f64,
    pub kappa: f64,
    /// Temporal depth: number of context descriptors per neuron.
    pub depth: usize,
    /// Distance weights for the input term and each context term, `depth + 1` entries.
    pub alpha: Vec<f64>,
    /// Context merge factor.
    pub beta: f64,
    pub eps_b: f64,
    pub eps_n: f64,
    /// Edges older than this are pruned together with orphaned neurons. `None` disables deletion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edge_age: Option<u32>,
    #[serde(default)]
    pub edge_aging: EdgeAging,
    /// Also adapt the old BMU on steps that insert a neuron.
    #[serde(default)]
    pub adapt_on_insert: bool,
}

impl Hyperparams {
    /// Defaults for the episodic network (G-EM).
    pub fn episodic() -> Self {
        Self {
            insertion_threshold: 0.3,
            ..Self::shared_defaults()
        }
    }

    /// Defaults for the semantic network (G-SM).
    pub fn semantic() -> Self {
        Self {
            insertion_threshold: 0.001,
            ..Self::shared_defaults()
        }
    }

    fn shared_defaults() -> Self {
        Self {
            insertion_threshold: 0.3,
            habituation_threshold: 0.1,
            tau_b: 0.3,
            tau_n: 0.1,
            kappa: 1.05,
            depth: 2,
            alpha: vec![0.67, 0.24, 0.09],
            beta: 0.7,
            eps_b: 0.5,
            eps_n: 0.005,
            max_edge_age: None,
            edge_aging: EdgeAging::BmuIncident,
            adapt_on_insert: false,
        }
    }

    /// Same constants without temporal context: `depth = 0`, plain squared distance.
    pub fn without_context(&self) -> Self {
        Self {
            depth: 0,
            alpha: vec![1.0],
            ..self.clone()
        }
    }

    /// Fixed point of the habituation rule, `1 - 1/kappa`.
    pub fn habituation_floor(&self) -> f64 {
        1.0 - 1.0 / self.kappa
    }

    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GdmError::InvalidHyperparams(msg));
        if !(self.insertion_threshold > 0.0 && self.insertion_threshold <= 1.0) {
            return bad(format!(
                "insertion_threshold must lie in (0, 1], got {}",
                self.insertion_threshold
            ));
        }
        if !(self.habituation_threshold > 0.0 && self.habituation_threshold < 1.0) {
            return bad(format!(
                "habituation_threshold must lie in (0, 1), got {}",
                self.habituation_threshold
            ));
        }
        if !(self.kappa > 1.0) {
            return bad(format!("kappa must exceed 1, got {}", self.kappa));
        }
        for (name, tau) in [("tau_b", self.tau_b), ("tau_n", self.tau_n)] {
            if !(tau > 0.0 && tau * self.kappa < 1.0) {
                return bad(format!(
                    "{name} must satisfy 0 < {name}*kappa < 1, got {tau}"
                ));
            }
        }
        if !(self.tau_b > self.tau_n) {
            return bad(format!(
                "tau_b ({}) must exceed tau_n ({})",
                self.tau_b, self.tau_n
            ));
        }
        if self.alpha.len() != self.depth + 1 {
            return bad(format!(
                "alpha needs depth + 1 = {} entries, got {}",
                self.depth + 1,
                self.alpha.len()
            ));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0)) {
            return bad(format!(
                "alpha entries must be positive, got {:?}",
                self.alpha
            ));
        }
        if self.alpha.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!(
                "alpha entries must be strictly decreasing, got {:?}",
                self.alpha
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.eps_b > 0.0 && self.eps_b <= 1.0 && self.eps_n >= 0.0) {
            return bad(format!(
                "learning rates must satisfy 0 < eps_b <= 1, eps_n >= 0 (got {}, {})",
                self.eps_b, self.eps_n
            ));
        }
        if !(self.eps_n < self.eps_b) {
            return bad(format!(
                "eps_n ({}) must be smaller than eps_b ({})",
                self.eps_n, self.eps_b
            ));
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::episodic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_are_valid() {
        for p in [Hyperparams::episodic(), Hyperparams::semantic()] {
            p.validate().unwrap();
            assert_eq!(p.alpha.len(), p.depth + 1);
            let sum: f64 = p.alpha.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert_eq!(Hyperparams::episodic().insertion_threshold, 0.3);
        assert_eq!(Hyperparams::semantic().insertion_threshold, 0.001);
    }

    #[test]
    fn table_constants() {
        let p = Hyperparams::episodic();
        assert_eq!(
            (p.habituation_threshold, p.tau_b, p.tau_n, p.kappa),
            (0.1, 0.3, 0.1, 1.05)
        );
        assert_eq!((p.beta, p.eps_b, p.eps_n, p.depth), (0.7, 0.5, 0.005, 2));
        assert_eq!(p.alpha, vec![0.67, 0.24, 0.09]);
        assert!(p.max_edge_age.is_none());
    }

    #[test]
    fn rejects_bad_alpha() {
        let mut p = Hyperparams::episodic();
        p.alpha = vec![0.5, 0.5];
        assert!(p.validate().is_err());
        p.alpha = vec![0.1, 0.2, 0.7];
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_overshooting_tau() {
        let mut p = Hyperparams::episodic();
        p.tau_b = 0.99;
        assert!(p.validate().is_err());
    }

    #[test]
    fn context_free_variant() {
        let p = Hyperparams::episodic().without_context();
        assert_eq!(p.depth, 0);
        assert_eq!(p.alpha, vec![1.0]);
        p.validate().unwrap();
    }
}
