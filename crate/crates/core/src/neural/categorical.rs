use rand::Rng;

/// Softmax distribution over a small discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Categorical {
    /// Log-softmax with the max logit subtracted first so large logits
    /// cannot overflow.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_norm = max + sum.ln();
        let log_probs: Vec<f64> = logits.iter().map(|l| l - log_norm).collect();
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Categorical { probs, log_probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, lp)| p * lp)
            .sum::<f64>()
    }

    /// Inverse-CDF sample from one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the accumulated mass
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// Most likely action, lowest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// d log p(action) / d logits.
    pub fn log_prob_grad(&self, action: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs.iter().map(|p| -p).collect();
        g[action] += 1.0;
        g
    }

    /// d entropy / d logits.
    pub fn entropy_grad(&self) -> Vec<f64> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, lp)| -p * (lp + h))
            .collect()
    }
}
