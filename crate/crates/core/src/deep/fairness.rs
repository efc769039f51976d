//! Fairness regularizer terms for the regularized autoencoder.
//!
//! Both terms act on the per-row score vector (squared reconstruction error)
//! and return the term value together with its gradient w.r.t. the scores;
//! the caller chains that through the reconstruction.
//!
//! Statistical-parity term: absolute sample correlation between scores and
//! the 0/1 group indicator. Rank-fidelity term: per group, one minus a
//! listwise discounted-cumulative-gain fidelity of the current scores against
//! a frozen base model's score ranking, made differentiable with a
//! sigmoid-relaxed rank.

const EPS: f64 = 1e-12;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Precomputed group structure for the parity term.
pub struct ParityContext {
    /// Centered 0/1 indicator, `g_i - mean(g)`.
    dev: Vec<f64>,
    sigma_g: f64,
}

impl ParityContext {
    /// `indicator[i]` is 1.0 for group-b rows. Fails when only one group is
    /// present (zero indicator variance).
    pub fn new(indicator: &[f64]) -> Option<ParityContext> {
        let n = indicator.len() as f64;
        let mean = indicator.iter().sum::<f64>() / n;
        let dev: Vec<f64> = indicator.iter().map(|g| g - mean).collect();
        let sigma_g = (dev.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
        if sigma_g <= 0.0 {
            return None;
        }
        Some(ParityContext { dev, sigma_g })
    }

    /// Returns `|corr(s, g)|` and its gradient w.r.t. the scores.
    pub fn value_and_grad(&self, scores: &[f64], grad: &mut [f64]) -> f64 {
        let n = scores.len() as f64;
        let mean_s = scores.iter().sum::<f64>() / n;
        let sigma_s =
            (scores.iter().map(|s| (s - mean_s) * (s - mean_s)).sum::<f64>() / n).sqrt();
        let cov: f64 = scores.iter().zip(&self.dev).map(|(s, d)| s * d).sum();
        let denom = n * sigma_s * self.sigma_g + EPS;
        let value = cov.abs() / denom;
        let sign = if cov >= 0.0 { 1.0 } else { -1.0 };
        for (i, g) in grad.iter_mut().enumerate() {
            // d sigma_s / d s_i = (s_i - mean_s) / (n * sigma_s); zero
            // subgradient on constant scores.
            let dsigma = if sigma_s > EPS { (scores[i] - mean_s) / (n * sigma_s) } else { 0.0 };
            *g += sign * self.dev[i] / denom
                - cov.abs() * n * self.sigma_g * dsigma / (denom * denom);
        }
        value
    }
}

/// Precomputed per-group gains and ideal DCG from the frozen base scores.
pub struct RankFidelityContext {
    /// Row indices per group.
    groups: Vec<Vec<usize>>,
    /// Gain per member, aligned with `groups`.
    gains: Vec<Vec<f64>>,
    idcg: Vec<f64>,
}

impl RankFidelityContext {
    /// Gains are `2^rel - 1` with base scores min-max normalized per group.
    pub fn new(groups: Vec<Vec<usize>>, base_scores: &[f64]) -> RankFidelityContext {
        let mut gains = Vec::with_capacity(groups.len());
        let mut idcg = Vec::with_capacity(groups.len());
        for members in &groups {
            let vals: Vec<f64> = members.iter().map(|&i| base_scores[i]).collect();
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = (max - min).max(EPS);
            let g: Vec<f64> =
                vals.iter().map(|v| 2f64.powf((v - min) / span) - 1.0).collect();
            let mut sorted = g.clone();
            sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite gains"));
            let ideal: f64 = sorted
                .iter()
                .enumerate()
                .map(|(pos, gain)| gain / (2.0 + pos as f64).log2())
                .sum();
            gains.push(g);
            idcg.push(ideal);
        }
        RankFidelityContext { groups, gains, idcg }
    }

    /// Returns `sum_G (1 - DCG_G / IDCG_G)` and accumulates its score
    /// gradient. `pair_buf` is scratch reused across epochs.
    pub fn value_and_grad(
        &self,
        scores: &[f64],
        grad: &mut [f64],
        pair_buf: &mut Vec<f64>,
    ) -> f64 {
        let mut total = 0.0;
        for (gi, members) in self.groups.iter().enumerate() {
            let m = members.len();
            if m == 0 || self.idcg[gi] <= EPS {
                continue;
            }
            let s: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
            // Sigmoid-relaxed rank: descending in score, best rank 1.
            pair_buf.clear();
            pair_buf.resize(m * (m - 1) / 2, 0.0);
            let mut ranks = vec![1.0; m];
            let mut at = 0;
            for a in 0..m {
                for b in a + 1..m {
                    let e = sigmoid(s[b] - s[a]);
                    pair_buf[at] = e;
                    at += 1;
                    ranks[a] += e;
                    ranks[b] += 1.0 - e;
                }
            }
            let ln2 = std::f64::consts::LN_2;
            let mut dcg = 0.0;
            // d/dr of 1/log2(1+r).
            let mut ddcg_dr = vec![0.0; m];
            for i in 0..m {
                let log_term = (1.0 + ranks[i]).log2();
                dcg += self.gains[gi][i] / log_term;
                ddcg_dr[i] = -self.gains[gi][i] * ln2
                    / ((1.0 + ranks[i]) * (1.0 + ranks[i]).ln().powi(2));
            }
            total += 1.0 - dcg / self.idcg[gi];
            // d(1 - DCG/IDCG)/ds = -(1/IDCG) * sum_i ddcg_dr[i] * dr_i/ds.
            let scale = -1.0 / self.idcg[gi];
            let mut local = vec![0.0; m];
            at = 0;
            for a in 0..m {
                for b in a + 1..m {
                    let e = pair_buf[at];
                    at += 1;
                    let d = e * (1.0 - e);
                    // r_a gains sigmoid(s_b - s_a): d r_a/d s_b = d, d r_a/d s_a = -d.
                    // r_b gains 1 - sigmoid(s_b - s_a): d r_b/d s_b = -d, d r_b/d s_a = d.
                    local[b] += scale * (ddcg_dr[a] * d - ddcg_dr[b] * d);
                    local[a] += scale * (-ddcg_dr[a] * d + ddcg_dr[b] * d);
                }
            }
            for (i, &row) in members.iter().enumerate() {
                grad[row] += local[i];
            }
        }
        total
    }
}
