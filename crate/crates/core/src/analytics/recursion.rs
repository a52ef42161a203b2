//! Conditioning recursion for `L_n`.
//!
//! Splitting `n ≥ 3` packets into `i` left and `n − i` right gives
//! `l_n = l_i + l_{n−i}`, with `l_0 = l_1 = 1` and `l_2 = 2`. Taking
//! expectations and moving the `i ∈ {0, n}` self terms to the left side:
//!
//! `L_n (1 − pⁿ − qⁿ) = Σ_{i=1}^{n−1} C(n,i) pⁱ q^{n−i} (L_i + L_{n−i}) + (pⁿ + qⁿ) L_0`.

use super::{CriStats, SplitParams};

/// Binomial terms further than this many standard deviations from the mean
/// are below `e^{-800}` and are dropped.
const WINDOW_SIGMAS: f64 = 40.0;

/// Bottom-up table of `L_0 ..= L_{n_max}`.
#[derive(Debug, Clone)]
pub struct CriTable {
    params: SplitParams,
    values: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl CriTable {
    pub fn new(params: SplitParams) -> Self {
        CriTable {
            params,
            values: vec![1.0, 1.0, 2.0],
            ln_fact: vec![0.0, 0.0, std::f64::consts::LN_2],
        }
    }

    pub fn build(params: SplitParams, n_max: usize) -> Self {
        let mut t = CriTable::new(params);
        t.extend_to(n_max);
        t
    }

    pub fn params(&self) -> SplitParams {
        self.params
    }

    /// Largest `n` currently tabulated.
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn extend_to(&mut self, n_max: usize) {
        let SplitParams { p, q, .. } = self.params;
        let (lp, lq) = (p.ln(), q.ln());
        while self.ln_fact.len() <= n_max {
            let k = self.ln_fact.len();
            let prev = self.ln_fact[k - 1];
            self.ln_fact.push(prev + (k as f64).ln());
        }
        while self.values.len() <= n_max {
            let n = self.values.len();
            let nf = n as f64;
            let half = WINDOW_SIGMAS * (nf * p * q).sqrt() + 10.0;
            let lo = ((nf * p - half).floor().max(1.0)) as usize;
            let hi = ((nf * p + half).ceil() as usize).min(n - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                let ln_w =
                    self.ln_fact[n] - self.ln_fact[i] - self.ln_fact[n - i] + i as f64 * lp + (n - i) as f64 * lq;
                acc += ln_w.exp() * (self.values[i] + self.values[n - i]);
            }
            let edge = (nf * lp).exp() + (nf * lq).exp();
            self.values.push((acc + edge) / (1.0 - edge));
        }
    }

    /// `L_n`, extending the table if needed.
    pub fn get(&mut self, n: usize) -> f64 {
        self.extend_to(n);
        self.values[n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stats(&mut self, n: usize) -> CriStats {
        let l = self.get(n);
        CriStats {
            n: n as u64,
            expected_length: l,
            throughput: n as f64 / l,
        }
    }
}

/// `L_n` from the recursion.
pub fn expected_cri_recursive(n: usize, params: SplitParams) -> f64 {
    CriTable::build(params, n).values[n]
}

/// `T_n = n / L_n`.
pub fn conditional_throughput(n: usize, params: SplitParams) -> f64 {
    n as f64 / expected_cri_recursive(n, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        let fair = SplitParams::fair();
        assert_eq!(expected_cri_recursive(0, fair), 1.0);
        assert_eq!(expected_cri_recursive(1, fair), 1.0);
        assert_eq!(expected_cri_recursive(2, fair), 2.0);
        assert!((expected_cri_recursive(3, fair) - 10.0 / 3.0).abs() < 1e-14);
        assert!((expected_cri_recursive(4, fair) - 13.0 / 3.0).abs() < 1e-14);
        assert!((expected_cri_recursive(5, fair) - 5.4).abs() < 1e-13);
        assert_eq!(expected_cri_recursive(1, SplitParams::new(0.3).unwrap()), 1.0);
        assert!((conditional_throughput(3, fair) - 0.9).abs() < 1e-15);
        assert_eq!(conditional_throughput(2, fair), 1.0);
    }

    #[test]
    fn window_matches_full_sum() {
        // a table built with every binomial term agrees with the windowed one
        let params = SplitParams::new(0.3).unwrap();
        let table = CriTable::build(params, 400);
        let mut full = vec![1.0, 1.0, 2.0];
        let mut ln_fact = vec![0.0f64];
        for k in 1..=400 {
            ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
        }
        for n in 3..=400usize {
            let mut acc = 0.0;
            for i in 1..n {
                let w = (ln_fact[n] - ln_fact[i] - ln_fact[n - i]
                    + i as f64 * params.p.ln()
                    + (n - i) as f64 * params.q.ln())
                .exp();
                acc += w * (full[i] + full[n - i]);
            }
            let edge = params.p.powi(n as i32) + params.q.powi(n as i32);
            full.push((acc + edge) / (1.0 - edge));
        }
        for (n, (got, want)) in table.values().iter().zip(&full).enumerate() {
            assert!((got - want).abs() <= 1e-11 * want, "n={n}");
        }
    }

    #[test]
    fn lengths_grow_sublinearly_bounded() {
        let table = CriTable::build(SplitParams::fair(), 3000);
        for (n, &l) in table.values().iter().enumerate() {
            assert!(l <= 2.0 * n as f64 + 1.0);
            if n > 0 {
                assert!(l >= table.values()[n - 1]);
            }
        }
    }
}
