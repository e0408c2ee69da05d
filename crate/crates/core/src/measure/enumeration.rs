use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A bijection between the finite rectangle `{0..num_functions} × {time nodes}`
/// and `{0 .. num_functions * times.len()}`.
///
/// Seed 0 gives the diagonal (Cantor) order: pairs `(n, j)` sorted by `n + j`,
/// ties broken by smaller `n`. Any other seed shuffles that order with a
/// seeded ChaCha stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    horizon: f64,
    times: Vec<f64>,
    num_functions: usize,
    seed: u64,
    order: Vec<(usize, usize)>,
    promoted: Vec<(usize, usize)>,
}

impl Enumeration {
    /// `times` must be strictly increasing and lie in `[0, horizon)`.
    pub fn new(num_functions: usize, times: Vec<f64>, horizon: f64, seed: u64) -> Result<Self> {
        if num_functions == 0 || times.is_empty() {
            return Err(Error::InvalidEnumeration("empty index rectangle".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidEnumeration("times must be strictly increasing".into()));
        }
        if !(times[0] >= 0.0 && *times.last().unwrap() < horizon) {
            return Err(Error::InvalidEnumeration(format!("times must lie in [0, {horizon})")));
        }
        let mut order = diagonal_order(num_functions, times.len());
        if seed != 0 {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(Self { horizon, times, num_functions, seed, order, promoted: Vec::new() })
    }

    /// Dyadic nodes `j * 2^-level_step` in `[0, horizon)` with step `node_step`.
    pub fn on_nodes(num_functions: usize, horizon: f64, node_step: f64, seed: u64) -> Result<Self> {
        if !(node_step > 0.0) {
            return Err(Error::InvalidEnumeration("node step must be positive".into()));
        }
        let count = (horizon / node_step).round() as usize;
        let times = (0..count).map(|j| j as f64 * node_step).filter(|t| *t < horizon).collect();
        Self::new(num_functions, times, horizon, seed)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_functions(&self) -> usize {
        self.num_functions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `(function index, time index)` at position `k`.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        self.order[k]
    }

    /// `(function index, time)` at position `k`.
    pub fn pair_time(&self, k: usize) -> (usize, f64) {
        let (n, j) = self.order[k];
        (n, self.times[j])
    }

    /// Position of `(n, j)`, `None` outside the rectangle.
    pub fn index_of(&self, n: usize, j: usize) -> Option<usize> {
        self.order.iter().position(|&p| p == (n, j))
    }

    /// Positions `m^s_0 < m^s_1 < ...` of the pairs whose time is `>= s`.
    pub fn subsequence(&self, s: f64) -> Result<Vec<usize>> {
        if !(s < self.horizon) {
            return Err(Error::StartBeyondHorizon { s, horizon: self.horizon });
        }
        Ok((0..self.order.len()).filter(|&k| self.times[self.order[k].1] >= s).collect())
    }

    /// New enumeration with `(n, j)` moved to position 0, the rest keeping
    /// their relative order.
    pub fn promote(&self, n: usize, j: usize) -> Result<Self> {
        let k = self.index_of(n, j).ok_or_else(|| Error::InvalidEnumeration(format!("pair ({n}, {j}) outside the rectangle")))?;
        let mut out = self.clone();
        let p = out.order.remove(k);
        out.order.insert(0, p);
        out.promoted.push((n, j));
        Ok(out)
    }

    /// Identifier derived from the order itself, so equal ids mean equal maps.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        for &(n, j) in &self.order {
            h.update((n as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
        }
        for t in &self.times {
            h.update(t.to_le_bytes());
        }
        let base = if self.seed == 0 { "diagonal".to_string() } else { format!("shuffle{}", self.seed) };
        format!("{base}-{}x{}-{}", self.num_functions, self.times.len(), &hex::encode(h.finalize())[..8])
    }
}

fn diagonal_order(nf: usize, nt: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(nf * nt);
    for sum in 0..(nf + nt - 1) {
        for n in 0..=sum.min(nf - 1) {
            let j = sum - n;
            if j < nt {
                out.push((n, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_order_on_two_by_two() {
        let e = Enumeration::new(2, vec![0.0, 0.5], 1.0, 0).unwrap();
        let pairs: Vec<_> = (0..4).map(|k| e.pair(k)).collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(e.subsequence(0.0).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(e.subsequence(0.25).unwrap(), vec![1, 3]);
        assert_eq!(e.subsequence(0.5).unwrap(), vec![1, 3]);
        assert!(matches!(e.subsequence(1.0), Err(Error::StartBeyondHorizon { .. })));
    }

    #[test]
    fn every_seed_gives_a_bijection() {
        for seed in 0..5 {
            let e = Enumeration::new(7, vec![0.0, 0.1, 0.2], 0.5, seed).unwrap();
            let mut seen = [false; 21];
            for k in 0..e.len() {
                let (n, j) = e.pair(k);
                let slot = n * 3 + j;
                assert!(!seen[slot]);
                seen[slot] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn promotion_moves_pair_to_front() {
        let e = Enumeration::new(3, vec![0.0, 0.25], 0.5, 0).unwrap();
        let p = e.promote(2, 1).unwrap();
        assert_eq!(p.pair(0), (2, 1));
        assert_eq!(p.len(), e.len());
        assert_ne!(p.id(), e.id());
    }

    #[test]
    fn node_constructor_excludes_horizon() {
        let e = Enumeration::on_nodes(1, 1.0, 0.25, 0).unwrap();
        assert_eq!(e.times(), &[0.0, 0.25, 0.5, 0.75]);
    }
}
