//! Generators and reference evaluators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

/// A point of the simplex with every entry at least `min_entry` (flat Dirichlet otherwise).
pub fn random_simplex<R: Rng>(rng: &mut R, k: usize, min_entry: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - k as f64 * min_entry;
    raw.iter().map(|r| min_entry + free * r / total).collect()
}

pub fn random_reports<R: Rng>(rng: &mut R, m: usize, n: usize, min_entry: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| random_simplex(rng, n, min_entry)).collect()
}

/// `−ln p*_j(w)` by the raw product formula, for any `w ∈ ℝ^m`.
pub fn naive_loss(reports: &[Vec<f64>], w: &[f64], outcome: usize) -> f64 {
    let n = reports[0].len();
    let unnorm: Vec<f64> = (0..n)
        .map(|j| {
            reports
                .iter()
                .zip(w)
                .map(|(r, wi)| r[j].powf(*wi))
                .product()
        })
        .collect();
    -(unnorm[outcome] / unnorm.iter().sum::<f64>()).ln()
}

/// Central differences of [`naive_loss`] along each coordinate.
pub fn fd_gradient(reports: &[Vec<f64>], w: &[f64], outcome: usize, h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[i] += h;
            down[i] -= h;
            (naive_loss(reports, &up, outcome) - naive_loss(reports, &down, outcome)) / (2.0 * h)
        })
        .collect()
}
