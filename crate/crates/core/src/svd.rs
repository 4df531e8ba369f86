//! Truncated SVD: an exact route through a full decomposition and a
//! randomized range-finder route with oversampling and subspace iteration.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedSvdConfig {
    pub oversampling: usize,
    /// Subspace iterations always performed.
    pub power_iterations: usize,
    /// Further iterations continue while the leading singular values still
    /// move by more than `tolerance` (relative), up to this many in total.
    pub max_power_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for RandomizedSvdConfig {
    fn default() -> Self {
        RandomizedSvdConfig {
            oversampling: 10,
            power_iterations: 2,
            max_power_iterations: 60,
            tolerance: 1e-12,
            seed: 0,
        }
    }
}

/// Leading singular triplets (right side only).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `k × d`; row `i` is the `i`-th right singular vector.
    pub v_t: DMatrix<f64>,
}

/// Singular values and right vectors from a full decomposition, sorted descending.
fn sorted_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rows: Vec<_> = order.iter().map(|&i| v_t.row(i).into_owned()).collect();
    (values, DMatrix::from_rows(&rows))
}

pub fn exact_svd(a: &DMatrix<f64>, k: usize) -> TruncatedSvd {
    let (values, v_t) = sorted_svd(a);
    let k = k.min(values.len());
    TruncatedSvd {
        singular_values: values[..k].to_vec(),
        v_t: v_t.rows(0, k).into_owned(),
    }
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

pub fn randomized_svd(a: &DMatrix<f64>, k: usize, config: &RandomizedSvdConfig) -> TruncatedSvd {
    let (m, n) = a.shape();
    let l = (k + config.oversampling).min(m.min(n));
    let k = k.min(l);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let omega = DMatrix::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_basis(a * omega);

    let mut previous: Option<Vec<f64>> = None;
    let mut iteration = 0;
    loop {
        let project = q.transpose() * a;
        let (values, v_t) = sorted_svd(&project);
        let leading = &values[..k];
        let settled = match &previous {
            Some(prev) => prev.iter().zip(leading).all(|(p, s)| {
                (p - s).abs() <= config.tolerance * s.abs().max(f64::MIN_POSITIVE)
            }),
            None => false,
        };
        let done = iteration >= config.max_power_iterations
            || (iteration >= config.power_iterations && (settled || l == m.min(n)));
        if done {
            return TruncatedSvd {
                singular_values: leading.to_vec(),
                v_t: v_t.rows(0, k).into_owned(),
            };
        }
        previous = Some(leading.to_vec());
        let z = orthonormal_basis(a.transpose() * &q);
        q = orthonormal_basis(a * z);
        iteration += 1;
    }
}

/// Share of the squared Frobenius norm captured by the given singular values.
pub fn energy_fraction(a: &DMatrix<f64>, singular_values: &[f64]) -> f64 {
    let total = a.norm_squared();
    if total == 0.0 {
        return 0.0;
    }
    singular_values.iter().map(|s| s * s).sum::<f64>() / total
}

/// Truncated SVD used for feature reduction: exact when the matrix is small
/// or the sketch would cover the whole row space, randomized otherwise.
/// `k` is clamped to the numerical rank.
pub fn truncated_svd(a: &DMatrix<f64>, k: usize, config: &RandomizedSvdConfig) -> Result<TruncatedSvd> {
    let (m, n) = a.shape();
    if k == 0 || m == 0 || n == 0 {
        return Err(Error::Features(format!("cannot fit a rank-{k} SVD on a {m}×{n} matrix")));
    }
    let small = m.min(n) <= k + config.oversampling || n <= 64;
    let mut svd = if small {
        exact_svd(a, k)
    } else {
        randomized_svd(a, k, config)
    };
    let largest = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = largest * m.max(n) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().take_while(|s| **s > cutoff).count().max(1);
    if rank < k {
        log::warn!("requested {k} components but the training matrix has rank {rank}; clamping");
        svd.singular_values.truncate(rank);
        svd.v_t = svd.v_t.rows(0, rank).into_owned();
    }
    Ok(svd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = exact_svd(&DMatrix::identity(3, 3), 3);
        for s in svd.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_reconstruction() {
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let v = DMatrix::from_row_slice(1, 3, &[3.0, 0.0, -2.0]);
        let a = &u * &v;
        let svd = truncated_svd(&a, 1, &RandomizedSvdConfig::default()).unwrap();
        let reduced = &a * svd.v_t.transpose();
        let back = reduced * &svd.v_t;
        assert!((back - &a).norm() / a.norm() < 1e-9);
    }

    #[test]
    fn clamps_to_rank() {
        let u = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let v = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 0.0, 2.0]);
        let svd = truncated_svd(&(u * v), 3, &RandomizedSvdConfig::default()).unwrap();
        assert_eq!(svd.singular_values.len(), 1);
        assert_eq!(svd.v_t.nrows(), 1);
    }

    #[test]
    fn randomized_matches_exact_on_decaying_spectrum() {
        let a = random(120, 90, 5);
        let svd = a.clone().svd(true, true);
        let decayed = DMatrix::from_diagonal(&svd.singular_values.map_with_location(|i, _, _| 0.5f64.powi(i as i32)));
        let b = svd.u.unwrap() * decayed * svd.v_t.unwrap();
        let exact = exact_svd(&b, 8);
        let approx = randomized_svd(&b, 8, &RandomizedSvdConfig { max_power_iterations: 2, ..Default::default() });
        for (e, r) in exact.singular_values.iter().zip(&approx.singular_values) {
            assert!((e - r).abs() / e < 1e-6);
        }
    }

    #[test]
    fn randomized_is_seed_deterministic() {
        let a = random(60, 40, 9);
        let c = RandomizedSvdConfig::default();
        assert_eq!(randomized_svd(&a, 5, &c), randomized_svd(&a, 5, &c));
    }
}
