//! Truncated SVD: exact one-sided Jacobi for small problems, randomized
//! range finding with power iterations otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{jacobi_svd, Matrix, Svd};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
    /// Use the exact decomposition when `min(rows, cols)` is at most this.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversampling: 10,
            power_iterations: 4,
            dense_threshold: 64,
            seed: 0,
        }
    }
}

/// Leading `k` singular triplets of `x` (fewer if `k > min(rows, cols)`),
/// with each left vector's largest-magnitude entry made positive.
pub fn truncated_svd(x: &Matrix, k: usize, opts: &SvdOptions) -> Svd {
    let small = x.rows().min(x.cols());
    let k = k.min(small);
    let mut svd = if small <= opts.dense_threshold {
        jacobi_svd(x)
    } else {
        randomized_svd(x, k, opts)
    };
    svd.u = svd.u.truncate_cols(k);
    svd.v = svd.v.truncate_cols(k);
    svd.singular_values.truncate(k);
    fix_signs(&mut svd);
    svd
}

fn randomized_svd(x: &Matrix, k: usize, opts: &SvdOptions) -> Svd {
    let (m, n) = (x.rows(), x.cols());
    let l = (k + opts.oversampling).min(m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = Matrix::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = x.matmul(&omega).qr_q();
    for _ in 0..opts.power_iterations {
        let z = x.t_matmul(&q).qr_q();
        q = x.matmul(&z).qr_q();
    }
    // B = Qᵀ X is l x n; its SVD lifts back through Q
    let b = q.t_matmul(x);
    let small = jacobi_svd(&b);
    Svd {
        u: q.matmul(&small.u),
        singular_values: small.singular_values,
        v: small.v,
    }
}

fn fix_signs(svd: &mut Svd) {
    for j in 0..svd.singular_values.len() {
        let col = svd.u.column(j);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            for r in 0..svd.u.rows() {
                svd.u[(r, j)] = -svd.u[(r, j)];
            }
            for r in 0..svd.v.rows() {
                svd.v[(r, j)] = -svd.v[(r, j)];
            }
        }
    }
}
