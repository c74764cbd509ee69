use crate::error::{Error, Result};
use crate::modality::NUM_MODALITIES;
use crate::scalar::Scalar;

const C: usize = NUM_MODALITIES;
const RANK_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

/// Thin SVD of a `3 × d` probe weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSvd<T> {
    /// Descending.
    pub singular_values: [T; C],
    /// Left singular vectors `u_k` (each of length 3).
    pub left: [[T; C]; C],
    /// Right singular vectors for every non-negligible singular value; at
    /// least the top two.
    pub right: Vec<Vec<T>>,
}

impl<T: Scalar> ProbeSvd<T> {
    pub fn v1(&self) -> &[T] {
        &self.right[0]
    }

    pub fn v2(&self) -> &[T] {
        &self.right[1]
    }

    /// `Σ_k σ_k u_k v_kᵀ` over the retained components.
    pub fn reconstruct(&self) -> Vec<Vec<T>> {
        let d = self.right[0].len();
        let mut w = vec![vec![T::zero(); d]; C];
        for (k, v) in self.right.iter().enumerate() {
            for (r, row) in w.iter_mut().enumerate() {
                let s = self.singular_values[k] * self.left[k][r];
                for (x, &vj) in row.iter_mut().zip(v) {
                    *x = *x + s * vj;
                }
            }
        }
        w
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with the matching unit
/// eigenvectors.
pub fn symmetric_eigen3<T: Scalar>(m: [[T; C]; C]) -> ([T; C], [[T; C]; C]) {
    let mut a = m;
    let mut v = [[T::zero(); C]; C];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _ in 0..MAX_SWEEPS {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let scale = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off == T::zero() || off <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::c(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            // A ← Jᵀ A J with J the (p, q) rotation
            for k in 0..C {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..C {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));
    let values = order.map(|k| a[k][k]);
    let vectors = order.map(|k| [v[0][k], v[1][k], v[2][k]]);
    (values, vectors)
}

fn flip_to_convention<T: Scalar>(u: &mut [T; C], v: &mut [T]) {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
        u.iter_mut().for_each(|x| *x = -*x);
    }
}

/// SVD of `W` (`3 × d`) through the eigen-decomposition of `W Wᵀ`:
/// `σ_k = sqrt(λ_k)`, `v_k = Wᵀ u_k / σ_k`. Each right vector is flipped so
/// its largest-magnitude entry (lowest index on ties) is positive.
pub fn probe_svd<T: Scalar>(w: &[Vec<T>]) -> Result<ProbeSvd<T>> {
    if w.len() != C {
        return Err(Error::validation(format!("probe weight matrix must have {C} rows, got {}", w.len())));
    }
    let d = w[0].len();
    if d < 2 || w.iter().any(|r| r.len() != d) {
        return Err(Error::validation("probe weight rows must share a dimension of at least 2"));
    }
    if w.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::numeric("probe weights contain non-finite entries"));
    }
    let mut gram = [[T::zero(); C]; C];
    for i in 0..C {
        for j in i..C {
            let s: T = w[i].iter().zip(&w[j]).map(|(a, b)| *a * *b).sum();
            gram[i][j] = s;
            gram[j][i] = s;
        }
    }
    let (eig, vecs) = symmetric_eigen3(gram);
    let sigma = eig.map(|l| l.max(T::zero()).sqrt());
    if !(sigma[0] > T::zero()) || sigma[1] <= T::c(RANK_TOL) * sigma[0] {
        return Err(Error::numeric(format!(
            "probe weights have rank < 2 (singular values {}, {}, {})",
            sigma[0], sigma[1], sigma[2]
        )));
    }
    let mut left = vecs;
    let mut right = Vec::with_capacity(C);
    for k in 0..C {
        if sigma[k] <= T::c(RANK_TOL) * sigma[0] {
            break;
        }
        let mut v: Vec<T> = (0..d)
            .map(|j| (0..C).map(|r| w[r][j] * left[k][r]).sum::<T>() / sigma[k])
            .collect();
        flip_to_convention(&mut left[k], &mut v);
        right.push(v);
    }
    Ok(ProbeSvd {
        singular_values: sigma,
        left,
        right,
    })
}
