//! Small dense vector helpers and a one-sided Jacobi SVD.

use crate::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi = *xi * alpha;
    }
}

/// Singular values and right singular vectors of a tall or wide matrix.
#[derive(Debug, Clone)]
pub struct RightSingular<T> {
    /// Singular values in descending order.
    pub values: Vec<T>,
    /// Unit right singular vectors, one per entry of `values`.
    pub vectors: Vec<Vec<T>>,
}

/// Right singular vectors of `rows` (an `m x d` matrix given row by row).
///
/// Works on the transpose `d x m` with Hestenes one-sided Jacobi rotations,
/// so the cost is `O(m^2 d)` per sweep and the `d x d` Gram matrix is never
/// formed. The returned vectors are the eigenvectors of `rows^T rows` with
/// eigenvalues `values[i]^2`. Columns that collapse to zero norm are dropped.
pub fn right_singular_vectors<T: Scalar>(rows: &[Vec<T>]) -> RightSingular<T> {
    let m = rows.len();
    if m == 0 {
        return RightSingular {
            values: Vec::new(),
            vectors: Vec::new(),
        };
    }
    // Columns of the d x m transpose are exactly the input rows.
    let mut cols: Vec<Vec<T>> = rows.to_vec();
    let tol = T::epsilon() * T::of(4.0);

    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, T)> = cols.iter().map(|c| norm(c)).enumerate().collect();
    // Stable sort keeps first-occurrence order among equal singular values.
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));

    let largest = order.first().map(|o| o.1).unwrap_or(T::zero());
    let floor = largest * T::epsilon() * T::of((m.max(cols[0].len()) * 8) as f64);
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (idx, sigma) in order {
        if sigma <= floor || sigma == T::zero() {
            continue;
        }
        let mut v = cols[idx].clone();
        scale(T::one() / sigma, &mut v);
        values.push(sigma);
        vectors.push(v);
    }
    RightSingular { values, vectors }
}
