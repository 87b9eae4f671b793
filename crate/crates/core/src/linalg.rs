//! Small symmetric eigensolver (cyclic Jacobi) and PSD square roots.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigenvalues below this are treated as rounding noise and clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Eigen-decomposition of a symmetric matrix. Returns eigenvalues and a
/// matrix whose columns are the matching orthonormal eigenvectors.
pub fn symmetric_eigen(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::dim("symmetric_eigen", a.shape(), a.shape()));
    }
    let mut m = a.clone();
    let mut v = Tensor::identity(n);
    let scale = a.data().iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m.get(p, q).powi(2))
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let values = (0..n).map(|i| m.get(i, i)).collect();
    Ok((values, v))
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Tensor) -> Tensor {
    let n = a.rows();
    let mut out = a.clone();
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    out
}

/// Eigenvalues of a PSD matrix, small negatives clamped to zero.
pub fn psd_eigenvalues(a: &Tensor) -> Result<Vec<f64>> {
    let (values, _) = symmetric_eigen(&symmetrize(a))?;
    values.into_iter().map(clamp_psd).collect()
}

fn clamp_psd(lambda: f64) -> Result<f64> {
    if lambda >= 0.0 {
        Ok(lambda)
    } else if lambda >= -PSD_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::Numeric(format!("matrix is not PSD: eigenvalue {lambda:e}")))
    }
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrtm_psd(a: &Tensor) -> Result<Tensor> {
    let (values, vecs) = symmetric_eigen(&symmetrize(a))?;
    let n = a.rows();
    let roots = values
        .into_iter()
        .map(|l| clamp_psd(l).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| vecs.get(i, k) * roots[k] * vecs.get(j, k)).sum();
            out.set(i, j, s);
        }
    }
    Ok(symmetrize(&out))
}

pub fn trace(a: &Tensor) -> f64 {
    (0..a.rows().min(a.cols())).map(|i| a.get(i, i)).sum()
}
