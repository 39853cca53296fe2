use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Left singular vectors of `x` ordered by decreasing singular value, with the numerical rank
/// (singular values above `1e-10` of the largest). All `k` columns are returned even when the
/// rank is lower; the trailing ones then carry no reliable information about the span.
pub fn orth_basis(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let (n, k) = x.shape();
    if k == 0 || n < k {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize a {n}x{k} matrix"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite entry in orthonormalize".into(),
        ));
    }
    let qr = x.clone().qr();
    let q = qr.q();
    let svd = qr.r().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let smax = sv[order[0]];
    let rank = if smax > 0.0 {
        sv.iter().filter(|&&s| s > 1e-10 * smax).count()
    } else {
        0
    };
    let u = u.select_columns(order.iter());
    Ok((q * u, rank))
}

/// Orthonormal basis of the column span of `x` (thin QR followed by an SVD of R).
/// Fails unless `x` has full numerical column rank.
pub fn orthonormalize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, rank) = orth_basis(x)?;
    if rank < x.ncols() {
        return Err(Error::RankDeficient {
            rank,
            wanted: x.ncols(),
        });
    }
    Ok(q)
}
