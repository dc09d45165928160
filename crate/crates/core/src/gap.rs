//! Classical gap distances between subspaces via principal angles.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::operator::spectral_norm;
use crate::space::{same_space, SubspaceBasis, C64};

/// Cosines of the principal angles between `U` and `V`, one per direction of
/// `U`, in increasing order of the angle. Directions of `U` beyond `dim V`
/// get cosine 0.
pub fn principal_cosines(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<Vec<f64>> {
    same_space(u.space(), v.space())?;
    let p = u.dim();
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut cos = if v.dim() == 0 {
        Vec::new()
    } else {
        let g: DMatrix<C64> = v.iso_matrix().adjoint() * u.iso_matrix();
        g.singular_values().iter().map(|s| s.min(1.0)).collect::<Vec<_>>()
    };
    cos.sort_by(|a, b| b.total_cmp(a));
    cos.resize(p, 0.0);
    Ok(cos)
}

/// Principal angles between `U` and `V`, increasing, one per direction of `U`.
/// Angles below pi/4 come from the sines of `(I - P_V) Q_U`, the rest from the
/// cosines; arccos alone loses half the digits near 0.
pub fn principal_angles(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<Vec<f64>> {
    let cos = principal_cosines(u, v)?;
    if cos.is_empty() {
        return Ok(cos);
    }
    let qu = u.iso_matrix();
    let r = if v.is_zero() {
        qu
    } else {
        let qv = v.iso_matrix();
        &qu - &qv * (qv.adjoint() * &qu)
    };
    let mut sin: Vec<f64> = r.singular_values().iter().map(|s| s.min(1.0)).collect();
    sin.sort_by(f64::total_cmp);
    sin.resize(cos.len(), 1.0);
    Ok(cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| if c * c >= 0.5 { s.asin() } else { c.acos() })
        .collect())
}

/// `||(I - P_V) P_U||`, the sine of the largest principal angle.
pub fn delta(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    same_space(u.space(), v.space())?;
    if u.is_zero() {
        return Ok(0.0);
    }
    if v.is_zero() {
        return Ok(1.0);
    }
    let qu = u.iso_matrix();
    let qv = v.iso_matrix();
    let r = &qu - &qv * (qv.adjoint() * &qu);
    Ok(spectral_norm(&r).min(1.0))
}

pub fn gap_hat(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    Ok(delta(u, v)?.max(delta(v, u)?))
}

/// `sup_{u in S_U} inf_{v in S_V} ||u - v|| = 2 sin(theta_max / 2)`, with
/// `d({0}, V) = 0` and `d(U, {0}) = 2`.
pub fn d_metric(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    same_space(u.space(), v.space())?;
    if u.is_zero() {
        return Ok(0.0);
    }
    if v.is_zero() {
        return Ok(2.0);
    }
    let s = delta(u, v)?;
    let c = principal_cosines(u, v)?.last().copied().unwrap_or(0.0);
    let theta = s.atan2(c);
    Ok(2.0 * (theta / 2.0).sin())
}

pub fn dhat_metric(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    Ok(d_metric(u, v)?.max(d_metric(v, u)?))
}
