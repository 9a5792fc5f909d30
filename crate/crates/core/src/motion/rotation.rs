//! Rotation helpers: the 6D column representation, yaw extraction and
//! geodesic distances.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;
const DEGENERATE_TOL: f64 = 1e-9;

/// Checks `RᵀR = I` and `det R = 1` to within `1e-6`.
pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let err = (r.transpose() * r - Matrix3::identity()).amax();
    if !err.is_finite() || err > ORTHONORMAL_TOL {
        return Err(Error::InvalidRotation(format!(
            "not orthonormal (max |RᵀR - I| = {err:e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(Error::InvalidRotation(format!("determinant {det} != 1")));
    }
    Ok(())
}

/// First two columns of `r`, column-major.
pub fn rot_to_6d(r: &Matrix3<f64>) -> Result<[f64; 6]> {
    check_rotation(r)?;
    Ok(rot_to_6d_unchecked(r))
}

pub(crate) fn rot_to_6d_unchecked(r: &Matrix3<f64>) -> [f64; 6] {
    [
        r[(0, 0)].clamp(-1.0, 1.0),
        r[(1, 0)].clamp(-1.0, 1.0),
        r[(2, 0)].clamp(-1.0, 1.0),
        r[(0, 1)].clamp(-1.0, 1.0),
        r[(1, 1)].clamp(-1.0, 1.0),
        r[(2, 1)].clamp(-1.0, 1.0),
    ]
}

/// Gram–Schmidt recovery of a rotation matrix from its 6D representation.
/// Scale-invariant in both columns.
pub fn sixd_to_rot(v: &[f64; 6]) -> Result<Matrix3<f64>> {
    let a1 = Vector3::new(v[0], v[1], v[2]);
    let a2 = Vector3::new(v[3], v[4], v[5]);
    let n1 = a1.norm();
    let n2 = a2.norm();
    if !(n1.is_finite() && n2.is_finite()) || n1 <= DEGENERATE_TOL || n2 <= DEGENERATE_TOL {
        return Err(Error::DegenerateRotation);
    }
    let b1 = a1 / n1;
    if b1.cross(&(a2 / n2)).norm() <= DEGENERATE_TOL {
        return Err(Error::DegenerateRotation);
    }
    let u2 = a2 - b1 * b1.dot(&a2);
    let b2 = u2.normalize();
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Heading angle: direction of the rotated +X axis projected on the ground plane.
pub fn yaw_of(r: &Matrix3<f64>) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

pub fn yaw_matrix(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Splits `r` into `Rz(yaw) * residual`, where the residual carries pitch and roll.
pub fn split_yaw(r: &Matrix3<f64>) -> (f64, Matrix3<f64>) {
    let yaw = yaw_of(r);
    (yaw, yaw_matrix(-yaw) * r)
}

/// Rotation vector `log(R)` (axis times angle).
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

pub fn quat_from_matrix(r: &Matrix3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r))
}

/// Geodesic angle between two unit quaternions, `2 acos |<q, p>|`.
pub fn quat_geodesic(q: &UnitQuaternion<f64>, p: &UnitQuaternion<f64>) -> f64 {
    let dot = q.coords.dot(&p.coords).abs().min(1.0);
    2.0 * dot.acos()
}

/// Geodesic angle between two rotation matrices.
pub fn rot_geodesic(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    quat_geodesic(&quat_from_matrix(a), &quat_from_matrix(b))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w += TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_and_yaw_6d() {
        assert_eq!(rot_to_6d(&Matrix3::identity()).unwrap(), [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = rot_to_6d(&yaw_matrix(FRAC_PI_2)).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_orthonormal_rejected() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(rot_to_6d(&m), Err(Error::InvalidRotation(_))));
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(rot_to_6d(&reflect), Err(Error::InvalidRotation(_))));
    }

    #[test]
    fn scaled_columns_decode_to_identity() {
        let r = sixd_to_rot(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]).unwrap();
        assert!((r - Matrix3::identity()).amax() < 1e-15);
        let r = sixd_to_rot(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r, Matrix3::identity());
    }

    #[test]
    fn degenerate_columns() {
        assert!(matches!(
            sixd_to_rot(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            Err(Error::DegenerateRotation)
        ));
        assert!(matches!(
            sixd_to_rot(&[0.0; 6]),
            Err(Error::DegenerateRotation)
        ));
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(6.2) - (6.2 - std::f64::consts::TAU)).abs() < 1e-15);
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn split_yaw_recomposes() {
        let r = (Rotation3::from_euler_angles(0.3, -0.7, 1.9)).into_inner();
        let (yaw, residual) = split_yaw(&r);
        assert!((yaw_matrix(yaw) * residual - r).amax() < 1e-14);
        assert!(yaw_of(&residual).abs() < 1e-14);
    }
}
