//! Rank-1 candidates from solved PSD blocks.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Leading-eigenvector candidate of a PSD matrix over `[Re v; Im v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1 {
    pub z: Vec<f64>,
    /// `lambda_2 / lambda_1`, zero for an exact rank-1 matrix or `Z = 0`.
    pub gap: f64,
    pub lambda1: f64,
}

/// `z = sqrt(lambda_1) u_1`, rotated so that bus `slack` has zero phase
/// (positive real voltage).
pub fn extract_rank1_candidate(zz: &DMatrix<f64>, slack: usize) -> Rank1 {
    let dim = zz.nrows();
    assert!(dim % 2 == 0 && zz.ncols() == dim, "Z must be 2N x 2N");
    let n = dim / 2;
    let sym = (zz + zz.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    let l2 = if dim > 1 { eig.eigenvalues[order[1]].max(0.0) } else { 0.0 };
    if !(l1 > 0.0) {
        return Rank1 {
            z: vec![0.0; dim],
            gap: 0.0,
            lambda1: l1.max(0.0),
        };
    }
    let u = eig.eigenvectors.column(order[0]);
    let scale = l1.sqrt();
    let v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(u[j], u[n + j]) * scale)
        .collect();
    let ref_phase = v[slack];
    let rot = if ref_phase.norm() > 0.0 {
        ref_phase.conj() / ref_phase.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let v: Vec<Complex64> = v.iter().map(|x| x * rot).collect();
    Rank1 {
        z: super::qcqp::stack(&v),
        gap: l2 / l1,
        lambda1: l1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rank_one_recovered() {
        let z0 = [1.02, 0.97, 0.99, 0.0, -0.03, 0.01];
        let zv = nalgebra::DVector::from_row_slice(&z0);
        let res = extract_rank1_candidate(&(&zv * zv.transpose()), 0);
        assert!(res.gap < 1e-12);
        for (a, b) in res.z.iter().zip(&z0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_unit_gap() {
        let res = extract_rank1_candidate(&DMatrix::identity(2, 2), 0);
        assert!((res.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_gap_zero() {
        let res = extract_rank1_candidate(&DMatrix::zeros(4, 4), 0);
        assert_eq!(res.gap, 0.0);
    }
}
