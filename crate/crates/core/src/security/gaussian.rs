//! Gaussian-state helpers: symplectic spectra and von Neumann entropies.

use nalgebra::{DMatrix, Matrix2, Matrix4};

use super::SecurityError;

/// Tolerance below 1 accepted for a symplectic eigenvalue before the state is
/// declared non-physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Entropy function `g(x) = (x+1)·log2(x+1) − x·log2(x)` of a thermal mode with
/// mean photon number `x`.
pub fn g(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1e-9 {
        // (x+1)·log2(x+1) = x/ln2 + x²/(2 ln2) + O(x³)
        return (-x * x.ln() + x + 0.5 * x * x) / std::f64::consts::LN_2;
    }
    ((x + 1.0) * x.ln_1p() - x * x.ln()) / std::f64::consts::LN_2
}

/// Entropy (bits) of a Gaussian state given its symplectic eigenvalues.
pub fn entropy(nus: &[f64]) -> f64 {
    nus.iter().map(|&nu| g((nu - 1.0) / 2.0)).sum()
}

/// Block-diagonal symplectic form `⊕ [[0, 1], [−1, 0]]` on `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), SecurityError> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(SecurityError::Asymmetric(asym));
    }
    Ok(())
}

/// Symplectic eigenvalues of a two-mode covariance matrix, `(ν₋, ν₊)` with
/// `ν₋ ≤ ν₊`, from the symplectic invariants `Δ = det A + det B + 2 det C` and
/// `det γ`.
pub fn symplectic_eigenvalues(cov: &Matrix4<f64>) -> Result<(f64, f64), SecurityError> {
    let dynamic = DMatrix::from_column_slice(4, 4, cov.as_slice());
    check_symmetric(&dynamic)?;
    let a: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 0).into_owned();
    let b: Matrix2<f64> = cov.fixed_view::<2, 2>(2, 2).into_owned();
    let c: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 2).into_owned();
    let delta = a.determinant() + b.determinant() + 2.0 * c.determinant();
    // det γ = det A · det(B − Cᵀ A⁻¹ C); stays accurate for nearly pure states
    let det = match a.try_inverse() {
        Some(a_inv) => a.determinant() * (b - c.transpose() * a_inv * c).determinant(),
        None => cov.determinant(),
    };
    let disc2 = delta * delta - 4.0 * det;
    if disc2 < 1e-6 * delta * delta {
        // near-degenerate pair: rounding in Δ² − 4·det is amplified by the
        // square root, so use the Lipschitz-stable general route instead
        let nus = symplectic_spectrum(&dynamic)?;
        return Ok((nus[0], nus[1]));
    }
    let disc = disc2.sqrt();
    let lo2 = 0.5 * (delta - disc);
    let hi2 = 0.5 * (delta + disc);
    // the smaller root loses precision when Δ² ≫ det; recover it from the product
    let lo2 = if hi2 > 0.0 && lo2 < 0.5 * hi2 { det / hi2 } else { lo2 };
    if !(lo2 > 0.0) {
        return Err(SecurityError::NonPhysical(lo2.max(0.0).sqrt()));
    }
    let (lo, hi) = (lo2.sqrt(), hi2.sqrt());
    if lo < 1.0 - PHYSICALITY_TOL {
        return Err(SecurityError::NonPhysical(lo));
    }
    Ok((lo, hi))
}

/// Symplectic spectrum of an `n`-mode covariance matrix, ascending.
///
/// Uses the symmetric form `−(γ^{½} Ω γ^{½})²`, whose eigenvalues are the
/// squared symplectic eigenvalues, each appearing twice.
pub fn symplectic_spectrum(cov: &DMatrix<f64>) -> Result<Vec<f64>, SecurityError> {
    let dim = cov.nrows();
    assert_eq!(dim, cov.ncols());
    assert!(dim % 2 == 0, "covariance dimension must be even");
    check_symmetric(cov)?;
    let sym = 0.5 * (cov + cov.transpose());
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(SecurityError::NonPhysical(0.0));
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let s = &root * symplectic_form(dim / 2) * &root;
    let m = -(&s * &s);
    let m = 0.5 * (&m + m.transpose());
    let mut squares: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    squares.sort_by(|a, b| a.total_cmp(b));
    let nus: Vec<f64> = squares
        .chunks(2)
        .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
        .collect();
    if nus[0] < 1.0 - PHYSICALITY_TOL {
        return Err(SecurityError::NonPhysical(nus[0]));
    }
    Ok(nus)
}

/// Covariance of the modes in `keep` conditioned on a heterodyne measurement of
/// mode `measured`: `γ_X − σ (γ_B + 𝟙)⁻¹ σᵀ`.
pub fn condition_on_heterodyne(
    cov: &DMatrix<f64>,
    measured: usize,
    keep: &[usize],
) -> DMatrix<f64> {
    let idx_keep: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let idx_b = [2 * measured, 2 * measured + 1];
    let gx = cov.select_rows(&idx_keep).select_columns(&idx_keep);
    let gb = cov.select_rows(&idx_b).select_columns(&idx_b);
    let sigma = cov.select_rows(&idx_keep).select_columns(&idx_b);
    let inv = (gb + DMatrix::identity(2, 2))
        .try_inverse()
        .expect("γ_B + 𝟙 is positive definite");
    let out = gx - &sigma * inv * sigma.transpose();
    0.5 * (&out + out.transpose())
}

/// Two-mode squeezed vacuum with quadrature variance `v` on both modes.
pub fn two_mode_squeezed(v: f64) -> Matrix4<f64> {
    let c = (v * v - 1.0).max(0.0).sqrt();
    Matrix4::new(
        v, 0.0, c, 0.0, //
        0.0, v, 0.0, -c, //
        c, 0.0, v, 0.0, //
        0.0, -c, 0.0, v,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_is_zero_at_origin_and_positive() {
        assert_eq!(g(0.0), 0.0);
        assert_eq!(g(-1e-3), 0.0);
        for &x in &[1e-14, 1e-10, 1e-9, 1e-6, 0.1, 1.0, 10.0, 1e6] {
            assert!(g(x) > 0.0);
        }
        // g(1) = 2 bits
        assert!((g(1.0) - 2.0).abs() < 1e-14);
        // series and closed form agree at the switch point
        let x = 1e-9;
        let direct = ((x + 1.0) * f64::ln_1p(x) - x * x.ln()) / std::f64::consts::LN_2;
        assert!(((g(x * 0.999_999) - direct) / direct).abs() < 1e-5);
    }

    #[test]
    fn vacuum_and_pure_states() {
        let (lo, hi) = symplectic_eigenvalues(&Matrix4::identity()).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = symplectic_eigenvalues(&two_mode_squeezed(3.0)).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        let tms = two_mode_squeezed(8.44);
        let dynamic = DMatrix::from_column_slice(4, 4, tms.as_slice());
        for nu in symplectic_spectrum(&dynamic).unwrap() {
            assert!((nu - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_and_unphysical_inputs() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 0.5;
        assert!(matches!(
            symplectic_eigenvalues(&m),
            Err(SecurityError::Asymmetric(_))
        ));
        let squeezed_too_much = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 0.5, 1.0, 1.0));
        assert!(matches!(
            symplectic_eigenvalues(&squeezed_too_much),
            Err(SecurityError::NonPhysical(_))
        ));
    }

    #[test]
    fn thermal_product_state() {
        let m = Matrix4::from_diagonal(&nalgebra::Vector4::new(3.0, 3.0, 5.0, 5.0));
        let (lo, hi) = symplectic_eigenvalues(&m).unwrap();
        assert!((lo - 3.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
        assert!((entropy(&[lo, hi]) - (g(1.0) + g(2.0))).abs() < 1e-12);
    }
}
