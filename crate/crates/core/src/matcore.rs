//! Dense complex-Hermitian matrix kernel.
//!
//! Everything downstream works with small (n ≤ 8 or so) dense matrices, so the
//! kernel favours transparent O(n³) algorithms built on a single Hermitian
//! eigendecomposition over anything clever.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Numerical thresholds for validating matrices and states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub hermiticity_tol: f64,
    pub trace_tol: f64,
    pub positivity_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity_tol: 1e-10,
            trace_tol: 1e-10,
            positivity_floor: 1e-9,
        }
    }
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

/// `‖A − A†‖_F / max(1, ‖A‖_F)`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm() / frobenius(a).max(1.0)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.trace()
}

fn check_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::rejected(format!(
            "matrix is not square: {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::rejected("matrix must have dimension at least 1"));
    }
    Ok(())
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(())
}

/// A square complex matrix known to be Hermitian.
///
/// Construction checks the hermiticity defect and then stores the exactly
/// symmetrized matrix `(A + A†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(a: CMatrix) -> Result<Self> {
        Self::with_tolerance(a, Tolerances::default().hermiticity_tol)
    }

    pub fn with_tolerance(a: CMatrix, tol: f64) -> Result<Self> {
        check_square(&a)?;
        let defect = hermiticity_defect(&a);
        if !(defect <= tol) {
            return Err(Error::NotHermitian { defect, tol });
        }
        Ok(Self::symmetrize(a))
    }

    /// Projects any square matrix onto its Hermitian part without checking.
    pub fn symmetrize(a: CMatrix) -> Self {
        let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        Hermitian(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Hermitian(DMatrix::from_diagonal(&d))
    }

    pub fn identity(n: usize) -> Self {
        Hermitian(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Hermitian(CMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// Real trace (the imaginary part vanishes for Hermitian matrices).
    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }

    /// Removes the trace: `A − (Tr A / n) I`.
    pub fn traceless(&self) -> Self {
        let n = self.dim();
        let shift = C64::new(self.trace_re() / n as f64, 0.0);
        Hermitian(&self.0 - CMatrix::identity(n, n) * shift)
    }

    pub fn scale(&self, s: f64) -> Self {
        Hermitian(&self.0 * C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Hermitian) -> Self {
        Hermitian(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Self {
        Hermitian(&self.0 - &other.0)
    }
}

impl Deref for Hermitian {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigendecomposition `A = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = C64::new(f(lam), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Hermitian eigendecomposition, eigenvalues sorted ascending.
pub fn eig_hermitian(a: &Hermitian) -> HermitianEigen {
    let eig = nalgebra::SymmetricEigen::new(a.matrix().clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Checked variant of [`eig_hermitian`] for raw matrices.
pub fn eig_hermitian_checked(a: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    let h = Hermitian::with_tolerance(a.clone(), tol)?;
    Ok(eig_hermitian(&h))
}

/// A strictly positive, unit-trace Hermitian matrix with its cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: Hermitian,
    eigen: HermitianEigen,
}

impl DensityMatrix {
    pub fn new(a: CMatrix) -> Result<Self> {
        Self::with_tolerances(a, &Tolerances::default())
    }

    pub fn with_tolerances(a: CMatrix, tol: &Tolerances) -> Result<Self> {
        let rho = Hermitian::with_tolerance(a, tol.hermiticity_tol)?;
        let tr = rho.trace_re();
        if !((tr - 1.0).abs() <= tol.trace_tol) {
            return Err(Error::BadTrace {
                trace: tr,
                tol: tol.trace_tol,
            });
        }
        let eigen = eig_hermitian(&rho);
        if !(eigen.min() > tol.positivity_floor) {
            return Err(Error::SingularState {
                min_eigenvalue: eigen.min(),
                floor: tol.positivity_floor,
            });
        }
        Ok(DensityMatrix { rho, eigen })
    }

    /// Maximally mixed state `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let m = CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        DensityMatrix::new(m).expect("I/n is a valid state")
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.rho
    }

    pub fn matrix(&self) -> &CMatrix {
        self.rho.matrix()
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    pub fn sqrt(&self) -> CMatrix {
        self.eigen.map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> CMatrix {
        self.eigen.map(|x| 1.0 / x.sqrt())
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        self.rho.matrix()
    }
}

/// Solves `drho = ½(Lρ + ρL)` for the Hermitian `L` (the SLD).
///
/// Works in the eigenbasis of ρ, where the equation decouples entrywise:
/// `L_ab = 2 drho_ab / (λ_a + λ_b)`.
pub fn solve_sld(rho: &DensityMatrix, drho: &Hermitian) -> Result<Hermitian> {
    check_same_dim(rho.matrix(), drho.matrix())?;
    let floor = Tolerances::default().positivity_floor;
    if !(rho.eigen.min() > floor) {
        return Err(Error::SingularState {
            min_eigenvalue: rho.eigen.min(),
            floor,
        });
    }
    let tr = drho.trace_re();
    let trace_tol = Tolerances::default().trace_tol;
    if tr.abs() > trace_tol * frobenius(drho).max(1.0) {
        return Err(Error::rejected(format!(
            "state derivative must be traceless; trace is {tr:e}"
        )));
    }
    let v = &rho.eigen.vectors;
    let lam = &rho.eigen.values;
    let mut d = v.adjoint() * drho.matrix() * v;
    let n = lam.len();
    for a in 0..n {
        for b in 0..n {
            d[(a, b)] *= C64::new(2.0 / (lam[a] + lam[b]), 0.0);
        }
    }
    Ok(Hermitian::symmetrize(v * d * v.adjoint()))
}

/// `‖½(Lρ + ρL) − drho‖_F`.
pub fn sld_residual(rho: &CMatrix, drho: &CMatrix, l: &CMatrix) -> f64 {
    ((l * rho + rho * l) * C64::new(0.5, 0.0) - drho).norm()
}

/// Output of [`polar_positive`]: `A = P K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polar {
    pub p: Hermitian,
    pub k: CMatrix,
    /// Smallest singular value was below `1e-12 · largest`; `K` is then not unique.
    pub rank_deficient: bool,
}

/// Left polar decomposition `A = P K` with `P = (AA†)^{1/2}` and `K` unitary.
pub fn polar_positive(a: &CMatrix) -> Result<Polar> {
    check_square(a)?;
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V†");
    let sigma = &svd.singular_values;
    let n = sigma.len();
    let mut us = u.clone();
    for j in 0..n {
        let s = C64::new(sigma[j], 0.0);
        for i in 0..n {
            us[(i, j)] *= s;
        }
    }
    let p = Hermitian::symmetrize(&us * u.adjoint());
    let k = &u * &v_t;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Polar {
        p,
        k,
        rank_deficient: smin <= 1e-12 * smax,
    })
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// `‖AB − BA‖_F / max(1, ‖A‖_F ‖B‖_F)`.
pub fn comm_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let c = commutator(a, b)?;
    Ok(c.norm() / (a.norm() * b.norm()).max(1.0))
}

/// `exp(A)` for Hermitian `A`.
pub fn expm_hermitian(a: &Hermitian) -> CMatrix {
    eig_hermitian(a).map(f64::exp)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Negative round-off eigenvalues are clamped to zero.
pub fn sqrt_psd(a: &Hermitian) -> CMatrix {
    eig_hermitian(a).map(|x| x.max(0.0).sqrt())
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a complex matrix from separate real and imaginary row grids.
pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMatrix> {
    let n = re.len();
    if n == 0 || im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
        return Err(Error::rejected(
            "real and imaginary grids must both be n x n with n >= 1",
        ));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])))
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    CMatrix::from_fn(n, rows[0].len(), |i, j| C64::new(rows[i][j], 0.0))
}

/// Pauli matrices and friends.
pub mod pauli {
    use super::{CMatrix, C64};

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0., 0.),
                C64::new(1., 0.),
                C64::new(1., 0.),
                C64::new(0., 0.),
            ],
        )
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0., 0.),
                C64::new(0., -1.),
                C64::new(0., 1.),
                C64::new(0., 0.),
            ],
        )
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1., 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(-1., 0.),
            ],
        )
    }

    /// `[σx, σy, σz]`.
    pub fn all() -> [CMatrix; 3] {
        [x(), y(), z()]
    }
}

/// Seeded random matrices used by the randomized checks.
pub mod random {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::{CMatrix, DensityMatrix, Hermitian, C64};

    pub fn gaussian(rng: &mut impl Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            C64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
    }

    pub fn hermitian(rng: &mut impl Rng, n: usize) -> Hermitian {
        Hermitian::symmetrize(gaussian(rng, n))
    }

    pub fn traceless_hermitian(rng: &mut impl Rng, n: usize) -> Hermitian {
        hermitian(rng, n).traceless()
    }

    /// Skew-Hermitian `G = i H` with Gaussian `H`.
    pub fn skew_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
        hermitian(rng, n).matrix() * C64::new(0.0, 1.0)
    }

    pub fn unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
        let qr = nalgebra::QR::new(gaussian(rng, n));
        let q = qr.q();
        let r = qr.r();
        // fix column phases so the distribution is Haar
        let mut q = q;
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        q
    }

    /// `G G† / Tr(G G†)` mixed with a little of `I/n` to keep the spectrum away from zero.
    pub fn density_matrix(rng: &mut impl Rng, n: usize) -> DensityMatrix {
        let g = gaussian(rng, n);
        let a = &g * g.adjoint();
        let tr = a.trace().re;
        let mix = 0.05;
        let m = a * C64::new((1.0 - mix) / tr, 0.0)
            + CMatrix::identity(n, n) * C64::new(mix / n as f64, 0.0);
        DensityMatrix::new(m).expect("random state is strictly positive")
    }
}

/// JSON representation of a complex matrix as two real grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(a: &CMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| f(&a[(i, j)])).collect())
                .collect()
        };
        MatrixJson {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        from_parts(&self.re, &self.im)
    }
}

/// `#[serde(with = "...")]` adapter for [`CMatrix`] fields.
pub mod serde_cmatrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{CMatrix, MatrixJson};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        j.to_matrix().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Hermitian {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(&self.0).serialize(s)
    }
}

pub type RMatrix = DMatrix<f64>;

/// Row grid of a real matrix.
pub fn real_rows(a: &RMatrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

/// `#[serde(with = "...")]` adapter writing a real matrix as a row grid.
pub mod serde_rmatrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{real_rows, RMatrix};

    pub fn serialize<S: Serializer>(m: &RMatrix, s: S) -> Result<S::Ok, S::Error> {
        real_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(RMatrix::from_fn(n, c, |i, j| rows[i][j]))
    }
}

/// Adapter for `Vec<CMatrix>` fields.
pub mod serde_cmatrix_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{CMatrix, MatrixJson};

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<MatrixJson> = ms.iter().map(MatrixJson::from).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let v = Vec::<MatrixJson>::deserialize(d)?;
        v.iter()
            .map(|j| j.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eig_of_diagonal_is_sorted_permutation() {
        let e = eig_hermitian(&Hermitian::from_real_diagonal(&[2.0, 1.0]));
        assert_eq!(e.values, vec![1.0, 2.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum() {
        let e = eig_hermitian(&Hermitian::new(pauli::x()).unwrap());
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random::hermitian(&mut rng, 4);
            let e = eig_hermitian(&a);
            assert!((e.reconstruct() - a.matrix()).norm() <= 1e-12 * a.norm());
            assert!(unitarity_defect(&e.vectors) <= 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(
            Hermitian::new(a.clone()),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            eig_hermitian_checked(&a, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::new(Hermitian::from_real_diagonal(&[0.5, 0.6]).into_inner()),
            Err(Error::BadTrace { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(Hermitian::from_real_diagonal(&[1.0, 0.0]).into_inner()),
            Err(Error::SingularState { .. })
        ));
        assert!(
            DensityMatrix::new(Hermitian::from_real_diagonal(&[0.7, 0.3]).into_inner()).is_ok()
        );
    }

    #[test]
    fn sld_of_maximally_mixed_qubit() {
        let rho = DensityMatrix::maximally_mixed(2);
        let drho = Hermitian::new(pauli::x() * c(0.5, 0.)).unwrap();
        let l = solve_sld(&rho, &drho).unwrap();
        assert!((l.matrix() - pauli::x()).norm() < 1e-14);
    }

    #[test]
    fn sld_off_diagonal_entry() {
        let (l1, l2, d) = (0.8, 0.2, c(0.03, -0.02));
        let rho =
            DensityMatrix::new(Hermitian::from_real_diagonal(&[l1, l2]).into_inner()).unwrap();
        let drho = CMatrix::from_row_slice(2, 2, &[c(0., 0.), d, d.conj(), c(0., 0.)]);
        let l = solve_sld(&rho, &Hermitian::new(drho).unwrap()).unwrap();
        let expected = d * 2.0 / (l1 + l2);
        assert!((l[(0, 1)] - expected).norm() < 1e-15);
        assert!(l[(0, 0)].norm() < 1e-15 && l[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn sld_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rho = random::density_matrix(&mut rng, 3);
            let drho = random::traceless_hermitian(&mut rng, 3);
            let l = solve_sld(&rho, &drho).unwrap();
            let res = sld_residual(rho.matrix(), drho.matrix(), l.matrix());
            assert!(res <= 1e-10 * drho.norm().max(1.0), "residual {res}");
        }
    }

    #[test]
    fn sld_rejects_traced_derivative_and_mismatch() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(solve_sld(&rho, &Hermitian::identity(2)).is_err());
        assert!(matches!(
            solve_sld(&rho, &Hermitian::zeros(3)),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn polar_of_unitary_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random::unitary(&mut rng, 3);
        let pol = polar_positive(&u).unwrap();
        assert!((pol.p.matrix() - identity(3)).norm() < 1e-12);
        assert!((&pol.k - &u).norm() < 1e-12);

        let p0 = random::density_matrix(&mut rng, 3);
        let pol = polar_positive(p0.matrix()).unwrap();
        assert!((pol.p.matrix() - p0.matrix()).norm() < 1e-12);
        assert!((&pol.k - identity(3)).norm() < 1e-10);
        assert!(!pol.rank_deficient);
    }

    #[test]
    fn polar_random_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random::gaussian(&mut rng, 3);
        let pol = polar_positive(&a).unwrap();
        assert!((pol.p.matrix() * &pol.k - &a).norm() <= 1e-12 * a.norm().max(1.0));
        assert!(eig_hermitian(&pol.p).min() >= -1e-12);
        assert!(unitarity_defect(&pol.k) <= 1e-12);
    }

    #[test]
    fn polar_flags_rank_deficiency() {
        let a = Hermitian::from_real_diagonal(&[1.0, 0.0]).into_inner();
        assert!(polar_positive(&a).unwrap().rank_deficient);
    }

    #[test]
    fn pauli_commutators() {
        assert_eq!(
            commutator(&pauli::x(), &pauli::x()).unwrap(),
            CMatrix::zeros(2, 2)
        );
        let c_xy = commutator(&pauli::x(), &pauli::y()).unwrap();
        assert!((c_xy - pauli::z() * c(0., 2.)).norm() < 1e-15);
        let a = Hermitian::from_real_diagonal(&[0.3, -1.2, 4.0]);
        let b = Hermitian::from_real_diagonal(&[2.5, 0.1, -0.7]);
        assert!(comm_norm(&a, &b).unwrap() <= 1e-15);
        assert!(commutator(&pauli::x(), &identity(3)).is_err());
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random::gaussian(&mut rng, 3);
        let j = serde_json::to_string(&MatrixJson::from(&a)).unwrap();
        let back: MatrixJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.to_matrix().unwrap(), a);
    }
}
