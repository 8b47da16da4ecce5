//! SLD Fisher information, the curvature form `F_ij`, and model classification.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    comm_norm, commutator, serde_cmatrix, serde_rmatrix, solve_sld, CMatrix, Hermitian, RMatrix,
    C64,
};
use crate::model::ParametricModel;

/// Default relative threshold on `comm_norm` for "commuting".
pub const COMMUTATOR_TOL: f64 = 1e-8;
/// Default absolute Frobenius threshold for "vanishing curvature".
pub const CURVATURE_TOL: f64 = 1e-6;

/// The SLDs `L_i(θ)` and the Fisher matrix `J_ij = Re Tr ρ L_i L_j`.
#[derive(Debug, Clone, Serialize)]
pub struct SldSet {
    pub theta: Vec<f64>,
    pub slds: Vec<Hermitian>,
    #[serde(with = "serde_rmatrix")]
    pub fisher: RMatrix,
}

impl SldSet {
    pub fn param_dim(&self) -> usize {
        self.slds.len()
    }

    /// `(J^S)^{-1}`, or an error when the Fisher matrix is singular.
    pub fn fisher_inverse(&self) -> Result<RMatrix> {
        self.fisher
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| {
                Error::rejected(
                    "SLD Fisher matrix is singular; the parametrization is degenerate here",
                )
            })
    }

    /// Largest pairwise `comm_norm(L_i, L_j)` over `i < j`, with the pair.
    pub fn worst_commutator(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..self.slds.len() {
            for j in i + 1..self.slds.len() {
                let c = comm_norm(&self.slds[i], &self.slds[j]).expect("equal dimensions");
                if c > worst.0 {
                    worst = (c, i, j);
                }
            }
        }
        worst
    }
}

/// Fisher matrix of a family of SLDs at `ρ`.
pub fn fisher_matrix(rho: &CMatrix, slds: &[Hermitian]) -> RMatrix {
    let m = slds.len();
    let rl: Vec<CMatrix> = slds.iter().map(|l| rho * l.matrix()).collect();
    let mut j = RMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = (&rl[a] * slds[b].matrix()).trace().re;
            let w = (&rl[b] * slds[a].matrix()).trace().re;
            j[(a, b)] = 0.5 * (v + w);
            j[(b, a)] = j[(a, b)];
        }
    }
    j
}

/// Solves for every SLD at `θ` and assembles the Fisher matrix.
pub fn sld_set(model: &ParametricModel, theta: &[f64]) -> Result<SldSet> {
    let rho = model.evaluate(theta)?;
    let slds = (0..model.param_dim())
        .map(|i| solve_sld(&rho, &model.derivative(theta, i)?))
        .collect::<Result<Vec<_>>>()?;
    let fisher = fisher_matrix(rho.matrix(), &slds);
    Ok(SldSet {
        theta: theta.to_vec(),
        slds,
        fisher,
    })
}

/// `F_ij = (∂_i L_j − ∂_j L_i) − ½[L_i, L_j]` at a point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureTensor {
    pub theta: Vec<f64>,
    /// `f[i][j] = F_ij`.
    #[serde(serialize_with = "serialize_grid")]
    pub f: Vec<Vec<CMatrix>>,
    /// Finite-difference steps used for each coordinate.
    pub steps: Vec<f64>,
}

fn serialize_grid<S: serde::Serializer>(
    f: &[Vec<CMatrix>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row<'a>(#[serde(with = "crate::matcore::serde_cmatrix_vec")] &'a Vec<CMatrix>);
    let rows: Vec<Row> = f.iter().map(Row).collect();
    rows.serialize(s)
}

impl CurvatureTensor {
    pub fn get(&self, i: usize, j: usize) -> &CMatrix {
        &self.f[i][j]
    }

    /// Largest `‖F_ij‖_F` over `i < j`, with the pair.
    pub fn worst(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..self.f.len() {
            for j in i + 1..self.f.len() {
                let v = self.f[i][j].norm();
                if v > worst.0 {
                    worst = (v, i, j);
                }
            }
        }
        worst
    }

    /// Hermitian part `(F + F†)/2`, which equals `∂_i L_j − ∂_j L_i`.
    pub fn hermitian_part(&self, i: usize, j: usize) -> CMatrix {
        let f = &self.f[i][j];
        (f + f.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Skew-Hermitian part `(F − F†)/2`, which equals `−½[L_i, L_j]`.
    pub fn skew_part(&self, i: usize, j: usize) -> CMatrix {
        let f = &self.f[i][j];
        (f - f.adjoint()) * C64::new(0.5, 0.0)
    }
}

/// Curvature form from central differences of exact SLD solves.
pub fn curvature(model: &ParametricModel, theta: &[f64]) -> Result<CurvatureTensor> {
    let center = sld_set(model, theta)?;
    curvature_with_center(model, theta, &center)
}

fn curvature_with_center(
    model: &ParametricModel,
    theta: &[f64],
    center: &SldSet,
) -> Result<CurvatureTensor> {
    let m = model.param_dim();
    let n = model.state_dim();
    let mut steps = Vec::with_capacity(m);
    // dl[i][j] = ∂_i L_j
    let mut dl: Vec<Vec<CMatrix>> = Vec::with_capacity(m);
    for i in 0..m {
        let h = model.fd_step(theta, i);
        steps.push(h);
        let displaced = |s: f64| -> Result<SldSet> {
            let mut t = theta.to_vec();
            t[i] += s;
            sld_set(model, &t).map_err(|e| match e {
                Error::Domain { message, .. } => Error::domain(
                    i,
                    format!("curvature stencil with h = {h:e} leaves the domain: {message}"),
                ),
                other => other,
            })
        };
        let (plus, minus) = (displaced(h)?, displaced(-h)?);
        dl.push(
            (0..m)
                .map(|j| (plus.slds[j].matrix() - minus.slds[j].matrix()) * C64::new(0.5 / h, 0.0))
                .collect(),
        );
    }
    let mut f = vec![vec![CMatrix::zeros(n, n); m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let comm = commutator(&center.slds[i], &center.slds[j])?;
            f[i][j] = &dl[i][j] - &dl[j][i] - comm * C64::new(0.5, 0.0);
        }
    }
    #[allow(clippy::needless_range_loop)]
    for i in 0..m {
        for j in i + 1..m {
            let a = (&f[i][j] - &f[j][i]) * C64::new(0.5, 0.0);
            f[j][i] = -&a;
            f[i][j] = a;
        }
    }
    Ok(CurvatureTensor {
        theta: theta.to_vec(),
        f,
        steps,
    })
}

/// Pointwise commutation test of the SLDs.
#[derive(Debug, Clone, Serialize)]
pub struct LocalVerdict {
    pub theta: Vec<f64>,
    pub locally_quasi_classical: bool,
    pub worst_comm_norm: f64,
    pub worst_pair: (usize, usize),
    pub tol: f64,
}

pub fn classify_local(model: &ParametricModel, theta: &[f64], tol: f64) -> Result<LocalVerdict> {
    let s = sld_set(model, theta)?;
    Ok(local_from_set(&s, tol))
}

fn local_from_set(s: &SldSet, tol: f64) -> LocalVerdict {
    let (worst, i, j) = s.worst_commutator();
    LocalVerdict {
        theta: s.theta.clone(),
        locally_quasi_classical: worst <= tol,
        worst_comm_norm: worst,
        worst_pair: (i, j),
        tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotLocallyQuasiClassical,
    LocallyQuasiClassical,
    /// Commuting SLDs across all sampled point pairs; equivalently parallel.
    QuasiClassical,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::NotLocallyQuasiClassical => "not_locally_quasi_classical",
            Verdict::LocallyQuasiClassical => "locally_quasi_classical",
            Verdict::QuasiClassical => "quasi_classical",
        }
    }

    /// All names under which the verdict is known.
    pub fn names(&self) -> Vec<&'static str> {
        match self {
            Verdict::QuasiClassical => vec!["quasi_classical", "parallel"],
            other => vec![other.as_str()],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorWitness {
    pub norm: f64,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureWitness {
    pub norm: f64,
    pub theta: Vec<f64>,
    pub i: usize,
    pub j: usize,
}

/// Grid-sampled global classification.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub verdict_names: Vec<&'static str>,
    pub commutator_tol: f64,
    pub curvature_tol: f64,
    /// Worst `comm_norm(L_i(θ), L_j(θ))` at a single grid point.
    pub worst_local_commutator: CommutatorWitness,
    /// Worst `comm_norm(L_i(θ₀), L_j(θ₁))` over all grid pairs.
    pub worst_cross_commutator: CommutatorWitness,
    /// Worst `‖F_ij(θ)‖_F`; absent when curvature was not evaluated.
    pub worst_curvature: Option<CurvatureWitness>,
    pub grid: Vec<Vec<f64>>,
    pub note: &'static str,
}

pub const GRID_NOTE: &str =
    "commutation over a continuous parameter set is checked only on the listed sample grid";

/// Classifies a model from SLDs evaluated on `grid`.
///
/// Grid points are evaluated concurrently; all reductions run in index order
/// so the report does not depend on scheduling.
pub fn classify_global(
    model: &ParametricModel,
    grid: &[Vec<f64>],
    tol: f64,
    curvature_tol: Option<f64>,
) -> Result<Classification> {
    if grid.is_empty() {
        return Err(Error::rejected("classification grid is empty"));
    }
    let sets: Vec<SldSet> = grid
        .par_iter()
        .map(|t| sld_set(model, t))
        .collect::<Result<_>>()?;
    let curvatures: Option<Vec<CurvatureTensor>> = match curvature_tol {
        Some(_) => Some(
            grid.par_iter()
                .zip(sets.par_iter())
                .map(|(t, s)| curvature_with_center(model, t, s))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };

    let m = model.param_dim();
    let mut local = CommutatorWitness {
        norm: 0.0,
        theta0: grid[0].clone(),
        theta1: grid[0].clone(),
        i: 0,
        j: 0,
    };
    for s in &sets {
        let (c, i, j) = s.worst_commutator();
        if c > local.norm {
            local = CommutatorWitness {
                norm: c,
                theta0: s.theta.clone(),
                theta1: s.theta.clone(),
                i,
                j,
            };
        }
    }

    let cross_rows: Vec<CommutatorWitness> = (0..sets.len())
        .into_par_iter()
        .map(|p| {
            let mut w = CommutatorWitness {
                norm: 0.0,
                theta0: grid[p].clone(),
                theta1: grid[p].clone(),
                i: 0,
                j: 0,
            };
            for q in p..sets.len() {
                for i in 0..m {
                    for j in 0..m {
                        let c = comm_norm(&sets[p].slds[i], &sets[q].slds[j])
                            .expect("equal dimensions");
                        if c > w.norm {
                            w = CommutatorWitness {
                                norm: c,
                                theta0: grid[p].clone(),
                                theta1: grid[q].clone(),
                                i,
                                j,
                            };
                        }
                    }
                }
            }
            w
        })
        .collect();
    let mut cross = cross_rows[0].clone();
    for w in cross_rows {
        if w.norm > cross.norm {
            cross = w;
        }
    }

    let worst_curvature = curvatures.map(|cs| {
        let mut best = CurvatureWitness {
            norm: 0.0,
            theta: grid[0].clone(),
            i: 0,
            j: 0,
        };
        for c in cs {
            let (v, i, j) = c.worst();
            if v > best.norm {
                best = CurvatureWitness {
                    norm: v,
                    theta: c.theta.clone(),
                    i,
                    j,
                };
            }
        }
        best
    });

    let verdict = if local.norm > tol {
        Verdict::NotLocallyQuasiClassical
    } else if cross.norm > tol {
        Verdict::LocallyQuasiClassical
    } else {
        Verdict::QuasiClassical
    };
    Ok(Classification {
        verdict,
        verdict_names: verdict.names(),
        commutator_tol: tol,
        curvature_tol: curvature_tol.unwrap_or(CURVATURE_TOL),
        worst_local_commutator: local,
        worst_cross_commutator: cross,
        worst_curvature,
        grid: grid.to_vec(),
        note: GRID_NOTE,
    })
}

/// Checks that curvature and SLD commutators vanish together at a point.
#[derive(Debug, Clone, Serialize)]
pub struct FlatnessReport {
    pub theta: Vec<f64>,
    pub max_curvature: f64,
    pub max_comm_norm: f64,
    pub curvature_vanishes: bool,
    pub commutator_vanishes: bool,
    /// False only when one side vanishes while the other exceeds 10x its tolerance.
    pub consistent: bool,
    pub commutator_tol: f64,
    pub curvature_tol: f64,
}

pub fn flatness_check(
    model: &ParametricModel,
    theta: &[f64],
    commutator_tol: f64,
    curvature_tol: f64,
) -> Result<FlatnessReport> {
    let s = sld_set(model, theta)?;
    let f = curvature_with_center(model, theta, &s)?;
    let (max_comm_norm, ..) = s.worst_commutator();
    let (max_curvature, ..) = f.worst();
    let curvature_vanishes = max_curvature <= curvature_tol;
    let commutator_vanishes = max_comm_norm <= commutator_tol;
    let clash = (curvature_vanishes && max_comm_norm > 10.0 * commutator_tol)
        || (commutator_vanishes && max_curvature > 10.0 * curvature_tol);
    Ok(FlatnessReport {
        theta: theta.to_vec(),
        max_curvature,
        max_comm_norm,
        curvature_vanishes,
        commutator_vanishes,
        consistent: !clash,
        commutator_tol,
        curvature_tol,
    })
}

/// Serializable wrapper used by reports that show a single `F_ij`.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureEntry {
    pub i: usize,
    pub j: usize,
    #[serde(with = "serde_cmatrix")]
    pub f: CMatrix,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::pauli;

    #[test]
    fn bloch_center_slds_are_paulis() {
        let s = sld_set(&ParametricModel::bloch_full(), &[0.0; 3]).unwrap();
        for (l, p) in s.slds.iter().zip(pauli::all()) {
            assert!((l.matrix() - p).norm() < 1e-14);
        }
        assert!((&s.fisher - RMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn classical_simplex_fisher_is_bernoulli() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let s = sld_set(&m, &[0.3]).unwrap();
        let l = s.slds[0].matrix();
        assert!((l[(0, 0)].re - 1.0 / 0.3).abs() < 1e-12);
        assert!((l[(1, 1)].re + 1.0 / 0.7).abs() < 1e-12);
        assert!((s.fisher[(0, 0)] - 1.0 / (0.3 * 0.7)).abs() < 1e-10);
    }

    #[test]
    fn bloch_curvature_at_center() {
        let f = curvature(&ParametricModel::bloch_full(), &[0.0; 3]).unwrap();
        let expected = pauli::z() * C64::new(0.0, -1.0);
        assert!((f.get(0, 1) - &expected).norm() < 1e-8);
        assert!((f.get(1, 0) + &expected).norm() < 1e-8);
        for i in 0..3 {
            assert_eq!(f.get(i, i).norm(), 0.0);
        }
    }

    #[test]
    fn classical_curvature_vanishes() {
        let m = ParametricModel::classical_simplex(3).unwrap();
        let f = curvature(&m, &[0.2, 0.3]).unwrap();
        assert!(f.worst().0 <= 1e-8);
    }

    #[test]
    fn local_classification_examples() {
        let v = classify_local(&ParametricModel::bloch_full(), &[0.0; 3], COMMUTATOR_TOL).unwrap();
        assert!(!v.locally_quasi_classical);
        assert!((v.worst_comm_norm - 2.0 * 2f64.sqrt() / 2.0).abs() < 1e-12);
        let v = classify_local(
            &ParametricModel::classical_simplex(3).unwrap(),
            &[0.2, 0.5],
            COMMUTATOR_TOL,
        )
        .unwrap();
        assert!(v.locally_quasi_classical);
        let v = classify_local(
            &ParametricModel::parallel_exp_default(),
            &[0.3, -0.4],
            COMMUTATOR_TOL,
        )
        .unwrap();
        assert!(v.locally_quasi_classical);
    }

    #[test]
    fn global_classification_examples() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let c = classify_global(&m, &m.sample_grid(9), COMMUTATOR_TOL, None).unwrap();
        assert_eq!(c.verdict, Verdict::QuasiClassical);

        let m = ParametricModel::parallel_exp_default();
        let c =
            classify_global(&m, &m.sample_grid(3), COMMUTATOR_TOL, Some(CURVATURE_TOL)).unwrap();
        assert_eq!(c.verdict, Verdict::QuasiClassical);
        assert!(c.verdict_names.contains(&"parallel"));

        let m = ParametricModel::bloch_equator2();
        let c = classify_global(&m, &m.sample_grid(3), COMMUTATOR_TOL, None).unwrap();
        assert_eq!(c.verdict, Verdict::NotLocallyQuasiClassical);
        assert_eq!(c.worst_local_commutator.theta0, vec![0.0, 0.0]);

        assert!(classify_global(&m, &[], COMMUTATOR_TOL, None).is_err());
    }

    #[test]
    fn flatness_examples() {
        let r = flatness_check(
            &ParametricModel::bloch_full(),
            &[0.2, 0.1, 0.0],
            COMMUTATOR_TOL,
            CURVATURE_TOL,
        )
        .unwrap();
        assert!(!r.curvature_vanishes && !r.commutator_vanishes && r.consistent);
        let r = flatness_check(
            &ParametricModel::parallel_exp_default(),
            &[0.1, 0.2],
            COMMUTATOR_TOL,
            CURVATURE_TOL,
        )
        .unwrap();
        assert!(r.curvature_vanishes && r.commutator_vanishes && r.consistent);
        let m = ParametricModel::classical_simplex(2).unwrap();
        let r = flatness_check(&m, &[0.4], COMMUTATOR_TOL, CURVATURE_TOL).unwrap();
        assert!(r.curvature_vanishes && r.commutator_vanishes && r.consistent);
    }
}
