//! Finite-outcome measurements, locally unbiased estimators and the SLD
//! Cramér–Rao bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::sld_set;
use crate::matcore::{
    comm_norm, eig_hermitian, serde_cmatrix, serde_rmatrix, CMatrix, DensityMatrix, Hermitian,
    RMatrix, C64,
};
use crate::model::{Domain, ParametricModel};

/// Outcomes drawn per independently seeded chunk.
pub const SAMPLE_CHUNK: u64 = 1 << 16;
/// Round-off allowance for negative probabilities before clipping.
pub const PROBABILITY_CLIP: f64 = 1e-10;
/// Seed for the random linear combination in [`simultaneous_diagonalize`].
const COMBINATION_SEED: u64 = 0x5eed_1234;
/// Margin kept from the domain boundary when adaptive estimates are clamped.
pub const CLAMP_MARGIN: f64 = 1e-3;

/// A measurement with finitely many outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<Hermitian>,
}

impl Povm {
    pub fn new(labels: Vec<String>, elements: Vec<Hermitian>) -> Result<Self> {
        if elements.is_empty() || labels.len() != elements.len() {
            return Err(Error::InvalidPovm(
                "need one label per element and at least one element".into(),
            ));
        }
        let n = elements[0].dim();
        let mut total = CMatrix::zeros(n, n);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != n {
                return Err(Error::DimensionMismatch {
                    left: e.dim(),
                    right: n,
                });
            }
            let min = eig_hermitian(e).min();
            if min < -1e-10 {
                return Err(Error::InvalidPovm(format!(
                    "element {k} has negative eigenvalue {min:e}"
                )));
            }
            total += e.matrix();
        }
        let defect = (total - CMatrix::identity(n, n)).norm();
        if defect > 1e-10 {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {defect:e}"
            )));
        }
        Ok(Povm { labels, elements })
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn projective(basis: &CMatrix) -> Result<Self> {
        let n = basis.ncols();
        let elements = (0..n)
            .map(|k| {
                let v = basis.column(k);
                Hermitian::symmetrize(v * v.adjoint())
            })
            .collect();
        Povm::new((1..=n).map(|k| k.to_string()).collect(), elements)
    }

    /// Rank-one measurement built from `outcomes` random vectors, `M_k = S^{-1/2} v_k v_k† S^{-1/2}`.
    pub fn random_rank_one(rng: &mut impl Rng, n: usize, outcomes: usize) -> Result<Self> {
        if outcomes < n {
            return Err(Error::rejected("a rank-one POVM needs at least n outcomes"));
        }
        let vs: Vec<CMatrix> = (0..outcomes)
            .map(|_| {
                CMatrix::from_fn(n, 1, |_, _| {
                    C64::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    )
                })
            })
            .collect();
        let s = vs
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, v| acc + v * v.adjoint());
        let t = eig_hermitian(&Hermitian::symmetrize(s)).map(|x| 1.0 / x.sqrt());
        let elements = vs
            .iter()
            .map(|v| {
                let u = &t * v;
                Hermitian::symmetrize(&u * u.adjoint())
            })
            .collect();
        Povm::new((1..=outcomes).map(|k| k.to_string()).collect(), elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[Hermitian] {
        &self.elements
    }
}

/// `p(ξ) = Tr ρ M(ξ)`, clipped to `[0, 1]`.
pub fn outcome_probabilities(povm: &Povm, rho: &DensityMatrix) -> Result<Vec<f64>> {
    if povm.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: povm.dim(),
            right: rho.dim(),
        });
    }
    povm.elements
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let p = (rho.matrix() * m.matrix()).trace().re;
            if !(-PROBABILITY_CLIP..=1.0 + PROBABILITY_CLIP).contains(&p) {
                return Err(Error::InvalidPovm(format!(
                    "outcome {k} has probability {p} outside [0, 1]"
                )));
            }
            Ok(p.clamp(0.0, 1.0))
        })
        .collect()
}

/// Common eigenbasis of commuting Hermitian matrices.
#[derive(Debug, Clone, Serialize)]
pub struct SimultaneousBasis {
    #[serde(with = "serde_cmatrix")]
    pub basis: CMatrix,
    /// `eigenvalues[k][ξ] = ⟨ξ|L_k|ξ⟩`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Largest off-diagonal residual `‖V†L_kV − diag‖_F`.
    pub residual: f64,
}

fn refine(vectors: CMatrix, mats: &[Hermitian], cluster_tol: f64) -> CMatrix {
    if vectors.ncols() <= 1 || mats.is_empty() {
        return vectors;
    }
    let sub = Hermitian::symmetrize(vectors.adjoint() * mats[0].matrix() * &vectors);
    let e = eig_hermitian(&sub);
    let rotated = &vectors * &e.vectors;
    let scale = mats[0].norm().max(1.0);
    let mut out: Vec<CMatrix> = Vec::new();
    let mut start = 0;
    for k in 1..=e.values.len() {
        if k == e.values.len() || e.values[k] - e.values[k - 1] > cluster_tol * scale {
            let block = rotated.columns(start, k - start).into_owned();
            out.push(refine(block, &mats[1..], cluster_tol));
            start = k;
        }
    }
    let cols: Vec<_> = out
        .iter()
        .flat_map(|b| b.column_iter().map(|c| c.into_owned()))
        .collect();
    CMatrix::from_columns(&cols)
}

/// Diagonalizes commuting Hermitian matrices in one unitary basis.
///
/// A seeded random real combination `Σ c_k L_k` is diagonalized first;
/// degenerate clusters are then split by each matrix in turn. Outcomes are
/// ordered by descending eigenvalue tuples and each vector's largest entry is
/// made real positive, so the result is canonical.
pub fn simultaneous_diagonalize(mats: &[Hermitian], tol: f64) -> Result<SimultaneousBasis> {
    if mats.is_empty() {
        return Err(Error::rejected("need at least one matrix"));
    }
    let n = mats[0].dim();
    for (i, a) in mats.iter().enumerate() {
        for (j, b) in mats.iter().enumerate().skip(i + 1) {
            let c = comm_norm(a, b)?;
            if c > tol {
                return Err(Error::NotQuasiClassical { i, j, norm: c, tol });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(COMBINATION_SEED);
    let combo = mats.iter().fold(Hermitian::zeros(n), |acc, l| {
        acc.add(&l.scale(rng.sample(StandardNormal)))
    });
    let cluster_tol = 1e-7;
    let mut all = vec![combo];
    all.extend(mats.iter().cloned());
    let mut v = refine(CMatrix::identity(n, n), &all, cluster_tol);

    for j in 0..n {
        let (imax, _) = v
            .column(j)
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| {
                if z.norm() > best.1 + 1e-12 {
                    (i, z.norm())
                } else {
                    best
                }
            });
        let z = v[(imax, j)];
        let phase = z.conj() / z.norm();
        for i in 0..n {
            v[(i, j)] *= phase;
        }
    }

    let diag_of = |v: &CMatrix, l: &Hermitian| -> Vec<f64> {
        let d = v.adjoint() * l.matrix() * v;
        (0..n).map(|k| d[(k, k)].re).collect()
    };
    let mut values: Vec<Vec<f64>> = mats.iter().map(|l| diag_of(&v, l)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        for row in &values {
            match row[b].total_cmp(&row[a]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });
    v = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    for row in values.iter_mut() {
        *row = order.iter().map(|&k| row[k]).collect();
    }

    let mut residual: f64 = 0.0;
    for l in mats {
        let mut d = v.adjoint() * l.matrix() * &v;
        for k in 0..n {
            d[(k, k)] = C64::new(0.0, 0.0);
        }
        residual = residual.max(d.norm() / l.norm().max(1.0));
    }
    if residual > 100.0 * tol {
        return Err(Error::rejected(format!(
            "simultaneous diagonalization left an off-diagonal residual {residual:e}"
        )));
    }
    Ok(SimultaneousBasis {
        basis: v,
        eigenvalues: values,
        residual,
    })
}

/// Measurement plus estimate map `ξ ↦ θ̂(ξ)`.
#[derive(Debug, Clone, Serialize)]
pub struct Estimator {
    pub povm: Povm,
    /// `estimates[ξ]` is the estimate vector for outcome `ξ`.
    pub estimates: Vec<Vec<f64>>,
}

impl Estimator {
    pub fn new(povm: Povm, estimates: Vec<Vec<f64>>) -> Result<Self> {
        if estimates.len() != povm.len() {
            return Err(Error::rejected(format!(
                "{} estimates for {} outcomes",
                estimates.len(),
                povm.len()
            )));
        }
        let m = estimates.first().map_or(0, Vec::len);
        if m == 0 || estimates.iter().any(|e| e.len() != m) {
            return Err(Error::rejected(
                "every outcome needs an estimate vector of the same nonzero length",
            ));
        }
        Ok(Estimator { povm, estimates })
    }

    pub fn param_dim(&self) -> usize {
        self.estimates[0].len()
    }

    /// Applies `θ̂ ↦ f(θ̂)` to every outcome's estimate.
    pub fn map_estimates(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Estimator {
            povm: self.povm.clone(),
            estimates: self.estimates.iter().map(|e| f(e)).collect(),
        }
    }

    fn mean_under(&self, p: &[f64]) -> Vec<f64> {
        let m = self.param_dim();
        let mut mean = vec![0.0; m];
        for (pk, e) in p.iter().zip(&self.estimates) {
            for j in 0..m {
                mean[j] += pk * e[j];
            }
        }
        mean
    }
}

/// The estimator that attains the SLD bound at a locally quasi-classical point:
/// projectors onto the common SLD eigenvectors and
/// `θ̂ʲ(ξ) = θʲ + Σ_k [(J^S)^{-1}]^{jk} λ_k(ξ)`, with `k` over the `m` parameters.
pub fn optimal_estimator(model: &ParametricModel, theta: &[f64], tol: f64) -> Result<Estimator> {
    let set = sld_set(model, theta)?;
    let (worst, i, j) = set.worst_commutator();
    if worst > tol {
        return Err(Error::NotQuasiClassical {
            i,
            j,
            norm: worst,
            tol,
        });
    }
    let sd = simultaneous_diagonalize(&set.slds, tol)?;
    let jinv = set.fisher_inverse()?;
    let m = set.param_dim();
    let n = model.state_dim();
    let estimates = (0..n)
        .map(|xi| {
            (0..m)
                .map(|a| {
                    theta[a]
                        + (0..m)
                            .map(|k| jinv[(a, k)] * sd.eigenvalues[k][xi])
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    Estimator::new(Povm::projective(&sd.basis)?, estimates)
}

/// Expectation of `θ̂` at `θ`.
pub fn expectation(est: &Estimator, model: &ParametricModel, theta: &[f64]) -> Result<Vec<f64>> {
    let p = outcome_probabilities(&est.povm, &model.evaluate(theta)?)?;
    Ok(est.mean_under(&p))
}

#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub theta: Vec<f64>,
    pub mean: Vec<f64>,
    /// `jacobian[i][j] = ∂_i E[θ̂ʲ]`.
    pub jacobian: Vec<Vec<f64>>,
    /// `max_j |E[θ̂ʲ] − θʲ|`.
    pub mean_defect: f64,
    /// `max_{ij} |∂_i E[θ̂ʲ] − δ_ij|`.
    pub derivative_defect: f64,
    pub h: f64,
}

/// Exact expectation and central-difference Jacobian of an estimator.
pub fn check_locally_unbiased(
    est: &Estimator,
    model: &ParametricModel,
    theta: &[f64],
    h: f64,
) -> Result<UnbiasednessReport> {
    let m = model.param_dim();
    if est.param_dim() != m {
        return Err(Error::rejected(
            "estimator and model have different parameter counts",
        ));
    }
    let mean = expectation(est, model, theta)?;
    let mean_defect = mean
        .iter()
        .zip(theta)
        .map(|(e, t)| (e - t).abs())
        .fold(0.0, f64::max);
    let mut jacobian = vec![vec![0.0; m]; m];
    let mut derivative_defect: f64 = 0.0;
    for i in 0..m {
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let mut t = theta.to_vec();
            t[i] += s;
            model.domain().check(&t).map_err(|e| {
                Error::domain(
                    i,
                    format!("unbiasedness stencil with h = {h:e} leaves the domain: {e}"),
                )
            })?;
            expectation(est, model, &t)
        };
        let (plus, minus) = (shifted(h)?, shifted(-h)?);
        for j in 0..m {
            let d = (plus[j] - minus[j]) / (2.0 * h);
            jacobian[i][j] = d;
            let target = if i == j { 1.0 } else { 0.0 };
            derivative_defect = derivative_defect.max((d - target).abs());
        }
    }
    Ok(UnbiasednessReport {
        theta: theta.to_vec(),
        mean,
        jacobian,
        mean_defect,
        derivative_defect,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum SampleCount {
    Exact(ExactTag),
    Samples(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactTag {
    Exact,
}

/// Mean and covariance of an estimator against the SLD bound.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub mean: Vec<f64>,
    #[serde(with = "serde_rmatrix")]
    pub cov: RMatrix,
    /// `(J^S)^{-1}`.
    #[serde(with = "serde_rmatrix")]
    pub cr_bound: RMatrix,
    /// Smallest eigenvalue of `cov − (J^S)^{-1}`.
    pub gap_min_eig: f64,
    pub samples: SampleCount,
    /// Standard errors of the covariance entries (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<Vec<f64>>>,
    /// Standard errors of the mean (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_std_errors: Option<Vec<f64>>,
}

fn min_eigenvalue(a: &RMatrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn weighted_moments(est: &Estimator, weights: &[f64]) -> (Vec<f64>, RMatrix) {
    let m = est.param_dim();
    let total: f64 = weights.iter().sum();
    let norm: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mean = est.mean_under(&norm);
    let mut cov = RMatrix::zeros(m, m);
    for (w, e) in norm.iter().zip(&est.estimates) {
        for a in 0..m {
            for b in 0..m {
                cov[(a, b)] += w * (e[a] - mean[a]) * (e[b] - mean[b]);
            }
        }
    }
    (mean, cov)
}

/// Covariance by exact summation over the outcome set.
pub fn exact_covariance(
    est: &Estimator,
    model: &ParametricModel,
    theta: &[f64],
) -> Result<CovarianceReport> {
    let set = sld_set(model, theta)?;
    let p = outcome_probabilities(&est.povm, &model.evaluate(theta)?)?;
    let (mean, cov) = weighted_moments(est, &p);
    let cr_bound = set.fisher_inverse()?;
    Ok(CovarianceReport {
        mean,
        gap_min_eig: min_eigenvalue(&(&cov - &cr_bound)),
        cov,
        cr_bound,
        samples: SampleCount::Exact(ExactTag::Exact),
        std_errors: None,
        mean_std_errors: None,
    })
}

fn sample_chunk(cumulative: &[f64], count: u64, seed: u64, chunk: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let total = *cumulative.last().expect("non-empty");
    let mut counts = vec![0u64; cumulative.len()];
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * total;
        let k = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        counts[k] += 1;
    }
    counts
}

/// Draws `n_samples` i.i.d. outcomes from a probability vector.
///
/// Work is split into fixed-size chunks, each with its own ChaCha stream
/// derived from `(seed, chunk index)`, so counts are identical for any number
/// of worker threads.
pub fn sample_from_probabilities(p: &[f64], n_samples: u64, seed: u64) -> Vec<u64> {
    let mut cumulative = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p {
        acc += x;
        cumulative.push(acc);
    }
    let chunks = n_samples.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = SAMPLE_CHUNK.min(n_samples - c * SAMPLE_CHUNK);
            sample_chunk(&cumulative, count, seed, c)
        })
        .collect();
    let mut counts = vec![0u64; p.len()];
    for part in parts {
        for (t, x) in counts.iter_mut().zip(part) {
            *t += x;
        }
    }
    counts
}

/// Outcome counts for `n_samples` measurements of `povm` on `rho`.
pub fn sample_outcomes(
    povm: &Povm,
    rho: &DensityMatrix,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    if n_samples == 0 {
        return Err(Error::rejected("n_samples must be at least 1"));
    }
    let p = outcome_probabilities(povm, rho)?;
    Ok(sample_from_probabilities(&p, n_samples, seed))
}

/// Empirical mean and covariance of `θ̂` over simulated outcomes.
pub fn monte_carlo_covariance(
    est: &Estimator,
    model: &ParametricModel,
    theta: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<CovarianceReport> {
    if n_samples < 2 {
        return Err(Error::rejected(
            "Monte Carlo covariance needs at least 2 samples",
        ));
    }
    let set = sld_set(model, theta)?;
    let counts = sample_outcomes(&est.povm, &model.evaluate(theta)?, n_samples, seed)?;
    Ok(covariance_from_counts(est, &counts, set.fisher_inverse()?))
}

/// Sample mean, unbiased sample covariance and asymptotic standard errors.
pub fn covariance_from_counts(
    est: &Estimator,
    counts: &[u64],
    cr_bound: RMatrix,
) -> CovarianceReport {
    let n = counts.iter().sum::<u64>() as f64;
    let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, biased) = weighted_moments(est, &w);
    let m = est.param_dim();
    let cov = &biased * (n / (n - 1.0));
    let mut std_errors = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            let mut m4 = 0.0;
            for (wk, e) in w.iter().zip(&est.estimates) {
                m4 += wk / n * ((e[a] - mean[a]) * (e[b] - mean[b])).powi(2);
            }
            std_errors[a][b] = ((m4 - biased[(a, b)].powi(2)).max(0.0) / n).sqrt();
        }
    }
    let mean_std_errors = (0..m).map(|a| (cov[(a, a)] / n).sqrt()).collect();
    CovarianceReport {
        mean,
        gap_min_eig: min_eigenvalue(&(&cov - &cr_bound)),
        cov,
        cr_bound,
        samples: SampleCount::Samples(n as u64),
        std_errors: Some(std_errors),
        mean_std_errors: Some(mean_std_errors),
    }
}

/// Moves `θ` inside the domain, at least `margin` from the boundary.
pub fn clamp_interior(domain: &Domain, theta: &[f64], margin: f64) -> (Vec<f64>, bool) {
    if domain.contains(theta) && distance_inside(domain, theta).is_none_or(|d| d >= margin) {
        return (theta.to_vec(), false);
    }
    let clamped = match domain {
        Domain::Box { lower, upper } => theta
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&x, (&l, &u))| x.clamp(l + margin, u - margin))
            .collect(),
        Domain::Ball { center, radius } => {
            let r = theta
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c).powi(2))
                .sum::<f64>()
                .sqrt();
            let target = radius - margin;
            theta
                .iter()
                .zip(center)
                .map(|(&x, &c)| c + (x - c) * target / r)
                .collect()
        }
        Domain::Simplex { dim } => {
            let mut t: Vec<f64> = theta.iter().map(|&x| x.max(margin)).collect();
            let s: f64 = t.iter().sum();
            if s > 1.0 - margin {
                // shrink toward the barycenter until the slack constraint holds
                let bary = 1.0 / (*dim as f64 + 1.0);
                let lambda = (1.0 - margin - *dim as f64 * bary) / (s - *dim as f64 * bary);
                t = t.iter().map(|&x| bary + lambda * (x - bary)).collect();
            }
            t
        }
        Domain::Lattice { axes } => {
            let (lo, hi) = domain.sample_box();
            theta
                .iter()
                .zip(axes)
                .enumerate()
                .map(|(i, (&x, a))| {
                    a.iter()
                        .copied()
                        .filter(|&v| v >= lo[i] && v <= hi[i])
                        .min_by(|p, q| (p - x).abs().total_cmp(&(q - x).abs()))
                        .unwrap_or(a[a.len() / 2])
                })
                .collect()
        }
    };
    (clamped, true)
}

fn distance_inside(domain: &Domain, theta: &[f64]) -> Option<f64> {
    match domain {
        Domain::Box { lower, upper } => Some(
            theta
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&x, (&l, &u))| (x - l).min(u - x))
                .fold(f64::INFINITY, f64::min),
        ),
        Domain::Ball { center, radius } => Some(
            radius
                - theta
                    .iter()
                    .zip(center)
                    .map(|(x, c)| (x - c).powi(2))
                    .sum::<f64>()
                    .sqrt(),
        ),
        Domain::Simplex { .. } => {
            let slack = 1.0 - theta.iter().sum::<f64>();
            Some(theta.iter().cloned().fold(slack, f64::min))
        }
        Domain::Lattice { .. } => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveTrace {
    pub theta_true: Vec<f64>,
    pub theta_init: Vec<f64>,
    pub n1: u64,
    pub n2: u64,
    pub stage1_estimate: Vec<f64>,
    /// Point at which the stage-2 measurement was built.
    pub stage2_point: Vec<f64>,
    pub clamped: bool,
    pub stage2_estimate: Option<Vec<f64>>,
    pub final_estimate: Vec<f64>,
    pub stage1_estimator: Estimator,
    pub stage2_estimator: Option<Estimator>,
    pub seed: u64,
}

fn sample_mean(est: &Estimator, counts: &[u64]) -> Vec<f64> {
    let n = counts.iter().sum::<u64>() as f64;
    let w: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    est.mean_under(&w)
}

/// Two-stage adaptive estimation: measure optimally at `theta_init`, average
/// to `θ₁`, then measure optimally at `θ₁` and average again.
pub fn two_stage_adaptive(
    model: &ParametricModel,
    theta_true: &[f64],
    theta_init: &[f64],
    n1: u64,
    n2: u64,
    seed: u64,
    tol: f64,
) -> Result<AdaptiveTrace> {
    if n1 == 0 {
        return Err(Error::rejected("stage 1 needs at least one sample"));
    }
    model.domain().check(theta_init)?;
    let rho_true = model.evaluate(theta_true)?;
    let est1 = optimal_estimator(model, theta_init, tol)?;
    let counts1 = sample_outcomes(&est1.povm, &rho_true, n1, seed)?;
    let stage1 = sample_mean(&est1, &counts1);
    let (point, clamped) = clamp_interior(model.domain(), &stage1, CLAMP_MARGIN);

    let (stage2_estimate, stage2_estimator) = if n2 == 0 {
        (None, None)
    } else {
        let est2 = optimal_estimator(model, &point, tol)?;
        let counts2 = sample_outcomes(&est2.povm, &rho_true, n2, seed.wrapping_add(1))?;
        (Some(sample_mean(&est2, &counts2)), Some(est2))
    };
    Ok(AdaptiveTrace {
        theta_true: theta_true.to_vec(),
        theta_init: theta_init.to_vec(),
        n1,
        n2,
        final_estimate: stage2_estimate.clone().unwrap_or_else(|| stage1.clone()),
        stage1_estimate: stage1,
        stage2_point: point,
        clamped,
        stage2_estimate,
        stage1_estimator: est1,
        stage2_estimator,
        seed,
    })
}

/// A random locally unbiased estimator at `θ`.
///
/// The measurement is a random rank-one POVM with `outcomes` elements; each
/// estimate component is the minimum-norm solution of the unbiasedness
/// constraints `Σ p_ξ θ̂ʲ(ξ) = θʲ`, `Σ ∂_i p_ξ θ̂ʲ(ξ) = δ_ij`.
pub fn random_locally_unbiased(
    model: &ParametricModel,
    theta: &[f64],
    outcomes: usize,
    rng: &mut impl Rng,
) -> Result<Estimator> {
    let m = model.param_dim();
    let n = model.state_dim();
    if outcomes < m + 1 || outcomes < n {
        return Err(Error::rejected(format!(
            "need at least max(m + 1, n) = {} outcomes",
            (m + 1).max(n)
        )));
    }
    let rho = model.evaluate(theta)?;
    let derivs = (0..m)
        .map(|i| model.derivative(theta, i))
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..16 {
        let povm = Povm::random_rank_one(rng, n, outcomes)?;
        let p = outcome_probabilities(&povm, &rho)?;
        let mut a = DMatrix::<f64>::zeros(m + 1, outcomes);
        for (k, e) in povm.elements.iter().enumerate() {
            a[(0, k)] = p[k];
            for i in 0..m {
                a[(i + 1, k)] = (derivs[i].matrix() * e.matrix()).trace().re;
            }
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() < 1e-8 * smax {
            continue;
        }
        let pinv = svd
            .pseudo_inverse(1e-12 * smax)
            .map_err(|e| Error::rejected(e.to_string()))?;
        let mut estimates = vec![vec![0.0; m]; outcomes];
        for j in 0..m {
            let mut b = DVector::<f64>::zeros(m + 1);
            b[0] = theta[j];
            b[j + 1] = 1.0;
            let x = &pinv * b;
            for k in 0..outcomes {
                estimates[k][j] = x[k];
            }
        }
        return Estimator::new(povm, estimates);
    }
    Err(Error::rejected(
        "could not draw a measurement with independent unbiasedness constraints",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::COMMUTATOR_TOL;
    use crate::matcore::{pauli, random};

    fn z_measurement() -> Povm {
        Povm::projective(&CMatrix::identity(2, 2)).unwrap()
    }

    fn diag_state(d: &[f64]) -> DensityMatrix {
        DensityMatrix::new(Hermitian::from_real_diagonal(d).into_inner()).unwrap()
    }

    #[test]
    fn z_probabilities() {
        let p =
            outcome_probabilities(&z_measurement(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = outcome_probabilities(&z_measurement(), &diag_state(&[0.7, 0.3])).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        assert!(
            outcome_probabilities(&z_measurement(), &DensityMatrix::maximally_mixed(3)).is_err()
        );
    }

    #[test]
    fn random_povm_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let povm = Povm::random_rank_one(&mut rng, 3, 5).unwrap();
        let rho = random::density_matrix(&mut rng, 3);
        let p = outcome_probabilities(&povm, &rho).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn povm_validation() {
        let half = Hermitian::from_real_diagonal(&[0.5, 0.5]);
        assert!(Povm::new(vec!["a".into()], vec![half.clone()]).is_err());
        let neg = Hermitian::from_real_diagonal(&[1.5, 1.0]);
        let pos = Hermitian::from_real_diagonal(&[-0.5, 0.0]);
        assert!(matches!(
            Povm::new(vec!["a".into(), "b".into()], vec![neg, pos]),
            Err(Error::InvalidPovm(_))
        ));
    }

    #[test]
    fn simultaneous_diagonalization_examples() {
        let z = Hermitian::new(pauli::z()).unwrap();
        let sd = simultaneous_diagonalize(std::slice::from_ref(&z), COMMUTATOR_TOL).unwrap();
        assert!((&sd.basis - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(sd.eigenvalues, vec![vec![1.0, -1.0]]);

        let sd =
            simultaneous_diagonalize(&[z.clone(), Hermitian::identity(2)], COMMUTATOR_TOL).unwrap();
        assert!((&sd.basis - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(sd.eigenvalues[1], vec![1.0, 1.0]);

        let x = Hermitian::new(pauli::x()).unwrap();
        let y = Hermitian::new(pauli::y()).unwrap();
        assert!(matches!(
            simultaneous_diagonalize(&[x, y], COMMUTATOR_TOL),
            Err(Error::NotQuasiClassical { .. })
        ));
    }

    #[test]
    fn simultaneous_diagonalization_with_degeneracy() {
        // A = diag(1,1,2), B = diag(3,4,4) in a random common basis
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random::unitary(&mut rng, 3);
        let conj = |d: &[f64]| {
            Hermitian::symmetrize(&u * Hermitian::from_real_diagonal(d).matrix() * u.adjoint())
        };
        let (a, b) = (conj(&[1.0, 1.0, 2.0]), conj(&[3.0, 4.0, 4.0]));
        let sd = simultaneous_diagonalize(&[a, b], COMMUTATOR_TOL).unwrap();
        assert!(sd.residual < 1e-12);
        assert!((sd.eigenvalues[0][0] - 2.0).abs() < 1e-12);
        assert!((sd.eigenvalues[1][0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_optimal_estimator() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let est = optimal_estimator(&m, &[0.3], COMMUTATOR_TOL).unwrap();
        assert!((est.estimates[0][0] - 1.0).abs() < 1e-12);
        assert!(est.estimates[1][0].abs() < 1e-12);
        assert!(
            (est.povm.elements()[0].matrix() - Hermitian::from_real_diagonal(&[1.0, 0.0]).matrix())
                .norm()
                < 1e-14
        );

        let cov = exact_covariance(&est, &m, &[0.3]).unwrap();
        assert!((cov.cov[(0, 0)] - 0.21).abs() < 1e-12);
        assert!(cov.gap_min_eig.abs() < 1e-12);

        let r = check_locally_unbiased(&est, &m, &[0.3], 1e-4).unwrap();
        assert!(r.mean_defect < 1e-12 && r.derivative_defect < 1e-8);
    }

    #[test]
    fn shifted_and_scaled_estimators() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let est = optimal_estimator(&m, &[0.3], COMMUTATOR_TOL).unwrap();
        let shifted = est.map_estimates(|e| vec![e[0] + 0.25]);
        let r = check_locally_unbiased(&shifted, &m, &[0.3], 1e-4).unwrap();
        assert!((r.mean_defect - 0.25).abs() < 1e-12);
        let scaled = est.map_estimates(|e| vec![0.3 + 2.0 * (e[0] - 0.3)]);
        let r = check_locally_unbiased(&scaled, &m, &[0.3], 1e-4).unwrap();
        assert!((r.derivative_defect - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bloch_optimal_estimator_rejected() {
        let m = ParametricModel::bloch_full();
        assert!(matches!(
            optimal_estimator(&m, &[0.2, 0.1, -0.1], COMMUTATOR_TOL),
            Err(Error::NotQuasiClassical { .. })
        ));
    }

    #[test]
    fn sampling_examples() {
        let trivial = Povm::new(vec!["all".into()], vec![Hermitian::identity(2)]).unwrap();
        assert_eq!(
            sample_outcomes(&trivial, &diag_state(&[0.6, 0.4]), 1000, 1).unwrap(),
            vec![1000]
        );

        let rho = diag_state(&[0.7, 0.3]);
        let n = 100_000u64;
        let c = sample_outcomes(&z_measurement(), &rho, n, 42).unwrap();
        assert_eq!(c.iter().sum::<u64>(), n);
        let freq = c[0] as f64 / n as f64;
        let sigma = (0.21 / n as f64).sqrt();
        assert!((freq - 0.7).abs() < 4.0 * sigma, "freq {freq}");
        assert_eq!(c, sample_outcomes(&z_measurement(), &rho, n, 42).unwrap());
        assert!(sample_outcomes(&z_measurement(), &rho, 0, 42).is_err());
    }

    #[test]
    fn sampling_independent_of_thread_count() {
        let p = [0.2, 0.5, 0.3];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_from_probabilities(&p, 300_000, 7))
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn monte_carlo_requires_two_samples() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let est = optimal_estimator(&m, &[0.3], COMMUTATOR_TOL).unwrap();
        assert!(monte_carlo_covariance(&est, &m, &[0.3], 1, 0).is_err());
    }

    #[test]
    fn adaptive_without_second_stage() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let t = two_stage_adaptive(&m, &[0.3], &[0.5], 1000, 0, 3, COMMUTATOR_TOL).unwrap();
        assert_eq!(t.final_estimate, t.stage1_estimate);
        assert!(t.stage2_estimator.is_none());
    }

    #[test]
    fn clamping_keeps_margin() {
        let d = Domain::Simplex { dim: 1 };
        let (t, c) = clamp_interior(&d, &[1.2], 1e-3);
        assert!(c && (t[0] - 0.999).abs() < 1e-12);
        let d = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let (t, c) = clamp_interior(&d, &[3.0, 4.0], 1e-3);
        assert!(c && ((t[0] * t[0] + t[1] * t[1]).sqrt() - 0.999).abs() < 1e-12);
        let (t, c) = clamp_interior(&d, &[0.3, 0.1], 1e-3);
        assert!(!c && t == vec![0.3, 0.1]);
    }

    #[test]
    fn random_unbiased_estimator_satisfies_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = ParametricModel::bloch_full();
        let th = [0.1, -0.2, 0.3];
        let est = random_locally_unbiased(&m, &th, 6, &mut rng).unwrap();
        let r = check_locally_unbiased(&est, &m, &th, 1e-5).unwrap();
        assert!(r.mean_defect < 1e-10 && r.derivative_defect < 1e-6, "{r:?}");
        let cov = exact_covariance(&est, &m, &th).unwrap();
        assert!(cov.gap_min_eig >= -1e-8);
    }
}
