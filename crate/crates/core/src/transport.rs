//! Uhlmann parallel transport: horizontal lifts `dW/dt = ½ L W`, relative
//! phase factors, small-loop holonomy and the fiber-distance identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{curvature, sld_set};
use crate::matcore::{
    identity, polar_positive, random, serde_cmatrix, solve_sld, unitarity_defect, CMatrix,
    DensityMatrix, C64,
};
use crate::model::ParametricModel;

/// Default RK4 steps per path segment.
pub const DEFAULT_STEPS: usize = 512;
pub const MIN_STEPS: usize = 16;
/// Default bound on `‖π(W(1)) − ρ(θ(1))‖_F`.
pub const LIFT_DEFECT_TOL: f64 = 1e-6;
/// Default bound on `‖U − I‖_F` for a vanishing RPF.
pub const RPF_TOL: f64 = 1e-6;

pub const ALIGNMENT_NOTE: &str =
    "reference amplitude chosen with W0^dagger W1_hat positive semidefinite (unique Hermitian branch)";

/// A point of the bundle: invertible `W` with `Tr WW† = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplitude(#[serde(with = "serde_cmatrix")] CMatrix);

impl Amplitude {
    pub fn new(w: CMatrix) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::rejected("amplitude must be square"));
        }
        let norm = (&w * w.adjoint()).trace().re;
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::rejected(format!(
                "amplitude must satisfy Tr WW† = 1, got {norm}"
            )));
        }
        let a = Amplitude(w);
        DensityMatrix::new(a.projection())?;
        Ok(a)
    }

    /// The positive amplitude `ρ^{1/2}` over `ρ`.
    pub fn positive(rho: &DensityMatrix) -> Self {
        Amplitude(rho.sqrt())
    }

    /// `ρ^{1/2} U` for a unitary `U`.
    pub fn with_phase(rho: &DensityMatrix, u: &CMatrix) -> Result<Self> {
        Self::new(rho.sqrt() * u)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// `π(W) = WW†`.
    pub fn projection(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }
}

/// Piecewise-linear curve in parameter space; segment `k` runs from
/// waypoint `k` to `k + 1` at uniform speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePath {
    waypoints: Vec<Vec<f64>>,
}

impl CurvePath {
    pub fn new(model: &ParametricModel, waypoints: Vec<Vec<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::rejected("a path needs at least 2 waypoints"));
        }
        for w in &waypoints {
            model.domain().check(w)?;
        }
        Ok(CurvePath { waypoints })
    }

    pub fn waypoints(&self) -> &[Vec<f64>] {
        &self.waypoints
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn start(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &[f64] {
        self.waypoints.last().expect("at least two waypoints")
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut w = self.waypoints.clone();
        w.reverse();
        CurvePath { waypoints: w }
    }

    /// Axis-aligned rectangle `θ → θ+a eᵢ → θ+a eᵢ+b eⱼ → θ+b eⱼ → θ`.
    pub fn rectangle(
        model: &ParametricModel,
        theta: &[f64],
        i: usize,
        j: usize,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        let mut p1 = theta.to_vec();
        p1[i] += a;
        let mut p2 = p1.clone();
        p2[j] += b;
        let mut p3 = theta.to_vec();
        p3[j] += b;
        Self::new(model, vec![theta.to_vec(), p1, p2, p3, theta.to_vec()])
    }

    fn point(&self, segment: usize, s: f64) -> Vec<f64> {
        let (a, b) = (&self.waypoints[segment], &self.waypoints[segment + 1]);
        a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
    }
}

/// Outcome of a horizontal lift, optionally with its relative phase factor.
#[derive(Debug, Clone, Serialize)]
pub struct TransportResult {
    pub w_start: Amplitude,
    pub w_end: Amplitude,
    /// `Ŵ₁`, present when the RPF was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Amplitude>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_matrix"
    )]
    pub rpf: Option<CMatrix>,
    /// `‖U − I‖_F`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpf_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpf_unitarity_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpf_vanishes: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rpf_tol: Option<f64>,
    pub trajectory: Vec<TrajectorySample>,
    /// Total RK4 steps over all segments.
    pub steps: usize,
    pub steps_per_segment: usize,
    /// `‖π(W(1)) − ρ(θ(1))‖_F`.
    pub defect: f64,
    /// Largest projection defect over the recorded samples and the end point.
    pub max_defect: f64,
    /// Largest `|Tr WW† − 1|` after renormalization.
    pub max_norm_drift: f64,
    pub alignment: &'static str,
}

fn ser_opt_matrix<S: serde::Serializer>(
    m: &Option<CMatrix>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => serde_cmatrix::serialize(m, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub theta: Vec<f64>,
    pub w: Amplitude,
    pub defect: f64,
}

/// Integration settings for [`horizontal_lift`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftOptions {
    pub steps_per_segment: usize,
    pub defect_tol: f64,
    /// Record a trajectory sample every this many steps (0 = end points only).
    pub record_every: usize,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            steps_per_segment: DEFAULT_STEPS,
            defect_tol: LIFT_DEFECT_TOL,
            record_every: 0,
        }
    }
}

impl LiftOptions {
    pub fn with_steps(steps: usize) -> Self {
        LiftOptions {
            steps_per_segment: steps,
            ..Default::default()
        }
    }
}

/// `½ L_t W` along segment `segment` at local parameter `s`.
fn lift_rhs(
    model: &ParametricModel,
    path: &CurvePath,
    segment: usize,
    s: f64,
    w: &CMatrix,
) -> Result<CMatrix> {
    let theta = path.point(segment, s);
    let a = &path.waypoints[segment];
    let b = &path.waypoints[segment + 1];
    let velocity: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let rho = model.evaluate(&theta)?;
    let drho = model.directional_derivative(&theta, &velocity)?;
    let l = solve_sld(&rho, &drho)?;
    Ok(l.matrix() * w * C64::new(0.5, 0.0))
}

fn projection_defect(model: &ParametricModel, theta: &[f64], w: &CMatrix) -> Result<f64> {
    let rho = model.evaluate(theta)?;
    Ok((w * w.adjoint() - rho.matrix()).norm())
}

/// Integrates the horizontal-lift equation with classical fixed-step RK4.
///
/// After every step `W` is rescaled so that `Tr WW† = 1`.
pub fn horizontal_lift(
    model: &ParametricModel,
    path: &CurvePath,
    w0: &Amplitude,
    options: &LiftOptions,
) -> Result<TransportResult> {
    let steps = options.steps_per_segment;
    if steps < MIN_STEPS {
        return Err(Error::rejected(format!(
            "steps must be at least {MIN_STEPS}, got {steps}"
        )));
    }
    let rho0 = model.evaluate(path.start())?;
    let start_defect = (w0.projection() - rho0.matrix()).norm();
    if start_defect > 1e-8 {
        return Err(Error::rejected(format!(
            "initial amplitude does not project onto ρ(θ(0)): defect {start_defect:e}"
        )));
    }

    let segments = path.segments();
    let dt = 1.0 / steps as f64;
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let mut w = w0.matrix().clone();
    let mut trajectory = vec![TrajectorySample {
        t: 0.0,
        theta: path.start().to_vec(),
        w: w0.clone(),
        defect: start_defect,
    }];
    let mut max_defect = start_defect;
    let mut max_norm_drift: f64 = 0.0;

    for seg in 0..segments {
        if path.waypoints[seg] == path.waypoints[seg + 1] {
            continue;
        }
        for k in 0..steps {
            let s = k as f64 * dt;
            let k1 = lift_rhs(model, path, seg, s, &w)?;
            let k2 = lift_rhs(model, path, seg, s + 0.5 * dt, &(&w + &k1 * half))?;
            let k3 = lift_rhs(model, path, seg, s + 0.5 * dt, &(&w + &k2 * half))?;
            let k4 = lift_rhs(model, path, seg, s + dt, &(&w + &k3 * full))?;
            w += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth;
            let norm = (&w * w.adjoint()).trace().re;
            w *= C64::new(1.0 / norm.sqrt(), 0.0);
            max_norm_drift = max_norm_drift.max(((&w * w.adjoint()).trace().re - 1.0).abs());

            let done = k + 1;
            if options.record_every > 0 && done % options.record_every == 0 && done < steps {
                let s_now = done as f64 * dt;
                let theta = path.point(seg, s_now);
                let defect = projection_defect(model, &theta, &w)?;
                max_defect = max_defect.max(defect);
                trajectory.push(TrajectorySample {
                    t: (seg as f64 + s_now) / segments as f64,
                    theta,
                    w: Amplitude(w.clone()),
                    defect,
                });
            }
        }
        if options.record_every > 0 || seg + 1 == segments {
            let theta = path.waypoints[seg + 1].clone();
            let defect = projection_defect(model, &theta, &w)?;
            max_defect = max_defect.max(defect);
            trajectory.push(TrajectorySample {
                t: (seg + 1) as f64 / segments as f64,
                theta,
                w: Amplitude(w.clone()),
                defect,
            });
        }
    }

    let defect = projection_defect(model, path.end(), &w)?;
    max_defect = max_defect.max(defect);
    if defect > options.defect_tol {
        return Err(Error::Convergence {
            defect,
            tol: options.defect_tol,
            steps: steps * segments,
        });
    }
    Ok(TransportResult {
        w_start: w0.clone(),
        w_end: Amplitude(w),
        reference: None,
        rpf: None,
        rpf_distance: None,
        rpf_unitarity_defect: None,
        rpf_vanishes: None,
        rpf_tol: None,
        trajectory,
        steps: steps * segments,
        steps_per_segment: steps,
        defect,
        max_defect,
        max_norm_drift,
        alignment: ALIGNMENT_NOTE,
    })
}

/// `Ŵ₁` over `ρ₁` with `W₀†Ŵ₁` Hermitian positive semidefinite.
///
/// With `W₀† ρ₁^{1/2} = P K` (left polar), `Ŵ₁ = ρ₁^{1/2} K†` and `W₀†Ŵ₁ = P`.
pub fn reference_amplitude(w0: &Amplitude, rho1: &DensityMatrix) -> Result<Amplitude> {
    if w0.matrix().nrows() != rho1.dim() {
        return Err(Error::DimensionMismatch {
            left: w0.matrix().nrows(),
            right: rho1.dim(),
        });
    }
    let s = rho1.sqrt();
    let polar = polar_positive(&(w0.matrix().adjoint() * &s))?;
    if polar.rank_deficient {
        return Err(Error::rejected(
            "W0† ρ1^{1/2} is rank deficient; the reference amplitude is not unique",
        ));
    }
    Ok(Amplitude(s * polar.k.adjoint()))
}

/// Horizontal lift followed by `U = Ŵ₁⁻¹ W(1)`.
pub fn relative_phase_factor(
    model: &ParametricModel,
    path: &CurvePath,
    w0: &Amplitude,
    options: &LiftOptions,
    rpf_tol: f64,
) -> Result<TransportResult> {
    let mut result = horizontal_lift(model, path, w0, options)?;
    let rho1 = model.evaluate(path.end())?;
    let reference = reference_amplitude(w0, &rho1)?;
    let u = reference
        .matrix()
        .clone()
        .lu()
        .solve(result.w_end.matrix())
        .ok_or_else(|| Error::rejected("reference amplitude is singular"))?;
    let n = u.nrows();
    let distance = (&u - identity(n)).norm();
    result.rpf_unitarity_defect = Some(unitarity_defect(&u));
    result.rpf_distance = Some(distance);
    result.rpf_vanishes = Some(distance <= rpf_tol);
    result.rpf_tol = Some(rpf_tol);
    result.rpf = Some(u);
    result.reference = Some(reference);
    Ok(result)
}

/// RPF of a path started from the positive amplitude `ρ(θ(0))^{1/2}`.
pub fn path_rpf(
    model: &ParametricModel,
    path: &CurvePath,
    options: &LiftOptions,
) -> Result<TransportResult> {
    let w0 = Amplitude::positive(&model.evaluate(path.start())?);
    relative_phase_factor(model, path, &w0, options, RPF_TOL)
}

/// Closed random polygon through `vertices` points of the sampling box.
pub fn random_loop(
    model: &ParametricModel,
    rng: &mut impl Rng,
    vertices: usize,
) -> Result<CurvePath> {
    let mut pts: Vec<Vec<f64>> = (0..vertices.max(2))
        .map(|_| model.sample_point(rng))
        .collect();
    pts.push(pts[0].clone());
    CurvePath::new(model, pts)
}

/// Small-rectangle holonomy against the curvature prediction.
#[derive(Debug, Clone, Serialize)]
pub struct PlaquetteReport {
    pub theta: Vec<f64>,
    pub i: usize,
    pub j: usize,
    pub dtheta: f64,
    #[serde(with = "serde_cmatrix")]
    pub rpf: CMatrix,
    /// `I + ½ W₀⁻¹ F_ij W₀ dθ²`.
    #[serde(with = "serde_cmatrix")]
    pub predicted: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub curvature: CMatrix,
    pub residual: f64,
    pub steps_per_segment: usize,
}

/// Holonomy of `θ → θ+dθ eᵢ → +dθ eⱼ → θ+dθ eⱼ → θ`, starting at `W₀ = ρ(θ)^{1/2}`.
pub fn plaquette_check(
    model: &ParametricModel,
    theta: &[f64],
    i: usize,
    j: usize,
    dtheta: f64,
    steps: usize,
) -> Result<PlaquetteReport> {
    let f = curvature(model, theta)?;
    plaquette_with_curvature(model, theta, i, j, dtheta, steps, f.get(i, j))
}

fn plaquette_with_curvature(
    model: &ParametricModel,
    theta: &[f64],
    i: usize,
    j: usize,
    dtheta: f64,
    steps: usize,
    fij: &CMatrix,
) -> Result<PlaquetteReport> {
    if i == j || i >= model.param_dim() || j >= model.param_dim() {
        return Err(Error::rejected(
            "plaquette needs two distinct parameter indices",
        ));
    }
    let path = CurvePath::rectangle(model, theta, i, j, dtheta, dtheta)?;
    let rho = model.evaluate(theta)?;
    let w0 = Amplitude::positive(&rho);
    let result =
        relative_phase_factor(model, &path, &w0, &LiftOptions::with_steps(steps), RPF_TOL)?;
    let u = result.rpf.expect("rpf computed");
    let n = u.nrows();
    let w0_inv = rho.inv_sqrt();
    let predicted =
        identity(n) + &w0_inv * fij * w0.matrix() * C64::new(0.5 * dtheta * dtheta, 0.0);
    let residual = (&u - &predicted).norm();
    Ok(PlaquetteReport {
        theta: theta.to_vec(),
        i,
        j,
        dtheta,
        rpf: u,
        predicted,
        curvature: fij.clone(),
        residual,
        steps_per_segment: steps,
    })
}

/// Residual decay of the plaquette expansion over a sequence of loop sizes.
#[derive(Debug, Clone, Serialize)]
pub struct PlaquetteSweep {
    pub reports: Vec<PlaquetteReport>,
    /// `r(dθ_k) / r(dθ_{k+1})`.
    pub decay_ratios: Vec<f64>,
    pub min_ratio: f64,
    pub required_ratio: f64,
    pub passed: bool,
}

pub const PLAQUETTE_DECAY_RATIO: f64 = 6.0;

/// Runs [`plaquette_check`] for each `dθ`; loops are integrated concurrently.
pub fn plaquette_sweep(
    model: &ParametricModel,
    theta: &[f64],
    i: usize,
    j: usize,
    dthetas: &[f64],
    steps: usize,
) -> Result<PlaquetteSweep> {
    let f = curvature(model, theta)?;
    let fij = f.get(i, j);
    let reports: Vec<PlaquetteReport> = dthetas
        .par_iter()
        .map(|&d| plaquette_with_curvature(model, theta, i, j, d, steps, fij))
        .collect::<Result<_>>()?;
    let decay_ratios: Vec<f64> = reports
        .windows(2)
        .map(|w| w[0].residual / w[1].residual)
        .collect();
    let min_ratio = decay_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PlaquetteSweep {
        reports,
        passed: decay_ratios.iter().all(|&r| r >= PLAQUETTE_DECAY_RATIO),
        decay_ratios,
        min_ratio,
        required_ratio: PLAQUETTE_DECAY_RATIO,
    })
}

/// `4 Tr Ẇ Ẇ†`.
pub fn fiber_speed(wdot: &CMatrix) -> f64 {
    4.0 * (wdot * wdot.adjoint()).trace().re
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberMinReport {
    pub theta: Vec<f64>,
    pub direction: Vec<f64>,
    /// `4 Tr Ẇ Ẇ†` for the horizontal velocity `Ẇ = ½ L W`.
    pub horizontal_value: f64,
    /// `directionᵀ J direction`.
    pub fisher_value: f64,
    pub identity_gap: f64,
    pub trials: usize,
    /// Smallest `4 Tr Ẇ′Ẇ′†` over the vertical perturbations.
    pub min_perturbed: f64,
    /// `min_perturbed − horizontal_value`.
    pub min_excess: f64,
    pub seed: u64,
}

/// Compares the horizontal velocity's speed with `vᵀJv` and with randomly
/// perturbed velocities `Ẇ + W G` (`G` skew-Hermitian), which project to the
/// same `dρ`.
pub fn fiber_min_check(
    model: &ParametricModel,
    theta: &[f64],
    direction: &[f64],
    trials: usize,
    seed: u64,
) -> Result<FiberMinReport> {
    if direction.len() != model.param_dim() {
        return Err(Error::rejected("direction has the wrong length"));
    }
    if direction.iter().all(|&x| x == 0.0) {
        return Err(Error::rejected("direction must be nonzero"));
    }
    let rho = model.evaluate(theta)?;
    let set = sld_set(model, theta)?;
    let drho = model.directional_derivative(theta, direction)?;
    let l = solve_sld(&rho, &drho)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rho.dim();
    let w = rho.sqrt() * random::unitary(&mut rng, n);
    let wdot = l.matrix() * &w * C64::new(0.5, 0.0);
    let horizontal_value = fiber_speed(&wdot);

    let v = nalgebra::DVector::from_column_slice(direction);
    let fisher_value = (v.transpose() * &set.fisher * &v)[(0, 0)];

    let mut min_perturbed = f64::INFINITY;
    for _ in 0..trials {
        let g = random::skew_hermitian(&mut rng, n);
        min_perturbed = min_perturbed.min(fiber_speed(&(&wdot + &w * g)));
    }
    Ok(FiberMinReport {
        theta: theta.to_vec(),
        direction: direction.to_vec(),
        horizontal_value,
        fisher_value,
        identity_gap: (horizontal_value - fisher_value).abs(),
        trials,
        min_perturbed,
        min_excess: min_perturbed - horizontal_value,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{pauli, Hermitian};

    #[test]
    fn constant_path_is_identity() {
        let m = ParametricModel::bloch_full();
        let th = vec![0.1, 0.2, -0.1];
        let path = CurvePath::new(&m, vec![th.clone(), th.clone()]).unwrap();
        let w0 = Amplitude::positive(&m.evaluate(&th).unwrap());
        let r = relative_phase_factor(&m, &path, &w0, &LiftOptions::default(), RPF_TOL).unwrap();
        assert_eq!(r.w_end.matrix(), w0.matrix());
        assert!(r.rpf_distance.unwrap() < 1e-12);
    }

    #[test]
    fn classical_segment_matches_sqrt() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let path = CurvePath::new(&m, vec![vec![0.3], vec![0.5]]).unwrap();
        let w0 = Amplitude::positive(&m.evaluate(&[0.3]).unwrap());
        let r = horizontal_lift(&m, &path, &w0, &LiftOptions::with_steps(64)).unwrap();
        let w1 = r.w_end.matrix();
        let expected = Hermitian::from_real_diagonal(&[0.5f64.sqrt(), 0.5f64.sqrt()]);
        assert!((w1 - expected.matrix()).norm() < 1e-10);
    }

    #[test]
    fn reference_amplitude_examples() {
        let rho =
            DensityMatrix::new(Hermitian::from_real_diagonal(&[0.6, 0.4]).into_inner()).unwrap();
        let w0 = Amplitude::positive(&rho);
        let w1 = reference_amplitude(&w0, &rho).unwrap();
        assert!((w1.matrix() - w0.matrix()).norm() < 1e-12);

        let u = (pauli::x() * C64::new(0.0, 1.0) + identity(2)) * C64::new(0.5f64.sqrt(), 0.0);
        let w0 = Amplitude::with_phase(&rho, &u).unwrap();
        let w1 = reference_amplitude(&w0, &rho).unwrap();
        assert!((w1.matrix() - w0.matrix()).norm() < 1e-12);
    }

    #[test]
    fn short_step_counts_rejected() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let path = CurvePath::new(&m, vec![vec![0.3], vec![0.5]]).unwrap();
        let w0 = Amplitude::positive(&m.evaluate(&[0.3]).unwrap());
        assert!(horizontal_lift(&m, &path, &w0, &LiftOptions::with_steps(8)).is_err());
        let wrong = Amplitude::positive(&m.evaluate(&[0.4]).unwrap());
        assert!(horizontal_lift(&m, &path, &wrong, &LiftOptions::default()).is_err());
    }

    #[test]
    fn tiny_defect_tolerance_reports_convergence_error() {
        let m = ParametricModel::bloch_full();
        let path = CurvePath::new(&m, vec![vec![0.0, 0.0, 0.0], vec![0.6, 0.3, 0.0]]).unwrap();
        let w0 = Amplitude::positive(&m.evaluate(&[0.0; 3]).unwrap());
        let opts = LiftOptions {
            steps_per_segment: 16,
            defect_tol: 1e-300,
            record_every: 0,
        };
        assert!(matches!(
            horizontal_lift(&m, &path, &w0, &opts),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn equatorial_loop_has_holonomy() {
        let m = ParametricModel::bloch_full();
        let pts: Vec<Vec<f64>> = (0..=24)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * (k % 24) as f64 / 24.0;
                vec![0.5 * a.cos(), 0.5 * a.sin(), 0.0]
            })
            .collect();
        let path = CurvePath::new(&m, pts).unwrap();
        let r = path_rpf(&m, &path, &LiftOptions::with_steps(64)).unwrap();
        assert!(r.rpf_distance.unwrap() > 0.01);
        assert!(r.rpf_unitarity_defect.unwrap() < 1e-8);
    }

    #[test]
    fn fiber_identity_at_bloch_center() {
        let m = ParametricModel::bloch_full();
        let r = fiber_min_check(&m, &[0.0; 3], &[0.0, 0.0, 1.0], 20, 1).unwrap();
        assert!((r.horizontal_value - 1.0).abs() < 1e-12);
        assert!(r.min_excess >= -1e-10);
        let r = fiber_min_check(&m, &[0.0; 3], &[0.0, 0.0, 1.0], 0, 1).unwrap();
        assert_eq!(r.min_perturbed, f64::INFINITY);
        assert!(fiber_min_check(&m, &[0.0; 3], &[0.0; 3], 5, 1).is_err());
    }
}
