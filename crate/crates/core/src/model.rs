//! Parametric families `θ ↦ ρ(θ)` of strictly positive states.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    comm_norm, expm_hermitian, pauli, CMatrix, DensityMatrix, Hermitian, MatrixJson, Tolerances,
    C64,
};

/// Relative central-difference step: `h = FD_SCALE · max(1, |θⁱ|)`.
pub const FD_SCALE: f64 = 1e-5;

/// Parameter region Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Product of open intervals `(lower_i, upper_i)`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Open ball `|θ − center| < radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open probability simplex: `θ_i > 0`, `Σθ_i < 1`.
    Simplex { dim: usize },
    /// Finite lattice; only the listed points exist.
    Lattice { axes: Vec<Vec<f64>> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Simplex { dim } => *dim,
            Domain::Lattice { axes } => axes.len(),
        }
    }

    /// Checks membership, naming the offending coordinate on failure.
    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::rejected(format!(
                "parameter vector has {} entries but the model has {} parameters",
                theta.len(),
                self.dim()
            )));
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(i, "coordinate is not finite"));
        }
        match self {
            Domain::Box { lower, upper } => {
                for (i, &x) in theta.iter().enumerate() {
                    if !(x > lower[i] && x < upper[i]) {
                        return Err(Error::domain(
                            i,
                            format!(
                                "θ[{i}] = {x} is outside the open interval ({}, {})",
                                lower[i], upper[i]
                            ),
                        ));
                    }
                }
            }
            Domain::Ball { center, radius } => {
                let r2: f64 = theta.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum();
                if !(r2.sqrt() < *radius) {
                    let worst = theta
                        .iter()
                        .zip(center)
                        .enumerate()
                        .max_by(|a, b| (a.1 .0 - a.1 .1).abs().total_cmp(&(b.1 .0 - b.1 .1).abs()))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    return Err(Error::domain(
                        worst,
                        format!(
                            "|θ| = {} must be < {radius} (largest coordinate is θ[{worst}])",
                            r2.sqrt()
                        ),
                    ));
                }
            }
            Domain::Simplex { .. } => {
                if let Some(i) = theta.iter().position(|&x| !(x > 0.0)) {
                    return Err(Error::domain(
                        i,
                        format!("θ[{i}] = {} must be > 0", theta[i]),
                    ));
                }
                let s: f64 = theta.iter().sum();
                if !(s < 1.0) {
                    let last = theta.len() - 1;
                    return Err(Error::domain(last, format!("Σθ = {s} must be < 1")));
                }
            }
            Domain::Lattice { axes } => {
                for (i, &x) in theta.iter().enumerate() {
                    lattice_index(&axes[i], x).ok_or_else(|| {
                        Error::domain(
                            i,
                            format!("θ[{i}] = {x} is not a lattice point of this grid model"),
                        )
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.check(theta).is_ok()
    }

    /// A compact box inside the domain used for sampling and grids.
    pub fn sample_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lower, upper } => {
                let lo = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| a + 0.1 * (b - a))
                    .collect();
                let hi = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| b - 0.1 * (b - a))
                    .collect();
                (lo, hi)
            }
            Domain::Ball { center, radius } => {
                let half = 0.5 * radius / (center.len() as f64).sqrt();
                (
                    center.iter().map(|c| c - half).collect(),
                    center.iter().map(|c| c + half).collect(),
                )
            }
            Domain::Simplex { dim } => {
                let m = *dim as f64;
                (vec![0.1 / m; *dim], vec![0.9 / m; *dim])
            }
            Domain::Lattice { axes } => {
                // keep two lattice steps clear for nested finite differences
                let lo = axes.iter().map(|a| a[2.min(a.len() - 1)]).collect();
                let hi = axes.iter().map(|a| a[a.len().saturating_sub(3)]).collect();
                (lo, hi)
            }
        }
    }
}

fn lattice_index(axis: &[f64], x: f64) -> Option<usize> {
    let step = if axis.len() > 1 {
        (axis[1] - axis[0]).abs()
    } else {
        1.0
    };
    axis.iter().position(|&a| (a - x).abs() <= 1e-9 * step)
}

/// `ρ(θ) = M(θ) ρ₀ M(θ)` with `M(θ) = e^{Σθⁱ Xᵢ/2} / √(Tr ρ₀ e^{Σθⁱ Xᵢ})`
/// for pairwise commuting Hermitian generators `Xᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelFactorModel {
    generators: Vec<Hermitian>,
    base_state: DensityMatrix,
}

impl ParallelFactorModel {
    pub fn new(generators: Vec<Hermitian>, base_state: DensityMatrix) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::rejected("parallel_exp needs at least one generator"));
        }
        let n = base_state.dim();
        for (i, x) in generators.iter().enumerate() {
            if x.dim() != n {
                return Err(Error::DimensionMismatch {
                    left: x.dim(),
                    right: n,
                });
            }
            for (j, y) in generators.iter().enumerate().skip(i + 1) {
                let c = comm_norm(x, y)?;
                if c > 1e-12 {
                    return Err(Error::rejected(format!(
                        "parallel_exp generators {i} and {j} do not commute (comm_norm {c:e})"
                    )));
                }
            }
        }
        Ok(ParallelFactorModel {
            generators,
            base_state,
        })
    }

    pub fn generators(&self) -> &[Hermitian] {
        &self.generators
    }

    pub fn base_state(&self) -> &DensityMatrix {
        &self.base_state
    }

    fn exponent(&self, theta: &[f64]) -> Hermitian {
        let n = self.base_state.dim();
        self.generators
            .iter()
            .zip(theta)
            .fold(Hermitian::zeros(n), |acc, (x, &t)| acc.add(&x.scale(t)))
    }

    /// The Hermitian factor `M(θ)`, normalization included.
    pub fn factor(&self, theta: &[f64]) -> CMatrix {
        let half = expm_hermitian(&self.exponent(theta).scale(0.5));
        let z = (&half * self.base_state.matrix() * &half).trace().re;
        half * C64::new(1.0 / z.sqrt(), 0.0)
    }

    fn unnormalized(&self, theta: &[f64]) -> CMatrix {
        let m = self.factor(theta);
        &m * self.base_state.matrix() * &m
    }

    /// `∂ᵢρ = ½(Xᵢρ + ρXᵢ) − ρ Tr(ρXᵢ)`.
    fn derivative(&self, rho: &CMatrix, i: usize) -> CMatrix {
        let x = self.generators[i].matrix();
        let mean = (rho * x).trace().re;
        (x * rho + rho * x) * C64::new(0.5, 0.0) - rho * C64::new(mean, 0.0)
    }
}

/// States tabulated on a uniform lattice; no interpolation between points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    axes: Vec<Vec<f64>>,
    states: Vec<DensityMatrix>,
}

impl GridModel {
    /// `states` is row-major over `axes` (last axis varies fastest).
    pub fn new(axes: Vec<Vec<f64>>, states: Vec<DensityMatrix>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::ModelFile(
                "grid model needs at least one axis".into(),
            ));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() < 3 {
                return Err(Error::ModelFile(format!(
                    "axes[{i}] needs at least 3 lattice points"
                )));
            }
            let step = a[1] - a[0];
            if !(step > 0.0)
                || a.windows(2)
                    .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step)
            {
                return Err(Error::ModelFile(format!(
                    "axes[{i}] must be increasing with uniform spacing"
                )));
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if states.len() != expected {
            return Err(Error::ModelFile(format!(
                "states has {} entries but the lattice has {expected} points",
                states.len()
            )));
        }
        let n = states[0].dim();
        if let Some(k) = states.iter().position(|s| s.dim() != n) {
            return Err(Error::ModelFile(format!(
                "states[{k}] has the wrong dimension"
            )));
        }
        Ok(GridModel { axes, states })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    fn flat_index(&self, theta: &[f64]) -> Result<usize> {
        let mut idx = 0;
        for (i, (a, &x)) in self.axes.iter().zip(theta).enumerate() {
            let k = lattice_index(a, x).ok_or_else(|| {
                Error::domain(
                    i,
                    format!("θ[{i}] = {x} is not a lattice point of this grid model"),
                )
            })?;
            idx = idx * a.len() + k;
        }
        Ok(idx)
    }

    fn step(&self, i: usize) -> f64 {
        self.axes[i][1] - self.axes[i][0]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// `ρ = (I + Σ θ_k σ_{axes[k]})/2`.
    Bloch {
        axes: Vec<usize>,
    },
    /// `ρ = diag(θ_1, …, θ_m, 1 − Σθ)`.
    ClassicalSimplex,
    ParallelExp(ParallelFactorModel),
    /// `ρ = base + Σ θ_k D_k` with traceless `D_k`.
    Affine {
        base: Hermitian,
        directions: Vec<Hermitian>,
    },
    Grid(GridModel),
}

/// A parametric quantum statistical model `ℳ = {ρ(θ) | θ ∈ Θ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricModel {
    name: String,
    state_dim: usize,
    domain: Domain,
    family: Family,
    tolerances: Tolerances,
}

/// Serializable summary echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDescription {
    pub name: String,
    pub state_dim: usize,
    pub param_dim: usize,
    pub domain: Domain,
    pub analytic_derivative: bool,
}

impl ParametricModel {
    pub fn bloch_full() -> Self {
        Self::bloch("bloch_full", vec![0, 1, 2])
    }

    pub fn bloch_equator2() -> Self {
        Self::bloch("bloch_equator2", vec![0, 1])
    }

    fn bloch(name: &str, axes: Vec<usize>) -> Self {
        ParametricModel {
            name: name.into(),
            state_dim: 2,
            domain: Domain::Ball {
                center: vec![0.0; axes.len()],
                radius: 1.0,
            },
            family: Family::Bloch { axes },
            tolerances: Tolerances::default(),
        }
    }

    /// Diagonal family on `n ≥ 2` levels with `m = n − 1` parameters.
    pub fn classical_simplex(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::rejected("classical_simplex needs n >= 2"));
        }
        Ok(ParametricModel {
            name: "classical_simplex".into(),
            state_dim: n,
            domain: Domain::Simplex { dim: n - 1 },
            family: Family::ClassicalSimplex,
            tolerances: Tolerances::default(),
        })
    }

    pub fn parallel_exp(factor_model: ParallelFactorModel, domain: Domain) -> Result<Self> {
        if domain.dim() != factor_model.generators.len() {
            return Err(Error::rejected(
                "domain dimension must equal the number of generators",
            ));
        }
        Ok(ParametricModel {
            name: "parallel_exp".into(),
            state_dim: factor_model.base_state.dim(),
            domain,
            family: Family::ParallelExp(factor_model),
            tolerances: Tolerances::default(),
        })
    }

    /// Built-in qutrit instance: two commuting diagonal generators acting on
    /// a base state that does not commute with them.
    pub fn parallel_exp_default() -> Self {
        let x1 = Hermitian::from_real_diagonal(&[1.0, -1.0, 0.0]);
        let x2 = Hermitian::from_real_diagonal(&[0.0, 1.0, -1.0]);
        let c = |re, im| C64::new(re, im);
        let rho0 = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.45, 0.0),
                c(0.10, 0.05),
                c(0.05, 0.0),
                c(0.10, -0.05),
                c(0.33, 0.0),
                c(0.0, 0.08),
                c(0.05, 0.0),
                c(0.0, -0.08),
                c(0.22, 0.0),
            ],
        );
        let base = DensityMatrix::new(rho0).expect("built-in base state is valid");
        let f = ParallelFactorModel::new(vec![x1, x2], base).expect("diagonal generators commute");
        Self::parallel_exp(
            f,
            Domain::Box {
                lower: vec![-1.0; 2],
                upper: vec![1.0; 2],
            },
        )
        .expect("consistent dimensions")
    }

    /// `ρ(θ) = base + Σ θ_k D_k` on an open box.
    pub fn affine(base: DensityMatrix, directions: Vec<Hermitian>, domain: Domain) -> Result<Self> {
        let n = base.dim();
        if directions.len() != domain.dim() {
            return Err(Error::rejected("need one direction per parameter"));
        }
        for (k, d) in directions.iter().enumerate() {
            if d.dim() != n {
                return Err(Error::DimensionMismatch {
                    left: d.dim(),
                    right: n,
                });
            }
            if d.trace_re().abs() > 1e-10 * d.norm().max(1.0) {
                return Err(Error::rejected(format!("direction {k} must be traceless")));
            }
        }
        Ok(ParametricModel {
            name: "affine".into(),
            state_dim: n,
            domain,
            family: Family::Affine {
                base: base.hermitian().clone(),
                directions,
            },
            tolerances: Tolerances::default(),
        })
    }

    pub fn grid(grid: GridModel) -> Self {
        ParametricModel {
            name: "grid".into(),
            state_dim: grid.states[0].dim(),
            domain: Domain::Lattice {
                axes: grid.axes.clone(),
            },
            family: Family::Grid(grid),
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn param_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.family, Family::Grid(_))
    }

    pub fn has_analytic_derivative(&self) -> bool {
        !self.is_lattice()
    }

    pub fn parallel_factor(&self) -> Option<&ParallelFactorModel> {
        match &self.family {
            Family::ParallelExp(f) => Some(f),
            _ => None,
        }
    }

    pub fn describe(&self) -> ModelDescription {
        ModelDescription {
            name: self.name.clone(),
            state_dim: self.state_dim,
            param_dim: self.param_dim(),
            domain: self.domain.clone(),
            analytic_derivative: self.has_analytic_derivative(),
        }
    }

    fn raw_state(&self, theta: &[f64]) -> Result<CMatrix> {
        let n = self.state_dim;
        Ok(match &self.family {
            Family::Bloch { axes } => {
                let sig = pauli::all();
                let mut m = CMatrix::identity(2, 2);
                for (&t, &a) in theta.iter().zip(axes) {
                    m += &sig[a] * C64::new(t, 0.0);
                }
                m * C64::new(0.5, 0.0)
            }
            Family::ClassicalSimplex => {
                let mut d: Vec<f64> = theta.to_vec();
                d.push(1.0 - theta.iter().sum::<f64>());
                Hermitian::from_real_diagonal(&d).into_inner()
            }
            Family::ParallelExp(f) => f.unnormalized(theta),
            Family::Affine { base, directions } => directions
                .iter()
                .zip(theta)
                .fold(base.matrix().clone(), |acc, (d, &t)| {
                    acc + d.matrix() * C64::new(t, 0.0)
                }),
            Family::Grid(g) => g.states[g.flat_index(theta)?].matrix().clone(),
        })
        .inspect(|m: &CMatrix| debug_assert_eq!(m.nrows(), n))
    }

    /// `ρ(θ)`, validated against the model's tolerances.
    pub fn evaluate(&self, theta: &[f64]) -> Result<DensityMatrix> {
        self.domain.check(theta)?;
        DensityMatrix::with_tolerances(self.raw_state(theta)?, &self.tolerances)
    }

    /// Closed-form `∂ᵢρ(θ)` when the family provides one.
    pub fn analytic_derivative(&self, theta: &[f64], i: usize) -> Option<Result<CMatrix>> {
        if i >= self.param_dim() {
            return Some(Err(Error::rejected(format!(
                "parameter index {i} out of range"
            ))));
        }
        let n = self.state_dim;
        let d = match &self.family {
            Family::Bloch { axes } => Ok(pauli::all()[axes[i]].clone() * C64::new(0.5, 0.0)),
            Family::ClassicalSimplex => {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d[n - 1] = -1.0;
                Ok(Hermitian::from_real_diagonal(&d).into_inner())
            }
            Family::ParallelExp(f) => self
                .evaluate(theta)
                .map(|rho| f.derivative(rho.matrix(), i)),
            Family::Affine { directions, .. } => Ok(directions[i].matrix().clone()),
            Family::Grid(_) => return None,
        };
        Some(self.domain.check(theta).and(d))
    }

    /// Finite-difference step used for coordinate `i` at `θ`.
    pub fn fd_step(&self, theta: &[f64], i: usize) -> f64 {
        match &self.family {
            Family::Grid(g) => g.step(i),
            _ => FD_SCALE * theta[i].abs().max(1.0),
        }
    }

    /// Central difference `(ρ(θ+h eᵢ) − ρ(θ−h eᵢ)) / 2h`, before any projection.
    pub fn derivative_fd_raw(&self, theta: &[f64], i: usize, h: f64) -> Result<CMatrix> {
        if i >= self.param_dim() {
            return Err(Error::rejected(format!("parameter index {i} out of range")));
        }
        self.domain.check(theta)?;
        let shifted = |s: f64| {
            let mut t = theta.to_vec();
            t[i] += s;
            t
        };
        let (tp, tm) = (shifted(h), shifted(-h));
        for t in [&tp, &tm] {
            if let Err(e) = self.domain.check(t) {
                return Err(Error::domain(
                    i,
                    format!("finite-difference stencil with h = {h:e} leaves the domain ({e}); use a smaller h or move θ inward"),
                ));
            }
        }
        let plus = self.raw_state(&tp)?;
        let minus = self.raw_state(&tm)?;
        Ok((plus - minus) * C64::new(0.5 / h, 0.0))
    }

    /// Raw derivative: analytic if available, otherwise central difference.
    pub fn derivative_raw(&self, theta: &[f64], i: usize) -> Result<CMatrix> {
        match self.analytic_derivative(theta, i) {
            Some(d) => d,
            None => self.derivative_fd_raw(theta, i, self.fd_step(theta, i)),
        }
    }

    /// `∂ᵢρ(θ)`, projected to an exactly Hermitian, traceless matrix.
    pub fn derivative(&self, theta: &[f64], i: usize) -> Result<Hermitian> {
        Ok(project_tangent(self.derivative_raw(theta, i)?))
    }

    /// `Σ vⁱ ∂ᵢρ(θ)`.
    pub fn directional_derivative(&self, theta: &[f64], v: &[f64]) -> Result<Hermitian> {
        if v.len() != self.param_dim() {
            return Err(Error::rejected("direction has the wrong length"));
        }
        let mut acc = Hermitian::zeros(self.state_dim);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                acc = acc.add(&self.derivative(theta, i)?.scale(vi));
            }
        }
        Ok(acc)
    }

    /// `per_axis^m` lattice over the domain's sampling box, filtered to the domain.
    /// Grid models return their interior lattice points instead.
    pub fn sample_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.domain.sample_box();
        let axes: Vec<Vec<f64>> = match &self.domain {
            Domain::Lattice { axes } => axes
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(a, (&l, &h))| a.iter().copied().filter(|&x| x >= l && x <= h).collect())
                .collect(),
            _ => lo
                .iter()
                .zip(&hi)
                .map(|(&l, &h)| {
                    if per_axis <= 1 {
                        vec![0.5 * (l + h)]
                    } else {
                        (0..per_axis)
                            .map(|k| l + (h - l) * k as f64 / (per_axis - 1) as f64)
                            .collect()
                    }
                })
                .collect(),
        };
        let mut points = vec![vec![]];
        for a in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    a.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points.retain(|p| self.domain.contains(p));
        points
    }

    /// Uniform draw from the sampling box, rejected until inside the domain.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Vec<f64> {
        if let Domain::Lattice { .. } = self.domain {
            let grid = self.sample_grid(0);
            return grid[rng.random_range(0..grid.len())].clone();
        }
        let (lo, hi) = self.domain.sample_box();
        loop {
            let p: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&l, &h)| rng.random_range(l..=h))
                .collect();
            if self.domain.contains(&p) {
                return p;
            }
        }
    }
}

/// Symmetrizes `(A + A†)/2` and removes the trace.
pub fn project_tangent(a: CMatrix) -> Hermitian {
    Hermitian::symmetrize(a).traceless()
}

/// Combined Hermiticity and trace defect of a raw derivative, before projection.
pub fn tangent_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm() + a.trace().norm()
}

pub const ZOO_NAMES: [&str; 5] = [
    "bloch_full",
    "bloch_equator2",
    "classical_simplex",
    "parallel_exp",
    "user_file",
];

/// Optional parameters for [`zoo`].
#[derive(Debug, Clone, Default)]
pub struct ZooParams {
    /// Number of levels for `classical_simplex` (default 2).
    pub n: Option<usize>,
    /// Generators for `parallel_exp`.
    pub generators: Option<Vec<CMatrix>>,
    /// Base state for `parallel_exp`.
    pub base_state: Option<CMatrix>,
    /// Box half-width for a custom `parallel_exp` (default 1).
    pub half_width: Option<f64>,
    /// Model file for `user_file`.
    pub path: Option<std::path::PathBuf>,
}

/// Instantiates a built-in model by name.
pub fn zoo(name: &str, params: &ZooParams) -> Result<ParametricModel> {
    match name {
        "bloch_full" => Ok(ParametricModel::bloch_full()),
        "bloch_equator2" => Ok(ParametricModel::bloch_equator2()),
        "classical_simplex" => ParametricModel::classical_simplex(params.n.unwrap_or(2)),
        "parallel_exp" => match (&params.generators, &params.base_state) {
            (None, None) => Ok(ParametricModel::parallel_exp_default()),
            (Some(g), Some(b)) => {
                let gens = g
                    .iter()
                    .cloned()
                    .map(Hermitian::new)
                    .collect::<Result<Vec<_>>>()?;
                let base = DensityMatrix::new(b.clone())?;
                let m = gens.len();
                let w = params.half_width.unwrap_or(1.0);
                ParametricModel::parallel_exp(
                    ParallelFactorModel::new(gens, base)?,
                    Domain::Box {
                        lower: vec![-w; m],
                        upper: vec![w; m],
                    },
                )
            }
            _ => Err(Error::rejected(
                "parallel_exp needs both generators and base_state, or neither",
            )),
        },
        "user_file" => {
            let path = params
                .path
                .as_ref()
                .ok_or_else(|| Error::rejected("user_file needs a path"))?;
            load_model_file(path)
        }
        other => Err(Error::UnknownModel {
            name: other.into(),
            valid: ZOO_NAMES.join(", "),
        }),
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelFile {
    Grid {
        n: usize,
        m: usize,
        axes: Vec<Vec<f64>>,
        states: Vec<MatrixJson>,
    },
    ParallelExp {
        n: usize,
        m: usize,
        generators: Vec<MatrixJson>,
        base_state: MatrixJson,
        #[serde(default)]
        domain: Option<Domain>,
    },
    Affine {
        n: usize,
        m: usize,
        base: MatrixJson,
        directions: Vec<MatrixJson>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Zoo {
        name: String,
        #[serde(default)]
        n: Option<usize>,
    },
}

fn field_matrix(j: &MatrixJson, field: &str, n: usize) -> Result<CMatrix> {
    let m = j
        .to_matrix()
        .map_err(|e| Error::ModelFile(format!("{field}: {e}")))?;
    if m.nrows() != n {
        return Err(Error::ModelFile(format!(
            "{field}: expected {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

fn field_state(j: &MatrixJson, field: &str, n: usize) -> Result<DensityMatrix> {
    DensityMatrix::new(field_matrix(j, field, n)?)
        .map_err(|e| Error::ModelFile(format!("{field}: {e}")))
}

fn field_hermitian(j: &MatrixJson, field: &str, n: usize) -> Result<Hermitian> {
    Hermitian::new(field_matrix(j, field, n)?)
        .map_err(|e| Error::ModelFile(format!("{field}: {e}")))
}

fn check_count(field: &str, got: usize, m: usize) -> Result<()> {
    if got != m {
        return Err(Error::ModelFile(format!(
            "{field}: expected {m} entries (m), got {got}"
        )));
    }
    Ok(())
}

impl ModelFile {
    pub fn into_model(self) -> Result<ParametricModel> {
        match self {
            ModelFile::Grid { n, m, axes, states } => {
                check_count("axes", axes.len(), m)?;
                let states = states
                    .iter()
                    .enumerate()
                    .map(|(k, s)| field_state(s, &format!("states[{k}]"), n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ParametricModel::grid(GridModel::new(axes, states)?))
            }
            ModelFile::ParallelExp {
                n,
                m,
                generators,
                base_state,
                domain,
            } => {
                check_count("generators", generators.len(), m)?;
                let gens = generators
                    .iter()
                    .enumerate()
                    .map(|(k, g)| field_hermitian(g, &format!("generators[{k}]"), n))
                    .collect::<Result<Vec<_>>>()?;
                let base = field_state(&base_state, "base_state", n)?;
                let domain = domain.unwrap_or(Domain::Box {
                    lower: vec![-1.0; m],
                    upper: vec![1.0; m],
                });
                let f = ParallelFactorModel::new(gens, base)
                    .map_err(|e| Error::ModelFile(format!("generators: {e}")))?;
                ParametricModel::parallel_exp(f, domain)
                    .map_err(|e| Error::ModelFile(format!("domain: {e}")))
            }
            ModelFile::Affine {
                n,
                m,
                base,
                directions,
                lower,
                upper,
            } => {
                check_count("directions", directions.len(), m)?;
                check_count("lower", lower.len(), m)?;
                check_count("upper", upper.len(), m)?;
                let base = field_state(&base, "base", n)?;
                let dirs = directions
                    .iter()
                    .enumerate()
                    .map(|(k, d)| field_hermitian(d, &format!("directions[{k}]"), n))
                    .collect::<Result<Vec<_>>>()?;
                ParametricModel::affine(base, dirs, Domain::Box { lower, upper })
                    .map_err(|e| Error::ModelFile(format!("directions: {e}")))
            }
            ModelFile::Zoo { name, n } => {
                if name == "user_file" {
                    return Err(Error::ModelFile(
                        "name: a model file cannot refer to user_file".into(),
                    ));
                }
                zoo(
                    &name,
                    &ZooParams {
                        n,
                        ..Default::default()
                    },
                )
            }
        }
    }
}

pub fn parse_model_json(text: &str) -> Result<ParametricModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
    file.into_model()
}

pub fn load_model_file(path: &Path) -> Result<ParametricModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ModelFile(format!("cannot read {}: {e}", path.display())))?;
    parse_model_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bloch_evaluations() {
        let m = ParametricModel::bloch_full();
        let rho = m.evaluate(&[0.0, 0.0, 0.0]).unwrap();
        assert!((rho.matrix() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-15);
        let rho = m.evaluate(&[0.5, 0.0, 0.0]).unwrap();
        assert!((rho.eigen().values[0] - 0.25).abs() < 1e-14);
        assert!((rho.eigen().values[1] - 0.75).abs() < 1e-14);
        match m.evaluate(&[1.2, 0.0, 0.0]) {
            Err(Error::Domain { coordinate, .. }) => assert_eq!(coordinate, 0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn bloch_derivative_is_half_pauli() {
        let m = ParametricModel::bloch_full();
        let d = m.derivative(&[0.1, -0.3, 0.2], 0).unwrap();
        assert!((d.matrix() - pauli::x() * C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn parallel_exp_qubit_derivative_at_origin() {
        let m = zoo(
            "parallel_exp",
            &ZooParams {
                generators: Some(vec![pauli::z()]),
                base_state: Some(Hermitian::from_real_diagonal(&[0.7, 0.3]).into_inner()),
                ..Default::default()
            },
        )
        .unwrap();
        let expected = Hermitian::from_real_diagonal(&[0.42, -0.42]);
        let analytic = m.derivative(&[0.0], 0).unwrap();
        assert!((analytic.matrix() - expected.matrix()).norm() < 1e-14);
        // oracle: central difference at h = 1e-5
        let fd = m.derivative_fd_raw(&[0.0], 0, 1e-5).unwrap();
        assert!((fd - expected.matrix()).norm() < 1e-9);
    }

    #[test]
    fn analytic_matches_central_difference_on_zoo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let models = [
            ParametricModel::bloch_full(),
            ParametricModel::bloch_equator2(),
            ParametricModel::classical_simplex(4).unwrap(),
            ParametricModel::parallel_exp_default(),
        ];
        for m in &models {
            for _ in 0..5 {
                let th = m.sample_point(&mut rng);
                for i in 0..m.param_dim() {
                    let a = m.analytic_derivative(&th, i).unwrap().unwrap();
                    let fd = m.derivative_fd_raw(&th, i, m.fd_step(&th, i)).unwrap();
                    assert!((a - fd).norm() <= 1e-6, "{} at {th:?}", m.name());
                }
            }
        }
    }

    #[test]
    fn classical_simplex_two_levels() {
        let m = zoo(
            "classical_simplex",
            &ZooParams {
                n: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        let rho = m.evaluate(&[0.3]).unwrap();
        assert!((rho[(0, 0)].re - 0.3).abs() < 1e-15 && (rho[(1, 1)].re - 0.7).abs() < 1e-15);
        assert!(m.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn parallel_factors_commute() {
        let m = ParametricModel::parallel_exp_default();
        let f = m.parallel_factor().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (a, b) = (m.sample_point(&mut rng), m.sample_point(&mut rng));
            let (ma, mb) = (f.factor(&a), f.factor(&b));
            assert!(comm_norm(&ma, &mb).unwrap() <= 1e-10);
            assert!(crate::matcore::hermiticity_defect(&ma) < 1e-14);
            let rho = &ma * f.base_state().matrix() * &ma;
            assert!((rho - m.evaluate(&a).unwrap().matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn non_commuting_generators_rejected() {
        let g = vec![
            Hermitian::new(pauli::x()).unwrap(),
            Hermitian::new(pauli::z()).unwrap(),
        ];
        assert!(ParallelFactorModel::new(g, DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn unknown_zoo_name_lists_valid_names() {
        let err = zoo("bloch_half", &ZooParams::default()).unwrap_err();
        assert!(err.to_string().contains("classical_simplex"));
    }

    #[test]
    fn stencil_outside_domain_suggests_smaller_h() {
        let m = ParametricModel::classical_simplex(2).unwrap();
        let err = m.derivative_fd_raw(&[0.05], 0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Domain { coordinate: 0, .. }));
        assert!(err.to_string().contains("smaller h"));
    }

    #[test]
    fn zoo_models_valid_on_grids() {
        for m in [
            ParametricModel::bloch_full(),
            ParametricModel::bloch_equator2(),
            ParametricModel::classical_simplex(3).unwrap(),
            ParametricModel::parallel_exp_default(),
        ] {
            let grid = m.sample_grid(5);
            assert!(!grid.is_empty());
            for th in grid {
                m.evaluate(&th).unwrap();
            }
        }
    }

    #[test]
    fn grid_model_from_json_uses_lattice_differences() {
        let axis: Vec<f64> = (0..7).map(|k| 0.2 + 0.1 * k as f64).collect();
        let states: Vec<MatrixJson> = axis
            .iter()
            .map(|&t| MatrixJson::from(&Hermitian::from_real_diagonal(&[t, 1.0 - t]).into_inner()))
            .collect();
        let file = ModelFile::Grid {
            n: 2,
            m: 1,
            axes: vec![axis],
            states,
        };
        let m = parse_model_json(&serde_json::to_string(&file).unwrap()).unwrap();
        assert!(m.is_lattice());
        let d = m.derivative(&[0.5], 0).unwrap();
        assert!((d.matrix() - Hermitian::from_real_diagonal(&[1.0, -1.0]).matrix()).norm() < 1e-12);
        assert!(matches!(m.evaluate(&[0.55]), Err(Error::Domain { .. })));
        assert!(matches!(m.derivative(&[0.2], 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn model_file_rejects_non_positive_state() {
        let text = r#"{"kind":"parallel_exp","n":2,"m":1,
            "generators":[{"re":[[1,0],[0,-1]],"im":[[0,0],[0,0]]}],
            "base_state":{"re":[[1.2,0],[0,-0.2]],"im":[[0,0],[0,0]]}}"#;
        let err = parse_model_json(text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("base_state") && msg.contains("positivity_floor"),
            "{msg}"
        );
    }

    #[test]
    fn model_file_field_count_errors_name_the_field() {
        let text = r#"{"kind":"affine","n":2,"m":1,
            "base":{"re":[[0.5,0],[0,0.5]],"im":[[0,0],[0,0]]},
            "directions":[{"re":[[0.5,0],[0,-0.5]],"im":[[0,0],[0,0]]}],
            "lower":[-0.5,0],"upper":[0.5]}"#;
        let err = parse_model_json(text).unwrap_err().to_string();
        assert!(err.contains("lower"), "{err}");
    }
}
