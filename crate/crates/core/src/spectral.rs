//! Radial spectral problems on geodesic balls and the σ₂ constraint solver.
//!
//! Rotationally symmetric operators `a(−Δ) + c` on a ball of a space form are
//! discretized by cell-centred finite volumes in the geodesic radius with exact
//! cell volumes `∫ sn^{n−1}`, so the matrix is symmetric in the weighted inner
//! product. Eigenvalues come from Sturm bisection followed by shifted inverse
//! iteration and are Richardson-extrapolated over `N, 2N, 4N` cells.
//!
//! The constraint solver finds `u` with `u|∂ = 0` and
//! `σ₂(e^{2u}(g + th)) = K` in the Galerkin sense on a polynomial basis
//! augmented by the critical potential, by chord iteration with the Dirichlet
//! `𝒯` matrix as the fixed Jacobian.

use crate::algebra::{Frame, Local0};
use crate::chartcalc::Geometry;
use crate::domain::{gauss_legendre, volume_density, Domain, Shape};
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::jet::Jet;
use crate::linalg::{lu, lu_solve};
use crate::models::{potential, GeodesicBall, ModelKind, ModelSpace};
use crate::scalar::{from_usize, lit, pairwise_sum, Scalar};
use crate::sigma_ops;
use crate::tensor::Tensor;
use crate::variations::{derivative_oracle, OracleEstimate, OracleOptions};
use rayon::prelude::*;

/// Default number of radial cells on the coarsest grid.
pub const DEFAULT_CELLS: usize = 512;

/// `sn(r)` with `dv = sn(r)^{n−1} dr dΩ` in geodesic polar coordinates.
fn sn<T: Scalar>(kind: ModelKind, kappa: T, r: T) -> T {
    match kind {
        ModelKind::Sphere => (kappa.sqrt() * r).sin() / kappa.sqrt(),
        ModelKind::Hyperbolic => ((-kappa).sqrt() * r).sinh() / (-kappa).sqrt(),
        _ => r,
    }
}

/// Radial operator `a(−Δ) + c` restricted to the angular mode `ℓ`, with a
/// Dirichlet condition at the ball radius and regularity at the centre.
#[derive(Clone, Debug)]
pub struct DiscreteOperator<T> {
    /// Cell centres.
    pub nodes: Vec<T>,
    pub angular_mode: usize,
    /// `M = W⁻¹K` as sub-, main and super-diagonals; the boundary row is eliminated.
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
    /// Cell volumes `w_i = ∫ sn^{n−1} dr`.
    pub metric_weights: Vec<T>,
    /// Face flux coefficients `a·sn^{n−1}/Δr` (half cell at the boundary face).
    flux: Vec<T>,
    /// Zeroth-order cell integrals.
    mass: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> DiscreteOperator<T> {
    /// Assembles `a(−Δ) + c` on a geodesic ball of `model` with `cells` cells.
    pub fn radial(model: &ModelSpace<T>, radius: T, cells: usize, a: T, c: T, ell: usize) -> Result<Self> {
        if model.kind == ModelKind::Product {
            return Err(Error::WrongBackground("radial operators need a space form".into()));
        }
        if cells < 2 || !(radius > T::zero()) {
            return Err(Error::Numeric(format!("radial grid with {cells} cells and radius {radius}")));
        }
        let n = model.dim() as i32;
        let (kind, kappa) = (model.kind, model.kappa);
        let h = radius / from_usize(cells);
        let half: T = lit(0.5);
        let (gx, gw) = gauss_legendre::<T>(4);
        let cell_integral = |lo: T, p: i32| -> T {
            gx.iter().zip(&gw).fold(T::zero(), |s, (&x, &w)| {
                let r = lo + (x + T::one()) * half * h;
                s + w * half * h * sn(kind, kappa, r).powi(p)
            })
        };
        let ang = from_usize::<T>(ell * (ell + model.dim() - 2));
        let nodes: Vec<T> = (0..cells).map(|i| (from_usize::<T>(i) + half) * h).collect();
        let weights: Vec<T> = (0..cells).map(|i| cell_integral(from_usize::<T>(i) * h, n - 1)).collect();
        let mass: Vec<T> = (0..cells)
            .map(|i| {
                let angular = if ell == 0 { T::zero() } else { a * ang * cell_integral(from_usize::<T>(i) * h, n - 3) };
                angular + c * weights[i]
            })
            .collect();
        let mut flux = vec![T::zero(); cells + 1];
        for (f, slot) in flux.iter_mut().enumerate().take(cells).skip(1) {
            *slot = a * sn(kind, kappa, from_usize::<T>(f) * h).powi(n - 1) / h;
        }
        flux[cells] = a * sn(kind, kappa, radius).powi(n - 1) / (h * half);
        let mut lower = vec![T::zero(); cells];
        let mut diag = vec![T::zero(); cells];
        let mut upper = vec![T::zero(); cells];
        for i in 0..cells {
            let w = weights[i];
            diag[i] = (flux[i] + flux[i + 1] + mass[i]) / w;
            if i > 0 {
                lower[i] = -flux[i] / w;
            }
            if i + 1 < cells {
                upper[i] = -flux[i + 1] / w;
            }
        }
        Ok(DiscreteOperator { nodes, angular_mode: ell, lower, diag, upper, metric_weights: weights, flux, mass, radius })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `‖WM − (WM)ᵀ‖∞ / ‖WM‖∞`.
    pub fn self_adjointness_defect(&self) -> T {
        let w = &self.metric_weights;
        let mut defect = T::zero();
        let mut scale = T::zero();
        for i in 0..self.len() {
            scale = scale.max((w[i] * self.diag[i]).abs());
            if i + 1 < self.len() {
                defect = defect.max((w[i] * self.upper[i] - w[i + 1] * self.lower[i + 1]).abs());
            }
        }
        defect / scale
    }

    /// `Mu`.
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let mut s = self.diag[i] * u[i];
                if i > 0 {
                    s = s + self.lower[i] * u[i - 1];
                }
                if i + 1 < self.len() {
                    s = s + self.upper[i] * u[i + 1];
                }
                s
            })
            .collect()
    }

    /// Symmetric form `W^{−½} K W^{−½}` as (diagonal, off-diagonal).
    fn symmetric(&self) -> (Vec<T>, Vec<T>) {
        let w = &self.metric_weights;
        let off = (0..self.len() - 1).map(|i| self.upper[i] * w[i] / (w[i] * w[i + 1]).sqrt()).collect();
        (self.diag.clone(), off)
    }

    /// Weighted Rayleigh quotient in energy form, free of cancellation.
    pub fn rayleigh_quotient(&self, u: &[T]) -> T {
        let m = self.len();
        let mut num = Vec::with_capacity(2 * m);
        for i in 0..m {
            let du = if i + 1 < m { u[i + 1] - u[i] } else { -u[i] };
            num.push(self.flux[i + 1] * du * du);
            num.push(self.mass[i] * u[i] * u[i]);
        }
        let den: Vec<T> = (0..m).map(|i| self.metric_weights[i] * u[i] * u[i]).collect();
        pairwise_sum(&num) / pairwise_sum(&den)
    }

    /// Smallest eigenvalue and its eigenvector (normalized in the weighted norm).
    pub fn smallest_eigenpair(&self) -> Result<(T, Vec<T>)> {
        let (d, e) = self.symmetric();
        let l1 = sturm_kth(&d, &e, 1);
        let l2 = sturm_kth(&d, &e, 2);
        let gap = (l2 - l1).max(T::epsilon() * (T::one() + l1.abs()));
        let shift = l1 - gap * lit(1e-3);
        let mut y = vec![T::one(); d.len()];
        let mut rho = T::nan();
        for _ in 0..100 {
            y = solve_shifted(&d, &e, shift, &y)?;
            let norm = y.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
            y.iter_mut().for_each(|x| *x = *x / norm);
            let u: Vec<T> = y.iter().zip(&self.metric_weights).map(|(&x, &w)| x / w.sqrt()).collect();
            let next = self.rayleigh_quotient(&u);
            let done = (next - rho).abs() <= lit::<T>(1e-12) * T::one().max(next.abs());
            rho = next;
            if done {
                return Ok((rho, u));
            }
        }
        Err(Error::Numeric("inverse iteration did not converge".into()))
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal `(d, e)`.
fn sturm_count<T: Scalar>(d: &[T], e: &[T], x: T) -> usize {
    let tiny = T::min_positive_value();
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = d[i] - x - e[i - 1] * e[i - 1] / q;
        }
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue by bisection on Sturm counts.
fn sturm_kth<T: Scalar>(d: &[T], e: &[T], k: usize) -> T {
    let m = d.len();
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for i in 0..m {
        let r = if i > 0 { e[i - 1].abs() } else { T::zero() } + if i + 1 < m { e[i].abs() } else { T::zero() };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let half: T = lit(0.5);
    for _ in 0..300 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) * half
}

/// Solves `(A − σI)x = b` for symmetric tridiagonal `A` by the Thomas algorithm.
fn solve_shifted<T: Scalar>(d: &[T], e: &[T], shift: T, b: &[T]) -> Result<Vec<T>> {
    let m = d.len();
    let mut c = vec![T::zero(); m];
    let mut y = vec![T::zero(); m];
    let mut piv = d[0] - shift;
    for i in 0..m {
        if i > 0 {
            piv = d[i] - shift - e[i - 1] * c[i - 1];
        }
        if piv == T::zero() || !piv.is_finite() {
            return Err(Error::Numeric("singular shifted tridiagonal system".into()));
        }
        if i + 1 < m {
            c[i] = e[i] / piv;
        }
        y[i] = (b[i] - if i > 0 { e[i - 1] * y[i - 1] } else { T::zero() }) / piv;
    }
    for i in (0..m - 1).rev() {
        y[i] = y[i] - c[i] * y[i + 1];
    }
    Ok(y)
}

/// Cone of the background, which fixes the sign of the principal part of `𝒯`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    /// `Γ₂⁺`: `−𝒯` has positive principal part.
    Positive,
    /// `Γ₂⁻`: the operator is replaced by `𝒯` to make the principal part positive.
    Negative,
    Degenerate,
}

/// Richardson-extrapolated smallest eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate<T> {
    pub value: T,
    pub error_bar: T,
    /// Observed convergence order `log₂((λ_N − λ_{2N})/(λ_{2N} − λ_{4N}))`.
    pub order: T,
    pub grids: [usize; 3],
    pub raw: [T; 3],
    /// True when the reported spectrum is that of `𝒯` rather than `−𝒯`.
    pub sign_normalized: bool,
    pub cone: ConeKind,
}

impl<T: Scalar> EigenEstimate<T> {
    /// Sign of the eigenvalue when `|λ| > 3·error_bar`.
    pub fn sign(&self) -> Option<i8> {
        let three: T = lit(3.0);
        if self.value > three * self.error_bar {
            Some(1)
        } else if self.value < -three * self.error_bar {
            Some(-1)
        } else {
            None
        }
    }

    pub fn certified_positive(&self) -> bool {
        self.sign() == Some(1)
    }
}

/// Smallest eigenvalue of `a(−Δ) + c` on the ball, extrapolated from
/// `cells`, `2·cells`, `4·cells`.
pub fn extrapolated_eigenvalue<T: Scalar>(
    model: &ModelSpace<T>,
    radius: T,
    cells: usize,
    a: T,
    c: T,
) -> Result<([T; 3], T, T, T)> {
    let grids = [cells, 2 * cells, 4 * cells];
    let vals: Result<Vec<T>> = grids
        .par_iter()
        .map(|&m| DiscreteOperator::radial(model, radius, m, a, c, 0)?.smallest_eigenpair().map(|p| p.0))
        .collect();
    let v = vals?;
    let (d1, d2) = (v[0] - v[1], v[1] - v[2]);
    let order = (d1 / d2).abs().log2();
    let value = v[2] + (v[2] - v[1]) / lit(3.0);
    let floor = lit::<T>(64.0) * T::epsilon() * T::one().max(value.abs());
    let error_bar = (v[2] - v[1]).abs() / lit(3.0) + floor;
    Ok(([v[0], v[1], v[2]], value, error_bar, order))
}

/// Coefficients `(a, c, normalized, cone)` with `−𝒯 = a(−Δ) + c` on an
/// Einstein space form, sign-normalized so that `a > 0`.
pub fn t_operator_coefficients<T: Scalar>(model: &ModelSpace<T>) -> Result<(T, T, bool, ConeKind)> {
    if !matches!(model.kind, ModelKind::Sphere | ModelKind::Hyperbolic) {
        return Err(Error::WrongBackground(format!("𝒯 degenerates or is not radial on the {} model", model.kind)));
    }
    let n = from_usize::<T>(model.dim());
    let k = model.kappa;
    let four: T = lit(4.0);
    let a = (n - T::one()) * k / four;
    let c = -n * (n - T::one()) * k * k / four;
    if a > T::zero() {
        Ok((a, c, false, ConeKind::Positive))
    } else {
        Ok((-a, -c, true, ConeKind::Negative))
    }
}

/// First Dirichlet eigenvalue of `−𝒯_g` on a geodesic ball of a curved space
/// form, from the radial reduction; on `Γ₂⁻` backgrounds the spectrum of `𝒯`
/// is reported instead (see [`EigenEstimate::sign_normalized`]).
pub fn dirichlet_eigen_tg<T: Scalar>(ball: &GeodesicBall<T>) -> Result<EigenEstimate<T>> {
    dirichlet_eigen_tg_with(ball, DEFAULT_CELLS)
}

pub fn dirichlet_eigen_tg_with<T: Scalar>(ball: &GeodesicBall<T>, cells: usize) -> Result<EigenEstimate<T>> {
    let (a, c, sign_normalized, cone) = t_operator_coefficients(&ball.model)?;
    let (raw, value, error_bar, order) = extrapolated_eigenvalue(&ball.model, ball.radius, cells, a, c)?;
    Ok(EigenEstimate { value, error_bar, order, grids: [cells, 2 * cells, 4 * cells], raw, sign_normalized, cone })
}

/// First Dirichlet eigenvalue of the scalar Laplacian on the ball, used as
/// the computable proxy for the rough-Laplacian `λ₁`.
pub fn rough_laplacian_lambda1<T: Scalar>(ball: &GeodesicBall<T>) -> Result<EigenEstimate<T>> {
    rough_laplacian_lambda1_with(ball, DEFAULT_CELLS)
}

pub fn rough_laplacian_lambda1_with<T: Scalar>(ball: &GeodesicBall<T>, cells: usize) -> Result<EigenEstimate<T>> {
    let (raw, value, error_bar, order) = extrapolated_eigenvalue(&ball.model, ball.radius, cells, T::one(), T::zero())?;
    let cone = match ball.model.kind {
        ModelKind::Sphere => ConeKind::Positive,
        ModelKind::Hyperbolic => ConeKind::Negative,
        _ => ConeKind::Degenerate,
    };
    Ok(EigenEstimate { value, error_bar, order, grids: [cells, 2 * cells, 4 * cells], raw, sign_normalized: false, cone })
}

/// Smallest eigenvalues of the angular modes `ℓ = 0, …, modes−1` of
/// `−𝒯_g` (sign-normalized) on `cells` cells, for checking that the lowest
/// mode is radial.
pub fn angular_spectrum<T: Scalar>(ball: &GeodesicBall<T>, cells: usize, modes: usize) -> Result<Vec<T>> {
    let (a, c, _, _) = t_operator_coefficients(&ball.model)?;
    (0..modes)
        .map(|ell| DiscreteOperator::radial(&ball.model, ball.radius, cells, a, c, ell)?.smallest_eigenpair().map(|p| p.0))
        .collect()
}

/// `λ₁` sweep over radii, solved concurrently.
pub fn lambda_sweep<T: Scalar>(
    model: &ModelSpace<T>,
    radii: &[T],
    cells: usize,
    operator: SweepOperator,
) -> Result<Vec<(T, EigenEstimate<T>)>> {
    radii
        .par_iter()
        .map(|&r| {
            let ball = GeodesicBall::new(model, r, Default::default())?;
            let est = match operator {
                SweepOperator::T => dirichlet_eigen_tg_with(&ball, cells)?,
                SweepOperator::Laplacian => rough_laplacian_lambda1_with(&ball, cells)?,
            };
            Ok((r, est))
        })
        .collect()
}

/// Operator selector for [`lambda_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepOperator {
    T,
    Laplacian,
}

/// `q(λ) = λ² − (4 + 2(n−2)²)λ + 4 + (n−2)²`.
pub fn positivity_quadratic<T: Scalar>(n: usize, lambda: T) -> T {
    let m = from_usize::<T>(n) - lit(2.0);
    let m2 = m * m;
    let four: T = lit(4.0);
    lambda * lambda - (four + m2 + m2) * lambda + four + m2
}

/// Larger root of [`positivity_quadratic`].
pub fn positivity_root<T: Scalar>(n: usize) -> T {
    let m = from_usize::<T>(n) - lit(2.0);
    let m2 = m * m;
    let b = lit::<T>(4.0) + m2 + m2;
    let c = lit::<T>(4.0) + m2;
    (b + (b * b - lit::<T>(4.0) * c).sqrt()) / lit(2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateStatus {
    Certified,
    Failed,
    /// The error bar straddles the larger root.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityCertificate<T> {
    pub status: CertificateStatus,
    /// `λ₁` in units of `|κ|`.
    pub lambda: T,
    pub error_bar: T,
    /// `q(λ₁ − error_bar)`.
    pub q: T,
    pub root: T,
    /// `λ₁ − error_bar − root`.
    pub margin: T,
}

impl<T: Scalar> PositivityCertificate<T> {
    pub fn certified(&self) -> bool {
        self.status == CertificateStatus::Certified
    }
}

/// Certificate `q(λ₁) > 0` with `λ₁` above the larger root, given `λ₁` and its error bar.
pub fn certificate_from_lambda<T: Scalar>(n: usize, lambda: T, error_bar: T) -> PositivityCertificate<T> {
    let root = positivity_root::<T>(n);
    let low = lambda - error_bar;
    let q = positivity_quadratic(n, low);
    let status = if (lambda - root).abs() <= error_bar {
        CertificateStatus::Indeterminate
    } else if low > root && q > T::zero() {
        CertificateStatus::Certified
    } else {
        CertificateStatus::Failed
    };
    PositivityCertificate { status, lambda, error_bar, q, root, margin: low - root }
}

/// Positivity certificate for a ball in `Hⁿ(κ)`; `λ₁` of the scalar Dirichlet
/// Laplacian is measured in units of `|κ|`.
pub fn hyperbolic_positivity_certificate<T: Scalar>(ball: &GeodesicBall<T>) -> Result<PositivityCertificate<T>> {
    if ball.model.kind != ModelKind::Hyperbolic {
        return Err(Error::WrongBackground("the positivity certificate is for hyperbolic balls".into()));
    }
    let est = rough_laplacian_lambda1(ball)?;
    let k = -ball.model.kappa;
    Ok(certificate_from_lambda(ball.dim(), est.value / k, est.error_bar / k))
}

/// Largest radius in `[lo, hi]` whose ball carries a certificate, by bisection
/// (`λ₁` decreases with the radius); `None` if even `lo` fails.
pub fn largest_certified_radius<T: Scalar>(model: &ModelSpace<T>, lo: T, hi: T, cells: usize) -> Result<Option<T>> {
    let ok = |r: T| -> Result<bool> {
        let ball = GeodesicBall::new(model, r, Default::default())?;
        let est = rough_laplacian_lambda1_with(&ball, cells)?;
        let k = -model.kappa;
        Ok(certificate_from_lambda(model.dim(), est.value / k, est.error_bar / k).certified())
    };
    if model.kind != ModelKind::Hyperbolic {
        return Err(Error::WrongBackground("the positivity certificate is for hyperbolic balls".into()));
    }
    if !ok(lo)? {
        return Ok(None);
    }
    if ok(hi)? {
        return Ok(Some(hi));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..40 {
        let mid = (a + b) * lit(0.5);
        if ok(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(a))
}

/// Settings for the constraint solver.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintOptions<T> {
    /// Total degree of the polynomial factor of the basis.
    pub degree: usize,
    /// Bound on `max_j |∫(σ₂ − K)φ_j| / (max(1,|K|)∫|φ_j|)`.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for ConstraintOptions<T> {
    fn default() -> Self {
        ConstraintOptions { degree: 4, tolerance: lit(1e-12), max_iterations: 25 }
    }
}

/// Result of one constraint solve.
#[derive(Clone)]
pub struct ConstraintSolution<T> {
    pub t: T,
    pub coefficients: Vec<T>,
    pub u: ScalarField<T>,
    pub iterations: usize,
    /// Scaled Galerkin residual at exit.
    pub projected_residual: T,
    /// `max |σ₂(e^{2u}(g + th)) − K|` over quadrature nodes.
    pub nodal_residual: T,
    /// `max |u|` over sampled boundary points.
    pub boundary_value: T,
    /// `∫ e^{nu} dv_{g+th}`.
    pub volume: T,
}

impl<T: Scalar> std::fmt::Debug for ConstraintSolution<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSolution")
            .field("t", &self.t)
            .field("iterations", &self.iterations)
            .field("projected_residual", &self.projected_residual)
            .field("nodal_residual", &self.nodal_residual)
            .field("boundary_value", &self.boundary_value)
            .field("volume", &self.volume)
            .finish()
    }
}

/// Galerkin solver for `σ₂(e^{2u}(g₀ + th)) = K`, `u|∂ = 0`, on a geodesic ball.
pub struct ConstraintProjector<T: Scalar> {
    pub ball: GeodesicBall<T>,
    pub h: SymTensorField<T>,
    pub target: T,
    pub eigen: EigenEstimate<T>,
    dom: Domain<T>,
    basis: Vec<ScalarField<T>>,
    partials: Vec<Vec<Partials<T>>>,
    jacobian: (Vec<T>, Vec<usize>),
    scales: Vec<T>,
    density0: Vec<T>,
    boundary: Vec<Vec<T>>,
    opts: ConstraintOptions<T>,
}

struct NodeData<T: Scalar> {
    frame: Frame<T, T>,
    basis: Vec<Local0<T>>,
    /// Quadrature weight times `√det g`.
    density: T,
}

fn combine<T: Scalar>(c: &[T], locals: &[Local0<T>]) -> Local0<T> {
    let mut acc = Local0 { v: T::zero(), d: locals[0].d.scale(T::zero()), dd: locals[0].dd.scale(T::zero()) };
    for (&ck, l) in c.iter().zip(locals) {
        if ck != T::zero() {
            acc.v = acc.v + ck * l.v;
            acc.d = acc.d.add(&l.d.scale(ck));
            acc.dd = acc.dd.add(&l.dd.scale(ck));
        }
    }
    acc
}

/// Monomial exponents in `n` variables of total degree `lo..=hi`.
fn exponents(n: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for d in lo..=hi {
        rec(n, d, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Basis vanishing on the chart sphere `|x| = ρ`: the potential of the ball
/// when it exists, and `(ρ² − |x|²)·m(x/ρ)` for monomials `m`.
fn constraint_basis<T: Scalar>(ball: &GeodesicBall<T>, degree: usize) -> Vec<ScalarField<T>> {
    let chart = ball.model.chart().clone();
    let rho = ball.chart_radius;
    let n = ball.dim();
    let mut basis = Vec::new();
    let lowest = match potential(ball) {
        Ok(f) => {
            basis.push(f);
            1
        }
        Err(_) => 0,
    };
    for e in exponents(n, lowest, degree) {
        let chart = chart.clone();
        basis.push(ScalarField::new(chart, move |x: &[Jet<T>]| {
            let s = x.iter().fold(x[0].zero_like(), |a, xi| a + xi.mul_ref(xi));
            let mut m = s.scale(-T::one() / (rho * rho)).add_scalar(T::one());
            for (xi, &k) in x.iter().zip(&e) {
                for _ in 0..k {
                    m = m.mul_ref(&xi.scale(T::one() / rho));
                }
            }
            m
        }));
    }
    basis
}

impl<T: Scalar> ConstraintProjector<T> {
    /// Prepares the basis and the chord Jacobian `J_jk = −2∫φ_j 𝒯φ_k dv` on
    /// `dom`, which must be the chart ball of `ball` (any radial layering).
    pub fn new(ball: &GeodesicBall<T>, h: &SymTensorField<T>, dom: Domain<T>, target: T, opts: ConstraintOptions<T>) -> Result<Self> {
        let eigen = dirichlet_eigen_tg(ball)?;
        if eigen.sign().is_none() {
            return Err(Error::Certification(format!(
                "λ₁ = {} ± {} of the Dirichlet 𝒯 problem is not certified nonzero",
                eigen.value, eigen.error_bar
            )));
        }
        match &dom.shape {
            Shape::Ball { center, radius }
                if center.iter().all(|c| *c == T::zero())
                    && (*radius - ball.chart_radius).abs() <= lit::<T>(1e-12) * ball.chart_radius => {}
            _ => return Err(Error::Domain { chart: "constraint domain must be the ball itself".into(), point: vec![] }),
        }
        let g0 = &ball.model.metric;
        let basis = constraint_basis(ball, opts.degree);
        let m = basis.len();
        let partials = basis_partials(&basis, &dom);
        let data = node_data(g0, &partials, &dom)?;
        let rows: Vec<Vec<T>> = data
            .par_iter()
            .map(|nd| {
                let tphi: Vec<T> = nd.basis.iter().map(|l| sigma_ops::t_local(&nd.frame, l)).collect();
                let mut row = Vec::with_capacity(m * m + m);
                for j in 0..m {
                    for tk in &tphi {
                        row.push(-lit::<T>(2.0) * nd.density * nd.basis[j].v * *tk);
                    }
                }
                row.extend(nd.basis.iter().map(|l| nd.density * l.v.abs()));
                row
            })
            .collect();
        let sums: Vec<T> = (0..m * m + m).map(|k| pairwise_sum(&rows.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
        let jacobian = lu(&sums[..m * m], m)?;
        let scale = T::one().max(target.abs());
        let scales = sums[m * m..].iter().map(|&s| s * scale).collect();
        let density0 = data.iter().map(|d| d.density).collect();
        let boundary = dom
            .nodes
            .iter()
            .step_by((dom.nodes.len() / 64).max(1))
            .filter(|p| p.iter().any(|x| *x != T::zero()))
            .map(|p| ball.boundary_point(p))
            .collect();
        Ok(ConstraintProjector { ball: ball.clone(), h: h.clone(), target, eigen, dom, basis, partials, jacobian, scales, density0, boundary, opts })
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    fn field(&self, c: &[T]) -> ScalarField<T> {
        let basis = self.basis.clone();
        let c = c.to_vec();
        ScalarField::new(self.ball.model.chart().clone(), move |x| {
            basis.iter().zip(&c).fold(x[0].zero_like(), |acc, (b, &ck)| acc + b.jet(x).scale(ck))
        })
    }

    /// Galerkin moments `∫ r φ_j dv_{g₀}` of nodal values `r`.
    fn moments(&self, data: &[NodeData<T>], r: &[T]) -> Vec<T> {
        (0..self.basis.len())
            .map(|j| {
                let v: Vec<T> = data.iter().zip(r).zip(&self.density0).map(|((nd, &ri), &d)| d * ri * nd.basis[j].v).collect();
                pairwise_sum(&v)
            })
            .collect()
    }

    /// Solves the constraint at parameter `t`.
    pub fn solve(&self, t: T) -> Result<ConstraintSolution<T>> {
        let g0 = &self.ball.model.metric;
        let gt = g0.perturbed(&self.h, t);
        let data = node_data(&gt, &self.partials, &self.dom)?;
        let m = self.basis.len();
        let mut c = vec![T::zero(); m];
        let residuals = |c: &[T]| -> Vec<T> {
            data.par_iter()
                .map(|nd| sigma_ops::conformal_sigma2_local(&nd.frame, &combine(c, &nd.basis)).value - self.target)
                .collect()
        };
        let mut r = residuals(&c);
        let mut iterations = 0;
        loop {
            let f = self.moments(&data, &r);
            let projected = f.iter().zip(&self.scales).fold(T::zero(), |a, (&fj, &s)| a.max(fj.abs() / s));
            if projected <= self.opts.tolerance {
                let n = from_usize::<T>(self.ball.dim());
                let vols: Vec<T> = data
                    .iter()
                    .map(|nd| nd.density * (n * combine(&c, &nd.basis).v).exp())
                    .collect();
                let u = self.field(&c);
                let boundary_value = self.boundary.iter().fold(T::zero(), |a, p| a.max(u.value(p).abs()));
                let nodal_residual = r.iter().fold(T::zero(), |a, x| a.max(x.abs()));
                return Ok(ConstraintSolution {
                    t,
                    coefficients: c,
                    u,
                    iterations,
                    projected_residual: projected,
                    nodal_residual,
                    boundary_value,
                    volume: pairwise_sum(&vols),
                });
            }
            if iterations == self.opts.max_iterations || !projected.is_finite() {
                return Err(Error::StepTooLarge { t: t.to_f64().unwrap_or(f64::NAN) });
            }
            let dc = lu_solve(&self.jacobian, m, &f);
            c.iter_mut().zip(&dc).for_each(|(ci, d)| *ci = *ci - *d);
            r = residuals(&c);
            iterations += 1;
        }
    }

    /// Coefficients of the Galerkin solution of `𝒯u′ = ½Λ_{g₀}(h)`, `u′|∂ = 0`.
    pub fn linearized(&self) -> Result<Vec<T>> {
        let g0 = &self.ball.model.metric;
        let data = node_data(g0, &self.partials, &self.dom)?;
        let lam: Result<Vec<T>> = self.dom.nodes.par_iter().map(|p| sigma_ops::lambda_lin(g0, &self.h, p)).collect();
        let f = self.moments(&data, &lam?);
        Ok(lu_solve(&self.jacobian, self.basis.len(), &f).into_iter().map(|x| -x).collect())
    }

    /// Field with the given basis coefficients.
    pub fn field_from(&self, c: &[T]) -> ScalarField<T> {
        self.field(c)
    }
}

/// Partial derivatives `φ, ∂φ, ∂²φ` of one basis function at one node.
struct Partials<T> {
    v: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

fn basis_partials<T: Scalar>(basis: &[ScalarField<T>], dom: &Domain<T>) -> Vec<Vec<Partials<T>>> {
    let n = dom.dim();
    dom.nodes
        .par_iter()
        .map(|p| {
            let x = Jet::seed(p, 2);
            basis
                .iter()
                .map(|b| {
                    let j = b.jet(&x);
                    let mut alpha = vec![0u8; n];
                    let v = j.value();
                    let grad = (0..n).map(|i| j.d1(i)).collect();
                    let mut hess = vec![T::zero(); n * n];
                    for a in 0..n {
                        for c in 0..n {
                            alpha[a] += 1;
                            alpha[c] += 1;
                            hess[a * n + c] = j.partial(&alpha).unwrap_or_else(T::zero);
                            alpha[a] -= 1;
                            alpha[c] -= 1;
                        }
                    }
                    Partials { v, grad, hess }
                })
                .collect()
        })
        .collect()
}

/// `u, ∇u, ∇²u` from coordinate partials and Christoffel symbols `Γ^m_ac`.
fn covariant_local<T: Scalar>(p: &Partials<T>, gamma: &Tensor<T>) -> Local0<T> {
    let n = p.grad.len();
    let d = Tensor::from_fn(n, 1, |ix| p.grad[ix[0]]);
    let dd = Tensor::from_fn(n, 2, |ix| {
        let (a, c) = (ix[0], ix[1]);
        (0..n).fold(p.hess[a * n + c], |acc, m| acc - *gamma.at3(m, a, c) * p.grad[m])
    });
    Local0 { v: p.v, d, dd }
}

fn node_data<T: Scalar>(g: &MetricField<T>, partials: &[Vec<Partials<T>>], dom: &Domain<T>) -> Result<Vec<NodeData<T>>> {
    dom.nodes
        .par_iter()
        .zip(dom.weights.par_iter())
        .zip(partials.par_iter())
        .map(|((p, &w), parts)| {
            let geo = Geometry::at(g, p, 2)?;
            let gamma = geo.gamma.values();
            let basis = parts.iter().map(|q| covariant_local(q, &gamma)).collect();
            Ok(NodeData { frame: geo.frame(), basis, density: w * volume_density(g, p) })
        })
        .collect()
}

/// Second derivative at `t = 0` of the volume along the σ₂-constrained path
/// `e^{2u(t)}(g₀ + th)` with fixed boundary metric.
pub fn constrained_volume_oracle<T: Scalar>(proj: &ConstraintProjector<T>, opts: OracleOptions<T>) -> Result<OracleEstimate<T>> {
    derivative_oracle(|t| Ok(proj.solve(t)?.volume), 2, opts)
}

/// One-shot constraint solve; see [`ConstraintProjector`].
pub fn constraint_projection<T: Scalar>(
    ball: &GeodesicBall<T>,
    h: &SymTensorField<T>,
    t: T,
    target: T,
    dom: Domain<T>,
) -> Result<ConstraintSolution<T>> {
    ConstraintProjector::new(ball, h, dom, target, ConstraintOptions::default())?.solve(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BallRule;
    use crate::models::make_model;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn ball(kind: ModelKind, kappa: f64, n: usize, r: f64) -> GeodesicBall<f64> {
        let m = make_model(kind, kappa, n).unwrap();
        GeodesicBall::new(&m, r, BallRule::new(4, 4, 8)).unwrap()
    }

    #[test]
    fn flat_unit_ball_laplacian_is_pi_squared() {
        let b = ball(ModelKind::Flat, 0.0, 3, 1.0);
        let e = rough_laplacian_lambda1_with(&b, 128).unwrap();
        assert!((e.value - PI * PI).abs() < 1e-7, "{e:?}");
        assert!(e.order > 1.9);
    }

    #[test]
    fn flat_scaling_law() {
        let a = rough_laplacian_lambda1_with(&ball(ModelKind::Flat, 0.0, 4, 0.5), 128).unwrap();
        let b = rough_laplacian_lambda1_with(&ball(ModelKind::Flat, 0.0, 4, 1.0), 128).unwrap();
        assert!((a.value / b.value - 4.0).abs() < 1e-8);
    }

    #[test]
    fn hemisphere_zero_mode() {
        let b = ball(ModelKind::Sphere, 1.0, 3, FRAC_PI_2);
        let e = dirichlet_eigen_tg(&b).unwrap();
        assert!(e.value.abs() < 1e-6, "{e:?}");
        assert!(e.order > 1.9);
        assert_eq!(e.sign(), None);
        for (k, &v) in e.raw.iter().enumerate() {
            let n = e.grids[k] as f64;
            assert!(v.abs() * n * n < 10.0, "{v} at {n}");
        }
    }

    #[test]
    fn caps_are_certified_positive_and_monotone() {
        let vals: Vec<f64> = [FRAC_PI_3, FRAC_PI_4, FRAC_PI_6]
            .iter()
            .map(|&r| {
                let e = dirichlet_eigen_tg(&ball(ModelKind::Sphere, 1.0, 3, r)).unwrap();
                assert!(e.certified_positive(), "{e:?}");
                assert!(e.order > 1.9);
                e.value
            })
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
    }

    #[test]
    fn operator_is_weighted_symmetric() {
        let m = make_model(ModelKind::Hyperbolic, -1.0, 4).unwrap();
        for ell in 0..3 {
            let op = DiscreteOperator::radial(&m, 1.2, 200, 0.75, 3.0, ell).unwrap();
            assert!(op.self_adjointness_defect() < 1e-13);
        }
    }

    #[test]
    fn eigenvector_satisfies_discrete_equation() {
        let m = make_model::<f64>(ModelKind::Sphere, 1.0, 3).unwrap();
        let op = DiscreteOperator::radial(&m, 1.0, 100, 0.5, -1.5, 0).unwrap();
        let (lam, u) = op.smallest_eigenpair().unwrap();
        let mu = op.apply(&u);
        let res = mu.iter().zip(&u).fold(0.0f64, |a, (x, y)| a.max((x - lam * y).abs()));
        assert!(res < 1e-7 * lam.abs().max(1.0), "{res}");
    }

    #[test]
    fn lowest_mode_is_radial() {
        for b in [ball(ModelKind::Sphere, 1.0, 3, FRAC_PI_3), ball(ModelKind::Hyperbolic, -1.0, 4, 1.0)] {
            let s = angular_spectrum(&b, 64, 3).unwrap();
            assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
        }
    }

    #[test]
    fn hyperbolic_operator_is_sign_normalized() {
        let e = dirichlet_eigen_tg(&ball(ModelKind::Hyperbolic, -1.0, 3, 1.0)).unwrap();
        assert!(e.sign_normalized);
        assert_eq!(e.cone, ConeKind::Negative);
        assert!(e.certified_positive());
        let flat = make_model::<f64>(ModelKind::Flat, 0.0, 3).unwrap();
        assert!(t_operator_coefficients(&flat).is_err());
    }

    #[test]
    fn quadratic_roots_in_three_dimensions() {
        assert_eq!(positivity_quadratic(3, 1.0), 0.0);
        assert_eq!(positivity_quadratic(3, 5.0), 0.0);
        assert_eq!(positivity_root::<f64>(3), 5.0);
        let c = certificate_from_lambda(3, 5.0, 0.0);
        assert_eq!(c.status, CertificateStatus::Indeterminate);
        assert_eq!(certificate_from_lambda(3, 5.5, 0.1).status, CertificateStatus::Certified);
        assert_eq!(certificate_from_lambda(3, 5.05, 0.1).status, CertificateStatus::Indeterminate);
        assert_eq!(certificate_from_lambda(3, 3.0, 0.1).status, CertificateStatus::Failed);
    }

    #[test]
    fn small_hyperbolic_ball_is_certified() {
        let b = ball(ModelKind::Hyperbolic, -1.0, 3, 0.3);
        let e = rough_laplacian_lambda1(&b).unwrap();
        assert!(e.value - e.error_bar > 5.0);
        assert!(hyperbolic_positivity_certificate(&b).unwrap().certified());
        let m = make_model(ModelKind::Hyperbolic, -1.0, 3).unwrap();
        let r = largest_certified_radius(&m, 0.1, 5.0, 128).unwrap().unwrap();
        assert!(r > 0.3 && r < 5.0);
    }

    #[test]
    fn exponent_enumeration() {
        assert_eq!(exponents(3, 0, 2).len(), 10);
        assert_eq!(exponents(3, 1, 4).len(), 34);
        assert!(exponents(2, 2, 2).iter().all(|e| e.iter().sum::<usize>() == 2));
    }

    fn cap_setup(seed: u64) -> (GeodesicBall<f64>, SymTensorField<f64>, Domain<f64>) {
        let m = make_model(ModelKind::Sphere, 1.0, 3).unwrap();
        let b = GeodesicBall::new(&m, FRAC_PI_4, BallRule::new(12, 10, 20)).unwrap();
        let s = crate::field::Support { center: vec![0.0; 3], radius: 0.3 };
        let h = crate::models::tt_bump(&m, &s, seed).unwrap();
        let dom = Domain::ball_layers(vec![0.0; 3], &[0.3, b.chart_radius], BallRule::new(12, 10, 20));
        let size = dom.nodes.iter().fold(0.0f64, |a, p| a.max(h.value(p).max_abs()));
        (b, h.scaled(1.0 / size), dom)
    }

    #[test]
    fn trivial_constraint_solutions_vanish() {
        let (b, h, dom) = cap_setup(3);
        let k = 0.75;
        let proj = ConstraintProjector::new(&b, &h, dom.clone(), k, ConstraintOptions::default()).unwrap();
        let s0 = proj.solve(0.0).unwrap();
        assert!(s0.coefficients.iter().all(|c| c.abs() < 1e-14));
        let zero = SymTensorField::zero(b.model.chart().clone());
        let s = constraint_projection(&b, &zero, 0.01, k, dom).unwrap();
        assert!(s.coefficients.iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn projection_of_tt_bump() {
        let (b, h, dom) = cap_setup(3);
        let proj = ConstraintProjector::new(&b, &h, dom, 0.75, ConstraintOptions::default()).unwrap();
        let s = proj.solve(1e-3).unwrap();
        assert!(s.projected_residual < 1e-8);
        assert!(s.boundary_value < 1e-12);
        let c = |t: f64| proj.solve(t).unwrap().coefficients;
        let (p1, m1, p2, m2) = (s.coefficients.clone(), c(-1e-3), c(2e-3), c(-2e-3));
        let du = (0..p1.len()).fold(0.0f64, |a, k| a.max(((8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / 12e-3).abs()));
        let lin = proj.linearized().unwrap();
        assert!(lin.iter().all(|c| c.abs() < 1e-10), "{lin:?}");
        assert!(du < 1e-6, "{du}");
    }

    #[test]
    fn constrained_volume_matches_analytic() {
        let (b, h, dom) = cap_setup(3);
        let f = potential(&b).unwrap();
        let analytic = crate::variations::volume_second_variation_tt(&b, &f, &h, &dom).unwrap();
        let proj = ConstraintProjector::new(&b, &h, dom, 0.75, ConstraintOptions::default()).unwrap();
        let opts = OracleOptions { step: 4e-3, floor: 5e-4, max_relative_error: 1e-3 };
        let o = constrained_volume_oracle(&proj, opts).unwrap();
        assert!(crate::variations::relative_residual(analytic, o.value) < 1e-3);
    }
}
