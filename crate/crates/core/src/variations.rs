//! First and second variations of σ₂, the scalar curvature, and the
//! functionals built from them, with a finite-difference oracle along
//! explicit metric paths.
//!
//! Pointwise formulas take the background metric `g`, the first variation
//! `h = g′(0)` and the second variation `h′ = g″(0)`. Integrated formulas take
//! a [`Domain`]; for compactly supported directions on a closed model the
//! domain is the support ball and the closed-manifold quantities (total volume,
//! constant σ₂) are supplied separately.

use crate::algebra::{Frame, Local0, Local2};
use crate::chartcalc::Geometry;
use crate::domain::{volume_density, Domain};
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::models::{GeodesicBall, ModelKind, ModelSpace};
use crate::scalar::{from_usize, lit, Scalar};
use crate::sigma_ops;
use crate::tensor::Tensor;
use rayon::prelude::*;
use std::sync::Arc;

type PathFn<T> = dyn Fn(T) -> Result<MetricField<T>> + Send + Sync;

#[derive(Clone)]
enum PathKind<T> {
    Linear,
    Conformal(ScalarField<T>),
    Custom(Arc<PathFn<T>>),
}

/// A one-parameter family of metrics `g(t)` with `g(0) = base`,
/// `g′(0) = direction`, `g″(0) = second`.
#[derive(Clone)]
pub struct VariationPath<T> {
    pub base: MetricField<T>,
    pub direction: SymTensorField<T>,
    pub second: SymTensorField<T>,
    kind: PathKind<T>,
}

impl<T: Scalar> VariationPath<T> {
    /// `g + t h + (t²/2) h′`.
    pub fn linear(base: &MetricField<T>, h: &SymTensorField<T>, h2: Option<&SymTensorField<T>>) -> Self {
        let second = h2.cloned().unwrap_or_else(|| SymTensorField::zero(base.chart.clone()));
        VariationPath { base: base.clone(), direction: h.clone(), second, kind: PathKind::Linear }
    }

    /// `e^{2tu} g`, with `h = 2u g` and `h′ = 4u² g`.
    pub fn conformal(base: &MetricField<T>, u: &ScalarField<T>) -> Self {
        let direction = SymTensorField::conformal(&u.scaled(lit(2.0)), base);
        let u2 = u.clone();
        let sq = ScalarField::new(base.chart.clone(), move |x| {
            let j = u2.jet(x);
            j.mul_ref(&j).scale(lit(4.0))
        });
        let second = SymTensorField::conformal(&sq, base);
        VariationPath { base: base.clone(), direction, second, kind: PathKind::Conformal(u.clone()) }
    }

    /// Arbitrary path; `h` and `h′` are the caller's claim about its derivatives.
    pub fn custom(
        base: &MetricField<T>,
        h: &SymTensorField<T>,
        h2: &SymTensorField<T>,
        f: impl Fn(T) -> Result<MetricField<T>> + Send + Sync + 'static,
    ) -> Self {
        VariationPath { base: base.clone(), direction: h.clone(), second: h2.clone(), kind: PathKind::Custom(Arc::new(f)) }
    }

    pub fn metric_at(&self, t: T) -> Result<MetricField<T>> {
        if t == T::zero() {
            return Ok(self.base.clone());
        }
        match &self.kind {
            PathKind::Linear => {
                Ok(self.base.perturbed(&self.direction, t).perturbed(&self.second, t * t * lit(0.5)))
            }
            PathKind::Conformal(u) => Ok(self.base.conformal(&u.scaled(t))),
            PathKind::Custom(f) => f(t),
        }
    }
}

/// Result of the finite-difference oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate<T> {
    pub value: T,
    /// Richardson error estimate.
    pub error: T,
    /// Base step of the accepted stencil.
    pub step: T,
}

/// Settings for [`derivative_oracle`].
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions<T> {
    pub step: T,
    pub floor: T,
    /// Relative error estimate above which the oracle reports failure.
    pub max_relative_error: T,
}

impl<T: Scalar> Default for OracleOptions<T> {
    fn default() -> Self {
        OracleOptions { step: lit(1e-3), floor: lit(1e-6), max_relative_error: lit(1e-3) }
    }
}

fn stencil<T: Scalar>(f: &[T; 5], h: T, order: usize) -> T {
    // f at −2h, −h, 0, h, 2h
    let twelve: T = lit(12.0);
    match order {
        1 => (f[0] - f[4] + lit::<T>(8.0) * (f[3] - f[1])) / (twelve * h),
        _ => (-f[0] - f[4] + lit::<T>(16.0) * (f[1] + f[3]) - lit::<T>(30.0) * f[2]) / (twelve * h * h),
    }
}

/// Derivative of order 1 or 2 at `t = 0` of a scalar function of `t`.
///
/// Five-point central differences at steps `ε` and `ε/2` combined by one
/// Richardson step; `ε` is halved while the error estimate keeps improving.
pub fn derivative_oracle<T: Scalar>(
    f: impl Fn(T) -> Result<T> + Sync,
    order: usize,
    opts: OracleOptions<T>,
) -> Result<OracleEstimate<T>> {
    if order != 1 && order != 2 {
        return Err(Error::OracleFailure(format!("derivative order {order}")));
    }
    let half: T = lit(0.5);
    let fifteen: T = lit(15.0);
    let eval = |h: T| -> Result<[T; 5]> {
        let ts = [-h - h, -h, T::zero(), h, h + h];
        let v: Result<Vec<T>> = ts.par_iter().map(|&t| f(t)).collect();
        let v = v?;
        Ok([v[0], v[1], v[2], v[3], v[4]])
    };
    let mut h = opts.step;
    let mut coarse = stencil(&eval(h)?, h, order);
    let mut best: Option<OracleEstimate<T>> = None;
    loop {
        let fine = stencil(&eval(h * half)?, h * half, order);
        let value = fine + (fine - coarse) / fifteen;
        let error = (fine - coarse).abs() / fifteen;
        let est = OracleEstimate { value, error, step: h };
        let improved = best.map_or(true, |b| error < b.error);
        if improved {
            best = Some(est);
        }
        if !improved || h * half < opts.floor || error <= T::epsilon() * (T::one() + value.abs()) {
            break;
        }
        h = h * half;
        coarse = fine;
    }
    let best = best.expect("at least one level evaluated");
    if !best.value.is_finite() || best.error > opts.max_relative_error * T::one().max(best.value.abs()) {
        return Err(Error::OracleFailure(format!("error estimate {} for value {}", best.error, best.value)));
    }
    Ok(best)
}

/// Derivative of `F(g(t))` at `t = 0` along `path`.
pub fn path_derivative_oracle<T: Scalar>(
    functional: impl Fn(&MetricField<T>) -> Result<T> + Sync,
    path: &VariationPath<T>,
    order: usize,
    opts: OracleOptions<T>,
) -> Result<OracleEstimate<T>> {
    derivative_oracle(|t| functional(&path.metric_at(t)?), order, opts)
}

/// Default oracle step `1e−3(1 + ‖g‖∞)` at a point.
pub fn default_step<T: Scalar>(g: &MetricField<T>, p: &[T]) -> T {
    lit::<T>(1e-3) * (T::one() + g.value(p).max_abs())
}

/// `|analytic − oracle| / max(1, |oracle|)`.
pub fn relative_residual<T: Scalar>(analytic: T, oracle: T) -> T {
    (analytic - oracle).abs() / T::one().max(oracle.abs())
}

/// A functional value with analytic and oracle variations.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalReport<T> {
    pub value: T,
    pub first_variation: T,
    pub second_variation: T,
    pub oracle_first: T,
    pub oracle_second: T,
    /// Relative residuals of the first and second variation.
    pub residuals: [T; 2],
}

impl<T: Scalar> FunctionalReport<T> {
    pub fn new(value: T, first: T, second: T, oracle_first: T, oracle_second: T) -> Self {
        FunctionalReport {
            value,
            first_variation: first,
            second_variation: second,
            oracle_first,
            oracle_second,
            residuals: [relative_residual(first, oracle_first), relative_residual(second, oracle_second)],
        }
    }
}

/// Pointwise derivatives of `h` shared by the second-variation formulas.
struct Pieces<T: Scalar> {
    fr: Frame<T, T>,
    h: Local2<T>,
    n: usize,
    /// `h^{ij}`.
    hr: Tensor<T>,
    tr: T,
    lap: Tensor<T>,
    grad_tr: Tensor<T>,
    hess_tr: Tensor<T>,
    lap_tr: T,
    delta: Tensor<T>,
    grad_delta: Tensor<T>,
    dsd: Tensor<T>,
    delta2: T,
    /// `δh + ½∇tr h`.
    omega: Tensor<T>,
    ring: Tensor<T>,
}

impl<T: Scalar> Pieces<T> {
    fn new(fr: Frame<T, T>, h: Local2<T>) -> Self {
        let n = fr.n;
        let half: T = lit(0.5);
        let delta = h.delta(&fr);
        let grad_tr = h.grad_tr(&fr);
        let omega = delta.add(&grad_tr.scale(half));
        Pieces {
            hr: fr.raise2(&h.v),
            tr: h.tr(&fr),
            lap: h.lap(&fr),
            hess_tr: h.hess_tr(&fr),
            lap_tr: h.lap_tr(&fr),
            grad_delta: h.grad_delta(&fr),
            dsd: h.delta_star_delta(&fr),
            delta2: h.delta2(&fr),
            ring: fr.ring(&h.v),
            delta,
            grad_tr,
            omega,
            n,
            fr,
            h,
        }
    }

    fn gi(&self, i: usize, j: usize) -> T {
        *self.fr.gi.at2(i, j)
    }

    fn d(&self, a: usize, i: usize, j: usize) -> T {
        *self.h.d.at3(a, i, j)
    }

    fn dd(&self, a: usize, b: usize, i: usize, j: usize) -> T {
        *self.h.dd.at4(a, b, i, j)
    }

    fn norm2(&self) -> T {
        self.fr.inner2(&self.h.v, &self.h.v)
    }

    fn grad_norm2(&self) -> T {
        self.h.grad_norm2(&self.fr)
    }

    /// `Δ|h|² = 2⟨Δh, h⟩ + 2|∇h|²`.
    fn lap_norm2(&self) -> T {
        let two: T = lit(2.0);
        two * self.fr.inner2(&self.lap, &self.h.v) + two * self.grad_norm2()
    }

    /// `g^{pq} g^{ij} g^{st} ∇_p h_is ∇_t h_jq`.
    fn cross(&self) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for p in 0..n {
            for q in 0..n {
                let gpq = self.gi(p, q);
                if gpq == T::zero() {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        let gij = self.gi(i, j);
                        if gij == T::zero() {
                            continue;
                        }
                        for s in 0..n {
                            for t in 0..n {
                                acc = acc + gpq * gij * self.gi(s, t) * self.d(p, i, s) * self.d(t, j, q);
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    fn omega_norm2(&self) -> T {
        self.fr.inner1(&self.omega, &self.omega)
    }

    /// `∇_j (h∘ω)_i` with `(h∘ω)_i = h_ik ω^k`, as a tensor indexed `[i, j]`.
    fn grad_h_omega(&self) -> Tensor<T> {
        let n = self.n;
        let half: T = lit(0.5);
        let om_up: Vec<T> = (0..n).map(|k| (0..n).fold(T::zero(), |a, l| a + self.gi(k, l) * self.omega.data[l])).collect();
        // ∇_j ω_l
        let dom = Tensor::from_fn(n, 2, |ix| *self.grad_delta.at2(ix[0], ix[1]) + half * *self.hess_tr.at2(ix[0], ix[1]));
        Tensor::from_fn(n, 2, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = T::zero();
            for k in 0..n {
                acc = acc + self.d(j, i, k) * om_up[k];
                for l in 0..n {
                    acc = acc + *self.h.v.at2(i, k) * self.gi(k, l) * *dom.at2(j, l);
                }
            }
            acc
        })
    }

    /// Scalar `δ(h∘ω) = −g^{ij}∇_j(h∘ω)_i`.
    fn delta_h_omega(&self) -> T {
        -self.fr.trace(&self.grad_h_omega())
    }

    /// `Δ tr h − δ²h + ⟨Ric, h⟩`.
    fn scalar_block(&self) -> T {
        self.lap_tr - self.delta2 + self.fr.inner2(&self.fr.ric, &self.h.v)
    }

    /// The second-order part of `R″(0)` (everything except `DR_g(h′)`).
    fn scalar_quadratic(&self) -> T {
        let two: T = lit(2.0);
        let half: T = lit(0.5);
        let four: T = lit(4.0);
        self.lap_norm2() + two * self.fr.inner2(&self.h.v, &self.hess_tr)
            + four * self.fr.inner2(&self.grad_delta, &self.h.v)
            - two * self.omega_norm2()
            - half * self.grad_norm2()
            + two * self.fr.inner2(&self.ring, &self.h.v)
            - self.cross()
    }
}

fn pieces<T: Scalar>(g: &MetricField<T>, h: &SymTensorField<T>, p: &[T]) -> Result<Pieces<T>> {
    let geo = Geometry::at(g, p, 2)?;
    let fr = geo.frame();
    let l = geo.local2(h)?;
    Ok(Pieces::new(fr, l))
}

fn second_local<T: Scalar>(g: &MetricField<T>, h2: &SymTensorField<T>, p: &[T]) -> Result<(Frame<T, T>, Local2<T>)> {
    let geo = Geometry::at(g, p, 2)?;
    Ok((geo.frame(), geo.local2(h2)?))
}

/// `DR_g(h) = −Δ tr h + δ²h − ⟨h, Ric⟩`.
pub fn scalar_linearization<T: Scalar>(g: &MetricField<T>, h: &SymTensorField<T>, p: &[T]) -> Result<T> {
    let pc = pieces(g, h, p)?;
    Ok(-pc.scalar_block())
}

/// `R″(0)` along a path with `g′(0) = h`, `g″(0) = h′`.
pub fn scalar_second_variation<T: Scalar>(
    g: &MetricField<T>,
    h: &SymTensorField<T>,
    h2: &SymTensorField<T>,
    p: &[T],
) -> Result<T> {
    let pc = pieces(g, h, p)?;
    Ok(pc.scalar_quadratic() + scalar_linearization(g, h2, p)?)
}

/// The term groups of `c_n σ₂″(0)`, each already multiplied out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sigma2SecondGroups<T> {
    /// `−½|Δ_E h − ∇²tr h − 2δ*δh|²`.
    pub squared: T,
    /// `⟨Ric∘h, 2Δ_E h − ∇²tr h − 2δ*δh − Ric∘h⟩`.
    pub ricci_pairing: T,
    /// `−⟨Ric, X⟩` with the long coordinate block `X`.
    pub coordinate: T,
    /// `n/(2(n−1))((Δtr h − δ²h + ⟨Ric,h⟩)² + R·(…))`.
    pub scalar: T,
    /// `c_n Λ_g(h′)`.
    pub second_order: T,
    /// `c_n = 2(n−2)²`.
    pub c_n: T,
}

impl<T: Scalar> Sigma2SecondGroups<T> {
    pub fn total(&self) -> T {
        (self.squared + self.ricci_pairing + self.coordinate + self.scalar + self.second_order) / self.c_n
    }
}

/// The coordinate block `X_ij` paired against `Ric` in the σ₂″ formula:
/// `2ω^l S_lij − 2h^{ml}∇_m S_lij + ∇_i∇_j|h|² − g^{ml}g^{pq}S_lip S_qmj
/// + h∘(∇²tr h + 2δ*δh) − h∘Ric∘h`, with `S_lij = ∇_i h_lj + ∇_j h_il − ∇_l h_ij`
/// and `ω = δh + ½∇tr h`.
fn coordinate_block<T: Scalar>(pc: &Pieces<T>) -> Tensor<T> {
    let n = pc.n;
    let two: T = lit(2.0);
    let fr = &pc.fr;
    let s = |l: usize, i: usize, j: usize| pc.d(i, l, j) + pc.d(j, i, l) - pc.d(l, i, j);
    let ds = |m: usize, l: usize, i: usize, j: usize| pc.dd(m, i, l, j) + pc.dd(m, j, i, l) - pc.dd(m, l, i, j);
    let om_up: Vec<T> = (0..n).map(|k| (0..n).fold(T::zero(), |a, l| a + pc.gi(k, l) * pc.omega.data[l])).collect();
    let h_rhs = fr.compose(&pc.h.v, &pc.hess_tr.add(&pc.dsd.scale(two)));
    let hrh = fr.compose(&fr.compose(&pc.h.v, &fr.ric), &pc.h.v);
    Tensor::from_fn(n, 2, |ix| {
        let (i, j) = (ix[0], ix[1]);
        let mut x = T::zero();
        for l in 0..n {
            x = x + two * om_up[l] * s(l, i, j);
            for m in 0..n {
                let hml = *pc.hr.at2(m, l);
                if hml != T::zero() {
                    x = x - two * hml * ds(m, l, i, j);
                }
                let gml = pc.gi(m, l);
                if gml == T::zero() {
                    continue;
                }
                for p in 0..n {
                    for q in 0..n {
                        x = x - gml * pc.gi(p, q) * s(l, i, p) * s(q, m, j);
                    }
                }
            }
        }
        x = x + two * fr.inner2(&pc.h.dd_slice(i, j), &pc.h.v) + two * fr.inner2(&pc.h.d_slice(i), &pc.h.d_slice(j));
        x + half_sym(&h_rhs, i, j) - *hrh.at2(i, j)
    })
}

fn half_sym<T: Scalar>(t: &Tensor<T>, i: usize, j: usize) -> T {
    (*t.at2(i, j) + *t.at2(j, i)) * lit(0.5)
}

fn sigma2_second_groups_from<T: Scalar>(pc: &Pieces<T>, lambda_h2_scaled: T) -> Sigma2SecondGroups<T> {
    let fr = &pc.fr;
    let n = fr.dim();
    let one = T::one();
    let two: T = lit(2.0);
    let half: T = lit(0.5);
    let de = pc.h.einstein(fr);
    let dsd2 = pc.dsd.scale(two);
    let q = de.sub(&pc.hess_tr).sub(&dsd2);
    let roh = fr.compose(&fr.ric, &pc.h.v);
    let pair = de.scale(two).sub(&pc.hess_tr).sub(&dsd2).sub(&roh);
    let x = coordinate_block(pc);
    let sb = pc.scalar_block();
    Sigma2SecondGroups {
        squared: -half * fr.inner2(&q, &q),
        ricci_pairing: fr.inner2(&roh, &pair),
        coordinate: -fr.inner2(&fr.ric, &x),
        scalar: n / (two * (n - one)) * (sb * sb + fr.scal * pc.scalar_quadratic()),
        second_order: lambda_h2_scaled,
        c_n: fr.c_n(),
    }
}

/// Term groups of `c_n σ₂″(0)`.
pub fn sigma2_second_variation_groups<T: Scalar>(
    g: &MetricField<T>,
    h: &SymTensorField<T>,
    h2: &SymTensorField<T>,
    p: &[T],
) -> Result<Sigma2SecondGroups<T>> {
    let pc = pieces(g, h, p)?;
    let (fr2, l2) = second_local(g, h2, p)?;
    let lam = sigma_ops::lambda_scaled_local(&fr2, &l2);
    Ok(sigma2_second_groups_from(&pc, lam))
}

/// `σ₂″(0)` along a path with `g′(0) = h`, `g″(0) = h′`, on any background.
pub fn sigma2_second_variation<T: Scalar>(
    g: &MetricField<T>,
    h: &SymTensorField<T>,
    h2: &SymTensorField<T>,
    p: &[T],
) -> Result<T> {
    Ok(sigma2_second_variation_groups(g, h, h2, p)?.total())
}

/// `Δh + ∇²tr h + 2δ*δh + 2κ((tr h)g − h)`.
fn space_form_block<T: Scalar>(pc: &Pieces<T>, kappa: T) -> Tensor<T> {
    let two: T = lit(2.0);
    pc.lap
        .add(&pc.hess_tr)
        .add(&pc.dsd.scale(two))
        .add(&pc.fr.g.scale(two * kappa * pc.tr).sub(&pc.h.v.scale(two * kappa)))
}

/// The quadratic form `I(h)` of the constant-curvature second variation,
/// `σ₂″(0) = Λ_g(h′) + I/(2(n−2)²)`.
fn cc_quadratic<T: Scalar>(pc: &Pieces<T>, kappa: T) -> T {
    let fr = &pc.fr;
    let n = fr.dim();
    let one = T::one();
    let two: T = lit(2.0);
    let half: T = lit(0.5);
    let three: T = lit(3.0);
    let n2 = (n - two) * (n - two);
    let a = space_form_block(pc, kappa);
    let sb = pc.lap_tr - pc.delta2 + kappa * (n - one) * pc.tr;
    let hx = pc.hess_tr.add(&pc.dsd.scale(two)).scale(n * n - three * n + three);
    let grad_tr_half = pc.grad_tr.scale(half);
    -half * fr.inner2(&a, &a)
        + n2 * kappa * kappa * (pc.tr * pc.tr - pc.norm2())
        + n2 * half * kappa * (pc.lap_norm2() - pc.cross())
        + n / (two * (n - one)) * sb * sb
        + kappa * fr.inner2(&pc.h.v, &hx)
        - (n * n - two * n + two) * kappa * pc.omega_norm2()
        + two * (n - one) * kappa * (pc.delta_h_omega() + fr.inner1(&pc.omega, &grad_tr_half))
        - n2 / lit(4.0) * kappa * pc.grad_norm2()
}

/// Largest deviation of `R_ijkl` from `κ(g_il g_jk − g_ik g_jl)` at `p`.
fn cc_defect<T: Scalar>(fr: &Frame<T, T>, kappa: T) -> T {
    let n = fr.n;
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let model = kappa * (*fr.g.at2(i, l) * *fr.g.at2(j, k) - *fr.g.at2(i, k) * *fr.g.at2(j, l));
                    worst = worst.max((*fr.riem.at4(i, j, k, l) - model).abs());
                }
            }
        }
    }
    worst
}

/// `σ₂″(0)` on a background of constant sectional curvature `κ`.
pub fn sigma2_second_variation_cc<T: Scalar>(
    g: &MetricField<T>,
    kappa: T,
    h: &SymTensorField<T>,
    h2: &SymTensorField<T>,
    p: &[T],
) -> Result<T> {
    let pc = pieces(g, h, p)?;
    let defect = cc_defect(&pc.fr, kappa);
    let scale = T::one() + kappa.abs() * pc.fr.g.max_abs() * pc.fr.g.max_abs();
    if defect > lit::<T>(1e-9) * scale {
        return Err(Error::WrongBackground(format!("curvature deviates from κ = {kappa} by {defect}")));
    }
    let c = pc.fr.c_n();
    Ok(sigma_ops::lambda_lin(g, h2, p)? + cc_quadratic(&pc, kappa) / c)
}

/// `∫ σ₂(g) dv_g` over `dom`.
pub fn functional_f2<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>) -> Result<T> {
    dom.integrate(g, |p| sigma_ops::sigma2(g, p))
}

/// `V^{(4−n)/n} ∫ σ₂ dv_g` over `dom`.
pub fn functional_fhat2<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>) -> Result<T> {
    let n = from_usize::<T>(g.dim());
    let v = dom.volume(g)?;
    Ok(v.powf((lit::<T>(4.0) - n) / n) * functional_f2(g, dom)?)
}

/// Closed model a compactly supported direction lives on: total volume and the
/// constant σ₂ of the background.
#[derive(Clone, Copy, Debug)]
pub struct ClosedModel<T> {
    pub volume: T,
    pub sigma2: T,
    pub kappa: T,
    pub n: usize,
}

impl<T: Scalar> ClosedModel<T> {
    /// The round sphere `Sⁿ(κ)`.
    pub fn sphere(model: &ModelSpace<T>) -> Result<Self> {
        if model.kind != ModelKind::Sphere {
            return Err(Error::WrongBackground("closed model needs a sphere".into()));
        }
        let n = model.factor_dim;
        let nf = from_usize::<T>(n);
        let k = model.kappa;
        Ok(ClosedModel {
            volume: sphere_volume::<T>(n) / k.powf(nf * lit(0.5)),
            sigma2: nf * (nf - T::one()) * k * k / lit(8.0),
            kappa: k,
            n,
        })
    }
}

/// Volume of the unit round `Sⁿ`.
pub fn sphere_volume<T: Scalar>(n: usize) -> T {
    // |S^n| = 2π^{(n+1)/2}/Γ((n+1)/2)
    let pi = std::f64::consts::PI;
    let mut v = [2.0, 2.0 * pi];
    for k in 2..=n {
        let next = 2.0 * pi * v[0] / (k as f64 - 1.0);
        v = [v[1], next];
    }
    lit(if n == 0 { 2.0 } else { v[1] })
}

/// `∫_supp (F(g_t) dv_{g_t} − F(g) dv_g)` for `F(g) = σ₂(g)` (or `1` when `sigma2 = false`).
fn support_difference<T: Scalar>(g: &MetricField<T>, gt: &MetricField<T>, dom: &Domain<T>, sigma2: bool) -> Result<T> {
    dom.integrate_coords(|p| {
        let (a, b) = if sigma2 {
            (sigma_ops::sigma2(gt, p)?, sigma_ops::sigma2(g, p)?)
        } else {
            (T::one(), T::one())
        };
        Ok(a * volume_density(gt, p) - b * volume_density(g, p))
    })
}

/// `𝓕₂` of `g_t` rescaled to the volume of the closed background, when
/// `g_t − g` is supported in `dom`.
pub fn f2_normalized_closed<T: Scalar>(closed: &ClosedModel<T>, g: &MetricField<T>, gt: &MetricField<T>, dom: &Domain<T>) -> Result<T> {
    let n = from_usize::<T>(closed.n);
    let vt = closed.volume + support_difference(g, gt, dom, false)?;
    let lambda = (closed.volume / vt).powf(lit::<T>(2.0) / n);
    let f = closed.sigma2 * closed.volume + support_difference(g, gt, dom, true)?;
    Ok(lambda.powf((n - lit(4.0)) * lit(0.5)) * f)
}

/// Per-term values of the unit-volume second variation of `𝓕₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F2SecondVariation<T> {
    pub terms: [T; 10],
    pub value: T,
}

/// Second variation of `𝓕₂` at a round sphere among metrics of fixed volume,
/// for `h` supported in `dom` with `∫ tr h = 0`.
///
/// The terms are, in order: the `Λ_g(h) tr h` pairing, the squared block, the
/// `κ²((tr h)² − |h|²)` term, the `Δ|h|²` cross term, the scalar block, the
/// `⟨h, ∇²tr h, δ*δh⟩` term, `|δh + ½∇tr h|²`, the volume-constraint term,
/// the `⟨ω, ½∇tr h⟩` term and `|∇h|²`.
pub fn f2_second_variation_unitvol<T: Scalar>(
    closed: &ClosedModel<T>,
    g: &MetricField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
) -> Result<F2SecondVariation<T>> {
    let kappa = closed.kappa;
    let n = from_usize::<T>(closed.n);
    let one = T::one();
    let two: T = lit(2.0);
    let half: T = lit(0.5);
    let four: T = lit(4.0);
    let n2 = (n - two) * (n - two);
    let three: T = lit(3.0);
    let v = dom.integrate_many(g, 10, |p| {
        let pc = pieces(g, h, p)?;
        let fr = &pc.fr;
        let a = space_form_block(&pc, kappa);
        let sb = pc.lap_tr - pc.delta2 + kappa * (n - one) * pc.tr;
        let hx = pc.hess_tr.add(&pc.dsd.scale(two)).scale(n * n - three * n + three);
        Ok(vec![
            sigma_ops::lambda_local(fr, &pc.h) * pc.tr,
            -fr.inner2(&a, &a) / (four * n2),
            kappa * kappa * half * (pc.tr * pc.tr - pc.norm2()),
            kappa / four * (pc.lap_norm2() - pc.cross()),
            n / (four * (n - one) * n2) * sb * sb,
            kappa / (two * n2) * fr.inner2(&pc.h.v, &hx),
            -(n * n - two * n + two) * kappa / (two * n2) * pc.omega_norm2(),
            -(n - one) / four * kappa * kappa * (pc.norm2() - half * pc.tr * pc.tr),
            (n - one) / n2 * kappa * fr.inner1(&pc.omega, &pc.grad_tr.scale(half)),
            -kappa / lit(8.0) * pc.grad_norm2(),
        ])
    })?;
    let mut terms = [T::zero(); 10];
    terms.copy_from_slice(&v);
    let value = terms.iter().fold(T::zero(), |a, &b| a + b);
    Ok(F2SecondVariation { terms, value })
}

/// The transverse-traceless form of the unit-volume second variation of `𝓕₂`:
/// `−((n+1)/4)κ²∫|h|² − (1/(4(n−2)²))∫|Δh − 2κh|² − (κ/8)∫|∇h|² − (κ/4)∫C(h)`
/// with `C(h) = g^{ij}g^{pq}g^{sl}∇_p h_sj ∇_l h_qi`.
pub fn f2_second_variation_tt<T: Scalar>(closed: &ClosedModel<T>, g: &MetricField<T>, h: &SymTensorField<T>, dom: &Domain<T>) -> Result<T> {
    let kappa = closed.kappa;
    let n = from_usize::<T>(closed.n);
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let n2 = (n - two) * (n - two);
    dom.integrate(g, |p| {
        let pc = pieces(g, h, p)?;
        let a = pc.lap.sub(&pc.h.v.scale(two * kappa));
        Ok(-(n + T::one()) / four * kappa * kappa * pc.norm2() - pc.fr.inner2(&a, &a) / (four * n2)
            - kappa / lit(8.0) * pc.grad_norm2()
            - kappa / four * pc.cross())
    })
}

/// `𝓔_{g₀}(g) = V(g)^{4/n} ∫ σ₂(g) dv_{g₀}` over `dom`.
pub fn e_functional<T: Scalar>(g0: &MetricField<T>, g: &MetricField<T>, dom: &Domain<T>) -> Result<T> {
    let n = from_usize::<T>(g.dim());
    let v = dom.volume(g)?;
    let s = dom.integrate(g0, |p| sigma_ops::sigma2(g, p))?;
    Ok(v.powf(lit::<T>(4.0) / n) * s)
}

/// `𝓔_{g₀}(g_t)` on a closed background when `g_t − g₀` is supported in `dom`.
pub fn e_functional_closed<T: Scalar>(closed: &ClosedModel<T>, g0: &MetricField<T>, gt: &MetricField<T>, dom: &Domain<T>) -> Result<T> {
    let n = from_usize::<T>(closed.n);
    let vt = closed.volume + support_difference(g0, gt, dom, false)?;
    let s = closed.sigma2 * closed.volume
        + dom.integrate(g0, |p| Ok(sigma_ops::sigma2(gt, p)? - sigma_ops::sigma2(g0, p)?))?;
    Ok(vt.powf(lit::<T>(4.0) / n) * s)
}

/// The two blocks of the second variation of `𝓔` at an Einstein background,
/// for `h = h̊ + ψ g` with `h̊` transverse-traceless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ESecondVariation<T> {
    /// `((n+4)/(2n²)) ∫ (tr h − mean) 𝒯 (tr h − mean)`.
    pub conformal: T,
    /// `−2 ∫ ⟨DB̊(h̊), h̊⟩` with `DB̊ = (1/(8(n−2)²))(Δ_E + (n−2)²R/(2n(n−1)))Δ_E`.
    pub tt: T,
    /// `V^{4/n}(conformal + tt)`.
    pub value: T,
}

/// Second variation of `𝓔_{g₀}` at a round sphere for `h = h̊ + ψ g` supported in `dom`.
pub fn e_second_variation<T: Scalar>(
    closed: &ClosedModel<T>,
    g0: &MetricField<T>,
    tt: &SymTensorField<T>,
    psi: &ScalarField<T>,
    dom: &Domain<T>,
) -> Result<ESecondVariation<T>> {
    let n = from_usize::<T>(closed.n);
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let n2 = (n - two) * (n - two);
    let s2 = closed.sigma2;
    // ψ̃ = tr h = nψ
    let int_tr = dom.integrate(g0, |p| Ok(n * psi.value(p)))?;
    let tr_t_tr = dom.integrate(g0, |p| {
        let geo = Geometry::at(g0, p, 2)?;
        let fr = geo.frame();
        let u = geo.local0(psi)?;
        let u = Local0 { v: u.v * n, d: u.d.scale(n), dd: u.dd.scale(n) };
        Ok(u.v * sigma_ops::t_local(&fr, &u))
    })?;
    let conformal = (n + four) / (two * n * n) * (tr_t_tr - two * s2 * int_tr * int_tr / closed.volume);
    // DB̊(h̊) = (1/(8(n−2)²))(Δ_E + (n−2)²R/(2n(n−1)))Δ_E h̊ on TT
    let db = dom.integrate(g0, |p| {
        let pc = pieces(g0, tt, p)?;
        let de = pc.h.einstein(&pc.fr);
        let shift = n2 * pc.fr.scal / (two * n * (n - T::one()));
        Ok((pc.fr.inner2(&de, &de) + shift * pc.fr.inner2(&de, &pc.h.v)) / (lit::<T>(8.0) * n2))
    })?;
    let tt_block = -two * db;
    Ok(ESecondVariation {
        conformal,
        tt: tt_block,
        value: closed.volume.powf(four / n) * (conformal + tt_block),
    })
}

/// Decomposed form of `Λ_g(h)` for `h = h̊ + ψ g` with `h̊` transverse-traceless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaDecomposed<T> {
    /// `(1/(2(n−2)²)) div X`.
    pub divergence: T,
    /// `−2⟨B̊, h̊⟩`.
    pub b_pairing: T,
    /// `−(1/n)𝒯(tr h)`.
    pub conformal: T,
    pub value: T,
    /// `max(|tr h̊|, |δh̊|)` at the point.
    pub tt_defect: T,
}

/// `Λ_g(h)` through the divergence decomposition, for `h = h̊ + ψ g`.
pub fn lambda_on_tt_conformal<T: Scalar>(
    g: &MetricField<T>,
    tt: &SymTensorField<T>,
    psi: &ScalarField<T>,
    p: &[T],
) -> Result<LambdaDecomposed<T>> {
    let geo = Geometry::at(g, p, 4)?;
    let fr = geo.frame();
    let n = fr.dim();
    let nn = fr.n;
    let one = T::one();
    let two: T = lit(2.0);
    let h = geo.local2(tt)?;
    let defect = fr.trace(&h.v).abs().max(h.delta(&fr).max_abs());
    if defect > lit(1e-8) {
        return Err(Error::Certification(format!("transverse-traceless defect {defect}")));
    }
    let u = geo.local0(psi)?;
    let (ric, scal) = sigma_ops::curvature_locals(&geo)?;
    let ric_ring = ric.v.sub(&fr.g.scale(scal.v / n));
    let lap_ric_ring = ric.lap(&fr).sub(&fr.g.scale(scal.lap(&fr) / n));
    // h = h̊ + ψg; the ψg part drops out of both pairings since R̊ic is trace free
    let div_x = fr.inner2(&ric_ring, &h.lap(&fr)) - fr.inner2(&h.v, &lap_ric_ring)
        + (n - two) / (two * (n - one))
            * (fr.inner2(&scal.dd, &h.v) - fr.inner1(&h.delta(&fr), &scal.d));
    let one_l = Local0::constant(&T::zero(), nn, T::one());
    let b = sigma_ops::lambda_adjoint_local(&fr, &one_l, &ric, &scal).scale(lit(-0.5));
    let b_ring = b.sub(&fr.g.scale(fr.sigma2() / n));
    let tr_u = Local0 { v: u.v * n, d: u.d.scale(n), dd: u.dd.scale(n) };
    let divergence = div_x / fr.c_n();
    let b_pairing = -two * fr.inner2(&b_ring, &h.v);
    let conformal = -sigma_ops::t_local(&fr, &tr_u) / n;
    Ok(LambdaDecomposed { divergence, b_pairing, conformal, value: divergence + b_pairing + conformal, tt_defect: defect })
}

/// `DV(h) = ½ ∫ tr_g h dv_g`.
pub fn volume_first_variation<T: Scalar>(g: &MetricField<T>, h: &SymTensorField<T>, dom: &Domain<T>) -> Result<T> {
    dom.integrate(g, |p| {
        let geo = Geometry::at(g, p, 2)?;
        let fr = geo.frame();
        Ok(fr.trace(&h.value(p)) * lit(0.5))
    })
}

/// Boundary terms left by integrating `∫ f Λ_g(h)` by parts against
/// `∫ ⟨h, Λ*_g(f)⟩` over a ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjointBoundaryTerms<T> {
    /// `∮ ⟨∇_ν(fRic) − δ(fRic)(ν)g, h⟩ + 2⟨h(ν), δ(fRic)⟩`.
    pub ricci: T,
    /// `∮ ∇_ν(fR) tr h − ⟨h(ν), ∇(fR)⟩`.
    pub scalar: T,
    /// `−c_n⁻¹ (ricci − n/(2(n−1)) scalar)`.
    pub total: T,
    /// Largest pointwise size of either integrand.
    pub max_integrand: T,
}

fn boundary_integrands<T: Scalar>(
    g: &MetricField<T>,
    f: &ScalarField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
    q: &[T],
) -> Result<(T, T, T)> {
    let nu = sigma_ops::boundary_data(g, dom, q)?.nu;
    let geo = Geometry::at(g, q, 4)?;
    let fr = geo.frame();
    let n = fr.n;
    let (ric, scal) = sigma_ops::curvature_locals(&geo)?;
    let fl = geo.local0(f)?;
    let fric = ric.times_scalar(&fl);
    let fscal = scal.times(&fl);
    let hv = h.value(q);
    let nu_up = Tensor::from_fn(n, 1, |ix| (0..n).fold(T::zero(), |acc, l| acc + *fr.gi.at2(ix[0], l) * nu.data[l]));
    let delta = fric.delta(&fr);
    let h_nu = fr.apply(&hv, &nu);
    let mut dnu_fric = Tensor::from_fn(n, 2, |_| T::zero());
    let mut dnu_fscal = T::zero();
    for a in 0..n {
        dnu_fric = dnu_fric.add(&fric.d_slice(a).scale(nu_up.data[a]));
        dnu_fscal = dnu_fscal + nu_up.data[a] * fscal.d.data[a];
    }
    let delta_nu = fr.inner1(&delta, &nu);
    let ricci = fr.inner2(&dnu_fric.sub(&fr.g.scale(delta_nu)), &hv) + lit::<T>(2.0) * fr.inner1(&h_nu, &delta);
    let scalar = dnu_fscal * fr.trace(&hv) - fr.inner1(&h_nu, &fscal.d);
    // area element of the coordinate sphere: √det g · |dρ|_g / |dρ|_e
    let r = dom.radius_of(q)?;
    let center = match &dom.shape {
        crate::domain::Shape::Ball { center, .. } => center.clone(),
        crate::domain::Shape::Box { .. } => unreachable!("boundary_data rejects boxes"),
    };
    let de = Tensor::from_fn(n, 1, |ix| (q[ix[0]] - center[ix[0]]) / r);
    let density = volume_density(g, q) * fr.inner1(&de, &de).sqrt();
    Ok((ricci, scalar, density))
}

/// Boundary terms of the adjoint identity for `Λ_g` on a ball domain.
pub fn adjoint_boundary_terms<T: Scalar>(
    g: &MetricField<T>,
    f: &ScalarField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
    rule: crate::domain::BallRule,
) -> Result<AdjointBoundaryTerms<T>> {
    let (nodes, weights) = dom.boundary_nodes(rule)?;
    let vals: Result<Vec<(T, T, T)>> = nodes.par_iter().map(|q| boundary_integrands(g, f, h, dom, q)).collect();
    let vals = vals?;
    let mut ricci = Vec::with_capacity(vals.len());
    let mut scalar = Vec::with_capacity(vals.len());
    let mut worst = T::zero();
    for ((a, b, dens), w) in vals.into_iter().zip(weights) {
        ricci.push(a * dens * w);
        scalar.push(b * dens * w);
        worst = worst.max(a.abs()).max(b.abs());
    }
    let ricci = crate::scalar::pairwise_sum(&ricci);
    let scalar = crate::scalar::pairwise_sum(&scalar);
    let n = from_usize::<T>(g.dim());
    let one = T::one();
    let two = one + one;
    let c_n = two * (n - two) * (n - two);
    let total = -(ricci - n / (two * (n - one)) * scalar) / c_n;
    Ok(AdjointBoundaryTerms { ricci, scalar, total, max_integrand: worst })
}

/// Largest `‖Λ*_g(f) − g‖` over at most `samples` nodes of `dom`.
pub fn potential_residual<T: Scalar>(g: &MetricField<T>, f: &ScalarField<T>, dom: &Domain<T>, samples: usize) -> Result<T> {
    let stride = (dom.nodes.len() / samples.max(1)).max(1);
    let pts: Vec<&Vec<T>> = dom.nodes.iter().step_by(stride).collect();
    let r: Result<Vec<T>> = pts
        .par_iter()
        .map(|p| Ok(sigma_ops::lambda_adjoint(g, f, p)?.sub(&g.value(p)).max_abs()))
        .collect();
    Ok(r?.into_iter().fold(T::zero(), T::max))
}

/// Per-term values of the volume second variation at a σ₂-critical metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeSecondVariation<T> {
    /// `∫ ¼ (tr h)²`.
    pub trace_term: T,
    /// `∫ f·(…)`, one entry per displayed group in order.
    pub groups: [T; 11],
    pub value: T,
}

/// `V″(0)` at a geodesic ball with potential `f` (`Λ*_g f = g`, `f|∂ = 0`)
/// along a σ₂-constant path with fixed boundary metric and `g′(0) = h`.
/// `dom` must contain the support of `h` inside the ball.
pub fn volume_second_variation_critical<T: Scalar>(
    ball: &GeodesicBall<T>,
    f: &ScalarField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
) -> Result<VolumeSecondVariation<T>> {
    let g = &ball.model.metric;
    let kappa = ball.model.kappa;
    let res = potential_residual(g, f, dom, 48)?;
    if res > lit(1e-7) {
        return Err(Error::InvalidCritical(format!("‖Λ*f − g‖ = {res}")));
    }
    let n = from_usize::<T>(ball.dim());
    let one = T::one();
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let eight: T = lit(8.0);
    let half: T = lit(0.5);
    let n2 = (n - two) * (n - two);
    let trace_term = dom.integrate(g, |p| {
        let geo = Geometry::at(g, p, 2)?;
        let t = geo.frame().trace(&h.value(p));
        Ok(t * t / four)
    })?;
    let mut groups = [T::zero(); 11];
    for (k, slot) in groups.iter_mut().enumerate() {
        *slot = dom.integrate(g, |p| {
            let fv = f.value(p);
            if fv == T::zero() {
                return Ok(T::zero());
            }
            let pc = pieces(g, h, p)?;
            let fr = &pc.fr;
            let v = match k {
                0 => {
                    let a = space_form_block(&pc, kappa);
                    fr.inner2(&a, &a) / (eight * n2)
                }
                1 => kappa / lit(16.0) * pc.grad_norm2(),
                2 => kappa * kappa / eight * pc.norm2(),
                3 => -lit::<T>(3.0) / eight * kappa * kappa * pc.tr * pc.tr,
                4 => -kappa / four * fr.inner1(&pc.delta, &pc.delta),
                5 => {
                    let c1 = (lit::<T>(5.0) * n * n - lit::<T>(14.0) * n + lit(14.0)) / (four * n2);
                    -kappa * c1 * fr.inner2(&pc.h.v, &pc.dsd)
                }
                6 => {
                    let c2 = (n * n - lit::<T>(3.0) * n + lit(3.0)) / (four * n2);
                    -kappa * c2 * fr.inner2(&pc.h.v, &pc.hess_tr)
                }
                7 => {
                    let sb = pc.lap_tr - pc.delta2 + kappa * (n - one) * pc.tr;
                    -n / (eight * (n - one) * n2) * sb * sb
                }
                8 => (n * n + two * n - two) / (four * n2) * kappa * pc.omega_norm2(),
                9 => -(n - one) / (two * n2) * kappa * pc.delta_h_omega(),
                _ => -(n - one) / (two * n2) * kappa * fr.inner1(&pc.omega, &pc.grad_tr.scale(half)),
            };
            Ok(fv * v)
        })?;
    }
    let value = groups.iter().fold(trace_term, |a, &b| a + b);
    Ok(VolumeSecondVariation { trace_term, groups, value })
}

/// `V″(0)` for transverse-traceless `h`:
/// `∫ f((1/(8(n−2)²))|Δh − 2κh|² + (κ²/8)|h|² + (κ/16)|∇h|²)`.
pub fn volume_second_variation_tt<T: Scalar>(
    ball: &GeodesicBall<T>,
    f: &ScalarField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
) -> Result<T> {
    let g = &ball.model.metric;
    let kappa = ball.model.kappa;
    let n = from_usize::<T>(ball.dim());
    let two: T = lit(2.0);
    let eight: T = lit(8.0);
    let n2 = (n - two) * (n - two);
    dom.integrate(g, |p| {
        let fv = f.value(p);
        if fv == T::zero() {
            return Ok(T::zero());
        }
        let pc = pieces(g, h, p)?;
        let a = pc.lap.sub(&pc.h.v.scale(two * kappa));
        Ok(fv * (pc.fr.inner2(&a, &a) / (eight * n2) + kappa * kappa / eight * pc.norm2() + kappa / lit(16.0) * pc.grad_norm2()))
    })
}

/// `V″(0) = ¼∫(tr h)² − ½∫|h|² − (1/(4(n−2)²))∫ f·I(h)` along a σ₂-constant path
/// with `g′(0) = h` supported inside the ball, obtained from `σ₂″(0) = 0`,
/// `Λ*_g f = g` and `V″ = ½∫(tr h′ + ½(tr h)² − |h|²)`.
pub fn volume_second_variation_via_potential<T: Scalar>(
    ball: &GeodesicBall<T>,
    f: &ScalarField<T>,
    h: &SymTensorField<T>,
    dom: &Domain<T>,
) -> Result<T> {
    let g = &ball.model.metric;
    let kappa = ball.model.kappa;
    let n = from_usize::<T>(ball.dim());
    let two: T = lit(2.0);
    let n2 = (n - two) * (n - two);
    dom.integrate(g, |p| {
        let pc = pieces(g, h, p)?;
        Ok(pc.tr * pc.tr / lit(4.0) - pc.norm2() * lit(0.5) - f.value(p) * cc_quadratic(&pc, kappa) / (lit::<T>(4.0) * n2))
    })
}

/// `σ₂″(0)` along `g + th` on a constant-curvature background (`h′ = 0`),
/// as a scalar field for the constraint solver.
pub fn sigma2_second_variation_field<T: Scalar>(g: &MetricField<T>, kappa: T, h: &SymTensorField<T>, p: &[T]) -> Result<T> {
    let pc = pieces(g, h, p)?;
    Ok(cc_quadratic(&pc, kappa) / pc.fr.c_n())
}

/// `L_X g = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`, the infinitesimal
/// diffeomorphism direction generated by the coordinate vector field `X`.
pub fn lie_derivative<T: Scalar>(g: &MetricField<T>, x: Vec<ScalarField<T>>) -> SymTensorField<T> {
    let g2 = g.clone();
    let n = g.dim();
    let support = x.iter().find_map(|c| c.support.clone());
    let field = SymTensorField::new(g.chart.clone(), move |xs| {
        let nv = xs[0].nvars();
        let k = xs[0].order();
        let y: Vec<_> = xs.iter().enumerate().map(|(i, xi)| crate::jet::Jet::variable(nv, k + 1, i, xi.value())).collect();
        let gm = g2.jet(&y);
        let v: Vec<_> = x.iter().map(|c| c.jet(&y)).collect();
        Tensor::from_fn(n, 2, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = y[0].zero_like().truncate(k);
            for m in 0..n {
                acc = acc + v[m].truncate(k).mul_ref(&gm.at2(i, j).derivative(m));
                acc = acc + gm.at2(m, j).truncate(k).mul_ref(&v[m].derivative(i));
                acc = acc + gm.at2(i, m).truncate(k).mul_ref(&v[m].derivative(j));
            }
            acc
        })
    });
    match support {
        Some(s) => field.with_support(s),
        None => field,
    }
}

/// Weyl tensor `W = Rm − P ⊙ g` in the curvature pipeline's index convention.
pub fn weyl<T: Scalar>(fr: &Frame<T, T>) -> Tensor<T> {
    let n = fr.n;
    let p = fr.schouten();
    let g = &fr.g;
    Tensor::from_fn(n, 4, |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let kn = *p.at2(i, l) * *g.at2(j, k) + *p.at2(j, k) * *g.at2(i, l) - *p.at2(i, k) * *g.at2(j, l) - *p.at2(j, l) * *g.at2(i, k);
        *fr.riem.at4(i, j, k, l) - kn
    })
}

/// Gauss–Bonnet–Chern diagnostic for dimension four.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussBonnetReport<T> {
    pub integral_sigma2: T,
    pub integral_weyl: T,
    /// `∫(σ₂ + |W|²/4)`.
    pub total: T,
    /// `total / (8π²χ)`, `NaN` when `χ = 0`.
    pub ratio: T,
}

/// `∫(σ₂ + |W|²/4) dv` over `dom` multiplied by `copies` (e.g. `2` for a
/// sphere covered by two stereographic unit balls), compared to `8π²χ`.
pub fn gauss_bonnet_diagnostic<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>, copies: T, chi: i32) -> Result<GaussBonnetReport<T>> {
    if g.dim() != 4 {
        return Err(Error::Dimension(g.dim()));
    }
    let s = dom.integrate(g, |p| sigma_ops::sigma2(g, p))? * copies;
    let w = dom.integrate(g, |p| {
        let fr = Geometry::at(g, p, 2)?.frame();
        let wt = weyl(&fr);
        Ok(fr.inner4(&wt, &wt))
    })? * copies;
    let total = s + w / lit(4.0);
    let target = lit::<T>(8.0 * std::f64::consts::PI * std::f64::consts::PI) * lit(chi as f64);
    let ratio = if chi == 0 { T::nan() } else { total / target };
    Ok(GaussBonnetReport { integral_sigma2: s, integral_weyl: w, total, ratio })
}

/// `∫(σ₂(e^{2u}g) dv_{e^{2u}g} − σ₂(g) dv_g)` for `u` supported in `dom`.
pub fn sigma2_integral_conformal_drift<T: Scalar>(g: &MetricField<T>, u: &ScalarField<T>, dom: &Domain<T>) -> Result<T> {
    let gu = g.conformal(u);
    support_difference(g, &gu, dom, true)
}

#[cfg(test)]
mod exact_reference {
    use super::*;
    use crate::field::Chart;
    use crate::jet::Jet;
    use crate::models::make_model;

    // exact c σ₂'' via the connection difference tensor
    fn exact(g: &MetricField<f64>, h: &SymTensorField<f64>, h2: &SymTensorField<f64>, p: &[f64]) -> (f64, f64) {
        let geo = Geometry::at(g, p, 2).unwrap();
        let fr = geo.frame();
        let a = geo.local2(h).unwrap();
        let b = geo.local2(h2).unwrap();
        let n = fr.n;
        let gi = |i: usize, j: usize| *fr.gi.at2(i, j);
        let hu = fr.raise2(&a.v);
        let s = |l: &Local2<f64>, ll: usize, j: usize, k: usize| *l.d.at3(j, ll, k) + *l.d.at3(k, j, ll) - *l.d.at3(ll, j, k);
        let ds = |l: &Local2<f64>, x: usize, ll: usize, j: usize, k: usize| *l.dd.at4(x, j, ll, k) + *l.dd.at4(x, k, j, ll) - *l.dd.at4(x, ll, j, k);
        let c1 = |m: usize, j: usize, k: usize| (0..n).map(|l| 0.5 * gi(m, l) * s(&a, l, j, k)).sum::<f64>();
        let dc1 = |x: usize, m: usize, j: usize, k: usize| (0..n).map(|l| 0.5 * gi(m, l) * ds(&a, x, l, j, k)).sum::<f64>();
        let dhu = |x: usize, m: usize, l: usize| {
            let mut t = 0.0;
            for q in 0..n { for r in 0..n { t += gi(m, q) * gi(l, r) * *a.d.at3(x, q, r); } }
            t
        };
        let dc2 = |x: usize, m: usize, j: usize, k: usize| {
            (0..n).map(|l| 0.5 * gi(m, l) * ds(&b, x, l, j, k) - dhu(x, m, l) * s(&a, l, j, k) - *hu.at2(m, l) * ds(&a, x, l, j, k)).sum::<f64>()
        };
        let mut r1 = vec![0.0; n * n];
        let mut r2 = vec![0.0; n * n];
        for j in 0..n { for k in 0..n {
            let mut x1 = 0.0; let mut x2 = 0.0;
            for m in 0..n {
                x1 += dc1(m, m, j, k) - dc1(j, m, m, k);
                x2 += dc2(m, m, j, k) - dc2(j, m, m, k);
                for q in 0..n { x2 += 2.0 * (c1(m, m, q) * c1(q, j, k) - c1(m, j, q) * c1(q, m, k)); }
            }
            r1[j * n + k] = x1; r2[j * n + k] = x2;
        }}
        let ric = |j: usize, k: usize| *fr.ric.at2(j, k);
        // A = g^-1, A' = -g^-1 h g^-1, A'' = 2 g^-1 h g^-1 h g^-1 - g^-1 h2 g^-1
        let hh = fr.raise2(&fr.compose(&a.v, &a.v));
        let h2u = fr.raise2(&b.v);
        let a0 = |i: usize, j: usize| gi(i, j);
        let a1 = |i: usize, j: usize| -*hu.at2(i, j);
        let a2 = |i: usize, j: usize| 2.0 * *hh.at2(i, j) - *h2u.at2(i, j);
        let mut ric2 = 0.0;
        let (mut rr1, mut rr2) = (0.0, 0.0);
        for i in 0..n { for aa in 0..n {
            rr1 += a1(i, aa) * ric(i, aa) + a0(i, aa) * r1[i * n + aa];
            rr2 += a2(i, aa) * ric(i, aa) + 2.0 * a1(i, aa) * r1[i * n + aa] + a0(i, aa) * r2[i * n + aa];
            for j in 0..n { for bb in 0..n {
                let (rij, rab) = (ric(i, j), ric(aa, bb));
                let (pij, pab) = (r1[i * n + j], r1[aa * n + bb]);
                ric2 += 2.0 * a2(i, aa) * a0(j, bb) * rij * rab + 2.0 * a1(i, aa) * a1(j, bb) * rij * rab
                    + 8.0 * a1(i, aa) * a0(j, bb) * pij * rab + 2.0 * a0(i, aa) * a0(j, bb) * pij * pab
                    + 2.0 * a0(i, aa) * a0(j, bb) * r2[i * n + j] * rab;
            }}
        }}
        let nf = n as f64;
        let r = fr.scal;
        (-ric2 + nf / (4.0 * (nf - 1.0)) * (2.0 * rr1 * rr1 + 2.0 * r * rr2), rr2)
    }

    fn field(chart: &Chart<f64>, seed: u64) -> SymTensorField<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = chart.dim;
        let c: Vec<f64> = (0..n * n * (1 + n + n * n)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymTensorField::from_components(chart.clone(), move |x: &[Jet<f64>], i, j| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            let base = (i * n + j) * (1 + n + n * n);
            let mut t = x[0].constant_like(c[base] + if i == j { 1.5 } else { 0.0 });
            for a in 0..n {
                t = t + x[a].scale(c[base + 1 + a]);
                for b in 0..n { t = t + x[a].mul_ref(&x[b]).scale(0.5 * c[base + 1 + n + a * n + b]); }
            }
            t
        })
    }

    fn curved(seed: u64) -> MetricField<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 100);
        let c: Vec<f64> = (0..200).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let chart = Chart::euclidean("x", 3);
        MetricField::from_components(chart, move |x: &[Jet<f64>], i, j| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            let k = (i * 3 + j) * 12;
            let mut t = x[0].constant_like(if i == j { 1.0 } else { 0.0 } + 0.1 * c[k]);
            for a in 0..3 {
                t = t + x[a].scale(c[k + 1 + a]);
                for b in a..3 { t = t + x[a].mul_ref(&x[b]).scale(c[k + 4 + a + b]); }
            }
            t
        })
    }

    #[test]
    fn general_formula_matches_exact_reference() {
        for ms in 0..6u64 {
            let g = curved(ms);
            for hs in 0..4u64 {
                let h = field(&g.chart, 40 + 7 * ms + hs);
                let h2 = field(&g.chart, 90 + 3 * ms + hs);
                let p = [0.05 * hs as f64 - 0.1, 0.1 - 0.03 * ms as f64, 0.07];
                let (e, r2) = exact(&g, &h, &h2, &p);
                let a = sigma2_second_variation(&g, &h, &h2, &p).unwrap();
                let b = scalar_second_variation(&g, &h, &h2, &p).unwrap();
                assert!(relative_residual(a, e / 2.0) < 1e-10, "{a} vs {}", e / 2.0);
                assert!(relative_residual(b, r2) < 1e-10, "{b} vs {r2}");
            }
        }
    }

    #[test]
    fn constant_curvature_form_matches_exact_reference() {
        for (kind, k, n) in [(ModelKind::Sphere, 1.0, 3), (ModelKind::Hyperbolic, -1.0, 3), (ModelKind::Sphere, 1.0, 4), (ModelKind::Hyperbolic, -0.5, 5)] {
            let m = make_model::<f64>(kind, k, n).unwrap();
            let zero = SymTensorField::zero(m.chart().clone());
            for hs in 0..4u64 {
                let h = field(m.chart(), 500 + hs);
                let p: Vec<f64> = (0..n).map(|c| 0.05 * ((c * 7 + hs as usize) % 9) as f64 - 0.2).collect();
                let (e, _) = exact(&m.metric, &h, &zero, &p);
                let c = 2.0 * (n as f64 - 2.0).powi(2);
                let a = sigma2_second_variation_cc(&m.metric, k, &h, &zero, &p).unwrap();
                assert!(relative_residual(a, e / c) < 1e-10, "{kind} n={n}: {a} vs {}", e / c);
            }
        }
    }
}
