//! The σ₂ layer: Schouten tensor, Newton transform, the operator `𝒯`, the
//! linearization `Λ` of σ₂ and its adjoint `Λ*`, the conformal law, and the
//! boundary curvature `H₂`.
//!
//! Every formula has a `*_local` variant generic over [`Ring`] that works on
//! pointwise data; the public wrappers expand fields at a point and call it.

use crate::algebra::{Frame, Local0, Local2, NegTensor};
use crate::chartcalc::Geometry;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::jet::Jet;
use crate::linalg;
use crate::ring::Ring;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;
use rayon::prelude::*;

/// `½⟨T₁, ∇²u⟩ + 2uσ₂`.
pub fn t_local<T: Scalar, E: Ring<S = T>>(fr: &Frame<T, E>, u: &Local0<E>) -> E {
    let half: T = lit(0.5);
    fr.inner2(&fr.newton_t1(), &u.dd).scale(half).add(&u.v.mul(&fr.sigma2()).scale(lit(2.0)))
}

/// `c_n Λ_g(h)` with `c_n = 2(n−2)²`.
pub fn lambda_scaled_local<T: Scalar, E: Ring<S = T>>(fr: &Frame<T, E>, h: &Local2<E>) -> E {
    let n = fr.dim();
    let one = T::one();
    let two = one + one;
    let l = h.einstein(fr).neg_tensor().add(&h.hess_tr(fr)).add(&h.delta_star_delta(fr).scale(two));
    let first = fr.inner2(&fr.ric, &l);
    let inner = h.lap_tr(fr).sub(&h.delta2(fr)).add(&fr.inner2(&fr.ric, &h.v));
    first.sub(&fr.scal.mul(&inner).scale(n / (two * (n - one))))
}

/// `Λ_g(h)`.
pub fn lambda_local<T: Scalar, E: Ring<S = T>>(fr: &Frame<T, E>, h: &Local2<E>) -> E {
    lambda_scaled_local(fr, h).scale(T::one() / fr.c_n())
}

/// `Λ*_g(f)` from `f`, `Ric`, `R` and their first two covariant derivatives.
pub fn lambda_adjoint_local<T: Scalar, E: Ring<S = T>>(
    fr: &Frame<T, E>,
    f: &Local0<E>,
    ric: &Local2<E>,
    scal: &Local0<E>,
) -> Tensor<E> {
    let n = fr.dim();
    let one = T::one();
    let two = one + one;
    let s = ric.times_scalar(f);
    let fr_scal = scal.times(f);
    let e_term = s.einstein(fr).neg_tensor();
    let dd_term = fr.g.times(&s.delta2(fr));
    let ds_term = s.delta_star_delta(fr).scale(two);
    let r_block = fr
        .g
        .times(&fr_scal.lap(fr))
        .sub(&fr_scal.dd)
        .add(&fr.ric.times(&fr_scal.v))
        .scale(-n / (two * (n - one)));
    e_term.add(&dd_term).add(&ds_term).add(&r_block).scale(one / fr.c_n())
}

/// The six addends of the expansion of `2(n−2)² Λ*_g(1)`.
pub fn lemma21_terms_local<T: Scalar, E: Ring<S = T>>(
    fr: &Frame<T, E>,
    ric: &Local2<E>,
    scal: &Local0<E>,
) -> [Tensor<E>; 6] {
    let nn = fr.n;
    let n = fr.dim();
    let one = T::one();
    let two = one + one;
    let inv_n = one / n;
    let g = &fr.g;
    let rc = Local2 {
        v: ric.v.sub(&g.times(&scal.v.scale(inv_n))),
        d: Tensor::from_fn(nn, 3, |ix| ric.d.at3(ix[0], ix[1], ix[2]).sub(&scal.d.data[ix[0]].mul(g.at2(ix[1], ix[2])).scale(inv_n))),
        dd: Tensor::from_fn(nn, 4, |ix| {
            ric.dd.at4(ix[0], ix[1], ix[2], ix[3]).sub(&scal.dd.at2(ix[0], ix[1]).mul(g.at2(ix[2], ix[3])).scale(inv_n))
        }),
    };
    let t1 = rc.einstein(fr).neg_tensor();
    let t2 = g.times(&scal.lap(fr)).scale((n - two) / (two * n * (n - one)));
    let t3 = scal.dd.scale(-(n - two) / (two * (n - one)));
    let t4 = rc.v.times(&fr.scal).scale(-(n - two) * (n - two) / (two * n * (n - one)));
    let t5 = g.times(&fr.inner2(&rc.v, &rc.v)).scale(-two / n);
    let t6 = g.times(&fr.sigma2()).scale(-lit::<T>(4.0) * (n - two) * (n - two) / n);
    [t1, t2, t3, t4, t5, t6]
}

/// Remainder `ℐ_g(u)` of the conformal law, one entry per addend.
#[derive(Clone, Debug)]
pub struct Remainder<T> {
    pub laplacian_sq: T,
    pub hessian_sq: T,
    pub gradient_flux: T,
    pub mixed: T,
    pub quartic: T,
    pub ricci: T,
    pub scalar: T,
}

impl<T: Scalar> Remainder<T> {
    pub fn total(&self) -> T {
        self.laplacian_sq + self.hessian_sq + self.gradient_flux + self.mixed + self.quartic + self.ricci + self.scalar
    }
}

pub fn remainder_local<T: Scalar>(fr: &Frame<T, T>, u: &Local0<T>) -> Remainder<T> {
    let n = fr.dim();
    let one = T::one();
    let two = one + one;
    let quarter: T = lit(0.25);
    let lap = u.lap(fr);
    let g2 = u.grad_norm2(fr);
    // ⟨∇u, ∇|∇u|²⟩ = 2∇²u(∇u, ∇u)
    let flux = two * fr.bilinear(&u.dd, &u.d, &u.d);
    Remainder {
        laplacian_sq: quarter * lap * lap,
        hessian_sq: -quarter * fr.inner2(&u.dd, &u.dd),
        gradient_flux: quarter * flux,
        mixed: (n - lit(3.0)) / lit(4.0) * g2 * lap,
        quartic: (n - one) * (n - lit(4.0)) / lit(16.0) * g2 * g2,
        ricci: -one / (two * (n - two)) * fr.bilinear(&fr.ric, &u.d, &u.d),
        scalar: -(n - lit(4.0)) / (lit::<T>(8.0) * (n - two)) * fr.scal * g2,
    }
}

/// Schouten data at a point.
#[derive(Clone, Debug)]
pub struct SchoutenPack<T> {
    pub schouten: Tensor<T>,
    /// Eigenvalues of `A_g` relative to `g`, ascending.
    pub eigenvalues: Vec<T>,
    /// `σ_1, …, σ_n` from the eigenvalues.
    pub sigma: Vec<T>,
    pub newton_t1: Tensor<T>,
    /// σ₂ from the closed curvature form.
    pub sigma2_closed: T,
}

pub fn schouten_pack<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<SchoutenPack<T>> {
    let geo = Geometry::at(g, p, 2)?;
    let fr = geo.frame();
    let a = fr.schouten();
    let eig = linalg::generalized_eigenvalues(&a.data, &fr.g.data, fr.n)?;
    let sigma = linalg::elementary_symmetric(&eig);
    Ok(SchoutenPack { newton_t1: fr.newton_t1(), sigma2_closed: fr.sigma2(), schouten: a, eigenvalues: eig, sigma })
}

/// σ₂ from the closed curvature form.
pub fn sigma2<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<T> {
    Ok(Geometry::at(g, p, 2)?.frame().sigma2())
}

/// `𝒯_g(u) = ½⟨T₁, ∇²u⟩ + 2uσ₂`.
pub fn t_operator<T: Scalar>(g: &MetricField<T>, u: &ScalarField<T>, p: &[T]) -> Result<T> {
    let geo = Geometry::at(g, p, 2)?;
    let fr = geo.frame();
    Ok(t_local(&fr, &geo.local0(u)?))
}

/// Divergence form `½ div(T₁(∇u)) + 2uσ₂`, expanded with the product rule.
pub fn t_operator_divergence_form<T: Scalar>(g: &MetricField<T>, u: &ScalarField<T>, p: &[T]) -> Result<T> {
    let geo = Geometry::at(g, p, 3)?;
    let fr = geo.frame();
    let ul = geo.local0(u)?;
    let div_t1 = divergence_t1_at(&geo);
    let half: T = lit(0.5);
    let two: T = lit(2.0);
    Ok(half * (fr.inner1(&div_t1, &ul.d) + fr.inner2(&fr.newton_t1(), &ul.dd)) + two * ul.v * fr.sigma2())
}

fn divergence_t1_at<T: Scalar>(geo: &Geometry<T>) -> Tensor<T> {
    let fr = geo.frame();
    let n = fr.n;
    let nn: T = fr.dim();
    let dric = geo.nabla(&geo.ric).values();
    let half: T = lit(0.5);
    Tensor::from_fn(n, 1, |ix| {
        let k = ix[0];
        let mut div_ric = T::zero();
        for a in 0..n {
            for i in 0..n {
                div_ric = div_ric + *fr.gi.at2(a, i) * *dric.at3(a, i, k);
            }
        }
        (half * geo.scal.d1(k) - div_ric) / (nn - lit(2.0))
    })
}

/// `div T₁` at `p` (vanishes by the contracted Bianchi identity).
pub fn divergence_t1<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<Tensor<T>> {
    Ok(divergence_t1_at(&Geometry::at(g, p, 3)?))
}

/// `Λ_g(h)`.
pub fn lambda_lin<T: Scalar>(g: &MetricField<T>, h: &SymTensorField<T>, p: &[T]) -> Result<T> {
    let geo = Geometry::at(g, p, 2)?;
    let fr = geo.frame();
    Ok(lambda_local(&fr, &geo.local2(h)?))
}

/// Ricci and scalar curvature with two covariant derivatives, as values.
pub fn curvature_locals<T: Scalar>(geo: &Geometry<T>) -> Result<(Local2<T>, Local0<T>)> {
    let r = geo.ricci_local(0)?;
    let s = geo.scalar_local(0)?;
    Ok((
        Local2 { v: r.v.values(), d: r.d.values(), dd: r.dd.values() },
        Local0 { v: s.v.value(), d: s.d.values(), dd: s.dd.values() },
    ))
}

/// `Λ*_g(f)`.
pub fn lambda_adjoint<T: Scalar>(g: &MetricField<T>, f: &ScalarField<T>, p: &[T]) -> Result<Tensor<T>> {
    let geo = Geometry::at(g, p, 4)?;
    let fr = geo.frame();
    let (ric, scal) = curvature_locals(&geo)?;
    Ok(lambda_adjoint_local(&fr, &geo.local0(f)?, &ric, &scal))
}

/// Pointwise residual of `δΛ*_g(f) = ½ f dσ₂`, maximum over components.
pub fn adjoint_divergence_residual<T: Scalar>(g: &MetricField<T>, f: &ScalarField<T>, p: &[T]) -> Result<T> {
    let geo = Geometry::at(g, p, 5)?;
    let fr = geo.frame_jets(1);
    let ric = geo.ricci_local(1)?;
    let scal = geo.scalar_local(1)?;
    let fl = geo.local0_jets(&f.jet(&geo.coords(3)), 1)?;
    let ls = lambda_adjoint_local(&fr, &fl, &ric, &scal);
    let d = geo.nabla(&ls).values();
    let gi = geo.gi.values();
    let n = geo.dim();
    let s2 = fr.sigma2();
    let half: T = lit(0.5);
    let fv = fl.v.value();
    let mut worst = T::zero();
    for j in 0..n {
        let mut delta = T::zero();
        for i in 0..n {
            for k in 0..n {
                delta = delta - *gi.at2(i, k) * *d.at3(i, k, j);
            }
        }
        worst = worst.max((delta - half * fv * s2.d1(j)).abs());
    }
    Ok(worst)
}

/// Expansion of `Λ*_g(1)` by its six named terms.
#[derive(Clone, Debug)]
pub struct LambdaStarOne<T> {
    /// The addends of `2(n−2)² Λ*_g(1)` in display order.
    pub terms: [Tensor<T>; 6],
    /// `Λ*_g(1)`.
    pub value: Tensor<T>,
}

pub fn lambda_star_one<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<LambdaStarOne<T>> {
    let geo = Geometry::at(g, p, 4)?;
    let fr = geo.frame();
    let (ric, scal) = curvature_locals(&geo)?;
    let terms = lemma21_terms_local(&fr, &ric, &scal);
    let mut total = terms[0].clone();
    for t in &terms[1..] {
        total = total.add(t);
    }
    Ok(LambdaStarOne { value: total.scale(T::one() / fr.c_n()), terms })
}

/// `B_g = −½Λ*_g(1)` and its trace-free part.
#[derive(Clone, Debug)]
pub struct BTensor<T> {
    pub b: Tensor<T>,
    pub b_ring: Tensor<T>,
    pub sigma2: T,
}

pub fn b_tensor<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<BTensor<T>> {
    let geo = Geometry::at(g, p, 4)?;
    let fr = geo.frame();
    let (ric, scal) = curvature_locals(&geo)?;
    let one = Local0::constant(&T::zero(), fr.n, T::one());
    let b = lambda_adjoint_local(&fr, &one, &ric, &scal).scale(lit(-0.5));
    let s2 = fr.sigma2();
    let b_ring = b.sub(&fr.g.scale(s2 / fr.dim()));
    Ok(BTensor { b, b_ring, sigma2: s2 })
}

/// Pieces of the conformal law `σ₂(e^{2u}g₀) = 2e^{−4u}(−𝒯(u) + (2u+½)σ₂(g₀) + ℐ(u))`.
#[derive(Clone, Debug)]
pub struct ConformalSigma2<T> {
    pub value: T,
    pub t_term: T,
    pub sigma2_background: T,
    pub remainder: Remainder<T>,
}

pub fn conformal_sigma2_local<T: Scalar>(fr: &Frame<T, T>, u: &Local0<T>) -> ConformalSigma2<T> {
    let two: T = lit(2.0);
    let half: T = lit(0.5);
    let t = t_local(fr, u);
    let s2 = fr.sigma2();
    let rem = remainder_local(fr, u);
    let value = two * (-lit::<T>(4.0) * u.v).exp() * (-t + (two * u.v + half) * s2 + rem.total());
    ConformalSigma2 { value, t_term: t, sigma2_background: s2, remainder: rem }
}

pub fn conformal_sigma2<T: Scalar>(g0: &MetricField<T>, u: &ScalarField<T>, p: &[T]) -> Result<ConformalSigma2<T>> {
    let geo = Geometry::at(g0, p, 2)?;
    Ok(conformal_sigma2_local(&geo.frame(), &geo.local0(u)?))
}

/// Cone membership over sampled points.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeStatus<T> {
    pub in_gamma2_plus: bool,
    pub in_gamma2_minus: bool,
    /// Smallest signed slack of the defining inequalities of the cone found
    /// (Γ₂⁺ if any, otherwise Γ₂⁻, otherwise Γ₂⁺'s negative slack).
    pub margin: T,
    /// `T₁` positive definite at every sample (checked when in Γ₂⁺).
    pub t1_positive_definite: bool,
    pub samples: usize,
}

pub fn cone_check<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>) -> Result<ConeStatus<T>> {
    let vals: Result<Vec<(T, T, bool)>> = dom
        .nodes
        .par_iter()
        .map(|p| {
            let fr = Geometry::at(g, p, 2)?.frame();
            let t1 = fr.newton_t1();
            Ok((fr.sigma1(), fr.sigma2(), crate::chartcalc::is_positive_definite(&t1)))
        })
        .collect();
    let vals = vals?;
    let plus = vals.iter().all(|&(s1, s2, _)| s1 > T::zero() && s2 > T::zero());
    let minus = vals.iter().all(|&(s1, s2, _)| s1 < T::zero() && s2 > T::zero());
    let fold = |f: &dyn Fn(T, T) -> T| vals.iter().fold(T::infinity(), |m, &(a, b, _)| m.min(f(a, b)));
    let margin = if minus && !plus { fold(&|a, b| (-a).min(b)) } else { fold(&|a, b| a.min(b)) };
    let t1_pd = plus && vals.iter().all(|v| v.2);
    Ok(ConeStatus { in_gamma2_plus: plus, in_gamma2_minus: minus, margin, t1_positive_definite: t1_pd, samples: vals.len() })
}

/// Extrinsic and intrinsic data of the boundary level set through a point.
#[derive(Clone, Debug)]
pub struct BoundaryData<T, E> {
    /// Outward unit conormal (1-form).
    pub nu: Tensor<E>,
    pub second_fundamental: Tensor<E>,
    /// Normalized mean curvature `tr II / (n−1)`.
    pub mean: E,
    pub trace_free_second: Tensor<E>,
    pub boundary_scalar: E,
    pub boundary_ricci: Tensor<E>,
    pub h2: E,
    _t: std::marker::PhantomData<T>,
}

/// Boundary geometry of the level set of `rho` through the point.
pub fn boundary_local<T: Scalar, E: Ring<S = T>>(fr: &Frame<T, E>, rho: &Local0<E>) -> BoundaryData<T, E> {
    let nn = fr.n;
    let n = fr.dim();
    let one = T::one();
    let two = one + one;
    let norm = rho.grad_norm2(fr).sqrt();
    let inv = norm.recip();
    let nu = rho.d.times(&inv);
    let proj = fr.g.sub(&fr.outer1(&nu, &nu));
    let ii = fr.compose(&fr.compose(&proj, &rho.dd), &proj).times(&inv);
    let htr = fr.trace(&ii);
    let mean = htr.scale(one / (n - one));
    let a0 = ii.sub(&proj.times(&mean));
    let nu_up = Tensor::from_fn(nn, 1, |ix| {
        let mut acc = nu.data[0].zero_like();
        for j in 0..nn {
            acc = acc.add(&fr.gi.at2(ix[0], j).mul(&nu.data[j]));
        }
        acc
    });
    let ric_nn = fr.bilinear(&fr.ric, &nu, &nu);
    let r_bar = fr.scal.sub(&ric_nn.scale(two)).add(&htr.mul(&htr)).sub(&fr.inner2(&ii, &ii));
    let rm_nu = Tensor::from_fn(nn, 2, |ix| {
        let mut acc = nu.data[0].zero_like();
        for i in 0..nn {
            for l in 0..nn {
                acc = acc.add(&nu_up.data[i].mul(&nu_up.data[l]).mul(fr.riem.at4(i, ix[0], ix[1], l)));
            }
        }
        acc
    });
    let ric_bar = fr
        .compose(&fr.compose(&proj, &fr.ric.sub(&rm_nu)), &proj)
        .add(&ii.times(&htr))
        .sub(&fr.compose(&ii, &ii));
    let schouten_pair = if nn > 3 {
        let a_bar = ric_bar.sub(&proj.times(&r_bar.scale(one / (two * (n - two))))).scale(one / (n - lit(3.0)));
        fr.inner2(&a0, &a_bar)
    } else {
        // two-dimensional boundary: no Schouten tensor; every level sphere is umbilic here
        mean.zero_like()
    };
    let h2 = r_bar
        .mul(&mean)
        .scale(one / (two * (n - two)))
        .sub(&mean.mul(&mean).mul(&mean).scale((n - one) / lit(6.0)))
        .sub(&schouten_pair.scale(one / (n - two)))
        .add(&mean.mul(&fr.inner2(&a0, &a0)).scale(one / (two * (n - two))));
    BoundaryData {
        nu,
        second_fundamental: ii,
        mean,
        trace_free_second: a0,
        boundary_scalar: r_bar,
        boundary_ricci: ric_bar,
        h2,
        _t: std::marker::PhantomData,
    }
}

fn radius_jet<T: Scalar>(dom: &Domain<T>, x: &[Jet<T>]) -> Result<Jet<T>> {
    match &dom.shape {
        crate::domain::Shape::Ball { center, .. } => {
            let mut s = x[0].zero_like();
            for (xi, &c) in x.iter().zip(center) {
                let d = xi.add_scalar(-c);
                s = s.add_ref(&d.mul_ref(&d));
            }
            Ok(s.sqrt())
        }
        crate::domain::Shape::Box { .. } => Err(Error::Domain { chart: "box domain has no smooth boundary".into(), point: vec![] }),
    }
}

fn check_on_boundary<T: Scalar>(dom: &Domain<T>, q: &[T]) -> Result<()> {
    let r = dom.radius_of(q)?;
    if let crate::domain::Shape::Ball { radius, .. } = &dom.shape {
        if (r - *radius).abs() > lit::<T>(1e-9) * (T::one() + *radius) || r <= T::zero() {
            return Err(Error::Domain { chart: "boundary".into(), point: q.iter().map(|x| x.to_f64().unwrap()).collect() });
        }
    }
    Ok(())
}

/// Boundary data of a ball domain at boundary point `q`.
pub fn boundary_data<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>, q: &[T]) -> Result<BoundaryData<T, T>> {
    check_on_boundary(dom, q)?;
    let geo = Geometry::at(g, q, 2)?;
    let fr = geo.frame();
    let rho = radius_jet(dom, &geo.coords(2))?;
    let rl = geo.local0_jets(&rho, 0)?;
    let rl = Local0 { v: rl.v.value(), d: rl.d.values(), dd: rl.dd.values() };
    Ok(boundary_local(&fr, &rl))
}

/// `H₂` of the boundary of a ball domain at `q`.
pub fn h2_boundary<T: Scalar>(g: &MetricField<T>, dom: &Domain<T>, q: &[T]) -> Result<T> {
    Ok(boundary_data(g, dom, q)?.h2)
}

/// First variation `H₂′ = −3uH₂ + T₁(ν,∇u) − div_ḡ(H∇̄u)` along `e^{2tu}g`.
pub fn h2_conformal_variation<T: Scalar>(g: &MetricField<T>, u: &ScalarField<T>, dom: &Domain<T>, q: &[T]) -> Result<T> {
    check_on_boundary(dom, q)?;
    let geo = Geometry::at(g, q, 3)?;
    let frj = geo.frame_jets(1);
    let rho = radius_jet(dom, &geo.coords(3))?;
    let rl = geo.local0_jets(&rho, 1)?;
    let bd = boundary_local(&frj, &rl);
    let fr = geo.frame();
    let ul = geo.local0(u)?;
    let nu = bd.nu.values();
    let mean = bd.mean.value();
    let htr = mean * (fr.dim() - T::one());
    let dh = Tensor::from_fn(fr.n, 1, |ix| bd.mean.d1(ix[0]));
    let nu_u = fr.inner1(&nu, &ul.d);
    let nu_h = fr.inner1(&nu, &dh);
    let grad_h_grad_u = fr.inner1(&dh, &ul.d) - nu_h * nu_u;
    let lap_bar = ul.lap(&fr) - fr.bilinear(&ul.dd, &nu, &nu) - htr * nu_u;
    let div_term = grad_h_grad_u + mean * lap_bar;
    let t1 = fr.bilinear(&fr.newton_t1(), &nu, &ul.d);
    Ok(-lit::<T>(3.0) * ul.v * bd.h2.value() + t1 - div_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Chart;

    fn sphere3() -> MetricField<f64> {
        MetricField::conformally_flat(Chart::euclidean("stereo", 3), |x| {
            let s = x.iter().fold(x[0].zero_like(), |a, xi| a + xi * xi);
            (s + 1.0).powi(-2).scale(4.0)
        })
    }

    #[test]
    fn unit_sphere_schouten_data() {
        let sp = schouten_pack(&sphere3(), &[0.3, 0.1, -0.2]).unwrap();
        for e in &sp.eigenvalues {
            assert!((e - 0.5).abs() < 1e-13);
        }
        assert!((sp.sigma[1] - 0.75).abs() < 1e-13);
        assert!((sp.sigma2_closed - 0.75).abs() < 1e-13);
        assert!((sp.sigma[0] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn t_of_one_on_sphere() {
        let g = sphere3();
        let one = ScalarField::constant(g.chart.clone(), 1.0);
        assert!((t_operator(&g, &one, &[0.2, 0.2, 0.2]).unwrap() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn lambda_star_one_on_sphere() {
        let g = sphere3();
        let ls = lambda_star_one(&g, &[0.1, -0.3, 0.2]).unwrap();
        let gv = g.value(&[0.1, -0.3, 0.2]);
        for k in 0..9 {
            assert!((ls.value.data[k] + 2.0 / 3.0 * 0.75 * gv.data[k]).abs() < 1e-12);
        }
    }
}
