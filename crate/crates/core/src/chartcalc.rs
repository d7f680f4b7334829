//! Curvature pipeline and basic differential operators on a chart.
//!
//! Convention: `R^m_{ijk} = ∂_iΓ^m_{jk} − ∂_jΓ^m_{ik} + Γ^p_{jk}Γ^m_{ip} − Γ^p_{ik}Γ^m_{jp}`,
//! `R_{ijkl} = g_{lm} R^m_{ijk}`, `Ric_{jk} = g^{il} R_{ijkl}`. A space form of
//! curvature `κ` has `R_{ijkl} = κ(g_il g_jk − g_ik g_jl)`.

use crate::algebra::{Frame, Local0, Local2};
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::jet::Jet;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

/// Jets of the metric and its curvature at one point.
///
/// With metric jets of order `K`: Christoffel symbols carry order `K − 1`,
/// curvature tensors order `K − 2`.
#[derive(Clone, Debug)]
pub struct Geometry<T: Scalar> {
    pub point: Vec<T>,
    pub order: usize,
    pub x: Vec<Jet<T>>,
    pub g: Tensor<Jet<T>>,
    pub gi: Tensor<Jet<T>>,
    pub gamma: Tensor<Jet<T>>,
    pub riem: Tensor<Jet<T>>,
    pub ric: Tensor<Jet<T>>,
    pub scal: Jet<T>,
}

/// Cholesky-based positive-definiteness test.
pub fn is_positive_definite<T: Scalar>(a: &Tensor<T>) -> bool {
    let n = a.n;
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = *a.at2(j, j);
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = *a.at2(i, j);
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

fn to_f64<T: Scalar>(p: &[T]) -> Vec<f64> {
    p.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

impl<T: Scalar> Geometry<T> {
    /// Expands `metric` at `p` with jets of order `order ≥ 2`.
    pub fn at(metric: &MetricField<T>, p: &[T], order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::JetOrder { need: 2, have: order });
        }
        metric.chart.check(p)?;
        let n = p.len();
        let x = Jet::seed(p, order);
        let g = metric.jet(&x);
        if !is_positive_definite(&g.values()) {
            return Err(Error::DegenerateMetric { point: to_f64(p) });
        }
        let gi = g.inverse2();
        let dg = g.partial(n); // dg[a,i,j] = ∂_a g_ij
        let half: T = lit(0.5);
        let ord1 = order - 1;
        let gi1 = gi.truncate(ord1);
        // first kind: Γ_{lij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let first = Tensor::from_fn(n, 3, |ix| {
            let (l, i, j) = (ix[0], ix[1], ix[2]);
            dg.at3(i, j, l).add_ref(dg.at3(j, i, l)).sub_ref(dg.at3(l, i, j)).scale(half)
        });
        let gamma = Tensor::from_fn(n, 3, |ix| {
            let (m, i, j) = (ix[0], ix[1], ix[2]);
            let mut acc = first.at3(0, i, j).zero_like();
            for l in 0..n {
                acc = acc.add_ref(&gi1.at2(m, l).mul_ref(first.at3(l, i, j)));
            }
            acc
        });
        let dgamma = gamma.partial(n); // dgamma[a,m,i,j] = ∂_a Γ^m_ij
        let ord2 = order - 2;
        let gam2 = gamma.truncate(ord2);
        // R^m_{ijk}
        let rup = Tensor::from_fn(n, 4, |ix| {
            let (m, i, j, k) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = dgamma.at4(i, m, j, k).sub_ref(dgamma.at4(j, m, i, k));
            for p_ in 0..n {
                acc = acc.add_ref(&gam2.at3(p_, j, k).mul_ref(gam2.at3(m, i, p_)));
                acc = acc.sub_ref(&gam2.at3(p_, i, k).mul_ref(gam2.at3(m, j, p_)));
            }
            acc
        });
        let g2 = g.truncate(ord2);
        let gi2 = gi.truncate(ord2);
        let riem = Tensor::from_fn(n, 4, |ix| {
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = g2.at2(0, 0).zero_like();
            for m in 0..n {
                acc = acc.add_ref(&g2.at2(l, m).mul_ref(rup.at4(m, i, j, k)));
            }
            acc
        });
        let ric = Tensor::from_fn(n, 2, |ix| {
            let (j, k) = (ix[0], ix[1]);
            let mut acc = g2.at2(0, 0).zero_like();
            for i in 0..n {
                for l in 0..n {
                    acc = acc.add_ref(&gi2.at2(i, l).mul_ref(riem.at4(i, j, k, l)));
                }
            }
            acc
        });
        let mut scal = g2.at2(0, 0).zero_like();
        for j in 0..n {
            for k in 0..n {
                scal = scal.add_ref(&gi2.at2(j, k).mul_ref(ric.at2(j, k)));
            }
        }
        Ok(Geometry { point: p.to_vec(), order, x, g, gi, gamma, riem, ric, scal })
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// Highest order available for curvature jets.
    pub fn curvature_order(&self) -> usize {
        self.order - 2
    }

    /// Frame of plain values.
    pub fn frame(&self) -> Frame<T, T> {
        Frame::new(self.g.values(), self.gi.values(), self.riem.values(), self.ric.values(), self.scal.value())
    }

    /// Frame of jets truncated to `order ≤ K − 2`.
    pub fn frame_jets(&self, order: usize) -> Frame<T, Jet<T>> {
        let o = order.min(self.order - 2);
        Frame::new(self.g.truncate(o), self.gi.truncate(o), self.riem.truncate(o), self.ric.truncate(o), self.scal.truncate(o))
    }

    /// Coordinate jets truncated to `order`.
    pub fn coords(&self, order: usize) -> Vec<Jet<T>> {
        self.x.iter().map(|j| j.truncate(order)).collect()
    }

    /// `∇T` for a tensor of jets.
    pub fn nabla(&self, t: &Tensor<Jet<T>>) -> Tensor<Jet<T>> {
        let o = t.order().saturating_sub(1).min(self.order - 1);
        t.truncate(o + 1).covariant(&self.gamma.truncate(o))
    }

    fn need(&self, need: usize) -> Result<()> {
        if self.order < need {
            Err(Error::JetOrder { need, have: self.order })
        } else {
            Ok(())
        }
    }

    /// `h, ∇h, ∇∇h` as jets of order `keep` (requires `K ≥ keep + 2`).
    pub fn local2_jets(&self, h: &Tensor<Jet<T>>, keep: usize) -> Result<Local2<Jet<T>>> {
        self.need(keep + 2)?;
        if h.order() < keep + 2 {
            return Err(Error::JetOrder { need: keep + 2, have: h.order() });
        }
        let h = h.truncate(keep + 2);
        let d = self.nabla(&h);
        let dd = self.nabla(&d);
        Ok(Local2 { v: h.truncate(keep), d: d.truncate(keep), dd: dd.truncate(keep) })
    }

    /// `u, ∇u, ∇²u` as jets of order `keep`.
    pub fn local0_jets(&self, u: &Jet<T>, keep: usize) -> Result<Local0<Jet<T>>> {
        self.need(keep + 2)?;
        if u.order() < keep + 2 {
            return Err(Error::JetOrder { need: keep + 2, have: u.order() });
        }
        let t = Tensor::scalar(u.truncate(keep + 2));
        let t = Tensor { n: self.dim(), rank: 0, data: t.data };
        let d = self.nabla(&t);
        let dd = self.nabla(&d);
        Ok(Local0 { v: u.truncate(keep), d: d.truncate(keep), dd: dd.truncate(keep) })
    }

    /// Values of `h, ∇h, ∇∇h` for a symmetric tensor field.
    pub fn local2(&self, h: &SymTensorField<T>) -> Result<Local2<T>> {
        let l = self.local2_jets(&h.jet(&self.coords(2)), 0)?;
        Ok(Local2 { v: l.v.values(), d: l.d.values(), dd: l.dd.values() })
    }

    /// Values of `u, ∇u, ∇²u` for a scalar field.
    pub fn local0(&self, u: &ScalarField<T>) -> Result<Local0<T>> {
        let l = self.local0_jets(&u.jet(&self.coords(2)), 0)?;
        Ok(Local0 { v: l.v.value(), d: l.d.values(), dd: l.dd.values() })
    }

    /// Jets of `Ric, ∇Ric, ∇∇Ric` kept at `keep`.
    pub fn ricci_local(&self, keep: usize) -> Result<Local2<Jet<T>>> {
        self.local2_jets(&self.ric, keep)
    }

    /// Jets of `R, ∇R, ∇²R` kept at `keep`.
    pub fn scalar_local(&self, keep: usize) -> Result<Local0<Jet<T>>> {
        self.local0_jets(&self.scal, keep)
    }
}

/// Curvature values at a point.
#[derive(Clone, Debug)]
pub struct CurvaturePack<T: Scalar> {
    pub point: Vec<T>,
    pub metric: Tensor<T>,
    pub inverse: Tensor<T>,
    pub christoffel: Tensor<T>,
    pub riemann: Tensor<T>,
    pub ricci: Tensor<T>,
    pub scalar: T,
    /// Jets of `Ric` and `R` of order `deriv_order`, when requested.
    pub ricci_jet: Option<Tensor<Jet<T>>>,
    pub scalar_jet: Option<Jet<T>>,
}

/// Christoffel symbols, curvature, and optional curvature jets at `p`.
pub fn curvature_pack<T: Scalar>(g: &MetricField<T>, p: &[T], deriv_order: usize) -> Result<CurvaturePack<T>> {
    if deriv_order > 2 {
        return Err(Error::JetOrder { need: deriv_order, have: 2 });
    }
    let geo = Geometry::at(g, p, 2 + deriv_order)?;
    Ok(CurvaturePack {
        point: p.to_vec(),
        metric: geo.g.values(),
        inverse: geo.gi.values(),
        christoffel: geo.gamma.values(),
        riemann: geo.riem.values(),
        ricci: geo.ric.values(),
        scalar: geo.scal.value(),
        ricci_jet: (deriv_order > 0).then(|| geo.ric.clone()),
        scalar_jet: (deriv_order > 0).then(|| geo.scal.clone()),
    })
}

impl<T: Scalar> CurvaturePack<T> {
    /// Largest violation of the algebraic Riemann symmetries and first Bianchi identity.
    pub fn symmetry_defect(&self) -> T {
        let n = self.metric.n;
        let r = &self.riemann;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = *r.at4(i, j, k, l);
                        worst = worst
                            .max((a + *r.at4(j, i, k, l)).abs())
                            .max((a + *r.at4(i, j, l, k)).abs())
                            .max((a - *r.at4(k, l, i, j)).abs())
                            .max((a + *r.at4(j, k, i, l) + *r.at4(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest deviation from `κ(g_il g_jk − g_ik g_jl)`.
    pub fn constant_curvature_defect(&self, kappa: T) -> T {
        let n = self.metric.n;
        let g = &self.metric;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let model = kappa * (*g.at2(i, l) * *g.at2(j, k) - *g.at2(i, k) * *g.at2(j, l));
                        worst = worst.max((*self.riemann.at4(i, j, k, l) - model).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Contracted second Bianchi residual `max_k |(div(Ric − ½Rg))_k|` at `p`.
pub fn bianchi_residual<T: Scalar>(g: &MetricField<T>, p: &[T]) -> Result<T> {
    let geo = Geometry::at(g, p, 3)?;
    let fr = geo.frame();
    let dric = geo.nabla(&geo.ric).values();
    let n = geo.dim();
    let half: T = lit(0.5);
    let mut worst = T::zero();
    for k in 0..n {
        let mut s = T::zero();
        for a in 0..n {
            for i in 0..n {
                s = s + *fr.gi.at2(a, i) * *dric.at3(a, i, k);
            }
        }
        s = s - half * geo.scal.d1(k);
        worst = worst.max(s.abs());
    }
    Ok(worst)
}

/// Pointwise differential operators sharing one geometry.
pub struct DiffOps<T: Scalar> {
    pub geo: Geometry<T>,
    pub frame: Frame<T, T>,
}

impl<T: Scalar> DiffOps<T> {
    pub fn new(g: &MetricField<T>, p: &[T]) -> Result<Self> {
        let geo = Geometry::at(g, p, 2)?;
        let frame = geo.frame();
        Ok(DiffOps { geo, frame })
    }

    /// `∇²u`.
    pub fn covariant_hessian(&self, u: &ScalarField<T>) -> Result<Tensor<T>> {
        Ok(self.geo.local0(u)?.dd)
    }

    /// `Δu = tr_g ∇²u`.
    pub fn laplacian(&self, u: &ScalarField<T>) -> Result<T> {
        Ok(self.geo.local0(u)?.lap(&self.frame))
    }

    /// `δT = −div T` for a symmetric 2-tensor.
    pub fn divergence_neg(&self, h: &SymTensorField<T>) -> Result<Tensor<T>> {
        Ok(self.geo.local2(h)?.delta(&self.frame))
    }

    /// `δ*α = ½(∇_iα_j + ∇_jα_i)` for a 1-form given by component functions.
    pub fn delta_star(&self, alpha: &[ScalarField<T>]) -> Result<Tensor<T>> {
        let x = self.geo.coords(1);
        let n = self.geo.dim();
        let a = Tensor::from_fn(n, 1, |ix| alpha[ix[0]].jet(&x));
        let d = self.geo.nabla(&a).values();
        Ok(d.symmetrize2())
    }

    /// `∇*∇h = −Δh`.
    pub fn rough_laplacian(&self, h: &SymTensorField<T>) -> Result<Tensor<T>> {
        Ok(self.geo.local2(h)?.lap(&self.frame).scale(-T::one()))
    }

    /// `R̊(h)`.
    pub fn ring_r(&self, h: &SymTensorField<T>) -> Tensor<T> {
        let x = self.geo.coords(0);
        self.frame.ring(&h.jet(&x).values())
    }

    /// `Δ_E h = ∇*∇h − 2R̊(h)`.
    pub fn einstein_operator(&self, h: &SymTensorField<T>) -> Result<Tensor<T>> {
        Ok(self.geo.local2(h)?.einstein(&self.frame))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Chart;

    fn poincare() -> MetricField<f64> {
        MetricField::conformally_flat(Chart::ball("poincare", 3, 1.0), |x| {
            let s = x.iter().fold(x[0].zero_like(), |a, xi| a + xi * xi);
            (s.scale(-1.0) + 1.0).powi(-2).scale(4.0)
        })
    }

    #[test]
    fn flat_has_no_curvature() {
        let g = MetricField::euclidean(Chart::euclidean("r3", 3));
        let c = curvature_pack(&g, &[0.1, 0.2, 0.3], 0).unwrap();
        assert!(c.christoffel.max_abs() == 0.0 && c.riemann.max_abs() == 0.0);
        assert_eq!(c.scalar, 0.0);
    }

    #[test]
    fn poincare_ball_is_hyperbolic() {
        let c = curvature_pack(&poincare(), &[0.2, -0.1, 0.4], 1).unwrap();
        assert!((c.scalar + 6.0).abs() < 1e-12);
        assert!(c.constant_curvature_defect(-1.0) < 1e-11);
        assert!(c.symmetry_defect() < 1e-11);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.ricci.at2(i, j) + 2.0 * c.metric.at2(i, j)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn outside_chart_is_domain_error() {
        assert!(matches!(curvature_pack(&poincare(), &[0.9, 0.9, 0.0], 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn degenerate_metric_rejected() {
        let g = MetricField::conformally_flat(Chart::euclidean("r3", 3), |x| x[0].clone());
        assert!(matches!(curvature_pack(&g, &[-0.5, 0.0, 0.0], 0), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn flat_laplacian_of_square_norm() {
        let chart = Chart::<f64>::euclidean("r3", 3);
        let g = MetricField::euclidean(chart.clone());
        let u = ScalarField::new(chart, |x| x.iter().fold(x[0].zero_like(), |a, xi| a + xi * xi));
        let ops = DiffOps::new(&g, &[0.3, 0.1, -0.7]).unwrap();
        assert!((ops.laplacian(&u).unwrap() - 6.0).abs() < 1e-13);
        let h = ops.covariant_hessian(&u).unwrap();
        assert!((h.at2(1, 1) - 2.0).abs() < 1e-13 && h.at2(0, 1).abs() < 1e-13);
    }
}
