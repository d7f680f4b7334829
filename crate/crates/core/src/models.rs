//! Model geometries: space forms, the hyperbolic–spherical product, geodesic
//! balls with their critical potentials, and compactly supported
//! transverse-traceless test tensors.
//!
//! Space forms of curvature `κ` use the conformally flat chart
//! `g = 4/(1+κ|x|²)² δ`: stereographic for `κ > 0` (all of ℝⁿ), the Poincaré
//! ball `|x| < 1/√(−κ)` for `κ < 0`. Balls are centred at the chart origin,
//! where `cos(√κ r) = (1−κ|x|²)/(1+κ|x|²)`.

use crate::algebra::Frame;
use crate::chartcalc::{curvature_pack, Geometry};
use crate::domain::{BallRule, Domain};
use crate::error::{Error, Result};
use crate::field::{Chart, MetricField, ScalarField, Support, SymTensorField};
use crate::jet::Jet;
use crate::scalar::{from_usize, lit, Scalar};
use crate::sigma_ops;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sphere,
    Hyperbolic,
    Flat,
    /// `Hⁿ(−k) × Sⁿ(k)`.
    Product,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(ModelKind::Sphere),
            "hyperbolic" => Ok(ModelKind::Hyperbolic),
            "flat" => Ok(ModelKind::Flat),
            "product" => Ok(ModelKind::Product),
            other => Err(Error::WrongBackground(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Sphere => "sphere",
            ModelKind::Hyperbolic => "hyperbolic",
            ModelKind::Flat => "flat",
            ModelKind::Product => "product",
        };
        f.write_str(s)
    }
}

/// A certified model geometry.
#[derive(Clone)]
pub struct ModelSpace<T: Scalar> {
    pub kind: ModelKind,
    /// Sectional curvature for space forms; the factor curvature `k` for products.
    pub kappa: T,
    /// Dimension of a space form, or of each factor of a product.
    pub factor_dim: usize,
    pub metric: MetricField<T>,
    /// Largest curvature deviation found during certification.
    pub certification_defect: T,
}

impl<T: Scalar> std::fmt::Debug for ModelSpace<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpace")
            .field("kind", &self.kind)
            .field("kappa", &self.kappa)
            .field("factor_dim", &self.factor_dim)
            .field("certification_defect", &self.certification_defect)
            .finish()
    }
}

fn sq_norm<T: Scalar>(x: &[Jet<T>]) -> Jet<T> {
    x.iter().fold(x[0].zero_like(), |a, xi| a + xi.mul_ref(xi))
}

fn sq_dist<T: Scalar>(x: &[Jet<T>], c: &[T]) -> Jet<T> {
    x.iter().zip(c).fold(x[0].zero_like(), |a, (xi, &ci)| {
        let d = xi.add_scalar(-ci);
        a + d.mul_ref(&d)
    })
}

/// Conformal factor `4/(1+κs)²` of the space-form chart.
fn space_form_factor<T: Scalar>(x: &[Jet<T>], kappa: T) -> Jet<T> {
    sq_norm(x).scale(kappa).add_scalar(T::one()).powi(-2).scale(lit(4.0))
}

/// Deterministic sample points inside `|x| < radius`.
pub fn sample_ball_points<T: Scalar>(n: usize, radius: T, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = p.iter().map(|x| x * x).sum();
        if s < 1.0 {
            out.push(p.iter().map(|&x| lit::<T>(x) * radius).collect());
        }
    }
    out
}

/// Builds and certifies a model; `kappa` is ignored for `Flat`.
pub fn make_model<T: Scalar>(kind: ModelKind, kappa: T, n: usize) -> Result<ModelSpace<T>> {
    if n < 3 {
        return Err(Error::Dimension(n));
    }
    let zero = T::zero();
    let (metric, kappa, sample_radius) = match kind {
        ModelKind::Sphere => {
            if kappa <= zero {
                return Err(Error::WrongBackground("sphere needs κ > 0".into()));
            }
            let chart = Chart::euclidean("stereographic", n);
            (MetricField::conformally_flat(chart, move |x| space_form_factor(x, kappa)), kappa, lit(2.0))
        }
        ModelKind::Hyperbolic => {
            if kappa >= zero {
                return Err(Error::WrongBackground("hyperbolic space needs κ < 0".into()));
            }
            let rho = T::one() / (-kappa).sqrt();
            let chart = Chart::ball("poincare", n, rho);
            (MetricField::conformally_flat(chart, move |x| space_form_factor(x, kappa)), kappa, rho * lit(0.9))
        }
        ModelKind::Flat => (MetricField::euclidean(Chart::euclidean("cartesian", n)), zero, lit(2.0)),
        ModelKind::Product => {
            if kappa <= zero {
                return Err(Error::WrongBackground("product needs factor curvature k > 0".into()));
            }
            let rho = T::one() / kappa.sqrt();
            let half_side = rho / from_usize::<T>(n).sqrt();
            let mut bounds = vec![(-half_side, half_side); n];
            bounds.extend(vec![(T::neg_infinity(), T::infinity()); n]);
            let chart = Chart::boxed("poincare-x-stereographic", bounds, zero);
            let metric = MetricField::new(chart, move |x| {
                let a = space_form_factor(&x[..n], -kappa);
                let b = space_form_factor(&x[n..], kappa);
                let z = a.zero_like();
                Tensor::from_fn(2 * n, 2, |ix| match (ix[0] == ix[1], ix[0] < n) {
                    (true, true) => a.clone(),
                    (true, false) => b.clone(),
                    _ => z.clone(),
                })
            });
            let model = ModelSpace { kind, kappa, factor_dim: n, metric, certification_defect: zero };
            let defect = certify_product(&model, 16)?;
            return Ok(ModelSpace { certification_defect: defect, ..model });
        }
    };
    let model = ModelSpace { kind, kappa, factor_dim: n, metric, certification_defect: zero };
    let pts = sample_ball_points(n, sample_radius, 16, 0x5eed);
    let defect = certify_space_form(&model, &pts)?;
    Ok(ModelSpace { certification_defect: defect, ..model })
}

/// Largest deviation from constant curvature over `pts`; fails above `1e−10`
/// relative to the curvature scale.
pub fn certify_space_form<T: Scalar>(model: &ModelSpace<T>, pts: &[Vec<T>]) -> Result<T> {
    let mut worst = T::zero();
    for p in pts {
        let cp = curvature_pack(&model.metric, p, 0)?;
        let scale = T::one() + cp.metric.max_abs() * cp.metric.max_abs() * model.kappa.abs();
        worst = worst.max(cp.constant_curvature_defect(model.kappa) / scale);
    }
    if worst > tolerance::<T>(1e-10) {
        return Err(Error::Certification(format!("space form deviates from constant curvature by {worst}")));
    }
    Ok(worst)
}

fn certify_product<T: Scalar>(model: &ModelSpace<T>, count: usize) -> Result<T> {
    let n = model.factor_dim;
    let rho = T::one() / model.kappa.sqrt();
    let a = sample_ball_points(n, rho * lit(0.5), count, 11);
    let b = sample_ball_points(n, lit(1.5), count, 12);
    let mut worst = T::zero();
    for (pa, pb) in a.iter().zip(&b) {
        let p: Vec<T> = pa.iter().chain(pb).copied().collect();
        let cp = curvature_pack(&model.metric, &p, 0)?;
        for i in 0..2 * n {
            for j in 0..2 * n {
                if (i < n) != (j < n) && *cp.metric.at2(i, j) != T::zero() {
                    return Err(Error::Certification("product metric not block diagonal".into()));
                }
            }
        }
        worst = worst.max(cp.scalar.abs());
    }
    if worst > tolerance::<T>(1e-10) {
        return Err(Error::Certification(format!("product scalar curvature {worst} is not zero")));
    }
    Ok(worst)
}

/// `tol` for `f64`, widened for lower-precision scalars.
pub fn tolerance<T: Scalar>(tol: f64) -> T {
    let ratio = T::epsilon().to_f64().unwrap() / f64::EPSILON;
    lit(tol * ratio.sqrt().max(1.0))
}

impl<T: Scalar> ModelSpace<T> {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn chart(&self) -> &Chart<T> {
        &self.metric.chart
    }

    /// Scalar curvature of the model.
    pub fn scalar_curvature(&self) -> T {
        let n = from_usize::<T>(self.factor_dim);
        match self.kind {
            ModelKind::Product => T::zero(),
            _ => n * (n - T::one()) * self.kappa,
        }
    }

    /// Same geometry in geodesic polar coordinates `(r, θ₁, …, θ_{n−2}, φ)`,
    /// `g = dr² + sn_κ(r)² dΩ²`, with the pole and the axis kept at `exclusion`.
    pub fn polar_metric(&self, exclusion: T) -> Result<MetricField<T>> {
        let n = self.factor_dim;
        let k = self.kappa;
        let pi: T = lit(std::f64::consts::PI);
        let rmax = match self.kind {
            ModelKind::Sphere => pi / k.sqrt(),
            ModelKind::Hyperbolic | ModelKind::Flat => T::infinity(),
            ModelKind::Product => return Err(Error::WrongBackground("polar chart of a product".into())),
        };
        let mut bounds = vec![(T::zero(), rmax)];
        bounds.extend(vec![(T::zero(), pi); n - 2]);
        bounds.push((T::neg_infinity(), T::infinity()));
        let chart = Chart::boxed("polar", bounds, exclusion);
        let kind = self.kind;
        Ok(MetricField::new(chart, move |x| {
            let r = &x[0];
            let sn = match kind {
                ModelKind::Sphere => r.scale(k.sqrt()).sin().scale(T::one() / k.sqrt()),
                ModelKind::Hyperbolic => r.scale((-k).sqrt()).sinh().scale(T::one() / (-k).sqrt()),
                _ => r.clone(),
            };
            let mut diag = vec![r.constant_like(T::one())];
            let mut w = sn.mul_ref(&sn);
            for a in 1..n {
                diag.push(w.clone());
                if a < n - 1 {
                    let s = x[a].sin();
                    w = w.mul_ref(&s.mul_ref(&s));
                }
            }
            let z = r.zero_like();
            Tensor::from_fn(n, 2, |ix| if ix[0] == ix[1] { diag[ix[0]].clone() } else { z.clone() })
        }))
    }

    /// `cos(√κ r)` (κ>0), `cosh(√−κ r)` (κ<0) or `1 + |x|²/2`-type radial
    /// profile (κ=0: `r²`) as a field on the model chart, with `r` the
    /// geodesic distance to the chart origin.
    pub fn radial_profile(&self) -> Result<ScalarField<T>> {
        let k = self.kappa;
        match self.kind {
            ModelKind::Sphere | ModelKind::Hyperbolic => Ok(ScalarField::new(self.chart().clone(), move |x| {
                let s = sq_norm(x).scale(k);
                s.scale(-T::one()).add_scalar(T::one()).mul_ref(&s.add_scalar(T::one()).recip())
            })),
            ModelKind::Flat => Ok(ScalarField::new(self.chart().clone(), |x| sq_norm(x))),
            ModelKind::Product => Err(Error::WrongBackground("radial profile of a product".into())),
        }
    }

    /// Geodesic distance from the chart origin to `p`.
    pub fn distance_from_origin(&self, p: &[T]) -> T {
        let s = p.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
        let two: T = lit(2.0);
        match self.kind {
            ModelKind::Sphere => two * (self.kappa.sqrt() * s).atan() / self.kappa.sqrt(),
            ModelKind::Hyperbolic => two * ((-self.kappa).sqrt() * s).atanh() / (-self.kappa).sqrt(),
            _ => s,
        }
    }

    /// Chart radius of the geodesic sphere of radius `r` about the origin.
    pub fn chart_radius(&self, r: T) -> T {
        let half: T = lit(0.5);
        match self.kind {
            ModelKind::Sphere => (self.kappa.sqrt() * r * half).tan() / self.kappa.sqrt(),
            ModelKind::Hyperbolic => ((-self.kappa).sqrt() * r * half).tanh() / (-self.kappa).sqrt(),
            _ => r,
        }
    }
}

/// Geodesic ball centred at the chart origin.
#[derive(Clone, Debug)]
pub struct GeodesicBall<T: Scalar> {
    pub model: ModelSpace<T>,
    /// Geodesic radius.
    pub radius: T,
    /// Radius in chart coordinates.
    pub chart_radius: T,
    pub domain: Domain<T>,
}

impl<T: Scalar> GeodesicBall<T> {
    /// Ball of geodesic radius `radius`; on spheres the closed hemisphere
    /// (`√κ R ≤ π/2`) is the largest admissible ball.
    pub fn new(model: &ModelSpace<T>, radius: T, rule: BallRule) -> Result<Self> {
        if model.kind == ModelKind::Product {
            return Err(Error::WrongBackground("geodesic balls are built on space forms".into()));
        }
        let half_pi: T = lit(std::f64::consts::FRAC_PI_2);
        let bad = !(radius > T::zero())
            || (model.kind == ModelKind::Sphere && model.kappa.sqrt() * radius > half_pi + lit(1e-12));
        if bad {
            return Err(Error::Domain { chart: format!("geodesic ball radius {radius}"), point: vec![] });
        }
        let chart_radius = model.chart_radius(radius);
        let domain = Domain::ball(vec![T::zero(); model.factor_dim], chart_radius, rule);
        Ok(GeodesicBall { model: model.clone(), radius, chart_radius, domain })
    }

    pub fn dim(&self) -> usize {
        self.model.factor_dim
    }

    /// A point on the boundary sphere along the first axis direction `e`.
    pub fn boundary_point(&self, direction: &[T]) -> Vec<T> {
        let s = direction.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
        direction.iter().map(|&x| x / s * self.chart_radius).collect()
    }
}

/// Critical potential `f = (4/((n−1)κ²))(cs(r)/cs(R) − 1)` of a geodesic ball,
/// where `cs = cos(√κ ·)` or `cosh(√−κ ·)`. Satisfies `Λ*_g(f) = g`, `f|∂ = 0`.
pub fn potential<T: Scalar>(ball: &GeodesicBall<T>) -> Result<ScalarField<T>> {
    let m = &ball.model;
    let k = m.kappa;
    let half_pi: T = lit(std::f64::consts::FRAC_PI_2);
    let cs_big_r = match m.kind {
        ModelKind::Sphere => {
            if k.sqrt() * ball.radius >= half_pi {
                return Err(Error::Domain { chart: "potential needs R < π/2".into(), point: vec![] });
            }
            (k.sqrt() * ball.radius).cos()
        }
        ModelKind::Hyperbolic => ((-k).sqrt() * ball.radius).cosh(),
        _ => return Err(Error::WrongBackground("potentials exist on curved space forms only".into())),
    };
    let n = from_usize::<T>(m.factor_dim);
    let c = lit::<T>(4.0) / ((n - T::one()) * k * k);
    let profile = m.radial_profile()?;
    Ok(ScalarField::new(m.chart().clone(), move |x| profile.jet(x).scale(c / cs_big_r).add_scalar(-c)))
}

/// Potential of a ball in the unit sphere.
pub fn potential_sphere<T: Scalar>(ball: &GeodesicBall<T>) -> Result<ScalarField<T>> {
    if ball.model.kind != ModelKind::Sphere {
        return Err(Error::WrongBackground("potential_sphere needs a sphere ball".into()));
    }
    potential(ball)
}

/// Potential of a ball in hyperbolic space.
pub fn potential_hyperbolic<T: Scalar>(ball: &GeodesicBall<T>) -> Result<ScalarField<T>> {
    if ball.model.kind != ModelKind::Hyperbolic {
        return Err(Error::WrongBackground("potential_hyperbolic needs a hyperbolic ball".into()));
    }
    potential(ball)
}

/// Residuals of `Δf = −4n/((n−1)κ) − nκf` and `∇²f = (−4/((n−1)κ) − κf) g`.
#[derive(Clone, Copy, Debug)]
pub struct PotentialRelations<T> {
    pub laplacian: T,
    pub hessian: T,
}

pub fn einstein_potential_relations<T: Scalar>(
    g: &MetricField<T>,
    kappa: T,
    f: &ScalarField<T>,
    p: &[T],
) -> Result<PotentialRelations<T>> {
    if kappa == T::zero() {
        return Err(Error::WrongBackground("relations divide by κ; flat background".into()));
    }
    let geo = Geometry::at(g, p, 2)?;
    let fr: Frame<T, T> = geo.frame();
    let fl = geo.local0(f)?;
    let n = fr.dim();
    let four: T = lit(4.0);
    let lap_expected = -four * n / ((n - T::one()) * kappa) - n * kappa * fl.v;
    let hess_coeff = -four / ((n - T::one()) * kappa) - kappa * fl.v;
    let hess = fl.dd.sub(&fr.g.scale(hess_coeff)).max_abs();
    Ok(PotentialRelations { laplacian: (fl.lap(&fr) - lap_expected).abs(), hessian: hess })
}

/// Seeded random matrix entries in `(−1, 1)`.
fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.gen_range(-1.0..1.0);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// A constant tensor with the algebraic symmetries of the Weyl tensor
/// (zero for `n = 3`), in the index convention of the curvature pipeline.
pub fn random_weyl(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_symmetric(n, &mut rng);
    let b = random_symmetric(n, &mut rng);
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let kn = |x: &[f64], y: &[f64], i: usize, j: usize, k: usize, l: usize| {
        x[i * n + l] * y[j * n + k] + x[j * n + k] * y[i * n + l] - x[i * n + k] * y[j * n + l] - x[j * n + l] * y[i * n + k]
    };
    let mut rm = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    rm[idx(i, j, k, l)] = kn(&a, &a, i, j, k, l) + kn(&b, &b, i, j, k, l) + kn(&a, &b, i, j, k, l);
                }
            }
        }
    }
    let nf = n as f64;
    let mut ric = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            ric[j * n + k] = (0..n).map(|i| rm[idx(i, j, k, i)]).sum();
        }
    }
    let r: f64 = (0..n).map(|i| ric[i * n + i]).sum();
    let mut sch = vec![0.0; n * n];
    let mut id = vec![0.0; n * n];
    for i in 0..n {
        id[i * n + i] = 1.0;
        for j in 0..n {
            sch[i * n + j] = (ric[i * n + j] - if i == j { r / (2.0 * (nf - 1.0)) } else { 0.0 }) / (nf - 2.0);
        }
    }
    let mut w = rm.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    w[idx(i, j, k, l)] -= kn(&sch, &id, i, j, k, l);
                }
            }
        }
    }
    w
}

/// Flat-space TT tensor built from the potential `ψ`, returned at the order
/// of the incoming coordinate jets.
fn flat_tt<T: Scalar>(psi_at: &dyn Fn(&[Jet<T>]) -> Jet<T>, x: &[Jet<T>], form: &TtForm) -> Tensor<Jet<T>> {
    let n = x.len();
    let nv = x[0].nvars();
    let k = x[0].order();
    let extra = match form {
        TtForm::CottonYork(_) => 3,
        TtForm::Weyl(_) => 2,
    };
    debug_assert!(x.iter().enumerate().all(|(i, xi)| (0..nv).all(|v| xi.order() == 0 || xi.d1(v) == if v == i { T::one() } else { T::zero() })));
    let y: Vec<Jet<T>> = x.iter().enumerate().map(|(i, xi)| Jet::variable(nv, k + extra, i, xi.value())).collect();
    let psi = psi_at(&y);
    let d1: Vec<Jet<T>> = (0..n).map(|a| psi.derivative(a)).collect();
    let hess = Tensor::from_fn(n, 2, |ix| d1[ix[0]].derivative(ix[1]));
    match form {
        TtForm::Weyl(c) => Tensor::from_fn(n, 2, |ix| {
            let (i, j) = (ix[0], ix[1]);
            let mut acc = hess.data[0].zero_like();
            for kk in 0..n {
                for l in 0..n {
                    let cv = c[((i * n + kk) * n + j) * n + l];
                    if cv != 0.0 {
                        acc = acc + hess.at2(kk, l).scale(lit(cv));
                    }
                }
            }
            acc
        }),
        TtForm::CottonYork(e) => {
            let e = |i: usize, j: usize| lit::<T>(e[i * 3 + j]);
            let tr_e = e(0, 0) + e(1, 1) + e(2, 2);
            let z = hess.data[0].zero_like();
            let lap = (0..3).fold(z.clone(), |a, i| a + hess.at2(i, i).clone());
            // linearized Ricci and scalar curvature of δ + ψE
            let ric = Tensor::from_fn(3, 2, |ix| {
                let (i, j) = (ix[0], ix[1]);
                let mut acc = z.clone();
                for kk in 0..3 {
                    acc = acc + hess.at2(kk, i).scale(e(kk, j)) + hess.at2(kk, j).scale(e(kk, i));
                }
                (acc - lap.scale(e(i, j)) - hess.at2(i, j).scale(tr_e)).scale(lit(0.5))
            });
            let mut rs = lap.scale(-tr_e);
            for a in 0..3 {
                for b in 0..3 {
                    rs = rs + hess.at2(a, b).scale(e(a, b));
                }
            }
            let quarter: T = lit(0.25);
            let p = Tensor::from_fn(3, 2, |ix| {
                if ix[0] == ix[1] {
                    ric.at2(ix[0], ix[1]).clone() - rs.scale(quarter)
                } else {
                    ric.at2(ix[0], ix[1]).clone()
                }
            });
            let eps = |i: usize, j: usize, k: usize| -> f64 {
                match (i, j, k) {
                    (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                    (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                    _ => 0.0,
                }
            };
            let dp: Vec<Tensor<Jet<T>>> = (0..3).map(|a| p.map(|c| c.derivative(a))).collect();
            let cy = Tensor::from_fn(3, 2, |ix| {
                let (i, j) = (ix[0], ix[1]);
                let mut acc = z.truncate(k);
                for kk in 0..3 {
                    for l in 0..3 {
                        let s = eps(i, kk, l);
                        if s != 0.0 {
                            acc = acc + dp[kk].at2(l, j).scale(lit(s));
                        }
                    }
                }
                acc
            });
            cy.symmetrize2()
        }
    }
}

enum TtForm {
    CottonYork(Vec<f64>),
    Weyl(Vec<f64>),
}

/// Compactly supported transverse-traceless tensor on a space form or flat
/// model, supported in the coordinate ball `support`.
///
/// The flat construction uses `ψ = (1 − |x−c|²/ρ²)⁸` and is scaled so that its
/// size does not depend on `ρ`; the result is multiplied by `e^{(2−n)ω}`
/// for `g = e^{2ω}δ`, which keeps it transverse-traceless.
pub fn tt_bump<T: Scalar>(model: &ModelSpace<T>, support: &Support<T>, seed: u64) -> Result<SymTensorField<T>> {
    let n = model.factor_dim;
    if model.kind == ModelKind::Product {
        return Err(Error::WrongBackground("TT bumps are built on space forms".into()));
    }
    let form = if n == 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TtForm::CottonYork(random_symmetric(3, &mut rng))
    } else {
        TtForm::Weyl(random_weyl(n, seed))
    };
    let center = support.center.clone();
    let rho = support.radius;
    let m = 8;
    let amplitude = if n == 3 { rho * rho * rho } else { rho * rho };
    let kappa = match model.kind {
        ModelKind::Flat => T::zero(),
        _ => model.kappa,
    };
    let supp = support.clone();
    let psi_center = center.clone();
    let psi = move |y: &[Jet<T>]| -> Jet<T> {
        let s = sq_dist(y, &psi_center).scale(-T::one() / (rho * rho)).add_scalar(T::one());
        s.powi(m)
    };
    let field = SymTensorField::new(model.chart().clone(), move |x| {
        let p: Vec<T> = x.iter().map(|j| j.value()).collect();
        if !supp.contains(&p) {
            return Tensor::from_fn(n, 2, |_| x[0].zero_like());
        }
        let h = flat_tt(&psi, x, &form).scale(amplitude);
        if kappa == T::zero() {
            return h;
        }
        let w = sq_norm(x).scale(kappa).add_scalar(T::one()).scale(lit(0.5)).powi(n as i32 - 2);
        h.times(&w)
    })
    .with_support(support.clone());
    Ok(field)
}

/// Largest `|tr_g h|` and `|δ_g h|` over the sample points.
#[derive(Clone, Copy, Debug)]
pub struct TtResiduals<T> {
    pub trace: T,
    pub divergence: T,
    pub size: T,
}

pub fn tt_residuals<T: Scalar>(g: &MetricField<T>, h: &SymTensorField<T>, pts: &[Vec<T>]) -> Result<TtResiduals<T>> {
    let mut out = TtResiduals { trace: T::zero(), divergence: T::zero(), size: T::zero() };
    for p in pts {
        let geo = Geometry::at(g, p, 2)?;
        let fr = geo.frame();
        let l = geo.local2(h)?;
        out.trace = out.trace.max(fr.trace(&l.v).abs());
        out.divergence = out.divergence.max(l.delta(&fr).max_abs());
        out.size = out.size.max(l.v.max_abs());
    }
    Ok(out)
}

/// σ₂ of the product model at a point, from the curvature pipeline.
pub fn product_sigma2<T: Scalar>(model: &ModelSpace<T>, p: &[T]) -> Result<T> {
    sigma_ops::sigma2(&model.metric, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_model_is_certified() {
        let m = make_model::<f64>(ModelKind::Sphere, 1.0, 3).unwrap();
        assert!(m.certification_defect < 1e-12);
        let s = sigma_ops::sigma2(&m.metric, &[0.4, -0.1, 0.7]).unwrap();
        assert!((s - 0.75).abs() < 1e-13);
    }

    #[test]
    fn chart_radius_inverts_distance() {
        let m = make_model::<f64>(ModelKind::Hyperbolic, -1.0, 3).unwrap();
        let rho = m.chart_radius(1.3);
        assert!((m.distance_from_origin(&[rho, 0.0, 0.0]) - 1.3).abs() < 1e-13);
    }

    #[test]
    fn sphere_potential_centre_value() {
        let m = make_model::<f64>(ModelKind::Sphere, 1.0, 3).unwrap();
        let b = GeodesicBall::new(&m, std::f64::consts::FRAC_PI_4, BallRule::new(4, 4, 8)).unwrap();
        let f = potential_sphere(&b).unwrap();
        assert!((f.value(&[0.0; 3]) - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-14);
        assert!(f.value(&b.boundary_point(&[0.3, 0.4, 0.5])).abs() < 1e-14);
    }

    #[test]
    fn flat_tt_bump_has_zero_trace_and_divergence() {
        let m = make_model::<f64>(ModelKind::Flat, 0.0, 3).unwrap();
        let s = Support { center: vec![0.1, 0.0, -0.1], radius: 0.5 };
        let h = tt_bump(&m, &s, 3).unwrap();
        let pts = sample_ball_points(3, 0.5, 20, 1).into_iter().map(|p| vec![p[0] + 0.1, p[1], p[2] - 0.1]).collect::<Vec<_>>();
        let r = tt_residuals(&m.metric, &h, &pts).unwrap();
        assert!(r.size > 1e-3);
        assert!(r.trace < 1e-12 * r.size.max(1.0) && r.divergence < 1e-10);
    }

    fn ball(kind: ModelKind, kappa: f64, n: usize, r: f64) -> GeodesicBall<f64> {
        let m = make_model::<f64>(kind, kappa, n).unwrap();
        GeodesicBall::new(&m, r, BallRule::new(4, 4, 8)).unwrap()
    }

    #[test]
    fn potentials_solve_adjoint_equation() {
        for (kind, kappa, n, r) in [
            (ModelKind::Sphere, 1.0, 3, 1.0),
            (ModelKind::Sphere, 2.0, 4, 0.7),
            (ModelKind::Hyperbolic, -1.0, 3, 1.5),
            (ModelKind::Hyperbolic, -0.5, 5, 1.0),
        ] {
            let b = ball(kind, kappa, n, r);
            let f = potential(&b).unwrap();
            for p in sample_ball_points(n, b.chart_radius, 4, 9) {
                let lf = sigma_ops::lambda_adjoint(&b.model.metric, &f, &p).unwrap();
                let g = b.model.metric.value(&p);
                assert!(lf.sub(&g).max_abs() < 1e-9, "{kind} n={n}");
                let rel = einstein_potential_relations(&b.model.metric, kappa, &f, &p).unwrap();
                assert!(rel.laplacian < 1e-10 && rel.hessian < 1e-10);
            }
            assert!(f.value(&b.boundary_point(&vec![1.0; n])).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_relations_are_rejected() {
        let m = make_model::<f64>(ModelKind::Flat, 0.0, 3).unwrap();
        let f = ScalarField::constant(m.chart().clone(), 1.0);
        assert!(matches!(
            einstein_potential_relations(&m.metric, 0.0, &f, &[0.0; 3]),
            Err(Error::WrongBackground(_))
        ));
    }

    #[test]
    fn hemisphere_is_the_largest_sphere_ball() {
        let m = make_model::<f64>(ModelKind::Sphere, 1.0, 3).unwrap();
        let b = GeodesicBall::new(&m, std::f64::consts::FRAC_PI_2, BallRule::default()).unwrap();
        assert!((b.chart_radius - 1.0).abs() < 1e-15);
        assert!(potential_sphere(&b).is_err());
        assert!(GeodesicBall::new(&m, 1.6, BallRule::default()).is_err());
    }

    #[test]
    fn curved_tt_bumps() {
        for (kind, kappa, n) in [
            (ModelKind::Sphere, 1.0, 3),
            (ModelKind::Hyperbolic, -1.0, 3),
            (ModelKind::Sphere, 1.0, 4),
            (ModelKind::Hyperbolic, -1.0, 5),
        ] {
            let m = make_model::<f64>(kind, kappa, n).unwrap();
            let mut c = vec![0.0; n];
            c[0] = 0.1;
            let s = Support { center: c.clone(), radius: 0.3 };
            let h = tt_bump(&m, &s, 17).unwrap();
            let pts: Vec<Vec<f64>> = sample_ball_points(n, 0.3, 12, 4)
                .into_iter()
                .map(|p| p.iter().zip(&c).map(|(a, b)| a + b).collect())
                .collect();
            let r = tt_residuals(&m.metric, &h, &pts).unwrap();
            assert!(r.size > 1e-4, "{kind} n={n}");
            assert!(r.trace < 1e-12 * r.size.max(1.0), "{kind} n={n}: tr {}", r.trace);
            assert!(r.divergence < 1e-9 * r.size.max(1.0), "{kind} n={n}: div {}", r.divergence);
            assert_eq!(h.value(&vec![0.9; n]).max_abs(), 0.0);
        }
    }

    #[test]
    fn product_sigma2_constant() {
        let m = make_model::<f64>(ModelKind::Product, 1.0, 3).unwrap();
        let s = product_sigma2(&m, &[0.1, 0.2, -0.1, 0.5, -0.3, 1.1]).unwrap();
        assert!((s + 0.75).abs() < 1e-12);
    }

    #[test]
    fn polar_chart_has_space_form_curvature() {
        let m = make_model::<f64>(ModelKind::Sphere, 1.0, 4).unwrap();
        let g = m.polar_metric(1e-3).unwrap();
        let cp = curvature_pack(&g, &[0.8, 1.0, 2.0, 0.3], 0).unwrap();
        assert!(cp.constant_curvature_defect(1.0) < 1e-12);
        assert!((cp.scalar - 12.0).abs() < 1e-12);
    }
}
