//! Integration regions in chart coordinates with tensor-product quadrature.

use crate::error::{Error, Result};
use crate::field::{MetricField, Support};
use crate::scalar::{from_usize, lit, pairwise_sum, Scalar};
use rayon::prelude::*;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Scalar>(m: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    let pi = T::from_f64(std::f64::consts::PI).unwrap();
    let mf = from_usize::<T>(m);
    let half: T = lit(0.5);
    for i in 0..(m + 1) / 2 {
        let mut z = (pi * (from_usize::<T>(i) + lit(0.75)) / (mf + half)).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 2..=m {
                let kf = from_usize::<T>(k);
                let p2 = ((kf + kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { T::one() } else { p0 };
            dp = mf * (z * pm - pm1) / (z * z - T::one());
            let dz = pm / dp;
            z = z - dz;
            if dz.abs() <= T::epsilon() * lit(4.0) {
                break;
            }
        }
        // recompute derivative at the converged node
        let (mut p0, mut p1) = (T::one(), z);
        for k in 2..=m {
            let kf = from_usize::<T>(k);
            let p2 = ((kf + kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        if m > 1 {
            dp = mf * (z * p1 - p0) / (z * z - T::one());
        }
        let wt = lit::<T>(2.0) / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wt;
        w[m - 1 - i] = wt;
    }
    (x, w)
}

/// Shape of an integration region.
#[derive(Clone, Debug)]
pub enum Shape<T> {
    /// Coordinate ball `|x − c| < ρ`.
    Ball { center: Vec<T>, radius: T },
    /// Coordinate box.
    Box { bounds: Vec<(T, T)> },
}

/// Quadrature resolution for a ball: radial, polar-angle, and azimuthal node counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BallRule {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl BallRule {
    pub fn new(radial: usize, polar: usize, azimuthal: usize) -> Self {
        BallRule { radial, polar, azimuthal }
    }

    pub fn doubled(&self) -> Self {
        BallRule { radial: 2 * self.radial, polar: 2 * self.polar, azimuthal: 2 * self.azimuthal }
    }
}

impl Default for BallRule {
    fn default() -> Self {
        BallRule { radial: 20, polar: 16, azimuthal: 32 }
    }
}

/// Region with precomputed coordinate quadrature (weights exclude `√det g`).
#[derive(Clone, Debug)]
pub struct Domain<T> {
    pub shape: Shape<T>,
    pub nodes: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> Domain<T> {
    /// Ball in an `n`-dimensional Cartesian chart.
    pub fn ball(center: Vec<T>, radius: T, rule: BallRule) -> Self {
        Self::ball_layers(center, &[radius], rule)
    }

    /// Ball of radius `radii.last()` whose radial rule restarts at each
    /// breakpoint in `radii`, so integrands supported inside an inner sphere
    /// are resolved; `rule.radial` nodes are used per layer.
    pub fn ball_layers(center: Vec<T>, radii: &[T], rule: BallRule) -> Self {
        let n = center.len();
        let radius = *radii.last().expect("at least one radius");
        let (rx, rw) = gauss_legendre::<T>(rule.radial);
        let half: T = lit(0.5);
        let dirs = sphere_directions::<T>(n, rule);
        let mut nodes = Vec::with_capacity(rule.radial * dirs.len());
        let mut weights = Vec::with_capacity(rule.radial * dirs.len());
        let mut lo = T::zero();
        for &hi in radii {
            let len = hi - lo;
            for (r, wr) in rx.iter().zip(&rw) {
                let rr = lo + (*r + T::one()) * half * len;
                let wrr = *wr * half * len * rr.powi(n as i32 - 1);
                for (d, w) in &dirs {
                    nodes.push(center.iter().zip(d).map(|(&c, &x)| c + rr * x).collect());
                    weights.push(wrr * *w);
                }
            }
            lo = hi;
        }
        Domain { shape: Shape::Ball { center, radius }, nodes, weights }
    }

    /// Tensor Gauss–Legendre box with `m` nodes per axis.
    pub fn boxed(bounds: Vec<(T, T)>, m: usize) -> Self {
        let (x, w) = gauss_legendre::<T>(m);
        let half: T = lit(0.5);
        let mut nodes: Vec<Vec<T>> = vec![vec![]];
        let mut weights = vec![T::one()];
        for &(lo, hi) in &bounds {
            let mut nn = Vec::with_capacity(nodes.len() * m);
            let mut ww = Vec::with_capacity(nodes.len() * m);
            for (p, pw) in nodes.iter().zip(&weights) {
                for (xi, wi) in x.iter().zip(&w) {
                    let mut q = p.clone();
                    q.push(lo + (*xi + T::one()) * half * (hi - lo));
                    nn.push(q);
                    ww.push(*pw * *wi * half * (hi - lo));
                }
            }
            nodes = nn;
            weights = ww;
        }
        Domain { shape: Shape::Box { bounds }, nodes, weights }
    }

    /// Ball domain covering a field support.
    pub fn support_ball(s: &Support<T>, rule: BallRule) -> Self {
        Self::ball(s.center.clone(), s.radius, rule)
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Ball { center, .. } => center.len(),
            Shape::Box { bounds } => bounds.len(),
        }
    }

    /// Coordinate radius function whose level set is the boundary (balls only).
    pub fn radius_of(&self, p: &[T]) -> Result<T> {
        match &self.shape {
            Shape::Ball { center, .. } => {
                Ok(p.iter().zip(center).fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b)).sqrt())
            }
            Shape::Box { .. } => Err(Error::Domain { chart: "box".into(), point: vec![] }),
        }
    }

    /// `∫ F` with respect to the coordinate measure; `F` already includes any density.
    pub fn integrate_coords(&self, f: impl Fn(&[T]) -> Result<T> + Sync) -> Result<T> {
        let vals: Result<Vec<T>> =
            self.nodes.par_iter().zip(self.weights.par_iter()).map(|(p, &w)| Ok(w * f(p)?)).collect();
        Ok(pairwise_sum(&vals?))
    }

    /// `∫ F dv_g`.
    pub fn integrate(&self, g: &MetricField<T>, f: impl Fn(&[T]) -> Result<T> + Sync) -> Result<T> {
        self.integrate_coords(|p| Ok(volume_density(g, p) * f(p)?))
    }

    /// `∫ F dv_g` for a vector of `m` integrands evaluated together.
    pub fn integrate_many(&self, g: &MetricField<T>, m: usize, f: impl Fn(&[T]) -> Result<Vec<T>> + Sync) -> Result<Vec<T>> {
        let vals: Result<Vec<Vec<T>>> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, &w)| {
                let dv = w * volume_density(g, p);
                Ok(f(p)?.into_iter().map(|v| v * dv).collect())
            })
            .collect();
        let vals = vals?;
        Ok((0..m).map(|k| pairwise_sum(&vals.iter().map(|v| v[k]).collect::<Vec<_>>())).collect())
    }

    /// Nodes on the boundary sphere of a ball with coordinate area weights.
    pub fn boundary_nodes(&self, rule: BallRule) -> Result<(Vec<Vec<T>>, Vec<T>)> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let n = center.len();
                let area = radius.powi(n as i32 - 1);
                Ok(sphere_directions::<T>(n, rule)
                    .into_iter()
                    .map(|(d, w)| (center.iter().zip(&d).map(|(&c, &x)| c + *radius * x).collect(), w * area))
                    .unzip())
            }
            Shape::Box { .. } => Err(Error::Domain { chart: "box domain has no smooth boundary".into(), point: vec![] }),
        }
    }

    /// Riemannian volume.
    pub fn volume(&self, g: &MetricField<T>) -> Result<T> {
        self.integrate(g, |_| Ok(T::one()))
    }
}

/// Quadrature on the unit sphere `S^{n−1}`: unit directions with area weights,
/// from the angular part of `rule`.
pub fn sphere_directions<T: Scalar>(n: usize, rule: BallRule) -> Vec<(Vec<T>, T)> {
    let (tx, tw) = gauss_legendre::<T>(rule.polar);
    let pi: T = lit(std::f64::consts::PI);
    let half: T = lit(0.5);
    // directions on S^{n-1}: angles θ_1..θ_{n-2} ∈ (0,π), φ ∈ [0,2π)
    let mut dirs: Vec<(Vec<T>, T)> = vec![(vec![], T::one())];
    // build recursively from the azimuthal circle upward
    let mut circle = Vec::with_capacity(rule.azimuthal);
    for k in 0..rule.azimuthal {
        let phi = (pi + pi) * from_usize::<T>(k) / from_usize::<T>(rule.azimuthal);
        circle.push((vec![phi.cos(), phi.sin()], (pi + pi) / from_usize::<T>(rule.azimuthal)));
    }
    if n >= 2 {
        dirs = circle;
    }
    for level in 3..=n {
        // extend S^{level-2} to S^{level-1} with θ weight sin^{level-2}
        let mut next = Vec::with_capacity(dirs.len() * rule.polar);
        for (t, wt) in tx.iter().zip(&tw) {
            let theta = (*t + T::one()) * half * pi;
            let (s, c) = (theta.sin(), theta.cos());
            let wtheta = *wt * half * pi * s.powi(level as i32 - 2);
            for (d, w) in &dirs {
                let mut v = Vec::with_capacity(level);
                v.push(c);
                v.extend(d.iter().map(|&x| x * s));
                next.push((v, *w * wtheta));
            }
        }
        dirs = next;
    }
    dirs
}

/// `√det g` at `p`.
pub fn volume_density<T: Scalar>(g: &MetricField<T>, p: &[T]) -> T {
    let m = g.value(p);
    let n = m.n;
    let l = crate::linalg::cholesky(&m.data, n);
    match l {
        Ok(l) => (0..n).fold(T::one(), |acc, i| acc * l[i * n + i]),
        Err(_) => T::nan(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Chart;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let (x, w) = gauss_legendre::<f64>(1);
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_ball_volumes() {
        let d3 = Domain::<f64>::ball(vec![0.0; 3], 1.0, BallRule::new(8, 8, 16));
        let v3 = pairwise_sum(&d3.weights);
        assert!((v3 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        let d4 = Domain::<f64>::ball(vec![0.0; 4], 2.0, BallRule::new(8, 12, 16));
        let v4 = pairwise_sum(&d4.weights);
        assert!((v4 - std::f64::consts::PI.powi(2) / 2.0 * 16.0).abs() < 1e-10);
        let layered = Domain::<f64>::ball_layers(vec![0.0; 3], &[0.3, 1.0], BallRule::new(6, 8, 16));
        let v = layered.integrate_coords(|p| Ok(if p.iter().map(|x| x * x).sum::<f64>() < 0.09 { 1.0 } else { 0.0 })).unwrap();
        assert!((v - 4.0 * std::f64::consts::PI * 0.027 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn riemannian_volume_of_scaled_box() {
        let g = MetricField::euclidean(Chart::<f64>::euclidean("r3", 3)).scaled(4.0);
        let d = Domain::boxed(vec![(0.0, 1.0); 3], 4);
        assert!((d.volume(&g).unwrap() - 8.0).abs() < 1e-13);
    }
}
