use std::sync::Arc;

use rand::RngCore;

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Cartesian product of manifolds with the sum metric.
///
/// Coordinates are a single column holding each component's column-major
/// entries back to back.
#[derive(Debug, Clone)]
pub struct ProductManifold {
    parts: Vec<Arc<dyn Manifold>>,
    offsets: Vec<usize>,
}

impl ProductManifold {
    pub fn new(parts: Vec<Arc<dyn Manifold>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::contract("product of an empty list of manifolds"));
        }
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for p in &parts {
            let (r, c) = p.ambient_shape();
            total += r * c;
            offsets.push(total);
        }
        Ok(Self { parts, offsets })
    }

    pub fn parts(&self) -> &[Arc<dyn Manifold>] {
        &self.parts
    }

    /// Splits product coordinates into per-component matrices.
    pub fn split(&self, x: &Mat) -> Vec<Mat> {
        self.parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (r, c) = p.ambient_shape();
                let slice = &x.as_slice()[self.offsets[i]..self.offsets[i + 1]];
                Mat::from_column_slice(r, c, slice)
            })
            .collect()
    }

    pub fn join(&self, parts: &[Mat]) -> Mat {
        let mut out = Vec::with_capacity(self.total());
        for p in parts {
            out.extend_from_slice(p.as_slice());
        }
        Mat::from_vec(out.len(), 1, out)
    }

    fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    fn map1(&self, x: &Mat, f: impl Fn(&dyn Manifold, &Mat) -> Mat) -> Mat {
        let xs = self.split(x);
        let out: Vec<Mat> = self.parts.iter().zip(&xs).map(|(p, xi)| f(p.as_ref(), xi)).collect();
        self.join(&out)
    }

    fn map2(&self, x: &Mat, u: &Mat, f: impl Fn(&dyn Manifold, &Mat, &Mat) -> Result<Mat>) -> Result<Mat> {
        let xs = self.split(x);
        let us = self.split(u);
        let out = self
            .parts
            .iter()
            .zip(xs.iter().zip(&us))
            .map(|(p, (xi, ui))| f(p.as_ref(), xi, ui))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.join(&out))
    }

    fn map3(&self, a: &Mat, b: &Mat, c: &Mat, f: impl Fn(&dyn Manifold, &Mat, &Mat, &Mat) -> Result<Mat>) -> Result<Mat> {
        let (a, b, c) = (self.split(a), self.split(b), self.split(c));
        let out = self
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| f(p.as_ref(), &a[i], &b[i], &c[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.join(&out))
    }
}

impl Manifold for ProductManifold {
    fn id(&self) -> String {
        let names: Vec<String> = self.parts.iter().map(|p| p.id()).collect();
        format!("product({})", names.join(","))
    }

    fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.dim()).sum()
    }

    fn ambient_shape(&self) -> (usize, usize) {
        (self.total(), 1)
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        if x.shape() != self.ambient_shape() {
            return Err(Error::contract(format!("product point has shape {:?}", x.shape())));
        }
        for (p, xi) in self.parts.iter().zip(self.split(x)) {
            p.check_point(&xi)?;
        }
        Ok(())
    }

    fn check_tangent(&self, x: &Mat, u: &Mat) -> Result<()> {
        if u.shape() != self.ambient_shape() {
            return Err(Error::contract(format!("product tangent has shape {:?}", u.shape())));
        }
        for (p, (xi, ui)) in self.parts.iter().zip(self.split(x).iter().zip(self.split(u))) {
            p.check_tangent(xi, &ui)?;
        }
        Ok(())
    }

    fn inner(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        let (xs, us, vs) = (self.split(x), self.split(u), self.split(v));
        self.parts
            .iter()
            .enumerate()
            .map(|(i, p)| p.inner(&xs[i], &us[i], &vs[i]))
            .sum()
    }

    fn has_exp(&self) -> bool {
        self.parts.iter().all(|p| p.has_exp())
    }

    fn exp(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        self.map2(x, u, |p, x, u| p.exp(x, u))
    }

    fn log(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        self.map2(x, y, |p, x, y| p.log(x, y))
    }

    fn retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        self.map2(x, u, |p, x, u| p.retract(x, u))
    }

    fn exp_or_retract(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        self.map2(x, u, |p, x, u| p.exp_or_retract(x, u))
    }

    fn transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        self.map3(from, to, u, |p, a, b, u| p.transport(a, b, u))
    }

    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        self.map3(from, to, u, |p, a, b, u| p.vector_transport(a, b, u))
    }

    fn transport_is_isometric(&self) -> bool {
        self.parts.iter().all(|p| p.transport_is_isometric())
    }

    fn proj(&self, x: &Mat, a: &Mat) -> Mat {
        let (xs, as_) = (self.split(x), self.split(a));
        let out: Vec<Mat> = self.parts.iter().enumerate().map(|(i, p)| p.proj(&xs[i], &as_[i])).collect();
        self.join(&out)
    }

    fn proj_adjoint(&self, from: &Mat, to: &Mat, v: &Mat) -> Mat {
        let (fs, ts, vs) = (self.split(from), self.split(to), self.split(v));
        let out: Vec<Mat> = self
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| p.proj_adjoint(&fs[i], &ts[i], &vs[i]))
            .collect();
        self.join(&out)
    }

    fn egrad_to_rgrad(&self, x: &Mat, eg: &Mat) -> Mat {
        let (xs, gs) = (self.split(x), self.split(eg));
        let out: Vec<Mat> = self.parts.iter().enumerate().map(|(i, p)| p.egrad_to_rgrad(&xs[i], &gs[i])).collect();
        self.join(&out)
    }

    fn ehess_to_rhess(&self, x: &Mat, eg: &Mat, ehess_u: &Mat, u: &Mat) -> Result<Mat> {
        let (xs, gs, hs, us) = (self.split(x), self.split(eg), self.split(ehess_u), self.split(u));
        let out = self
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| p.ehess_to_rhess(&xs[i], &gs[i], &hs[i], &us[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.join(&out))
    }

    fn rand_point(&self, rng: &mut dyn RngCore) -> Mat {
        let out: Vec<Mat> = self.parts.iter().map(|p| p.rand_point(rng)).collect();
        self.join(&out)
    }

    fn rand_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let xs = self.split(x);
        let out: Vec<Mat> = self.parts.iter().zip(&xs).map(|(p, xi)| p.rand_tangent(xi, rng)).collect();
        let u = self.join(&out);
        let n = self.norm(x, &u);
        u / n
    }

    fn normalize(&self, x: &Mat) -> Result<Mat> {
        let xs = self.split(x);
        let out = self
            .parts
            .iter()
            .zip(&xs)
            .map(|(p, xi)| p.normalize(xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.join(&out))
    }

    fn zero_tangent(&self, x: &Mat) -> Mat {
        self.map1(x, |p, xi| p.zero_tangent(xi))
    }
}
