//! Gauss–Legendre rules and two-dimensional grids under `dA = d²ζ/π`.

use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::Complex64;

/// A one-dimensional quadrature rule on `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl Quadrature1D {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `n`-point Gauss–Legendre rule on `(a, b)`, exact for polynomials of
/// degree `2n − 1`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Quadrature1D> {
    if n == 0 {
        return invalid("Gauss-Legendre rule needs at least one node");
    }
    if !(a < b) {
        return invalid(format!("interval must satisfy a < b, got ({a}, {b})"));
    }
    let (x, w) = legendre_reference(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(Quadrature1D {
        nodes: x.iter().map(|&t| mid + half * t).collect(),
        weights: w.iter().map(|&v| v * half).collect(),
        a,
        b,
    })
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// How the nodes of a [`Grid2D`] were laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    Polar,
    Cartesian,
}

/// Nodes and positive weights for integration against `dA`.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub layout: GridLayout,
}

impl Grid2D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ wᵢ f(ζᵢ)`, failing if any sample is non-finite.
    pub fn integrate(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Complex64> {
        let mut re = Vec::with_capacity(self.len());
        let mut im = Vec::with_capacity(self.len());
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::IntegrationFailure(format!("non-finite sample at {z}")));
            }
            re.push(w * v.re);
            im.push(w * v.im);
        }
        Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)))
    }

    /// Real-valued variant of [`Grid2D::integrate`].
    pub fn integrate_real(&self, f: impl Fn(Complex64) -> f64) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.len());
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(z);
            if !v.is_finite() {
                return Err(Error::IntegrationFailure(format!("non-finite sample at {z}")));
            }
            terms.push(w * v);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Image of the grid under `(x, y) ↦ (cx + a·x, cy + b·y)`.
    pub fn stretched(&self, center: Complex64, a: f64, b: f64) -> Grid2D {
        Grid2D {
            nodes: self.nodes.iter().map(|z| center + Complex64::new(a * z.re, b * z.im)).collect(),
            weights: self.weights.iter().map(|w| w * a * b).collect(),
            layout: self.layout,
        }
    }

    /// Largest distance from `center` to a node.
    pub fn radius_about(&self, center: Complex64) -> f64 {
        self.nodes.iter().map(|z| (z - center).norm()).fold(0.0, f64::max)
    }
}

/// Polar grid on the disk `|ζ| < rmax`: Gauss–Legendre in `r`, equispaced
/// angles. Weights carry `2r dr dθ/(2π)`.
pub fn polar_grid(rmax: f64, nr: usize, ntheta: usize) -> Result<Grid2D> {
    polar_grid_centered(Complex64::new(0.0, 0.0), rmax, nr, ntheta)
}

pub fn polar_grid_centered(center: Complex64, rmax: f64, nr: usize, ntheta: usize) -> Result<Grid2D> {
    annulus_grid(center, 0.0, rmax, nr, ntheta)
}

/// Polar grid on `r0 < |ζ − center| < r1`.
pub fn annulus_grid(center: Complex64, r0: f64, r1: f64, nr: usize, ntheta: usize) -> Result<Grid2D> {
    if nr == 0 || ntheta == 0 {
        return invalid("polar grid needs nonzero radial and angular counts");
    }
    if !(r1 > r0 && r0 >= 0.0) {
        return invalid(format!("polar grid radii must satisfy 0 <= r0 < r1, got ({r0}, {r1})"));
    }
    let radial = gauss_legendre(nr, r0, r1)?;
    let dth = TAU / ntheta as f64;
    let mut nodes = Vec::with_capacity(nr * ntheta);
    let mut weights = Vec::with_capacity(nr * ntheta);
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        for k in 0..ntheta {
            nodes.push(center + Complex64::from_polar(r, k as f64 * dth));
            weights.push(wr * 2.0 * r / ntheta as f64);
        }
    }
    Ok(Grid2D { nodes, weights, layout: GridLayout::Polar })
}

/// Tensor Gauss–Legendre grid on a rectangle.
pub fn cartesian_grid(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Grid2D> {
    let qx = gauss_legendre(nx, x.0, x.1)?;
    let qy = gauss_legendre(ny, y.0, y.1)?;
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut weights = Vec::with_capacity(nx * ny);
    for (&xi, &wx) in qx.nodes.iter().zip(&qx.weights) {
        for (&yi, &wy) in qy.nodes.iter().zip(&qy.weights) {
            nodes.push(Complex64::new(xi, yi));
            weights.push(wx * wy / PI);
        }
    }
    Ok(Grid2D { nodes, weights, layout: GridLayout::Cartesian })
}

/// Pairwise (cascade) summation; deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
