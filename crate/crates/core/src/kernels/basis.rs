use serde::Serialize;

use crate::equilibrium::{droplet_for, Droplet};
use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::quadrature::{gauss_legendre, Grid2D};
use crate::Complex64;

/// Condition number above which the Gram path refuses to add degrees.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
enum Repr {
    /// `φ_k = ζ^k e^{−nQ/2}/√h_k`, stored as `ln h_k`.
    Radial { ln_h: Vec<f64> },
    /// Arnoldi recurrence `ζφ_k = Σ_{j≤k+1} H[j][k] φ_j` started from
    /// `φ_0 = e^{−nQ/2}/β₀`.
    Gram { beta0: f64, hess: Vec<Vec<Complex64>> },
}

/// An orthonormal basis of `Pol_n`, the weighted polynomials `p·e^{−nQ/2}`
/// with `deg p ≤ n−1`.
///
/// Radial potentials use the exact norms `h_k = ∫ r^{2k} e^{−nQ} 2r dr`.
/// Other potentials are orthonormalized on a quadrature grid by an Arnoldi
/// process, which keeps the implicit monomial-to-orthonormal change of basis
/// upper triangular without forming the ill-conditioned monomial Gram matrix.
#[derive(Debug, Clone)]
pub struct WeightedBasis {
    pot: Potential,
    n: usize,
    repr: Repr,
    grid: Option<Grid2D>,
}

/// Values of the basis and of the weighted derivatives `p_k′ e^{−nQ/2}`.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub phi: Vec<Complex64>,
    pub dphi: Vec<Complex64>,
}

impl WeightedBasis {
    /// Builds the basis, choosing the radial path when `Q` is radial.
    pub fn build(pot: &Potential, n: usize) -> Result<Self> {
        if pot.is_radial() {
            Self::build_radial(pot, n)
        } else {
            let grid = default_grid(&droplet_for(pot)?, n)?;
            Self::build_gram(pot, n, grid)
        }
    }

    /// Exact norms by one-dimensional quadrature.
    pub fn build_radial(pot: &Potential, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("basis dimension must be at least 1");
        }
        if !pot.is_radial() {
            return invalid(format!("{} is not radially symmetric", pot.name()));
        }
        let ln_h = (0..n).map(|k| ln_radial_norm(pot, n, k)).collect::<Result<Vec<_>>>()?;
        Ok(WeightedBasis { pot: pot.clone(), n, repr: Repr::Radial { ln_h }, grid: None })
    }

    /// Orthonormalization on `grid`, which must cover the droplet with a
    /// margin of several `1/√n`.
    pub fn build_gram(pot: &Potential, n: usize, grid: Grid2D) -> Result<Self> {
        if n == 0 {
            return invalid("basis dimension must be at least 1");
        }
        let m = grid.len();
        let w = &grid.weights;
        let inner = |u: &[Complex64], v: &[Complex64]| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..m {
                s += u[i] * v[i].conj() * w[i];
            }
            s
        };
        let norm = |u: &[Complex64]| inner(u, u).re.sqrt();

        let mut v0: Vec<Complex64> =
            grid.nodes.iter().map(|&z| Complex64::new((-0.5 * n as f64 * pot.value(z)).exp(), 0.0)).collect();
        let beta0 = norm(&v0);
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::IntegrationFailure("weight has zero mass on the grid".into()));
        }
        v0.iter_mut().for_each(|x| *x /= beta0);
        let mut basis = vec![v0];
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for k in 0..n - 1 {
            let mut u: Vec<Complex64> = basis[k].iter().zip(&grid.nodes).map(|(p, z)| p * z).collect();
            let before = norm(&u);
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for _pass in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let c = inner(&u, q);
                    col[j] += c;
                    u.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let after = norm(&u);
            let condition = (before / after).powi(2);
            if !(condition < CONDITION_CAP) {
                return Err(Error::IllConditioned { condition, max_stable_degree: k });
            }
            col[k + 1] = Complex64::new(after, 0.0);
            u.iter_mut().for_each(|x| *x /= after);
            basis.push(u);
            hess.push(col);
        }
        Ok(WeightedBasis { pot: pot.clone(), n, repr: Repr::Gram { beta0, hess }, grid: Some(grid) })
    }

    /// Dimension of the space, equal to the weight exponent `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.repr, Repr::Radial { .. })
    }

    /// The grid used for orthonormalization, if any.
    pub fn grid(&self) -> Option<&Grid2D> {
        self.grid.as_ref()
    }

    /// `ln h_k` on the radial path.
    pub fn ln_norms(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Radial { ln_h } => Some(ln_h),
            Repr::Gram { .. } => None,
        }
    }

    /// All basis functions `φ_k(ζ)`, `k = 0..n`.
    pub fn eval_all(&self, z: Complex64) -> Vec<Complex64> {
        match &self.repr {
            Repr::Radial { ln_h } => {
                let base = -0.5 * self.n as f64 * self.pot.value(z);
                if z.norm() == 0.0 {
                    let mut out = vec![Complex64::new(0.0, 0.0); self.n];
                    out[0] = Complex64::new((base - 0.5 * ln_h[0]).exp(), 0.0);
                    return out;
                }
                let (lr, th) = (z.norm().ln(), z.arg());
                ln_h.iter()
                    .enumerate()
                    .map(|(k, lh)| Complex64::from_polar((k as f64 * lr + base - 0.5 * lh).exp(), k as f64 * th))
                    .collect()
            }
            Repr::Gram { .. } => self.eval_gram(z, false).phi,
        }
    }

    /// Basis values with weighted derivatives `p_k′(ζ) e^{−nQ(ζ)/2}`.
    pub fn eval_with_derivative(&self, z: Complex64) -> BasisValues {
        match &self.repr {
            Repr::Radial { ln_h } => {
                let phi = self.eval_all(z);
                let base = -0.5 * self.n as f64 * self.pot.value(z);
                let dphi = (0..self.n)
                    .map(|k| {
                        if k == 0 {
                            Complex64::new(0.0, 0.0)
                        } else if z.norm() == 0.0 {
                            let v = if k == 1 { (base - 0.5 * ln_h[1]).exp() } else { 0.0 };
                            Complex64::new(v, 0.0)
                        } else {
                            let mag = ((k - 1) as f64 * z.norm().ln() + base - 0.5 * ln_h[k]).exp() * k as f64;
                            Complex64::from_polar(mag, (k - 1) as f64 * z.arg())
                        }
                    })
                    .collect();
                BasisValues { phi, dphi }
            }
            Repr::Gram { .. } => self.eval_gram(z, true),
        }
    }

    fn eval_gram(&self, z: Complex64, derivative: bool) -> BasisValues {
        let Repr::Gram { beta0, hess } = &self.repr else { unreachable!() };
        let n = self.n;
        let mut phi = Vec::with_capacity(n);
        let mut dphi = Vec::with_capacity(if derivative { n } else { 0 });
        phi.push(Complex64::new((-0.5 * n as f64 * self.pot.value(z)).exp() / beta0, 0.0));
        if derivative {
            dphi.push(Complex64::new(0.0, 0.0));
        }
        for (k, col) in hess.iter().enumerate() {
            let mut u = z * phi[k];
            let mut du = if derivative { phi[k] + z * dphi[k] } else { Complex64::new(0.0, 0.0) };
            for j in 0..=k {
                u -= col[j] * phi[j];
                if derivative {
                    du -= col[j] * dphi[j];
                }
            }
            let h = col[k + 1].re;
            phi.push(u / h);
            if derivative {
                dphi.push(du / h);
            }
        }
        BasisValues { phi, dphi }
    }

    /// `max |⟨φ_j, φ_k⟩ − δ_jk|` with inner products taken on `grid`.
    pub fn orthonormality_defect(&self, grid: &Grid2D) -> f64 {
        let n = self.n;
        let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
        for (&z, &w) in grid.nodes.iter().zip(&grid.weights) {
            let v = self.eval_all(z);
            for j in 0..n {
                let a = v[j] * w;
                for k in 0..n {
                    gram[j * n + k] += a * v[k].conj();
                }
            }
        }
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((gram[j * n + k] - target).norm());
            }
        }
        worst
    }
}

/// Grid on the droplet dilated by `5/√n`, resolving angular frequencies up
/// to degree `2n`.
pub fn default_grid(droplet: &Droplet, n: usize) -> Result<Grid2D> {
    let margin = 5.0 / (n as f64).sqrt();
    droplet.dilated_grid(margin, 200, (4 * n + 64).max(256))
}

/// Resolution report of a [`WeightedBasis`] build, for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    pub n: usize,
    pub radial: bool,
    pub grid_nodes: usize,
}

impl From<&WeightedBasis> for BasisSummary {
    fn from(b: &WeightedBasis) -> Self {
        BasisSummary { n: b.n, radial: b.is_radial(), grid_nodes: b.grid.as_ref().map_or(0, |g| g.len()) }
    }
}

/// `ln ∫₀^∞ r^{2k} e^{−nq(r)} 2r dr`, integrating over a window centred on
/// the peak of the integrand.
fn ln_radial_norm(pot: &Potential, n: usize, k: usize) -> Result<f64> {
    let nf = n as f64;
    let a = (2 * k + 1) as f64;
    let q = |r: f64| pot.value(Complex64::new(r, 0.0));
    let dq = |r: f64| pot.grad_unchecked(Complex64::new(r, 0.0)).re;
    let g = |r: f64| a * r.ln() - nf * q(r);
    let dg = |r: f64| a / r - nf * dq(r);

    let mut hi = 1.0;
    let mut guard = 0;
    while dg(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::IntegrationFailure(format!("no peak for the radial moment k={k}")));
        }
    }
    let mut lo = hi / 2.0;
    while dg(lo) <= 0.0 && lo > 1e-300 {
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dg(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let peak = 0.5 * (lo + hi);
    let d2q = 4.0 * pot.laplacian_unchecked(Complex64::new(peak, 0.0)) - dq(peak) / peak;
    let curvature = a / (peak * peak) + nf * d2q;
    let sigma = if curvature > 0.0 { 1.0 / curvature.sqrt() } else { peak };
    let g0 = g(peak);

    let mut left = peak;
    while left > 0.0 && g(left) - g0 > -80.0 {
        left = (left - sigma).max(0.0);
    }
    let mut right = peak;
    while g(right) - g0 > -80.0 {
        right += sigma;
    }
    let panels = (((right - left) / sigma).ceil() as usize).clamp(4, 400);
    let h = (right - left) / panels as f64;
    let rule = gauss_legendre(20, 0.0, 1.0)?;
    let mut sum = 0.0;
    for p in 0..panels {
        let x0 = left + p as f64 * h;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let r = x0 + t * h;
            sum += w * h * (g(r) - g0).exp();
        }
    }
    Ok(g0 + sum.ln() + 2f64.ln())
}
