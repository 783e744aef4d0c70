//! External potentials `Q` together with their gradient and Laplacian.
//!
//! Built-in potentials are finite on the whole plane. A [`Potential`] may
//! also wrap a user-supplied closure; its gradient and Laplacian then fall
//! back to central finite differences with step [`FD_STEP`] unless closed
//! forms are provided.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Complex64;

/// Finite-difference step used for user potentials without closed forms.
pub const FD_STEP: f64 = 1e-5;

type ScalarField = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
type Region = Arc<dyn Fn(Complex64) -> bool + Send + Sync>;

/// Serializable description of a built-in potential, as it appears in
/// configuration files: `{kind = "ellipse", t = 0.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `Q = |ζ|²`.
    Ginibre,
    /// `Q = |ζ|^{2p}` with `p ≥ 1`.
    MittagLeffler { p: f64 },
    /// `Q = |ζ|² − t·Re(ζ²)` with `0 < t < 1`.
    Ellipse { t: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match *self {
            PotentialSpec::Ginibre => Ok(Potential::ginibre()),
            PotentialSpec::MittagLeffler { p } => Potential::mittag_leffler(p),
            PotentialSpec::Ellipse { t } => Potential::ellipse(t),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Ginibre => write!(f, "ginibre"),
            PotentialSpec::MittagLeffler { p } => write!(f, "mittag_leffler(p={p})"),
            PotentialSpec::Ellipse { t } => write!(f, "ellipse(t={t})"),
        }
    }
}

/// A potential given by closures. Only `value` is required.
#[derive(Clone)]
pub struct CustomPotential {
    name: String,
    value: ScalarField,
    gradient: Option<VectorField>,
    laplacian: Option<ScalarField>,
    domain: Option<Region>,
    radial: bool,
}

impl CustomPotential {
    pub fn new(name: impl Into<String>, value: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        CustomPotential {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
            laplacian: None,
            domain: None,
            radial: false,
        }
    }

    /// Closed-form gradient `(∂Q/∂x, ∂Q/∂y)` encoded as `x + iy`.
    pub fn with_gradient(mut self, g: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Closed-form Laplacian, in the quarter-Laplacian convention.
    pub fn with_laplacian(mut self, l: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        self.laplacian = Some(Arc::new(l));
        self
    }

    /// Restricts the finite region `Σ₀`; outside it `Q = +∞`.
    pub fn with_domain(mut self, d: impl Fn(Complex64) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(d));
        self
    }

    /// Declares the potential to depend on `|ζ|` only.
    pub fn radial(mut self) -> Self {
        self.radial = true;
        self
    }
}

#[derive(Clone)]
enum Kind {
    Ginibre,
    MittagLeffler { p: f64 },
    Ellipse { t: f64 },
    Custom(CustomPotential),
}

/// An external potential `Q`. Immutable and cheap to clone.
#[derive(Clone)]
pub struct Potential {
    kind: Kind,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential({})", self.name())
    }
}

impl Potential {
    pub fn ginibre() -> Self {
        Potential { kind: Kind::Ginibre }
    }

    pub fn mittag_leffler(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return invalid(format!("Mittag-Leffler exponent must satisfy p >= 1, got {p}"));
        }
        Ok(Potential { kind: Kind::MittagLeffler { p } })
    }

    pub fn ellipse(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return invalid(format!("ellipse parameter must lie in (0,1), got {t}"));
        }
        Ok(Potential { kind: Kind::Ellipse { t } })
    }

    pub fn custom(c: CustomPotential) -> Self {
        Potential { kind: Kind::Custom(c) }
    }

    /// The serializable spec, for built-ins.
    pub fn spec(&self) -> Option<PotentialSpec> {
        match self.kind {
            Kind::Ginibre => Some(PotentialSpec::Ginibre),
            Kind::MittagLeffler { p } => Some(PotentialSpec::MittagLeffler { p }),
            Kind::Ellipse { t } => Some(PotentialSpec::Ellipse { t }),
            Kind::Custom(_) => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Custom(c) => c.name.clone(),
            _ => self.spec().map(|s| s.to_string()).unwrap_or_default(),
        }
    }

    /// True when `Q` depends only on `|ζ|`.
    pub fn is_radial(&self) -> bool {
        match &self.kind {
            Kind::Ginibre | Kind::MittagLeffler { .. } => true,
            Kind::Ellipse { .. } => false,
            Kind::Custom(c) => c.radial,
        }
    }

    /// True when `ΔQ` is the same constant everywhere (Ginibre, ellipse).
    pub fn constant_laplacian(&self) -> Option<f64> {
        match self.kind {
            Kind::Ginibre | Kind::Ellipse { .. } => Some(1.0),
            Kind::MittagLeffler { p: 1.0 } => Some(1.0),
            _ => None,
        }
    }

    pub fn in_domain(&self, z: Complex64) -> bool {
        match &self.kind {
            Kind::Custom(c) => c.domain.as_ref().map_or(true, |d| d(z)),
            _ => true,
        }
    }

    /// `Q(ζ)`, or `+∞` outside the finite region `Σ₀`.
    #[inline]
    pub fn value(&self, z: Complex64) -> f64 {
        match &self.kind {
            Kind::Ginibre => z.norm_sqr(),
            Kind::MittagLeffler { p } => z.norm_sqr().powf(*p),
            Kind::Ellipse { t } => z.norm_sqr() - t * (z.re * z.re - z.im * z.im),
            Kind::Custom(c) => {
                if self.in_domain(z) {
                    (c.value)(z)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `Q(ζ)` with an explicit domain check.
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        self.check_domain(z)?;
        Ok(self.value(z))
    }

    /// Gradient `(∂Q/∂x, ∂Q/∂y)` encoded as `∂Q/∂x + i ∂Q/∂y`.
    pub fn grad(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z)?;
        Ok(self.grad_unchecked(z))
    }

    #[inline]
    pub(crate) fn grad_unchecked(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            Kind::Ginibre => 2.0 * z,
            Kind::MittagLeffler { p } => {
                let r2 = z.norm_sqr();
                if r2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    z * (2.0 * p * r2.powf(p - 1.0))
                }
            }
            Kind::Ellipse { t } => Complex64::new(2.0 * (1.0 - t) * z.re, 2.0 * (1.0 + t) * z.im),
            Kind::Custom(c) => match &c.gradient {
                Some(g) => g(z),
                None => {
                    let h = FD_STEP;
                    let dx = ((c.value)(z + h) - (c.value)(z - h)) / (2.0 * h);
                    let ih = Complex64::new(0.0, h);
                    let dy = ((c.value)(z + ih) - (c.value)(z - ih)) / (2.0 * h);
                    Complex64::new(dx, dy)
                }
            },
        }
    }

    /// The holomorphic derivative `∂Q = ½(∂Q/∂x − i ∂Q/∂y)`.
    #[inline]
    pub fn d_holomorphic(&self, z: Complex64) -> Complex64 {
        self.grad_unchecked(z).conj() * 0.5
    }

    /// `ΔQ(ζ)` with `Δ = ¼(∂²/∂x² + ∂²/∂y²)`.
    pub fn laplacian(&self, z: Complex64) -> Result<f64> {
        self.check_domain(z)?;
        Ok(self.laplacian_unchecked(z))
    }

    #[inline]
    pub(crate) fn laplacian_unchecked(&self, z: Complex64) -> f64 {
        match &self.kind {
            Kind::Ginibre | Kind::Ellipse { .. } => 1.0,
            Kind::MittagLeffler { p } => {
                if *p == 1.0 {
                    1.0
                } else {
                    p * p * z.norm_sqr().powf(p - 1.0)
                }
            }
            Kind::Custom(c) => match &c.laplacian {
                Some(l) => l(z),
                None => {
                    let h = FD_STEP;
                    let ih = Complex64::new(0.0, h);
                    let q = &c.value;
                    (q(z + h) + q(z - h) + q(z + ih) + q(z - ih) - 4.0 * q(z)) / (4.0 * h * h)
                }
            },
        }
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if self.in_domain(z) && z.re.is_finite() && z.im.is_finite() {
            Ok(())
        } else {
            Err(Error::OutOfDomain { re: z.re, im: z.im })
        }
    }

    /// Empirical check of the growth condition `liminf Q/log|ζ|² > 1`.
    ///
    /// At each radius the ratio `Q(ζ)/log|ζ|²` is minimized over
    /// `angles` equispaced directions. The check passes when the minimum at
    /// the largest radius exceeds `1 + margin`.
    pub fn growth_check(&self, radii: &[f64], angles: usize, margin: f64) -> Result<GrowthReport> {
        if radii.is_empty() || angles == 0 {
            return invalid("growth check needs at least one radius and one angle");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 2.0 {
            return invalid("radii must be increasing and at least 2");
        }
        let ratios: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let log_r2 = 2.0 * r.ln();
                (0..angles)
                    .map(|k| {
                        let th = std::f64::consts::TAU * k as f64 / angles as f64;
                        self.value(Complex64::from_polar(r, th)) / log_r2
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let passed = *ratios.last().unwrap() > 1.0 + margin;
        Ok(GrowthReport { radii: radii.to_vec(), min_ratios: ratios, margin, passed })
    }
}

impl From<PotentialSpec> for Potential {
    /// Panics on out-of-range parameters; use [`PotentialSpec::build`] to
    /// validate instead.
    fn from(spec: PotentialSpec) -> Self {
        spec.build().expect("invalid potential spec")
    }
}

/// Result of [`Potential::growth_check`].
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    pub min_ratios: Vec<f64>,
    pub margin: f64,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b): (f64, f64) = ($a, $b);
                assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
            }};
        }
        pub(crate) use assert_close;
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn built_in_values() {
        assert_close!(Potential::ginibre().eval(c(1.0, 0.0)).unwrap(), 1.0, 0.0);
        assert_close!(Potential::ellipse(0.5).unwrap().eval(c(1.0, 0.0)).unwrap(), 0.5, 1e-15);
        assert_close!(Potential::mittag_leffler(2.0).unwrap().eval(c(0.0, 0.0)).unwrap(), 0.0, 0.0);
    }

    #[test]
    fn built_in_gradients() {
        let g = Potential::ginibre();
        assert_eq!(g.grad(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(g.grad(c(1.0, 0.0)).unwrap(), c(2.0, 0.0));
        let e = Potential::ellipse(0.5).unwrap();
        let ge = e.grad(c(0.0, 1.0)).unwrap();
        assert_close!(ge.re, 0.0, 1e-15);
        assert_close!(ge.im, 3.0, 1e-15);
        // finite-difference cross-check of the ellipse value
        let h = 1e-6;
        let z = c(0.0, 1.0);
        let fd = (e.value(z + c(0.0, h)) - e.value(z - c(0.0, h))) / (2.0 * h);
        assert_close!(fd, 3.0, 1e-8);
    }

    #[test]
    fn built_in_laplacians() {
        assert_eq!(Potential::ginibre().laplacian(c(3.0, -2.0)).unwrap(), 1.0);
        assert_eq!(Potential::ellipse(0.7).unwrap().laplacian(c(2.0, 1.0)).unwrap(), 1.0);
        let ml = Potential::mittag_leffler(2.0).unwrap();
        let z = Complex64::from_polar(1.0, 0.3);
        assert_close!(ml.laplacian(z).unwrap(), 4.0, 1e-14);
        // five-point finite-difference Laplacian
        let h = 1e-4;
        let ih = c(0.0, h);
        let fd = (ml.value(z + h) + ml.value(z - h) + ml.value(z + ih) + ml.value(z - ih) - 4.0 * ml.value(z))
            / (4.0 * h * h);
        assert_close!(fd, 4.0, 1e-5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Potential::ellipse(1.0).is_err());
        assert!(Potential::ellipse(0.0).is_err());
        assert!(Potential::mittag_leffler(0.5).is_err());
    }

    #[test]
    fn custom_domain_violation() {
        let p = Potential::custom(CustomPotential::new("half-plane", |z| z.norm_sqr()).with_domain(|z| z.re > -1.0));
        assert!(matches!(p.eval(c(-2.0, 0.0)), Err(Error::OutOfDomain { .. })));
        assert_eq!(p.value(c(-2.0, 0.0)), f64::INFINITY);
        assert_close!(p.eval(c(1.0, 1.0)).unwrap(), 2.0, 0.0);
    }

    #[test]
    fn custom_falls_back_to_finite_differences() {
        let p = Potential::custom(CustomPotential::new("quartic", |z| z.norm_sqr() * z.norm_sqr()));
        let z = c(0.6, -0.3);
        let g = p.grad(z).unwrap();
        let exact = z * (4.0 * z.norm_sqr());
        assert!((g - exact).norm() < 1e-8);
        assert_close!(p.laplacian(z).unwrap(), 4.0 * z.norm_sqr(), 1e-4);
    }

    #[test]
    fn growth() {
        let g = Potential::ginibre().growth_check(&[10.0, 100.0], 64, 0.1).unwrap();
        assert!(g.passed);
        assert_close!(g.min_ratios[0], 100.0 / (2.0 * 10f64.ln()), 1e-12);
        let e = Potential::ellipse(0.99).unwrap().growth_check(&[10.0, 100.0], 256, 0.1).unwrap();
        assert!(e.passed);
        // min over angle of (1 - t cos 2θ) r² / (2 log r) is attained at θ = 0
        assert_close!(e.min_ratios[1], 0.01 * 1e4 / (2.0 * 100f64.ln()), 1e-9);
        let log = Potential::custom(CustomPotential::new("log", |z| z.norm_sqr().ln()));
        let r = log.growth_check(&[10.0], 16, 0.01).unwrap();
        assert!(!r.passed);
        assert_close!(r.min_ratios[0], 1.0, 1e-12);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = PotentialSpec::Ellipse { t: 0.5 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"ellipse","t":0.5}"#);
        assert_eq!(serde_json::from_str::<PotentialSpec>(&j).unwrap(), s);
    }
}
