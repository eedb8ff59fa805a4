//! Jacobi θ₁, its logarithmic derivative ρ, the Weierstrass ℘ function at
//! three period scalings, and the Lax kernels `x`, `y` with their twisted
//! partners.
//!
//! Every evaluation reduces its argument into the fundamental cell
//! `|Re r| ≤ 1/2`, `|Im r| ≤ Im(modulus)/2` and carries the exact
//! quasi-periodicity factor separately, so large imaginary parts never
//! overflow intermediate sums.

mod identities;

pub use identities::{
    const_term, const_term_pair, identity_check, identity_residual, square_constant, Identity, IdentityCheck,
};

use core::f64::consts::PI;

use num_complex::ComplexFloat;
use num_traits::{Float, Zero};

use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Radius around lattice points inside which ρ, ℘ and the kernels refuse to
/// evaluate.
pub const POLE_GUARD: f64 = 1e-6;

/// Stopping rule for theta series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    /// A term smaller than `rel_tol` times the running sum of term
    /// magnitudes ends the summation.
    pub rel_tol: f64,
    pub max_index: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { rel_tol: 1e-18, max_index: 200 }
    }
}

/// Which modulus a theta function is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModulusScale {
    /// τ
    Base,
    /// 2τ
    Double,
    /// τ/2
    Half,
}

/// Primitive periods of ℘: `(1, τ)`, `(1/2, τ)` or `(2, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PeriodScale {
    Full,
    Half,
    Double,
}

/// Which Lax kernel: `x`, `x^(1/2)` or `x^(2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    Half,
    Double,
}

impl Variant {
    /// The ℘ function whose lattice the kernel's `u`-poles live on.
    pub fn period_scale(self) -> PeriodScale {
        match self {
            Variant::Plain => PeriodScale::Full,
            Variant::Half => PeriodScale::Half,
            Variant::Double => PeriodScale::Double,
        }
    }
}

/// θ₁′(0) and θ₁‴(0) at one modulus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaConstants {
    pub modulus: C64,
    pub nome: C64,
    pub d1: C64,
    pub d3: C64,
}

impl ThetaConstants {
    /// θ₁‴(0)/(3θ₁′(0)), the linear coefficient of ρ at the origin.
    pub fn rho_slope(&self) -> C64 {
        self.d3 / (3.0 * self.d1)
    }
}

/// Evaluation environment for all special functions at a fixed modulus τ.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticContext {
    tau: C64,
    trunc: Truncation,
    consts: [ThetaConstants; 3],
}

/// θ₁ and its first three derivatives at a reduced argument, with the
/// quasi-periodicity factor `sign · exp(log)` and the shift `c = −2πin`
/// that ρ picks up.
#[derive(Clone, Copy, Debug)]
struct Jet {
    reduced: C64,
    lattice: C64,
    sign: f64,
    log: C64,
    shift: C64,
    d: [C64; 4],
}

impl Jet {
    fn guard(&self, scale: C64) -> Result<()> {
        if self.reduced.norm() < POLE_GUARD {
            Err(Error::Pole { nearest: self.lattice * scale })
        } else {
            Ok(())
        }
    }

    fn rho(&self) -> C64 {
        self.d[1] / self.d[0] + self.shift
    }

    /// (ρ′, ρ″), which are lattice periodic.
    fn rho_derivs(&self) -> (C64, C64) {
        let r1 = self.d[1] / self.d[0];
        let r2 = self.d[2] / self.d[0];
        let r3 = self.d[3] / self.d[0];
        (r2 - r1 * r1, r3 - 3.0 * r1 * r2 + 2.0 * r1 * r1 * r1)
    }

    /// θ₁ and θ₁′ divided by the common factor `sign · exp(log)`.
    fn scaled01(&self) -> (C64, C64) {
        (self.d[0], self.d[1] + self.shift * self.d[0])
    }
}

fn check_finite(z: C64) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn round_i64(x: f64) -> i64 {
    Float::round(x) as i64
}

impl EllipticContext {
    /// Context with the default truncation policy.
    pub fn new(tau: C64) -> Result<Self> {
        Self::with_truncation(tau, Truncation::default())
    }

    pub fn with_truncation(tau: C64, trunc: Truncation) -> Result<Self> {
        check_finite(tau)?;
        if tau.im <= 0.0 {
            return Err(Error::Modulus(tau));
        }
        let mut consts = [ThetaConstants { modulus: tau, nome: C64::zero(), d1: C64::zero(), d3: C64::zero() }; 3];
        for (slot, modulus) in consts.iter_mut().zip([tau, 2.0 * tau, 0.5 * tau]) {
            let nome = (I * PI * modulus).exp();
            if nome.norm() >= 1.0 {
                return Err(Error::Modulus(tau));
            }
            let d = series(C64::zero(), modulus, &trunc)?;
            if d[2].norm() > 1e-12 * d[1].norm() {
                return Err(Error::Modulus(tau));
            }
            *slot = ThetaConstants { modulus, nome, d1: d[1], d3: d[3] };
        }
        Ok(EllipticContext { tau, trunc, consts })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    /// exp(iπτ)
    pub fn nome(&self) -> C64 {
        self.consts[0].nome
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn constants(&self, scale: ModulusScale) -> &ThetaConstants {
        &self.consts[scale as usize]
    }

    /// `[0, ω₁, ω₂, ω₃] = [0, 1/2, (1+τ)/2, τ/2]`.
    pub fn half_periods(&self) -> [C64; 4] {
        [C64::zero(), C64::new(0.5, 0.0), 0.5 * (1.0 + self.tau), 0.5 * self.tau]
    }

    fn jet(&self, w: C64, scale: ModulusScale) -> Result<Jet> {
        check_finite(w)?;
        let m = self.consts[scale as usize].modulus;
        let n = round_i64(w.im / m.im);
        let shifted = w - (n as f64) * m;
        let k = round_i64(shifted.re);
        let r = shifted - k as f64;
        let nf = n as f64;
        let d = series(r, m, &self.trunc)?;
        Ok(Jet {
            reduced: r,
            lattice: C64::new(k as f64, 0.0) + nf * m,
            sign: if (k + n) % 2 == 0 { 1.0 } else { -1.0 },
            log: -I * PI * nf * nf * m - 2.0 * PI * I * nf * r,
            shift: -2.0 * PI * I * nf,
            d,
        })
    }

    /// θ₁ derivative of the given order (0..=3) at modulus τ, 2τ or τ/2.
    pub fn theta1(&self, u: C64, order: usize, scale: ModulusScale) -> Result<C64> {
        if order > 3 {
            return Err(Error::Model(alloc::format!("theta derivative order {order} > 3")));
        }
        let j = self.jet(u, scale)?;
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        let mut acc = C64::zero();
        for i in 0..=order {
            acc += binom[order][i] * j.shift.powi((order - i) as i32) * j.d[i];
        }
        Ok(j.sign * j.log.exp() * acc)
    }

    /// ρ = θ₁′/θ₁.
    pub fn rho(&self, u: C64, scale: ModulusScale) -> Result<C64> {
        let j = self.jet(u, scale)?;
        j.guard(C64::new(1.0, 0.0))?;
        Ok(j.rho())
    }

    /// ρ and ρ′.
    pub fn rho_with_derivative(&self, u: C64, scale: ModulusScale) -> Result<(C64, C64)> {
        let j = self.jet(u, scale)?;
        j.guard(C64::new(1.0, 0.0))?;
        Ok((j.rho(), j.rho_derivs().0))
    }

    fn wp_base(&self, u: C64, scale: ModulusScale, unscale: f64) -> Result<(C64, C64)> {
        let j = self.jet(u, scale)?;
        j.guard(C64::new(unscale, 0.0))?;
        let (r1, r2) = j.rho_derivs();
        Ok((-r1 + self.consts[scale as usize].rho_slope(), -r2))
    }

    /// ℘ and ℘′ with the given primitive periods.
    pub fn wp_pair(&self, u: C64, scale: PeriodScale) -> Result<(C64, C64)> {
        match scale {
            PeriodScale::Full => self.wp_base(u, ModulusScale::Base, 1.0),
            PeriodScale::Half => {
                let (w, d) = self.wp_base(2.0 * u, ModulusScale::Double, 0.5)?;
                Ok((4.0 * w, 8.0 * d))
            }
            PeriodScale::Double => {
                let (w, d) = self.wp_base(0.5 * u, ModulusScale::Half, 2.0)?;
                Ok((0.25 * w, 0.125 * d))
            }
        }
    }

    /// ℘ (order 0) or ℘′ (order 1).
    pub fn wp(&self, u: C64, scale: PeriodScale, order: usize) -> Result<C64> {
        let (w, d) = self.wp_pair(u, scale)?;
        match order {
            0 => Ok(w),
            1 => Ok(d),
            _ => Err(Error::Model(alloc::format!("wp derivative order {order} > 1"))),
        }
    }

    fn xy_base(&self, u: C64, z: C64, scale: ModulusScale, unscale: f64) -> Result<(C64, C64)> {
        let ju = self.jet(u, scale)?;
        ju.guard(C64::new(unscale, 0.0))?;
        let jz = self.jet(z, scale)?;
        jz.guard(C64::new(1.0, 0.0))?;
        let jd = self.jet(z - u, scale)?;
        let (tu, tu1) = ju.scaled01();
        let (tz, _) = jz.scaled01();
        let (td, td1) = jd.scaled01();
        let k = jd.sign * ju.sign * jz.sign * (jd.log - ju.log - jz.log).exp() * self.consts[scale as usize].d1
            / (tz * tu);
        let rho_u = tu1 / tu;
        Ok((k * td, -k * (td * rho_u + td1)))
    }

    /// The kernel `x(u, z)` and its `u`-derivative `y`.
    ///
    /// `Half` gives `x^(1/2)(u,z) = 2x(2u,z|2τ)`, `y^(1/2) = 4y(2u,z|2τ)`;
    /// `Double` gives `x^(2)(u,z) = x(u/2,z|τ/2)/2`, `y^(2) = y(u/2,z|τ/2)/4`.
    pub fn xy(&self, u: C64, z: C64, variant: Variant) -> Result<(C64, C64)> {
        match variant {
            Variant::Plain => self.xy_base(u, z, ModulusScale::Base, 1.0),
            Variant::Half => {
                let (x, y) = self.xy_base(2.0 * u, z, ModulusScale::Double, 0.5)?;
                Ok((2.0 * x, 4.0 * y))
            }
            Variant::Double => {
                let (x, y) = self.xy_base(0.5 * u, z, ModulusScale::Half, 2.0)?;
                Ok((0.5 * x, 0.25 * y))
            }
        }
    }

    pub fn x(&self, u: C64, z: C64, variant: Variant) -> Result<C64> {
        Ok(self.xy(u, z, variant)?.0)
    }

    /// σ(u, z) = −x(u, z).
    pub fn sigma(&self, u: C64, z: C64) -> Result<C64> {
        Ok(-self.x(u, z, Variant::Plain)?)
    }
}

/// Four-point cross stencil in the complex plane for a holomorphic
/// function: `(f(+h) − f(−h) − i(f(+ih) − f(−ih)))/4h`, fourth order.
fn cross_derivative(f: impl Fn(C64) -> Result<C64>, h: f64) -> Result<C64> {
    let hc = C64::new(h, 0.0);
    let hi = C64::new(0.0, h);
    Ok((f(hc)? - f(-hc)? - I * (f(hi)? - f(-hi)?)) / (4.0 * h))
}

/// The two sides of the heat equation for a kernel: `∂_τ x` and
/// `∂²x/∂u∂z`, each by a complex cross stencil of size `h` (the mixed
/// derivative as the `z`-derivative of the closed-form `y = ∂x/∂u`).
pub fn heat_terms(ctx: &EllipticContext, variant: Variant, u: C64, z: C64, h: f64) -> Result<(C64, C64)> {
    let dtau = cross_derivative(|d| EllipticContext::with_truncation(ctx.tau + d, ctx.trunc)?.x(u, z, variant), h)?;
    let duz = cross_derivative(|d| Ok(ctx.xy(u, z + d, variant)?.1), h)?;
    Ok((dtau, duz))
}

/// `2πi ∂_τ x + ∂²x/∂u∂z`, which vanishes up to stencil error.
pub fn heat_residual(ctx: &EllipticContext, variant: Variant, u: C64, z: C64, h: f64) -> Result<C64> {
    let (dtau, duz) = heat_terms(ctx, variant, u, z, h)?;
    Ok(2.0 * PI * I * dtau + duz)
}

/// θ₁ and three derivatives by the sine series at a reduced argument.
fn series(r: C64, modulus: C64, trunc: &Truncation) -> Result<[C64; 4]> {
    let mut acc = [C64::zero(); 4];
    let mut mags = [0.0f64; 4];
    let mut prev = f64::INFINITY;
    for n in 0..=trunc.max_index {
        let h = n as f64 + 0.5;
        let k = 2.0 * PI * h;
        let base = I * PI * modulus * h * h;
        let ep = (base + I * k * r).exp();
        let em = (base - I * k * r).exp();
        let sgn = if n % 2 == 0 { 2.0 } else { -2.0 };
        let s = sgn * (ep - em) / (2.0 * I);
        let c = sgn * (ep + em) * 0.5;
        let t = [s, c * k, -s * k * k, -c * k * k * k];
        let mut done = true;
        for i in 0..4 {
            acc[i] += t[i];
            let m = t[i].norm();
            mags[i] += m;
            if m > trunc.rel_tol * mags[i] {
                done = false;
            }
        }
        let lead = t[3].abs();
        if done && n > 0 && lead <= prev {
            return Ok(acc);
        }
        prev = lead;
    }
    Err(Error::Truncation(trunc.max_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn theta_is_odd_and_antiperiodic() {
        let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
        assert_eq!(ctx.theta1(C64::zero(), 0, ModulusScale::Base).unwrap(), C64::zero());
        let u = c(0.21, -0.13);
        let a = ctx.theta1(u, 0, ModulusScale::Base).unwrap();
        let b = ctx.theta1(-u, 0, ModulusScale::Base).unwrap();
        let s = ctx.theta1(u + 1.0, 0, ModulusScale::Base).unwrap();
        assert!((a + b).norm() < 1e-15);
        assert!((a + s).norm() < 1e-15);
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(EllipticContext::new(c(0.0, -1.0)), Err(Error::Modulus(_))));
        assert!(matches!(EllipticContext::new(c(f64::NAN, 1.0)), Err(Error::NonFinite)));
    }

    #[test]
    fn pole_guard_reports_lattice_point() {
        let ctx = EllipticContext::new(c(0.1, 1.0)).unwrap();
        let tau = ctx.tau();
        match ctx.rho(1.0 + tau + c(1e-8, 0.0), ModulusScale::Base) {
            Err(Error::Pole { nearest }) => assert!((nearest - (1.0 + tau)).norm() < 1e-12),
            other => panic!("{other:?}"),
        }
        match ctx.wp(c(0.5, 0.0) + c(0.0, 1e-9), PeriodScale::Half, 0) {
            Err(Error::Pole { nearest }) => assert!((nearest - 0.5).norm() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rho_laurent_expansion() {
        let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
        let u = c(1e-3, 0.0);
        let slope = ctx.constants(ModulusScale::Base).rho_slope();
        let r = ctx.rho(u, ModulusScale::Base).unwrap() - 1.0 / u;
        assert!((r - slope * u).norm() < 1e-8);
    }

    #[test]
    fn half_periods() {
        let ctx = EllipticContext::new(c(0.3, 0.8)).unwrap();
        let w = ctx.half_periods();
        assert_eq!(w[1], c(0.5, 0.0));
        assert!((w[2] - c(0.65, 0.4)).norm() < 1e-15);
        assert!((w[3] - c(0.15, 0.4)).norm() < 1e-15);
    }
}
