//! Registry of functional identities among `x`, `y`, σ, ρ and ℘, each
//! evaluable as a numerical residual.

use super::{EllipticContext, PeriodScale, Variant};
use crate::{Error, Result, C64};

/// A functional identity between the elliptic kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Identity {
    SumRule,
    ZeroSumRule,
    FactorRule,
    SigmaSumRule,
    SigmaZeroSumRule,
    SigmaFactorRule,
    HalfSquare,
    DoubleSquare,
    PlainHalfAtDoubleZ,
    PlainAtDoubleU,
    PlainDoubleAtDoubleU,
    HalfPlainAtDoubleU,
    HalfDoubleAtDoubleU,
    PlainDouble,
    SumRuleDoubleU,
    SumRuleDoubleUTwisted,
    SumRuleDoubleZ,
    SumRuleDoubleZTwisted,
    Duplication,
    HalfPeriodSum,
    DoublePeriodSum,
}

struct Info {
    name: &'static str,
    formula: &'static str,
    arity: usize,
    has_const: bool,
}

impl Identity {
    pub const ALL: [Identity; 21] = [
        Identity::SumRule,
        Identity::ZeroSumRule,
        Identity::FactorRule,
        Identity::SigmaSumRule,
        Identity::SigmaZeroSumRule,
        Identity::SigmaFactorRule,
        Identity::HalfSquare,
        Identity::DoubleSquare,
        Identity::PlainHalfAtDoubleZ,
        Identity::PlainAtDoubleU,
        Identity::PlainDoubleAtDoubleU,
        Identity::HalfPlainAtDoubleU,
        Identity::HalfDoubleAtDoubleU,
        Identity::PlainDouble,
        Identity::SumRuleDoubleU,
        Identity::SumRuleDoubleUTwisted,
        Identity::SumRuleDoubleZ,
        Identity::SumRuleDoubleZTwisted,
        Identity::Duplication,
        Identity::HalfPeriodSum,
        Identity::DoublePeriodSum,
    ];

    fn info(self) -> Info {
        use Identity::*;
        let (name, formula, arity, has_const) = match self {
            SumRule => ("sum-rule", "x(u)y(v) - y(u)x(v) = x(u+v)(℘(u) - ℘(v))", 3, false),
            ZeroSumRule => ("zero-sum-rule", "x(u)y(-u) - y(u)x(-u) = ℘'(u)", 2, false),
            FactorRule => ("factor-rule", "x(u)x(-u) = ℘(z) - ℘(u)", 2, false),
            SigmaSumRule => (
                "sigma-sum-rule",
                "σ(u)σ(v)(ρ(v) + ρ(z-v) - ρ(u) - ρ(z-u)) = σ(u+v)(℘(u) - ℘(v))",
                3,
                false,
            ),
            SigmaZeroSumRule => (
                "sigma-zero-sum-rule",
                "σ(u)σ(-u)(ρ(u) + ρ(z-u) - ρ(-u) - ρ(z+u)) = ℘'(u)",
                2,
                false,
            ),
            SigmaFactorRule => ("sigma-factor-rule", "σ(u)σ(-u) = ℘(z) - ℘(u)", 2, false),
            HalfSquare => ("half-square", "x½(u,z)x½(-u,z) = -℘½(u) + ℘½(z/2)", 2, true),
            DoubleSquare => ("double-square", "x²(u,z)x²(-u,z) = -℘²(u) + ℘²(2z)", 2, true),
            PlainHalfAtDoubleZ => (
                "plain-half-2z",
                "x(u,2z)x½(-u,2z) + x½(u,2z)x(-u,2z) = -2℘(u) + const",
                2,
                true,
            ),
            PlainAtDoubleU => ("plain-2u", "x(u,2z)x(-2u,z) + x(2u,z)x(-u,2z) = -℘(u) + const", 2, true),
            PlainDoubleAtDoubleU => (
                "plain-double-2u",
                "x(u,2z)x²(-2u,z) + x²(2u,z)x(-u,2z) = -℘(u) + const",
                2,
                true,
            ),
            HalfPlainAtDoubleU => (
                "half-plain-2u",
                "x½(u,2z)x(-2u,z) + x(2u,z)x½(-u,2z) = -℘½(u) + const",
                2,
                true,
            ),
            HalfDoubleAtDoubleU => (
                "half-double-2u",
                "x½(u,2z)x²(-2u,z) + x²(2u,z)x½(-u,2z) = -℘(u) + const",
                2,
                true,
            ),
            PlainDouble => ("plain-double", "x(u,z)x²(-u,z) + x²(u,z)x(-u,z) = -2℘²(u) + const", 2, true),
            SumRuleDoubleU => (
                "sum-rule-2u",
                "x(2u)y(-u-v) - y(2u)x(-u-v) + x(u+v)y(-2v) - y(u+v)x(-2v) = x(u-v)(℘(2u) - ℘(2v))",
                3,
                false,
            ),
            SumRuleDoubleUTwisted => (
                "sum-rule-2u-double",
                "x²(2u)y(-u-v) - y²(2u)x(-u-v) + x(u+v)y²(-2v) - y(u+v)x²(-2v) = x(u-v)(℘²(2u) - ℘²(2v))",
                3,
                false,
            ),
            SumRuleDoubleZ => (
                "sum-rule-2z",
                "2x(u,2z)y(-u-v,z) - y(u,2z)x(-u-v,z) + x(u+v,z)y(-v,2z) - 2y(u+v,z)x(-v,2z) = x(u-v,z)(℘(u) - ℘(v))",
                3,
                false,
            ),
            SumRuleDoubleZTwisted => (
                "sum-rule-2z-half",
                "2x½(u,2z)y(-u-v,z) - y½(u,2z)x(-u-v,z) + x(u+v,z)y½(-v,2z) - 2y(u+v,z)x½(-v,2z) = x(u-v,z)(℘½(u) - ℘½(v))",
                3,
                false,
            ),
            Duplication => ("duplication", "℘(2u) = (℘(u) + ℘(u+ω₁) + ℘(u+ω₂) + ℘(u+ω₃))/4", 1, false),
            HalfPeriodSum => ("half-period-sum", "℘½(u) = ℘(u) + ℘(u+ω₁) - ℘(ω₁)", 1, false),
            DoublePeriodSum => ("double-period-sum", "℘²(2u) = (℘(u) + ℘(u+ω₃) - ℘(ω₃))/4", 1, false),
        };
        Info { name, formula, arity, has_const }
    }

    /// Stable kebab-case identifier.
    pub fn name(self) -> &'static str {
        self.info().name
    }

    /// Human-readable statement; `x½`, `x²`, `℘½`, `℘²` denote the twisted
    /// kernels and rescaled-period ℘, and `z` is implicit where omitted.
    pub fn formula(self) -> &'static str {
        self.info().formula
    }

    /// Number of free variables among `u`, `v`, `z`.
    pub fn arity(self) -> usize {
        self.info().arity
    }

    /// Whether the right side carries a `u`-independent constant.
    pub fn has_const(self) -> bool {
        self.info().has_const
    }

    pub fn from_name(name: &str) -> Option<Identity> {
        Identity::ALL.into_iter().find(|id| id.name() == name)
    }
}

/// Left-minus-right of an identity together with the sum of the magnitudes
/// of its terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub residual: C64,
    pub scale: f64,
}

impl IdentityCheck {
    /// Residual relative to the term magnitudes (absolute if they all vanish).
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual.norm() / self.scale
        } else {
            self.residual.norm()
        }
    }
}

#[derive(Default)]
struct Acc {
    sum: C64,
    scale: f64,
}

impl Acc {
    fn add(&mut self, t: C64) {
        self.sum += t;
        self.scale += t.norm();
    }
}

struct Ev<'a>(&'a EllipticContext);

impl Ev<'_> {
    fn x(&self, u: C64, z: C64, v: Variant) -> Result<C64> {
        self.0.x(u, z, v)
    }
    fn xy(&self, u: C64, z: C64, v: Variant) -> Result<(C64, C64)> {
        self.0.xy(u, z, v)
    }
    fn wp(&self, u: C64, s: PeriodScale) -> Result<C64> {
        self.0.wp(u, s, 0)
    }
    fn wpd(&self, u: C64) -> Result<C64> {
        self.0.wp(u, PeriodScale::Full, 1)
    }
    fn rho(&self, u: C64) -> Result<C64> {
        self.0.rho(u, super::ModulusScale::Base)
    }
}

const PLAIN: Variant = Variant::Plain;
const HALF: Variant = Variant::Half;
const DOUBLE: Variant = Variant::Double;
const FULL: PeriodScale = PeriodScale::Full;

/// `a(p, zp) b(−q, zq) + b(q, zq) a(−p, zp)` (the two-product left side of
/// the factor-type identities), with `p`, `q` multiples of `u`.
fn product_pair(e: &Ev, acc: &mut Acc, a: (C64, C64, Variant), b: (C64, C64, Variant)) -> Result<()> {
    let (p, zp, va) = a;
    let (q, zq, vb) = b;
    acc.add(e.x(p, zp, va)? * e.x(-q, zq, vb)?);
    acc.add(e.x(q, zq, vb)? * e.x(-p, zp, va)?);
    Ok(())
}

/// Left side minus the `u`-dependent part of the right side, for the
/// identities that carry a constant.
fn const_free(e: &Ev, id: Identity, u: C64, z: C64, acc: &mut Acc) -> Result<()> {
    use Identity::*;
    let z2 = 2.0 * z;
    let u2 = 2.0 * u;
    match id {
        HalfSquare => {
            acc.add(e.x(u, z, HALF)? * e.x(-u, z, HALF)?);
            acc.add(e.wp(u, PeriodScale::Half)?);
        }
        DoubleSquare => {
            acc.add(e.x(u, z, DOUBLE)? * e.x(-u, z, DOUBLE)?);
            acc.add(e.wp(u, PeriodScale::Double)?);
        }
        PlainHalfAtDoubleZ => {
            acc.add(e.x(u, z2, PLAIN)? * e.x(-u, z2, HALF)?);
            acc.add(e.x(u, z2, HALF)? * e.x(-u, z2, PLAIN)?);
            acc.add(2.0 * e.wp(u, FULL)?);
        }
        PlainAtDoubleU => {
            product_pair(e, acc, (u, z2, PLAIN), (u2, z, PLAIN))?;
            acc.add(e.wp(u, FULL)?);
        }
        PlainDoubleAtDoubleU => {
            product_pair(e, acc, (u, z2, PLAIN), (u2, z, DOUBLE))?;
            acc.add(e.wp(u, FULL)?);
        }
        HalfPlainAtDoubleU => {
            product_pair(e, acc, (u, z2, HALF), (u2, z, PLAIN))?;
            acc.add(e.wp(u, PeriodScale::Half)?);
        }
        HalfDoubleAtDoubleU => {
            product_pair(e, acc, (u, z2, HALF), (u2, z, DOUBLE))?;
            acc.add(e.wp(u, FULL)?);
        }
        PlainDouble => {
            acc.add(e.x(u, z, PLAIN)? * e.x(-u, z, DOUBLE)?);
            acc.add(e.x(u, z, DOUBLE)? * e.x(-u, z, PLAIN)?);
            acc.add(2.0 * e.wp(u, PeriodScale::Double)?);
        }
        _ => return Err(Error::NoConstant(id.name())),
    }
    Ok(())
}

/// The point where one of the two products vanishes.
fn special_point(id: Identity, z: C64) -> C64 {
    use Identity::*;
    match id {
        HalfSquare | PlainAtDoubleU | HalfPlainAtDoubleU => 0.5 * z,
        DoubleSquare => 2.0 * z,
        _ => z,
    }
}

/// The constant at the special point and at its mirror image.
pub fn const_term_pair(ctx: &EllipticContext, id: Identity, z: C64) -> Result<(C64, C64)> {
    if !id.has_const() {
        return Err(Error::NoConstant(id.name()));
    }
    let e = Ev(ctx);
    let u = special_point(id, z);
    let mut a = Acc::default();
    const_free(&e, id, u, z, &mut a)?;
    let mut b = Acc::default();
    const_free(&e, id, -u, z, &mut b)?;
    Ok((a.sum, b.sum))
}

/// The `u`-independent constant on the right side of a factor-type identity.
///
/// Fails if the values at the special point and its mirror disagree.
pub fn const_term(ctx: &EllipticContext, id: Identity, z: C64) -> Result<C64> {
    let (a, b) = const_term_pair(ctx, id, z)?;
    if (a - b).norm() > 1e-8 * (1.0 + a.norm()) {
        return Err(Error::Model(alloc::format!(
            "constant of `{}` disagrees between special point and mirror: {a} vs {b}",
            id.name()
        )));
    }
    Ok(a)
}

fn sum_rule_terms(e: &Ev, acc: &mut Acc, id: Identity, u: C64, v: C64, z: C64) -> Result<()> {
    use Identity::*;
    match id {
        SumRule => {
            let (xu, yu) = e.xy(u, z, PLAIN)?;
            let (xv, yv) = e.xy(v, z, PLAIN)?;
            let xs = e.x(u + v, z, PLAIN)?;
            acc.add(xu * yv);
            acc.add(-yu * xv);
            acc.add(-xs * e.wp(u, FULL)?);
            acc.add(xs * e.wp(v, FULL)?);
        }
        SumRuleDoubleU | SumRuleDoubleUTwisted => {
            let (var, scale) = if id == SumRuleDoubleU { (PLAIN, FULL) } else { (DOUBLE, PeriodScale::Double) };
            let (xa, ya) = e.xy(2.0 * u, z, var)?;
            let (xb, yb) = e.xy(-u - v, z, PLAIN)?;
            let (xc, yc) = e.xy(u + v, z, PLAIN)?;
            let (xd, yd) = e.xy(-2.0 * v, z, var)?;
            let xm = e.x(u - v, z, PLAIN)?;
            acc.add(xa * yb);
            acc.add(-ya * xb);
            acc.add(xc * yd);
            acc.add(-yc * xd);
            acc.add(-xm * e.wp(2.0 * u, scale)?);
            acc.add(xm * e.wp(2.0 * v, scale)?);
        }
        SumRuleDoubleZ | SumRuleDoubleZTwisted => {
            let (var, scale) = if id == SumRuleDoubleZ { (PLAIN, FULL) } else { (HALF, PeriodScale::Half) };
            let z2 = 2.0 * z;
            let (xa, ya) = e.xy(u, z2, var)?;
            let (xb, yb) = e.xy(-u - v, z, PLAIN)?;
            let (xc, yc) = e.xy(u + v, z, PLAIN)?;
            let (xd, yd) = e.xy(-v, z2, var)?;
            let xm = e.x(u - v, z, PLAIN)?;
            acc.add(2.0 * xa * yb);
            acc.add(-ya * xb);
            acc.add(xc * yd);
            acc.add(-2.0 * yc * xd);
            acc.add(-xm * e.wp(u, scale)?);
            acc.add(xm * e.wp(v, scale)?);
        }
        _ => unreachable!(),
    }
    Ok(())
}

/// Left-minus-right of `id` at `(u, v, z)` with the term-magnitude scale.
///
/// `v` is ignored for arity-2 identities and `v`, `z` for arity-1 ones.
pub fn identity_check(ctx: &EllipticContext, id: Identity, u: C64, v: C64, z: C64) -> Result<IdentityCheck> {
    use Identity::*;
    let e = Ev(ctx);
    let mut acc = Acc::default();
    match id {
        SumRule | SumRuleDoubleU | SumRuleDoubleUTwisted | SumRuleDoubleZ | SumRuleDoubleZTwisted => {
            sum_rule_terms(&e, &mut acc, id, u, v, z)?
        }
        ZeroSumRule => {
            let (xu, yu) = e.xy(u, z, PLAIN)?;
            let (xm, ym) = e.xy(-u, z, PLAIN)?;
            acc.add(xu * ym);
            acc.add(-yu * xm);
            acc.add(-e.wpd(u)?);
        }
        FactorRule => {
            acc.add(e.x(u, z, PLAIN)? * e.x(-u, z, PLAIN)?);
            acc.add(-e.wp(z, FULL)?);
            acc.add(e.wp(u, FULL)?);
        }
        SigmaSumRule => {
            let r = e.rho(v)? + e.rho(z - v)? - e.rho(u)? - e.rho(z - u)?;
            acc.add(ctx.sigma(u, z)? * ctx.sigma(v, z)? * r);
            let s = ctx.sigma(u + v, z)?;
            acc.add(-s * e.wp(u, FULL)?);
            acc.add(s * e.wp(v, FULL)?);
        }
        SigmaZeroSumRule => {
            let r = e.rho(u)? + e.rho(z - u)? - e.rho(-u)? - e.rho(z + u)?;
            acc.add(ctx.sigma(u, z)? * ctx.sigma(-u, z)? * r);
            acc.add(-e.wpd(u)?);
        }
        SigmaFactorRule => {
            acc.add(ctx.sigma(u, z)? * ctx.sigma(-u, z)?);
            acc.add(-e.wp(z, FULL)?);
            acc.add(e.wp(u, FULL)?);
        }
        Duplication => {
            acc.add(e.wp(2.0 * u, FULL)?);
            for w in ctx.half_periods() {
                acc.add(-0.25 * e.wp(u + w, FULL)?);
            }
        }
        HalfPeriodSum => {
            let w1 = ctx.half_periods()[1];
            acc.add(e.wp(u, PeriodScale::Half)?);
            acc.add(-e.wp(u, FULL)?);
            acc.add(-e.wp(u + w1, FULL)?);
            acc.add(e.wp(w1, FULL)?);
        }
        DoublePeriodSum => {
            let w3 = ctx.half_periods()[3];
            acc.add(e.wp(2.0 * u, PeriodScale::Double)?);
            acc.add(-0.25 * e.wp(u, FULL)?);
            acc.add(-0.25 * e.wp(u + w3, FULL)?);
            acc.add(0.25 * e.wp(w3, FULL)?);
        }
        _ => {
            const_free(&e, id, u, z, &mut acc)?;
            acc.add(-const_term(ctx, id, z)?);
        }
    }
    Ok(IdentityCheck { residual: acc.sum, scale: acc.scale })
}

/// Left-minus-right of `id` at `(u, v, z)`.
pub fn identity_residual(ctx: &EllipticContext, id: Identity, u: C64, v: C64, z: C64) -> Result<C64> {
    Ok(identity_check(ctx, id, u, v, z)?.residual)
}

/// The closed-form constants of the two square identities.
pub fn square_constant(ctx: &EllipticContext, id: Identity, z: C64) -> Result<C64> {
    match id {
        Identity::HalfSquare => ctx.wp(0.5 * z, PeriodScale::Half, 0),
        Identity::DoubleSquare => ctx.wp(2.0 * z, PeriodScale::Double, 0),
        _ => Err(Error::NoConstant(id.name())),
    }
}
