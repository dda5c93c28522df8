//! Potential theory of the rotationally invariant α-stable process.
//!
//! Two capacity normalizations appear. [`capacity_unit_ball`] is the
//! classical closed form for the Riesz kernel `|x|^{α-d}`, which equals 1
//! for every `d` at α = 2. The process Green function carries the extra
//! factor [`riesz_constant`], so the total mass of the equilibrium measure
//! relative to `G`, and hence the almost-sure growth rate of the sausage
//! volume, is [`process_capacity`].

use std::f64::consts::PI;

use libm::tgamma;

use crate::error::{domain, Error, Result};
use crate::process::ProcessParams;
use crate::quadrature;

/// The liminf constant in Chung's law of the iterated logarithm, π/√8.
pub const CHUNG_CONSTANT: f64 = 1.110_720_734_539_591_6;

const QUAD_BUDGET: usize = 4000;

fn check_transient(d: usize, alpha: f64) -> Result<()> {
    if d == 0 || !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain(format!("invalid parameters d = {d}, alpha = {alpha}")));
    }
    if d as f64 <= alpha {
        return Err(domain(format!("d = {d} <= alpha = {alpha}: the process is recurrent")));
    }
    Ok(())
}

/// `Γ(d/2) / (Γ(α/2) Γ(1 + (d-α)/2))`.
pub fn capacity_unit_ball(d: usize, alpha: f64) -> Result<f64> {
    check_transient(d, alpha)?;
    let d = d as f64;
    Ok(tgamma(d / 2.0) / (tgamma(alpha / 2.0) * tgamma(1.0 + (d - alpha) / 2.0)))
}

/// `A(d, α) = Γ((d-α)/2) / (2^α π^{d/2} Γ(α/2))`, so that
/// `G(x) = A(d, α) |x|^{α-d}`.
pub fn riesz_constant(d: usize, alpha: f64) -> Result<f64> {
    check_transient(d, alpha)?;
    let d = d as f64;
    Ok(tgamma((d - alpha) / 2.0) / (2f64.powf(alpha) * PI.powf(d / 2.0) * tgamma(alpha / 2.0)))
}

/// Total equilibrium mass of the unit ball relative to the process Green
/// function: the limit of `V_t / t`.
pub fn process_capacity(d: usize, alpha: f64) -> Result<f64> {
    Ok(capacity_unit_ball(d, alpha)? / riesz_constant(d, alpha)?)
}

/// [`process_capacity`] for a ball of the given radius, scaled by
/// `radius^{d-α}`.
pub fn process_capacity_for(params: &ProcessParams) -> Result<f64> {
    let d = params.dim();
    Ok(process_capacity(d, params.alpha())? * params.radius().powf(d as f64 - params.alpha()))
}

/// Prefactor `c` in `φ(y) = c ∫_B |y-w|^{α-d} (1-|w|²)^{-α/2} dw`:
/// `sin(πα/2) Γ(d/2) / π^{d/2+1}`.
pub fn hitting_prefactor(d: usize, alpha: f64) -> Result<f64> {
    check_transient(d, alpha)?;
    let d = d as f64;
    Ok((PI * alpha / 2.0).sin() * tgamma(d / 2.0) / PI.powf(d / 2.0 + 1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialContext {
    params: ProcessParams,
    quadrature_tolerance: f64,
}

impl PotentialContext {
    pub fn new(params: ProcessParams) -> Result<Self> {
        Self::with_tolerance(params, 1e-8)
    }

    pub fn with_tolerance(params: ProcessParams, quadrature_tolerance: f64) -> Result<Self> {
        if !params.is_transient() {
            return Err(domain(format!(
                "potential quantities need d > alpha (d = {}, alpha = {})",
                params.dim(),
                params.alpha()
            )));
        }
        if !(quadrature_tolerance > 0.0) {
            return Err(domain("quadrature tolerance must be positive"));
        }
        Ok(Self {
            params,
            quadrature_tolerance,
        })
    }

    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    pub fn quadrature_tolerance(&self) -> f64 {
        self.quadrature_tolerance
    }

    fn dim_alpha(&self) -> (usize, f64) {
        (self.params.dim(), self.params.alpha())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dim(ctx: &PotentialContext, x: &[f64]) -> Result<()> {
    if x.len() != ctx.params.dim() {
        return Err(Error::Dimension {
            expected: ctx.params.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `G(x) = A(d, α) |x|^{α-d}`.
pub fn green_function(x: &[f64], ctx: &PotentialContext) -> Result<f64> {
    check_dim(ctx, x)?;
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Singular("Green function at the origin"));
    }
    let (d, alpha) = ctx.dim_alpha();
    Ok(riesz_constant(d, alpha)? * r.powf(alpha - d as f64))
}

/// Surface area of the unit sphere S^{k-1} ⊂ R^k.
fn sphere_area(k: usize) -> f64 {
    let k = k as f64;
    2.0 * PI.powf(k / 2.0) / tgamma(k / 2.0)
}

/// `∫_B K(|y - w|) (1-|w|²)^{-α/2} dw` for a radial kernel `K` and `|y| > 1`,
/// reduced to the radius of `w` and its angle to `y`.
///
/// The radius is parametrized as `ρ = 1 - v^p` with `p = 2/(2-α)`, which
/// absorbs the `(1-ρ)^{-α/2}` endpoint singularity into the Jacobian.
fn weighted_ball_integral<K: Fn(f64) -> f64>(r: f64, d: usize, alpha: f64, tol: f64, kernel: K) -> Result<f64> {
    let p = 2.0 / (2.0 - alpha);
    // Integral over the angle θ ∈ [0, π] of K(|y-w|) sin^{d-2}θ, times the
    // area of the (d-2)-sphere; d = 1 collapses to the two points ±ρ.
    let angular = |rho: f64| -> Result<f64> {
        let dist = |c: f64| (r * r + rho * rho - 2.0 * r * rho * c).max(0.0).sqrt();
        match d {
            1 => Ok(kernel(dist(1.0)) + kernel(dist(-1.0))),
            _ => {
                let area = sphere_area(d - 1);
                let q = quadrature::integrate(
                    |theta: f64| kernel(dist(theta.cos())) * theta.sin().powi(d as i32 - 2),
                    0.0,
                    PI,
                    tol * 1e-2,
                    QUAD_BUDGET,
                )?;
                Ok(area * q.value)
            }
        }
    };
    let mut failure = None;
    let outer = quadrature::integrate(
        |v: f64| {
            let vp = v.powf(p);
            let rho = 1.0 - vp;
            if rho <= 0.0 {
                return 0.0;
            }
            // dρ (1-ρ)^{-α/2} = p dv once v^{p(1-α/2)-1} = v^0 cancels.
            let jac = p * (2.0 - vp).powf(-alpha / 2.0) * rho.powi(d as i32 - 1);
            match angular(rho) {
                Ok(a) => jac * a,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
        tol,
        QUAD_BUDGET,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer?.value)
}

/// Probability that the process started at `y` ever hits the closed unit
/// ball.
pub fn phi(y: &[f64], ctx: &PotentialContext) -> Result<f64> {
    check_dim(ctx, y)?;
    let (d, alpha) = ctx.dim_alpha();
    if alpha >= 2.0 {
        return Err(domain("phi needs alpha < 2; use phi_brownian"));
    }
    let r = norm(y);
    if r <= 1.0 {
        return Ok(1.0);
    }
    let c = hitting_prefactor(d, alpha)?;
    let exponent = alpha - d as f64;
    let integral = weighted_ball_integral(r, d, alpha, ctx.quadrature_tolerance / c, |s| s.powf(exponent))?;
    Ok((c * integral).min(1.0))
}

/// Hitting probability of the unit ball for Brownian motion, `min(1, |y|^{2-d})`.
pub fn phi_brownian(y: &[f64], d: usize) -> Result<f64> {
    if d < 3 {
        return Err(domain(format!("Brownian motion is recurrent in d = {d}")));
    }
    if y.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: y.len(),
        });
    }
    Ok(norm(y).powf(2.0 - d as f64).min(1.0))
}

/// Total mass of `(1-|w|²)^{-α/2} dw` over the unit ball, by quadrature.
pub fn equilibrium_weight_mass(ctx: &PotentialContext) -> Result<f64> {
    let (d, alpha) = ctx.dim_alpha();
    let p = 2.0 / (2.0 - alpha);
    let area = if d == 1 { 2.0 } else { sphere_area(d) };
    let q = quadrature::integrate(
        |v: f64| {
            let vp = v.powf(p);
            let rho = 1.0 - vp;
            if rho <= 0.0 {
                return 0.0;
            }
            p * (2.0 - vp).powf(-alpha / 2.0) * rho.powi(d as i32 - 1)
        },
        0.0,
        1.0,
        ctx.quadrature_tolerance * 1e-2,
        QUAD_BUDGET,
    )?;
    Ok(area * q.value)
}

/// `∫ G(y - w) μ_B(dw)` where μ_B has density proportional to
/// `(1-|w|²)^{-α/2}` and total mass [`process_capacity`]. The weight
/// normalization is computed by quadrature, not from the Gamma closed form.
pub fn green_potential_of_equilibrium(y: &[f64], ctx: &PotentialContext) -> Result<f64> {
    check_dim(ctx, y)?;
    let (d, alpha) = ctx.dim_alpha();
    if alpha >= 2.0 {
        return Err(domain("the ball equilibrium density is singular at alpha = 2"));
    }
    let r = norm(y);
    if r <= 1.0 {
        return Err(domain("the potential is evaluated outside the ball"));
    }
    let mass = process_capacity(d, alpha)?;
    let density_scale = mass / equilibrium_weight_mass(ctx)?;
    let a = riesz_constant(d, alpha)?;
    let exponent = alpha - d as f64;
    let scale = density_scale * a;
    let integral = weighted_ball_integral(r, d, alpha, ctx.quadrature_tolerance / scale, |s| s.powf(exponent))?;
    Ok(scale * integral)
}

/// The second-order rate `h(t)`: 1 for d/α > 2, `log(t + e)` for d/α = 2,
/// `t^{2 - d/α}` for d/α ∈ (1, 2).
pub fn h_function(t: f64, d: usize, alpha: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("h(t) needs t > 0, got {t}")));
    }
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha = {alpha} must be positive")));
    }
    let ratio = d as f64 / alpha;
    if ratio <= 1.0 {
        return Err(domain(format!("h(t) needs d/alpha > 1, got {ratio}")));
    }
    Ok(if (ratio - 2.0).abs() <= 1e-12 {
        (t + std::f64::consts::E).ln()
    } else if ratio > 2.0 {
        1.0
    } else {
        t.powf(2.0 - ratio)
    })
}

fn log_log(t: f64) -> Result<f64> {
    // t = e^e itself is accepted; rounding of e^e is absorbed by the slack.
    if !(t > 0.0) || t.ln().ln() < 1.0 - 1e-12 {
        return Err(domain(format!("iterated-logarithm normalizers need t > e^e, got {t}")));
    }
    Ok(t.ln().ln())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

/// `√(2 σ² t log log t)`.
pub fn lil_normalizer_khintchine(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let ll = log_log(t)?;
    Ok((2.0 * sigma * sigma * t * ll).sqrt())
}

/// `√(σ² t / log log t)`.
pub fn lil_normalizer_chung(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let ll = log_log(t)?;
    Ok((sigma * sigma * t / ll).sqrt())
}
