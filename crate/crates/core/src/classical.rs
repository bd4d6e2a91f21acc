//! Classical limit of the lattice atom: a point particle carrying a magnetic
//! moment of fixed length that precesses in `B_eff(z)`.
//!
//! Phase space is `(z, p, n)` with `n` the unit direction of `F/F`. The energy is
//!
//! ```text
//! E = p²/2M + U(z) + g·B_eff(z)·n,     g = s·F
//! ```
//!
//! and the equations of motion are `ż = p/M`, `ṗ = −∂z E`, `ṅ = s·B_eff(z) × n`.
//!
//! The integrator splits `E` into a free drift and a kick at fixed `z`; both
//! sub-flows are solved exactly (the kick rotates `n` about the local field and
//! integrates the resulting force in closed form), so `|n|` is preserved without
//! renormalization and the composed step is symplectic and time-reversible.

use std::f64::consts::PI;

use crate::amol::{wrap_centered, AmolParams, ScaledUnits};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    /// Position in units of `1/k`.
    pub z: f64,
    /// Momentum in units of `ħk`.
    pub p: f64,
    pub n: [f64; 3],
}

impl ClassicalState {
    pub fn from_angles(z_over_lambda: f64, p_over_hbark: f64, theta: f64, phi: f64) -> Self {
        ClassicalState {
            z: ScaledUnits::z_from_lambda(z_over_lambda),
            p: p_over_hbark,
            n: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    pub fn theta(&self) -> f64 {
        self.n[2].clamp(-1.0, 1.0).acos()
    }

    pub fn phi(&self) -> f64 {
        self.n[1].atan2(self.n[0])
    }

    pub fn z_over_lambda(&self) -> f64 {
        ScaledUnits::z_to_lambda(self.z)
    }

    pub fn spin_norm(&self) -> f64 {
        norm3(self.n)
    }

    fn as_array(&self) -> [f64; 5] {
        [self.z, self.p, self.n[0], self.n[1], self.n[2]]
    }
}

/// Time derivative of a [`ClassicalState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dz: f64,
    pub dp: f64,
    pub dn: [f64; 3],
}

pub fn classical_energy(state: &ClassicalState, params: &AmolParams) -> f64 {
    let b = params.field(state.z);
    state.p * state.p / (2.0 * ScaledUnits::MASS)
        + params.scalar_potential(state.z)
        + params.classical_moment() * dot3(b, state.n)
}

pub fn derivatives(state: &ClassicalState, params: &AmolParams) -> StateDerivative {
    let s = params.coupling_scale();
    let b = params.field(state.z);
    let omega = [s * b[0], s * b[1], s * b[2]];
    StateDerivative {
        dz: state.p / ScaledUnits::MASS,
        dp: -force_gradient(state.z, state.n[2], params),
        dn: cross3(omega, state.n),
    }
}

/// `∂z` of the potential part of the energy at fixed `n_z`.
fn force_gradient(z: f64, nz: f64, params: &AmolParams) -> f64 {
    let (s2, c2) = (2.0 * z).sin_cos();
    -2.0 * params.lattice_amplitude() * s2 + params.classical_moment() * 2.0 * params.zeeman_amplitude() * c2 * nz
}

/// Symmetric composition schemes built from the Strang step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Strang,
    Yoshida4,
    #[default]
    Yoshida6,
}

impl Scheme {
    fn weights(&self) -> &'static [f64] {
        const STRANG: [f64; 1] = [1.0];
        // Triple jump: w1 = 1/(2 − 2^{1/3}), w0 = 1 − 2 w1.
        const Y4: [f64; 3] = [1.351_207_191_959_657_6, -1.702_414_383_919_315_3, 1.351_207_191_959_657_6];
        // Yoshida (1990) sixth-order solution A.
        const Y6: [f64; 7] = [
            0.784_513_610_477_560,
            0.235_573_213_359_357,
            -1.177_679_984_178_87,
            1.315_186_320_683_906,
            -1.177_679_984_178_87,
            0.235_573_213_359_357,
            0.784_513_610_477_560,
        ];
        match self {
            Scheme::Strang => &STRANG,
            Scheme::Yoshida4 => &Y4,
            Scheme::Yoshida6 => &Y6,
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            Scheme::Strang => 2,
            Scheme::Yoshida4 => 4,
            Scheme::Yoshida6 => 6,
        }
    }
}

/// Fixed-step structure-preserving integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Integrator {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Integrator { dt, scheme }
    }

    /// Rejects steps coarser than 20 per period of the fastest precession.
    pub fn check(&self, params: &AmolParams) -> Result<()> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::StepTooLarge { dt: self.dt, reason: "step must be finite and non-zero".into() });
        }
        let omega_max = params.coupling_scale() * params.mu_b_bx.hypot(params.zeeman_amplitude());
        if omega_max > 0.0 {
            let steps_per_period = 2.0 * PI / (omega_max * self.dt.abs());
            if steps_per_period < 20.0 {
                return Err(Error::StepTooLarge {
                    dt: self.dt,
                    reason: format!("{steps_per_period:.1} steps per precession period (need 20)"),
                });
            }
        }
        Ok(())
    }

    /// One composed step of signed length `h`.
    pub fn step(&self, state: &mut ClassicalState, params: &AmolParams, h: f64) {
        for &w in self.scheme.weights() {
            strang(state, params, w * h);
        }
    }
}

fn strang(state: &mut ClassicalState, params: &AmolParams, h: f64) {
    state.z += 0.5 * h * state.p / ScaledUnits::MASS;
    kick(state, params, h);
    state.z += 0.5 * h * state.p / ScaledUnits::MASS;
}

/// Exact flow of the potential part at fixed `z` for time `h`.
fn kick(state: &mut ClassicalState, params: &AmolParams, h: f64) {
    let z = state.z;
    let (s2, c2) = (2.0 * z).sin_cos();
    let s = params.coupling_scale();
    let b = [params.mu_b_bx, 0.0, params.zeeman_amplitude() * s2];
    let bnorm = norm3(b);
    let omega = s * bnorm;
    let n = state.n;

    // ∫₀ʰ n_z(t) dt together with n(h), for rotation about b̂ at rate ω.
    let (nz_integral, n_new) = if omega * h.abs() < 1e-300 || bnorm == 0.0 {
        (h * n[2], n)
    } else {
        let axis = [b[0] / bnorm, b[1] / bnorm, b[2] / bnorm];
        let along = dot3(axis, n);
        let par = [axis[0] * along, axis[1] * along, axis[2] * along];
        let perp = [n[0] - par[0], n[1] - par[1], n[2] - par[2]];
        let side = cross3(axis, n);
        let (sw, cw) = (omega * h).sin_cos();
        let half = (0.5 * omega * h).sin();
        let integral = par[2] * h + perp[2] * sw / omega + side[2] * 2.0 * half * half / omega;
        let rotated = [
            par[0] + cw * perp[0] + sw * side[0],
            par[1] + cw * perp[1] + sw * side[1],
            par[2] + cw * perp[2] + sw * side[2],
        ];
        (integral, rotated)
    };

    let scalar_force = 2.0 * params.lattice_amplitude() * s2;
    let spin_force = -params.classical_moment() * 2.0 * params.zeeman_amplitude() * c2;
    state.p += h * scalar_force + spin_force * nz_integral;
    state.n = n_new;
}

/// Sampled trajectory.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ClassicalState>,
}

/// Integrates from `state` to `t_final` (which may be negative), recording a
/// sample every `sample_every` steps plus the endpoint.
pub fn integrate(
    state: &ClassicalState,
    params: &AmolParams,
    t_final: f64,
    integrator: &Integrator,
    sample_every: usize,
) -> Result<Trajectory> {
    integrator.check(params)?;
    let steps = (t_final.abs() / integrator.dt.abs()).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let every = sample_every.max(1);
    let mut traj = Trajectory { times: vec![0.0], states: vec![*state] };
    let mut cur = *state;
    for k in 1..=steps {
        integrator.step(&mut cur, params, h);
        if k % every == 0 || k == steps {
            traj.times.push(k as f64 * h);
            traj.states.push(cur);
        }
    }
    Ok(traj)
}

/// Section surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionVariable {
    /// `μ_y ∝ n_y = 0`.
    MuY,
    /// `p = 0`.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionDef {
    pub variable: SectionVariable,
    /// Required sign of the crossing derivative (`true` for increasing).
    pub increasing: bool,
}

impl SectionDef {
    pub const MU_Y_RISING: SectionDef = SectionDef { variable: SectionVariable::MuY, increasing: true };
    pub const P_RISING: SectionDef = SectionDef { variable: SectionVariable::P, increasing: true };

    fn value(&self, s: &ClassicalState) -> f64 {
        match self.variable {
            SectionVariable::MuY => s.n[1],
            SectionVariable::P => s.p,
        }
    }

    fn rate(&self, s: &ClassicalState, params: &AmolParams) -> f64 {
        let d = derivatives(s, params);
        match self.variable {
            SectionVariable::MuY => d.dn[1],
            SectionVariable::P => d.dp,
        }
    }

    fn oriented(&self, rate: f64) -> bool {
        if self.increasing {
            rate > 0.0
        } else {
            rate < 0.0
        }
    }
}

/// One recorded crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    /// Position wrapped into one lattice period, `z/λ ∈ [−1/4, 1/4)`.
    pub z_over_lambda: f64,
    pub p_over_hbark: f64,
    pub theta: f64,
    pub phi: f64,
    pub crossing_time: f64,
}

impl SectionPoint {
    fn from_state(s: &ClassicalState, t: f64) -> Self {
        SectionPoint {
            z_over_lambda: ScaledUnits::z_to_lambda(wrap_centered(s.z, ScaledUnits::lattice_period())),
            p_over_hbark: s.p,
            theta: s.theta(),
            phi: s.phi(),
            crossing_time: t,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SectionResult {
    pub points: Vec<SectionPoint>,
    /// Set when the time budget ran out before `n_crossings` were found.
    pub warning: Option<String>,
}

impl SectionResult {
    pub const CSV_HEADER: &'static str = "z_over_lambda,p_over_hbark,theta,phi,crossing_time";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.z_over_lambda, p.p_over_hbark, p.theta, p.phi, p.crossing_time
            ));
        }
        out
    }
}

/// Records oriented crossings of `section`, refining each one by regula falsi
/// (Illinois variant) on the length of a partial step.
pub fn poincare_section(
    ic: &ClassicalState,
    params: &AmolParams,
    section: SectionDef,
    n_crossings: usize,
    integrator: &Integrator,
    t_max: f64,
) -> Result<SectionResult> {
    if n_crossings == 0 {
        return Err(Error::param("n_crossings", "must be at least 1"));
    }
    integrator.check(params)?;
    let h = integrator.dt.abs();
    let mut out = SectionResult::default();
    if section.value(ic).abs() <= 1e-9 && section.oriented(section.rate(ic, params)) {
        out.points.push(SectionPoint::from_state(ic, 0.0));
    }
    let mut cur = *ic;
    let mut t = 0.0;
    while out.points.len() < n_crossings {
        if t >= t_max {
            out.warning = Some(format!(
                "found {} of {} crossings within t_max = {t_max}",
                out.points.len(),
                n_crossings
            ));
            break;
        }
        let prev = cur;
        integrator.step(&mut cur, params, h);
        let (f0, f1) = (section.value(&prev), section.value(&cur));
        let crossed = if section.increasing { f0 < 0.0 && f1 >= 0.0 } else { f0 > 0.0 && f1 <= 0.0 };
        if crossed {
            let (tau, hit) = refine_crossing(&prev, params, section, integrator, h, f0, f1);
            if section.oriented(section.rate(&hit, params)) {
                out.points.push(SectionPoint::from_state(&hit, t + tau));
            }
        }
        t += h;
    }
    Ok(out)
}

fn refine_crossing(
    start: &ClassicalState,
    params: &AmolParams,
    section: SectionDef,
    integrator: &Integrator,
    h: f64,
    f0: f64,
    f1: f64,
) -> (f64, ClassicalState) {
    let advance = |tau: f64| {
        let mut s = *start;
        integrator.step(&mut s, params, tau);
        s
    };
    let (mut a, mut fa, mut b, mut fb) = (0.0, f0, h, f1);
    let mut side = 0i32;
    let mut best = (b, advance(b));
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let sc = advance(c);
        let fc = section.value(&sc);
        best = (c, sc);
        if fc.abs() < 1e-13 || (b - a).abs() < 1e-15 {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    best
}

/// Largest Lyapunov exponent (units `1/τ`) from a shadow trajectory
/// renormalized to separation `1e-8` every unit of time.
pub fn lyapunov_estimate(ic: &ClassicalState, params: &AmolParams, t_total: f64, integrator: &Integrator) -> Result<f64> {
    integrator.check(params)?;
    const D0: f64 = 1e-8;
    const RENORM_INTERVAL: f64 = 1.0;
    let steps_per_interval = (RENORM_INTERVAL / integrator.dt.abs()).round().max(1.0) as usize;
    let h = RENORM_INTERVAL / steps_per_interval as f64;
    let intervals = (t_total / RENORM_INTERVAL).round().max(1.0) as usize;

    let mut reference = *ic;
    let mut shadow = perturbed(&reference, [1.0, 1.0, 0.3, -0.7, 0.5], D0);
    let mut log_sum = 0.0;
    for _ in 0..intervals {
        for _ in 0..steps_per_interval {
            integrator.step(&mut reference, params, h);
            integrator.step(&mut shadow, params, h);
        }
        let (ra, sa) = (reference.as_array(), shadow.as_array());
        let mut delta = [0.0; 5];
        for i in 0..5 {
            delta[i] = sa[i] - ra[i];
        }
        let dist = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !(dist > 0.0 && dist.is_finite()) {
            return Err(Error::Convergence("shadow trajectory collapsed onto the reference".into()));
        }
        log_sum += (dist / D0).ln();
        shadow = perturbed(&reference, delta, D0);
    }
    Ok(log_sum / (intervals as f64 * RENORM_INTERVAL))
}

/// `base + d0·δ/|δ|`, with the spin part projected back onto the unit sphere.
fn perturbed(base: &ClassicalState, direction: [f64; 5], d0: f64) -> ClassicalState {
    let len = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    let k = d0 / len;
    let n = [base.n[0] + k * direction[2], base.n[1] + k * direction[3], base.n[2] + k * direction[4]];
    let nn = norm3(n);
    ClassicalState { z: base.z + k * direction[0], p: base.p + k * direction[1], n: [n[0] / nn, n[1] / nn, n[2] / nn] }
}

/// Coordinate left free when seeding an initial condition on an energy shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeCoordinate {
    ZOverLambda,
    POverHbark,
    Theta,
    Phi,
}

/// Solves `E(point) = target` for the free coordinate by scanning its range
/// for a sign change and bisecting. Other coordinates come from `point`.
pub fn seed_on_shell(
    point: crate::amol::PhaseSpacePoint,
    free: FreeCoordinate,
    target_energy: f64,
    params: &AmolParams,
) -> Result<ClassicalState> {
    let build = |x: f64| {
        let mut q = point;
        match free {
            FreeCoordinate::ZOverLambda => q.z_over_lambda = x,
            FreeCoordinate::POverHbark => q.p_over_hbark = x,
            FreeCoordinate::Theta => q.theta = x,
            FreeCoordinate::Phi => q.phi = x,
        }
        ClassicalState::from_angles(q.z_over_lambda, q.p_over_hbark, q.theta, q.phi)
    };
    let residual = |x: f64| classical_energy(&build(x), params) - target_energy;
    let p_range = (target_energy - min_potential(params)).max(0.0).sqrt() * (2.0 * ScaledUnits::MASS).sqrt() + 1.0;
    let (lo, hi) = match free {
        FreeCoordinate::ZOverLambda => (-0.25, 0.25),
        FreeCoordinate::POverHbark => (0.0, p_range),
        FreeCoordinate::Theta => (0.0, PI),
        FreeCoordinate::Phi => (-PI, PI),
    };
    const SAMPLES: usize = 2000;
    let mut prev_x = lo;
    let mut prev_r = residual(lo);
    for i in 1..=SAMPLES {
        let x = lo + (hi - lo) * i as f64 / SAMPLES as f64;
        let r = residual(x);
        if prev_r == 0.0 {
            return Ok(build(prev_x));
        }
        if prev_r.signum() != r.signum() {
            let (mut a, mut b, mut ra) = (prev_x, x, prev_r);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let rm = residual(m);
                if rm.signum() == ra.signum() {
                    a = m;
                    ra = rm;
                } else {
                    b = m;
                }
                if (b - a).abs() < 1e-15 {
                    break;
                }
            }
            return Ok(build(0.5 * (a + b)));
        }
        prev_x = x;
        prev_r = r;
    }
    Err(Error::Convergence(format!("energy {target_energy} not reachable along {free:?}")))
}

/// Lowest value of the potential energy over `z` and `n` (field anti-aligned).
pub fn min_potential(params: &AmolParams) -> f64 {
    const SAMPLES: usize = 4096;
    (0..SAMPLES)
        .map(|i| {
            let z = ScaledUnits::lattice_period() * (i as f64 / SAMPLES as f64 - 0.5);
            params.scalar_potential(z) - params.classical_moment() * norm3(params.field(z))
        })
        .fold(f64::INFINITY, f64::min)
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
