//! Single-spin angular momentum algebra.
//!
//! Basis ordering is `|F, m⟩` with `m = F, F-1, …, -F`, so index `i` holds
//! `m = F - i`. Every module that touches spin indices shares this order.

use faer::{Mat, MatRef};

use crate::linalg;
use crate::{Error, Result, C64};

/// Spin quantum number stored as `2F` so half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinSpace {
    twice_f: u32,
}

impl SpinSpace {
    pub fn new(f: f64) -> Result<Self> {
        let twice = 2.0 * f;
        if !(twice.is_finite() && twice >= 1.0 && (twice - twice.round()).abs() < 1e-12) {
            return Err(Error::param("F", format!("{f} is not a positive half-integer")));
        }
        Ok(SpinSpace { twice_f: twice.round() as u32 })
    }

    pub fn from_twice(twice_f: u32) -> Result<Self> {
        if twice_f == 0 {
            return Err(Error::param("F", "F must be at least 1/2"));
        }
        Ok(SpinSpace { twice_f })
    }

    pub fn f(&self) -> f64 {
        self.twice_f as f64 / 2.0
    }

    pub fn twice_f(&self) -> u32 {
        self.twice_f
    }

    pub fn dim(&self) -> usize {
        self.twice_f as usize + 1
    }

    /// Magnetic quantum number at basis index `i`.
    pub fn m(&self, i: usize) -> f64 {
        self.f() - i as f64
    }

    /// Basis index of projection `m`, if `m` belongs to this spin.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let i = self.f() - m;
        if i < -1e-9 || (i - i.round()).abs() > 1e-9 {
            return None;
        }
        let i = i.round() as usize;
        (i < self.dim()).then_some(i)
    }
}

/// Cartesian spin matrices in units of ħ.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub space: SpinSpace,
    pub fx: Mat<C64>,
    pub fy: Mat<C64>,
    pub fz: Mat<C64>,
}

impl SpinOperators {
    /// Raising operator `F+ = Fx + iFy`.
    pub fn raising(&self) -> Mat<C64> {
        let i = C64::new(0.0, 1.0);
        Mat::from_fn(self.space.dim(), self.space.dim(), |r, c| self.fx[(r, c)] + i * self.fy[(r, c)])
    }

    /// `n̂·F` for an arbitrary (not necessarily unit) direction.
    pub fn along(&self, axis: [f64; 3]) -> Mat<C64> {
        let d = self.space.dim();
        Mat::from_fn(d, d, |r, c| {
            self.fx[(r, c)] * axis[0] + self.fy[(r, c)] * axis[1] + self.fz[(r, c)] * axis[2]
        })
    }

    pub fn components(&self) -> [MatRef<'_, C64>; 3] {
        [self.fx.as_ref(), self.fy.as_ref(), self.fz.as_ref()]
    }

    /// Bloch vector `⟨F⟩ / F` of a spin state.
    pub fn bloch_vector(&self, state: &[C64]) -> [f64; 3] {
        let f = self.space.f();
        self.components().map(|op| linalg::expectation(op, state).re / f)
    }
}

/// Ladder construction with `⟨m±1|F±|m⟩ = √(F(F+1) − m(m±1))`.
pub fn build_spin_operators(space: SpinSpace) -> SpinOperators {
    let d = space.dim();
    let f = space.f();
    let zero = C64::new(0.0, 0.0);
    // F+ has entries one row above the diagonal: column i (m) -> row i-1 (m+1).
    let plus = |r: usize, c: usize| -> f64 {
        if c >= 1 && r == c - 1 {
            let m = space.m(c);
            (f * (f + 1.0) - m * (m + 1.0)).sqrt()
        } else {
            0.0
        }
    };
    let fx = Mat::from_fn(d, d, |r, c| C64::new(0.5 * (plus(r, c) + plus(c, r)), 0.0));
    let fy = Mat::from_fn(d, d, |r, c| C64::new(0.0, -0.5 * (plus(r, c) - plus(c, r))));
    let fz = Mat::from_fn(d, d, |r, c| if r == c { C64::new(space.m(r), 0.0) } else { zero });
    SpinOperators { space, fx, fy, fz }
}

/// `exp(−i·angle·(axis·F))`.
pub fn rotation_operator(ops: &SpinOperators, axis: [f64; 3], angle: f64) -> Result<Mat<C64>> {
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::param("axis", format!("rotation axis must be a unit vector, |axis| = {len}")));
    }
    linalg::expm_hermitian(ops.along(axis).as_ref(), angle)
}

/// Spin coherent state `R(θ, φ)|F, F⟩`, pointing along
/// `(sinθ cosφ, sinθ sinφ, cosθ)`.
///
/// Closed form of the rotation about `(−sinφ, cosφ, 0)` by `θ`:
/// `c_m = √C(2F, F−m) cos^{F+m}(θ/2) sin^{F−m}(θ/2) e^{−i(m−F)φ}`.
pub fn spin_coherent_state(space: SpinSpace, theta: f64, phi: f64) -> Result<Vec<C64>> {
    if !(-1e-12..=std::f64::consts::PI + 1e-12).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} outside [0, π]")));
    }
    let n = space.twice_f as usize;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let ln_binom = ln_binomials(n);
    let f = space.f();
    let amps = (0..=n)
        .map(|k| {
            // k = F − m spin flips away from the top state.
            let up = n - k;
            let magnitude = power_times_root_binomial(c, up, s, k, ln_binom[k]);
            let m = space.m(k);
            C64::from_polar(magnitude, -(m - f) * phi)
        })
        .collect();
    Ok(amps)
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut ln_fact = vec![0.0_f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    (0..=n).map(|k| ln_fact[n] - ln_fact[k] - ln_fact[n - k]).collect()
}

fn power_times_root_binomial(c: f64, pc: usize, s: f64, ps: usize, ln_binom: f64) -> f64 {
    let term = |base: f64, p: usize| -> Option<f64> {
        if p == 0 {
            Some(0.0)
        } else if base.abs() < 1e-300 {
            None
        } else {
            Some(p as f64 * base.abs().ln())
        }
    };
    match (term(c, pc), term(s, ps)) {
        (Some(a), Some(b)) => {
            let sign = if c < 0.0 && pc % 2 == 1 { -1.0 } else { 1.0 } * if s < 0.0 && ps % 2 == 1 { -1.0 } else { 1.0 };
            sign * (0.5 * ln_binom + a + b).exp()
        }
        _ => 0.0,
    }
}

/// Variance of a Hermitian observable in a pure state.
pub fn variance(op: MatRef<'_, C64>, state: &[C64]) -> f64 {
    let mean = linalg::expectation(op, state).re;
    let sq = op * op;
    linalg::expectation(sq.as_ref(), state).re - mean * mean
}
