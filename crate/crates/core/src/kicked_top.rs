//! Quantum kicked top `H = κ/(2jτ) Jz² Σₙ δ(t − nτ) + p Jy` and its classical map.
//!
//! One period evolves states by `F = exp(−iκJz²/2jτ) exp(−ipJy)`: the rotation
//! about `y` acts first, then the torsion. The collective spin `j` is realized
//! by `N = 2j` qubits in the permutation-symmetric subspace, with
//! `J_α = Σᵢ σᵢα/2`.

use std::f64::consts::PI;

use faer::Mat;

use crate::linalg;
use crate::spin::{build_spin_operators, rotation_operator, SpinOperators, SpinSpace};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickedTopParams {
    pub kappa: f64,
    pub p_rot: f64,
    pub tau: f64,
    pub j: SpinSpace,
}

impl KickedTopParams {
    pub fn new(kappa: f64, p_rot: f64, tau: f64, j: f64) -> Result<Self> {
        let params = KickedTopParams { kappa, p_rot, tau, j: SpinSpace::new(j)? };
        params.validate()?;
        Ok(params)
    }

    /// `κ = 3, τ = 1, p = π/2, j = 25` (50 qubits).
    pub fn reference() -> Self {
        KickedTopParams { kappa: 3.0, p_rot: PI / 2.0, tau: 1.0, j: SpinSpace::from_twice(50).expect("valid spin") }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j.twice_f() < 2 {
            return Err(Error::param("j", format!("collective spin must be at least 1, got {}", self.j.f())));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", format!("kick period must be positive, got {}", self.tau)));
        }
        if !self.kappa.is_finite() || !self.p_rot.is_finite() {
            return Err(Error::param("kappa", "torsion strength and rotation angle must be finite"));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.j.twice_f() as usize
    }

    /// Torsion angle per unit `n_z` in the classical map.
    fn torsion(&self) -> f64 {
        self.kappa / self.tau
    }
}

pub fn floquet_operator(params: &KickedTopParams) -> Result<Mat<C64>> {
    params.validate()?;
    let ops = build_spin_operators(params.j);
    let rotation = rotation_operator(&ops, [0.0, 1.0, 0.0], params.p_rot)?;
    let j = params.j.f();
    let scale = params.kappa / (2.0 * j * params.tau);
    let d = params.j.dim();
    let torsion: Vec<C64> = (0..d).map(|i| C64::from_polar(1.0, -scale * params.j.m(i).powi(2))).collect();
    Ok(Mat::from_fn(d, d, |r, c| torsion[r] * rotation[(r, c)]))
}

/// Classical limit: rotate about `y` by `p`, then about `z` by `(κ/τ) n_z`.
pub fn classical_kick_map(n: [f64; 3], params: &KickedTopParams) -> [f64; 3] {
    let (sp, cp) = params.p_rot.sin_cos();
    let r = [n[0] * cp + n[2] * sp, n[1], -n[0] * sp + n[2] * cp];
    let (st, ct) = (params.torsion() * r[2]).sin_cos();
    [r[0] * ct - r[1] * st, r[0] * st + r[1] * ct, r[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Elliptic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub n: [f64; 3],
    pub stability: Stability,
    /// Trace of the tangent map; `|trace| < 2` for elliptic points.
    pub trace: f64,
    pub residual: f64,
}

impl FixedPoint {
    pub fn theta(&self) -> f64 {
        self.n[2].clamp(-1.0, 1.0).acos()
    }

    pub fn phi(&self) -> f64 {
        self.n[1].atan2(self.n[0])
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixedPointSearch {
    pub points: Vec<FixedPoint>,
    /// Seeds whose Newton iteration did not converge.
    pub failed_seeds: usize,
}

impl FixedPointSearch {
    pub fn elliptic(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|p| p.stability == Stability::Elliptic)
    }
}

const SEED_GRID: usize = 20;

/// Newton search for `map(n) = n` from a 20×20 grid of `(θ, φ)` seeds.
pub fn find_fixed_points(params: &KickedTopParams) -> FixedPointSearch {
    let mut out = FixedPointSearch::default();
    for a in 0..SEED_GRID {
        for b in 0..SEED_GRID {
            let theta = PI * (a as f64 + 0.5) / SEED_GRID as f64;
            let phi = 2.0 * PI * b as f64 / SEED_GRID as f64 - PI;
            let seed = from_angles(theta, phi);
            match newton_fixed_point(seed, params) {
                Some(n) => {
                    if out.points.iter().all(|p| dist(p.n, n) > 1e-6) {
                        let trace = tangent_trace(n, params);
                        let residual = dist(classical_kick_map(n, params), n);
                        let stability = if trace.abs() <= 2.0 { Stability::Elliptic } else { Stability::Hyperbolic };
                        out.points.push(FixedPoint { n, stability, trace, residual });
                    }
                }
                None => out.failed_seeds += 1,
            }
        }
    }
    out.points.sort_by(|x, y| x.theta().total_cmp(&y.theta()).then(x.phi().total_cmp(&y.phi())));
    out
}

fn newton_fixed_point(seed: [f64; 3], params: &KickedTopParams) -> Option<[f64; 3]> {
    let mut n = seed;
    for _ in 0..100 {
        let (e1, e2) = tangent_basis(n);
        let g = |a: f64, b: f64| {
            let q = normalize([n[0] + a * e1[0] + b * e2[0], n[1] + a * e1[1] + b * e2[1], n[2] + a * e1[2] + b * e2[2]]);
            let m = classical_kick_map(q, params);
            let d = [m[0] - q[0], m[1] - q[1], m[2] - q[2]];
            [dot(d, e1), dot(d, e2)]
        };
        let g0 = g(0.0, 0.0);
        let full = dist(classical_kick_map(n, params), n);
        if full < 1e-13 {
            return Some(n);
        }
        let h = 1e-7;
        let (ga_p, ga_m, gb_p, gb_m) = (g(h, 0.0), g(-h, 0.0), g(0.0, h), g(0.0, -h));
        let j = [
            [(ga_p[0] - ga_m[0]) / (2.0 * h), (gb_p[0] - gb_m[0]) / (2.0 * h)],
            [(ga_p[1] - ga_m[1]) / (2.0 * h), (gb_p[1] - gb_m[1]) / (2.0 * h)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return None;
        }
        let mut da = -(j[1][1] * g0[0] - j[0][1] * g0[1]) / det;
        let mut db = -(-j[1][0] * g0[0] + j[0][0] * g0[1]) / det;
        let step = da.hypot(db);
        if step > 0.5 {
            da *= 0.5 / step;
            db *= 0.5 / step;
        }
        n = normalize([n[0] + da * e1[0] + db * e2[0], n[1] + da * e1[1] + db * e2[1], n[2] + da * e1[2] + db * e2[2]]);
    }
    (dist(classical_kick_map(n, params), n) < 1e-11).then_some(n)
}

/// Trace of the tangent map at a fixed point, in an orthonormal tangent basis.
fn tangent_trace(n: [f64; 3], params: &KickedTopParams) -> f64 {
    let (e1, e2) = tangent_basis(n);
    let h = 1e-6;
    let column = |e: [f64; 3]| {
        let plus = classical_kick_map(normalize([n[0] + h * e[0], n[1] + h * e[1], n[2] + h * e[2]]), params);
        let minus = classical_kick_map(normalize([n[0] - h * e[0], n[1] - h * e[1], n[2] - h * e[2]]), params);
        [(plus[0] - minus[0]) / (2.0 * h), (plus[1] - minus[1]) / (2.0 * h), (plus[2] - minus[2]) / (2.0 * h)]
    };
    dot(e1, column(e1)) + dot(e2, column(e2))
}

/// Largest Lyapunov exponent of the classical map per kick, from a shadow
/// orbit renormalized to separation `1e-8` after every kick.
pub fn map_lyapunov(n0: [f64; 3], params: &KickedTopParams, kicks: usize) -> f64 {
    const D0: f64 = 1e-8;
    let (e1, _) = tangent_basis(n0);
    let mut n = n0;
    let mut m = normalize([n0[0] + D0 * e1[0], n0[1] + D0 * e1[1], n0[2] + D0 * e1[2]]);
    let mut sum = 0.0;
    for _ in 0..kicks {
        n = classical_kick_map(n, params);
        m = classical_kick_map(m, params);
        let d = dist(m, n);
        sum += (d / D0).ln();
        let k = D0 / d;
        m = normalize([n[0] + k * (m[0] - n[0]), n[1] + k * (m[1] - n[1]), n[2] + k * (m[2] - n[2])]);
    }
    sum / kicks.max(1) as f64
}

/// Grid point `(θ, φ)` with the largest map Lyapunov exponent.
pub fn most_chaotic_point(params: &KickedTopParams, grid: usize, kicks: usize) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for a in 0..grid {
        for b in 0..grid {
            let theta = PI * (a as f64 + 0.5) / grid as f64;
            let phi = 2.0 * PI * b as f64 / grid as f64 - PI;
            let lambda = map_lyapunov(from_angles(theta, phi), params, kicks);
            if lambda > best.2 {
                best = (theta, phi, lambda);
            }
        }
    }
    best
}

fn from_angles(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn tangent_basis(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(helper, n));
    let e2 = cross(n, e1);
    (e1, e2)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Reduced state of any two of the `N` qubits, built from first and second
/// moments of the collective spin.
///
/// Qubit order is `|q1 q2⟩` with `q1` the most significant bit and `0 = ↑`
/// (`σz = +1`).
#[derive(Debug, Clone)]
pub struct PairReducer {
    ops: SpinOperators,
    anticommutators: [[Mat<C64>; 3]; 3],
}

impl PairReducer {
    pub fn new(j: SpinSpace) -> Result<Self> {
        if j.twice_f() < 2 {
            return Err(Error::param("n_qubits", format!("need at least 2 qubits, got {}", j.twice_f())));
        }
        let ops = build_spin_operators(j);
        let c = ops.components();
        let anti = |a: usize, b: usize| c[a] * c[b] + c[b] * c[a];
        let anticommutators = [
            [anti(0, 0), anti(0, 1), anti(0, 2)],
            [anti(1, 0), anti(1, 1), anti(1, 2)],
            [anti(2, 0), anti(2, 1), anti(2, 2)],
        ];
        Ok(PairReducer { ops, anticommutators })
    }

    pub fn n_qubits(&self) -> usize {
        self.ops.space.twice_f() as usize
    }

    /// 4×4 reduced density matrix of a qubit pair.
    pub fn reduce(&self, state: &[C64]) -> Result<Mat<C64>> {
        let d = self.ops.space.dim();
        if state.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: state.len() });
        }
        let n = self.n_qubits() as f64;
        let comps = self.ops.components();
        let r: [f64; 3] = comps.map(|op| 2.0 * linalg::expectation(op, state).re / n);
        let mut t = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let anti = linalg::expectation(self.anticommutators[a][b].as_ref(), state).re;
                let delta = if a == b { n } else { 0.0 };
                t[a][b] = (2.0 * anti - delta) / (n * (n - 1.0));
            }
        }
        let paulis = pauli_matrices();
        let id = pauli_identity();
        let mut rho = linalg::identity(4);
        let mut add = |m: Mat<C64>, w: f64| {
            for c in 0..4 {
                for r in 0..4 {
                    rho[(r, c)] += m[(r, c)] * w;
                }
            }
        };
        for a in 0..3 {
            add(linalg::kron(paulis[a].as_ref(), id.as_ref()), r[a]);
            add(linalg::kron(id.as_ref(), paulis[a].as_ref()), r[a]);
            for b in 0..3 {
                add(linalg::kron(paulis[a].as_ref(), paulis[b].as_ref()), t[a][b]);
            }
        }
        for c in 0..4 {
            for r in 0..4 {
                rho[(r, c)] *= 0.25;
            }
        }
        Ok(rho)
    }
}

fn pauli_identity() -> Mat<C64> {
    linalg::identity(2)
}

fn pauli_matrices() -> [Mat<C64>; 3] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Mat::from_fn(2, 2, |r, c| if r != c { one } else { z }),
        Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => z,
        }),
        Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => one,
            (1, 1) => -one,
            _ => z,
        }),
    ]
}

/// Convenience wrapper around [`PairReducer`].
pub fn two_qubit_rdm(state: &[C64], n_qubits: usize) -> Result<Mat<C64>> {
    if n_qubits < 2 {
        return Err(Error::param("n_qubits", format!("need at least 2 qubits, got {n_qubits}")));
    }
    PairReducer::new(SpinSpace::from_twice(n_qubits as u32)?)?.reduce(state)
}
