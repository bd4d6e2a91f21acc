//! Atom in a one-dimensional magneto-optical lattice.
//!
//! The lattice potential seen by a hyperfine ground state `F` is
//!
//! ```text
//! V(z) = (4/3) V1 cosΘL cos 2kz  +  s·[ (2/3) V1 sinΘL sin 2kz Fz + μB Bx Fx ]
//! ```
//!
//! with `s = 1/F` (moment `μ = −μB F/F`, the default) or `s = 1` (full spin).
//! The motional degree of freedom lives on a periodic Fourier grid spanning an
//! integer number of lattice periods `λ/2`; the kinetic energy is exact on that
//! grid. Composite amplitudes are ordered motion-major, spin-minor:
//! `index = iz · (2F+1) + im`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::Mat;
use rustfft::{Fft, FftPlanner};

use crate::linalg;
use crate::spin::{build_spin_operators, SpinSpace};
use crate::{Error, Result, C64};

/// Scaled unit system: `ħ = k = 1`, `M = 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledUnits;

impl ScaledUnits {
    pub const HBAR: f64 = 1.0;
    pub const WAVENUMBER: f64 = 1.0;
    pub const MASS: f64 = 0.5;
    /// Laser wavelength `λ = 2π/k`.
    pub const LAMBDA: f64 = 2.0 * PI;

    /// `E_R = ħ²k²/2M`.
    pub fn recoil_energy() -> f64 {
        Self::HBAR * Self::HBAR * Self::WAVENUMBER * Self::WAVENUMBER / (2.0 * Self::MASS)
    }

    pub fn z_from_lambda(z_over_lambda: f64) -> f64 {
        z_over_lambda * Self::LAMBDA
    }

    pub fn z_to_lambda(z: f64) -> f64 {
        z / Self::LAMBDA
    }

    /// Lattice period `λ/2` in units of `1/k`.
    pub fn lattice_period() -> f64 {
        Self::LAMBDA / 2.0
    }
}

/// How the magnetic moment couples to `B_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SpinScale {
    /// `μ·B = μB B·F/F`: the spin term is divided by `F`.
    #[default]
    Normalized,
    /// `μB B·F`: no division by `F`.
    Full,
}

impl fmt::Display for SpinScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinScale::Normalized => "normalized",
            SpinScale::Full => "full",
        })
    }
}

impl FromStr for SpinScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(SpinScale::Normalized),
            "full" => Ok(SpinScale::Full),
            other => Err(Error::param("spin_scale", format!("unknown convention `{other}`"))),
        }
    }
}

/// Lattice parameters; energies in units of `E_R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmolParams {
    /// Single-beam light shift `V1`.
    pub v1: f64,
    /// Relative polarization angle `ΘL` of the counter-propagating beams (radians).
    pub theta_l: f64,
    /// Transverse field `μB Bx`, the chaoticity parameter.
    pub mu_b_bx: f64,
    pub spin: SpinSpace,
    pub spin_scale: SpinScale,
}

impl AmolParams {
    pub fn new(v1: f64, theta_l: f64, mu_b_bx: f64, spin: SpinSpace, spin_scale: SpinScale) -> Result<Self> {
        let p = AmolParams { v1, theta_l, mu_b_bx, spin, spin_scale };
        p.validate()?;
        Ok(p)
    }

    /// `V1 = 160 E_R`, `ΘL = 80°`, `μB Bx = 12 E_R`, cesium `F = 4`.
    pub fn cesium_reference(spin_scale: SpinScale) -> Self {
        AmolParams {
            v1: 160.0,
            theta_l: 80.0_f64.to_radians(),
            mu_b_bx: 12.0,
            spin: SpinSpace::from_twice(8).expect("F = 4"),
            spin_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v1 > 0.0 && self.v1.is_finite()) {
            return Err(Error::param("v1", format!("must be positive, got {}", self.v1)));
        }
        if !(self.theta_l > 0.0 && self.theta_l < PI / 2.0) {
            return Err(Error::param("theta_l", format!("must lie in (0, π/2), got {}", self.theta_l)));
        }
        if !(self.mu_b_bx >= 0.0 && self.mu_b_bx.is_finite()) {
            return Err(Error::param("mu_b_bx", format!("must be non-negative, got {}", self.mu_b_bx)));
        }
        Ok(())
    }

    /// Prefactor `s` multiplying `B_eff·F`.
    pub fn coupling_scale(&self) -> f64 {
        match self.spin_scale {
            SpinScale::Normalized => 1.0 / self.spin.f(),
            SpinScale::Full => 1.0,
        }
    }

    /// Coupling of the classical unit vector `n`: `s·F`.
    pub fn classical_moment(&self) -> f64 {
        self.coupling_scale() * self.spin.f()
    }

    /// `(4/3) V1 cosΘL`.
    pub fn lattice_amplitude(&self) -> f64 {
        4.0 / 3.0 * self.v1 * self.theta_l.cos()
    }

    /// `(2/3) V1 sinΘL`.
    pub fn zeeman_amplitude(&self) -> f64 {
        2.0 / 3.0 * self.v1 * self.theta_l.sin()
    }

    pub fn scalar_potential(&self, z: f64) -> f64 {
        self.lattice_amplitude() * (2.0 * z).cos()
    }

    /// `μB B_eff(z)` as a Cartesian vector.
    pub fn field(&self, z: f64) -> [f64; 3] {
        [self.mu_b_bx, 0.0, self.zeeman_amplitude() * (2.0 * z).sin()]
    }

    /// Scalar potential seen by a fixed `Fz` eigenvalue `m`.
    pub fn diabatic_potential(&self, z: f64, m: f64) -> f64 {
        self.scalar_potential(z) + self.coupling_scale() * m * self.field(z)[2]
    }

    /// `(R, δ)` with `V_m(z) = R cos(2z − δ)`.
    fn diabatic_harmonic(&self, m: f64) -> (f64, f64) {
        let a = self.lattice_amplitude();
        let c = self.coupling_scale() * m * self.zeeman_amplitude();
        (a.hypot(c), c.atan2(a))
    }

    /// Position of the minimum of the `m` diabatic potential in `[−λ/4, λ/4)`.
    pub fn diabatic_well_minimum(&self, m: f64) -> Result<f64> {
        let (r, delta) = self.diabatic_harmonic(m);
        if r < 1e-12 {
            return Err(Error::UnboundPotential { m });
        }
        Ok(wrap_centered(0.5 * (delta + PI), ScaledUnits::lattice_period()))
    }

    /// Harmonic-approximation width `Δz` of the ground state in the deepest
    /// diabatic well.
    pub fn narrowest_packet_width(&self) -> f64 {
        let f = self.spin.f();
        let (depth, _) = self.diabatic_harmonic(f);
        let omega = (4.0 * depth / ScaledUnits::MASS).sqrt();
        (ScaledUnits::HBAR / (2.0 * ScaledUnits::MASS * omega)).sqrt()
    }
}

/// Wraps `x` into `[−period/2, period/2)`.
pub(crate) fn wrap_centered(x: f64, period: f64) -> f64 {
    x - period * (x / period + 0.5).floor()
}

/// Periodic Fourier grid covering `n_periods` lattice periods, centered on `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeGrid {
    pub n_points: usize,
    pub n_periods: usize,
}

impl Default for LatticeGrid {
    fn default() -> Self {
        LatticeGrid { n_points: 256, n_periods: 1 }
    }
}

impl LatticeGrid {
    pub fn new(n_points: usize, n_periods: usize) -> Result<Self> {
        if n_points < 64 || !n_points.is_power_of_two() {
            return Err(Error::param("n_points", format!("must be a power of two ≥ 64, got {n_points}")));
        }
        if n_periods == 0 || n_points % n_periods != 0 || !(n_points / n_periods).is_power_of_two() {
            return Err(Error::param("n_periods", format!("{n_periods} periods do not tile {n_points} points")));
        }
        Ok(LatticeGrid { n_points, n_periods })
    }

    pub fn length(&self) -> f64 {
        self.n_periods as f64 * ScaledUnits::lattice_period()
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        -0.5 * self.length() + i as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.position(i)).collect()
    }

    /// Momentum of DFT bin `k` (standard FFT ordering; the Nyquist bin is negative).
    pub fn momentum(&self, k: usize) -> f64 {
        let n = self.n_points as isize;
        let kk = k as isize;
        let signed = if kk < n / 2 { kk } else { kk - n };
        signed as f64 * 2.0 * PI / self.length()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.momentum(k)).collect()
    }

    /// First row of the circulant kinetic matrix `T = F† diag(p²/2M) F`.
    pub fn kinetic_kernel(&self) -> Vec<f64> {
        let n = self.n_points;
        let dz = self.spacing();
        let momenta = self.momenta();
        (0..n)
            .map(|d| {
                momenta
                    .iter()
                    .map(|&p| p * p / (2.0 * ScaledUnits::MASS) * (p * d as f64 * dz).cos())
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    /// Grid restricted to one lattice period.
    fn single_period(&self) -> LatticeGrid {
        LatticeGrid { n_points: self.n_points / self.n_periods, n_periods: 1 }
    }
}

/// Forward/inverse unitary DFT pair on a grid.
#[derive(Clone)]
pub struct GridFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridFft { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    /// Position → momentum amplitudes, normalized so the transform is unitary.
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

/// Full lattice Hamiltonian on the composite grid ⊗ spin space.
///
/// Fails with [`Error::GridTooCoarse`] when the narrowest wave packet the
/// lattice supports (ground state of the deepest diabatic well) spans fewer than
/// four grid spacings.
pub fn build_hamiltonian(params: &AmolParams, grid: &LatticeGrid) -> Result<Mat<C64>> {
    params.validate()?;
    let width = params.narrowest_packet_width();
    if width < 4.0 * grid.spacing() {
        return Err(Error::GridTooCoarse { width, spacing: grid.spacing() });
    }
    let ops = build_spin_operators(params.spin);
    let ds = params.spin.dim();
    let n = grid.n_points;
    let kernel = grid.kinetic_kernel();
    let s = params.coupling_scale();
    let mut h = Mat::<C64>::zeros(n * ds, n * ds);
    for iz in 0..n {
        for jz in 0..n {
            let t = kernel[(iz + n - jz) % n];
            for a in 0..ds {
                h[(iz * ds + a, jz * ds + a)] += C64::new(t, 0.0);
            }
        }
        let z = grid.position(iz);
        let u = params.scalar_potential(z);
        let b = params.field(z);
        for a in 0..ds {
            for c in 0..ds {
                let mut v = (ops.fx[(a, c)] * b[0] + ops.fz[(a, c)] * b[2]) * s;
                if a == c {
                    v += u;
                }
                h[(iz * ds + a, iz * ds + c)] += v;
            }
        }
    }
    Ok(h)
}

/// Per-point spin-space potential matrix `U(z)·1 + s·B_eff(z)·F`.
pub fn local_potential(params: &AmolParams, z: f64) -> Mat<C64> {
    let ops = build_spin_operators(params.spin);
    let b = params.field(z);
    let s = params.coupling_scale();
    let u = params.scalar_potential(z);
    let d = params.spin.dim();
    Mat::from_fn(d, d, |a, c| {
        let mut v = (ops.fx[(a, c)] * b[0] + ops.fz[(a, c)] * b[2]) * s;
        if a == c {
            v += u;
        }
        v
    })
}

/// Matrix-free form of [`build_hamiltonian`]: kinetic term by FFT, potential
/// as a 2F+1 block per grid point.
#[derive(Clone)]
pub struct HamiltonianOperator {
    grid: LatticeGrid,
    n_spin: usize,
    kinetic: Vec<f64>,
    potential: Vec<Mat<C64>>,
    fft: GridFft,
}

impl HamiltonianOperator {
    pub fn new(params: &AmolParams, grid: &LatticeGrid) -> Result<Self> {
        params.validate()?;
        let width = params.narrowest_packet_width();
        if width < 4.0 * grid.spacing() {
            return Err(Error::GridTooCoarse { width, spacing: grid.spacing() });
        }
        Ok(HamiltonianOperator {
            grid: *grid,
            n_spin: params.spin.dim(),
            kinetic: grid.momenta().iter().map(|p| p * p / (2.0 * ScaledUnits::MASS)).collect(),
            potential: grid.positions().iter().map(|&z| local_potential(params, z)).collect(),
            fft: GridFft::new(grid.n_points),
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }
}

impl linalg::LinearOperator for HamiltonianOperator {
    fn dim(&self) -> usize {
        self.grid.n_points * self.n_spin
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (n, ds) = (self.grid.n_points, self.n_spin);
        let mut column = vec![C64::new(0.0, 0.0); n];
        for a in 0..ds {
            for iz in 0..n {
                column[iz] = x[iz * ds + a];
            }
            self.fft.forward(&mut column);
            for (c, t) in column.iter_mut().zip(&self.kinetic) {
                *c *= *t;
            }
            self.fft.inverse(&mut column);
            for iz in 0..n {
                y[iz * ds + a] = column[iz];
            }
        }
        for iz in 0..n {
            let v = &self.potential[iz];
            let block = &x[iz * ds..(iz + 1) * ds];
            for a in 0..ds {
                let mut acc = C64::new(0.0, 0.0);
                for (c, xc) in block.iter().enumerate() {
                    acc += v[(a, c)] * xc;
                }
                y[iz * ds + a] += acc;
            }
        }
    }
}

/// Product state amplitudes with subsystem metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    pub amplitudes: Vec<C64>,
    pub n_motion: usize,
    pub n_spin: usize,
}

impl CompositeState {
    pub fn new(amplitudes: Vec<C64>, n_motion: usize, n_spin: usize) -> Result<Self> {
        if amplitudes.len() != n_motion * n_spin {
            return Err(Error::DimensionMismatch { expected: n_motion * n_spin, found: amplitudes.len() });
        }
        let norm = linalg::norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(CompositeState { amplitudes, n_motion, n_spin })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_motion, self.n_spin)
    }
}

/// Tensor product `|motion⟩ ⊗ |spin⟩` in motion-major order.
pub fn initial_product_state(motional: &[C64], spin: &[C64]) -> Result<CompositeState> {
    for v in [motional, spin] {
        let norm = linalg::norm(v);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
    }
    let ds = spin.len();
    let mut amps = Vec::with_capacity(motional.len() * ds);
    for &m in motional {
        amps.extend(spin.iter().map(|&s| m * s));
    }
    CompositeState::new(amps, motional.len(), ds)
}

/// Normalized periodic Gaussian with position spread `Δz/λ = width` centered
/// at `(z0, p0)`.
pub fn motional_gaussian_state(grid: &LatticeGrid, z0_over_lambda: f64, p0_over_hbark: f64, width_over_lambda: f64) -> Result<Vec<C64>> {
    let sigma = ScaledUnits::z_from_lambda(width_over_lambda);
    if !(sigma >= 4.0 * grid.spacing()) {
        return Err(Error::GridTooCoarse { width: sigma, spacing: grid.spacing() });
    }
    let z0 = ScaledUnits::z_from_lambda(z0_over_lambda);
    let p0 = p0_over_hbark * ScaledUnits::HBAR * ScaledUnits::WAVENUMBER;
    let l = grid.length();
    let images = (8.0 * sigma / l).ceil() as i64 + 1;
    let mut psi: Vec<C64> = (0..grid.n_points)
        .map(|i| {
            let z = grid.position(i);
            (-images..=images)
                .map(|n| {
                    let d = z - z0 + n as f64 * l;
                    C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), p0 * d)
                })
                .sum()
        })
        .collect();
    linalg::normalize(&mut psi);
    Ok(psi)
}

/// Ground state of one diabatic potential.
#[derive(Debug, Clone)]
pub struct DiabaticGroundState {
    pub amplitudes: Vec<C64>,
    /// Lowest eigenvalue of the single-period diabatic Hamiltonian.
    pub energy: f64,
    /// Well minimum before the shift (units of `1/k`).
    pub well_minimum: f64,
}

/// Dense single-channel Hamiltonian `T + V_m(z)` on `grid`.
pub fn diabatic_hamiltonian(params: &AmolParams, grid: &LatticeGrid, m: f64) -> Mat<C64> {
    let n = grid.n_points;
    let kernel = grid.kinetic_kernel();
    Mat::from_fn(n, n, |i, j| {
        let mut v = kernel[(i + n - j) % n];
        if i == j {
            v += params.diabatic_potential(grid.position(i), m);
        }
        C64::new(v, 0.0)
    })
}

/// Ground state of the `m` diabatic potential, translated by `shift` (`z/λ`).
///
/// On grids spanning several periods the single-well ground state is embedded
/// in the central period.
pub fn diabatic_ground_state(params: &AmolParams, grid: &LatticeGrid, spin_m: f64, shift_over_lambda: f64) -> Result<DiabaticGroundState> {
    if params.spin.index_of(spin_m).is_none() {
        return Err(Error::param("spin_m", format!("{spin_m} is not a projection of F = {}", params.spin.f())));
    }
    let well_minimum = params.diabatic_well_minimum(spin_m)?;
    let cell = grid.single_period();
    let h = diabatic_hamiltonian(params, &cell, spin_m);
    let evd = linalg::hermitian_eigen(h.as_ref())?;
    let mut ground: Vec<C64> = (0..cell.n_points).map(|i| evd.vectors[(i, 0)]).collect();
    // Fix the sign so the largest component is positive.
    let pivot = ground
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    ground.iter_mut().for_each(|z| *z *= phase);

    let mut amplitudes = vec![C64::new(0.0, 0.0); grid.n_points];
    let offset = (grid.n_periods - 1) * cell.n_points / 2;
    amplitudes[offset..offset + cell.n_points].copy_from_slice(&ground);
    let amplitudes = translate(&amplitudes, grid, ScaledUnits::z_from_lambda(shift_over_lambda));
    Ok(DiabaticGroundState { amplitudes, energy: evd.values[0], well_minimum })
}

/// Translates a periodic grid function by `shift` (units of `1/k`) using the
/// Fourier shift theorem.
pub fn translate(psi: &[C64], grid: &LatticeGrid, shift: f64) -> Vec<C64> {
    let fft = GridFft::new(grid.n_points);
    let mut buf = psi.to_vec();
    fft.forward(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        *z *= C64::from_polar(1.0, -grid.momentum(k) * shift);
    }
    fft.inverse(&mut buf);
    buf
}

/// Mean and spread of position and momentum of the motional marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionalMoments {
    /// Circular mean position (units of `1/k`).
    pub mean_z: f64,
    pub std_z: f64,
    pub mean_p: f64,
    pub std_p: f64,
}

impl MotionalMoments {
    pub fn mean_z_over_lambda(&self) -> f64 {
        ScaledUnits::z_to_lambda(self.mean_z)
    }

    pub fn std_z_over_lambda(&self) -> f64 {
        ScaledUnits::z_to_lambda(self.std_z)
    }
}

/// Moments of a motion ⊗ spin state (`n_spin = 1` for a bare motional state).
///
/// Position statistics use the circular mean on the periodic domain and
/// minimum-image distances from it.
pub fn motional_moments(amplitudes: &[C64], grid: &LatticeGrid, n_spin: usize) -> MotionalMoments {
    let n = grid.n_points;
    assert_eq!(amplitudes.len(), n * n_spin);
    let l = grid.length();
    let density: Vec<f64> = (0..n)
        .map(|i| amplitudes[i * n_spin..(i + 1) * n_spin].iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let total: f64 = density.iter().sum();
    let winding: C64 = density
        .iter()
        .enumerate()
        .map(|(i, &w)| C64::from_polar(w, 2.0 * PI * grid.position(i) / l))
        .sum();
    let mean_z = winding.arg() * l / (2.0 * PI);
    let var_z = density
        .iter()
        .enumerate()
        .map(|(i, &w)| w * wrap_centered(grid.position(i) - mean_z, l).powi(2))
        .sum::<f64>()
        / total;

    let fft = GridFft::new(n);
    let mut pdens = vec![0.0_f64; n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for a in 0..n_spin {
        for i in 0..n {
            buf[i] = amplitudes[i * n_spin + a];
        }
        fft.forward(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            pdens[k] += z.norm_sqr();
        }
    }
    let mean_p = pdens.iter().enumerate().map(|(k, &w)| w * grid.momentum(k)).sum::<f64>() / total;
    let var_p = pdens
        .iter()
        .enumerate()
        .map(|(k, &w)| w * (grid.momentum(k) - mean_p).powi(2))
        .sum::<f64>()
        / total;
    MotionalMoments { mean_z, std_z: var_z.sqrt(), mean_p, std_p: var_p.sqrt() }
}

/// Phase-space point `(z/λ, p/ħk, θ, φ)` used to label initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpacePoint {
    pub z_over_lambda: f64,
    pub p_over_hbark: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PhaseSpacePoint {
    pub const fn new(z_over_lambda: f64, p_over_hbark: f64, theta: f64, phi: f64) -> Self {
        PhaseSpacePoint { z_over_lambda, p_over_hbark, theta, phi }
    }

    /// Initial condition labelled regular: `(−0.15, 0, 1.27, 0)`.
    pub const REGULAR: PhaseSpacePoint = PhaseSpacePoint::new(-0.15, 0.0, 1.27, 0.0);
    /// Initial condition labelled chaotic: `(0.06, 0, π/2, 0)`.
    pub const CHAOTIC: PhaseSpacePoint = PhaseSpacePoint::new(0.06, 0.0, PI / 2.0, 0.0);
}

/// Motional part of an initial-state preparation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionalPrep {
    /// Periodic Gaussian with position spread `Δz/λ`.
    Gaussian { width_over_lambda: f64 },
    /// Ground state of the diabatic potential for `Fz = m`, shifted to the target center.
    Diabatic { m: f64 },
}

/// Builds `|motion(z, p)⟩ ⊗ |θ, φ⟩`.
pub fn prepare_state(params: &AmolParams, grid: &LatticeGrid, point: PhaseSpacePoint, prep: MotionalPrep) -> Result<CompositeState> {
    let motional = match prep {
        MotionalPrep::Gaussian { width_over_lambda } => {
            motional_gaussian_state(grid, point.z_over_lambda, point.p_over_hbark, width_over_lambda)?
        }
        MotionalPrep::Diabatic { m } => {
            let well = params.diabatic_well_minimum(m)?;
            let shift = point.z_over_lambda - ScaledUnits::z_to_lambda(well);
            let mut psi = diabatic_ground_state(params, grid, m, shift)?.amplitudes;
            if point.p_over_hbark != 0.0 {
                let p0 = point.p_over_hbark;
                let quanta = p0 * grid.length() / (2.0 * PI);
                if (quanta - quanta.round()).abs() > 1e-9 {
                    return Err(Error::param("p0", format!("momentum kick {p0} is not commensurate with the periodic grid")));
                }
                for (i, z) in psi.iter_mut().enumerate() {
                    *z *= C64::from_polar(1.0, p0 * grid.position(i));
                }
            }
            psi
        }
    };
    let spin = crate::spin::spin_coherent_state(params.spin, point.theta, point.phi)?;
    initial_product_state(&motional, &spin)
}
