//! Time-stepping propagator for the lattice atom, independent of any eigensolve.
//!
//! Each step applies `e^{−iVh/2} e^{−iTh} e^{−iVh/2}`: the kinetic factor is
//! diagonal in momentum (FFT per spin component) and the potential factor is a
//! `(2F+1)×(2F+1)` unitary per grid point.

use faer::Mat;

use crate::amol::{local_potential, AmolParams, CompositeState, GridFft, LatticeGrid, ScaledUnits};
use crate::linalg;
use crate::spectral::Propagator;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    /// Second-order symmetric splitting.
    #[default]
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Fourth,
}

impl SplitOrder {
    fn weights(&self) -> &'static [f64] {
        const STRANG: [f64; 1] = [1.0];
        const FOURTH: [f64; 3] = [1.351_207_191_959_657_6, -1.702_414_383_919_315_3, 1.351_207_191_959_657_6];
        match self {
            SplitOrder::Strang => &STRANG,
            SplitOrder::Fourth => &FOURTH,
        }
    }
}

/// Largest admissible potential phase spread per step, `h·(V_max − V_min)`.
const MAX_PHASE_PER_STEP: f64 = 1.0;

struct SubStep {
    /// `e^{−iV(z)h/2}` per grid point.
    half_potential: Vec<Mat<C64>>,
    /// `e^{−iT h}` per momentum bin.
    kinetic: Vec<C64>,
}

pub struct SplitOperator {
    grid: LatticeGrid,
    n_spin: usize,
    dt: f64,
    order: SplitOrder,
    fft: GridFft,
    substeps: Vec<SubStep>,
}

impl SplitOperator {
    pub fn new(params: &AmolParams, grid: &LatticeGrid, dt: f64, order: SplitOrder) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::StepTooLarge { dt, reason: "step must be positive and finite".into() });
        }
        let potentials: Vec<Mat<C64>> = grid.positions().iter().map(|&z| local_potential(params, z)).collect();
        let eigs: Vec<linalg::HermitianEigen> = potentials.iter().map(|v| linalg::hermitian_eigen(v.as_ref())).collect::<Result<_>>()?;
        let vmax = eigs.iter().flat_map(|e| e.values.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
        let vmin = eigs.iter().flat_map(|e| e.values.iter().copied()).fold(f64::INFINITY, f64::min);
        let widest = order.weights().iter().fold(0.0f64, |a, w| a.max(w.abs())) * dt;
        if widest * (vmax - vmin) > MAX_PHASE_PER_STEP {
            return Err(Error::StepTooLarge {
                dt,
                reason: format!(
                    "potential phase spread {:.3} rad per step exceeds {MAX_PHASE_PER_STEP}",
                    widest * (vmax - vmin)
                ),
            });
        }
        let kinetic_energy: Vec<f64> = grid.momenta().iter().map(|p| p * p / (2.0 * ScaledUnits::MASS)).collect();
        let substeps = order
            .weights()
            .iter()
            .map(|&w| {
                let h = w * dt;
                SubStep {
                    half_potential: eigs.iter().map(|e| linalg::spectral_function(e, |v| C64::from_polar(1.0, -0.5 * h * v))).collect(),
                    kinetic: kinetic_energy.iter().map(|&t| C64::from_polar(1.0, -h * t)).collect(),
                }
            })
            .collect();
        Ok(SplitOperator { grid: *grid, n_spin: params.spin.dim(), dt, order, fft: GridFft::new(grid.n_points), substeps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn order(&self) -> SplitOrder {
        self.order
    }

    /// Advances `state` in place by `steps` full steps.
    pub fn step(&self, state: &mut [C64], steps: usize) {
        let (n, ds) = (self.grid.n_points, self.n_spin);
        let mut column = vec![C64::new(0.0, 0.0); n];
        let mut block = vec![C64::new(0.0, 0.0); ds];
        let apply_potential = |state: &mut [C64], block: &mut [C64], ops: &[Mat<C64>]| {
            for (iz, u) in ops.iter().enumerate() {
                let seg = &mut state[iz * ds..(iz + 1) * ds];
                for a in 0..ds {
                    block[a] = (0..ds).map(|c| u[(a, c)] * seg[c]).sum();
                }
                seg.copy_from_slice(block);
            }
        };
        for _ in 0..steps {
            for sub in &self.substeps {
                apply_potential(state, &mut block, &sub.half_potential);
                for a in 0..ds {
                    for iz in 0..n {
                        column[iz] = state[iz * ds + a];
                    }
                    self.fft.forward(&mut column);
                    for (c, k) in column.iter_mut().zip(&sub.kinetic) {
                        *c *= k;
                    }
                    self.fft.inverse(&mut column);
                    for iz in 0..n {
                        state[iz * ds + a] = column[iz];
                    }
                }
                apply_potential(state, &mut block, &sub.half_potential);
            }
        }
    }

    /// Number of steps used to reach `t`; `t` must be a multiple of `dt` to within 1e-9.
    fn steps_for(&self, t: f64) -> Result<usize> {
        if t < 0.0 {
            return Err(Error::param("t", format!("propagation time must be non-negative, got {t}")));
        }
        let steps = (t / self.dt).round();
        if (steps * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::StepTooLarge { dt: self.dt, reason: format!("time {t} is not a multiple of the step") });
        }
        Ok(steps as usize)
    }
}

/// Propagates `state` to time `t` with step `dt` (second order).
pub fn split_operator_propagate(params: &AmolParams, grid: &LatticeGrid, state: &CompositeState, t: f64, dt: f64) -> Result<Vec<C64>> {
    let prop = SplitOperator::new(params, grid, dt, SplitOrder::Strang)?;
    let expected = grid.n_points * params.spin.dim();
    if state.amplitudes.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: state.amplitudes.len() });
    }
    let mut psi = state.amplitudes.clone();
    prop.step(&mut psi, prop.steps_for(t)?);
    Ok(psi)
}

/// [`SplitOperator`] bound to an initial state.
pub struct SplitOperatorPropagator {
    pub stepper: SplitOperator,
    pub initial: Vec<C64>,
}

impl Propagator for SplitOperatorPropagator {
    fn dim(&self) -> usize {
        self.initial.len()
    }

    fn propagate(&self, t: f64) -> Result<Vec<C64>> {
        let mut psi = self.initial.clone();
        self.stepper.step(&mut psi, self.stepper.steps_for(t)?);
        Ok(psi)
    }

    /// Sorted times reuse the previous state instead of restarting at zero.
    fn propagate_batch(&self, times: &[f64]) -> Result<Vec<Vec<C64>>> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut out = vec![Vec::new(); times.len()];
        let mut psi = self.initial.clone();
        let mut done = 0usize;
        for i in order {
            let target = self.stepper.steps_for(times[i])?;
            self.stepper.step(&mut psi, target - done);
            done = target;
            out[i] = psi.clone();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amol::{prepare_state, MotionalPrep, PhaseSpacePoint, SpinScale};
    use crate::spin::SpinSpace;
    use std::f64::consts::PI;

    /// Freely spreading Gaussian with `H = p²` (M = 1/2), summed over periodic images.
    fn free_gaussian(grid: &LatticeGrid, sigma: f64, t: f64) -> Vec<C64> {
        let s2 = C64::new(sigma * sigma, t);
        let pref = (2.0 * PI * sigma * sigma).powf(-0.25) * (C64::new(sigma * sigma, 0.0) / s2).sqrt();
        let l = grid.length();
        (0..grid.n_points)
            .map(|i| {
                let z = grid.position(i);
                (-20..=20)
                    .map(|k| {
                        let x = z + k as f64 * l;
                        pref * (-(x * x) / (s2 * 4.0)).exp()
                    })
                    .sum::<C64>()
                    * grid.spacing().sqrt()
            })
            .collect()
    }

    fn field_free_params() -> AmolParams {
        let mut p = AmolParams::cesium_reference(SpinScale::Normalized);
        p.v1 = 1e-300;
        p.mu_b_bx = 0.0;
        p.spin = SpinSpace::new(0.5).unwrap();
        p
    }

    #[test]
    fn free_dispersion_matches_analytic_spreading() {
        let grid = LatticeGrid::new(256, 4).unwrap();
        let params = field_free_params();
        let sigma = 0.5;
        let psi0 = free_gaussian(&grid, sigma, 0.0);
        // Spin-up component only.
        let mut state = vec![C64::new(0.0, 0.0); 2 * grid.n_points];
        for (i, a) in psi0.iter().enumerate() {
            state[2 * i] = *a;
        }
        let prop = SplitOperator::new(&params, &grid, 0.05, SplitOrder::Strang).unwrap();
        prop.step(&mut state, 10);
        let expected = free_gaussian(&grid, sigma, 0.5);
        let err = (0..grid.n_points).map(|i| (state[2 * i] - expected[i]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn strang_error_scales_quadratically() {
        let params = AmolParams::cesium_reference(SpinScale::Normalized);
        let grid = LatticeGrid::default();
        let psi0 = prepare_state(&params, &grid, PhaseSpacePoint::REGULAR, MotionalPrep::Gaussian { width_over_lambda: 0.05 })
            .unwrap();
        let t = 0.2;
        let run = |dt: f64, order: SplitOrder| {
            let p = SplitOperator::new(&params, &grid, dt, order).unwrap();
            let mut s = psi0.amplitudes.clone();
            p.step(&mut s, (t / dt).round() as usize);
            s
        };
        let reference = run(2.5e-4, SplitOrder::Fourth);
        let diff = |a: &[C64]| linalg::norm(&a.iter().zip(&reference).map(|(x, y)| x - y).collect::<Vec<_>>());
        let e1 = diff(&run(4e-3, SplitOrder::Strang));
        let e2 = diff(&run(2e-3, SplitOrder::Strang));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn norm_preserved() {
        let params = AmolParams::cesium_reference(SpinScale::Full);
        let grid = LatticeGrid::default();
        let psi0 = prepare_state(&params, &grid, PhaseSpacePoint::CHAOTIC, MotionalPrep::Gaussian { width_over_lambda: 0.07 })
            .unwrap();
        let psi = split_operator_propagate(&params, &grid, &psi0, 0.5, 1e-3).unwrap();
        assert!((linalg::norm(&psi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oversized_step_rejected() {
        let params = AmolParams::cesium_reference(SpinScale::Full);
        let grid = LatticeGrid::default();
        assert!(matches!(SplitOperator::new(&params, &grid, 0.1, SplitOrder::Strang), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn batch_matches_individual_propagation() {
        let params = AmolParams::cesium_reference(SpinScale::Normalized);
        let grid = LatticeGrid::default();
        let psi0 = prepare_state(&params, &grid, PhaseSpacePoint::REGULAR, MotionalPrep::Gaussian { width_over_lambda: 0.05 })
            .unwrap();
        let prop = SplitOperatorPropagator {
            stepper: SplitOperator::new(&params, &grid, 1e-3, SplitOrder::Strang).unwrap(),
            initial: psi0.amplitudes,
        };
        let times = [0.05, 0.01, 0.03];
        let batch = prop.propagate_batch(&times).unwrap();
        for (t, b) in times.iter().zip(&batch) {
            let single = prop.propagate(*t).unwrap();
            assert!(single.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        assert!(prop.propagate(0.0105).is_err());
    }
}
