//! Eigenbasis propagation for time-independent Hamiltonians and Floquet operators.
//!
//! With `A = Σᵢ λᵢ |φᵢ⟩⟨φᵢ|` the evolution operator is `U(t) = Σᵢ e^{−iωᵢt} |φᵢ⟩⟨φᵢ|`,
//! where `ωᵢ = Eᵢ` (ħ = 1) for a Hamiltonian and `ωᵢ = φᵢ` with `t` an integer kick
//! count for a Floquet operator `F|φᵢ⟩ = e^{−iφᵢ}|φᵢ⟩`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::entanglement::{partial_trace_outer, Bipartition};
use crate::linalg::{self, LinearOperator};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Eigenvalues are energies `E_i = ħω_i` in units of `E_R`.
    Hamiltonian,
    /// Eigenvalues are eigenphases `φ_m ∈ (−π, π]`.
    Floquet,
}

impl SpectrumKind {
    pub fn eigenvalue_units(&self) -> &'static str {
        match self {
            SpectrumKind::Hamiltonian => "E_R",
            SpectrumKind::Floquet => "rad",
        }
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
///
/// A decomposition from the iterative solver keeps only the eigenvectors that
/// support one initial state; `residual_population` is the part of that
/// state's norm they miss.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub kind: SpectrumKind,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<C64>,
    pub residual_population: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.dim()
    }

    /// `⟨φᵢ|ψ⟩` for every retained eigenvector.
    pub fn coefficients(&self, state: &[C64]) -> Result<Vec<C64>> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.len() });
        }
        Ok(linalg::adjoint_mat_vec(self.eigenvectors.as_ref(), state))
    }

    /// Floquet evolution is only defined at whole kicks.
    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.kind == SpectrumKind::Floquet && t.fract() != 0.0 {
            return Err(Error::NonIntegerKick(t));
        }
        Ok(())
    }

    pub fn phase_factor(&self, i: usize, t: f64) -> C64 {
        C64::from_polar(1.0, -self.eigenvalues[i] * t)
    }

    /// Largest entry of `A − Σᵢ λᵢ|φᵢ⟩⟨φᵢ|`, with `λᵢ = Eᵢ` or `e^{−iφᵢ}`.
    pub fn reconstruction_residual(&self, op: MatRef<'_, C64>) -> f64 {
        let n = self.len();
        let scaled = Mat::from_fn(self.dim(), n, |r, c| {
            let lambda = match self.kind {
                SpectrumKind::Hamiltonian => C64::new(self.eigenvalues[c], 0.0),
                SpectrumKind::Floquet => C64::from_polar(1.0, -self.eigenvalues[c]),
            };
            self.eigenvectors[(r, c)] * lambda
        });
        let back = &scaled * self.eigenvectors.adjoint();
        linalg::max_abs((&back - op).as_ref())
    }

    /// Largest entry of `V†V − 1`.
    pub fn orthonormality_residual(&self) -> f64 {
        linalg::unitarity_residual(self.eigenvectors.as_ref())
    }
}

/// Tolerance on Hermiticity/unitarity of the input, relative to its largest entry.
const INPUT_TOL: f64 = 1e-10;

/// Dense decomposition of a Hermitian (`Hamiltonian`) or unitary (`Floquet`) matrix.
pub fn decompose(op: MatRef<'_, C64>, kind: SpectrumKind) -> Result<SpectralDecomposition> {
    if op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch { expected: op.nrows(), found: op.ncols() });
    }
    match kind {
        SpectrumKind::Hamiltonian => {
            let residual = linalg::hermiticity_residual(op);
            if residual > INPUT_TOL * linalg::max_abs(op).max(1.0) {
                return Err(Error::NotHermitian { residual });
            }
            let evd = linalg::hermitian_eigen(op)?;
            Ok(SpectralDecomposition { kind, eigenvalues: evd.values, eigenvectors: evd.vectors, residual_population: 0.0 })
        }
        SpectrumKind::Floquet => {
            let residual = linalg::unitarity_residual(op);
            if residual > INPUT_TOL {
                return Err(Error::NotUnitary { residual });
            }
            floquet_eigen(op)
        }
    }
}

/// Unitary eigendecomposition through a Cayley transform.
///
/// The spectrum is rotated so that `−1` sits in the middle of its widest
/// angular gap; `H = i(1 − F')(1 + F')⁻¹` is then a well-conditioned Hermitian
/// matrix sharing the eigenvectors of `F`, and its orthonormal eigenbasis
/// resolves near-degenerate doublets without the loss of orthogonality a
/// general eigensolver would suffer.
fn floquet_eigen(f: MatRef<'_, C64>) -> Result<SpectralDecomposition> {
    let n = f.nrows();
    let values = f.eigenvalues().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let mut angles: Vec<f64> = values.iter().map(|z| z.arg()).collect();
    angles.sort_by(f64::total_cmp);
    let mut gap_center = 0.0;
    let mut widest = -1.0;
    for k in 0..n {
        let a = angles[k];
        let b = if k + 1 < n { angles[k + 1] } else { angles[0] + 2.0 * std::f64::consts::PI };
        if b - a > widest {
            widest = b - a;
            gap_center = 0.5 * (a + b);
        }
    }
    // e^{iγ} e^{i·gap_center} = −1.
    let shift = C64::from_polar(1.0, std::f64::consts::PI - gap_center);
    let eye = linalg::identity(n);
    let fp = Mat::from_fn(n, n, |r, c| f[(r, c)] * shift);
    let plus = &eye + &fp;
    let minus = &eye - &fp;
    let lu = plus.partial_piv_lu();
    let x = faer::linalg::solvers::Solve::solve(&lu, &minus);
    let i = C64::new(0.0, 1.0);
    let h = Mat::from_fn(n, n, |r, c| 0.5 * (i * x[(r, c)] + (i * x[(c, r)]).conj()));
    let evd = linalg::hermitian_eigen(h.as_ref())?;

    let mut phases: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let v: Vec<C64> = evd.vectors.col(k).iter().copied().collect();
            let fv = linalg::mat_vec(f, &v);
            (fold_phase(-linalg::inner(&v, &fv).arg()), k)
        })
        .collect();
    phases.sort_by(|a, b| a.0.total_cmp(&b.0));
    let eigenvalues = phases.iter().map(|p| p.0).collect();
    let eigenvectors = Mat::from_fn(n, n, |r, c| evd.vectors[(r, phases[c].1)]);
    Ok(SpectralDecomposition { kind: SpectrumKind::Floquet, eigenvalues, eigenvectors, residual_population: 0.0 })
}

/// Folds an angle into `(−π, π]`.
pub fn fold_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    } else if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Controls [`decompose_for_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportOptions {
    /// Dimensions up to this use the dense solver.
    pub dense_limit: usize,
    /// Stop once the captured initial-state population exceeds `1 − tol`.
    pub population_tol: f64,
    /// Ritz pairs with residual below `ritz_tol · ‖H‖` count as converged.
    pub ritz_tol: f64,
    pub max_krylov: usize,
}

impl Default for SupportOptions {
    fn default() -> Self {
        SupportOptions { dense_limit: 4096, population_tol: 1e-6, ritz_tol: 1e-10, max_krylov: 3000 }
    }
}

/// Eigenstates of a Hermitian operator that carry the population of `state`.
///
/// Up to `dense_limit` dimensions this is the full dense decomposition. Above
/// it, a Lanczos recursion started from `state` (with full
/// reorthogonalization) is grown until the converged Ritz vectors hold all but
/// `population_tol` of the state; the remainder is reported in
/// `residual_population`.
pub fn decompose_for_state(op: &dyn LinearOperator, state: &[C64], opts: &SupportOptions) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if state.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: state.len() });
    }
    if n <= opts.dense_limit {
        return decompose(op.to_dense().as_ref(), SpectrumKind::Hamiltonian);
    }
    lanczos_support(op, state, opts)
}

fn lanczos_support(op: &dyn LinearOperator, state: &[C64], opts: &SupportOptions) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let mut q0 = state.to_vec();
    let norm = linalg::normalize(&mut q0);
    if norm == 0.0 {
        return Err(Error::NotNormalized { norm });
    }
    let max_m = opts.max_krylov.min(n);
    let mut basis: Vec<Vec<C64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut op_norm: f64 = 0.0;
    let block = 50;

    loop {
        let m = basis.len();
        let q = &basis[m - 1];
        op.apply(q, &mut w);
        let a = linalg::inner(q, &w).re;
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let bnorm = linalg::norm(&w);
        op_norm = op_norm.max(a.abs() + bnorm + beta.last().copied().unwrap_or(0.0));
        let exhausted = bnorm <= 1e-12 * op_norm.max(1.0) || m == max_m;
        if m % block == 0 || exhausted {
            let (values, vectors) = tridiagonal_eigen(&alpha, &beta)?;
            let accepted: Vec<usize> = (0..m)
                .filter(|&k| exhausted && bnorm <= 1e-12 * op_norm.max(1.0) || (bnorm * vectors[(m - 1, k)]).abs() < opts.ritz_tol * op_norm)
                .collect();
            let captured: f64 = accepted.iter().map(|&k| vectors[(0, k)].powi(2)).sum();
            if captured >= 1.0 - opts.population_tol || exhausted {
                if captured < 1.0 - opts.population_tol {
                    log::warn!("Krylov space exhausted at dimension {m}; captured population {captured:.9}");
                }
                let ritz = Mat::from_fn(n, accepted.len(), |r, c| {
                    let k = accepted[c];
                    let mut acc = C64::new(0.0, 0.0);
                    for (i, b) in basis.iter().enumerate() {
                        acc += b[r] * vectors[(i, k)];
                    }
                    acc
                });
                return Ok(SpectralDecomposition {
                    kind: SpectrumKind::Hamiltonian,
                    eigenvalues: accepted.iter().map(|&k| values[k]).collect(),
                    eigenvectors: ritz,
                    residual_population: (1.0 - captured).max(0.0),
                });
            }
        }
        beta.push(bnorm);
        let next: Vec<C64> = w.iter().map(|z| z / bnorm).collect();
        basis.push(next);
    }
}

/// Eigenpairs of the real symmetric tridiagonal matrix with diagonal `alpha`
/// and off-diagonal `beta` (ascending eigenvalues).
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok((evd.S().column_vector().iter().copied().collect(), evd.U().to_owned()))
}

/// `(eigenvalue, ρᵢᵢ)` pairs in eigenvalue order.
#[derive(Debug, Clone)]
pub struct SupportSpectrum {
    pub kind: SpectrumKind,
    pub eigenvalues: Vec<f64>,
    pub populations: Vec<f64>,
    pub residual_population: f64,
}

/// Eigenvalues closer than a tolerance, with their summed population.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateGroup {
    pub indices: Vec<usize>,
    pub mean_eigenvalue: f64,
    pub population: f64,
}

impl SupportSpectrum {
    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    /// Indices of the `k` most populated eigenstates, largest first.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.populations.len()).collect();
        idx.sort_by(|&a, &b| self.populations[b].total_cmp(&self.populations[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    pub fn captured(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.populations[i]).sum()
    }

    /// Chains of consecutive eigenvalues with gaps below `tol`. Within such a
    /// subspace the split of population between vectors depends on the basis
    /// the solver happened to return; the summed population does not.
    pub fn degenerate_groups(&self, tol: f64) -> Vec<DegenerateGroup> {
        let mut groups = Vec::new();
        let mut current = vec![0usize];
        for i in 1..=self.eigenvalues.len() {
            if i < self.eigenvalues.len() && self.eigenvalues[i] - self.eigenvalues[i - 1] < tol {
                current.push(i);
                continue;
            }
            if current.len() > 1 {
                let population = current.iter().map(|&k| self.populations[k]).sum();
                let mean = current.iter().map(|&k| self.eigenvalues[k]).sum::<f64>() / current.len() as f64;
                groups.push(DegenerateGroup { indices: current.clone(), mean_eigenvalue: mean, population });
            }
            current = vec![i];
        }
        groups
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# eigenvalue_units={}\n", self.kind.eigenvalue_units());
        if self.residual_population > 0.0 {
            out.push_str(&format!("# residual_population={:.6e}\n", self.residual_population));
        }
        out.push_str("eigenvalue,population\n");
        for (e, p) in self.eigenvalues.iter().zip(&self.populations) {
            out.push_str(&format!("{e:.12e},{p:.12e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut eigenvalues = Vec::new();
        let mut populations = Vec::new();
        let mut residual_population = 0.0;
        let mut header_seen = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once('=') {
                    match key.trim() {
                        "eigenvalue_units" => {
                            kind = Some(match value.trim() {
                                "E_R" => SpectrumKind::Hamiltonian,
                                "rad" => SpectrumKind::Floquet,
                                other => return Err(Error::param("eigenvalue_units", format!("unknown unit `{other}`"))),
                            })
                        }
                        "residual_population" => residual_population = parse_field(value)?,
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "eigenvalue,population" {
                    return Err(Error::param("header", format!("expected `eigenvalue,population`, got `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let (e, p) = line.split_once(',').ok_or_else(|| Error::param("row", format!("malformed row `{line}`")))?;
            eigenvalues.push(parse_field(e)?);
            populations.push(parse_field(p)?);
        }
        let kind = kind.ok_or_else(|| Error::param("eigenvalue_units", "missing unit header comment"))?;
        Ok(SupportSpectrum { kind, eigenvalues, populations, residual_population })
    }
}

pub(crate) fn parse_field(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::param("field", format!("cannot parse `{}` as a number", s.trim())))
}

/// `ρᵢᵢ = |⟨φᵢ|ψ₀⟩|²`.
pub fn support_spectrum(decomp: &SpectralDecomposition, state: &[C64]) -> Result<SupportSpectrum> {
    let c = decomp.coefficients(state)?;
    Ok(SupportSpectrum {
        kind: decomp.kind,
        eigenvalues: decomp.eigenvalues.clone(),
        populations: c.iter().map(|z| z.norm_sqr()).collect(),
        residual_population: decomp.residual_population,
    })
}

/// Adjacent eigenvalues (optionally restricted to `among`) closer than `gap_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearDegeneratePair {
    pub lower: usize,
    pub upper: usize,
    pub gap: f64,
}

/// Default gap tolerance for the decomposition kind.
pub fn default_gap_tol(kind: SpectrumKind) -> f64 {
    match kind {
        SpectrumKind::Hamiltonian => 0.5,
        SpectrumKind::Floquet => 1e-2,
    }
}

/// Pairs of neighbouring eigenvalues with gap below `gap_tol`, smallest gap first.
/// Floquet phases are treated as points on a circle.
pub fn near_degenerate_pairs(decomp: &SpectralDecomposition, gap_tol: f64, among: Option<&[usize]>) -> Vec<NearDegeneratePair> {
    let mut idx: Vec<usize> = match among {
        Some(set) => set.to_vec(),
        None => (0..decomp.len()).collect(),
    };
    idx.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));
    idx.dedup();
    let mut pairs = Vec::new();
    for w in idx.windows(2) {
        let gap = decomp.eigenvalues[w[1]] - decomp.eigenvalues[w[0]];
        if gap < gap_tol {
            pairs.push(NearDegeneratePair { lower: w[0], upper: w[1], gap });
        }
    }
    if decomp.kind == SpectrumKind::Floquet && idx.len() > 2 {
        let (first, last) = (idx[0], idx[idx.len() - 1]);
        let gap = decomp.eigenvalues[first] + 2.0 * std::f64::consts::PI - decomp.eigenvalues[last];
        if gap < gap_tol {
            pairs.push(NearDegeneratePair { lower: last, upper: first, gap });
        }
    }
    pairs.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    pairs
}

/// Near-degenerate pair among `among` with the largest population product
/// `ρᵢᵢ ρⱼⱼ`; its gap sets the slowest beat in the entropy.
pub fn dominant_pair(
    decomp: &SpectralDecomposition,
    support: &SupportSpectrum,
    among: &[usize],
    gap_tol: f64,
) -> Option<NearDegeneratePair> {
    let mut idx = among.to_vec();
    idx.sort_unstable();
    idx.dedup();
    let mut best: Option<(f64, NearDegeneratePair)> = None;
    for (k, &a) in idx.iter().enumerate() {
        for &b in &idx[k + 1..] {
            let mut gap = (decomp.eigenvalues[a] - decomp.eigenvalues[b]).abs();
            if decomp.kind == SpectrumKind::Floquet {
                gap = gap.min(2.0 * std::f64::consts::PI - gap);
            }
            if gap >= gap_tol {
                continue;
            }
            let weight = support.populations[a] * support.populations[b];
            let (lower, upper) = if decomp.eigenvalues[a] <= decomp.eigenvalues[b] { (a, b) } else { (b, a) };
            if best.as_ref().is_none_or(|(w, _)| weight > *w) {
                best = Some((weight, NearDegeneratePair { lower, upper, gap }));
            }
        }
    }
    best.map(|b| b.1)
}

/// A set of eigenstates grouped into consecutive doublets by eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubletStructure {
    /// `(lower, upper)` index pairs in eigenvalue order.
    pub pairs: Vec<(usize, usize)>,
    pub max_intra_gap: f64,
    /// Smallest distance between the centers of neighbouring doublets.
    pub min_inter_spacing: f64,
}

impl DoubletStructure {
    pub fn gap_ratio(&self) -> f64 {
        self.max_intra_gap / self.min_inter_spacing
    }
}

/// Sorts `indices` by eigenvalue and pairs neighbours `(0,1), (2,3), …`.
pub fn doublet_structure(decomp: &SpectralDecomposition, indices: &[usize]) -> Result<DoubletStructure> {
    if indices.len() < 4 || indices.len() % 2 != 0 {
        return Err(Error::param("indices", format!("need an even number (≥ 4) of eigenstates, got {}", indices.len())));
    }
    let mut idx = indices.to_vec();
    idx.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));
    let pairs: Vec<(usize, usize)> = idx.chunks(2).map(|c| (c[0], c[1])).collect();
    let ev = &decomp.eigenvalues;
    let max_intra_gap = pairs.iter().map(|&(a, b)| ev[b] - ev[a]).fold(0.0, f64::max);
    let centers: Vec<f64> = pairs.iter().map(|&(a, b)| 0.5 * (ev[a] + ev[b])).collect();
    let min_inter_spacing = centers.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(DoubletStructure { pairs, max_intra_gap, min_inter_spacing })
}

/// Anything that yields the evolved state at requested times.
pub trait Propagator: Sync {
    fn dim(&self) -> usize;

    fn propagate(&self, t: f64) -> Result<Vec<C64>>;

    fn propagate_batch(&self, times: &[f64]) -> Result<Vec<Vec<C64>>> {
        times.iter().map(|&t| self.propagate(t)).collect()
    }
}

/// Evolves a fixed initial state through (a subset of) the eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenbasisPropagator {
    kind: SpectrumKind,
    frequencies: Vec<f64>,
    coefficients: Vec<C64>,
    /// Retained eigenvectors as columns.
    basis: Mat<C64>,
    renormalize: bool,
    norm: f64,
}

impl EigenbasisPropagator {
    /// Exact evolution in the full retained basis.
    pub fn new(decomp: &SpectralDecomposition, state: &[C64]) -> Result<Self> {
        Self::truncated(decomp, state, &(0..decomp.len()).collect::<Vec<_>>(), false)
    }

    /// Projects onto `kept` eigenvectors and evolves there.
    pub fn truncated(decomp: &SpectralDecomposition, state: &[C64], kept: &[usize], renormalize: bool) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::param("kept_indices", "must not be empty"));
        }
        if let Some(&bad) = kept.iter().find(|&&k| k >= decomp.len()) {
            return Err(Error::param("kept_indices", format!("index {bad} out of range for {} eigenstates", decomp.len())));
        }
        let all = decomp.coefficients(state)?;
        let coefficients: Vec<C64> = kept.iter().map(|&k| all[k]).collect();
        let norm = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        Ok(EigenbasisPropagator {
            kind: decomp.kind,
            frequencies: kept.iter().map(|&k| decomp.eigenvalues[k]).collect(),
            coefficients,
            basis: Mat::from_fn(decomp.dim(), kept.len(), |r, c| decomp.eigenvectors[(r, kept[c])]),
            renormalize,
            norm,
        })
    }

    /// Keeps eigenstates with population above `threshold`. Exact up to the
    /// discarded population, which is returned alongside.
    pub fn pruned(decomp: &SpectralDecomposition, state: &[C64], threshold: f64) -> Result<(Self, f64)> {
        let c = decomp.coefficients(state)?;
        let kept: Vec<usize> = (0..c.len()).filter(|&k| c[k].norm_sqr() > threshold).collect();
        let dropped: f64 = (0..c.len()).filter(|&k| c[k].norm_sqr() <= threshold).map(|k| c[k].norm_sqr()).sum();
        Ok((Self::truncated(decomp, state, &kept, false)?, dropped))
    }

    pub fn n_kept(&self) -> usize {
        self.frequencies.len()
    }

    /// Norm of the projected initial state.
    pub fn projected_norm(&self) -> f64 {
        self.norm
    }

    fn weights(&self, t: f64) -> Result<Vec<C64>> {
        if self.kind == SpectrumKind::Floquet && t.fract() != 0.0 {
            return Err(Error::NonIntegerKick(t));
        }
        let scale = if self.renormalize && self.norm > 0.0 { 1.0 / self.norm } else { 1.0 };
        Ok(self.coefficients.iter().zip(&self.frequencies).map(|(c, w)| c * C64::from_polar(scale, -w * t)).collect())
    }
}

impl Propagator for EigenbasisPropagator {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn propagate(&self, t: f64) -> Result<Vec<C64>> {
        Ok(linalg::mat_vec(self.basis.as_ref(), &self.weights(t)?))
    }

    /// One matrix product `V · W` for all requested times.
    fn propagate_batch(&self, times: &[f64]) -> Result<Vec<Vec<C64>>> {
        let k = self.n_kept();
        let mut w = Mat::<C64>::zeros(k, times.len());
        for (c, &t) in times.iter().enumerate() {
            for (r, x) in self.weights(t)?.into_iter().enumerate() {
                w[(r, c)] = x;
            }
        }
        let mut out = Mat::<C64>::zeros(self.dim(), times.len());
        matmul(out.as_mut(), Accum::Replace, self.basis.as_ref(), w.as_ref(), C64::new(1.0, 0.0), Par::Seq);
        Ok((0..times.len()).map(|c| out.col(c).iter().copied().collect()).collect())
    }
}

/// `U(t)ψ` through the full decomposition.
pub fn evolve(decomp: &SpectralDecomposition, state: &[C64], t: f64) -> Result<Vec<C64>> {
    decomp.check_time(t)?;
    EigenbasisPropagator::new(decomp, state)?.propagate(t)
}

/// Projection of `ψ` onto `kept` eigenvectors, evolved to `t`. Left
/// unnormalized unless `renormalize` is set.
pub fn truncated_evolution(
    decomp: &SpectralDecomposition,
    state: &[C64],
    kept: &[usize],
    t: f64,
    renormalize: bool,
) -> Result<Vec<C64>> {
    decomp.check_time(t)?;
    EigenbasisPropagator::truncated(decomp, state, kept, renormalize)?.propagate(t)
}

/// One term `C_ijkl e^{−i(ω_ij + ω_kl)t}` of the purity expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityTerm {
    pub indices: [usize; 4],
    pub coefficient: C64,
    /// `ω_ij + ω_kl` with `ω_ij = ω_i − ω_j`.
    pub frequency: f64,
}

/// Closed-form entropy `S(t) = 1 − Σ C_ijkl e^{−i(ω_ij + ω_kl)t}` over a
/// retained eigenstate set.
#[derive(Debug, Clone)]
pub struct EntropyReconstruction {
    pub kind: SpectrumKind,
    pub retained: Vec<usize>,
    pub terms: Vec<PurityTerm>,
    pub warnings: Vec<String>,
}

impl EntropyReconstruction {
    /// Complex value of the sum; its imaginary part vanishes for a valid table.
    pub fn evaluate(&self, t: f64) -> C64 {
        let purity: C64 = self.terms.iter().map(|term| term.coefficient * C64::from_polar(1.0, -term.frequency * t)).sum();
        C64::new(1.0, 0.0) - purity
    }

    pub fn entropy(&self, t: f64) -> f64 {
        self.evaluate(t).re
    }
}

/// Default upper limit on the number of `C_ijkl` entries.
pub const DEFAULT_COEFFICIENT_BUDGET: usize = 1_000_000;
const COEFFICIENT_WARN: usize = 10_000;

/// `C_ijkl = ρ_ij ρ_kl Tr(M_ij M_kl)` with `ρ_ij = cᵢ cⱼ*` and `M_ij` the partial
/// trace of `|φᵢ⟩⟨φⱼ|` onto the kept subsystem.
pub fn entropy_reconstruction_coefficients(
    decomp: &SpectralDecomposition,
    state: &[C64],
    bipartition: &Bipartition,
    retained: &[usize],
    budget: usize,
) -> Result<EntropyReconstruction> {
    let r = retained.len();
    if r == 0 {
        return Err(Error::param("retained", "must not be empty"));
    }
    let entries = r.saturating_pow(4);
    if entries > budget {
        return Err(Error::BudgetExceeded { entries, budget });
    }
    let mut warnings = Vec::new();
    if entries > COEFFICIENT_WARN {
        let msg = format!("coefficient table holds {entries} entries (> {COEFFICIENT_WARN})");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let (d1, d2, keep) = match bipartition {
        Bipartition::Tensor { dims, keep } => (dims.0, dims.1, *keep),
        Bipartition::QubitPair(_) => {
            return Err(Error::param("bipartition", "coefficient tables need a tensor-product bipartition"))
        }
    };
    if d1 * d2 != decomp.dim() {
        return Err(Error::DimensionMismatch { expected: decomp.dim(), found: d1 * d2 });
    }
    let c = decomp.coefficients(state)?;
    let vecs: Vec<Vec<C64>> = retained.iter().map(|&k| decomp.eigenvectors.col(k).iter().copied().collect()).collect();
    let mut m = Vec::with_capacity(r * r);
    for a in 0..r {
        for b in 0..r {
            m.push(partial_trace_outer(&vecs[a], &vecs[b], (d1, d2), keep)?);
        }
    }
    let rho = |a: usize, b: usize| c[retained[a]] * c[retained[b]].conj();
    let omega = |a: usize, b: usize| decomp.eigenvalues[retained[a]] - decomp.eigenvalues[retained[b]];
    let mut terms = Vec::with_capacity(entries);
    for i in 0..r {
        for j in 0..r {
            let mij = &m[i * r + j];
            for k in 0..r {
                for l in 0..r {
                    let mkl = &m[k * r + l];
                    let trace = trace_of_product(mij.as_ref(), mkl.as_ref());
                    terms.push(PurityTerm {
                        indices: [retained[i], retained[j], retained[k], retained[l]],
                        coefficient: rho(i, j) * rho(k, l) * trace,
                        frequency: omega(i, j) + omega(k, l),
                    });
                }
            }
        }
    }
    Ok(EntropyReconstruction { kind: decomp.kind, retained: retained.to_vec(), terms, warnings })
}

fn trace_of_product(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{linear_entropy, partial_trace};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut StdRng, n: usize) -> Vec<C64> {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        linalg::normalize(&mut v);
        v
    }

    fn random_hermitian(rng: &mut StdRng, n: usize) -> Mat<C64> {
        let a = Mat::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        Mat::from_fn(n, n, |r, c| a[(r, c)] + a[(c, r)].conj())
    }

    #[test]
    fn diagonal_input_gives_standard_basis() {
        let d = Mat::from_fn(3, 3, |r, c| if r == c { C64::new([2.0, -1.0, 0.5][r], 0.0) } else { C64::new(0.0, 0.0) });
        let dec = decompose(d.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        assert_eq!(dec.eigenvalues, vec![-1.0, 0.5, 2.0]);
        assert!((dec.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((dec.eigenvectors[(2, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((dec.eigenvectors[(0, 2)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let a = Mat::from_fn(2, 2, |r, c| C64::new((r * 2 + c) as f64, 0.0));
        assert!(matches!(decompose(a.as_ref(), SpectrumKind::Hamiltonian), Err(Error::NotHermitian { .. })));
        assert!(matches!(decompose(a.as_ref(), SpectrumKind::Floquet), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn floquet_decomposition_of_diagonal_unitary() {
        let phases = [0.3, -2.0, 3.0, 3.0];
        let u = Mat::from_fn(4, 4, |r, c| if r == c { C64::from_polar(1.0, -phases[r]) } else { C64::new(0.0, 0.0) });
        let dec = decompose(u.as_ref(), SpectrumKind::Floquet).unwrap();
        let expected = [-2.0, 0.3, 3.0, 3.0];
        for (a, b) in dec.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(dec.reconstruction_residual(u.as_ref()) < 1e-12);
        assert!(dec.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn fold_phase_range() {
        assert_eq!(fold_phase(std::f64::consts::PI), std::f64::consts::PI);
        assert!((fold_phase(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
        assert!((fold_phase(7.0) - (7.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_initial_state_has_single_support_entry() {
        let mut rng = StdRng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 6);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let v: Vec<C64> = dec.eigenvectors.col(2).iter().copied().collect();
        let s = support_spectrum(&dec, &v).unwrap();
        assert!((s.populations[2] - 1.0).abs() < 1e-12);
        assert!((s.total() - 1.0).abs() < 1e-12);
        assert_eq!(s.top(1), vec![2]);
    }

    #[test]
    fn evolve_is_a_group_action_and_preserves_norm() {
        let mut rng = StdRng::seed_from_u64(4);
        let h = random_hermitian(&mut rng, 8);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let psi = random_state(&mut rng, 8);
        assert!(evolve(&dec, &psi, 0.0).unwrap().iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-12));
        let a = evolve(&dec, &evolve(&dec, &psi, 1.3).unwrap(), 2.1).unwrap();
        let b = evolve(&dec, &psi, 3.4).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-10));
        assert!((linalg::norm(&evolve(&dec, &psi, 100.0).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floquet_rejects_fractional_kicks() {
        let u = linalg::identity(3);
        let dec = decompose(u.as_ref(), SpectrumKind::Floquet).unwrap();
        let psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert!(matches!(evolve(&dec, &psi, 1.5), Err(Error::NonIntegerKick(_))));
        assert!(evolve(&dec, &psi, 3.0).is_ok());
    }

    #[test]
    fn full_truncation_equals_evolve_and_batch_matches_single() {
        let mut rng = StdRng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 7);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let psi = random_state(&mut rng, 7);
        let all: Vec<usize> = (0..7).collect();
        let a = truncated_evolution(&dec, &psi, &all, 0.7, false).unwrap();
        let b = evolve(&dec, &psi, 0.7).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
        let prop = EigenbasisPropagator::new(&dec, &psi).unwrap();
        let times = [0.0, 0.5, 1.5, 9.0];
        let batch = prop.propagate_batch(&times).unwrap();
        for (t, s) in times.iter().zip(&batch) {
            let single = prop.propagate(*t).unwrap();
            assert!(single.iter().zip(s).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn truncated_projection_is_unnormalized_unless_requested() {
        let mut rng = StdRng::seed_from_u64(6);
        let h = random_hermitian(&mut rng, 5);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let psi = random_state(&mut rng, 5);
        let kept = [0, 3];
        let raw = truncated_evolution(&dec, &psi, &kept, 2.0, false).unwrap();
        let support = support_spectrum(&dec, &psi).unwrap();
        assert!((linalg::norm(&raw).powi(2) - support.captured(&kept)).abs() < 1e-12);
        let unit = truncated_evolution(&dec, &psi, &kept, 2.0, true).unwrap();
        assert!((linalg::norm(&unit) - 1.0).abs() < 1e-12);
        assert!(truncated_evolution(&dec, &psi, &[], 2.0, false).is_err());
    }

    #[test]
    fn degenerate_doublet_reports_zero_gap() {
        let d = Mat::from_fn(4, 4, |r, c| if r == c { C64::new([1.0, 1.0, 3.0, 7.0][r], 0.0) } else { C64::new(0.0, 0.0) });
        let dec = decompose(d.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let pairs = near_degenerate_pairs(&dec, 0.5, None);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].gap, 0.0);
        let psi = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let groups = support_spectrum(&dec, &psi).unwrap().degenerate_groups(1e-9);
        assert_eq!(groups.len(), 1);
        assert!((groups[0].population - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floquet_pairs_wrap_around_the_circle() {
        let phases = [3.14, -3.14, 0.0];
        let u = Mat::from_fn(3, 3, |r, c| if r == c { C64::from_polar(1.0, -phases[r]) } else { C64::new(0.0, 0.0) });
        let dec = decompose(u.as_ref(), SpectrumKind::Floquet).unwrap();
        let pairs = near_degenerate_pairs(&dec, 0.01, None);
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].gap - (2.0 * std::f64::consts::PI - 6.28)).abs() < 1e-12);
    }

    #[test]
    fn single_retained_state_gives_constant_entropy() {
        let mut rng = StdRng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 9);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let v: Vec<C64> = dec.eigenvectors.col(4).iter().copied().collect();
        let bip = Bipartition::Tensor { dims: (3, 3), keep: 0 };
        let rec = entropy_reconstruction_coefficients(&dec, &v, &bip, &[4], DEFAULT_COEFFICIENT_BUDGET).unwrap();
        let expected = linear_entropy(partial_trace(&v, (3, 3), 0).unwrap().as_ref()).unwrap();
        for t in [0.0, 1.0, 17.0] {
            assert!((rec.entropy(t) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_matches_direct_evolution() {
        let mut rng = StdRng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 9);
        let dec = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let psi = random_state(&mut rng, 9);
        let bip = Bipartition::Tensor { dims: (3, 3), keep: 1 };
        let all: Vec<usize> = (0..9).collect();
        let rec = entropy_reconstruction_coefficients(&dec, &psi, &bip, &all, DEFAULT_COEFFICIENT_BUDGET).unwrap();
        for _ in 0..20 {
            let t = rng.gen::<f64>() * 20.0;
            let direct = linear_entropy(partial_trace(&evolve(&dec, &psi, t).unwrap(), (3, 3), 1).unwrap().as_ref()).unwrap();
            let s = rec.evaluate(t);
            assert!((s.re - direct).abs() < 1e-10);
            assert!(s.im.abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_budget_enforced() {
        let dec = decompose(linalg::identity(16).as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); 16];
        psi[0] = C64::new(1.0, 0.0);
        let bip = Bipartition::Tensor { dims: (4, 4), keep: 0 };
        let all: Vec<usize> = (0..16).collect();
        assert!(matches!(
            entropy_reconstruction_coefficients(&dec, &psi, &bip, &all, 1000),
            Err(Error::BudgetExceeded { entries: 65536, budget: 1000 })
        ));
        let ok = entropy_reconstruction_coefficients(&dec, &psi, &bip, &all[..11], DEFAULT_COEFFICIENT_BUDGET).unwrap();
        assert_eq!(ok.warnings.len(), 1);
    }

    #[test]
    fn lanczos_captures_support_of_a_localized_state() {
        let n = 300;
        // Banded matrix: a state on one site is supported by a limited set of eigenvectors.
        let h = Mat::from_fn(n, n, |r, c| {
            let d = r.abs_diff(c);
            match d {
                0 => C64::new(r as f64 * 0.05, 0.0),
                1 => C64::new(0.3, 0.0),
                _ => C64::new(0.0, 0.0),
            }
        });
        let mut psi = vec![C64::new(0.0, 0.0); n];
        psi[150] = C64::new(1.0, 0.0);
        let opts = SupportOptions { dense_limit: 10, ..Default::default() };
        let partial = decompose_for_state(&h, &psi, &opts).unwrap();
        assert!(partial.len() < n);
        assert!(partial.residual_population < 1e-6);
        let full = decompose(h.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let full_support = support_spectrum(&full, &psi).unwrap();
        let part_support = support_spectrum(&partial, &psi).unwrap();
        assert!((part_support.total() - 1.0).abs() < 1e-6);
        for (e, p) in part_support.eigenvalues.iter().zip(&part_support.populations) {
            let k = full.eigenvalues.iter().enumerate().min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs())).unwrap().0;
            assert!((full.eigenvalues[k] - e).abs() < 1e-8);
            assert!((full_support.populations[k] - p).abs() < 1e-8);
        }
        for t in [0.5, 3.0] {
            let a = evolve(&partial, &psi, t).unwrap();
            let b = evolve(&full, &psi, t).unwrap();
            assert!(linalg::fidelity(&a, &b) > 1.0 - 1e-6);
        }
    }

    #[test]
    fn support_csv_round_trip() {
        let s = SupportSpectrum {
            kind: SpectrumKind::Floquet,
            eigenvalues: vec![-1.0, 0.25],
            populations: vec![0.75, 0.25],
            residual_population: 0.0,
        };
        let text = s.to_csv();
        assert!(text.starts_with("# eigenvalue_units=rad\neigenvalue,population\n"));
        let back = SupportSpectrum::from_csv(&text).unwrap();
        assert_eq!(back.eigenvalues, s.eigenvalues);
        assert_eq!(back.populations, s.populations);
        assert_eq!(back.kind, SpectrumKind::Floquet);
        assert!(SupportSpectrum::from_csv("eigenvalue,population\n1,0\n").is_err());
    }

    #[test]
    fn doublets_from_sorted_neighbours() {
        let vals = [0.0, 0.01, 5.0, 5.02, 9.0, 9.005];
        let d = Mat::from_fn(6, 6, |r, c| if r == c { C64::new(vals[r], 0.0) } else { C64::new(0.0, 0.0) });
        let dec = decompose(d.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let s = doublet_structure(&dec, &[5, 0, 3, 1, 2, 4]).unwrap();
        assert_eq!(s.pairs, vec![(0, 1), (2, 3), (4, 5)]);
        assert!((s.max_intra_gap - 0.02).abs() < 1e-12);
        assert!((s.min_inter_spacing - 3.9925).abs() < 1e-12);
        assert!(doublet_structure(&dec, &[0, 1, 2]).is_err());
    }

    #[test]
    fn dominant_pair_weighs_by_population() {
        let vals = [0.0, 0.001, 0.004, 3.0];
        let d = Mat::from_fn(4, 4, |r, c| if r == c { C64::new(vals[r], 0.0) } else { C64::new(0.0, 0.0) });
        let dec = decompose(d.as_ref(), SpectrumKind::Hamiltonian).unwrap();
        let s = 0.1f64.sqrt();
        let psi = [C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.7f64.sqrt(), 0.0), C64::new(0.1f64.sqrt(), 0.0)];
        let sup = support_spectrum(&dec, &psi).unwrap();
        let pair = dominant_pair(&dec, &sup, &[0, 1, 2, 3], 0.5).unwrap();
        assert_eq!((pair.lower, pair.upper), (0, 2));
        assert!((pair.gap - 0.004).abs() < 1e-12);
        assert!(dominant_pair(&dec, &sup, &[2, 3], 0.5).is_none());
    }
}
