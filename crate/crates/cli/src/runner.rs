//! Executes one experiment configuration.

use std::borrow::Cow;

use serde::Serialize;
use serde_json::{json, Value};

use qce_core::amol::{self, prepare_state, PhaseSpacePoint};
use qce_core::classical::{classical_energy, lyapunov_estimate, poincare_section, seed_on_shell, ClassicalState};
use qce_core::entanglement::{
    autocorrelation, compare_rise_models, default_rise_window, entropy_series, power_spectrum, secondary_peak, spectral_flatness,
    Bipartition, EntropySeries, RiseFit, SeriesMetadata, Window, TIME_UNITS_KICKS, TIME_UNITS_RECOIL,
};
use qce_core::kicked_top::{find_fixed_points, floquet_operator, most_chaotic_point, PairReducer};
use qce_core::spectral::{
    decompose, decompose_for_state, default_gap_tol, dominant_pair, doublet_structure, near_degenerate_pairs, support_spectrum,
    EigenbasisPropagator, SpectralDecomposition, SpectrumKind, SupportOptions,
};
use qce_core::spin::spin_coherent_state;
use qce_core::C64;

use crate::config::{ExperimentConfig, FixedPointTag, Model, RunType, StateSpec};
use crate::error::{CliError, CliResult};
use crate::output::{unix_now, OutputSet, RunManifest, ARTIFACT_VERSION, MANIFEST_NAME};

/// Runs `config`, writing every output and the manifest into its output
/// directory. On failure nothing written by this run is left behind.
pub fn run(config: &ExperimentConfig) -> CliResult<RunManifest> {
    config.validate()?;
    let started_at = unix_now();
    let mut out = OutputSet::create(&config.output_dir)?;
    let mut warnings = Vec::new();
    match (config.model, config.run_type) {
        (Model::Amol, RunType::ClassicalSection) => classical_sections(config, &mut out, &mut warnings)?,
        (Model::Amol, RunType::Lyapunov) => lyapunov(config, &mut out)?,
        (_, run_type) => quantum(config, run_type, &mut out, &mut warnings)?,
    }
    let manifest = RunManifest {
        config_hash: config.hash(),
        artifact_version: ARTIFACT_VERSION.to_string(),
        started_at,
        finished_at: unix_now(),
        outputs: out.files().to_vec(),
        warnings,
    };
    out.write_json(MANIFEST_NAME, &manifest)?;
    out.commit();
    Ok(manifest)
}

/// Initial state resolved to amplitudes, with a descriptor for CSV headers.
pub struct PreparedState {
    pub spec: StateSpec,
    pub amplitudes: Vec<C64>,
    pub descriptor: String,
}

/// Decomposition, bipartition and initial states of a quantum run.
pub struct QuantumSetup {
    pub kind: SpectrumKind,
    /// Dense decomposition shared by all states, when the dimension allows it.
    pub shared: Option<SpectralDecomposition>,
    operator: Option<amol::HamiltonianOperator>,
    pub bipartition: Bipartition,
    pub states: Vec<PreparedState>,
    pub time_units: &'static str,
}

impl QuantumSetup {
    pub fn build(config: &ExperimentConfig) -> CliResult<Self> {
        match config.model {
            Model::Amol => {
                let params = config.amol_params()?;
                let grid = config.grid()?;
                let prep = config.motional_prep()?;
                let mut states = Vec::new();
                for spec in config.resolved_states() {
                    let point = PhaseSpacePoint::new(spec.z0, spec.p0, spec.theta, spec.phi);
                    let st = prepare_state(&params, &grid, point, prep)?;
                    let descriptor = format!("z0={} p0={} theta={} phi={}", spec.z0, spec.p0, spec.theta, spec.phi);
                    states.push(PreparedState { spec, amplitudes: st.amplitudes, descriptor });
                }
                let operator = amol::HamiltonianOperator::new(&params, &grid)?;
                let dim = grid.n_points * params.spin.dim();
                let shared = if dim <= SupportOptions::default().dense_limit {
                    let h = amol::build_hamiltonian(&params, &grid)?;
                    Some(decompose(h.as_ref(), SpectrumKind::Hamiltonian)?)
                } else {
                    None
                };
                Ok(QuantumSetup {
                    kind: SpectrumKind::Hamiltonian,
                    shared,
                    operator: Some(operator),
                    bipartition: Bipartition::Tensor { dims: (grid.n_points, params.spin.dim()), keep: 1 },
                    states,
                    time_units: TIME_UNITS_RECOIL,
                })
            }
            Model::Qkt => {
                let params = config.qkt_params()?;
                let f = floquet_operator(&params)?;
                let decomp = decompose(f.as_ref(), SpectrumKind::Floquet)?;
                let mut states = Vec::new();
                for spec in config.resolved_states() {
                    let (theta, phi, tag) = match spec.fixed_point {
                        None => (spec.theta, spec.phi, "coherent"),
                        Some(FixedPointTag::Elliptic) => {
                            let search = find_fixed_points(&params);
                            let fp = search.elliptic().next().ok_or_else(|| {
                                CliError::Numerical(format!("no elliptic fixed point found ({} seeds failed)", search.failed_seeds))
                            })?;
                            (fp.theta(), fp.phi(), "elliptic")
                        }
                        Some(FixedPointTag::Chaotic) => {
                            let (theta, phi, _) = most_chaotic_point(&params, 20, 50);
                            (theta, phi, "chaotic")
                        }
                    };
                    let amplitudes = spin_coherent_state(params.j, theta, phi)?;
                    let descriptor = format!("{tag} theta={theta} phi={phi}");
                    states.push(PreparedState { spec, amplitudes, descriptor });
                }
                Ok(QuantumSetup {
                    kind: SpectrumKind::Floquet,
                    shared: Some(decomp),
                    operator: None,
                    bipartition: Bipartition::QubitPair(PairReducer::new(params.j)?),
                    states,
                    time_units: TIME_UNITS_KICKS,
                })
            }
        }
    }

    /// Decomposition supporting state `i`: the shared dense one, or a Krylov
    /// decomposition seeded with that state.
    pub fn decomposition(&self, i: usize) -> CliResult<Cow<'_, SpectralDecomposition>> {
        if let Some(d) = &self.shared {
            return Ok(Cow::Borrowed(d));
        }
        let op = self.operator.as_ref().expect("lattice operator present without a dense decomposition");
        Ok(Cow::Owned(decompose_for_state(op, &self.states[i].amplitudes, &SupportOptions::default())?))
    }

    pub fn metadata(&self, model: Model, state: &PreparedState) -> SeriesMetadata {
        SeriesMetadata {
            time_units: self.time_units.to_string(),
            model: model.to_string(),
            initial_state: format!("{} ({})", state.spec.label, state.descriptor),
            dims: self.bipartition.dims(),
        }
    }
}

/// Full and optionally truncated entropy series of one state.
pub struct StateSeries {
    pub full: EntropySeries,
    pub truncated: Option<(usize, EntropySeries, f64)>,
}

pub fn state_series(
    config: &ExperimentConfig,
    setup: &QuantumSetup,
    i: usize,
    times: &[f64],
    warnings: &mut Vec<String>,
) -> CliResult<StateSeries> {
    let decomp = setup.decomposition(i)?;
    let state = &setup.states[i];
    let meta = setup.metadata(config.model, state);
    let (prop, dropped) = EigenbasisPropagator::pruned(&decomp, &state.amplitudes, config.analysis.prune_threshold)?;
    if dropped > 1e-10 {
        warnings.push(format!("{}: pruned propagator drops population {dropped:.3e}", state.spec.label));
    }
    if decomp.residual_population > 0.0 {
        warnings.push(format!("{}: truncated spectrum misses population {:.3e}", state.spec.label, decomp.residual_population));
    }
    let full = entropy_series(&prop, times, &setup.bipartition, meta.clone())?;
    let truncated = match config.analysis.truncate_top {
        None => None,
        Some(k) => {
            let support = support_spectrum(&decomp, &state.amplitudes)?;
            let kept = support.top(k);
            let captured = support.captured(&kept);
            let prop = EigenbasisPropagator::truncated(&decomp, &state.amplitudes, &kept, config.analysis.renormalize)?;
            let mut meta = meta;
            meta.initial_state = format!("{} [top {k} eigenstates]", meta.initial_state);
            Some((k, entropy_series(&prop, times, &setup.bipartition, meta)?, captured))
        }
    };
    Ok(StateSeries { full, truncated })
}

/// Largest `|a − b|` between two series and the peak of `a`.
pub fn max_deviation(a: &EntropySeries, b: &EntropySeries) -> (f64, f64) {
    let dev = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let peak = a.values.iter().copied().fold(0.0, f64::max);
    (dev, peak)
}

#[derive(Serialize)]
struct FitRecord {
    model: &'static str,
    params: serde_json::Map<String, Value>,
    residual: f64,
    window: [f64; 2],
    aic: f64,
    n_points: usize,
    preferred: bool,
}

fn fit_record(fit: &RiseFit, preferred: bool) -> FitRecord {
    FitRecord {
        model: fit.model.name(),
        params: fit.params.iter().map(|(k, v)| (k.to_string(), json!(v))).collect(),
        residual: fit.residual,
        window: [fit.window.0, fit.window.1],
        aic: fit.aic,
        n_points: fit.n_points,
        preferred,
    }
}

fn quantum(config: &ExperimentConfig, run_type: RunType, out: &mut OutputSet, warnings: &mut Vec<String>) -> CliResult<()> {
    let setup = QuantumSetup::build(config)?;
    match run_type {
        RunType::Spectrum => spectrum(config, &setup, out, warnings),
        RunType::Entropy | RunType::Analyze => {
            let times = config.times()?;
            for i in 0..setup.states.len() {
                let label = setup.states[i].spec.label.clone();
                let series = state_series(config, &setup, i, &times, warnings)?;
                out.write(&format!("entropy_{label}.csv"), &series.full.to_csv())?;
                if let Some((k, truncated, captured)) = &series.truncated {
                    out.write(&format!("entropy_{label}_top{k}.csv"), &truncated.to_csv())?;
                    let (dev, peak) = max_deviation(&series.full, truncated);
                    out.write_json(
                        &format!("truncation_{label}.json"),
                        &json!({
                            "kept": k,
                            "captured_population": captured,
                            "renormalized": config.analysis.renormalize,
                            "max_deviation": dev,
                            "peak": peak,
                            "relative_deviation": if peak > 0.0 { dev / peak } else { 0.0 },
                        }),
                    )?;
                }
                if run_type == RunType::Analyze {
                    analyze(config, &label, &series.full, out, warnings)?;
                }
            }
            Ok(())
        }
        RunType::ClassicalSection | RunType::Lyapunov => {
            Err(CliError::Config("classical runs are defined for the lattice atom only".into()))
        }
    }
}

fn spectrum(config: &ExperimentConfig, setup: &QuantumSetup, out: &mut OutputSet, warnings: &mut Vec<String>) -> CliResult<()> {
    if let Some(d) = &setup.shared {
        let mut text = format!("# eigenvalue_units={}\nindex,eigenvalue\n", setup.kind.eigenvalue_units());
        for (k, e) in d.eigenvalues.iter().enumerate() {
            text.push_str(&format!("{k},{e:.12e}\n"));
        }
        out.write("spectrum.csv", &text)?;
    }
    for i in 0..setup.states.len() {
        let decomp = setup.decomposition(i)?;
        let state = &setup.states[i];
        let label = &state.spec.label;
        let support = support_spectrum(&decomp, &state.amplitudes)?;
        if support.residual_population > 1e-6 {
            warnings.push(format!("{label}: support spectrum misses population {:.3e}", support.residual_population));
        }
        out.write(&format!("support_{label}.csv"), &support.to_csv())?;
        let k = config.analysis.support_top.min(support.populations.len());
        let top = support.top(k);
        let gap_tol = default_gap_tol(setup.kind);
        let pairs: Vec<Value> = near_degenerate_pairs(&decomp, gap_tol, Some(&top))
            .iter()
            .map(|p| json!({ "lower": decomp.eigenvalues[p.lower], "upper": decomp.eigenvalues[p.upper], "gap": p.gap }))
            .collect();
        let dominant = dominant_pair(&decomp, &support, &top, gap_tol)
            .map(|p| json!({ "lower": decomp.eigenvalues[p.lower], "upper": decomp.eigenvalues[p.upper], "gap": p.gap }));
        let doublets = doublet_structure(&decomp, &top).ok().map(|d| {
            json!({ "max_intra_gap": d.max_intra_gap, "min_inter_spacing": d.min_inter_spacing, "gap_ratio": d.gap_ratio() })
        });
        let top_states: Vec<Value> =
            top.iter().map(|&j| json!({ "eigenvalue": decomp.eigenvalues[j], "population": support.populations[j] })).collect();
        out.write_json(
            &format!("support_{label}.json"),
            &json!({
                "initial_state": state.descriptor,
                "eigenvalue_units": setup.kind.eigenvalue_units(),
                "top": top_states,
                "captured": support.captured(&top),
                "near_degenerate_pairs": pairs,
                "dominant_pair": dominant,
                "doublets": doublets,
            }),
        )?;
    }
    Ok(())
}

fn analyze(config: &ExperimentConfig, label: &str, series: &EntropySeries, out: &mut OutputSet, warnings: &mut Vec<String>) -> CliResult<()> {
    let spectrum = power_spectrum(series, Window::from_name(&config.analysis.window)?, config.analysis.zero_pad)?;
    out.write(&format!("power_{label}.csv"), &spectrum.to_csv())?;
    let flatness = spectral_flatness(&spectrum)?;
    let ac = autocorrelation(&series.values);
    let secondary = secondary_peak(&ac).map(|(lag, value)| json!({ "lag": lag, "value": value }));

    let mut preferred = Value::Null;
    let mut window = Value::Null;
    match default_rise_window(series, config.analysis.rise_fraction) {
        None => warnings.push(format!("{label}: no rise window (series has no interior local maximum)")),
        Some(w) => {
            window = json!([w.0, w.1]);
            match compare_rise_models(series, w) {
                Ok(cmp) => {
                    preferred = json!(cmp.preferred.name());
                    let fits = [
                        fit_record(&cmp.quadratic, cmp.preferred == cmp.quadratic.model),
                        fit_record(&cmp.exponential, cmp.preferred == cmp.exponential.model),
                    ];
                    out.write_json(&format!("fits_{label}.json"), &fits)?;
                }
                Err(e @ qce_core::Error::DegenerateWindow { .. }) => warnings.push(format!("{label}: rise fit skipped: {e}")),
                Err(e) => return Err(e.into()),
            }
        }
    }
    out.write_json(
        &format!("analysis_{label}.json"),
        &json!({
            "spectral_flatness": flatness,
            "peak_frequency": spectrum.peak().map(|p| p.0),
            "frequency_units": spectrum.frequency_units,
            "rise_window": window,
            "preferred_rise_model": preferred,
            "secondary_autocorrelation_peak": secondary,
        }),
    )?;
    Ok(())
}

fn classical_ic(config: &ExperimentConfig, spec: &StateSpec) -> CliResult<ClassicalState> {
    let params = config.amol_params()?;
    let point = PhaseSpacePoint::new(spec.z0, spec.p0, spec.theta, spec.phi);
    match config.classical.energy {
        None => Ok(ClassicalState::from_angles(spec.z0, spec.p0, spec.theta, spec.phi)),
        Some(e) => Ok(seed_on_shell(point, config.free_coordinate()?, e, &params)?),
    }
}

fn classical_sections(config: &ExperimentConfig, out: &mut OutputSet, warnings: &mut Vec<String>) -> CliResult<()> {
    let params = config.amol_params()?;
    let integrator = config.integrator()?;
    for spec in config.resolved_states() {
        let ic = classical_ic(config, &spec)?;
        let energy = classical_energy(&ic, &params);
        for (name, def) in config.sections()? {
            let result = poincare_section(&ic, &params, def, config.classical.n_crossings, &integrator, config.classical.t_max)?;
            if let Some(w) = &result.warning {
                warnings.push(format!("{} / {name}: {w}", spec.label));
            }
            let text = format!(
                "# section={name}_rising\n# energy={energy:.12e}\n# spin_scale={}\n{}",
                params.spin_scale,
                result.to_csv()
            );
            out.write(&format!("section_{name}_{}.csv", spec.label), &text)?;
        }
    }
    Ok(())
}

fn lyapunov(config: &ExperimentConfig, out: &mut OutputSet) -> CliResult<()> {
    let params = config.amol_params()?;
    let integrator = config.integrator()?;
    let mut rows = Vec::new();
    for spec in config.resolved_states() {
        let ic = classical_ic(config, &spec)?;
        let t = config.classical.lyapunov_time;
        let full = lyapunov_estimate(&ic, &params, t, &integrator)?;
        let half = lyapunov_estimate(&ic, &params, 0.5 * t, &integrator)?;
        rows.push(json!({
            "label": spec.label,
            "energy": classical_energy(&ic, &params),
            "t_total": t,
            "exponent": full,
            "exponent_half_time": half,
            "units": "1/(hbar/E_R)",
        }));
    }
    out.write_json("lyapunov.json", &json!({ "spin_scale": params.spin_scale.to_string(), "states": rows }))
}
