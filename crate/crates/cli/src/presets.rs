//! Named configurations, one per plotted data set.

use std::f64::consts::FRAC_PI_2;

use crate::config::{ExperimentConfig, FixedPointTag, Model, RunType, StateSpec};

pub const PRESET_NAMES: [&str; 6] =
    ["fig1_sections", "fig2_entropy", "fig3_support", "fig4_truncated", "fig5_qkt_support", "fig6_qkt_entropy"];

pub fn amol_regular() -> StateSpec {
    StateSpec::point("regular", -0.15, 0.0, 1.27, 0.0)
}

pub fn amol_chaotic() -> StateSpec {
    StateSpec::point("chaotic", 0.06, 0.0, FRAC_PI_2, 0.0)
}

fn amol(run_type: RunType) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Model::Amol, run_type);
    c.amol.spin_scale = "full".into();
    c
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let c = match name {
        "fig1_sections" => {
            let mut c = amol(RunType::ClassicalSection);
            c.classical.energy = Some(-280.0);
            c.classical.free = "theta".into();
            c.classical.sections = vec!["mu_y".into(), "p".into()];
            c.classical.n_crossings = 300;
            c.classical.t_max = 3000.0;
            c.states = vec![
                StateSpec::point("s0", -0.125, 0.5, 0.0, 0.3),
                StateSpec::point("s1", 0.125, -0.5, 0.0, 0.3),
                StateSpec::point("s2", -0.125, 2.0, 0.0, 0.3),
                StateSpec::point("s3", 0.0, 4.0, 0.0, 1.2),
            ];
            c
        }
        "fig2_entropy" => {
            let mut c = amol(RunType::Analyze);
            c.states = vec![amol_regular(), amol_chaotic()];
            c
        }
        "fig3_support" => {
            let mut c = amol(RunType::Spectrum);
            c.states = vec![amol_regular(), amol_chaotic()];
            c.analysis.support_top = 8;
            c
        }
        "fig4_truncated" => {
            let mut c = amol(RunType::Entropy);
            c.states = vec![amol_regular()];
            c.analysis.truncate_top = Some(8);
            c.time.t_end = Some(20.0);
            c
        }
        "fig5_qkt_support" => {
            let mut c = ExperimentConfig::new(Model::Qkt, RunType::Spectrum);
            c.states = vec![StateSpec::tagged("elliptic", FixedPointTag::Elliptic)];
            c.analysis.support_top = 3;
            c
        }
        "fig6_qkt_entropy" => {
            let mut c = ExperimentConfig::new(Model::Qkt, RunType::Analyze);
            c.states =
                vec![StateSpec::tagged("elliptic", FixedPointTag::Elliptic), StateSpec::tagged("chaotic", FixedPointTag::Chaotic)];
            c.time.t_end = Some(500.0);
            c.analysis.truncate_top = Some(3);
            c.analysis.support_top = 3;
            c.analysis.rise_fraction = 1.0;
            c
        }
        _ => return None,
    };
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_none());
    }
}
