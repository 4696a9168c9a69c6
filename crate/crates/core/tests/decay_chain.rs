use approx::assert_relative_eq;
use proptest::prelude::*;

use ybcav_core::cavity::{depth_for_reduction, effective_purcell, enhanced_decay};
use ybcav_core::ion::{branching_from_observables, build_level_system, transition_cyclicity};
use ybcav_core::{CavityMode, DecayRates, IonSite, LevelConfig};

fn levels_with(beta: f64) -> ybcav_core::LevelSystem {
    build_level_system(&LevelConfig {
        branch_a: beta,
        branch_c: 1.0 - beta,
        ..LevelConfig::default()
    })
    .unwrap()
}

proptest! {
    #[test]
    fn branching_round_trip(beta in 0.05f64..0.95, f in 0.0f64..300.0) {
        let levels = levels_with(beta);
        let rates = DecayRates::from_purcell(&levels, f);
        let reduction = rates.total / levels.gamma_bulk();
        let cyc = transition_cyclicity(&levels, f).unwrap();
        prop_assume!(reduction > 1.0 + 1e-9);
        let back = branching_from_observables(reduction, cyc).unwrap();
        prop_assert!((back - beta).abs() < 1e-9);
        prop_assert!((rates.cyclicity() - cyc).abs() < 1e-9 * cyc);
    }

    #[test]
    fn rates_sum_to_total(f in 0.0f64..500.0) {
        let levels = build_level_system(&LevelConfig::default()).unwrap();
        let r = DecayRates::from_purcell(&levels, f);
        prop_assert!((r.a + r.c + r.aux - r.total).abs() < 1e-12 * r.total);
        prop_assert!((r.lifetime * r.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_inverts_overlap(reduction in 1.5f64..90.0) {
        let levels = build_level_system(&LevelConfig::default()).unwrap();
        let mode = CavityMode::default();
        let depth = depth_for_reduction(&levels, &IonSite::default(), &mode, reduction).unwrap();
        let site = IonSite::at_depth(depth);
        let rates = enhanced_decay(&levels, &site, &mode);
        prop_assert!((rates.total / levels.gamma_bulk() - reduction).abs() < 1e-9 * reduction);
    }
}

#[test]
fn overlap_halves_every_halving_depth() {
    let mode = CavityMode::default();
    let f0 = effective_purcell(&IonSite::at_depth(0.0), &mode);
    let f1 = effective_purcell(&IonSite::at_depth(mode.field_halving_nm), &mode);
    let f3 = effective_purcell(&IonSite::at_depth(3.0 * mode.field_halving_nm), &mode);
    assert_relative_eq!(f0 / f1, 2.0, max_relative = 1e-12);
    assert_relative_eq!(f0 / f3, 8.0, max_relative = 1e-12);
}

#[test]
fn detuned_site_follows_cavity_lorentzian() {
    let mode = CavityMode::default();
    let half_width = 0.5 * mode.linewidth_ghz();
    let on = effective_purcell(&IonSite::at_depth(10.0), &mode);
    let off = effective_purcell(
        &IonSite {
            detuning_ghz: half_width,
            ..IonSite::at_depth(10.0)
        },
        &mode,
    );
    assert_relative_eq!(off / on, 0.5, max_relative = 1e-12);
}
