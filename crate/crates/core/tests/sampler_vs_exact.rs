//! Hidden-record samplers against exact continuous-time count statistics.

use qtraj_thermo::conditioning::{
    exact_conditional_heat, hidden_count_distribution, SamplerMode, SamplerOptions,
};
use qtraj_thermo::operators::{build_two_level_model, Channel, ABSORPTION, EMISSION};
use qtraj_thermo::scalar::{cr, ComplexMatrix};
use qtraj_thermo::thermo::SE_SLACK;
use qtraj_thermo::{ConditionalEnsemble, JumpEvent, Record, TrajectoryContext, TwoLevelParams};

fn context(eta: f64, tau: f64) -> TrajectoryContext {
    let p = TwoLevelParams {
        omega: 1000.0,
        gamma0: 1.0,
        epsilon: 10.0,
        beta: 2e-4,
        eta_minus: eta,
        eta_plus: eta,
    };
    TrajectoryContext::stationary(&build_two_level_model(&p, tau).unwrap()).unwrap()
}

fn ev(time: f64, channel: usize) -> JumpEvent {
    JumpEvent { time, channel }
}

/// Largest `|p̂_j − p_j|` in binomial standard errors.
fn count_z(ens: &ConditionalEnsemble, exact: &[f64]) -> f64 {
    let m = ens.hidden_jumps.len() as f64;
    exact
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let hat = ens.hidden_jumps.iter().filter(|&&c| c == j).count() as f64 / m;
            let se = (p * (1.0 - p) / m).sqrt().max(1.0 / m);
            (hat - p).abs() / se
        })
        .fold(0.0, f64::max)
}

fn options(mode: SamplerMode) -> SamplerOptions {
    SamplerOptions {
        mode,
        ..Default::default()
    }
}

#[test]
fn single_interval_histograms_match_for_both_modes() {
    let tau = 0.5;
    let ctx = context(0.2, tau);
    for (n, m) in [(0, 0), (0, 1), (1, 0)] {
        let gamma = Record::new(n, vec![], m, tau);
        let exact = hidden_count_distribution(&gamma, &ctx, 24).unwrap();
        for mode in [SamplerMode::Chained, SamplerMode::LookAhead] {
            let ens = ConditionalEnsemble::sample(&gamma, 10_000, &ctx, 11, options(mode)).unwrap();
            let z = count_z(&ens, &exact);
            assert!(z <= SE_SLACK, "{mode:?} `{gamma}`: z = {z:.2}");
        }
    }
}

#[test]
fn look_ahead_matches_with_visible_jumps() {
    let tau = 1.0;
    let ctx = context(0.2, tau);
    let records = [
        Record::new(0, vec![ev(0.5, EMISSION)], 0, tau),
        Record::new(
            0,
            vec![ev(1.0 / 3.0, EMISSION), ev(2.0 / 3.0, ABSORPTION)],
            0,
            tau,
        ),
        Record::new(1, vec![ev(0.2, ABSORPTION), ev(0.4, ABSORPTION)], 1, tau),
    ];
    for gamma in &records {
        let exact = hidden_count_distribution(gamma, &ctx, 24).unwrap();
        let ens = ConditionalEnsemble::sample(gamma, 10_000, &ctx, 12, SamplerOptions::default())
            .unwrap();
        let z = count_z(&ens, &exact);
        assert!(z <= SE_SLACK, "`{gamma}`: z = {z:.2}");
        let heat = ens.mean_heat()[&0];
        let q = exact_conditional_heat(gamma, &ctx).unwrap()[&0];
        assert!(
            heat.z_score(q) <= SE_SLACK,
            "`{gamma}`: <Q|γ> {} ± {} vs {q}",
            heat.mean,
            heat.std_error
        );
    }
}

/// Emitter plus the Hermitian channel `√γ (σx + 2)`, whose jumps do not
/// reset the state and whose rate depends on it.
fn non_resetting_context(eta: f64, eta_x: f64, gamma_x: f64, tau: f64) -> TrajectoryContext {
    let p = TwoLevelParams {
        omega: 1000.0,
        gamma0: 1.0,
        epsilon: 10.0,
        beta: 2e-4,
        eta_minus: eta,
        eta_plus: eta,
    };
    let mut model = build_two_level_model(&p, tau).unwrap();
    let mut lx = ComplexMatrix::<f64>::identity(2, 2) * cr(2.0);
    lx[(0, 1)] = cr(1.0);
    lx[(1, 0)] = cr(1.0);
    model.channels.push(Channel {
        index: 2,
        matrix: lx * cr(gamma_x.sqrt()),
        entropy_flux: 0.0,
        efficiency: eta_x,
        reservoir: 1,
        reverse_index: 2,
    });
    model.beta.insert(1, 1.0);
    TrajectoryContext::stationary(&model).unwrap()
}

#[test]
fn chained_mode_is_biased_without_reset() {
    let tau = 1.0;
    let ctx = non_resetting_context(0.5, 0.8, 1.0, tau);
    let gamma = Record::new(1, vec![ev(0.3, 2), ev(0.6, EMISSION), ev(0.7, 2)], 1, tau);
    let exact = hidden_count_distribution(&gamma, &ctx, 30).unwrap();
    let chained =
        ConditionalEnsemble::sample(&gamma, 10_000, &ctx, 13, options(SamplerMode::Chained))
            .unwrap();
    let look_ahead =
        ConditionalEnsemble::sample(&gamma, 10_000, &ctx, 13, options(SamplerMode::LookAhead))
            .unwrap();
    let (zc, zl) = (count_z(&chained, &exact), count_z(&look_ahead, &exact));
    println!("`{gamma}`: chained z = {zc:.1}, look-ahead z = {zl:.1}");
    assert!(zl <= SE_SLACK, "look-ahead z = {zl:.2}");
    assert!(zc > SE_SLACK, "chained z = {zc:.2}");
}
