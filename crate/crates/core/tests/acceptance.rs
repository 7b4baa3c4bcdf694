//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use qtraj_thermo::conditioning::{
    enumerate_discrete, exact_heat_given_visible_and_initial, DiscreteGrid, SamplerOptions,
};
use qtraj_thermo::operators::{build_two_level_model, ABSORPTION, EMISSION};
use qtraj_thermo::propagators::lindblad_propagate;
use qtraj_thermo::scalar::{cr, ComplexMatrix};
use qtraj_thermo::thermo::{
    check_global_fts, conditional_heat_closed_form, entropy_production, sample_visible_record,
    sigma_estimator, SE_SLACK,
};
use qtraj_thermo::trajectories::{
    coarse_grain, evolve_conditional_state, log_path_probability_full,
    log_path_probability_full_reversed, sample_ideal_trajectory, stream_rng,
};
use qtraj_thermo::{ConditionalEnsemble, JumpEvent, Record, TrajectoryContext, TwoLevelParams};

const SEED: u64 = 20_240_601;
const ETA_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
/// Absolute slack for quantities that are exact (zero standard error).
const EXACT_SLACK: f64 = 1e-9;

/// Emitter with `Γ₀ = 10⁻³ω`, `ε = 10⁻²ω`, `βω = 1/5`, times in `1/Γ₀`.
fn params(eta_minus: f64, eta_plus: f64) -> TwoLevelParams {
    TwoLevelParams {
        omega: 1.0,
        gamma0: 1e-3,
        epsilon: 1e-2,
        beta: 0.2,
        eta_minus,
        eta_plus,
    }
    .in_decay_units()
}

fn context(eta_minus: f64, eta_plus: f64, tau: f64) -> TrajectoryContext {
    let model = build_two_level_model(&params(eta_minus, eta_plus), tau).expect("model");
    TrajectoryContext::stationary(&model).expect("context")
}

fn emission(time: f64) -> JumpEvent {
    JumpEvent {
        time,
        channel: EMISSION,
    }
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            detail,
            notes: Vec::new(),
        }
    }
}

type Criterion = fn() -> Result<Outcome, qtraj_thermo::Error>;

fn criterion_1() -> Result<Outcome, qtraj_thermo::Error> {
    let ctx = context(0.2, 0.2, 0.5);
    let en = enumerate_discrete(&ctx, DiscreteGrid::new(4, 0.5)?, 4)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (key, summary) in en.summaries() {
        let sigma = en.sigma(&key)?;
        worst = worst.max((summary.exp_minus_s - (-sigma).exp()).abs());
        count += 1;
    }
    let mass = (en.total_mass - 1.0).abs();
    Ok(Outcome::new(
        worst <= 1e-9 && mass <= 1e-9,
        format!("max |<e^-S|γ> - e^-Σ| = {worst:.2e} over {count} records, |mass - 1| = {mass:.1e} (tol 1e-9)"),
    ))
}

fn se_slope(ens: &ConditionalEnsemble) -> f64 {
    let points: Vec<(f64, f64)> = [100usize, 1_000, 10_000]
        .iter()
        .map(|&m| {
            (
                (m as f64).ln(),
                ens.prefix(m).conditional_ft().rhs.std_error.ln(),
            )
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_2() -> Result<Outcome, qtraj_thermo::Error> {
    let tau = 1.0;
    let ctx = context(0.2, 0.2, tau);
    let records = [
        Record::new(0, vec![], 0, tau),
        Record::new(0, vec![emission(0.5)], 0, tau),
        Record::new(
            0,
            vec![
                emission(1.0 / 3.0),
                JumpEvent {
                    time: 2.0 / 3.0,
                    channel: ABSORPTION,
                },
            ],
            0,
            tau,
        ),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, gamma) in records.iter().enumerate() {
        let ens = ConditionalEnsemble::sample(
            gamma,
            10_000,
            &ctx,
            SEED + i as u64,
            SamplerOptions::default(),
        )?;
        let ft = ens.conditional_ft();
        let slope = se_slope(&ens);
        let ok = ft.z_score() <= SE_SLACK && (slope + 0.5).abs() <= 0.05;
        passed &= ok;
        parts.push(format!(
            "{} jumps: e^-Σ = {:.6}, <e^-S|γ> = {:.6} ± {:.1e} (z = {:.2}), SE slope = {:.3}",
            gamma.jump_count(),
            ft.lhs,
            ft.rhs.mean,
            ft.rhs.std_error,
            ft.z_score(),
            slope
        ));
    }
    Ok(Outcome::new(passed, parts.join("; ")))
}

fn criterion_3() -> Result<Outcome, qtraj_thermo::Error> {
    let ctx = context(0.2, 0.2, 1.0);
    let g = check_global_fts(10_000, &ctx, SEED)?;
    let (zs, zsig) = (g.exp_minus_s.z_score(1.0), g.exp_minus_sigma.z_score(1.0));
    let mean_sigma = g.moments[0].1;
    let mut out = Outcome::new(
        zs <= SE_SLACK && zsig <= SE_SLACK,
        format!(
            "<e^-S> = {:.4} ± {:.4} (z = {zs:.2}), <e^-Σ> = {:.4} ± {:.4} (z = {zsig:.2}), N = 10^4",
            g.exp_minus_s.mean, g.exp_minus_s.std_error, g.exp_minus_sigma.mean, g.exp_minus_sigma.std_error
        ),
    );
    for (k, sig, s) in &g.moments {
        out.notes.push(format!(
            "<Σ^{k}> = {:.4} ± {:.4}, <S^{k}> = {:.4} ± {:.4}",
            sig.mean, sig.std_error, s.mean, s.std_error
        ));
    }
    out.notes.push(format!(
        "<Σ> >= -3 SE: {}",
        mean_sigma.mean >= -SE_SLACK * mean_sigma.std_error
    ));
    Ok(out)
}

fn gap_sweep(tau: f64) -> Result<Vec<(f64, f64)>, qtraj_thermo::Error> {
    ETA_GRID
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let ctx = context(eta, eta, tau);
            let gamma = Record::new(0, vec![], 0, tau);
            let ens = ConditionalEnsemble::sample(
                &gamma,
                10_000,
                &ctx,
                SEED + i as u64,
                SamplerOptions::default(),
            )?;
            let gap = ens.entropy_gap();
            Ok((gap.mean, gap.std_error))
        })
        .collect()
}

fn criterion_4() -> Result<Outcome, qtraj_thermo::Error> {
    let short = gap_sweep(0.1)?;
    let long = gap_sweep(0.5)?;
    let mut passed = true;
    for sweep in [&short, &long] {
        passed &= sweep
            .iter()
            .all(|(g, se)| *g >= -SE_SLACK * se - EXACT_SLACK);
        let (g1, se1) = sweep[sweep.len() - 1];
        passed &= g1 <= 1e-6 + SE_SLACK * se1;
        passed &= sweep
            .windows(2)
            .all(|w| w[1].0 <= w[0].0 + SE_SLACK * combined(w[0].1, w[1].1));
    }
    for (i, eta) in ETA_GRID.iter().enumerate() {
        if *eta < 1.0 {
            passed &= long[i].0 >= short[i].0 - SE_SLACK * combined(long[i].1, short[i].1);
        }
    }
    let fmt = |s: &[(f64, f64)]| {
        s.iter()
            .map(|(g, se)| format!("{g:.4}±{se:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(Outcome::new(
        passed,
        format!(
            "<S|γ> - Σ over η = {ETA_GRID:?}: τ = 0.1 [{}], τ = 0.5 [{}]",
            fmt(&short),
            fmt(&long)
        ),
    ))
}

fn criterion_5() -> Result<Outcome, qtraj_thermo::Error> {
    let tau = 3.0;
    let ctx = context(0.5, 0.2, tau);
    let gamma = sample_visible_record(&ctx, &mut stream_rng(SEED, 0))?;
    let ens = ConditionalEnsemble::sample(&gamma, 10_000, &ctx, SEED, SamplerOptions::default())?;
    let xi: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    let rows = ens.tail_rows(&xi, &[1.0, 2.0]);
    let failures = rows.iter().filter(|r| !r.satisfied).count();
    let mut out = Outcome::new(
        failures == 0,
        format!(
            "record `{gamma}`, {} tail rows over ξ ∈ [0, 3], q ∈ {{1, 2}}, {failures} violations",
            rows.len()
        ),
    );
    for q in [1.0, 2.0] {
        let e = ens.exp_moment(q);
        out.notes.push(format!(
            "<e^(q(S-Σ))|γ> at q = {q}: {:.4} ± {:.4} (>= 1 - 3 SE: {})",
            e.mean,
            e.std_error,
            e.mean >= 1.0 - SE_SLACK * e.std_error
        ));
    }
    Ok(out)
}

fn criterion_6() -> Result<Outcome, qtraj_thermo::Error> {
    struct Case {
        label: &'static str,
        tau: f64,
        events: Vec<JumpEvent>,
        eta_plus_fixed: Option<f64>,
    }
    let cases = [
        Case {
            label: "no jumps, η₊ = 1, τ = 0.5",
            tau: 0.5,
            events: vec![],
            eta_plus_fixed: Some(1.0),
        },
        Case {
            label: "emission at 0.05, τ = 0.1",
            tau: 0.1,
            events: vec![emission(0.05)],
            eta_plus_fixed: None,
        },
        Case {
            label: "emission at 0.25, τ = 0.5",
            tau: 0.5,
            events: vec![emission(0.25)],
            eta_plus_fixed: None,
        },
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        let mut gaps = Vec::new();
        for (i, &eta) in ETA_GRID.iter().enumerate() {
            let ctx = context(eta, case.eta_plus_fixed.unwrap_or(eta), case.tau);
            let gamma = Record::new(0, case.events.clone(), 0, case.tau);
            let seed = SEED + (10 * c + i) as u64;
            let hb =
                ConditionalEnsemble::sample(&gamma, 10_000, &ctx, seed, SamplerOptions::default())?
                    .heat_bound();
            passed &= hb.satisfied;
            let gap = hb.beta_q.mean - hb.phi;
            if eta == 1.0 {
                passed &= gap <= 1e-6 + SE_SLACK * hb.beta_q.std_error;
            }
            gaps.push(format!("{gap:.4}±{:.4}", hb.beta_q.std_error));
        }
        parts.push(format!("{}: β<Q|γ> - φ = [{}]", case.label, gaps.join(" ")));
    }
    Ok(Outcome::new(passed, parts.join("; ")))
}

fn trace_distance(a: &ComplexMatrix<f64>, b: &ComplexMatrix<f64>) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * cr(0.5);
    nalgebra::SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
        / 2.0
}

fn criterion_7() -> Result<Outcome, qtraj_thermo::Error> {
    let tau = 1.0;
    let mut ground = ComplexMatrix::<f64>::zeros(2, 2);
    ground[(0, 0)] = cr(1.0);
    let mut passed = true;
    let mut parts = Vec::new();
    for eta in [0.0, 0.2, 1.0] {
        let model = build_two_level_model(&params(eta, eta), tau)?;
        let ctx = TrajectoryContext::from_initial_state(&model, ground.clone())?;
        let target = lindblad_propagate(&ctx.rho0, &model, 0.0, tau)?;
        let count = 10_000;
        let mut mean = ComplexMatrix::<f64>::zeros(2, 2);
        for i in 0..count {
            let mut rng = stream_rng(SEED, i as u64);
            let sample = sample_ideal_trajectory(&ctx, &mut rng);
            let (gamma, _) = coarse_grain(&sample.record, &model, &mut rng)?;
            mean +=
                evolve_conditional_state(&gamma, &ctx, 2)?.final_state() * cr(1.0 / count as f64);
        }
        let dist = trace_distance(&mean, &target);
        passed &= dist <= 0.02;
        parts.push(format!("η = {eta}: D = {dist:.4}"));
    }
    Ok(Outcome::new(
        passed,
        format!("{} (tol 0.02, N = 10^4)", parts.join(", ")),
    ))
}

fn criterion_8() -> Result<Outcome, qtraj_thermo::Error> {
    let ctx = context(1.0, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for i in 0..1_000 {
        let record = sample_ideal_trajectory(&ctx, &mut stream_rng(SEED, i)).record;
        let b = entropy_production(&record, &ctx)?;
        let log_ratio = log_path_probability_full(&record, &ctx)?
            - log_path_probability_full_reversed(&record, &ctx)?;
        worst = worst.max((log_ratio - b.s_tot.unwrap_or(f64::NAN)).abs());
        defect = defect.max(b.decomposition_defect(&ctx.model));
    }
    Ok(Outcome::new(
        worst <= 1e-9 && defect <= 1e-10,
        format!("max |ln(P/P~) - (ΔS_sys + βQ)| = {worst:.2e} over 10^3 records (tol 1e-9), decomposition defect {defect:.1e}"),
    ))
}

struct HeatComparison {
    summed: f64,
    unsummed: f64,
    instances: usize,
    /// `(record, oracle ⟨Q|v,n⟩, closed form)` at the largest m-summed discrepancy.
    worst: Option<(String, f64, f64)>,
}

fn heat_comparison(eta: f64) -> Result<HeatComparison, qtraj_thermo::Error> {
    let ctx = context(eta, eta, 0.5);
    let en = enumerate_discrete(&ctx, DiscreteGrid::new(4, 0.5)?, 4)?;
    let mut out = HeatComparison {
        summed: 0.0,
        unsummed: 0.0,
        instances: 0,
        worst: None,
    };
    for ((n, visible), exact) in en.heat_given_visible_and_initial() {
        let closed = en.filtered_heat(n, &visible)?;
        for (a, b) in exact.iter().zip(&closed.heat) {
            if (a - b).abs() > out.summed {
                out.summed = (a - b).abs();
                let key = qtraj_thermo::conditioning::VisibleKey {
                    initial: n,
                    visible: visible.clone(),
                    final_outcome: 0,
                };
                let line = key.to_record(&en.grid).to_string();
                let (head, _) = line.rsplit_once(" | ").unwrap_or((&line, ""));
                let (head, _) = head.rsplit_once(" | ").unwrap_or((head, ""));
                out.worst = Some((head.to_string(), *a, *b));
            }
        }
        out.instances += 1;
    }
    for (key, summary) in en.summaries() {
        let closed = en.filtered_heat(key.initial, &key.visible)?;
        let factor = closed.final_given_visible[key.final_outcome];
        out.unsummed = summary
            .heat
            .iter()
            .zip(&closed.heat)
            .fold(out.unsummed, |w, (a, b)| w.max((a - factor * b).abs()));
    }
    Ok(out)
}

fn criterion_9() -> Result<Outcome, qtraj_thermo::Error> {
    let main = heat_comparison(0.2)?;
    let mut out = Outcome::new(
        main.summed <= 1e-6,
        format!(
            "η = 0.2: max |closed <Q|v,n> - oracle| = {:.3e} over {} (v, n) (tol 1e-6); unsummed closed form vs <Q|γ>: {:.3e}",
            main.summed, main.instances, main.unsummed
        ),
    );
    if let Some((record, exact, closed)) = &main.worst {
        out.notes.push(format!(
            "largest at n | v = `{record}`: oracle {exact:.6}, filtered closed form {closed:.6}"
        ));
    }
    let ctx = context(0.2, 0.2, 0.5);
    let gamma = Record::new(
        0,
        vec![
            JumpEvent {
                time: 0.1875,
                channel: ABSORPTION,
            },
            JumpEvent {
                time: 0.4375,
                channel: ABSORPTION,
            },
        ],
        0,
        0.5,
    );
    let exact = exact_heat_given_visible_and_initial(&gamma, &ctx)?[&0];
    let closed = conditional_heat_closed_form(&gamma, &ctx, 512)?.m_summed[&0];
    out.notes.push(format!(
        "continuous time, same n | v: exact {exact:.6}, filtered closed form {closed:.6}"
    ));
    for eta in [0.0, 1.0] {
        let c = heat_comparison(eta)?;
        out.notes.push(format!(
            "η = {eta}: m-summed discrepancy {:.3e}, unsummed {:.3e}",
            c.summed, c.unsummed
        ));
    }
    Ok(out)
}

fn criterion_10() -> Result<Outcome, qtraj_thermo::Error> {
    let ctx = context(0.5, 0.0, 1.0);
    let (mut with_emission, mut failures) = (0, 0);
    let mut first_error = None;
    for i in 0..1_000 {
        let gamma = sample_visible_record(&ctx, &mut stream_rng(SEED, i))?;
        if !gamma.events.iter().any(|e| e.channel == EMISSION) {
            continue;
        }
        with_emission += 1;
        match sigma_estimator(&gamma, &ctx) {
            Ok(b) if b.sigma.is_some_and(f64::is_finite) => {}
            Ok(_) => failures += 1,
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    Ok(Outcome::new(
        failures == 0 && with_emission > 0,
        format!(
            "{with_emission} of 10^3 visible records contain emissions, {failures} with non-finite Σ{}",
            first_error.map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    ))
}

fn main() {
    let criteria: [(Criterion, Duration, &str); 10] = [
        (
            criterion_1,
            Duration::from_secs(10),
            "exact conditional FT on the 4-bin oracle",
        ),
        (
            criterion_2,
            Duration::from_secs(300),
            "conditional FT convergence for 0, 1, 2 visible jumps",
        ),
        (
            criterion_3,
            Duration::from_secs(120),
            "global FTs for S_tot and Σ",
        ),
        (
            criterion_4,
            Duration::from_secs(600),
            "gap <S|γ> - Σ over efficiency",
        ),
        (
            criterion_5,
            Duration::from_secs(600),
            "conditional tail bounds",
        ),
        (
            criterion_6,
            Duration::from_secs(600),
            "heat bound on three trajectories",
        ),
        (
            criterion_7,
            Duration::from_secs(120),
            "ensemble-averaged conditional state",
        ),
        (
            criterion_8,
            Duration::from_secs(60),
            "two-path identity for S_tot",
        ),
        (
            criterion_9,
            Duration::from_secs(30),
            "closed-form conditional heat against the oracle",
        ),
        (
            criterion_10,
            Duration::from_secs(60),
            "finite Σ with blind absorption channel",
        ),
    ];
    let mut failed = 0;
    for (i, (run, budget, title)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let passed = outcome.passed && elapsed <= *budget;
        failed += usize::from(!passed);
        println!(
            "criterion {:>2} {}: {title}: {} [{:.1} s of {} s]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for note in &outcome.notes {
            println!("              {note}");
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
