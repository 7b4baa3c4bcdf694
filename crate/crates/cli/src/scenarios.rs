//! Registered scenarios. Each returns data tables plus assertion rows that
//! can be recomputed from those tables.

use qtraj_thermo::conditioning::{
    enumerate_discrete, exact_conditional_heat, oracle_conditional_distribution, DiscreteGrid,
    EstimateWithError,
};
use qtraj_thermo::operators::{ABSORPTION, EMISSION};
use qtraj_thermo::propagators::lindblad_propagate;
use qtraj_thermo::scalar::{cr, ComplexMatrix};
use qtraj_thermo::thermo::{
    check_averaged_fts, check_global_fts, conditional_heat_closed_form, sample_visible_record,
    scaled_cgf, Tail, SE_SLACK,
};
use qtraj_thermo::trajectories::{
    coarse_grain, evolve_conditional_state, sample_ideal_trajectory, stream_rng,
};
use qtraj_thermo::{ConditionalEnsemble, JumpEvent, Record, TrajectoryContext};

use crate::config::{ModelConfig, RunConfig};
use crate::output::{Assertion, Relation, ScenarioResult, Table};
use crate::CliError;

/// Absolute tolerance for exact (oracle or zero-variance) quantities.
pub const EXACT_TOL: f64 = 1e-9;

/// Scenario names with one-line descriptions.
pub const SCENARIOS: [(&str, &str); 8] = [
    (
        "lindblad-check",
        "trajectory-averaged states against the master equation",
    ),
    (
        "ft-global",
        "<e^-S_tot> = 1 and <e^-Σ> = 1 over unconditioned trajectories",
    ),
    (
        "ft-conditional",
        "convergence of <e^-S_tot|γ> to e^-Σ for fixed visible records",
    ),
    (
        "bound-eta-sweep",
        "gap <S_tot|γ> - Σ and the heat bound across efficiencies",
    ),
    (
        "tail-bounds",
        "exponential tail bounds of S_tot - Σ and the scaled CGF",
    ),
    (
        "heat-bound",
        "φ against β<Q|γ> for three reference trajectories",
    ),
    (
        "averaged-ft",
        "heat fluctuation theorems with endpoint outcomes averaged",
    ),
    (
        "oracle-validate",
        "identities of the exact discrete enumeration",
    ),
];

fn context(cfg: &RunConfig, tau: f64) -> Result<TrajectoryContext, CliError> {
    Ok(TrajectoryContext::stationary(&cfg.build_model(tau)?)?)
}

fn is_emitter(cfg: &RunConfig) -> bool {
    matches!(cfg.model, ModelConfig::TwoLevel(_))
}

fn event(time: f64, channel: usize) -> JumpEvent {
    JumpEvent { time, channel }
}

fn records_or(cfg: &RunConfig, defaults: Vec<Record>) -> Vec<Record> {
    let configured = cfg.parsed_records();
    if configured.is_empty() {
        defaults
    } else {
        configured
    }
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Runs `config.scenario`.
pub fn run_scenario(config: &RunConfig) -> Result<ScenarioResult, CliError> {
    config.validate()?;
    let name = config
        .scenario
        .clone()
        .ok_or_else(|| CliError::Invalid(vec!["scenario: not set".into()]))?;
    let mut result = ScenarioResult {
        scenario: name.clone(),
        config_echo: config.echo(),
        tables: Vec::new(),
        attachments: Vec::new(),
        assertions: Vec::new(),
    };
    match name.as_str() {
        "lindblad-check" => lindblad_check(config, &mut result)?,
        "ft-global" => ft_global(config, &mut result)?,
        "ft-conditional" => ft_conditional(config, &mut result)?,
        "bound-eta-sweep" => bound_eta_sweep(config, &mut result)?,
        "tail-bounds" => tail_bounds(config, &mut result)?,
        "heat-bound" => heat_bound(config, &mut result)?,
        "averaged-ft" => averaged_ft(config, &mut result)?,
        "oracle-validate" => oracle_validate(config, &mut result)?,
        other => {
            return Err(CliError::Invalid(vec![format!(
                "scenario: unknown `{other}`"
            )]))
        }
    }
    Ok(result)
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

/// Averages of ideal pure states and of filtered states from `|0⟩⟨0|`.
fn lindblad_check(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let mut table = Table::new(
        "states",
        &[
            "t",
            "lindblad_p0",
            "ideal_p0",
            "filtered_p0",
            "trace_distance_ideal",
            "trace_distance_filtered",
        ],
    );
    let points = 8;
    for j in 1..=points {
        let t = cfg.tau * j as f64 / points as f64;
        let model = cfg.build_model(t)?;
        let d = model.dim;
        let mut rho0 = ComplexMatrix::<f64>::zeros(d, d);
        rho0[(0, 0)] = cr(1.0);
        let ctx = TrajectoryContext::from_initial_state(&model, rho0.clone())?;
        let target = lindblad_propagate(&rho0, &model, 0.0, t)?;
        let n = cfg.trajectories;
        let mut ideal = ComplexMatrix::<f64>::zeros(d, d);
        let mut filtered = ComplexMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let mut rng = stream_rng(cfg.seed, (j * n + i) as u64);
            let sample = sample_ideal_trajectory(&ctx, &mut rng);
            ideal += &sample.final_state * sample.final_state.adjoint() * cr(1.0 / n as f64);
            let (gamma, _) = coarse_grain(&sample.record, &model, &mut rng)?;
            filtered +=
                evolve_conditional_state(&gamma, &ctx, 2)?.final_state() * cr(1.0 / n as f64);
        }
        let (di, df) = (
            trace_distance(&ideal, &target),
            trace_distance(&filtered, &target),
        );
        table.push(vec![
            t.into(),
            target[(0, 0)].re.into(),
            ideal[(0, 0)].re.into(),
            filtered[(0, 0)].re.into(),
            di.into(),
            df.into(),
        ]);
        out.assertions.push(Assertion::new(
            format!("t={}: ideal trace distance", t),
            di,
            Relation::AtMost,
            0.02,
            0.0,
        ));
        out.assertions.push(Assertion::new(
            format!("t={}: filtered trace distance", t),
            df,
            Relation::AtMost,
            0.02,
            0.0,
        ));
    }
    out.tables.push(table);
    Ok(())
}

fn ft_global(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let ctx = context(cfg, cfg.tau)?;
    let g = check_global_fts(cfg.trajectories, &ctx, cfg.seed)?;
    let mut table = Table::new("estimates", &["quantity", "mean", "std_error", "samples"]);
    let mut row = |name: &str, e: &EstimateWithError| {
        table.push(vec![
            name.into(),
            e.mean.into(),
            e.std_error.into(),
            e.samples.into(),
        ]);
    };
    row("exp(-S_tot)", &g.exp_minus_s);
    row("exp(-Sigma)", &g.exp_minus_sigma);
    for (k, sig, s) in &g.moments {
        row(&format!("Sigma^{k}"), sig);
        row(&format!("S_tot^{k}"), s);
    }
    out.tables.push(table);
    for (name, e) in [
        ("<exp(-S_tot)> = 1", g.exp_minus_s),
        ("<exp(-Sigma)> = 1", g.exp_minus_sigma),
    ] {
        out.assertions.push(Assertion::new(
            name,
            e.mean,
            Relation::Near,
            1.0,
            SE_SLACK * e.std_error,
        ));
    }
    let mean_sigma = g.moments[0].1;
    out.assertions.push(Assertion::new(
        "<Sigma> >= 0",
        mean_sigma.mean,
        Relation::AtLeast,
        0.0,
        SE_SLACK * mean_sigma.std_error,
    ));
    for (k, sig, s) in &g.moments {
        out.assertions.push(Assertion::new(
            format!("<Sigma^{k}> <= <S_tot^{k}>"),
            sig.mean,
            Relation::AtMost,
            s.mean,
            SE_SLACK * combined(sig.std_error, s.std_error),
        ));
    }
    Ok(())
}

fn prefix_sizes(m: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut decade = 10;
    while decade <= m {
        for f in [1, 2, 5] {
            if f * decade <= m {
                sizes.push(f * decade);
            }
        }
        decade *= 10;
    }
    if sizes.last() != Some(&m) {
        sizes.push(m);
    }
    sizes
}

fn ft_conditional(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let tau = cfg.tau;
    let ctx = context(cfg, tau)?;
    let defaults = if is_emitter(cfg) {
        vec![
            Record::new(0, vec![], 0, tau),
            Record::new(0, vec![event(tau / 2.0, EMISSION)], 0, tau),
            Record::new(
                0,
                vec![
                    event(tau / 3.0, EMISSION),
                    event(2.0 * tau / 3.0, ABSORPTION),
                ],
                0,
                tau,
            ),
        ]
    } else {
        vec![Record::new(0, vec![], 0, tau)]
    };
    let mut table = Table::new(
        "convergence",
        &[
            "record",
            "samples",
            "exp_minus_sigma",
            "estimate",
            "std_error",
        ],
    );
    for (i, gamma) in records_or(cfg, defaults).iter().enumerate() {
        let ens = ConditionalEnsemble::sample(
            gamma,
            cfg.samples,
            &ctx,
            cfg.seed + i as u64,
            cfg.sampler_options(),
        )?;
        let lhs = (-ens.sigma()).exp();
        for m in prefix_sizes(cfg.samples) {
            let e = ens.prefix(m).conditional_ft().rhs;
            table.push(vec![
                gamma.to_string().into(),
                m.into(),
                lhs.into(),
                e.mean.into(),
                e.std_error.into(),
            ]);
        }
        let ft = ens.conditional_ft();
        out.assertions.push(Assertion::new(
            format!("`{gamma}`: <exp(-S_tot)|γ> = exp(-Sigma)"),
            ft.rhs.mean,
            Relation::Near,
            lhs,
            SE_SLACK * ft.rhs.std_error + EXACT_TOL,
        ));
        if cfg.samples >= 10_000 && ft.rhs.std_error > 0.0 {
            let sizes = [cfg.samples / 100, cfg.samples / 10, cfg.samples];
            let pts: Vec<(f64, f64)> = sizes
                .iter()
                .map(|&m| {
                    (
                        (m as f64).ln(),
                        ens.prefix(m).conditional_ft().rhs.std_error.ln(),
                    )
                })
                .collect();
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            out.assertions.push(Assertion::new(
                format!("`{gamma}`: SE log-log slope"),
                slope,
                Relation::Near,
                -0.5,
                0.05,
            ));
        }
    }
    out.tables.push(table);
    Ok(())
}

fn bound_eta_sweep(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let mut table = Table::new(
        "sweep",
        &[
            "tau",
            "eta",
            "sigma",
            "phi",
            "mean_s_tot",
            "gap",
            "gap_std_error",
            "beta_q",
            "beta_q_std_error",
        ],
    );
    let mut gaps: Vec<Vec<(f64, f64)>> = Vec::new();
    for (ti, &tau) in cfg.taus.iter().enumerate() {
        let mut row_gaps = Vec::new();
        for (ei, &eta) in cfg.eta_grid.iter().enumerate() {
            let ctx = context(&cfg.with_efficiencies(eta, eta), tau)?;
            let gamma = Record::new(0, vec![], 0, tau);
            let seed = cfg.seed + (100 * ti + ei) as u64;
            let ens = ConditionalEnsemble::sample(
                &gamma,
                cfg.samples,
                &ctx,
                seed,
                cfg.sampler_options(),
            )?;
            let gap = ens.entropy_gap();
            let hb = ens.heat_bound();
            let mean_s = EstimateWithError::from_samples(&ens.s_tot).mean;
            table.push(vec![
                tau.into(),
                eta.into(),
                ens.sigma().into(),
                hb.phi.into(),
                mean_s.into(),
                gap.mean.into(),
                gap.std_error.into(),
                hb.beta_q.mean.into(),
                hb.beta_q.std_error.into(),
            ]);
            let label = format!("tau={tau} eta={eta}");
            out.assertions.push(Assertion::new(
                format!("{label}: <S_tot|γ> - Sigma >= 0"),
                gap.mean,
                Relation::AtLeast,
                0.0,
                SE_SLACK * gap.std_error + EXACT_TOL,
            ));
            out.assertions.push(Assertion::new(
                format!("{label}: phi <= beta<Q|γ>"),
                hb.phi,
                Relation::AtMost,
                hb.beta_q.mean,
                SE_SLACK * hb.beta_q.std_error + EXACT_TOL,
            ));
            if eta == 1.0 {
                out.assertions.push(Assertion::new(
                    format!("{label}: gap vanishes"),
                    gap.mean,
                    Relation::AtMost,
                    0.0,
                    1e-6 + SE_SLACK * gap.std_error,
                ));
            }
            row_gaps.push((gap.mean, gap.std_error));
        }
        for w in 1..row_gaps.len() {
            let (a, b) = (row_gaps[w - 1], row_gaps[w]);
            out.assertions.push(Assertion::new(
                format!(
                    "tau={tau}: gap non-increasing from eta={} to eta={}",
                    cfg.eta_grid[w - 1],
                    cfg.eta_grid[w]
                ),
                b.0,
                Relation::AtMost,
                a.0,
                SE_SLACK * combined(a.1, b.1),
            ));
        }
        gaps.push(row_gaps);
    }
    for ti in 1..cfg.taus.len() {
        let (short, long) = (cfg.taus[ti - 1], cfg.taus[ti]);
        for (ei, &eta) in cfg.eta_grid.iter().enumerate() {
            if eta < 1.0 && long > short {
                let (a, b) = (gaps[ti - 1][ei], gaps[ti][ei]);
                out.assertions.push(Assertion::new(
                    format!("eta={eta}: gap at tau={long} >= gap at tau={short}"),
                    b.0,
                    Relation::AtLeast,
                    a.0,
                    SE_SLACK * combined(a.1, b.1),
                ));
            }
        }
    }
    out.tables.push(table);
    Ok(())
}

fn tail_bounds(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let ctx = context(cfg, cfg.tau)?;
    let gamma = match cfg.parsed_records().into_iter().next() {
        Some(r) => r,
        None => sample_visible_record(&ctx, &mut stream_rng(cfg.seed, 0))?,
    };
    let ens =
        ConditionalEnsemble::sample(&gamma, cfg.samples, &ctx, cfg.seed, cfg.sampler_options())?;
    let mut tails = Table::new(
        "tails",
        &["record", "tail", "q", "xi", "empirical", "bound", "slack"],
    );
    let m = cfg.samples as f64;
    for row in ens.tail_rows(&cfg.xi_grid, &cfg.q_grid) {
        let slack = SE_SLACK * (row.empirical_prob * (1.0 - row.empirical_prob) / m).sqrt();
        let tail = if row.tail == Tail::Left {
            "left"
        } else {
            "right"
        };
        tails.push(vec![
            gamma.to_string().into(),
            tail.into(),
            row.q.into(),
            row.xi.into(),
            row.empirical_prob.into(),
            row.bound.into(),
            slack.into(),
        ]);
        out.assertions.push(Assertion::new(
            format!("{tail} tail q={} xi={}", row.q, row.xi),
            row.empirical_prob,
            Relation::AtMost,
            row.bound,
            slack,
        ));
    }
    out.tables.push(tails);
    let mut moments = Table::new("moments", &["q", "estimate", "std_error"]);
    for &q in &cfg.q_grid {
        let e = ens.exp_moment(q);
        moments.push(vec![q.into(), e.mean.into(), e.std_error.into()]);
        out.assertions.push(Assertion::new(
            format!("<exp(q(S_tot - Sigma))|γ> >= 1 at q={q}"),
            e.mean,
            Relation::AtLeast,
            1.0,
            SE_SLACK * e.std_error,
        ));
    }
    out.tables.push(moments);
    let family = cfg
        .cgf_taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            let c = context(cfg, tau)?;
            let g = sample_visible_record(&c, &mut stream_rng(cfg.seed, 1 + i as u64))?;
            Ok((c, g))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut cgf = Table::new("cgf", &["q", "tau", "record", "value", "std_error"]);
    for &q in &cfg.q_grid {
        let points = scaled_cgf(q, &family, cfg.samples, cfg.seed, cfg.sampler_options())?;
        for (p, (_, g)) in points.iter().zip(&family) {
            cgf.push(vec![
                q.into(),
                p.tau.into(),
                g.to_string().into(),
                p.value.into(),
                p.std_error.into(),
            ]);
        }
    }
    out.tables.push(cgf);
    Ok(())
}

struct HeatCase {
    label: String,
    record: Record,
    fixed_eta_plus: Option<f64>,
}

fn heat_bound(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let cases = match (cfg.parsed_records(), is_emitter(cfg)) {
        (configured, _) if !configured.is_empty() => configured
            .into_iter()
            .map(|r| HeatCase {
                label: r.to_string(),
                record: r,
                fixed_eta_plus: None,
            })
            .collect(),
        (_, true) => vec![
            HeatCase {
                label: "no jumps, eta_plus = 1".into(),
                record: Record::new(0, vec![], 0, 0.5),
                fixed_eta_plus: Some(1.0),
            },
            HeatCase {
                label: "emission at 0.05".into(),
                record: Record::new(0, vec![event(0.05, EMISSION)], 0, 0.1),
                fixed_eta_plus: None,
            },
            HeatCase {
                label: "emission at 0.25".into(),
                record: Record::new(0, vec![event(0.25, EMISSION)], 0, 0.5),
                fixed_eta_plus: None,
            },
        ],
        (_, false) => vec![HeatCase {
            label: "no jumps".into(),
            record: Record::new(0, vec![], 0, cfg.tau),
            fixed_eta_plus: None,
        }],
    };
    let mut table = Table::new(
        "heat",
        &[
            "case",
            "record",
            "eta",
            "phi",
            "beta_q_sampled",
            "beta_q_std_error",
            "beta_q_exact",
            "beta_q_closed_form",
            "beta_q_closed_form_m_summed",
            "gap",
        ],
    );
    for (c, case) in cases.iter().enumerate() {
        let tau = case.record.tau;
        for (i, &eta) in cfg.eta_grid.iter().enumerate() {
            let ctx = context(
                &cfg.with_efficiencies(eta, case.fixed_eta_plus.unwrap_or(eta)),
                tau,
            )?;
            let seed = cfg.seed + (100 * c + i) as u64;
            let ens = ConditionalEnsemble::sample(
                &case.record,
                cfg.samples,
                &ctx,
                seed,
                cfg.sampler_options(),
            )?;
            let hb = ens.heat_bound();
            let beta_sum = |q: &std::collections::BTreeMap<usize, f64>| -> f64 {
                q.iter().map(|(r, x)| ctx.model.beta_of(*r) * x).sum()
            };
            let exact = beta_sum(&exact_conditional_heat(&case.record, &ctx)?);
            let closed = conditional_heat_closed_form(&case.record, &ctx, cfg.steps)?;
            let gap = hb.beta_q.mean - hb.phi;
            table.push(vec![
                case.label.clone().into(),
                case.record.to_string().into(),
                eta.into(),
                hb.phi.into(),
                hb.beta_q.mean.into(),
                hb.beta_q.std_error.into(),
                exact.into(),
                beta_sum(&closed.with_final_factor).into(),
                beta_sum(&closed.m_summed).into(),
                gap.into(),
            ]);
            let label = format!("{} eta={eta}", case.label);
            out.assertions.push(Assertion::new(
                format!("{label}: phi <= beta<Q|γ>"),
                hb.phi,
                Relation::AtMost,
                hb.beta_q.mean,
                SE_SLACK * hb.beta_q.std_error + EXACT_TOL,
            ));
            if eta == 1.0 {
                out.assertions.push(Assertion::new(
                    format!("{label}: gap vanishes"),
                    gap,
                    Relation::AtMost,
                    0.0,
                    1e-6 + SE_SLACK * hb.beta_q.std_error,
                ));
            }
        }
    }
    out.tables.push(table);
    Ok(())
}

fn averaged_ft(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let tau = cfg.tau;
    let ctx = context(cfg, tau)?;
    let defaults = if is_emitter(cfg) {
        vec![
            Record::new(0, vec![], 0, tau),
            Record::new(0, vec![event(tau / 2.0, EMISSION)], 0, tau),
        ]
    } else {
        vec![Record::new(0, vec![], 0, tau)]
    };
    let mut table = Table::new(
        "averaged",
        &[
            "visible",
            "form",
            "initial",
            "closed_form",
            "estimate",
            "std_error",
        ],
    );
    for (i, r) in records_or(cfg, defaults).iter().enumerate() {
        let v: String = r
            .events
            .iter()
            .map(|e| format!("{}:{} ", e.time, e.channel))
            .collect::<String>()
            .trim_end()
            .into();
        let check = check_averaged_fts(
            &r.events,
            None,
            cfg.samples,
            &ctx,
            cfg.seed + i as u64,
            cfg.sampler_options(),
        )?;
        for (n, lhs, est) in &check.m_summed {
            table.push(vec![
                v.clone().into(),
                "m-summed".into(),
                (*n).into(),
                (*lhs).into(),
                est.mean.into(),
                est.std_error.into(),
            ]);
            out.assertions.push(Assertion::new(
                format!("v=[{v}] n={n}: sum_m P[m|v,n] exp(-phi) = <exp(-beta Q)|n,v>"),
                est.mean,
                Relation::Near,
                *lhs,
                SE_SLACK * est.std_error + EXACT_TOL,
            ));
        }
        let (lhs, est) = check.nm_summed;
        table.push(vec![
            v.clone().into(),
            "nm-summed".into(),
            "all".into(),
            lhs.into(),
            est.mean.into(),
            est.std_error.into(),
        ]);
        out.assertions.push(Assertion::new(
            format!("v=[{v}]: sum_nm p_n P[m|v,n] exp(-phi) = <exp(-beta Q)|v>"),
            est.mean,
            Relation::Near,
            lhs,
            SE_SLACK * est.std_error + EXACT_TOL,
        ));
        let (heat, phi) = check.heat_inequality;
        table.push(vec![
            v.clone().into(),
            "heat-inequality".into(),
            "all".into(),
            phi.into(),
            heat.mean.into(),
            heat.std_error.into(),
        ]);
        out.assertions.push(Assertion::new(
            format!("v=[{v}]: beta<Q|v> >= sum_nm p_n P[m|v,n] phi"),
            heat.mean,
            Relation::AtLeast,
            phi,
            SE_SLACK * heat.std_error + EXACT_TOL,
        ));
    }
    out.tables.push(table);
    Ok(())
}

fn oracle_validate(cfg: &RunConfig, out: &mut ScenarioResult) -> Result<(), CliError> {
    let ctx = context(cfg, cfg.oracle_tau)?;
    let en = enumerate_discrete(&ctx, DiscreteGrid::new(cfg.bins, cfg.oracle_tau)?, cfg.bins)?;
    out.assertions.push(Assertion::new(
        "total mass",
        en.total_mass,
        Relation::Near,
        1.0,
        EXACT_TOL,
    ));

    let mut worst_leaf: f64 = 0.0;
    for leaf in en.leaves.iter().filter(|l| l.probability > 0.0) {
        if let Some(s) = leaf.s_tot {
            let ratio = leaf.probability.ln() - en.log_reversed_leaf_probability(leaf);
            worst_leaf = worst_leaf.max((ratio - s).abs());
        }
    }
    out.assertions.push(Assertion::new(
        "max |ln(P/P~) - S_tot| over leaves",
        worst_leaf,
        Relation::AtMost,
        0.0,
        EXACT_TOL,
    ));

    let mut table = Table::new(
        "records",
        &[
            "visible_record",
            "probability",
            "visible_chain_probability",
            "sigma",
            "exp_minus_sigma",
            "exact_mean_exp_minus_s",
            "conditional_mass",
        ],
    );
    let (mut worst_ft, mut worst_marginal, mut worst_mass): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (key, summary) in en.summaries() {
        let chain = en.log_visible_probability(&key).exp();
        let sigma = en.sigma(&key)?;
        let mass: f64 = oracle_conditional_distribution(&key, &en)?
            .iter()
            .map(|(_, p)| p)
            .sum();
        worst_ft = worst_ft.max((summary.exp_minus_s - (-sigma).exp()).abs());
        worst_marginal = worst_marginal.max((summary.probability - chain).abs());
        worst_mass = worst_mass.max((mass - 1.0).abs());
        table.push(vec![
            key.to_record(&en.grid).to_string().into(),
            summary.probability.into(),
            chain.into(),
            sigma.into(),
            (-sigma).exp().into(),
            summary.exp_minus_s.into(),
            mass.into(),
        ]);
    }
    out.tables.push(table);
    out.assertions.push(Assertion::new(
        "max |<exp(-S_tot)|γ> - exp(-Sigma)|",
        worst_ft,
        Relation::AtMost,
        0.0,
        EXACT_TOL,
    ));
    out.assertions.push(Assertion::new(
        "max |sum_h P(γ,h) - P(γ)|",
        worst_marginal,
        Relation::AtMost,
        0.0,
        1e-10,
    ));
    out.assertions.push(Assertion::new(
        "max |sum_h P(h|γ) - 1|",
        worst_mass,
        Relation::AtMost,
        0.0,
        1e-10,
    ));

    let unit = cfg.energy_unit();
    let mut heat = Table::new(
        "heat",
        &[
            "initial",
            "visible",
            "reservoir",
            "oracle_heat",
            "filtered_closed_form",
            "difference",
        ],
    );
    for ((n, visible), exact) in en.heat_given_visible_and_initial() {
        let closed = en.filtered_heat(n, &visible)?;
        let v: String = visible
            .iter()
            .map(|o| o.map_or("-".to_string(), |k| k.to_string()))
            .collect::<Vec<_>>()
            .join(" ");
        for (r, (a, b)) in exact.iter().zip(&closed.heat).enumerate() {
            heat.push(vec![
                n.into(),
                v.clone().into(),
                en.reservoirs[r].into(),
                (a / unit).into(),
                (b / unit).into(),
                ((a - b) / unit).into(),
            ]);
        }
    }
    out.tables.push(heat);
    out.attachments.push(("leaves.csv".into(), en.to_csv()));
    Ok(())
}
