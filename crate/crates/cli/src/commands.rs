use std::collections::HashMap;

use clap::Args;
use kappa_qkd::dynamics::{epsilon, integrate_pair, HiddenState, Kappa, Spin};
use kappa_qkd::experiments::{bb84_demo as run_bb84, ensemble as run_ensemble, sweep_row};
use kappa_qkd::protocol::RoundType;
use kappa_qkd::{run_session, summarize, AdversaryRegistry, Execution};

use crate::config::RunConfig;
use crate::output::{self, float, write_json, CsvWriter};
use crate::{CliError, GlobalArgs};

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub z1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub z2: f64,
    /// Signed field scale of Bob's magnet.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: f64,
    /// Exit with code 3 if the trajectory has not committed by `t_end`.
    #[arg(long)]
    pub require_commit: bool,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Number of equilibrium samples [default: session.n_rounds].
    #[arg(long)]
    pub samples: Option<u64>,
    /// Signed κ [default: +session.kappa_magnitude].
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated |κ| values.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    pub kappas: Vec<f64>,
}

struct Context {
    config: RunConfig,
    registry: AdversaryRegistry,
    exec: Execution,
}

fn setup(global: &GlobalArgs, uses_rounds_csv: bool) -> Result<Context, CliError> {
    if global.rounds_csv.is_some() && !uses_rounds_csv {
        return Err(CliError::Config(
            "--rounds-csv only applies to `protocol`".into(),
        ));
    }
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.session.seed = seed;
    }
    let registry = AdversaryRegistry::builtin();
    config.validate(&registry)?;
    let exec = match global.threads {
        1 => Execution::Serial,
        threads => Execution::Parallel { threads },
    };
    Ok(Context {
        config,
        registry,
        exec,
    })
}

fn note(global: &GlobalArgs, msg: impl AsRef<str>) {
    if !global.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn sign_field(x: f64) -> &'static str {
    if x > 0.0 {
        "1"
    } else if x < 0.0 {
        "-1"
    } else {
        "0"
    }
}

fn spin_field(s: Spin) -> &'static str {
    match s {
        Spin::Up => "1",
        Spin::Down => "-1",
    }
}

pub fn trajectory(global: &GlobalArgs, args: &TrajectoryArgs) -> Result<(), CliError> {
    let ctx = setup(global, false)?;
    let initial = HiddenState::new(args.z1, args.z2);
    if !initial.is_finite() {
        return Err(CliError::Config(format!(
            "initial state must be finite, got ({}, {})",
            args.z1, args.z2
        )));
    }
    let kappa = Kappa::from_value(args.kappa)?;
    let physics = &ctx.config.physics;
    let traj = integrate_pair(initial, kappa, physics, &ctx.config.integrator)?;

    let mut csv = CsvWriter::create(
        global.out.as_deref(),
        &["t", "z1", "z2", "epsilon", "tanh_argument_sign"],
    )?;
    for ((&t, &z1), &z2) in traj.times.iter().zip(&traj.z1_path).zip(&traj.z2_path) {
        let u = HiddenState::new(z1, z2).separation(kappa);
        csv.row(&[
            float(t),
            float(z1),
            float(z2),
            float(epsilon(t, physics)),
            sign_field(u).to_string(),
        ])?;
    }
    csv.finish()?;

    match traj.outcomes() {
        Ok((a, b)) => {
            note(
                global,
                format!("committed: alice {}, bob {}", spin_field(a), spin_field(b)),
            );
            Ok(())
        }
        Err(e) if args.require_commit => Err(e.into()),
        Err(e) => {
            note(global, format!("warning: {e}"));
            Ok(())
        }
    }
}

pub fn ensemble(global: &GlobalArgs, args: &EnsembleArgs) -> Result<(), CliError> {
    let ctx = setup(global, false)?;
    let session = ctx.config.session_config();
    let kappa = Kappa::from_value(args.kappa.unwrap_or(session.kappa_magnitude))?;
    let n = args.samples.unwrap_or(session.n_rounds);
    let out = output::open(global.out.as_deref())?;
    let stats = run_ensemble(&session, kappa, n, ctx.exec)?;
    write_json(out, &stats)?;
    note(
        global,
        format!(
            "{} samples at kappa {}: {} committed, {} violations",
            stats.n_samples, stats.kappa, stats.n_committed, stats.correlation_violations
        ),
    );
    Ok(())
}

pub fn protocol(global: &GlobalArgs) -> Result<(), CliError> {
    let ctx = setup(global, true)?;
    let session = ctx.config.session_config();
    let adversary = ctx
        .registry
        .create(&ctx.config.adversary.model, &ctx.config.adversary_options())?;
    let out = output::open(global.out.as_deref())?;
    let rounds_csv = match &global.rounds_csv {
        Some(path) => Some(CsvWriter::create(
            Some(path),
            &[
                "round_index",
                "type",
                "alice_setting",
                "bob_setting",
                "kappa_sign",
                "z1_0",
                "z2_0",
                "outcome_a",
                "outcome_b",
                "eve_guess_a",
                "forced",
            ],
        )?),
        None => None,
    };
    let run = run_session(&session, adversary.as_ref(), ctx.exec)?;
    let report = summarize(&run, &session, adversary.as_ref())?;
    write_json(out, &report)?;

    if let Some(mut csv) = rounds_csv {
        let predictions: HashMap<u64, _> =
            run.predictions.iter().map(|p| (p.round_index, p)).collect();
        for r in &run.records {
            let prediction = predictions.get(&r.round_index);
            csv.row(&[
                r.round_index.to_string(),
                match r.round_type {
                    RoundType::Key => "key".into(),
                    RoundType::Test => "test".into(),
                },
                r.alice_setting.label().into(),
                r.bob_setting.label().into(),
                r.kappa_sign
                    .map_or(String::new(), |s| s.as_i8().to_string()),
                r.hidden.map_or(String::new(), |h| float(h.z1)),
                r.hidden.map_or(String::new(), |h| float(h.z2)),
                spin_field(r.outcome_alice).into(),
                spin_field(r.outcome_bob).into(),
                prediction.map_or(String::new(), |p| {
                    spin_field(Spin::from_bit(p.predicted_alice_bit)).into()
                }),
                prediction.map_or(String::new(), |p| p.is_forced.to_string()),
            ])?;
        }
        csv.finish()?;
    }

    let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.5}"));
    note(
        global,
        format!(
            "{} rounds ({} key, {} test), qber {}, S {}, eve accuracy {}",
            report.n_rounds,
            report.n_key,
            report.n_test,
            opt(report.qber),
            opt(report.chsh_S),
            opt(report.eve_accuracy)
        ),
    );
    Ok(())
}

pub fn sweep(global: &GlobalArgs, args: &SweepArgs) -> Result<(), CliError> {
    let ctx = setup(global, false)?;
    if args.kappas.is_empty() {
        return Err(CliError::Config("--kappas needs at least one value".into()));
    }
    if let Some(bad) = args.kappas.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(CliError::Config(format!(
            "--kappas values must be finite and > 0, got {bad}"
        )));
    }
    let session = ctx.config.session_config();
    let mut csv = CsvWriter::create(
        global.out.as_deref(),
        &[
            "kappa_magnitude",
            "eve_accuracy",
            "analytic_prediction",
            "bob_bit_invariance_rate",
        ],
    )?;
    let mut rows = Vec::with_capacity(args.kappas.len());
    for &k in &args.kappas {
        let row = sweep_row(&session, k, ctx.exec)?;
        note(
            global,
            format!(
                "|kappa| {k}: eve accuracy {:.5} (analytic {:.5}), bob invariance {:.5}",
                row.eve_accuracy.estimate, row.analytic_prediction, row.bob_bit_invariance.estimate
            ),
        );
        rows.push(row);
    }
    for row in rows {
        csv.row(&[
            float(row.kappa_magnitude),
            float(row.eve_accuracy.estimate),
            float(row.analytic_prediction),
            float(row.bob_bit_invariance.estimate),
        ])?;
    }
    csv.finish()
}

pub fn bb84_demo(global: &GlobalArgs) -> Result<(), CliError> {
    let ctx = setup(global, false)?;
    let session = ctx.config.session_config();
    let out = output::open(global.out.as_deref())?;
    let report = run_bb84(
        session.n_rounds,
        session.seed,
        &session.physics,
        ctx.config.adversary.knows_hidden,
        ctx.exec,
    )?;
    write_json(out, &report)?;
    note(
        global,
        format!(
            "{} rounds, eve accuracy {:.5}",
            report.n_rounds, report.eve_accuracy
        ),
    );
    Ok(())
}
