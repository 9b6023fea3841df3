//! One function per subcommand. Nothing is written until every report is built.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use srelab::analytics::{constants_table, solve_kappa};
use srelab::laws::check_conditions;
use srelab::limitlab::{
    clt_experiment, covariance_decay_probe, fclt_experiment, truncated_moment_experiment, wlln_experiment,
    ExperimentReport, GarchParams, Level, Normalizer, RunOutput, Verdict, WllnSource,
};
use srelab::par::map_reps;
use srelab::rng::make_stream;
use srelab::slowvary::{
    bruin_bn, default_probe_grid, probe_condition, tail_ratio, tail_ratio_mc, truncated_mean, BnMode, Ell,
};
use srelab::sre::{forward_path, garch_path, perpetuity_sample, write_path_csv, PathConfig, PathSummary, Record};
use srelab::stats::{quantile_sorted, sorted};
use srelab::{Error, Result};

use crate::config::*;

/// A finished run plus an optional full path for `path.csv`.
pub struct Outcome {
    pub run: RunOutput,
    pub path: Option<(PathSummary, bool)>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.run.write(dir)?;
        if let Some((summary, garch)) = &self.path {
            write_path_csv(&dir.join("path.csv"), summary, *garch)?;
        }
        Ok(())
    }
}

fn finish<T: Serialize>(name: &str, r: &Resolved<T>, start: Instant, reports: Vec<ExperimentReport>) -> Result<Outcome> {
    let mut config = serde_json::to_value(&r.config)?;
    config["seed"] = r.seed.into();
    Ok(Outcome {
        run: RunOutput::new(name, config, r.seed, r.threads, start.elapsed().as_secs_f64(), reports),
        path: None,
    })
}

pub fn constants(args: &CommonArgs) -> Result<(Outcome, serde_json::Value)> {
    let start = Instant::now();
    let r: Resolved<ConstantsConfig> = args.resolve("constants")?;
    let law = require_law(&r.config.law)?;
    let conditions = check_conditions(&law, None);
    let table = constants_table(&law, &make_stream(r.seed), r.config.reps)?;
    let mut rep = ExperimentReport::new(&format!("constants/{}", law.label()));
    rep.push(Level::exact("kappa", 0.0, table.kappa));
    rep.push(Level::exact("m", 0.0, table.m));
    rep.push(Level::exact("m_plus", 0.0, table.m_plus));
    rep.push(Level::exact("m_minus", 0.0, table.m_minus));
    rep.push(Level::new("D", 0.0, table.d.value, table.d.std_error));
    for (name, v) in [
        ("c_prime", table.c_prime),
        ("tail_constant", table.tail_constant),
        ("c_lambda_z", table.c_lambda_z),
    ] {
        if let Some(v) = v {
            rep.push(Level::exact(name, 0.0, v));
        }
    }
    rep.flags.unreliable = table.d.unreliable;
    rep.note(format!("ln A non-arithmetic: {:?}", table.nonarithmetic));
    rep.verdict(Verdict::check(
        "standing_conditions",
        "all pass",
        conditions.all_pass() as u8 as f64,
        conditions.all_pass(),
    ));
    let printed = serde_json::json!({ "constants": table, "conditions": conditions });
    Ok((finish("constants", &r, start, vec![rep.finalize()])?, printed))
}

pub fn simulate(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<SimulateConfig> = args.resolve("simulate")?;
    let c = &r.config;
    let law = require_law(&c.law)?;
    if c.reps < 1 {
        return Err(Error::Input("reps must be >= 1".into()));
    }
    let kappa = match c.kappa {
        Some(k) => k,
        None if c.garch_returns => 1.0,
        None => solve_kappa(&law)?,
    };
    let garch = if c.garch_returns {
        Some(GarchParams::from_law(&law)?)
    } else {
        None
    };
    let stream = make_stream(r.seed);
    let run_one = |i: u64, s: &srelab::rng::Stream| {
        let cfg = PathConfig {
            n: c.n,
            u0: c.u0,
            record: if i == 0 { Record::Full } else { Record::Sums },
            lindeberg: None,
        };
        match &garch {
            Some((p, noise)) => garch_path(s, p.beta, p.lambda, p.delta, noise, &cfg),
            None => forward_path(s, &law, &cfg, kappa),
        }
    };
    let paths = map_reps(&stream, c.reps, Some(r.threads), run_one)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rep = ExperimentReport::new(&format!("simulate/{}", law.label()));
    for (i, p) in paths.iter().enumerate() {
        let i = i as f64;
        if garch.is_some() {
            rep.push(Level::exact("sum_x", i, p.sum_x));
            rep.push(Level::exact("sum_x2", i, p.sum_x2));
            rep.push(Level::exact("sum_sigma2", i, p.sum_sigma2));
        } else {
            rep.push(Level::exact("sum_u_kappa", i, p.sum_u_kappa));
        }
        rep.push(Level::exact("last", i, p.last));
        rep.flags.overflow += p.overflow as u64;
    }
    rep.verdict(Verdict::check("no_overflow", "0", rep.flags.overflow as f64, rep.flags.overflow == 0));
    let first = paths.into_iter().next().expect("reps >= 1");
    let mut out = finish("simulate", &r, start, vec![rep.finalize()])?;
    out.path = Some((first, garch.is_some()));
    Ok(out)
}

pub fn perpetuity(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<PerpetuityConfig> = args.resolve("perpetuity")?;
    let c = &r.config;
    let law = require_law(&c.law)?;
    if !(c.tol > 0.0 && c.tol < 1.0) || c.max_depth < 1 || c.reps < 1 {
        return Err(Error::Input("need tol in (0, 1), max_depth >= 1 and reps >= 1".into()));
    }
    if c.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::Input("quantiles must lie in [0, 1]".into()));
    }
    let draws = map_reps(&make_stream(r.seed), c.reps, Some(r.threads), |_, s| {
        perpetuity_sample(s, &law, c.tol, c.max_depth)
    })?;
    let values = sorted(&draws.iter().map(|d| d.value).collect::<Vec<_>>());
    let mut rep = ExperimentReport::new(&format!("perpetuity/{}", law.label()));
    for &q in &c.quantiles {
        rep.push(Level::exact("quantile", q, quantile_sorted(&values, q)));
    }
    let depth: Vec<f64> = draws.iter().map(|d| d.depth as f64).collect();
    let (m, se) = srelab::stats::mean_se(&depth);
    rep.push(Level::new("mean_depth", 0.0, m, se));
    rep.flags.truncated = draws.iter().filter(|d| d.flagged()).count() as u64;
    rep.verdict(Verdict::check(
        "no_flagged_samples",
        "0",
        rep.flags.truncated as f64,
        rep.flags.truncated == 0,
    ));
    finish("perpetuity", &r, start, vec![rep.finalize()])
}

pub fn truncmoment(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<TruncMomentConfig> = args.resolve("truncmoment")?;
    let law = require_law(&r.config.law)?;
    let rep = truncated_moment_experiment(&law, r.config.kappa, &r.config.spec, &make_stream(r.seed), Some(r.threads))?;
    finish("truncmoment", &r, start, vec![rep])
}

pub fn wlln(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<WllnConfig> = args.resolve("wlln")?;
    let c = &r.config;
    let source = match c.source {
        SourceKind::Sre => WllnSource::Sre {
            law: require_law(&c.law)?,
            kappa: c.kappa,
        },
        SourceKind::Iid => WllnSource::Iid {
            law: c
                .y
                .as_ref()
                .ok_or_else(|| Error::Input("an i.i.d. source needs `y`".into()))?
                .build()?,
            normalizer: match &c.normalizer {
                NormalizerSpec::TruncatedMean => Normalizer::TruncatedMean,
                NormalizerSpec::Bruin(text) => Normalizer::Bruin(Ell::parse(text)?),
            },
        },
    };
    let rep = wlln_experiment(&source, &c.spec, &make_stream(r.seed), Some(r.threads))?;
    finish("wlln", &r, start, vec![rep])
}

pub fn clt(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<CltConfig> = args.resolve("clt")?;
    let (p, noise) = GarchParams::from_law(&require_law(&r.config.law)?)?;
    let rep = clt_experiment(&p, &noise, &r.config.spec, &make_stream(r.seed), Some(r.threads))?;
    finish("clt", &r, start, vec![rep])
}

pub fn fclt(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<FcltConfig> = args.resolve("fclt")?;
    let (p, noise) = GarchParams::from_law(&require_law(&r.config.law)?)?;
    let rep = fclt_experiment(&p, &noise, &r.config.spec, &make_stream(r.seed), Some(r.threads))?;
    finish("fclt", &r, start, vec![rep])
}

pub fn covprobe(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<CovConfig> = args.resolve("covprobe")?;
    let law = require_law(&r.config.law)?;
    let rep = covariance_decay_probe(&law, r.config.kappa, &r.config.spec, &make_stream(r.seed), Some(r.threads))?;
    finish("covprobe", &r, start, vec![rep])
}

pub fn slowvary(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<SlowvaryConfig> = args.resolve("slowvary")?;
    let c = &r.config;
    let stream = make_stream(r.seed);
    let mut reports = Vec::new();
    if let Some(spec) = &c.y {
        let y = spec.build()?;
        let mut rep = ExperimentReport::new(&format!("slowvary/tail/{}", y.label()));
        for (i, &x) in c.x_grid.iter().enumerate() {
            rep.push(Level::exact("truncated_mean", x, truncated_mean(&y, x)));
            let exact = tail_ratio(&y, x)?;
            rep.push(Level::exact("tail_ratio", x, exact));
            if c.reps > 0 && y.can_sample() {
                let chunks = c.reps.clamp(1, 100);
                let mc = tail_ratio_mc(&y, x, chunks, c.reps / chunks, &stream.split(i as u64), Some(r.threads))?;
                rep.push(Level::new("tail_ratio_mc", x, mc.ratio, mc.std_error));
                let rel = mc.ratio / exact - 1.0;
                rep.verdict(Verdict::check(
                    &format!("tail_ratio_mc_x{x}"),
                    format!("|mc/exact - 1| <= {}", c.mc_tolerance),
                    mc.ratio,
                    rel.abs() <= c.mc_tolerance,
                ));
            }
        }
        reports.push(rep.finalize());
    }
    for text in &c.bn_ell {
        let ell = Ell::parse(text)?;
        let mut rep = ExperimentReport::new(&format!("slowvary/bn/{}", ell.label()));
        for &n in &c.n_grid {
            let fixed = bruin_bn(&ell, n, BnMode::FixedPoint)?;
            let direct = bruin_bn(&ell, n, BnMode::Direct)?;
            rep.push(Level::exact("b_n", n as f64, fixed.b));
            rep.push(Level::exact("b_n_direct", n as f64, direct.b));
            rep.push(Level::exact("direct_ratio", n as f64, direct.ratio));
            let residual = (fixed.ratio - 1.0).abs();
            rep.verdict(Verdict::check(
                &format!("fixed_point_n{n}"),
                "|n l(b_n)/b_n - 1| < 1e-9",
                residual,
                residual < 1e-9,
            ));
        }
        reports.push(rep.finalize());
    }
    for probe in &c.probes {
        let ell = Ell::parse(&probe.ell)?;
        let which = probe.which.parse()?;
        let pr = probe_condition(&ell, which, &default_probe_grid(), c.probe_tolerance)?;
        let mut rep = ExperimentReport::new(&format!("slowvary/probe/{}/{}", probe.which, ell.label()));
        for &(g, v) in &pr.rows {
            rep.push(Level::exact("ratio", g, v));
        }
        rep.note(format!("trend: {}", serde_json::to_value(pr.verdict)?.as_str().unwrap_or("?")));
        reports.push(rep.finalize());
    }
    if reports.is_empty() {
        return Err(Error::Input("nothing to do: give `y` with `x_grid`, `bn_ell` with `n_grid`, or `probes`".into()));
    }
    finish("slowvary", &r, start, reports)
}

pub fn selftest(args: &CommonArgs) -> Result<Outcome> {
    let start = Instant::now();
    let r: Resolved<serde_json::Value> = args.resolve("selftest")?;
    let rep = crate::selftest::selftest(r.seed);
    finish("selftest", &r, start, vec![rep])
}
