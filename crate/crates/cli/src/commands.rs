use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use shadowkit::analytic::{
    bifurcation_eps, classify_stability, layer_interval, layer_targets, maxwell_gap,
    maxwell_lambda, pitchfork_coeffs, sign_chart, Direction, Regime,
};
use shadowkit::continuation::{
    branch_from_bifurcation, detect_bifurcations, extend_to_small_eps, fit_pitchfork,
    write_branch_csv, write_profile_csv, Branch, BranchEvent, ContinuationConfig, EndReason,
};
use shadowkit::discretize::{Grid, State, DEFAULT_CELLS};
use shadowkit::eigen::{classify_spectrum, stability_spectrum};
use shadowkit::layer::{layer_solve, LayerOptions};
use shadowkit::model::{admissible, constant_state, equilibria_of_lambda};
use shadowkit::output::{fmt_f64, write_table};
use thiserror::Error;

use crate::config::{Command, ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] shadowkit::Error),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Model(e) if e.is_precondition() => 2,
            CliError::Model(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Files written by a successful run, relative to `out_dir`.
pub type Written = Vec<PathBuf>;

pub fn run(cfg: &RunConfig) -> CliResult<Written> {
    cfg.params.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    match cfg.command {
        Command::Analyze => analyze(cfg),
        Command::Detect => detect(cfg),
        Command::Branch => branch(cfg),
        Command::Layer => layer(cfg),
        Command::Stability => stability(cfg),
        Command::Maxwell => maxwell(cfg),
    }
}

fn config_json(cfg: &RunConfig) -> Value {
    Value::Object(
        cfg.resolved()
            .into_iter()
            .map(|(k, v)| (k, Value::String(v)))
            .collect(),
    )
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    if let Some(parent) = Path::new(name).parent() {
        fs::create_dir_all(dir.join(parent))?;
    }
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(PathBuf::from(name))
}

fn unavailable(e: shadowkit::Error) -> Value {
    json!({ "unavailable": e.to_string() })
}

fn analyze(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let cs = constant_state(p)?;
    let adm = admissible(p);
    let bif: Vec<Value> = (1..=8u32)
        .map(|k| match bifurcation_eps(k, p) {
            Ok(e) => json!({ "k": k, "eps": num(e) }),
            Err(e) => json!({ "k": k, "unavailable": e.to_string() }),
        })
        .collect();

    let pitchfork = match pitchfork_coeffs(1, p) {
        Ok(pc) => {
            let cls = classify_stability(1, p);
            json!({
                "k": 1,
                "k1": num(pc.k1),
                "k2": num(pc.k2),
                "k2_expansion": num(pc.k2_expansion),
                "lambda2_bar": num(pc.lambda2_bar),
                "t": num(pc.t),
                "direction": match &cls {
                    Ok(c) if c.direction == Direction::Left => Value::from("left"),
                    Ok(_) => Value::from("right"),
                    Err(e) => Value::from(e.to_string()),
                },
                "stable": cls.as_ref().map_or(Value::Null, |c| Value::Bool(c.stable)),
            })
        }
        Err(e) => unavailable(e),
    };

    let chart = match sign_chart(p) {
        Ok(c) => json!({
            "alpha": num(c.alpha),
            "beta": num(c.beta),
            "gamma": num(c.gamma),
            "roots": c.roots_in_window.iter().map(|&r| num(r)).collect::<Vec<_>>(),
            "regime": match c.regime {
                Regime::VbarBelow4_3 => "vbar<4/3",
                Regime::VbarEq4_3 => "vbar=4/3",
                Regime::VbarAbove4_3 => "vbar>4/3",
            },
        }),
        Err(e) => unavailable(e),
    };

    let layer = match layer_interval(p) {
        Ok((x1, x2)) => {
            let mut m = Map::new();
            m.insert("x1".into(), num(x1));
            m.insert("x2".into(), num(x2));
            match maxwell_lambda(p) {
                Ok(ls) => {
                    m.insert("maxwell_lambda".into(), num(ls));
                    m.insert(
                        "v2_at_maxwell".into(),
                        equilibria_of_lambda(ls, p).map_or(Value::Null, |e| num(e.v2)),
                    );
                }
                Err(e) => {
                    m.insert("maxwell_lambda".into(), Value::from(e.to_string()));
                }
            }
            if let Some(x0) = cfg.x0 {
                m.insert(
                    "targets".into(),
                    match layer_targets(x0, p) {
                        Ok(t) => json!({
                            "x0": num(t.x0),
                            "v2_limit": num(t.v2_limit),
                            "lambda0_bar": num(t.lambda0_bar),
                            "maxwell_gap": maxwell_gap(t.lambda0_bar, p).map_or(Value::Null, num),
                        }),
                        Err(e) => unavailable(e),
                    },
                );
            }
            Value::Object(m)
        }
        Err(e) => unavailable(e),
    };

    let report = json!({
        "config": config_json(cfg),
        "constant_state": { "v_bar": num(cs.v_bar), "lambda_bar": num(cs.lambda_bar) },
        "admissibility": {
            "ordering": adm.ordering,
            "positivity": adm.positivity,
            "lambda_window": [num(adm.lambda_window.0), num(adm.lambda_window.1)],
        },
        "bifurcations": bif,
        "pitchfork": pitchfork,
        "sign_chart": chart,
        "layer": layer,
    });
    Ok(vec![write_json(&cfg.out_dir, "analysis.json", &report)?])
}

fn detect(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let e1 = bifurcation_eps(1, p)?;
    let ek = bifurcation_eps(cfg.k_max, p)?;
    let lo = cfg.eps_lo.unwrap_or(0.8 * ek);
    let hi = cfg.eps_hi.unwrap_or(1.5 * e1);
    let n = cfg.n.unwrap_or(800);
    let found = detect_bifurcations(p, (lo, hi), cfg.k_max, n);
    let rows = found.iter().map(|d| {
        let exact = bifurcation_eps(d.k, p).unwrap_or(f64::NAN);
        vec![
            d.k.to_string(),
            fmt_f64(d.eps),
            fmt_f64(exact),
            fmt_f64(d.eps / exact - 1.0),
            fmt_f64(d.kernel_mean),
            fmt_f64(d.purity),
        ]
    });
    let mut w = create(&cfg.out_dir, "bifurcations.csv")?;
    write_table(
        &mut w,
        &cfg.resolved(),
        &[
            "k",
            "eps",
            "eps_analytic",
            "rel_err",
            "kernel_mean",
            "purity",
        ],
        rows,
    )?;
    w.flush()?;
    Ok(vec!["bifurcations.csv".into()])
}

fn end_name(e: &EndReason) -> String {
    match e {
        EndReason::AmplitudeReached => "amplitude_reached".into(),
        EndReason::EpsFloor => "eps_floor".into(),
        EndReason::PositivityExhausted => "positivity_exhausted".into(),
        EndReason::LeftDomain => "left_domain".into(),
        EndReason::StepFailure(m) => format!("step_failure: {m}"),
        EndReason::MaxPoints => "max_points".into(),
    }
}

fn folds(b: &Branch) -> Vec<Value> {
    b.events
        .iter()
        .map(|ev| match ev {
            BranchEvent::Fold { index, eps } => json!({ "index": index, "eps": num(*eps) }),
        })
        .collect()
}

fn write_profiles(cfg: &RunConfig, b: &Branch, dir: &str, written: &mut Written) -> io::Result<()> {
    for (i, pt) in b.points.iter().enumerate().step_by(cfg.profile_every) {
        let name = format!("{dir}/profile_{i:04}.csv");
        let mut header = cfg.resolved();
        header.extend([
            ("s".to_string(), fmt_f64(pt.s)),
            ("eps".into(), fmt_f64(pt.eps)),
            ("lambda".into(), fmt_f64(pt.lambda)),
        ]);
        let mut w = create(&cfg.out_dir, &name)?;
        write_profile_csv(&mut w, &pt.state, &header)?;
        w.flush()?;
        written.push(name.into());
    }
    Ok(())
}

fn branch(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let cc = ContinuationConfig {
        n: cfg.n.unwrap_or(ContinuationConfig::default().n),
        step: cfg.step,
        max_step: cfg.max_step,
        s_max: cfg.s_max,
        tol: cfg.tol,
        positivity_floor: cfg.positivity_floor,
        ..Default::default()
    };
    let (plus, minus) = branch_from_bifurcation(cfg.k, p, &cc)?;
    let joined = Branch::joined(&plus, &minus);
    let mut written = Written::new();

    let mut w = create(&cfg.out_dir, "branch.csv")?;
    write_branch_csv(&mut w, &joined, &cfg.resolved())?;
    w.flush()?;
    written.push("branch.csv".into());
    write_profiles(cfg, &joined, "profiles", &mut written)?;

    let fit = fit_pitchfork(&joined, cfg.s_max);
    let mut summary = json!({
        "config": config_json(cfg),
        "k": cfg.k,
        "origin": {
            "eps": num(joined.origin_eps),
            "lambda": num(joined.origin_lambda),
            "v": num(joined.origin_v),
        },
        "points": joined.points.len(),
        "end_plus": end_name(&plus.end),
        "end_minus": end_name(&minus.end),
        "folds": folds(&plus).into_iter().chain(folds(&minus)).collect::<Vec<_>>(),
        "fit": match fit {
            Ok(f) => json!({
                "k1": num(f.k1),
                "k2": num(f.k2),
                "lambda1": num(f.lambda1),
                "lambda2": num(f.lambda2),
                "points": f.points,
            }),
            Err(e) => unavailable(e),
        },
    });

    if let Some(eps_min) = cfg.eps_min {
        let ext = extend_to_small_eps(&plus, eps_min, p, &cc)?;
        let mut w = create(&cfg.out_dir, "branch_extended.csv")?;
        write_branch_csv(&mut w, &ext.branch, &cfg.resolved())?;
        w.flush()?;
        written.push("branch_extended.csv".into());
        write_profiles(cfg, &ext.branch, "profiles_extended", &mut written)?;
        summary["extension"] = json!({
            "points": ext.branch.points.len(),
            "end": end_name(&ext.branch.end),
            "last_eps": num(ext.branch.points.last().map_or(f64::NAN, |pt| pt.eps)),
            "monotone_fraction": num(ext.monotone_fraction),
        });
    }
    written.push(write_json(&cfg.out_dir, "branch_summary.json", &summary)?);
    Ok(written)
}

fn layer(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let (x0, eps) = (cfg.x0.unwrap_or_default(), cfg.eps.unwrap_or_default());
    let opts = LayerOptions {
        n: cfg.n,
        tol: cfg.tol,
        gap_tol: cfg.gap_tol,
        ..Default::default()
    };
    let r = layer_solve(x0, eps, p, &opts)?;
    let v = &r.state.v;
    let report = json!({
        "config": config_json(cfg),
        "lambda_eps": num(r.lambda_eps),
        "layer_x": num(r.layer_x),
        "sup_dev": num(r.sup_dev),
        "seed_dev": num(r.seed_dev),
        "maxwell_gap": num(r.maxwell_gap_at_lambda0),
        "lambda_balanced": num(r.lambda_balanced),
        "eps": num(r.eps),
        "x0": num(r.x0),
        "n": r.state.grid.n,
        "v0": num(v[0]),
        "vL": num(v[v.len() - 1]),
        "iterations": r.iterations,
        "residual": num(r.residual),
        "targets": {
            "x1": num(r.targets.x1),
            "x2": num(r.targets.x2),
            "v2_limit": num(r.targets.v2_limit),
            "lambda0_bar": num(r.targets.lambda0_bar),
        },
    });
    let mut written = vec![write_json(&cfg.out_dir, "layer_report.json", &report)?];
    let mut w = create(&cfg.out_dir, "layer_profile.csv")?;
    r.write_profile_csv(&mut w, p, &cfg.resolved())?;
    w.flush()?;
    written.push("layer_profile.csv".into());
    Ok(written)
}

fn stability(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let cs = constant_state(p)?;
    let eps = cfg.eps.unwrap_or_default();
    let grid = Grid::new(cfg.n.unwrap_or(DEFAULT_CELLS), p.l);
    let s = State::constant(cs.v_bar, cs.lambda_bar, grid);
    let ev = stability_spectrum(&s, eps, p, cfg.count)?;
    let verdict = match classify_spectrum(&ev, cfg.margin) {
        Ok(true) => "stable".to_string(),
        Ok(false) => "unstable".to_string(),
        Err(e) => e.to_string(),
    };
    let mut header = cfg.resolved();
    header.push(("verdict".into(), verdict));
    let rows = ev
        .iter()
        .enumerate()
        .map(|(i, z)| vec![i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    let mut w = create(&cfg.out_dir, "spectrum.csv")?;
    write_table(&mut w, &header, &["index", "re", "im"], rows)?;
    w.flush()?;
    Ok(vec!["spectrum.csv".into()])
}

fn maxwell(cfg: &RunConfig) -> CliResult<Written> {
    let p = &cfg.params;
    let (wlo, whi) = p.lambda_window();
    let lo = cfg.lambda_lo.unwrap_or(wlo);
    let hi = cfg.lambda_hi.unwrap_or(whi);
    let mut header = cfg.resolved();
    header.push((
        "lambda_star".into(),
        maxwell_lambda(p).map_or_else(|e| e.to_string(), fmt_f64),
    ));
    let mut rows = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let lam = lo + (hi - lo) * i as f64 / (cfg.samples - 1) as f64;
        let eq = equilibria_of_lambda(lam, p)?;
        rows.push(vec![
            fmt_f64(lam),
            fmt_f64(eq.v1),
            fmt_f64(eq.v2),
            fmt_f64(maxwell_gap(lam, p)?),
        ]);
    }
    let mut w = create(&cfg.out_dir, "maxwell.csv")?;
    write_table(&mut w, &header, &["lambda", "v1", "v2", "gap"], rows)?;
    w.flush()?;
    Ok(vec!["maxwell.csv".into()])
}
