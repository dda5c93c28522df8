//! One function per subcommand. Everything that can be rejected from the
//! config alone is checked in [`plan`] before any simulation starts.

use sausage_core::experiments::gap_bound_check;
use sausage_core::experiments::{
    clt_experiment, fclt_covariance_experiment, fourth_moment_experiment, gap_bound_holds,
    intersection_moment_experiment, intersection_process_experiment, lil_checkpoint_sequence, lil_gap_bound,
    lil_paths_experiment, lln_capacity_check, run_volume_replicas, sigma_experiment, tau_scaling_experiment, Cell,
    CltTolerances, ExperimentConfig, ExperimentReport, IntersectionProcessConfig, LilConfig, MomentConfig, ReplicaSet,
    Table, TauConfig,
};
use sausage_core::geometry::{estimate_volume, intersection_volume, slice, VolumeMethod};
use sausage_core::potential::{
    capacity_unit_ball, green_function, h_function, phi, phi_brownian, process_capacity_for, riesz_constant,
};
use sausage_core::process::simulate_skeleton;
use sausage_core::{Error, PotentialContext, ProcessParams, RandomStream};

use crate::config::{Command, MethodName, RunConfig};
use crate::CliError;

/// LLN relative tolerance at the last checkpoint.
pub const LLN_TOLERANCE: f64 = 0.1;
/// Allowed drift of `Var(V_t)/t` between the last two checkpoints.
pub const VARIANCE_DRIFT_TOLERANCE: f64 = 0.2;
/// Largest allowed deviation of an FCLT covariance from `min(s, u)`.
pub const FCLT_TOLERANCE: f64 = 0.12;

/// Config already checked against the command's preconditions.
pub struct Plan<'a> {
    pub cfg: &'a RunConfig,
    pub params: ProcessParams,
    pub method: VolumeMethod,
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn method_of(cfg: &RunConfig) -> VolumeMethod {
    match cfg.method {
        MethodName::Exact1d => VolumeMethod::Exact1d,
        MethodName::Grid => VolumeMethod::Grid {
            voxel_edge: cfg.grid_res,
        },
        MethodName::HitMiss => VolumeMethod::HitOrMiss {
            samples: cfg.mc_samples,
        },
    }
}

pub fn experiment_config(cfg: &RunConfig, params: ProcessParams, tail: Option<f64>) -> ExperimentConfig {
    ExperimentConfig {
        params,
        t_checkpoints: cfg.t_checkpoints.clone(),
        mesh: cfg.mesh,
        replicas: cfg.replicas,
        method: method_of(cfg),
        master_seed: cfg.seed,
        tail_factor: tail,
        workers: cfg.workers,
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg()))
    }
}

fn ratio_text(p: &ProcessParams) -> String {
    format!("d/alpha = {}/{} = {}", p.dim(), p.alpha(), p.ratio())
}

pub fn plan(cfg: &RunConfig) -> Result<Plan<'_>, CliError> {
    let params = ProcessParams::new(cfg.dim, cfg.alpha, cfg.radius).map_err(usage)?;
    let method = method_of(cfg);
    ensure(cfg.workers != Some(0), || "--workers must be positive".into())?;
    ensure(cfg.mesh > 0.0 && cfg.mesh.is_finite(), || {
        format!("--mesh {} must be positive", cfg.mesh)
    })?;
    ensure(cfg.t_end > 0.0 && cfg.t_end.is_finite(), || {
        format!("--t-end {} must be positive", cfg.t_end)
    })?;
    if matches!(cfg.method, MethodName::Exact1d) {
        ensure(cfg.dim == 1, || {
            format!("--method exact1d needs --dim 1, got {}", cfg.dim)
        })?;
    }
    if matches!(cfg.method, MethodName::Grid) {
        ensure(cfg.grid_res > 0.0 && cfg.grid_res <= cfg.radius / 2.0, || {
            format!("--grid-res {} must lie in (0, radius/2]", cfg.grid_res)
        })?;
    }
    if matches!(cfg.method, MethodName::HitMiss) {
        ensure(cfg.mc_samples > 0, || "--mc-samples must be positive".into())?;
    }
    let transient = || {
        ensure(params.is_transient(), || {
            format!(
                "`{}` needs a transient process, got {} <= 1",
                cfg.command.name(),
                ratio_text(&params)
            )
        })
    };
    let point = || {
        ensure(cfg.point.len() == cfg.dim, || {
            format!("--point has {} coordinates but --dim is {}", cfg.point.len(), cfg.dim)
        })
    };
    let replicated = |tail: Option<f64>| experiment_config(cfg, params, tail).validate().map_err(usage);
    match cfg.command {
        Command::Capacity | Command::Green => {
            transient()?;
            if cfg.command == Command::Green {
                point()?;
            }
        }
        Command::Phi => {
            transient()?;
            point()?;
            if cfg.alpha == 2.0 {
                ensure(cfg.dim >= 3, || "phi at alpha = 2 needs --dim >= 3".into())?;
            }
        }
        Command::Hfun => transient()?,
        Command::Simulate | Command::Volume | Command::Intersect => {
            ensure(cfg.mesh <= cfg.t_end, || {
                format!("--mesh {} exceeds --t-end {}", cfg.mesh, cfg.t_end)
            })?;
            if cfg.command == Command::Intersect {
                ensure(cfg.tail_factor.is_none_or(|f| f > 0.0), || {
                    "--tail-factor must be positive".into()
                })?;
            }
            if cfg.command != Command::Simulate {
                replicated(None)?;
            }
        }
        Command::Lln => {
            transient()?;
            replicated(cfg.tail_factor)?;
        }
        Command::Sigma | Command::FourthMoment => replicated(None)?,
        Command::Clt | Command::Fclt => {
            ensure(params.clt_regime(), || {
                format!(
                    "`{}` needs d/alpha > 3/2, got {} <= 3/2",
                    cfg.command.name(),
                    ratio_text(&params)
                )
            })?;
            replicated(None)?;
            if cfg.command == Command::Fclt {
                ensure(!cfg.fractions.is_empty(), || "--fractions is empty".into())?;
                for s in &cfg.fractions {
                    let t = s * cfg.t_end;
                    ensure(
                        cfg.t_checkpoints
                            .iter()
                            .any(|c| (c - t).abs() <= 1e-9 * t.abs().max(1.0)),
                        || format!("fraction {s} of --t-end gives t = {t}, which is not in --t-checkpoints"),
                    )?;
                }
            }
        }
        Command::Moments => {
            ensure((1..=3).contains(&cfg.k), || format!("--k {} must be 1, 2 or 3", cfg.k))?;
            ensure(cfg.t_tail > 0.0, || "--t-tail must be positive".into())?;
            ensure(cfg.replicas >= 2, || "--replicas must be at least 2".into())?;
        }
        Command::TauScaling => {
            point()?;
            let norm = cfg.point.iter().map(|v| v * v).sum::<f64>().sqrt();
            ensure(norm > 2.0 * cfg.radius, || {
                format!("|point| = {norm} must exceed 2 * radius")
            })?;
            ensure(cfg.radius == 1.0, || {
                "tau-scaling uses the unit ball; drop --radius".into()
            })?;
        }
        Command::LilSeq => ensure((1..=60).contains(&cfg.k_max), || {
            format!("--k-max {} must lie in 1..=60", cfg.k_max)
        })?,
        Command::Lil => {
            ensure(params.lil_regime(), || {
                format!("`lil` needs d/alpha > 9/5, got {} <= 9/5", ratio_text(&params))
            })?;
            ensure((1..=40).contains(&cfg.k_max), || {
                format!("--k-max {} must lie in 1..=40", cfg.k_max)
            })?;
            ensure(cfg.paths >= 1, || "--paths must be positive".into())?;
            ensure(cfg.mesh <= 1.0, || "--mesh must be at most 1 for lil".into())?;
            match cfg.sigma2 {
                Some(s) => ensure(s > 0.0, || "--sigma2 must be positive".into())?,
                None => replicated(None)?,
            }
        }
        Command::Selftest => {}
    }
    Ok(Plan { cfg, params, method })
}

/// Output of one command: reports in output order and what to print.
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    pub stdout: Vec<String>,
}

fn scalar(name: &str, cfg: &RunConfig, stats: &[(&str, f64)]) -> ExperimentReport {
    let mut t = Table::new(&["name", "value"]);
    for (k, v) in stats {
        t.push(vec![Cell::Text((*k).into()), (*v).into()]);
    }
    let mut r = ExperimentReport::new(name, describe(cfg), t);
    for (k, v) in stats {
        r.stat(k, *v, None);
    }
    r
}

fn describe(cfg: &RunConfig) -> Vec<(String, String)> {
    cfg.to_text()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn replicas(plan: &Plan, tail: Option<f64>) -> Result<ReplicaSet, Error> {
    run_volume_replicas(&experiment_config(plan.cfg, plan.params, tail))
}

pub fn execute(plan: &Plan) -> Result<Outcome, Error> {
    let cfg = plan.cfg;
    let p = plan.params;
    let one = |r: ExperimentReport| Outcome {
        stdout: Vec::new(),
        reports: vec![r],
    };
    let printed = |r: ExperimentReport, v: f64| Outcome {
        stdout: vec![format!("{v:?}")],
        reports: vec![r],
    };
    Ok(match cfg.command {
        Command::Capacity => {
            let cap = capacity_unit_ball(cfg.dim, cfg.alpha)?;
            let stats = [
                ("capacity_unit_ball", cap),
                ("riesz_constant", riesz_constant(cfg.dim, cfg.alpha)?),
                ("process_capacity", process_capacity_for(&p)?),
            ];
            printed(scalar("capacity", cfg, &stats), cap)
        }
        Command::Phi => {
            let y: Vec<f64> = cfg.point.iter().map(|v| v / cfg.radius).collect();
            let v = if cfg.alpha == 2.0 {
                phi_brownian(&y, cfg.dim)?
            } else {
                phi(&y, &PotentialContext::new(ProcessParams::unit(cfg.dim, cfg.alpha)?)?)?
            };
            printed(scalar("phi", cfg, &[("phi", v)]), v)
        }
        Command::Green => {
            let v = green_function(&cfg.point, &PotentialContext::new(p)?)?;
            printed(scalar("green", cfg, &[("green", v)]), v)
        }
        Command::Hfun => {
            let v = h_function(cfg.t_end, cfg.dim, cfg.alpha)?;
            printed(scalar("hfun", cfg, &[("h", v)]), v)
        }
        Command::Simulate => {
            let path = simulate_skeleton(&p, cfg.t_end, cfg.mesh, &mut RandomStream::new(cfg.seed, 0))?;
            let mut cols = vec!["t".to_string()];
            cols.extend((1..=cfg.dim).map(|i| format!("x{i}")));
            let mut t = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
            for (time, x) in path.times().iter().zip(path.points()) {
                let mut row = vec![Cell::Real(*time)];
                row.extend(x.iter().map(|v| Cell::Real(*v)));
                t.push(row);
            }
            let mut r = ExperimentReport::new("simulate", describe(cfg), t);
            r.stat("points", path.len() as f64, None);
            one(r)
        }
        Command::Volume => {
            let stream = RandomStream::new(cfg.seed, 0);
            let path = simulate_skeleton(
                &p,
                cfg.t_end.max(*cfg.t_checkpoints.last().unwrap()),
                cfg.mesh,
                &mut stream.clone(),
            )?;
            let mut t = Table::new(&["t", "volume", "stat_error"]);
            let mut last = 0.0;
            for (i, &tc) in cfg.t_checkpoints.iter().enumerate() {
                let est = estimate_volume(
                    &slice(&path, 0.0, tc, cfg.radius)?,
                    &plan.method,
                    &stream.derive(1 + i as u64),
                )?;
                t.push(vec![tc.into(), est.value.into(), est.stat_error.into()]);
                last = est.value;
            }
            let mut r = ExperimentReport::new("volume", describe(cfg), t);
            r.stat("volume", last, None);
            printed(r, last)
        }
        Command::Intersect => {
            let f = cfg.tail_factor.unwrap_or(1.0);
            let stream = RandomStream::new(cfg.seed, 0);
            let horizon = cfg.t_checkpoints.last().unwrap() * (1.0 + f);
            let path = simulate_skeleton(&p, horizon, cfg.mesh, &mut stream.clone())?;
            let mut t = Table::new(&["t", "intersection", "stat_error"]);
            let mut last = 0.0;
            for (i, &tc) in cfg.t_checkpoints.iter().enumerate() {
                let head = slice(&path, 0.0, tc, cfg.radius)?;
                let tail = slice(&path, tc, tc * (1.0 + f), cfg.radius)?;
                let est = intersection_volume(&head, &tail, &plan.method, &stream.derive(1 + i as u64))?;
                t.push(vec![tc.into(), est.value.into(), est.stat_error.into()]);
                last = est.value;
            }
            let mut r = ExperimentReport::new("intersect", describe(cfg), t);
            r.stat("intersection", last, None);
            printed(r, last)
        }
        Command::Lln => {
            let set = replicas(plan, cfg.tail_factor)?;
            let ctx = PotentialContext::new(p)?;
            let mut reports = vec![lln_capacity_check(&set, &ctx, LLN_TOLERANCE)?];
            if cfg.tail_factor.is_some() {
                reports.push(gap_bound_check(&set, &ctx)?);
            }
            Outcome {
                reports,
                stdout: Vec::new(),
            }
        }
        Command::Sigma => one(sigma_experiment(&replicas(plan, None)?, VARIANCE_DRIFT_TOLERANCE)?.1),
        Command::Clt => {
            let set = replicas(plan, None)?;
            let (sigma, sigma_report) = sigma_experiment(&set, VARIANCE_DRIFT_TOLERANCE)?;
            let clt = clt_experiment(&set, &sigma, &PotentialContext::new(p)?, CltTolerances::default())?;
            Outcome {
                reports: vec![clt, sigma_report],
                stdout: Vec::new(),
            }
        }
        Command::Fclt => {
            let set = replicas(plan, None)?;
            let (sigma, sigma_report) = sigma_experiment(&set, VARIANCE_DRIFT_TOLERANCE)?;
            let fclt = fclt_covariance_experiment(&set, &sigma, cfg.t_end, &cfg.fractions, FCLT_TOLERANCE)?;
            Outcome {
                reports: vec![fclt, sigma_report],
                stdout: Vec::new(),
            }
        }
        Command::Moments => one(intersection_moment_experiment(&MomentConfig {
            params: p,
            t: cfg.t_end,
            t_tail: cfg.t_tail,
            pairs: cfg.replicas,
            mesh: cfg.mesh,
            method: plan.method,
            master_seed: cfg.seed,
            k: cfg.k,
            workers: cfg.workers,
        })?),
        Command::FourthMoment => one(fourth_moment_experiment(&replicas(plan, None)?)?),
        Command::TauScaling => one(tau_scaling_experiment(&TauConfig {
            params: p,
            start: cfg.point.clone(),
            t_max: cfg.t_end,
            mesh: cfg.mesh,
            replicas: cfg.replicas,
            target_uncensored: cfg.target_uncensored,
            max_replicas: cfg.max_replicas,
            master_seed: cfg.seed,
            workers: cfg.workers,
        })?),
        Command::LilSeq => {
            let seq = lil_checkpoint_sequence(cfg.k_max)?;
            let mut t = Table::new(&["n", "gap", "gap_bound", "bound_holds"]);
            let mut all = true;
            for (i, &n) in seq.iter().enumerate() {
                let next = seq.get(i + 1).copied();
                let holds = next.is_none_or(|m| gap_bound_holds(n, m));
                all &= holds;
                t.push(vec![
                    Cell::from(n),
                    next.map_or(Cell::Text(String::new()), |m| Cell::from(m - n)),
                    lil_gap_bound(n).map_or(Cell::Text(String::new()), Cell::Real),
                    Cell::Int(i64::from(holds)),
                ]);
            }
            let mut r = ExperimentReport::new("lil-seq", describe(cfg), t);
            r.stat("length", seq.len() as f64, None);
            r.checks.push(sausage_core::experiments::Check::at_least(
                "gap_bound",
                f64::from(u8::from(all)),
                1.0,
            ));
            let line = seq.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
            Outcome {
                reports: vec![r],
                stdout: vec![line],
            }
        }
        Command::Lil => {
            let mut reports = Vec::new();
            let sigma2 = match cfg.sigma2 {
                Some(s) => s,
                None => {
                    let set = replicas(plan, None)?;
                    let (est, report) = sigma_experiment(&set, VARIANCE_DRIFT_TOLERANCE)?;
                    reports.push(report);
                    est.sigma2
                }
            };
            let lil = lil_paths_experiment(&LilConfig {
                params: p,
                sigma2,
                k_max: cfg.k_max,
                mesh: cfg.mesh,
                method: plan.method,
                paths: cfg.paths,
                master_seed: cfg.seed,
                workers: cfg.workers,
            })?;
            let process = intersection_process_experiment(&IntersectionProcessConfig {
                params: p,
                k_max: cfg.k_max,
                mesh: cfg.mesh,
                method: plan.method,
                paths: cfg.paths,
                master_seed: cfg.seed,
                workers: cfg.workers,
            })?;
            reports.insert(0, process);
            reports.insert(0, lil);
            Outcome {
                reports,
                stdout: Vec::new(),
            }
        }
        Command::Selftest => unreachable!("selftest has its own runner"),
    })
}
