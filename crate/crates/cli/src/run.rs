use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lievortex::control::{
    lie_rank, planar_bracket_rank, planar_rank_of, steer, transversality_probe, two_generator_check, vortex_transfer,
    ControlError, SteerResult, Word,
};
use lievortex::liecore::{algebra_dim, coadjoint_action, GroupElement};
use lievortex::reduction::{integrate, integrate_chaplygin, ChaplyginState};
use lievortex::sampling::{random_rotation, seeded};
use lievortex::stiefel::{integrate_stiefel, ControlledTop, StiefelOptions, StiefelState};
use lievortex::vortex::{darboux_decompose, isotropy_basis, probe_vortex_manifold};
use nalgebra::{DMatrix, Vector3};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{self, config_error, Command, Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(#[from] lievortex::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(e) if e.is_budget() => 3,
            _ => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.into())
            }
        }
    )*};
}
numerical_from!(
    lievortex::liecore::LieError,
    lievortex::reduction::ReductionError,
    lievortex::stiefel::StiefelError,
    ControlError
);

/// Outcome of a command that produced its outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// Outputs were written but a numerical budget or tolerance was not met.
    Budget(String),
}

pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let path = self.path(name);
        let wrap = |e: csv::Error| CliError::Write { path: path.clone(), source: e.into() };
        let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(wrap)?;
        }
        w.flush().map_err(|source| CliError::Write { path: path.clone(), source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Write { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn matrix_header(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (1..=rows).flat_map(|i| (1..=cols).map(move |j| format!("{prefix}{i}_{j}"))).collect()
}

/// `m12, m13, …` in coordinate order.
fn upper_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|i| (i + 1..=n).map(move |j| format!("{prefix}{i}_{j}"))).collect()
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(matrix_header("g", n, n));
    h.extend(upper_header("m", n));
    h.extend(["drift_momentum", "drift_energy", "drift_orthogonality"].map(String::from));
    h
}

fn relative(diff: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        diff / reference
    } else {
        diff
    }
}

pub fn run(command: Command, cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(config_error(
                "command",
                format!("config is for {:?} but {:?} was requested", c.name(), command.name()),
            )
            .into());
        }
    }
    match command {
        Command::Simulate => simulate(cfg, out),
        Command::Chaplygin => chaplygin(cfg, out),
        Command::Vortex => vortex(cfg, out),
        Command::Stiefel => stiefel(cfg, out),
        Command::Steer => steer_cmd(cfg, out),
        Command::Transfer => transfer(cfg, out),
        Command::RankCheck => rank_check(cfg, out),
        Command::Transversality => transversality(cfg, out),
    }
}

fn simulate(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let n = cfg.n()?;
    let sys = cfg.system()?;
    let g0 = cfg.g0()?;
    let mut rows = Vec::new();
    let summary = if let Some(signal) = cfg.signal()? {
        // controlled replay, sampled at the segment breakpoints
        let csys = cfg.control_system()?;
        let states = csys.flow_breakpoints(&g0, &signal)?;
        let a = match sys.operator() {
            lievortex::reduction::OperatorField::Constant(a) => a.clone(),
            lievortex::reduction::OperatorField::StateDependent(_) => unreachable!("config builds constant operators"),
        };
        let m_s = sys.conserved_momentum();
        let h0 = a.energy(&coadjoint_action(&g0, m_s)?)?;
        let mut worst = [0.0f64; 3];
        for (j, g) in states.iter().enumerate() {
            let m_body = coadjoint_action(g, m_s)?;
            let back = coadjoint_action(&g.inverse(), &m_body)?;
            let drift = [
                relative((back.matrix() - m_s.matrix()).norm(), m_s.norm()),
                relative((a.energy(&m_body)? - h0).abs(), h0.abs()),
                g.orthogonality_defect(),
            ];
            for (w, d) in worst.iter_mut().zip(drift) {
                *w = w.max(d);
            }
            let mut row = vec![j as f64 * signal.segment_duration()];
            row.extend(row_major(g.matrix()));
            row.extend(m_body.coords());
            row.extend(drift);
            rows.push(row);
        }
        json!({
            "mode": "controlled",
            "samples": rows.len(),
            "t_end": signal.horizon(),
            "max_drift": { "momentum": worst[0], "energy_change": worst[1], "orthogonality": worst[2] },
            "endpoint": row_major(states.last().expect("nonempty").matrix()),
        })
    } else {
        let opts = cfg.integration()?;
        let traj = integrate(&sys, &g0, &opts)?;
        for s in &traj.samples {
            let mut row = vec![s.t];
            row.extend(row_major(s.g.matrix()));
            row.extend(s.m_body.coords());
            row.extend([s.drift.momentum, s.drift.energy, s.drift.orthogonality]);
            rows.push(row);
        }
        json!({
            "mode": "free",
            "samples": rows.len(),
            "t_end": opts.t_end,
            "max_drift": {
                "momentum": traj.max_drift.momentum,
                "energy": traj.max_drift.energy,
                "orthogonality": traj.max_drift.orthogonality,
            },
            "endpoint": row_major(traj.last().g.matrix()),
        })
    };
    out.csv("trajectory.csv", &trajectory_header(n), &rows)?;
    out.json("summary.json", &summary)?;
    Ok(Status::Ok)
}

fn chaplygin(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let b = cfg.chaplygin.as_ref().ok_or_else(|| config_error("chaplygin", "block required"))?;
    let inertia = cfg.chaplygin_inertia()?;
    let m0 = Vector3::from(b.momentum);
    let gamma0 = Vector3::from(b.gamma);
    let state = ChaplyginState::new(m0, gamma0, inertia, b.d).map_err(|e| config_error("chaplygin", e.to_string()))?;
    let opts = cfg.integration()?;
    let traj = integrate_chaplygin(&state, opts.t_end, opts.h)?;
    let (n0, p0, e0) = (m0.norm(), m0.dot(&gamma0), traj[0].energy);
    let mut worst = [0.0f64; 3];
    let mut rows = Vec::new();
    for (i, s) in traj.iter().enumerate() {
        let drift = [
            (s.momentum.norm() - n0).abs(),
            (s.momentum.dot(&s.gamma) - p0).abs(),
            relative((s.energy - e0).abs(), e0.abs()),
        ];
        for (w, d) in worst.iter_mut().zip(drift) {
            *w = w.max(d);
        }
        if i % opts.sample_every == 0 || i + 1 == traj.len() {
            let mut row = vec![s.t];
            row.extend(s.momentum.iter());
            row.extend(s.gamma.iter());
            row.push(s.energy);
            row.extend(drift);
            rows.push(row);
        }
    }
    let header: Vec<String> = [
        "t",
        "M1",
        "M2",
        "M3",
        "gamma1",
        "gamma2",
        "gamma3",
        "energy",
        "drift_norm",
        "drift_projection",
        "drift_energy",
    ]
    .map(String::from)
    .to_vec();
    out.csv("chaplygin.csv", &header, &rows)?;
    out.json(
        "summary.json",
        &json!({
            "samples": rows.len(),
            "t_end": opts.t_end,
            "max_drift": { "norm": worst[0], "projection": worst[1], "energy": worst[2] },
            "drift_budget": opts.drift_budget,
        }),
    )?;
    let exceeded = worst.iter().any(|w| *w > opts.drift_budget);
    Ok(if exceeded { Status::Budget(format!("invariant drift exceeds {:e}", opts.drift_budget)) } else { Status::Ok })
}

fn vortex(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let m = cfg.momentum()?;
    let vb = cfg.vortex.clone().unwrap_or_default();
    let g0 = cfg.g0()?;
    let basis = isotropy_basis(&m, vb.rank_tol);
    let manifold = probe_vortex_manifold(&basis, &g0, vb.grid_steps)?;
    let frame = darboux_decompose(&m, vb.rank_tol);
    out.json(
        "vortex_report.json",
        &json!({
            "n": m.dim(),
            "momentum": m.coords(),
            "rank_tol": vb.rank_tol,
            "dimension": basis.dim(),
            "codimension": algebra_dim(m.dim()) - basis.dim(),
            "basis": basis.coordinate_rows(),
            "singular_values": basis.singular_values,
            "isotropy_residual": basis.isotropy_residual(),
            "abelian": manifold.abelian,
            "abelian_residual": manifold.abelian_residual,
            "closure_residual": manifold.closure_residual,
            "manifold_dimension": manifold.dimension,
            "grid_points": manifold.grid_points,
            "recurrence": manifold.circles,
            "darboux_levels": frame.h_levels,
        }),
    )?;
    Ok(Status::Ok)
}

fn stiefel(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let n = cfg.n()?;
    let u = cfg.manakov_u()?;
    let m = cfg.momentum()?;
    let g0 = cfg.g0()?;
    let tol = cfg.vortex.clone().unwrap_or_default().rank_tol;
    let frame = darboux_decompose(&m, tol);
    let state = StiefelState::from_frame(&frame, &g0)?;
    let top = match cfg.signal()? {
        Some(signal) => {
            let c = cfg.controls_block()?;
            ControlledTop::new(u, cfg.control_dirs()?, c.epsilon, signal)?
        }
        None => ControlledTop::free(u)?,
    };
    let io = cfg.integration()?;
    let opts =
        StiefelOptions { t_end: io.t_end, h: io.h, drift_budget: io.drift_budget, sample_every: io.sample_every };
    let samples = integrate_stiefel(&state, &top, &opts)?;
    let r = state.blocks();
    let mut header = vec!["t".to_string()];
    header.extend(matrix_header("x", r, n));
    header.extend(matrix_header("y", r, n));
    header.push("gram_drift".into());
    header.extend((1..=n).map(|i| format!("sigma{i}")));
    let spec0 = samples[0].spectrum.clone();
    let mut spec_drift = 0.0f64;
    let mut gram_drift = 0.0f64;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            gram_drift = gram_drift.max(s.gram_drift);
            spec_drift = s.spectrum.iter().zip(&spec0).map(|(a, b)| (a - b).abs()).fold(spec_drift, f64::max);
            let mut row = vec![s.t];
            row.extend(row_major(s.state.x()));
            row.extend(row_major(s.state.y()));
            row.push(s.gram_drift);
            row.extend(&s.spectrum);
            row
        })
        .collect();
    out.csv("stiefel.csv", &header, &rows)?;
    out.json(
        "summary.json",
        &json!({
            "blocks": r,
            "levels": frame.h_levels,
            "samples": rows.len(),
            "max_gram_drift": gram_drift,
            "max_spectrum_drift": spec_drift,
        }),
    )?;
    Ok(Status::Ok)
}

fn steer_problem(cfg: &Config) -> Result<serde_json::Value, CliError> {
    let c = cfg.controls_block()?;
    Ok(json!({
        "n": cfg.n()?,
        "operator": cfg.operator,
        "momentum": cfg.momentum()?.coords(),
        "lambda": cfg.lambda()?.coords(),
        "controls": c.directions,
        "epsilon": c.epsilon,
        "segments": c.segments,
        "horizon": c.horizon,
        "g0": row_major(cfg.g0()?.matrix()),
        "target": row_major(cfg.target()?.matrix()),
        "seed": cfg.seed("steering")?,
    }))
}

fn steer_document(result: &SteerResult, endpoint: &GroupElement, reached: bool) -> serde_json::Value {
    json!({
        "reached": reached,
        "distance": result.distance,
        "endpoint": row_major(endpoint.matrix()),
        "signal": result.signal,
        "wall_time_s": result.wall_time_s,
        "start": result.start,
        "starts_tried": result.starts_tried,
        "iterations": result.iterations,
        "segment_flows": result.segment_flows,
        "rank_at_start": result.rank_at_start,
    })
}

fn steer_cmd(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let csys = cfg.control_system()?;
    let (g0, target) = (cfg.g0()?, cfg.target()?);
    let opts = cfg.steer_options()?;
    out.json("steer_problem.json", &steer_problem(cfg)?)?;
    let (result, reached) = match steer(&csys, &g0, &target, &opts) {
        Ok(r) => (r, true),
        Err(ControlError::BudgetExhausted(r)) => (*r, false),
        Err(e) => return Err(e.into()),
    };
    let endpoint = csys.flow(&g0, &result.signal)?;
    out.json("steer_result.json", &steer_document(&result, &endpoint, reached))?;
    Ok(if reached {
        Status::Ok
    } else {
        Status::Budget(format!("best distance {:e} above tol {:e}", result.distance, opts.tol))
    })
}

fn transfer(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let csys = cfg.control_system()?;
    let (h1, h2) = (cfg.g0()?, cfg.target()?);
    let opts = cfg.steer_options()?;
    let tol = cfg.vortex.clone().unwrap_or_default().rank_tol;
    let basis = isotropy_basis(csys.system().conserved_momentum(), tol);
    let s = cfg.transfer.clone().unwrap_or_default().s;
    out.json("steer_problem.json", &steer_problem(cfg)?)?;
    let report = match vortex_transfer(&csys, &basis, &h1, &h2, &s, &opts) {
        Ok(r) => r,
        Err(ControlError::BudgetExhausted(r)) => {
            let endpoint = csys.flow(&h1, &r.signal)?;
            out.json("steer_result.json", &steer_document(&r, &endpoint, false))?;
            return Ok(Status::Budget(format!("steering stopped at distance {:e}", r.distance)));
        }
        Err(e) => return Err(e.into()),
    };
    out.json(
        "transfer_report.json",
        &json!({
            "isotropy_basis": basis.coordinate_rows(),
            "residual": report.residual,
            "worst_defect": report.worst_defect,
            "tolerance": report.tolerance,
            "tolerance_rule": "10 * residual + 1e-9 (engineering margin)",
            "passed": report.passed,
            "reverse_return": report.reverse_return,
            "entries": report.entries,
            "steer": report.steer,
        }),
    )?;
    Ok(if report.passed {
        Status::Ok
    } else {
        Status::Budget(format!("diagram defect {:e} above {:e}", report.worst_defect, report.tolerance))
    })
}

fn planar_words(words: &[String]) -> Result<Vec<Word>, ConfigError> {
    words
        .iter()
        .map(|w| Word::parse(w, &["f", "g"]).ok_or_else(|| config_error("planar.words", format!("cannot parse {w:?}"))))
        .collect()
}

fn rank_check(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    if cfg.controls.is_none() {
        let p = cfg.planar()?;
        let f = config::field(&p.f, "planar.f")?;
        let g = config::field(&p.g, "planar.g")?;
        let report = match &p.words {
            Some(words) => planar_rank_of(&f, &g, p.point, &planar_words(words)?, p.tol),
            None => planar_bracket_rank(&f, &g, p.point, p.depth, p.tol),
        };
        out.json("rank_report.json", &json!({ "mode": "planar", "full_rank": 2, "report": report }))?;
        return Ok(Status::Ok);
    }
    let n = cfg.n()?;
    let csys = cfg.control_system()?;
    let opts = cfg.rank_options();
    let points: Vec<GroupElement> = match cfg.rank.as_ref().and_then(|r| r.samples) {
        Some(k) => {
            let mut rng = seeded(cfg.seed("rank.samples")? ^ config::STREAM_RANK);
            (0..k).map(|_| random_rotation(&mut rng, n)).collect()
        }
        None => vec![cfg.g0()?],
    };
    let reports = points.iter().map(|g| lie_rank(&csys, g, &opts)).collect::<Result<Vec<_>, _>>()?;
    let min_rank = reports.iter().map(|r| r.rank).min().unwrap_or(0);
    let generators = match cfg.rank.as_ref().and_then(|r| r.generators.as_ref()) {
        Some(list) => {
            if list.len() != 2 {
                return Err(config_error("rank.generators", "expected exactly two elements").into());
            }
            let l1 = cfg.algebra("rank.generators[0]", &list[0])?;
            let l2 = cfg.algebra("rank.generators[1]", &list[1])?;
            Some(two_generator_check(&l1, &l2, opts.depth.max(2 * n), opts.tol)?)
        }
        None => None,
    };
    out.json(
        "rank_report.json",
        &json!({
            "mode": "group",
            "full_rank": algebra_dim(n),
            "min_rank": min_rank,
            "bracket_generating": min_rank == algebra_dim(n),
            "two_generator": generators,
            "points": reports,
        }),
    )?;
    Ok(Status::Ok)
}

fn transversality(cfg: &Config, out: &mut Output) -> Result<Status, CliError> {
    let p = cfg.planar()?;
    let f = config::field(&p.f, "planar.f")?;
    let g = config::field(&p.g, "planar.g")?;
    let region = config::region(p.region.as_ref())?;
    if p.samples_x == 0 || p.samples_y == 0 || !(p.h > 0.0) || !(p.t_max > 0.0) {
        return Err(config_error("planar", "need samples_x, samples_y ≥ 1 and h, t_max > 0").into());
    }
    let xs: Vec<f64> = match (&p.region.as_ref().and_then(|r| r.band), p.region.as_ref().and_then(|r| r.line)) {
        (Some([a, b]), _) => spread(*a, *b, p.samples_x),
        (None, Some(c)) => vec![c],
        _ => unreachable!("region validated"),
    };
    let ys = spread(p.y_range[0], p.y_range[1], p.samples_y);
    let samples: Vec<[f64; 2]> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect();
    let probe = transversality_probe(&f, &region, &samples, p.t_max, p.h, p.measure_preserving);
    let brackets = planar_bracket_rank(&f, &g, p.point, p.depth.max(1), p.tol);
    out.json(
        "transversality_report.json",
        &json!({
            "f": f.name,
            "g": g.name,
            "g_analytic": g.analytic,
            "region": region.name,
            "bracket_rank": brackets.rank,
            "bracket_report": brackets,
            "transversal": probe.transversal,
            "probe": probe,
        }),
    )?;
    Ok(Status::Ok)
}

fn spread(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}
