//! The `plan`, `certify` and `batch` verbs.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use revpark::planner::{collision_grid, plan_on};
use revpark::scenario::{build_grid, validate};
use revpark::validation::{certify_trajectories, check_pose, CertifyViolation};
use revpark::{parse_scenario, PlanResult, PlanStatus, Scenario};

use crate::csv::{format_sig, parse_trajectory_csv, steering_csv, trajectory_csv};
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_PATH: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Anything that ends a command with exit code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

fn err(context: impl fmt::Display, e: impl fmt::Display) -> CliError {
    CliError(format!("{context}: {e}"))
}

#[derive(Clone, Debug, Default)]
pub struct PlanFlags {
    pub tree: bool,
    pub max_iterations: Option<usize>,
    pub quiet: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub status: PlanStatus,
    pub iterations: usize,
    pub actions: usize,
    /// Meters travelled by the rear axle; zero when no path was found.
    pub path_length: f64,
    pub wall_time: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.status == PlanStatus::Found {
            EXIT_OK
        } else {
            EXIT_NO_PATH
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.name);
        let _ = writeln!(out, "status: {}", self.status.as_str());
        let _ = writeln!(out, "iterations: {}", self.iterations);
        let _ = writeln!(out, "actions: {}", self.actions);
        let _ = writeln!(out, "path_length_m: {}", format_sig(self.path_length));
        let _ = writeln!(out, "wall_time_s: {:.6}", self.wall_time);
        for p in &self.outputs {
            let _ = writeln!(out, "output: {}", p.display());
        }
        out
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| err(path.display(), e))?;
    let s = parse_scenario(&text).map_err(|e| err(path.display(), e))?;
    if let Err(violations) = validate(&s) {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(err(path.display(), list.join("; ")));
    }
    Ok(s)
}

fn write(
    dir: &Path,
    name: &str,
    contents: &str,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| err(p.display(), e))?;
    outputs.push(p);
    Ok(())
}

/// Plans an already loaded scenario and writes every artifact to `out_dir`.
pub fn run_plan(
    s: &Scenario,
    out_dir: &Path,
    flags: &PlanFlags,
) -> Result<(RunReport, PlanResult), CliError> {
    let mut cfg = s.planner.clone();
    if let Some(n) = flags.max_iterations {
        cfg.max_iterations = n;
    }
    cfg.record_tree = flags.tree;

    let clock = Instant::now();
    let grid = build_grid(s).map_err(|e| err(&s.name, e))?;
    let inflated = collision_grid(&grid, &s.vehicle, &cfg).map_err(|e| err(&s.name, e))?;
    let result =
        plan_on(s.start, s.goal, &cfg, &s.vehicle, &inflated).map_err(|e| err(&s.name, e))?;
    let wall_time = clock.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| err(out_dir.display(), e))?;
    let mut outputs = Vec::new();
    let path = result.path.as_ref();
    let (traj, steer) = match path {
        Some(p) => (
            trajectory_csv(p, cfg.primitive_duration),
            steering_csv(p, cfg.primitive_duration),
        ),
        None => (
            format!("{}\n", crate::csv::TRAJECTORY_HEADER),
            format!("{}\n", crate::csv::STEERING_HEADER),
        ),
    };
    write(out_dir, "trajectory.csv", &traj, &mut outputs)?;
    write(out_dir, "steering.csv", &steer, &mut outputs)?;
    let endpoints = (s.start, s.goal);
    let dt = cfg.integration_dt;
    let picture = svg::render(&grid, &inflated, None, path, endpoints, &s.vehicle, dt);
    write(out_dir, "path.svg", &picture, &mut outputs)?;
    if flags.tree {
        let branches = result.expanded_entries.as_deref();
        let picture = svg::render(&grid, &inflated, branches, path, endpoints, &s.vehicle, dt);
        write(out_dir, "search_tree.svg", &picture, &mut outputs)?;
    }
    let report_path = out_dir.join("report.txt");
    outputs.push(report_path.clone());

    let inputs = path.map(|p| p.input_history()).unwrap_or_default();
    let report = RunReport {
        name: s.name.clone(),
        status: result.status,
        iterations: result.iterations,
        actions: inputs.len(),
        path_length: inputs
            .iter()
            .map(|u| u.v_r.abs() * cfg.primitive_duration)
            .sum(),
        wall_time,
        outputs,
    };
    fs::write(&report_path, report.to_text()).map_err(|e| err(report_path.display(), e))?;
    Ok((report, result))
}

pub fn cmd_plan(scenario: &Path, out_dir: &Path, flags: &PlanFlags) -> Result<RunReport, CliError> {
    let s = load_scenario(scenario)?;
    let (report, _) = run_plan(&s, out_dir, flags)?;
    Ok(report)
}

/// Violation found in a trajectory table, with its zero-based data row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowViolation {
    pub row: usize,
    pub violation: CertifyViolation,
}

impl fmt::Display for RowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sample {}: {}", self.row, self.violation)
    }
}

/// Checks the poses stored in a trajectory table against the scenario's
/// exact obstacles.
pub fn cmd_certify(scenario: &Path, csv: &Path) -> Result<Option<RowViolation>, CliError> {
    let s = load_scenario(scenario)?;
    let text = fs::read_to_string(csv).map_err(|e| err(csv.display(), e))?;
    let steps = s
        .planner
        .steps_per_primitive()
        .map_err(|e| err(&s.name, e))?;
    let parsed = parse_trajectory_csv(&text, steps).map_err(|e| err(csv.display(), e))?;
    let obstacles = s.certification_obstacles();
    let extents = s.map.extents;
    if parsed.trajectories.is_empty() {
        return Ok(
            check_pose(parsed.poses[0], &obstacles, &extents, &s.vehicle).map(|kind| {
                RowViolation {
                    row: 0,
                    violation: CertifyViolation {
                        trajectory: 0,
                        sample: 0,
                        kind,
                    },
                }
            }),
        );
    }
    Ok(
        certify_trajectories(&parsed.trajectories, &obstacles, &extents, &s.vehicle)
            .err()
            .map(|v| RowViolation {
                row: v.trajectory * steps + v.sample,
                violation: v,
            }),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub name: String,
    /// Planner status, or `error` when the file could not be planned.
    pub status: String,
    pub actions: Option<usize>,
    pub length: Option<f64>,
    pub time: Option<f64>,
}

pub const SUMMARY_HEADER: &str = "name,status,actions,length,time";

pub fn summary_csv(rows: &[BatchRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            r.status,
            r.actions.map(|a| a.to_string()).unwrap_or_default(),
            r.length.map(format_sig).unwrap_or_default(),
            r.time.map(|t| format!("{t:.6}")).unwrap_or_default()
        );
    }
    out
}

/// Plans every `*.scen` file in `dir` (filename order) into its own
/// subdirectory of `out_dir` and writes `summary.csv`. Returns the rows and
/// whether every scenario was found.
pub fn cmd_batch(
    dir: &Path,
    out_dir: &Path,
    flags: &PlanFlags,
) -> Result<(Vec<BatchRow>, bool), CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| err(dir.display(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "scen"))
        .collect();
    files.sort();
    fs::create_dir_all(out_dir).map_err(|e| err(out_dir.display(), e))?;

    let mut rows = Vec::with_capacity(files.len());
    let mut all_found = true;
    for f in &files {
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let row = match cmd_plan(f, &out_dir.join(&stem), flags) {
            Ok(r) => BatchRow {
                name: stem,
                status: r.status.as_str().to_string(),
                actions: Some(r.actions),
                length: Some(r.path_length),
                time: Some(r.wall_time),
            },
            Err(e) => {
                if !flags.quiet {
                    eprintln!("{e}");
                }
                BatchRow {
                    name: stem,
                    status: "error".into(),
                    actions: None,
                    length: None,
                    time: None,
                }
            }
        };
        all_found &= row.status == PlanStatus::Found.as_str();
        if !flags.quiet {
            println!("{}: {}", row.name, row.status);
        }
        rows.push(row);
    }
    let summary = out_dir.join("summary.csv");
    fs::write(&summary, summary_csv(&rows)).map_err(|e| err(summary.display(), e))?;
    Ok((rows, all_found))
}
