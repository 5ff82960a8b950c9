//! Scenario files: map geometry, vehicle, start/goal and planner settings.
//!
//! The format is line oriented, UTF-8, with `#` starting a comment:
//!
//! ```text
//! name <text>
//! extents <xmin> <ymin> <xmax> <ymax>
//! resolution <m>
//! obstacle <xmin> <ymin> <xmax> <ymax>      (repeatable)
//! ascii_map                                 (rows of . and #, top row first)
//! ...
//! end_map
//! start <x> <y> <psi>
//! goal <x> <y> <psi>
//! vehicle <wheelbase> <length> <width> [rear_overhang]
//! q_diag <qx> <qy> <qpsi>
//! k_a <v>
//! v_r <v>
//! delta_choices <v1> <v2> ...
//! primitive_duration <s>
//! goal_tol <xy> <psi>
//! max_iterations <n>
//! ```
//!
//! `extents`, `start` and `goal` are required. Numbers are plain decimals.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::kinematics::{CenterlineOffsets, Pose, VehicleParams};
use crate::occupancy::OccupancyGrid;
use crate::planner::{centerline_collides, collision_grid, CostWeights, PlannerConfig};

pub const DEFAULT_RESOLUTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub extents: Rect,
    pub resolution: f64,
    pub obstacles: Vec<Rect>,
    /// Optional raster covering `extents` exactly, top row first.
    pub ascii: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub map: MapSpec,
    pub vehicle: VehicleParams,
    pub start: Pose,
    pub goal: Pose,
    pub planner: PlannerConfig,
}

impl Scenario {
    /// Obstacles as exact rectangles, with raster cells turned into one-cell
    /// squares.
    pub fn certification_obstacles(&self) -> Vec<Rect> {
        let mut out = self.map.obstacles.clone();
        if let Some(rows) = &self.map.ascii {
            if let Ok(g) = OccupancyGrid::from_ascii(
                rows,
                self.map.resolution,
                Point::new(self.map.extents.xmin, self.map.extents.ymin),
            ) {
                out.extend(g.occupied_cells().map(|(c, r)| g.cell_rect(c, r)));
            }
        }
        out
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let plain = !tok.is_empty()
        && tok
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+')
        && tok.chars().any(|c| c.is_ascii_digit());
    match tok.parse::<f64>() {
        Ok(v) if plain && v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("malformed number {tok:?}"))),
    }
}

fn numbers(args: &[&str], line: usize, key: &str, min: usize, max: usize) -> Result<Vec<f64>> {
    if args.len() < min || args.len() > max {
        let want = if min == max {
            format!("{min}")
        } else if max == usize::MAX {
            format!("at least {min}")
        } else {
            format!("{min} to {max}")
        };
        return Err(Error::parse(
            line,
            format!("`{key}` takes {want} values, got {}", args.len()),
        ));
    }
    args.iter().map(|t| parse_number(t, line)).collect()
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    extents: Option<(Rect, usize)>,
    resolution: Option<f64>,
    obstacles: Vec<(Rect, usize)>,
    ascii: Option<(Vec<String>, usize)>,
    start: Option<(Pose, usize)>,
    goal: Option<(Pose, usize)>,
    vehicle: Option<(Vec<f64>, usize)>,
    q_diag: Option<([f64; 3], usize)>,
    k_a: Option<f64>,
    v_r: Option<f64>,
    delta_choices: Option<Vec<f64>>,
    primitive_duration: Option<(f64, usize)>,
    goal_tol: Option<(f64, f64)>,
    max_iterations: Option<usize>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(Error::parse(line, format!("duplicate `{key}`")));
    }
    *slot = Some(value);
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut d = Draft::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut last_line = 0;
    while let Some((ln, raw)) = lines.next() {
        last_line = ln;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().expect("non-empty line has a token");
        let args: Vec<&str> = toks.collect();
        match key {
            "name" => {
                let rest = content["name".len()..].trim();
                if rest.is_empty() {
                    return Err(Error::parse(ln, "`name` needs a value"));
                }
                set_once(&mut d.name, rest.to_string(), ln, key)?;
            }
            "extents" => {
                let v = numbers(&args, ln, key, 4, 4)?;
                let r = Rect::new(v[0], v[1], v[2], v[3]);
                if !r.is_valid() {
                    return Err(Error::parse(ln, "extents must have positive size"));
                }
                set_once(&mut d.extents, (r, ln), ln, key)?;
            }
            "resolution" => {
                let v = numbers(&args, ln, key, 1, 1)?[0];
                if v <= 0.0 {
                    return Err(Error::parse(ln, "resolution must be positive"));
                }
                set_once(&mut d.resolution, v, ln, key)?;
            }
            "obstacle" => {
                let v = numbers(&args, ln, key, 4, 4)?;
                let r = Rect::new(v[0], v[1], v[2], v[3]);
                if !r.is_valid() {
                    return Err(Error::parse(
                        ln,
                        "obstacle must have positive width and height",
                    ));
                }
                d.obstacles.push((r, ln));
            }
            "ascii_map" => {
                if !args.is_empty() {
                    return Err(Error::parse(ln, "`ascii_map` takes no values"));
                }
                let mut rows = Vec::new();
                let mut closed = false;
                for (rl, row) in lines.by_ref() {
                    last_line = rl;
                    let row = row.trim();
                    if row == "end_map" {
                        closed = true;
                        break;
                    }
                    if row.is_empty() || row.chars().any(|c| c != '.' && c != '#') {
                        return Err(Error::parse(rl, "map rows may only contain '.' and '#'"));
                    }
                    rows.push(row.to_string());
                }
                if !closed {
                    return Err(Error::parse(last_line, "`ascii_map` without `end_map`"));
                }
                if rows.is_empty() {
                    return Err(Error::parse(ln, "empty `ascii_map`"));
                }
                set_once(&mut d.ascii, (rows, ln), ln, key)?;
            }
            "start" | "goal" => {
                let v = numbers(&args, ln, key, 3, 3)?;
                let slot = if key == "start" {
                    &mut d.start
                } else {
                    &mut d.goal
                };
                set_once(slot, (Pose::new(v[0], v[1], v[2]), ln), ln, key)?;
            }
            "vehicle" => {
                let v = numbers(&args, ln, key, 3, 4)?;
                set_once(&mut d.vehicle, (v, ln), ln, key)?;
            }
            "q_diag" => {
                let v = numbers(&args, ln, key, 3, 3)?;
                set_once(&mut d.q_diag, ([v[0], v[1], v[2]], ln), ln, key)?;
            }
            "k_a" => {
                let v = numbers(&args, ln, key, 1, 1)?[0];
                set_once(&mut d.k_a, v, ln, key)?;
            }
            "v_r" => {
                let v = numbers(&args, ln, key, 1, 1)?[0];
                if v == 0.0 {
                    return Err(Error::parse(ln, "v_r must be nonzero"));
                }
                set_once(&mut d.v_r, v, ln, key)?;
            }
            "delta_choices" => {
                let v = numbers(&args, ln, key, 1, usize::MAX)?;
                set_once(&mut d.delta_choices, v, ln, key)?;
            }
            "primitive_duration" => {
                let v = numbers(&args, ln, key, 1, 1)?[0];
                set_once(&mut d.primitive_duration, (v, ln), ln, key)?;
            }
            "goal_tol" => {
                let v = numbers(&args, ln, key, 2, 2)?;
                if v[0] <= 0.0 || v[1] <= 0.0 {
                    return Err(Error::parse(ln, "goal tolerances must be positive"));
                }
                set_once(&mut d.goal_tol, (v[0], v[1]), ln, key)?;
            }
            "max_iterations" => {
                if args.len() != 1 || !args[0].chars().all(|c| c.is_ascii_digit()) {
                    return Err(Error::parse(ln, "`max_iterations` takes one integer"));
                }
                let n = args[0]
                    .parse::<usize>()
                    .map_err(|_| Error::parse(ln, "max_iterations out of range"))?;
                set_once(&mut d.max_iterations, n, ln, key)?;
            }
            other => return Err(Error::parse(ln, format!("unknown key `{other}`"))),
        }
    }
    finish(d, last_line + 1)
}

fn finish(d: Draft, eof: usize) -> Result<Scenario> {
    let (extents, _) = d
        .extents
        .ok_or_else(|| Error::parse(eof, "missing required `extents`"))?;
    let (start, start_ln) = d
        .start
        .ok_or_else(|| Error::parse(eof, "missing required `start`"))?;
    let (goal, goal_ln) = d
        .goal
        .ok_or_else(|| Error::parse(eof, "missing required `goal`"))?;
    let resolution = d.resolution.unwrap_or(DEFAULT_RESOLUTION);

    for (r, ln) in &d.obstacles {
        if !extents.contains_rect(r) {
            return Err(Error::parse(*ln, "obstacle outside extents"));
        }
    }
    if !extents.contains(start.position()) {
        return Err(Error::parse(start_ln, "start outside extents"));
    }
    if !extents.contains(goal.position()) {
        return Err(Error::parse(goal_ln, "goal outside extents"));
    }

    let ascii = match d.ascii {
        Some((rows, ln)) => {
            check_ascii_dims(&rows, &extents, resolution).map_err(|m| Error::parse(ln, m))?;
            Some(rows)
        }
        None => None,
    };

    let vehicle = match d.vehicle {
        Some((v, ln)) => VehicleParams::new(
            v[0],
            v[1],
            v[2],
            v.get(3).copied(),
            VehicleParams::DEFAULT_DELTA_MAX,
        )
        .map_err(|e| Error::parse(ln, e.to_string()))?,
        None => VehicleParams::default(),
    };

    let mut planner = PlannerConfig::default();
    if d.q_diag.is_some() || d.k_a.is_some() {
        let q = d.q_diag.map(|(q, _)| q).unwrap_or(planner.weights.q_diag());
        let k_a = d.k_a.unwrap_or(planner.weights.k_a());
        let ln = d.q_diag.map_or(eof, |(_, l)| l);
        planner.weights = CostWeights::diagonal(q[0], q[1], q[2], k_a)
            .map_err(|e| Error::parse(ln, e.to_string()))?;
    }
    if let Some(v) = d.v_r {
        planner.v_r = v;
    }
    if let Some(v) = d.delta_choices {
        planner.delta_choices = v;
    }
    if let Some((v, ln)) = d.primitive_duration {
        crate::kinematics::step_count(v, planner.integration_dt)
            .map_err(|e| Error::parse(ln, e.to_string()))?;
        planner.primitive_duration = v;
    }
    if let Some((xy, psi)) = d.goal_tol {
        planner.goal_tol_xy = xy;
        planner.goal_tol_psi = psi;
    }
    if let Some(n) = d.max_iterations {
        planner.max_iterations = n;
    }

    Ok(Scenario {
        name: d.name.unwrap_or_else(|| "scenario".to_string()),
        map: MapSpec {
            extents,
            resolution,
            obstacles: d.obstacles.into_iter().map(|(r, _)| r).collect(),
            ascii,
        },
        vehicle,
        start,
        goal,
        planner,
    })
}

fn check_ascii_dims(
    rows: &[String],
    extents: &Rect,
    resolution: f64,
) -> std::result::Result<(), String> {
    let grid = OccupancyGrid::covering(*extents, resolution).map_err(|e| e.to_string())?;
    if rows.len() != grid.height() || rows.iter().any(|r| r.chars().count() != grid.width()) {
        return Err(format!(
            "ascii map must be {} columns by {} rows to cover the extents",
            grid.width(),
            grid.height()
        ));
    }
    Ok(())
}

/// Writes a scenario in the file format; [`parse_scenario`] reads it back
/// unchanged.
pub fn emit_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let e = &s.map.extents;
    let p = &s.planner;
    let _ = writeln!(out, "name {}", s.name);
    let _ = writeln!(out, "extents {} {} {} {}", e.xmin, e.ymin, e.xmax, e.ymax);
    let _ = writeln!(out, "resolution {}", s.map.resolution);
    for r in &s.map.obstacles {
        let _ = writeln!(out, "obstacle {} {} {} {}", r.xmin, r.ymin, r.xmax, r.ymax);
    }
    if let Some(rows) = &s.map.ascii {
        out.push_str("ascii_map\n");
        for r in rows {
            out.push_str(r);
            out.push('\n');
        }
        out.push_str("end_map\n");
    }
    let _ = writeln!(out, "start {} {} {}", s.start.x_r, s.start.y_r, s.start.psi);
    let _ = writeln!(out, "goal {} {} {}", s.goal.x_r, s.goal.y_r, s.goal.psi);
    let v = &s.vehicle;
    let _ = writeln!(
        out,
        "vehicle {} {} {} {}",
        v.wheelbase(),
        v.length(),
        v.width(),
        v.rear_overhang()
    );
    let q = p.weights.q_diag();
    let _ = writeln!(out, "q_diag {} {} {}", q[0], q[1], q[2]);
    let _ = writeln!(out, "k_a {}", p.weights.k_a());
    let _ = writeln!(out, "v_r {}", p.v_r);
    let deltas: Vec<String> = p.delta_choices.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "delta_choices {}", deltas.join(" "));
    let _ = writeln!(out, "primitive_duration {}", p.primitive_duration);
    let _ = writeln!(out, "goal_tol {} {}", p.goal_tol_xy, p.goal_tol_psi);
    let _ = writeln!(out, "max_iterations {}", p.max_iterations);
    out
}

/// Raw (uninflated) occupancy grid of the scenario.
///
/// Obstacle rectangles mark every cell they overlap with positive area, on
/// top of the ascii raster when one is given.
pub fn build_grid(s: &Scenario) -> Result<OccupancyGrid> {
    let origin = Point::new(s.map.extents.xmin, s.map.extents.ymin);
    let mut grid = match &s.map.ascii {
        Some(rows) => {
            check_ascii_dims(rows, &s.map.extents, s.map.resolution)
                .map_err(Error::InvalidScenario)?;
            OccupancyGrid::from_ascii(rows, s.map.resolution, origin)?
        }
        None => OccupancyGrid::covering(s.map.extents, s.map.resolution)?,
    };
    for r in &s.map.obstacles {
        grid.mark_rect_overlap(r);
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadObstacle(usize),
    ObstacleOutsideExtents(usize),
    StartOutsideExtents,
    GoalOutsideExtents,
    NonFinitePose(&'static str),
    StartInCollision,
    GoalInCollision,
    SteerExceedsLimit { delta: f64, delta_max: f64 },
    Planner(String),
    Map(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadObstacle(i) => write!(f, "obstacle {i} has non-positive size"),
            Violation::ObstacleOutsideExtents(i) => write!(f, "obstacle {i} outside extents"),
            Violation::StartOutsideExtents => f.write_str("start outside extents"),
            Violation::GoalOutsideExtents => f.write_str("goal outside extents"),
            Violation::NonFinitePose(which) => write!(f, "{which} pose is not finite"),
            Violation::StartInCollision => f.write_str("start in collision"),
            Violation::GoalInCollision => f.write_str("goal in collision"),
            Violation::SteerExceedsLimit { delta, delta_max } => {
                write!(f, "steer choice {delta} exceeds delta_max {delta_max}")
            }
            Violation::Planner(m) => write!(f, "planner configuration: {m}"),
            Violation::Map(m) => write!(f, "map: {m}"),
        }
    }
}

/// Checks the scenario invariants and that start and goal are free on the
/// planner's collision grid.
pub fn validate(s: &Scenario) -> std::result::Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let ext = &s.map.extents;
    for (i, r) in s.map.obstacles.iter().enumerate() {
        if !r.is_valid() {
            v.push(Violation::BadObstacle(i));
        } else if !ext.contains_rect(r) {
            v.push(Violation::ObstacleOutsideExtents(i));
        }
    }
    for (name, pose) in [("start", s.start), ("goal", s.goal)] {
        if !pose.is_finite() {
            v.push(Violation::NonFinitePose(name));
        }
    }
    if !ext.contains(s.start.position()) {
        v.push(Violation::StartOutsideExtents);
    }
    if !ext.contains(s.goal.position()) {
        v.push(Violation::GoalOutsideExtents);
    }
    let delta_max = s.vehicle.delta_max();
    for &d in &s.planner.delta_choices {
        if !(d.abs() <= delta_max) {
            v.push(Violation::SteerExceedsLimit {
                delta: d,
                delta_max,
            });
        }
    }
    let steer_ok = !v
        .iter()
        .any(|x| matches!(x, Violation::SteerExceedsLimit { .. }));
    if steer_ok {
        if let Err(e) = s.planner.validate(&s.vehicle) {
            v.push(Violation::Planner(e.to_string()));
        }
    }
    let grid = build_grid(s).map_err(|e| Violation::Map(e.to_string()));
    let offsets = CenterlineOffsets::new(&s.vehicle, s.planner.centerline_spacing);
    match (grid, offsets) {
        (Ok(grid), Ok(offsets)) => match collision_grid(&grid, &s.vehicle, &s.planner) {
            Ok(inflated) => {
                if s.start.is_finite() && centerline_collides(s.start, &offsets, &inflated) {
                    v.push(Violation::StartInCollision);
                }
                if s.goal.is_finite() && centerline_collides(s.goal, &offsets, &inflated) {
                    v.push(Violation::GoalInCollision);
                }
            }
            Err(e) => v.push(Violation::Map(e.to_string())),
        },
        (Err(e), _) => v.push(e),
        (_, Err(e)) => v.push(Violation::Planner(e.to_string())),
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Geometry of the built-in parking lot.
///
/// A row of stalls runs along the top of the lot with its stall fronts on the
/// driveway; a second, fully occupied row faces it across the driveway. Every
/// stall holds a parked car centered in it except `empty_stall` and any
/// listed in `also_empty`.
#[derive(Clone, Debug, PartialEq)]
pub struct LotLayout {
    pub extents: Rect,
    pub resolution: f64,
    pub stall_width: f64,
    pub stall_depth: f64,
    pub driveway_width: f64,
    /// x of the left edge of the first stall in each row.
    pub first_stall_x: f64,
    pub stalls_per_row: usize,
    /// y of the back (top) edge of the top row.
    pub top_row_back_y: f64,
    pub empty_stall: usize,
    pub also_empty: Vec<usize>,
    pub start: Pose,
}

impl Default for LotLayout {
    fn default() -> Self {
        Self {
            extents: Rect::new(0.0, 0.0, 30.0, 20.0),
            resolution: DEFAULT_RESOLUTION,
            stall_width: 2.7,
            stall_depth: 5.5,
            driveway_width: 7.0,
            first_stall_x: 1.5,
            stalls_per_row: 10,
            top_row_back_y: 18.5,
            empty_stall: 4,
            also_empty: Vec::new(),
            start: Pose::new(18.5, 9.5, 0.0),
        }
    }
}

impl LotLayout {
    pub fn stall_center(&self, top_row: bool, index: usize) -> Point {
        let x = self.first_stall_x + (index as f64 + 0.5) * self.stall_width;
        let top_front = self.top_row_back_y - self.stall_depth;
        let y = if top_row {
            self.top_row_back_y - self.stall_depth / 2.0
        } else {
            top_front - self.driveway_width - self.stall_depth / 2.0
        };
        Point::new(x, y)
    }

    /// Reverse-parked goal in the empty stall: rear axle toward the back of
    /// the stall, nose pointing at the driveway.
    pub fn goal(&self, vp: &VehicleParams) -> Pose {
        let c = self.stall_center(true, self.empty_stall);
        // Body center sits at s = (front - rear) / 2 along the axis.
        let center_offset = (vp.wheelbase() + vp.front_overhang() - vp.rear_overhang()) / 2.0;
        Pose::new(c.x, c.y + center_offset, -std::f64::consts::FRAC_PI_2)
    }

    pub fn to_scenario(&self, name: &str) -> Scenario {
        let vehicle = VehicleParams::default();
        let mut obstacles = Vec::new();
        for top in [true, false] {
            for i in 0..self.stalls_per_row {
                if top && (i == self.empty_stall || self.also_empty.contains(&i)) {
                    continue;
                }
                let c = self.stall_center(top, i);
                obstacles.push(Rect::from_center(
                    c.x,
                    c.y,
                    vehicle.width(),
                    vehicle.length(),
                ));
            }
        }
        Scenario {
            name: name.to_string(),
            map: MapSpec {
                extents: self.extents,
                resolution: self.resolution,
                obstacles,
                ascii: None,
            },
            vehicle,
            start: self.start,
            goal: self.goal(&vehicle),
            planner: PlannerConfig::default(),
        }
    }
}

/// Built-in reconstruction of a mostly full parking lot with a single free
/// stall.
pub fn canonical_parking_lot() -> Scenario {
    LotLayout::default().to_scenario("canonical-parking-lot")
}
