//! Modified Hybrid A* search over constant-steer reverse primitives.
//!
//! Each queue entry is a partial path. The cheapest entry is popped, tested
//! against the goal box, and expanded into one child per steer choice; children
//! whose centerline touches the inflated grid at any integration sample are
//! dropped. The popped parent is discarded. A parent with no admissible
//! children simply disappears, so the next pop falls through to the next-best
//! entry.
//!
//! Cost is `e^T Q e + k_a * n_actions` with the yaw error wrapped.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kinematics::{
    simulate_primitive, step_count, CenterlineOffsets, ControlInput, Pose, Trajectory,
    VehicleParams, DEFAULT_DT,
};
use crate::occupancy::{inflate_with, InflatedGrid, OccupancyGrid};
use crate::par::Exec;

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    q: [[f64; 3]; 3],
    k_a: f64,
}

impl CostWeights {
    /// `q` must be symmetric positive definite; `k_a` non-negative.
    pub fn new(q: [[f64; 3]; 3], k_a: f64) -> Result<Self> {
        if q.iter().flatten().any(|v| !v.is_finite()) || !k_a.is_finite() {
            return Err(Error::invalid("cost weights must be finite"));
        }
        for (i, row) in q.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if (v - q[j][i]).abs() > 1e-12 {
                    return Err(Error::invalid("Q must be symmetric"));
                }
            }
        }
        let m1 = q[0][0];
        let m2 = q[0][0] * q[1][1] - q[0][1] * q[1][0];
        let m3 = q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1])
            - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0])
            + q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(Error::invalid("Q must be positive definite"));
        }
        if k_a < 0.0 {
            return Err(Error::invalid("k_a must be non-negative"));
        }
        Ok(Self { q, k_a })
    }

    pub fn diagonal(qx: f64, qy: f64, qpsi: f64, k_a: f64) -> Result<Self> {
        Self::new([[qx, 0.0, 0.0], [0.0, qy, 0.0], [0.0, 0.0, qpsi]], k_a)
    }

    pub fn q(&self) -> &[[f64; 3]; 3] {
        &self.q
    }

    pub fn k_a(&self) -> f64 {
        self.k_a
    }

    /// Diagonal of `Q`.
    pub fn q_diag(&self) -> [f64; 3] {
        [self.q[0][0], self.q[1][1], self.q[2][2]]
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::diagonal(1.0, 5.0, 1.0, 0.1).expect("default weights are valid")
    }
}

/// Bin sizes for the optional duplicate-state prune.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateBins {
    pub xy: f64,
    pub psi: f64,
}

impl Default for StateBins {
    fn default() -> Self {
        Self { xy: 0.25, psi: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub weights: CostWeights,
    pub v_r: f64,
    pub delta_choices: Vec<f64>,
    pub primitive_duration: f64,
    pub integration_dt: f64,
    pub centerline_spacing: f64,
    pub goal_tol_xy: f64,
    pub goal_tol_psi: f64,
    pub max_iterations: usize,
    /// Keep only the cheapest entry per state bin. Off by default.
    pub state_bins: Option<StateBins>,
    /// Keep every admissible entry in [`PlanResult::expanded_entries`].
    pub record_tree: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            v_r: -1.0,
            delta_choices: vec![-0.75, -0.35, 0.0, 0.35, 0.75],
            primitive_duration: 1.0,
            integration_dt: DEFAULT_DT,
            centerline_spacing: 0.05,
            goal_tol_xy: 0.2,
            goal_tol_psi: 0.1,
            max_iterations: 100_000,
            state_bins: None,
            record_tree: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, vp: &VehicleParams) -> Result<()> {
        if self.delta_choices.is_empty() {
            return Err(Error::invalid("delta_choices must not be empty"));
        }
        if let Some(d) = self
            .delta_choices
            .iter()
            .find(|d| !d.is_finite() || d.abs() > vp.delta_max())
        {
            return Err(Error::invalid(format!(
                "steer choice {d} exceeds delta_max {}",
                vp.delta_max()
            )));
        }
        if !self.v_r.is_finite() || self.v_r == 0.0 {
            return Err(Error::invalid("v_r must be finite and nonzero"));
        }
        for (name, v) in [
            ("goal_tol_xy", self.goal_tol_xy),
            ("goal_tol_psi", self.goal_tol_psi),
            ("centerline_spacing", self.centerline_spacing),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        step_count(self.primitive_duration, self.integration_dt)?;
        if let Some(b) = self.state_bins {
            if !(b.xy > 0.0 && b.psi > 0.0) {
                return Err(Error::invalid("state bin sizes must be positive"));
            }
        }
        Ok(())
    }

    /// Integration samples per primitive, excluding the initial one.
    pub fn steps_per_primitive(&self) -> Result<usize> {
        step_count(self.primitive_duration, self.integration_dt)
    }
}

pub fn heuristic_cost(state: Pose, goal: Pose, w: &CostWeights) -> f64 {
    let e = [
        state.x_r - goal.x_r,
        state.y_r - goal.y_r,
        wrap_angle(state.psi - goal.psi),
    ];
    let q = &w.q;
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += e[i] * q[i][j] * e[j];
        }
    }
    acc.max(0.0)
}

pub fn action_cost(n_actions: usize, w: &CostWeights) -> f64 {
    w.k_a * n_actions as f64
}

pub fn total_cost(state: Pose, goal: Pose, n_actions: usize, w: &CostWeights) -> f64 {
    heuristic_cost(state, goal, w) + action_cost(n_actions, w)
}

/// Per-axis box test, boundaries inclusive.
pub fn goal_reached(state: Pose, goal: Pose, cfg: &PlannerConfig) -> bool {
    (state.x_r - goal.x_r).abs() <= cfg.goal_tol_xy
        && (state.y_r - goal.y_r).abs() <= cfg.goal_tol_xy
        && wrap_angle(state.psi - goal.psi).abs() <= cfg.goal_tol_psi
}

// Partial paths share their prefixes.
#[derive(Debug)]
struct PathLink {
    parent: Option<Arc<PathLink>>,
    action: usize,
    trajectory: Trajectory,
    depth: usize,
}

/// One partial path in the open queue.
#[derive(Clone, Debug)]
pub struct QueueEntry {
    cost: f64,
    terminal: Pose,
    serial: u64,
    tail: Option<Arc<PathLink>>,
}

impl QueueEntry {
    pub fn root(start: Pose, goal: Pose, w: &CostWeights) -> Self {
        Self {
            cost: total_cost(start, goal, 0, w),
            terminal: start,
            serial: 0,
            tail: None,
        }
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn terminal_state(&self) -> Pose {
        self.terminal
    }

    pub fn insertion_serial(&self) -> u64 {
        self.serial
    }

    pub fn n_actions(&self) -> usize {
        self.tail.as_ref().map_or(0, |l| l.depth)
    }

    fn links(&self) -> Vec<&PathLink> {
        let mut out = Vec::with_capacity(self.n_actions());
        let mut cur = self.tail.as_deref();
        while let Some(link) = cur {
            out.push(link);
            cur = link.parent.as_deref();
        }
        out.reverse();
        out
    }

    /// Indices into the configured steer choices, first action first.
    pub fn action_sequence(&self) -> Vec<usize> {
        self.links().iter().map(|l| l.action).collect()
    }

    /// Most recent primitive, `None` for the root.
    pub fn branch_trajectory(&self) -> Option<&Trajectory> {
        self.tail.as_deref().map(|l| &l.trajectory)
    }

    /// Every primitive of the partial path in order.
    pub fn path_trajectory(&self) -> Vec<&Trajectory> {
        self.links().into_iter().map(|l| &l.trajectory).collect()
    }

    pub fn input_history(&self) -> Vec<ControlInput> {
        self.links().iter().map(|l| l.trajectory.input()).collect()
    }

    fn child(&self, action: usize, trajectory: Trajectory, cost: f64, serial: u64) -> Self {
        let depth = self.n_actions() + 1;
        Self {
            cost,
            terminal: trajectory.last(),
            serial,
            tail: Some(Arc::new(PathLink {
                parent: self.tail.clone(),
                action,
                trajectory,
                depth,
            })),
        }
    }
}

// Min-heap ordering on (cost, serial).
struct Ranked(QueueEntry);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .cost
            .total_cmp(&self.0.cost)
            .then_with(|| other.0.serial.cmp(&self.0.serial))
    }
}

/// Priority queue of partial paths: lowest cost first, FIFO among ties.
#[derive(Default)]
pub struct OpenQueue {
    heap: BinaryHeap<Ranked>,
}

impl OpenQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: QueueEntry) {
        self.heap.push(Ranked(entry));
    }

    pub fn pop(&mut self) -> Option<QueueEntry> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&QueueEntry> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Inflation radius that makes the centerline test imply clearance of the
/// full rectangular body on the rasterized map.
///
/// Every body point lies within `hypot(width/2, gap/2)` of some centerline
/// sample. Binning the sample and the obstacle point into cells can move the
/// two by at most one cell along each axis, which the stencil absorbs when it
/// is `resolution * sqrt(2)` larger.
pub fn collision_radius(vp: &VehicleParams, resolution: f64, centerline_gap: f64) -> f64 {
    (vp.width() / 2.0).hypot(centerline_gap / 2.0) + resolution * std::f64::consts::SQRT_2
}

/// Collision grid used by the planner: the map dilated by
/// [`collision_radius`], with the map exterior also treated as an obstacle.
pub fn collision_grid(
    grid: &OccupancyGrid,
    vp: &VehicleParams,
    cfg: &PlannerConfig,
) -> Result<InflatedGrid> {
    let offsets = CenterlineOffsets::new(vp, cfg.centerline_spacing)?;
    let radius = collision_radius(vp, grid.resolution(), offsets.gap());
    inflate_with(grid, radius, true, Exec::default())
}

/// True iff the centerline at `pose` touches the inflated grid.
pub fn centerline_collides(
    pose: Pose,
    offsets: &CenterlineOffsets,
    inflated: &InflatedGrid,
) -> bool {
    inflated.any_occupied(offsets.points(pose))
}

/// Expands `entry` with every steer choice, in order, dropping colliding
/// branches. Serials of surviving children are drawn from `next_serial`.
pub fn expand_node(
    entry: &QueueEntry,
    goal: Pose,
    cfg: &PlannerConfig,
    vp: &VehicleParams,
    inflated: &InflatedGrid,
    next_serial: &mut u64,
) -> Result<Vec<QueueEntry>> {
    expand_node_with(entry, goal, cfg, vp, inflated, next_serial, Exec::default())
}

pub fn expand_node_with(
    entry: &QueueEntry,
    goal: Pose,
    cfg: &PlannerConfig,
    vp: &VehicleParams,
    inflated: &InflatedGrid,
    next_serial: &mut u64,
    exec: Exec,
) -> Result<Vec<QueueEntry>> {
    let offsets = CenterlineOffsets::new(vp, cfg.centerline_spacing)?;
    let start = entry.terminal;
    let branches = exec.map(&cfg.delta_choices, |&delta| -> Result<Option<Trajectory>> {
        let u = ControlInput::new(delta, cfg.v_r);
        let tr = simulate_primitive(start, u, vp, cfg.primitive_duration, cfg.integration_dt)?;
        let hit = tr
            .poses()
            .any(|p| centerline_collides(p, &offsets, inflated));
        Ok((!hit).then_some(tr))
    });
    let n = entry.n_actions() + 1;
    let mut children = Vec::with_capacity(branches.len());
    for (action, branch) in branches.into_iter().enumerate() {
        if let Some(tr) = branch? {
            let cost = total_cost(tr.last(), goal, n, &cfg.weights);
            children.push(entry.child(action, tr, cost, *next_serial));
            *next_serial += 1;
        }
    }
    Ok(children)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlanStatus {
    Found,
    QueueExhausted,
    IterationBudgetExhausted,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Found => "found",
            PlanStatus::QueueExhausted => "queue-exhausted",
            PlanStatus::IterationBudgetExhausted => "iteration-budget-exhausted",
        }
    }
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub path: Option<QueueEntry>,
    /// Number of pops performed.
    pub iterations: usize,
    /// Every admissible entry ever enqueued, when requested.
    pub expanded_entries: Option<Vec<QueueEntry>>,
}

/// Plans on a raw map; the collision grid is built with [`collision_grid`].
pub fn plan(
    start: Pose,
    goal: Pose,
    cfg: &PlannerConfig,
    vp: &VehicleParams,
    grid: &OccupancyGrid,
) -> Result<PlanResult> {
    cfg.validate(vp)?;
    let inflated = collision_grid(grid, vp, cfg)?;
    plan_on(start, goal, cfg, vp, &inflated)
}

fn bin_key(p: Pose, bins: StateBins) -> (i64, i64, i64) {
    (
        (p.x_r / bins.xy).floor() as i64,
        (p.y_r / bins.xy).floor() as i64,
        (wrap_angle(p.psi) / bins.psi).floor() as i64,
    )
}

/// Plans on an already inflated collision grid.
pub fn plan_on(
    start: Pose,
    goal: Pose,
    cfg: &PlannerConfig,
    vp: &VehicleParams,
    inflated: &InflatedGrid,
) -> Result<PlanResult> {
    if !start.is_finite() || !goal.is_finite() {
        return Err(Error::invalid("start and goal must be finite"));
    }
    cfg.validate(vp)?;
    let offsets = CenterlineOffsets::new(vp, cfg.centerline_spacing)?;
    if centerline_collides(start, &offsets, inflated) {
        return Err(Error::InvalidScenario("start in collision".into()));
    }
    if centerline_collides(goal, &offsets, inflated) {
        return Err(Error::InvalidScenario("goal in collision".into()));
    }

    let root = QueueEntry::root(start, goal, &cfg.weights);
    let mut tree = cfg.record_tree.then(Vec::new);
    let mut bins: HashMap<(i64, i64, i64), f64> = HashMap::new();
    if let Some(b) = cfg.state_bins {
        bins.insert(bin_key(start, b), root.cost);
    }
    let mut queue = OpenQueue::new();
    queue.push(root);
    let mut next_serial = 1u64;
    let mut iterations = 0usize;

    let status = loop {
        if iterations >= cfg.max_iterations {
            break PlanStatus::IterationBudgetExhausted;
        }
        let Some(entry) = queue.pop() else {
            break PlanStatus::QueueExhausted;
        };
        iterations += 1;
        if goal_reached(entry.terminal, goal, cfg) {
            return Ok(PlanResult {
                status: PlanStatus::Found,
                path: Some(entry),
                iterations,
                expanded_entries: tree,
            });
        }
        let children = expand_node(&entry, goal, cfg, vp, inflated, &mut next_serial)?;
        for child in children {
            if let Some(b) = cfg.state_bins {
                let key = bin_key(child.terminal, b);
                match bins.get(&key) {
                    Some(&best) if best <= child.cost => continue,
                    _ => {
                        bins.insert(key, child.cost);
                    }
                }
            }
            if let Some(t) = tree.as_mut() {
                t.push(child.clone());
            }
            queue.push(child);
        }
    };
    Ok(PlanResult {
        status,
        path: None,
        iterations,
        expanded_entries: tree,
    })
}

/// Re-simulates an input history from `start`.
pub fn replay(
    start: Pose,
    inputs: &[ControlInput],
    cfg: &PlannerConfig,
    vp: &VehicleParams,
) -> Result<Vec<Trajectory>> {
    let mut pose = start;
    let mut out = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let tr = simulate_primitive(pose, u, vp, cfg.primitive_duration, cfg.integration_dt)?;
        pose = tr.last();
        out.push(tr);
    }
    Ok(out)
}
