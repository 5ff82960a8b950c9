//! Hand-rolled SVG rendering of maps, paths and search trees.

use std::fmt::Write as _;

use revpark::validation::footprint;
use revpark::{InflatedGrid, OccupancyGrid, Pose, QueueEntry, Rect, VehicleParams};

const PX_PER_M: f64 = 20.0;

struct Canvas {
    extents: Rect,
    body: String,
}

impl Canvas {
    fn new(extents: Rect) -> Self {
        Self {
            extents,
            body: String::new(),
        }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.extents.xmin) * PX_PER_M
    }

    fn y(&self, y: f64) -> f64 {
        (self.extents.ymax - y) * PX_PER_M
    }

    /// Horizontal runs of cells where `pred` holds, one rectangle per run.
    fn cell_runs(
        &mut self,
        grid: &OccupancyGrid,
        fill: &str,
        opacity: f64,
        pred: impl Fn(usize, usize) -> bool,
    ) {
        let res = grid.resolution();
        let _ = writeln!(self.body, r#"<g fill="{fill}" fill-opacity="{opacity}">"#);
        for r in 0..grid.height() {
            let mut c = 0;
            while c < grid.width() {
                if !pred(c, r) {
                    c += 1;
                    continue;
                }
                let start = c;
                while c < grid.width() && pred(c, r) {
                    c += 1;
                }
                let cell = grid.cell_rect(start, r);
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    self.x(cell.xmin),
                    self.y(cell.ymax),
                    (c - start) as f64 * res * PX_PER_M,
                    res * PX_PER_M
                );
            }
        }
        self.body.push_str("</g>\n");
    }

    fn polyline(&mut self, points: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64) {
        let mut pts = String::new();
        for (x, y) in points {
            let _ = write!(pts, "{:.2},{:.2} ", self.x(x), self.y(y));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            pts.trim_end()
        );
    }

    fn footprint(&mut self, pose: Pose, vp: &VehicleParams, stroke: &str) {
        let poly = footprint(pose, vp);
        let mut pts = String::new();
        for p in poly.corners {
            let _ = write!(pts, "{:.2},{:.2} ", self.x(p.x), self.y(p.y));
        }
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="none" stroke="{stroke}" stroke-width="1"/>"#,
            pts.trim_end()
        );
    }

    fn finish(self) -> String {
        let w = self.extents.width() * PX_PER_M;
        let h = self.extents.height() * PX_PER_M;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Obstacles, inflated margin, start and goal, the path when one exists with
/// a footprint every second, and optionally every enqueued branch in grey.
pub fn render(
    grid: &OccupancyGrid,
    inflated: &InflatedGrid,
    branches: Option<&[QueueEntry]>,
    path: Option<&QueueEntry>,
    endpoints: (Pose, Pose),
    vp: &VehicleParams,
    dt: f64,
) -> String {
    let mut c = Canvas::new(grid.extents());
    let g = inflated.grid();
    c.cell_runs(g, "#e6550d", 0.3, |x, y| g.get(x, y) && !grid.get(x, y));
    c.cell_runs(grid, "#252525", 1.0, |x, y| grid.get(x, y));
    for b in branches.unwrap_or_default() {
        if let Some(tr) = b.branch_trajectory() {
            c.polyline(tr.poses().map(|p| (p.x_r, p.y_r)), "#969696", 0.6);
        }
    }
    let (start, goal) = endpoints;
    c.footprint(start, vp, "#31a354");
    c.footprint(goal, vp, "#756bb1");
    if let Some(path) = path {
        let trajectories = path.path_trajectory();
        let poses: Vec<Pose> = std::iter::once(start)
            .chain(trajectories.iter().flat_map(|t| t.poses().skip(1)))
            .collect();
        c.polyline(poses.iter().map(|p| (p.x_r, p.y_r)), "#3182bd", 2.0);
        let per_second = (1.0 / dt).round().max(1.0) as usize;
        for p in poses.iter().step_by(per_second) {
            c.footprint(*p, vp, "#3182bd");
        }
    }
    c.finish()
}
