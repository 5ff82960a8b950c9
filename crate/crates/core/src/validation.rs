//! Exact-geometry oracles used to certify planner output.
//!
//! These work on the original obstacle rectangles, never on the raster, so
//! they are independent of the grid and inflation machinery they check.

use std::fmt;

use crate::geometry::{Point, Rect};
use crate::kinematics::{Pose, Trajectory, VehicleParams};
use crate::par::Exec;
use crate::planner::{PlanResult, PlanStatus};
use crate::scenario::Scenario;

/// Vehicle body rectangle, corners counterclockwise starting rear-right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootprintPolygon {
    pub corners: [Point; 4],
}

impl FootprintPolygon {
    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let c = &self.corners;
        let mut acc = 0.0;
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    pub fn within(&self, extents: &Rect) -> bool {
        self.corners.iter().all(|&p| extents.contains(p))
    }
}

pub fn footprint(pose: Pose, vp: &VehicleParams) -> FootprintPolygon {
    let (sin, cos) = pose.psi.sin_cos();
    let rear = -vp.rear_overhang();
    let front = vp.wheelbase() + vp.front_overhang();
    let half = vp.width() / 2.0;
    let at =
        |s: f64, l: f64| Point::new(pose.x_r + s * cos - l * sin, pose.y_r + s * sin + l * cos);
    FootprintPolygon {
        corners: [
            at(rear, -half),
            at(front, -half),
            at(front, half),
            at(rear, half),
        ],
    }
}

fn project(points: &[Point], axis: (f64, f64)) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.x * axis.0 + p.y * axis.1;
            (lo.min(d), hi.max(d))
        })
}

/// Separating-axis test of a rotated rectangle against an axis-aligned one.
/// Touching counts as intersecting.
pub fn rect_intersects(poly: &FootprintPolygon, obstacle: &Rect) -> bool {
    let c = &poly.corners;
    let (lo_x, hi_x) = project(c, (1.0, 0.0));
    if hi_x < obstacle.xmin || lo_x > obstacle.xmax {
        return false;
    }
    let (lo_y, hi_y) = project(c, (0.0, 1.0));
    if hi_y < obstacle.ymin || lo_y > obstacle.ymax {
        return false;
    }
    let ob = obstacle.corners();
    for edge in [(c[0], c[1]), (c[1], c[2])] {
        let axis = (edge.0.y - edge.1.y, edge.1.x - edge.0.x);
        let (a0, a1) = project(c, axis);
        let (b0, b1) = project(&ob, axis);
        if a1 < b0 || b1 < a0 {
            return false;
        }
    }
    true
}

pub fn footprint_collides(poly: &FootprintPolygon, obstacles: &[Rect]) -> bool {
    obstacles.iter().any(|o| rect_intersects(poly, o))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Collision,
    OutOfExtents,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CertifyViolation {
    pub trajectory: usize,
    pub sample: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for CertifyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Collision => "footprint collides with an obstacle",
            ViolationKind::OutOfExtents => "footprint leaves the world extents",
        };
        write!(
            f,
            "{what} at trajectory {} sample {}",
            self.trajectory, self.sample
        )
    }
}

/// Footprint test for a single pose; the extents check comes first.
pub fn check_pose(
    pose: Pose,
    obstacles: &[Rect],
    extents: &Rect,
    vp: &VehicleParams,
) -> Option<ViolationKind> {
    let fp = footprint(pose, vp);
    if !fp.within(extents) {
        Some(ViolationKind::OutOfExtents)
    } else if footprint_collides(&fp, obstacles) {
        Some(ViolationKind::Collision)
    } else {
        None
    }
}

/// Checks every sample of every trajectory; returns the first violation in
/// path order.
pub fn certify_trajectories<'a, I>(
    trajectories: I,
    obstacles: &[Rect],
    extents: &Rect,
    vp: &VehicleParams,
) -> Result<(), CertifyViolation>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    certify_trajectories_with(trajectories, obstacles, extents, vp, Exec::default())
}

pub fn certify_trajectories_with<'a, I>(
    trajectories: I,
    obstacles: &[Rect],
    extents: &Rect,
    vp: &VehicleParams,
    exec: Exec,
) -> Result<(), CertifyViolation>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let flat: Vec<(usize, usize, Pose)> = trajectories
        .into_iter()
        .enumerate()
        .flat_map(|(i, tr)| tr.poses().enumerate().map(move |(j, p)| (i, j, p)))
        .collect();
    let check = |k: usize| check_pose(flat[k].2, obstacles, extents, vp);
    match exec.position_first(flat.len(), |k| check(k).is_some()) {
        None => Ok(()),
        Some(k) => Err(CertifyViolation {
            trajectory: flat[k].0,
            sample: flat[k].1,
            kind: check(k).expect("violation re-detected"),
        }),
    }
}

/// Certifies a found plan against the scenario's exact obstacle geometry.
///
/// A result without a path (not found) is reported as a violation at
/// `(0, 0)`.
pub fn certify_path(result: &PlanResult, scenario: &Scenario) -> Result<(), CertifyViolation> {
    let path = match (&result.status, &result.path) {
        (PlanStatus::Found, Some(p)) => p,
        _ => {
            return Err(CertifyViolation {
                trajectory: 0,
                sample: 0,
                kind: ViolationKind::Collision,
            })
        }
    };
    let obstacles = scenario.certification_obstacles();
    let extents = scenario.map.extents;
    let trajectories = path.path_trajectory();
    if trajectories.is_empty() {
        // Zero-action path: check the start pose alone.
        return match check_pose(
            path.terminal_state(),
            &obstacles,
            &extents,
            &scenario.vehicle,
        ) {
            None => Ok(()),
            Some(kind) => Err(CertifyViolation {
                trajectory: 0,
                sample: 0,
                kind,
            }),
        };
    }
    certify_trajectories(trajectories, &obstacles, &extents, &scenario.vehicle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{simulate_primitive, ControlInput};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Point, x: f64, y: f64) -> bool {
        (a.x - x).abs() < 1e-12 && (a.y - y).abs() < 1e-12
    }

    #[test]
    fn footprint_examples() {
        let vp = VehicleParams::default();
        let fp = footprint(Pose::new(0.0, 0.0, 0.0), &vp);
        assert!(close(fp.corners[0], -0.991, -0.9675));
        assert!(close(fp.corners[1], 3.887, -0.9675));
        assert!(close(fp.corners[2], 3.887, 0.9675));
        assert!(close(fp.corners[3], -0.991, 0.9675));
        assert!((fp.area() - 9.43893).abs() < 1e-9);

        let r = footprint(Pose::new(0.0, 0.0, FRAC_PI_2), &vp);
        for (a, b) in fp.corners.iter().zip(r.corners.iter()) {
            assert!(close(*b, -a.y, a.x));
        }
        let p = footprint(Pose::new(3.0, -7.0, 2.3), &vp);
        assert!((p.area() - 9.43893).abs() < 1e-9);
    }

    #[test]
    fn footprint_is_rectangle() {
        let vp = VehicleParams::default();
        let fp = footprint(Pose::new(1.5, 2.5, -0.7), &vp);
        let c = fp.corners;
        let side = |i: usize| c[i].distance(c[(i + 1) % 4]);
        assert!((side(0) - side(2)).abs() < 1e-9 && (side(1) - side(3)).abs() < 1e-9);
        assert!((side(0) - vp.length()).abs() < 1e-9 && (side(1) - vp.width()).abs() < 1e-9);
        let d0 = (c[1].x - c[0].x, c[1].y - c[0].y);
        let d1 = (c[2].x - c[1].x, c[2].y - c[1].y);
        assert!((d0.0 * d1.0 + d0.1 * d1.1).abs() < 1e-9);
    }

    #[test]
    fn collision_examples() {
        let vp = VehicleParams::default();
        let fp = footprint(Pose::new(0.0, 0.0, 0.0), &vp);
        assert!(!footprint_collides(
            &fp,
            &[Rect::new(10.0, 10.0, 12.0, 12.0)]
        ));
        assert!(footprint_collides(&fp, &[Rect::new(-0.1, -0.1, 0.1, 0.1)]));
        // Shares the edge y = 0.9675 exactly.
        assert!(footprint_collides(&fp, &[Rect::new(0.0, 0.9675, 1.0, 2.0)]));
        assert!(!footprint_collides(
            &fp,
            &[Rect::new(0.0, 0.9676, 1.0, 2.0)]
        ));
    }

    #[test]
    fn rotated_rect_separating_axis() {
        // Diamond-like footprint whose bounding box overlaps the obstacle while
        // the shapes themselves are separated along the rotated axis.
        let vp = VehicleParams::new(1.0, 2.0, 0.2, None, 0.75).unwrap();
        let fp = footprint(Pose::new(0.0, 0.0, std::f64::consts::FRAC_PI_4), &vp);
        let ob = Rect::new(0.9, -0.5, 1.5, 0.1);
        assert!(!rect_intersects(&fp, &ob));
    }

    // Dense lattice sampling of both rectangles.
    fn brute_intersects(poly: &FootprintPolygon, ob: &Rect) -> bool {
        let inside_poly = |p: Point| {
            let c = &poly.corners;
            (0..4).all(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-12
            })
        };
        let step = 0.01;
        let nx = (ob.width() / step).ceil() as usize;
        let ny = (ob.height() / step).ceil() as usize;
        for i in 0..=nx {
            for j in 0..=ny {
                let p = Point::new(
                    (ob.xmin + i as f64 * step).min(ob.xmax),
                    (ob.ymin + j as f64 * step).min(ob.ymax),
                );
                if inside_poly(p) {
                    return true;
                }
            }
        }
        let c = &poly.corners;
        let (u, v) = (
            (c[1].x - c[0].x, c[1].y - c[0].y),
            (c[3].x - c[0].x, c[3].y - c[0].y),
        );
        let nu = (c[0].distance(c[1]) / step).ceil() as usize;
        let nv = (c[0].distance(c[3]) / step).ceil() as usize;
        for i in 0..=nu {
            for j in 0..=nv {
                let (a, b) = (i as f64 / nu as f64, j as f64 / nv as f64);
                let p = Point::new(c[0].x + a * u.0 + b * v.0, c[0].y + a * u.1 + b * v.1);
                if ob.contains(p) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn sat_agrees_with_point_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut disagreements = 0;
        let mut hits = 0;
        for _ in 0..1000 {
            let vp = VehicleParams::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(2.5..4.0),
                rng.gen_range(0.4..1.5),
                None,
                0.75,
            )
            .unwrap();
            let pose = Pose::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-3.2..3.2),
            );
            let fp = footprint(pose, &vp);
            let x0 = rng.gen_range(-4.0..3.0);
            let y0 = rng.gen_range(-4.0..3.0);
            let ob = Rect::new(
                x0,
                y0,
                x0 + rng.gen_range(0.2..2.0),
                y0 + rng.gen_range(0.2..2.0),
            );
            let sat = rect_intersects(&fp, &ob);
            hits += sat as usize;
            let brute = brute_intersects(&fp, &ob);
            if sat != brute {
                // Lattice sampling can miss overlaps thinner than its pitch;
                // the exact test must never miss one the lattice finds.
                assert!(sat, "lattice found an overlap SAT missed");
                disagreements += 1;
            }
        }
        assert!(hits > 100 && hits < 900, "degenerate sample: {hits}");
        assert!(disagreements <= 10, "{disagreements} disagreements");
    }

    #[test]
    fn certify_flags_first_bad_sample() {
        let vp = VehicleParams::default();
        let tr = simulate_primitive(
            Pose::new(10.0, 5.0, 0.0),
            ControlInput::new(0.0, -1.0),
            &vp,
            3.0,
            0.05,
        )
        .unwrap();
        let extents = Rect::new(0.0, 0.0, 20.0, 10.0);
        assert!(certify_trajectories([&tr], &[], &extents, &vp).is_ok());
        // Rear bumper starts at 9.009 and reaches x = 8.5 after 0.509 m.
        let wall = Rect::new(7.0, 0.0, 8.5, 10.0);
        let v = certify_trajectories([&tr], &[wall], &extents, &vp).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Collision);
        assert_eq!((v.trajectory, v.sample), (0, 11));
        let small = Rect::new(8.2, 0.0, 20.0, 10.0);
        let v = certify_trajectories([&tr], &[], &small, &vp).unwrap_err();
        assert_eq!(v.kind, ViolationKind::OutOfExtents);
        assert_eq!(v.sample, 17);
    }
}
