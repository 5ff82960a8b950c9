//! Trajectory and steering tables.

use std::fmt::Write as _;

use revpark::{ControlInput, Pose, QueueEntry, Trajectory, TrajectorySample};

pub const TRAJECTORY_HEADER: &str = "t,x_r,y_r,psi,delta_f,v_r";
pub const STEERING_HEADER: &str = "t,delta_f";

/// Nine significant digits in plain decimal notation, trailing zeros trimmed.
/// Negative zero prints as `0`.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    // The exponent after rounding to nine digits decides the decimal count.
    let sci = format!("{v:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    let rounded: f64 = sci.parse().unwrap();
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn row(out: &mut String, t: f64, p: Pose, u: ControlInput) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        format_sig(t),
        format_sig(p.x_r),
        format_sig(p.y_r),
        format_sig(p.psi),
        format_sig(u.delta_f),
        format_sig(u.v_r)
    );
}

/// One row per integration sample; the first sample of every primitive after
/// the first repeats the previous end and is dropped. A zero-action path
/// yields the single start row with zero input.
pub fn trajectory_csv(path: &QueueEntry, primitive_duration: f64) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let trajectories = path.path_trajectory();
    if trajectories.is_empty() {
        row(
            &mut out,
            0.0,
            path.terminal_state(),
            ControlInput::new(0.0, 0.0),
        );
        return out;
    }
    for (i, tr) in trajectories.iter().enumerate() {
        let t0 = i as f64 * primitive_duration;
        let skip = usize::from(i > 0);
        for s in &tr.samples()[skip..] {
            row(&mut out, t0 + s.t, s.pose, tr.input());
        }
    }
    out
}

/// Steer angle at the start of each primitive.
pub fn steering_csv(path: &QueueEntry, primitive_duration: f64) -> String {
    let mut out = String::from(STEERING_HEADER);
    out.push('\n');
    for (i, u) in path.input_history().iter().enumerate() {
        let t = i as f64 * primitive_duration;
        let _ = writeln!(out, "{},{}", format_sig(t), format_sig(u.delta_f));
    }
    out
}

/// A trajectory table read back from disk.
#[derive(Clone, Debug)]
pub struct ParsedTrajectory {
    pub poses: Vec<Pose>,
    /// Rows grouped into primitives; empty for a single-row table.
    pub trajectories: Vec<Trajectory>,
}

/// Parses a trajectory table written by [`trajectory_csv`]. The row count
/// must be a whole number of primitives of `steps` samples each, plus one.
pub fn parse_trajectory_csv(text: &str, steps: usize) -> Result<ParsedTrajectory, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(format!("expected header `{TRAJECTORY_HEADER}`")),
    }
    let mut rows: Vec<(f64, Pose, ControlInput)> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(format!(
                "line {}: expected 6 fields, got {}",
                i + 1,
                fields.len()
            ));
        }
        let mut v = [0.0; 6];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("line {}: bad number `{f}`", i + 1))?;
        }
        if let Some(&(prev, _, _)) = rows.last() {
            if v[0] <= prev {
                return Err(format!("line {}: time does not increase", i + 1));
            }
        }
        rows.push((
            v[0],
            Pose::new(v[1], v[2], v[3]),
            ControlInput::new(v[4], v[5]),
        ));
    }
    if rows.is_empty() {
        return Err("no samples".into());
    }
    if steps == 0 || !(rows.len() - 1).is_multiple_of(steps) {
        return Err(format!(
            "{} rows is not a whole number of {steps}-step primitives plus one",
            rows.len()
        ));
    }
    let mut trajectories = Vec::with_capacity((rows.len() - 1) / steps);
    for chunk in 0..(rows.len() - 1) / steps {
        let group = &rows[chunk * steps..=(chunk + 1) * steps];
        let t0 = group[0].0;
        let samples = group
            .iter()
            .map(|&(t, pose, _)| TrajectorySample { t: t - t0, pose })
            .collect();
        trajectories
            .push(Trajectory::from_samples(samples, group[1].2).map_err(|e| e.to_string())?);
    }
    Ok(ParsedTrajectory {
        poses: rows.iter().map(|r| r.1).collect(),
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.05), "0.05");
        assert_eq!(format_sig(-1.0), "-1");
        assert_eq!(format_sig(17.19812345678), "17.1981235");
        assert_eq!(format_sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig(9.9999999999), "10");
        assert_eq!(format_sig(123456789012.0), "123456789000");
        assert_eq!(format_sig(1.234e-7), "0.0000001234");
        assert_eq!(format_sig(-1e-20), "-0.00000000000000000001");
    }

    #[test]
    fn parse_rejects_bad_tables() {
        assert!(parse_trajectory_csv("", 20).is_err());
        assert!(parse_trajectory_csv("t,x\n0,1\n", 20).is_err());
        let head = format!("{TRAJECTORY_HEADER}\n");
        assert!(parse_trajectory_csv(&head, 20).is_err());
        let two = format!("{head}0,0,0,0,0,-1\n0.5,1,0,0,0,-1\n");
        assert!(parse_trajectory_csv(&two, 20).is_err());
        let back = format!("{head}0,0,0,0,0,-1\n0,1,0,0,0,-1\n");
        assert!(parse_trajectory_csv(&back, 1).is_err());
        let nan = format!("{head}0,NaN,0,0,0,-1\n");
        assert!(parse_trajectory_csv(&nan, 1).is_err());
    }

    #[test]
    fn parse_groups_rows_into_primitives() {
        let mut text = format!("{TRAJECTORY_HEADER}\n");
        for k in 0..=4 {
            text.push_str(&format!(
                "{},{},0,0,0.35,-1\n",
                k as f64 * 0.5,
                -(k as f64) * 0.5
            ));
        }
        let p = parse_trajectory_csv(&text, 2).unwrap();
        assert_eq!(p.poses.len(), 5);
        assert_eq!(p.trajectories.len(), 2);
        assert_eq!(p.trajectories[1].first(), p.trajectories[0].last());
        assert_eq!(p.trajectories[1].samples()[0].t, 0.0);
        assert_eq!(p.trajectories[0].input(), ControlInput::new(0.35, -1.0));

        let single = format!("{TRAJECTORY_HEADER}\n0,1,2,3,0,0\n");
        let p = parse_trajectory_csv(&single, 20).unwrap();
        assert_eq!(p.poses, vec![Pose::new(1.0, 2.0, 3.0)]);
        assert!(p.trajectories.is_empty());
    }
}
