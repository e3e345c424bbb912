use serde::Serialize;

use super::state::SkipCause;
use crate::detect::Detection;
use crate::kinematics::{inverse_kinematics, pixel_to_arm, ArmGeometry, ArmTarget, CalibrationState, JointAngles};
use crate::sim::PotInView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Joints(JointAngles),
    Skipped(SkipCause),
}

/// One surviving detection turned into an arm command.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedDetection {
    pub detection: Detection,
    /// Box center snapped to the pixel grid.
    pub pixel: (f64, f64),
    pub target: ArmTarget,
    pub command: Command,
    /// Ground-truth pot this detection was scored against.
    pub matched_pot: Option<usize>,
}

/// Greedy nearest-neighbor assignment of detections to true pots within
/// `gate` mm. Detections are taken in the given order; each pot is used at
/// most once.
pub fn match_detections(dets: &[Detection], truth: &[PotInView], scale: f64, gate: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; truth.len()];
    dets.iter()
        .map(|d| {
            let (u, v) = d.bbox.center();
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in truth.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                let dist = (p.u - u).hypot(p.v - v) * scale;
                if dist <= gate && best.is_none_or(|(_, b)| dist < b) {
                    best = Some((i, dist));
                }
            }
            best.map(|(i, _)| {
                taken[i] = true;
                truth[i].pot_id
            })
        })
        .collect()
}

pub fn plan_pot_service(
    dets: &[Detection],
    truth: &[PotInView],
    cal: &CalibrationState,
    geom: &ArmGeometry,
    match_gate: f64,
) -> Vec<PlannedDetection> {
    let matches = match_detections(dets, truth, cal.scale, match_gate);
    dets.iter()
        .zip(matches)
        .map(|(det, matched_pot)| {
            let (u, v) = det.bbox.center();
            let pixel = (u.round(), v.round());
            let target = pixel_to_arm(pixel.0, pixel.1, cal);
            let command = match inverse_kinematics(&target, geom) {
                Ok(j) => Command::Joints(j),
                Err(_) => Command::Skipped(SkipCause::Unreachable),
            };
            PlannedDetection {
                detection: *det,
                pixel,
                target,
                command,
                matched_pot,
            }
        })
        .collect()
}
