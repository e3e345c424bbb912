//! Eye-in-hand pixel mapping and closed-form joint solution for the 3-DoF
//! watering arm.
//!
//! The camera is rigidly mounted on the end effector and images the pot from
//! a fixed sensing pose, so pixel offsets map to the arm base frame through a
//! single affine scale plus a static offset. Joint angles are in degrees.
//!
//! `theta2` follows the interior-angle convention of the solver: with a zero
//! mounting offset, `theta2 = 0` is the fully extended chain and `180` the
//! fully folded one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for arccos arguments slightly beyond +-1 from rounding.
pub const ACOS_CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("target is outside the reachable annulus (arccos argument {0})")]
    UnreachableTarget(f64),
    #[error("target lies on the base axis, base yaw is undefined")]
    SingularBase,
    #[error("joint {joint} = {value} deg is outside [{lo}, {hi}]")]
    JointLimit {
        joint: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationState {
    /// Pixel-to-physical scale, mm per pixel.
    pub scale: f64,
    pub u0: f64,
    pub v0: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    /// Working height in the arm base frame, mm.
    pub z_const: f64,
}

impl Default for CalibrationState {
    fn default() -> Self {
        Self {
            scale: 0.1,
            u0: 2000.0,
            v0: 2000.0,
            delta_x: 150.0,
            delta_y: 0.0,
            z_const: 60.0,
        }
    }
}

impl CalibrationState {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(KinematicsError::InvalidParameter {
                field: "scale",
                reason: format!("must be positive, got {}", self.scale),
            });
        }
        let rest = [self.u0, self.v0, self.delta_x, self.delta_y, self.z_const];
        if rest.iter().any(|x| !x.is_finite()) {
            return Err(KinematicsError::InvalidParameter {
                field: "calibration",
                reason: "all fields must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub theta1: (f64, f64),
    pub theta2: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
    pub theta_offset: f64,
    /// Explicit limits. When absent, theta1 spans [-180, 180] and theta2
    /// spans [0, 180] shifted by the mounting offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<JointLimits>,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            l1: 120.0,
            l2: 100.0,
            theta_offset: 0.0,
            limits: None,
        }
    }
}

impl ArmGeometry {
    pub fn new(l1: f64, l2: f64, theta_offset: f64) -> Result<Self, KinematicsError> {
        let g = Self {
            l1,
            l2,
            theta_offset,
            limits: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (field, v) in [("l1", self.l1), ("l2", self.l2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidParameter {
                    field,
                    reason: format!("link length must be positive, got {v}"),
                });
            }
        }
        if !self.theta_offset.is_finite() {
            return Err(KinematicsError::InvalidParameter {
                field: "theta_offset",
                reason: "must be finite".into(),
            });
        }
        if let Some(l) = self.limits {
            if !(l.theta1.0 <= l.theta1.1 && l.theta2.0 <= l.theta2.1) {
                return Err(KinematicsError::InvalidParameter {
                    field: "limits",
                    reason: "lower bound exceeds upper bound".into(),
                });
            }
        }
        Ok(())
    }

    pub fn effective_limits(&self) -> JointLimits {
        self.limits.unwrap_or(JointLimits {
            theta1: (-180.0, 180.0),
            theta2: (-self.theta_offset, 180.0 - self.theta_offset),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTarget {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ArmTarget {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// The radial quantity the solver works with: sqrt(x^2 + z^2).
    pub fn radial(&self) -> f64 {
        self.x.hypot(self.z)
    }
}

/// Joint solution. The wrist angle is always `90 - theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointAngles {
    theta1: f64,
    theta2: f64,
    theta3: f64,
}

impl JointAngles {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3: 90.0 - theta2,
        }
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn theta3(&self) -> f64 {
        self.theta3
    }

    pub fn within(&self, limits: &JointLimits) -> Result<(), KinematicsError> {
        for (joint, value, (lo, hi)) in [
            ("theta1", self.theta1, limits.theta1),
            ("theta2", self.theta2, limits.theta2),
        ] {
            if value < lo || value > hi {
                return Err(KinematicsError::JointLimit { joint, value, lo, hi });
            }
        }
        Ok(())
    }
}

/// Maps a pixel to the arm base frame: `X = s(u-u0)+dx`, `Y = s(v-v0)+dy`,
/// `Z = z_const`.
pub fn pixel_to_arm(u: f64, v: f64, cal: &CalibrationState) -> ArmTarget {
    ArmTarget {
        x: cal.scale * (u - cal.u0) + cal.delta_x,
        y: cal.scale * (v - cal.v0) + cal.delta_y,
        z: cal.z_const,
    }
}

/// Inverse of [`pixel_to_arm`] in the image plane.
pub fn arm_to_pixel(target: &ArmTarget, cal: &CalibrationState) -> (f64, f64) {
    (
        (target.x - cal.delta_x) / cal.scale + cal.u0,
        (target.y - cal.delta_y) / cal.scale + cal.v0,
    )
}

/// Single-reference calibration: choose the static offsets so that the
/// observed pixel maps exactly onto the known target.
pub fn calibrate_single_reference(
    observed: (f64, f64),
    known_target: &ArmTarget,
    scale: f64,
    u0: f64,
    v0: f64,
) -> Result<CalibrationState, KinematicsError> {
    let cal = CalibrationState {
        scale,
        u0,
        v0,
        delta_x: known_target.x - scale * (observed.0 - u0),
        delta_y: known_target.y - scale * (observed.1 - v0),
        z_const: known_target.z,
    };
    cal.validate()?;
    Ok(cal)
}

fn acos_checked(arg: f64) -> Result<f64, KinematicsError> {
    if !arg.is_finite() || arg.abs() > 1.0 + ACOS_CLAMP_TOL {
        return Err(KinematicsError::UnreachableTarget(arg));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// Closed-form joint solution without limit checking.
pub fn solve_joints(target: &ArmTarget, geom: &ArmGeometry) -> Result<JointAngles, KinematicsError> {
    if target.x == 0.0 && target.y == 0.0 {
        return Err(KinematicsError::SingularBase);
    }
    let theta1 = target.y.atan2(target.x).to_degrees();
    let (l1, l2) = (geom.l1, geom.l2);
    let arg = (target.x * target.x + target.z * target.z - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    let theta2 = acos_checked(arg)?.to_degrees() - geom.theta_offset;
    Ok(JointAngles::new(theta1, theta2))
}

/// Closed-form joint solution; fails if the solution violates the limits.
pub fn inverse_kinematics(target: &ArmTarget, geom: &ArmGeometry) -> Result<JointAngles, KinematicsError> {
    let angles = solve_joints(target, geom)?;
    angles.within(&geom.effective_limits())?;
    Ok(angles)
}

/// Planar reach of the two-link chain for a given elbow angle.
pub fn reach(angles: &JointAngles, geom: &ArmGeometry) -> f64 {
    let c = (angles.theta2 + geom.theta_offset).to_radians().cos();
    let r2 = geom.l1 * geom.l1 + geom.l2 * geom.l2 + 2.0 * geom.l1 * geom.l2 * c;
    r2.max(0.0).sqrt()
}

/// Forward kinematics onto the working plane `z`.
///
/// Recovers the radial distance from the elbow angle, places the point at
/// height `z` and rotates it by the base yaw. When `|z|` exceeds the reach,
/// the point collapses onto the base axis.
pub fn forward_kinematics(angles: &JointAngles, geom: &ArmGeometry, z: f64) -> ArmTarget {
    let r = reach(angles, geom);
    let planar = (r * r - z * z).max(0.0).sqrt();
    let (s1, c1) = angles.theta1.to_radians().sin_cos();
    if c1.abs() < 1e-12 {
        return ArmTarget {
            x: 0.0,
            y: planar.copysign(s1),
            z,
        };
    }
    let x = planar.copysign(c1);
    ArmTarget { x, y: x * (s1 / c1), z }
}

/// True iff the target has a joint solution inside the mechanical limits.
pub fn workspace_contains(target: &ArmTarget, geom: &ArmGeometry) -> bool {
    inverse_kinematics(target, geom).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> ArmGeometry {
        ArmGeometry::new(120.0, 100.0, 0.0).unwrap()
    }

    #[test]
    fn principal_point_maps_to_offset() {
        let cal = CalibrationState {
            delta_x: 3.0,
            delta_y: -2.0,
            ..Default::default()
        };
        let t = pixel_to_arm(cal.u0, cal.v0, &cal);
        assert_eq!((t.x, t.y, t.z), (3.0, -2.0, cal.z_const));
    }

    #[test]
    fn hundred_pixels_is_ten_mm() {
        let cal = CalibrationState {
            delta_x: 0.0,
            delta_y: 0.0,
            ..Default::default()
        };
        let t = pixel_to_arm(cal.u0 + 100.0, cal.v0, &cal);
        assert!((t.x - 10.0).abs() < 1e-12);
        assert_eq!(t.y, 0.0);
    }

    #[test]
    fn single_reference_calibration() {
        let (u0, v0) = (2000.0, 2000.0);
        let cal = calibrate_single_reference((u0, v0), &ArmTarget::new(3.0, -2.0, 120.0), 0.1, u0, v0).unwrap();
        assert_eq!((cal.delta_x, cal.delta_y, cal.z_const), (3.0, -2.0, 120.0));

        let cal = calibrate_single_reference((u0 + 50.0, v0), &ArmTarget::new(5.0, 0.0, 120.0), 0.1, u0, v0).unwrap();
        assert!(cal.delta_x.abs() < 1e-12);

        assert!(calibrate_single_reference((0.0, 0.0), &ArmTarget::new(0.0, 0.0, 0.0), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn analytic_elbow_cases() {
        let g = geom();
        let x = (120.0f64.powi(2) + 100.0f64.powi(2)).sqrt();
        let a = inverse_kinematics(&ArmTarget::new(x, 0.0, 0.0), &g).unwrap();
        assert!((a.theta2() - 90.0).abs() < 1e-9);
        assert!(a.theta3().abs() < 1e-9);

        let a = inverse_kinematics(&ArmTarget::new(220.0, 0.0, 0.0), &g).unwrap();
        assert_eq!(a.theta2(), 0.0);
        assert_eq!(a.theta3(), 90.0);
        assert_eq!(a.theta1(), 0.0);
    }

    #[test]
    fn base_yaw_quadrants() {
        let g = geom();
        let z = 60.0;
        for (x, y, expected) in [
            (150.0, 150.0, 45.0),
            (-150.0, 150.0, 135.0),
            (-150.0, -150.0, -135.0),
            (150.0, -150.0, -45.0),
        ] {
            let a = solve_joints(&ArmTarget::new(x, y, z), &g).unwrap();
            assert!((a.theta1() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_and_unreachable() {
        let g = geom();
        assert_eq!(
            inverse_kinematics(&ArmTarget::new(0.0, 0.0, 100.0), &g),
            Err(KinematicsError::SingularBase)
        );
        assert!(matches!(
            inverse_kinematics(&ArmTarget::new(221.0, 0.0, 0.0), &g),
            Err(KinematicsError::UnreachableTarget(_))
        ));
        assert!(matches!(
            inverse_kinematics(&ArmTarget::new(10.0, 0.0, 0.0), &g),
            Err(KinematicsError::UnreachableTarget(_))
        ));
    }

    #[test]
    fn acos_clamp_tolerance() {
        let g = geom();
        // Full extension plus a sub-tolerance overshoot still solves.
        let r = 220.0 * (1.0 + 1e-11);
        assert!(inverse_kinematics(&ArmTarget::new(r, 0.0, 0.0), &g).is_ok());
        // A 1e-6 overshoot of the arccos argument does not.
        let arg = 1.0 + 1e-6;
        let r2 = arg * 2.0 * 120.0 * 100.0 + 120.0f64.powi(2) + 100.0f64.powi(2);
        assert!(inverse_kinematics(&ArmTarget::new(r2.sqrt(), 0.0, 0.0), &g).is_err());
    }

    #[test]
    fn fk_extremes() {
        let g = geom();
        assert!((reach(&JointAngles::new(0.0, 0.0), &g) - 220.0).abs() < 1e-9);
        assert!((reach(&JointAngles::new(0.0, 180.0), &g) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn workspace_boundary() {
        let g = geom();
        assert!(workspace_contains(&ArmTarget::new(220.0, 0.0, 0.0), &g));
        assert!(!workspace_contains(&ArmTarget::new(221.0, 0.0, 0.0), &g));
    }

    #[test]
    fn joint_limits_enforced() {
        let mut g = geom();
        g.limits = Some(JointLimits {
            theta1: (-30.0, 30.0),
            theta2: (0.0, 180.0),
        });
        assert!(matches!(
            inverse_kinematics(&ArmTarget::new(100.0, 100.0, 60.0), &g),
            Err(KinematicsError::JointLimit { joint: "theta1", .. })
        ));
        assert!(inverse_kinematics(&ArmTarget::new(150.0, 10.0, 60.0), &g).is_ok());
    }

    #[test]
    fn mounting_offset_shifts_elbow() {
        let g = ArmGeometry::new(120.0, 100.0, 10.0).unwrap();
        let a = inverse_kinematics(&ArmTarget::new(150.0, 0.0, 60.0), &g).unwrap();
        let b = inverse_kinematics(&ArmTarget::new(150.0, 0.0, 60.0), &geom()).unwrap();
        assert!((b.theta2() - a.theta2() - 10.0).abs() < 1e-9);
        assert_eq!(a.theta3(), 90.0 - a.theta2());
    }

    proptest! {
        #[test]
        fn pixel_round_trip(u in -5000.0..5000.0f64, v in -5000.0..5000.0f64) {
            let cal = CalibrationState::default();
            let (pu, pv) = arm_to_pixel(&pixel_to_arm(u, v, &cal), &cal);
            prop_assert!((pu - u).abs() * cal.scale < 1e-9);
            prop_assert!((pv - v).abs() * cal.scale < 1e-9);
        }

        #[test]
        fn pixel_map_is_affine(
            p in (-3000.0..3000.0f64, -3000.0..3000.0f64),
            q in (-3000.0..3000.0f64, -3000.0..3000.0f64),
            alpha in 0.0..=1.0f64,
        ) {
            let cal = CalibrationState::default();
            let mix = pixel_to_arm(alpha * p.0 + (1.0 - alpha) * q.0, alpha * p.1 + (1.0 - alpha) * q.1, &cal);
            let a = pixel_to_arm(p.0, p.1, &cal);
            let b = pixel_to_arm(q.0, q.1, &cal);
            prop_assert!((mix.x - (alpha * a.x + (1.0 - alpha) * b.x)).abs() < 1e-9);
            prop_assert!((mix.y - (alpha * a.y + (1.0 - alpha) * b.y)).abs() < 1e-9);
        }

        #[test]
        fn calibration_residual_is_zero(
            u in 0.0..4000.0f64, v in 0.0..4000.0f64,
            x in -200.0..200.0f64, y in -200.0..200.0f64, z in -100.0..100.0f64,
        ) {
            let target = ArmTarget::new(x, y, z);
            let cal = calibrate_single_reference((u, v), &target, 0.1, 2000.0, 2000.0).unwrap();
            let back = pixel_to_arm(u, v, &cal);
            prop_assert!((back.x - x).abs() < 1e-12 && (back.y - y).abs() < 1e-12);
            prop_assert_eq!(back.z, z);
        }
    }
}
