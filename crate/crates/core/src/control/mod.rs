//! Two-hand trajectory generators and a coarse kinematic world simulator.
//!
//! Hands are free 6-DoF frames. A hand frame's local z axis is the finger
//! direction; local x is the pinch direction of the upper finger.

mod primitives;
mod sim;
mod world;

pub use primitives::{
    arc_waypoints, cover_arc, grip_seal, hold_target, release_finger, retract, scoop_lift, Constraint, ScoopParams,
    HOME_LEFT, HOME_RIGHT,
};
pub use sim::{simulate, Event, EventLog, FailureInjection, Object, SimParams};
pub use world::{Hand, HandState, Holding, SealState, TargetShape, WorldState, WrapperHold, WrapperState};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Edge, Face, Pose};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("face {face} cannot resist a pull along {pull:?}")]
    InvalidFace { face: Face, pull: [f64; 3] },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("arc radius is zero")]
    DegenerateArc,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    #[default]
    Open,
    Pinch,
    Scoop,
    Press,
}

/// How the motion into a waypoint is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    #[default]
    Free,
    /// Force-regulated toward the waypoint's force setpoint.
    Admittance,
    /// Stops on contact with the target; may also carry a force setpoint.
    Guarded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Pose<f64>,
    pub gripper: Gripper,
    /// Newtons; zero on free segments.
    pub force: Vec3,
    /// Seconds to wait after arriving.
    pub dwell: f64,
    pub segment: Segment,
}

impl Waypoint {
    pub fn free(pose: Pose<f64>, gripper: Gripper) -> Self {
        Self { pose, gripper, force: Vec3::zeros(), dwell: 0.0, segment: Segment::Free }
    }

    pub fn is_valid(&self) -> bool {
        let finite = self.pose.is_finite() && self.force.iter().all(|v| v.is_finite()) && self.dwell.is_finite();
        let force_ok = match self.segment {
            Segment::Admittance => self.force.norm() > 0.0,
            Segment::Free => self.force == Vec3::zeros(),
            Segment::Guarded => true,
        };
        finite && force_ok && self.dwell >= 0.0
    }
}

/// What a trajectory does to the world when executed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    HoldTarget { face: Face },
    ScoopLift,
    CoverArc { edge: Edge, center: Vec3, axis: Vec3 },
    ReleaseFinger { constraint: Constraint },
    GripSeal,
    Retract,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub hand: Hand,
    pub action: Action,
    pub waypoints: Vec<Waypoint>,
    /// Largest allowed angle between the fingers and the contact face while
    /// approaching it, radians.
    pub approach_limit: Option<f64>,
}

impl Trajectory {
    pub fn is_valid(&self) -> bool {
        !self.waypoints.is_empty() && self.waypoints.iter().all(Waypoint::is_valid)
    }

    pub fn last(&self) -> &Waypoint {
        self.waypoints.last().expect("trajectories are nonempty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceParams {
    /// Pull force magnitude, N.
    pub force: f64,
    /// Spring stiffness of the sheet between hand and fold line, N/m.
    pub stiffness: f64,
    /// Standard deviation of the measured force, N.
    pub noise: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self { force: 4.0, stiffness: 200.0, noise: 0.05 }
    }
}

impl AdmittanceParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.force > 0.0 && self.stiffness > 0.0 && self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ControlError::InvalidArgument("admittance parameters must be positive"));
        }
        Ok(())
    }
}

/// Rotation whose local z is `fingers` and whose local x is as close as
/// possible to `pinch`.
pub(crate) fn hand_frame(fingers: &Vec3, pinch: &Vec3) -> UnitQuaternion<f64> {
    let z = fingers.normalize();
    let mut x = pinch - z * z.dot(pinch);
    if x.norm() < 1e-9 {
        let seed = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        x = seed - z * z.dot(&seed);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
}

/// Angle between the hand's finger axis and the plane with normal `n`, radians.
pub fn approach_angle(pose: &Pose<f64>, n: &Vec3) -> f64 {
    let z = pose.orientation * Vec3::z();
    z.dot(&n.normalize()).abs().clamp(0.0, 1.0).asin()
}
