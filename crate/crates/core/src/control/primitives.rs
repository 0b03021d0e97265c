use nalgebra::{Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{hand_frame, Action, ControlError, Gripper, Hand, Holding, Segment, Trajectory, Waypoint, WorldState};
use crate::geometry::{Edge, EdgeSegment, Face, Pose, SealCmp};
use crate::scalar::rad;
use crate::Vec3;

pub const HOME_LEFT: [f64; 3] = [0.0, 0.35, 0.30];
pub const HOME_RIGHT: [f64; 3] = [0.0, -0.35, 0.30];

const HOLD_FORCE: f64 = 4.0;
const HOLD_APPROACH: f64 = 0.05;
const ARC_STEP_DEG: f64 = 5.0;
const ARC_SWEEP_DEG: f64 = 90.0;
const GUARDED_SWEEP_DEG: f64 = 120.0;
const RELEASE_TWIST_DEG: f64 = 30.0;
const SEAL_APPROACH_DEG: f64 = 10.0;
const SEAL_APPROACH_LIMIT_DEG: f64 = 15.0;
const SEAL_ABOVE: f64 = 0.10;
const SEAL_PEEL_LIFT: f64 = 0.05;
const SEAL_PEEL_TWIST_DEG: f64 = 20.0;
const TABLE_CLEARANCE: f64 = 0.001;
const EDGE_ON_TABLE_TOL: f64 = 0.005;
const RETRACT_LIFT: f64 = 0.10;

/// Lifting motion parameters; the defaults are placeholders, not measured values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoopParams {
    /// Distance outside the edge where the fingers touch down, m.
    pub approach: f64,
    pub lift: f64,
    /// Radians.
    pub tilt: f64,
    /// Translation toward the sheet center after tilting, m.
    pub shift: f64,
}

impl Default for ScoopParams {
    fn default() -> Self {
        Self { approach: 0.02, lift: 0.05, tilt: rad(30.0), shift: 0.03 }
    }
}

/// What the releasing hand keeps in contact with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// The pinched wrapper end is pressed onto the target.
    Target,
    /// The pinched tape is laid at `position` on the face with `normal`,
    /// across an edge running along `edge_dir`.
    Seal { position: Vec3, normal: Vec3, edge_dir: Vec3 },
}

/// Left-hand press on `face` resisting a wrapper pull along `pull`.
///
/// The face must lie on the pull side of the target so the press force
/// points against the pull.
pub fn hold_target(world: &WorldState, face: Face, pull: &Vec3) -> Result<Trajectory, ControlError> {
    if !(pull.norm() > 0.0) || !pull.iter().all(|v| v.is_finite()) {
        return Err(ControlError::InvalidArgument("pull direction must be nonzero"));
    }
    let quad = world.target.face(face);
    let n = quad.normal;
    if n.dot(pull) <= 0.0 {
        return Err(ControlError::InvalidFace { face, pull: [pull.x, pull.y, pull.z] });
    }
    let center = quad.center();
    let orient = hand_frame(&-n, &Vec3::z());
    let approach = Waypoint::free(Pose::new(center + n * HOLD_APPROACH, orient), Gripper::Open);
    let press = Waypoint {
        pose: Pose::new(center, orient),
        gripper: Gripper::Press,
        force: -n * HOLD_FORCE,
        dwell: 0.5,
        segment: Segment::Admittance,
    };
    Ok(Trajectory {
        hand: Hand::Left,
        action: Action::HoldTarget { face },
        waypoints: vec![approach, press],
        approach_limit: None,
    })
}

/// Right-hand scoop of the wrapper at `edge`: touch down outside the edge,
/// slide under it, lift, tilt and move toward the sheet center, then pinch.
pub fn scoop_lift(world: &WorldState, edge: &EdgeSegment<f64>, params: &ScoopParams) -> Result<Trajectory, ControlError> {
    let along = edge.direction().ok_or(ControlError::InvalidArgument("edge has zero length"))?;
    let up = world.table.oriented_up(&Vec3::z());
    if edge.endpoints.iter().any(|p| up.signed_distance(p).abs() > EDGE_ON_TABLE_TOL) {
        return Err(ControlError::InvalidState("edge is not on the table"));
    }
    if !world.right.is_free() {
        return Err(ControlError::InvalidState("right hand is occupied"));
    }
    let n = up.normal;
    let mid = edge.midpoint();
    let to_center = world.wrapper.cbbox.pose.position - mid;
    let mut inward = to_center - along * along.dot(&to_center);
    inward -= n * n.dot(&inward);
    let inward = inward.try_normalize(1e-12).unwrap_or_else(|| n.cross(&along).normalize());

    let flat = hand_frame(&inward, &n);
    let tilt = UnitQuaternion::from_axis_angle(&Unit::new_normalize(inward.cross(&n)), params.tilt) * flat;
    let lifted = mid + n * params.lift;
    let wps = vec![
        Waypoint::free(Pose::new(mid - inward * params.approach, flat), Gripper::Open),
        Waypoint::free(Pose::new(mid, flat), Gripper::Scoop),
        Waypoint::free(Pose::new(lifted, flat), Gripper::Scoop),
        Waypoint::free(Pose::new(lifted, tilt), Gripper::Scoop),
        Waypoint::free(Pose::new(lifted + inward * params.shift, tilt), Gripper::Pinch),
    ];
    Ok(Trajectory { hand: Hand::Right, action: Action::ScoopLift, waypoints: wps, approach_limit: None })
}

/// Arc of the right hand about the midpoint of target edge `edge`, pulling
/// the grasped wrapper with `force`.
pub fn cover_arc(world: &WorldState, edge: Edge, force: &Vec3, guarded: bool) -> Result<Trajectory, ControlError> {
    if world.right.holding != Holding::Wrapper {
        return Err(ControlError::InvalidState("wrapper is not grasped"));
    }
    let seg = world.target.edge(edge);
    let dir = seg.direction().expect("box edges have positive length");
    let center = seg.midpoint();
    let (waypoints, axis) = arc_waypoints(&center, &world.right.pose, force, &dir, guarded)?;
    Ok(Trajectory {
        hand: Hand::Right,
        action: Action::CoverArc { edge, center, axis },
        waypoints,
        approach_limit: None,
    })
}

/// Waypoints of a circular arc about `center` starting at `hand`, in the
/// plane spanned by the radius and `force`, every 5 degrees over 90 degrees
/// (120 when guarded). Returns the waypoints and the rotation axis. The
/// start pose itself is not included.
pub fn arc_waypoints(
    center: &Vec3,
    hand: &Pose<f64>,
    force: &Vec3,
    edge_dir: &Vec3,
    guarded: bool,
) -> Result<(Vec<Waypoint>, Vec3), ControlError> {
    if !(force.norm() > 0.0) {
        return Err(ControlError::InvalidArgument("arc force must be nonzero"));
    }
    let r0 = hand.position - center;
    if r0.norm() < 1e-9 {
        return Err(ControlError::DegenerateArc);
    }
    let axis = match r0.cross(force).try_normalize(1e-9) {
        Some(a) => a,
        None => {
            let e = edge_dir - r0 * (r0.dot(edge_dir) / r0.norm_squared());
            e.try_normalize(1e-9).ok_or(ControlError::InvalidArgument("arc plane is undetermined"))?
        }
    };
    let sweep = if guarded { GUARDED_SWEEP_DEG } else { ARC_SWEEP_DEG };
    let steps = (sweep / ARC_STEP_DEG).round() as usize;
    let segment = if guarded { Segment::Guarded } else { Segment::Admittance };
    let unit_axis = Unit::new_unchecked(axis);
    let wps = (0..=steps)
        .map(|i| {
            let rot = UnitQuaternion::from_axis_angle(&unit_axis, rad(ARC_STEP_DEG * i as f64));
            Waypoint {
                pose: Pose::new(center + rot * r0, rot * hand.orientation),
                gripper: Gripper::Pinch,
                force: *force,
                dwell: 0.0,
                segment,
            }
        })
        .collect();
    Ok((wps, axis))
}

/// Opens the pinching fingers while keeping contact.
///
/// Target mode rotates the right wrist in place on the nearest target face
/// and keeps pressing. Seal mode brings the tape down with the fingers at a
/// shallow angle to the face, upper finger leading, and presses it on.
pub fn release_finger(world: &WorldState, constraint: Constraint) -> Result<Trajectory, ControlError> {
    match constraint {
        Constraint::Target => {
            let hs = &world.right;
            if hs.gripper != Gripper::Pinch || hs.holding != Holding::Wrapper {
                return Err(ControlError::InvalidState("right hand pinches nothing"));
            }
            let (face, _) = world.target.nearest_face(&hs.pose.position);
            let quad = world.target.face(face);
            let n = quad.normal;
            let contact = hs.pose.position - n * quad.signed_distance(&hs.pose.position);
            let twist = UnitQuaternion::from_axis_angle(&Unit::new_normalize(n), rad(RELEASE_TWIST_DEG));
            let press = |pose: Pose<f64>, dwell: f64| Waypoint {
                pose,
                gripper: Gripper::Press,
                force: -n * HOLD_FORCE,
                dwell,
                segment: Segment::Admittance,
            };
            let wps = vec![
                press(Pose::new(contact, hs.pose.orientation), 0.0),
                press(Pose::new(contact, twist * hs.pose.orientation), 0.5),
            ];
            Ok(Trajectory { hand: Hand::Right, action: Action::ReleaseFinger { constraint }, waypoints: wps, approach_limit: None })
        }
        Constraint::Seal { position, normal, edge_dir } => {
            let hs = &world.left;
            if hs.gripper != Gripper::Pinch || hs.holding != Holding::Seal {
                return Err(ControlError::InvalidState("left hand pinches nothing"));
            }
            let n = normal.try_normalize(1e-12).ok_or(ControlError::InvalidArgument("zero face normal"))?;
            let across = n
                .cross(&edge_dir)
                .try_normalize(1e-9)
                .ok_or(ControlError::InvalidArgument("edge direction parallel to the normal"))?;
            let alpha = rad(SEAL_APPROACH_DEG);
            let fingers = across * alpha.cos() - n * alpha.sin();
            let orient = hand_frame(&fingers, &n);
            let wps = vec![
                Waypoint::free(Pose::new(position + n * 0.03, orient), Gripper::Pinch),
                Waypoint::free(Pose::new(position + n * 0.005, orient), Gripper::Pinch),
                Waypoint {
                    pose: Pose::new(position, orient),
                    gripper: Gripper::Press,
                    force: -n * HOLD_FORCE,
                    dwell: 0.5,
                    segment: Segment::Admittance,
                },
            ];
            Ok(Trajectory {
                hand: Hand::Left,
                action: Action::ReleaseFinger { constraint },
                waypoints: wps,
                approach_limit: Some(rad(SEAL_APPROACH_LIMIT_DEG)),
            })
        }
    }
}

/// Left-hand pick of the seal: approach from above, descend, pinch, and
/// peel it off with a lift and a wrist rotation.
pub fn grip_seal(world: &WorldState, seal: &SealCmp<f64>) -> Result<Trajectory, ControlError> {
    if !world.left.is_free() {
        return Err(ControlError::InvalidState("left hand is occupied"));
    }
    let up = world.table.oriented_up(&Vec3::z());
    let n = up.normal;
    let p = seal.mean_point;
    let clear = |q: Vec3| q + n * (TABLE_CLEARANCE - up.signed_distance(&q)).max(0.0);
    let down = hand_frame(&-n, &Vec3::x());
    let peel = UnitQuaternion::from_axis_angle(&Unit::new_normalize(n), rad(SEAL_PEEL_TWIST_DEG)) * down;
    let grasp = clear(p);
    let wps = vec![
        Waypoint::free(Pose::new(clear(p + n * SEAL_ABOVE), down), Gripper::Open),
        Waypoint::free(Pose::new(grasp, down), Gripper::Open),
        Waypoint::free(Pose::new(grasp, down), Gripper::Pinch),
        Waypoint::free(Pose::new(clear(p + n * SEAL_PEEL_LIFT), peel), Gripper::Pinch),
    ];
    Ok(Trajectory { hand: Hand::Left, action: Action::GripSeal, waypoints: wps, approach_limit: None })
}

/// Lifts `hand` off whatever it touches and returns it to its home pose.
pub fn retract(world: &WorldState, hand: Hand) -> Trajectory {
    let hs = world.hand(hand);
    let up = world.table.oriented_up(&Vec3::z()).normal;
    let home = match hand {
        Hand::Left => Vec3::from(HOME_LEFT),
        Hand::Right => Vec3::from(HOME_RIGHT),
    };
    let wps = vec![
        Waypoint::free(Pose::new(hs.pose.position + up * RETRACT_LIFT, hs.pose.orientation), Gripper::Open),
        Waypoint::free(Pose::from_position(home), Gripper::Open),
    ];
    Trajectory { hand, action: Action::Retract, waypoints: wps, approach_limit: None }
}
