use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Action, AdmittanceParams, Constraint, Gripper, Hand, Holding, Segment, Trajectory, WorldState, WrapperHold,
    WrapperState,
};
use crate::geometry::{Face, Pose};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub admittance: AdmittanceParams,
    /// Standard deviation of the wrapper end's slip on release, m.
    pub slip_sigma: f64,
    /// Largest slip magnitude, m.
    pub slip_clip: f64,
    /// Hand translation speed, m/s.
    pub speed: f64,
    /// Hand rotation speed, rad/s.
    pub angular_speed: f64,
    /// Accepted penetration of a guarded contact, m.
    pub contact_tol: f64,
    /// Largest distance between the grasp point and the object, m.
    pub grasp_tol: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            admittance: AdmittanceParams::default(),
            slip_sigma: 0.005,
            slip_clip: 0.015,
            speed: 0.1,
            angular_speed: 1.0,
            contact_tol: 0.001,
            grasp_tol: 0.02,
        }
    }
}

impl SimParams {
    /// Exact execution: no force noise, no slip.
    pub fn noiseless() -> Self {
        Self { admittance: AdmittanceParams { noise: 0.0, ..Default::default() }, slip_sigma: 0.0, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum FailureInjection {
    #[default]
    Never,
    Forced,
    /// Failure with this probability per executed trajectory.
    Probability(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Object {
    Wrapper,
    Seal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Grasp { hand: Hand, object: Object },
    GraspMissed { hand: Hand, object: Object },
    Contact { hand: Hand, face: Face },
    /// A guarded segment stopped on contact.
    Collision { hand: Hand, face: Face, position: Vec3 },
    /// Measured wrapper tension, N.
    Tension { newtons: f64 },
    Covered { face: Face },
    Drop { object: Object },
    Attach { fixing: bool },
    Released { hand: Hand },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<(f64, Event)>,
    /// Hand positions actually reached, one per executed waypoint.
    pub path: Vec<Vec3>,
    /// Whether the failure injection fired.
    pub injected: bool,
}

impl EventLog {
    fn push(&mut self, time: f64, e: Event) {
        log::debug!("t={time:.3} {e:?}");
        self.events.push((time, e));
    }

    pub fn has(&self, pred: impl Fn(&Event) -> bool) -> bool {
        self.events.iter().any(|(_, e)| pred(e))
    }
}

/// Executes `traj` on a copy of `world`.
///
/// Hands move waypoint to waypoint. Guarded segments stop where the hand
/// first touches the target (bisected to within `contact_tol`). Admittance
/// arcs keep the wrapper taut at the setpoint force plus measurement noise.
/// An injected failure makes the trajectory's object handling fail: the
/// object falls back to its resting pose and a drop event is logged.
pub fn simulate(
    world: &WorldState,
    traj: &Trajectory,
    params: &SimParams,
    seed: u64,
    injection: FailureInjection,
) -> (WorldState, EventLog) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roll: f64 = rng.random();
    let injected = match injection {
        FailureInjection::Never => false,
        FailureInjection::Forced => true,
        FailureInjection::Probability(p) => roll < p,
    };
    let mut w = world.clone();
    let mut log = EventLog { injected, ..Default::default() };
    let start = w.hand(traj.hand).pose;

    let mut contact: Option<(Face, Vec3)> = None;
    let mut reached = 0;
    for wp in &traj.waypoints {
        let from = w.hand(traj.hand).pose;
        let mut to = wp.pose;
        if wp.segment == Segment::Guarded && w.target.signed_distance(&to.position) < 0.0 {
            let hit = bisect_contact(&w, &from, &wp.pose, params.contact_tol);
            to = hit;
            let (face, _) = w.target.nearest_face(&to.position);
            contact = Some((face, to.position));
        }
        w.time += travel_time(&from, &to, params) + wp.dwell;
        let hs = w.hand_mut(traj.hand);
        hs.pose = to;
        hs.gripper = wp.gripper;
        if w.hand(traj.hand).holding == Holding::Seal {
            w.seal.pose.position = to.position;
        }
        log.path.push(to.position);
        reached += 1;
        if let Some((face, position)) = contact {
            log.push(w.time, Event::Collision { hand: traj.hand, face, position });
            break;
        }
    }
    log::trace!("{reached} of {} waypoints executed", traj.waypoints.len());

    match &traj.action {
        Action::HoldTarget { face } => {
            let hs = w.hand_mut(traj.hand);
            hs.holding = Holding::Pressing(*face);
            log.push(w.time, Event::Contact { hand: traj.hand, face: *face });
        }
        Action::ScoopLift => {
            let scoop = traj.waypoints.get(1).map_or(start.position, |wp| wp.pose.position);
            let edge = w.wrapper.cbbox.edge_by_label("ab").expect("valid label");
            let near = point_segment_distance(&scoop, &edge.endpoints[0], &edge.endpoints[1]) <= params.grasp_tol;
            if near && !injected && w.wrapper.hold == WrapperHold::Free {
                w.wrapper.hold = WrapperHold::Grasped;
                w.hand_mut(traj.hand).holding = Holding::Wrapper;
                log.push(w.time, Event::Grasp { hand: traj.hand, object: Object::Wrapper });
            } else {
                log.push(w.time, Event::GraspMissed { hand: traj.hand, object: Object::Wrapper });
                if injected {
                    log.push(w.time, Event::Drop { object: Object::Wrapper });
                }
            }
        }
        Action::CoverArc { edge, axis, .. } => {
            if w.wrapper.hold != WrapperHold::Grasped {
                return (w, log);
            }
            if injected {
                drop_wrapper(&mut w, traj.hand, &mut log);
                return (w, log);
            }
            let a = &params.admittance;
            let stretch = a.force / a.stiffness;
            let noise = if a.noise > 0.0 { Normal::new(0.0, a.noise).expect("finite sigma").sample(&mut rng) } else { 0.0 };
            log.push(w.time, Event::Tension { newtons: a.stiffness * stretch + noise });
            w.wrapper.tension = true;

            let seg = w.target.edge(*edge);
            let center = seg.midpoint();
            let dir = seg.direction().expect("box edges have positive length");
            let r0 = start.position - center;
            let r1 = w.hand(traj.hand).pose.position - center;
            let swept = signed_angle(&r0, &r1, axis);
            for face in edge.faces() {
                let mut to_face = w.target.face(face).center() - center;
                to_face -= dir * dir.dot(&to_face);
                let phi = signed_angle(&r0, &to_face, axis);
                let passed = phi > 0.0 && phi <= swept + 1e-6;
                let touched = contact.is_some_and(|(f, _)| f == face);
                if (passed || touched) && !w.wrapper.covered.contains(&face) {
                    w.wrapper.covered.push(face);
                    log.push(w.time, Event::Covered { face });
                }
            }
        }
        Action::ReleaseFinger { constraint: Constraint::Target } => {
            if w.wrapper.hold != WrapperHold::Grasped {
                return (w, log);
            }
            if injected {
                drop_wrapper(&mut w, traj.hand, &mut log);
                return (w, log);
            }
            let slip = if params.slip_sigma > 0.0 {
                Normal::new(0.0, params.slip_sigma).expect("finite sigma").sample(&mut rng)
            } else {
                0.0
            };
            w.wrapper.slip = slip.clamp(-params.slip_clip, params.slip_clip);
            w.wrapper.hold = WrapperHold::Pressed;
            w.wrapper.tension = false;
            let (face, _) = w.target.nearest_face(&w.hand(traj.hand).pose.position);
            w.hand_mut(traj.hand).holding = Holding::Pressing(face);
            log.push(w.time, Event::Released { hand: traj.hand });
            log.push(w.time, Event::Contact { hand: traj.hand, face });
        }
        Action::ReleaseFinger { constraint: Constraint::Seal { normal, edge_dir, .. } } => {
            if !w.seal.held {
                return (w, log);
            }
            if injected {
                drop_seal(&mut w, traj.hand, &mut log);
                return (w, log);
            }
            let pos = w.hand(traj.hand).pose.position;
            let n = normal.normalize();
            let across = n.cross(edge_dir).normalize();
            let rot = super::hand_frame(&n, &n.cross(&across));
            w.seal.pose = Pose::new(pos, rot);
            w.seal.held = false;
            w.seal.attached = true;
            let fixing = seal_fixes_wrapper(&w);
            w.seal.fixing = fixing;
            if fixing && w.wrapper.hold == WrapperHold::Pressed {
                w.wrapper.hold = WrapperHold::Sealed;
            }
            let (face, _) = w.target.nearest_face(&pos);
            w.hand_mut(traj.hand).holding = Holding::Pressing(face);
            log.push(w.time, Event::Released { hand: traj.hand });
            log.push(w.time, Event::Attach { fixing });
        }
        Action::GripSeal => {
            let grasp = traj.waypoints.get(2).map_or(start.position, |wp| wp.pose.position);
            let d = (grasp - w.seal.pose.position).xy().norm();
            if d <= params.grasp_tol && !injected && !w.seal.attached && !w.seal.held {
                w.seal.held = true;
                w.seal.pose.position = w.hand(traj.hand).pose.position;
                w.hand_mut(traj.hand).holding = Holding::Seal;
                log.push(w.time, Event::Grasp { hand: traj.hand, object: Object::Seal });
            } else {
                log.push(w.time, Event::GraspMissed { hand: traj.hand, object: Object::Seal });
                if injected {
                    log.push(w.time, Event::Drop { object: Object::Seal });
                }
            }
        }
        Action::Retract => {
            match w.hand(traj.hand).holding {
                Holding::Wrapper => drop_wrapper(&mut w, traj.hand, &mut log),
                Holding::Seal => drop_seal(&mut w, traj.hand, &mut log),
                Holding::Pressing(_) if traj.hand == Hand::Right && w.wrapper.hold == WrapperHold::Pressed => {
                    drop_wrapper(&mut w, traj.hand, &mut log)
                }
                _ => {}
            }
            let hs = w.hand_mut(traj.hand);
            hs.holding = Holding::Nothing;
            hs.gripper = Gripper::Open;
            log.push(w.time, Event::Released { hand: traj.hand });
        }
    }
    (w, log)
}

fn drop_wrapper(w: &mut WorldState, hand: Hand, log: &mut EventLog) {
    w.wrapper = WrapperState::resting(w.wrapper.rest);
    let hs = w.hand_mut(hand);
    if hs.holding == Holding::Wrapper || matches!(hs.holding, Holding::Pressing(_)) {
        hs.holding = Holding::Nothing;
    }
    hs.gripper = Gripper::Open;
    log.push(w.time, Event::Drop { object: Object::Wrapper });
}

fn drop_seal(w: &mut WorldState, hand: Hand, log: &mut EventLog) {
    w.seal.pose = w.seal.rest;
    w.seal.held = false;
    w.seal.attached = false;
    w.seal.fixing = false;
    let hs = w.hand_mut(hand);
    hs.holding = Holding::Nothing;
    hs.gripper = Gripper::Open;
    log.push(w.time, Event::Drop { object: Object::Seal });
}

/// Whether the attached tape lies on the target and spans the wrapper's free
/// end with at least 5 mm on each side.
fn seal_fixes_wrapper(w: &WorldState) -> bool {
    if !matches!(w.wrapper.hold, WrapperHold::Pressed | WrapperHold::Sealed) {
        return false;
    }
    let Some(plan) = w.actual_cover() else { return false };
    let edge = plan.free_edge();
    let c = w.seal.pose.position;
    if w.target.signed_distance(&c).abs() > 0.01 {
        return false;
    }
    let (a, b) = (edge.endpoints[0], edge.endpoints[1]);
    let ab = b - a;
    let t = (c - a).dot(&ab) / ab.norm_squared();
    if !(0.0..=1.0).contains(&t) {
        return false;
    }
    let long = w.seal.pose.orientation * Vec3::y();
    let cross = ((c - a) - ab * t).norm();
    let spans = long.dot(&ab.normalize()).abs() < 0.5;
    spans && cross <= w.seal.length * 0.5 - 0.005
}

fn bisect_contact(w: &WorldState, from: &Pose<f64>, to: &Pose<f64>, tol: f64) -> Pose<f64> {
    let at = |t: f64| {
        let p = from.position.lerp(&to.position, t);
        let q = from.orientation.try_slerp(&to.orientation, t, 1e-9).unwrap_or(to.orientation);
        Pose::new(p, q)
    };
    if w.target.signed_distance(&from.position) <= 0.0 {
        return *from;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while (hi - lo) * (to.position - from.position).norm() > tol * 0.1 {
        let mid = 0.5 * (lo + hi);
        if w.target.signed_distance(&at(mid).position) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(lo)
}

fn travel_time(from: &Pose<f64>, to: &Pose<f64>, p: &SimParams) -> f64 {
    let d = (to.position - from.position).norm();
    let a = from.orientation.angle_to(&to.orientation);
    (d / p.speed).max(a / p.angular_speed)
}

fn signed_angle(from: &Vec3, to: &Vec3, axis: &Vec3) -> f64 {
    from.cross(to).dot(axis).atan2(from.dot(to))
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = if ab.norm_squared() > 0.0 { ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}
