use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Gripper;
use crate::cloud::Plane;
use crate::geometry::{ColoredBBox, CoverPlan, Face, OrientedBox, Pose, Rgb, SealCmp};
use crate::Vec3;

/// True target geometry; cylinders are modeled by their circumscribing box
/// everywhere except in synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetShape {
    Box { size: Vec3 },
    Cylinder { radius: f64, height: f64 },
}

impl TargetShape {
    pub fn bounding_size(&self) -> Vec3 {
        match *self {
            TargetShape::Box { size } => size,
            TargetShape::Cylinder { radius, height } => Vector3::new(2.0 * radius, 2.0 * radius, height),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "face", rename_all = "snake_case")]
pub enum Holding {
    Nothing,
    Wrapper,
    Seal,
    /// Pressing a target face.
    Pressing(Face),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub pose: Pose<f64>,
    pub gripper: Gripper,
    pub holding: Holding,
}

impl HandState {
    pub fn idle(position: Vec3) -> Self {
        Self { pose: Pose::from_position(position), gripper: Gripper::Open, holding: Holding::Nothing }
    }

    pub fn is_free(&self) -> bool {
        self.holding == Holding::Nothing
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapperHold {
    /// Lying where it was put.
    Free,
    /// Pinched by the right hand.
    Grasped,
    /// Released onto the target, kept down by a hand.
    Pressed,
    /// Fixed by the seal.
    Sealed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperState {
    pub cbbox: ColoredBBox<f64>,
    /// Pose the sheet falls back to when dropped.
    pub rest: ColoredBBox<f64>,
    /// Covered target faces in covering order.
    pub covered: Vec<Face>,
    pub hold: WrapperHold,
    pub tension: bool,
    /// Signed distance the free end ends up past its planned position, m.
    pub slip: f64,
}

impl WrapperState {
    pub fn resting(cbbox: ColoredBBox<f64>) -> Self {
        Self { cbbox, rest: cbbox, covered: Vec::new(), hold: WrapperHold::Free, tension: false, slip: 0.0 }
    }

    pub fn is_covering(&self) -> bool {
        !self.covered.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SealState {
    pub color: Rgb,
    /// Tape center; local z is the tape normal, local y its long axis.
    pub pose: Pose<f64>,
    pub rest: Pose<f64>,
    pub width: f64,
    pub length: f64,
    pub held: bool,
    pub attached: bool,
    /// Attached across the wrapper's free edge.
    pub fixing: bool,
}

impl SealState {
    pub fn resting(color: Rgb, pose: Pose<f64>, width: f64, length: f64) -> Self {
        Self { color, pose, rest: pose, width, length, held: false, attached: false, fixing: false }
    }

    pub fn cmp(&self) -> SealCmp<f64> {
        SealCmp { color: self.color, mean_point: self.pose.position }
    }
}

/// Complete simulated world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub target: OrientedBox<f64>,
    pub shape: TargetShape,
    pub target_color: Rgb,
    pub wrapper: WrapperState,
    pub seal: SealState,
    pub left: HandState,
    pub right: HandState,
    pub table: Plane<f64>,
    /// Simulated seconds since the world was created.
    pub time: f64,
}

impl WorldState {
    pub fn hand(&self, hand: Hand) -> &HandState {
        match hand {
            Hand::Left => &self.left,
            Hand::Right => &self.right,
        }
    }

    pub fn hand_mut(&mut self, hand: Hand) -> &mut HandState {
        match hand {
            Hand::Left => &mut self.left,
            Hand::Right => &mut self.right,
        }
    }

    /// How the true wrapper unrolls over the true target.
    pub fn cover_plan(&self) -> Option<CoverPlan<f64>> {
        CoverPlan::new(&self.target, &self.wrapper.rest)
    }

    /// The cover plan with the free end displaced by the recorded slip.
    pub fn actual_cover(&self) -> Option<CoverPlan<f64>> {
        self.cover_plan().map(|p| p.with_reach(p.reach + self.wrapper.slip))
    }

    /// Checks the cross-field invariants.
    pub fn check(&self) -> Result<(), String> {
        let w = &self.wrapper;
        if w.tension && !matches!(w.hold, WrapperHold::Grasped | WrapperHold::Sealed) {
            return Err("tension without grasp or seal".into());
        }
        let mut seen = Vec::new();
        for f in &w.covered {
            if seen.contains(f) {
                return Err(format!("face {f} covered twice"));
            }
            seen.push(*f);
        }
        if (w.hold == WrapperHold::Grasped) != (self.right.holding == Holding::Wrapper) {
            return Err("wrapper grasp and right hand disagree".into());
        }
        if self.seal.held != (self.left.holding == Holding::Seal) {
            return Err("seal grasp and left hand disagree".into());
        }
        Ok(())
    }
}
