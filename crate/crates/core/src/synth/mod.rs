//! Deterministic synthetic scenes: target, wrapper sheet, seal tape and table
//! as colored point clouds and top-down images with ground truth.

mod surface;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Plane, PointCloud};
use crate::control::{
    HandState, Holding, SealState, TargetShape, WorldState, WrapperHold, WrapperState, HOME_LEFT, HOME_RIGHT,
};
use crate::geometry::{ColoredBBox, EdgeSegment, Face, OrientedBox, Pose, Rgb};
use crate::recognition::{predict_covered_cloud, SceneImage};
use crate::Vec3;
use surface::{Drape, Mask, Part, Shape};
pub use surface::{FOLD_RADIUS, SHEET_THICKNESS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub shape: TargetShape,
    /// Center of the footprint on the table.
    pub position: [f64; 2],
    pub yaw: f64,
    pub color: Rgb,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperConfig {
    pub width: f64,
    pub length: f64,
    pub color: Rgb,
    /// Sheet center relative to the target center, target frame.
    #[serde(default)]
    pub offset: [f64; 2],
    /// Sheet yaw relative to the target.
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SealConfig {
    pub color: Rgb,
    /// Tape center on the table.
    pub position: [f64; 2],
    #[serde(default)]
    pub yaw: f64,
    pub width: f64,
    pub length: f64,
}

/// Outward bump of the draped sheet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BulgeSpec {
    /// Peak displacement, m.
    pub amplitude: f64,
    /// Bump area over covered sheet area.
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    /// Points per square meter.
    pub density: f64,
    /// Standard deviation of the range noise along the surface normal, m.
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub target: TargetConfig,
    pub wrapper: WrapperConfig,
    pub seal: SealConfig,
    pub table_color: Rgb,
    /// Table rectangle `[x_min, x_max, y_min, y_max]`.
    pub table_extent: [f64; 4],
    pub density: f64,
    pub noise: f64,
    #[serde(default)]
    pub bulge: BulgeSpec,
    /// Number of flat distractor stickers on the table.
    #[serde(default)]
    pub clutter: usize,
    /// Image resolution, m per pixel.
    pub resolution: f64,
    pub seed: u64,
}

pub const TARGET_COLOR: Rgb = Rgb::new(150, 110, 70);
pub const WRAPPER_COLOR: Rgb = Rgb::new(200, 40, 40);
pub const SEAL_COLOR: Rgb = Rgb::new(40, 80, 200);
pub const TABLE_COLOR: Rgb = Rgb::new(120, 120, 120);
const CLUTTER_COLORS: [Rgb; 4] =
    [Rgb::new(60, 170, 60), Rgb::new(220, 200, 40), Rgb::new(160, 60, 180), Rgb::new(40, 170, 170)];

impl SceneConfig {
    /// Box of 14.5 x 21.5 x 11.5 cm on a 17.5 x 60 cm sheet, 3 cm tape.
    pub fn paper_box() -> Self {
        Self {
            target: TargetConfig {
                shape: TargetShape::Box { size: Vec3::new(0.145, 0.215, 0.115) },
                position: [0.0, 0.0],
                yaw: 0.0,
                color: TARGET_COLOR,
            },
            wrapper: WrapperConfig { width: 0.175, length: 0.60, color: WRAPPER_COLOR, offset: [0.0, 0.0], yaw: 0.0 },
            seal: SealConfig { color: SEAL_COLOR, position: [0.2, 0.2], yaw: 0.0, width: 0.03, length: 0.06 },
            table_color: TABLE_COLOR,
            table_extent: [-0.25, 0.35, -0.40, 0.40],
            density: 1.0e5,
            noise: 0.00125,
            bulge: BulgeSpec::default(),
            clutter: 0,
            resolution: 0.001,
            seed: 0,
        }
    }

    /// Cylinder of radius 9 cm and height 20 cm.
    pub fn paper_cylinder() -> Self {
        let mut c = Self::paper_box();
        c.target.shape = TargetShape::Cylinder { radius: 0.09, height: 0.20 };
        c.wrapper.width = 0.25;
        c.wrapper.length = 0.70;
        c.table_extent = [-0.30, 0.35, -0.45, 0.45];
        c
    }

    pub fn sampling(&self) -> Sampling {
        Sampling { density: self.density, noise: self.noise }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        let size = self.target.shape.bounding_size();
        if !size.iter().all(|v| v.is_finite() && *v > 0.0) {
            return bad("target size must be positive");
        }
        let w = &self.wrapper;
        if !(w.width > 0.0 && w.length > 0.0 && w.width.is_finite() && w.length.is_finite()) {
            return bad("wrapper size must be positive");
        }
        if !(self.seal.width > 0.0 && self.seal.length > 0.0) {
            return bad("seal size must be positive");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.bulge.fraction) || !(self.bulge.amplitude >= 0.0) {
            return bad("bulge fraction must be in [0, 1] and amplitude non-negative");
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return bad("resolution must be positive");
        }
        let [x0, x1, y0, y1] = self.table_extent;
        if !(x1 > x0 && y1 > y0) {
            return bad("table extent is empty");
        }
        let world = initial_world(self)?;
        if let TargetShape::Box { .. } = self.target.shape {
            if world.cover_plan().is_none() {
                return bad("wrapper does not extend past the target");
            }
        } else if w.length <= size.y {
            return bad("wrapper does not extend past the target");
        }
        Ok(())
    }

    fn target_box(&self) -> Result<OrientedBox<f64>, SynthError> {
        let size = self.target.shape.bounding_size();
        let [x, y] = self.target.position;
        OrientedBox::new(Pose::from_yaw(Vec3::new(x, y, size.z * 0.5), self.target.yaw), size)
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Target,
    Wrapper,
    Seal,
    Table,
    Clutter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True box, or the circumscribing box of a cylinder.
    pub target: OrientedBox<f64>,
    pub shape: TargetShape,
    pub wrapper: ColoredBBox<f64>,
    pub seal: Pose<f64>,
    /// One label per cloud point.
    pub labels: Vec<Label>,
    /// Where the wrapper's free end lies once covered.
    pub fold_edge: Option<EdgeSegment<f64>>,
    pub covered: Vec<Face>,
}

/// Initial world of a scene: sheet flat on the table under the target, tape
/// on the table, both hands at home.
pub fn initial_world(config: &SceneConfig) -> Result<WorldState, SynthError> {
    let target = config.target_box()?;
    let w = &config.wrapper;
    let center = target.pose.transform_point(&Vec3::new(w.offset[0], w.offset[1], 0.0));
    let pose = Pose::from_yaw(Vec3::new(center.x, center.y, 0.0), config.target.yaw + w.yaw);
    let sheet = ColoredBBox::new(pose, w.width, w.length, w.color).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let s = &config.seal;
    let seal_pose = Pose::from_yaw(Vec3::new(s.position[0], s.position[1], 0.0), s.yaw);
    Ok(WorldState {
        target,
        shape: config.target.shape,
        target_color: config.target.color,
        wrapper: WrapperState::resting(sheet),
        seal: SealState::resting(s.color, seal_pose, s.width, s.length),
        left: HandState::idle(Vec3::from(HOME_LEFT)),
        right: HandState::idle(Vec3::from(HOME_RIGHT)),
        table: Plane::from_point_normal(&Vec3::zeros(), &Vec3::z()),
        time: 0.0,
    })
}

/// The scene's initial world with its capture, image and ground truth.
pub fn synth_scene(
    config: &SceneConfig,
) -> Result<(WorldState, PointCloud<f64>, SceneImage<f64>, GroundTruth), SynthError> {
    config.validate()?;
    let world = initial_world(config)?;
    let (cloud, labels) = capture(&world, config, 0)?;
    let image = render_views(&world, config)?;
    let gt = ground_truth(&world, labels);
    Ok((world, cloud, image, gt))
}

pub fn ground_truth(world: &WorldState, labels: Vec<Label>) -> GroundTruth {
    GroundTruth {
        target: world.target,
        shape: world.shape,
        wrapper: world.wrapper.rest,
        seal: world.seal.pose,
        labels,
        fold_edge: world.actual_cover().map(|p| p.free_edge()),
        covered: world.wrapper.covered.clone(),
    }
}

/// The world after a complete cover: the sheet pressed over the planned
/// strip, its free end displaced by `slip`.
pub fn covered_world(world: &WorldState, slip: f64) -> Result<WorldState, SynthError> {
    if !matches!(world.shape, TargetShape::Box { .. }) {
        return Err(SynthError::Unsupported("covering a cylinder"));
    }
    let plan = world.cover_plan().ok_or_else(|| SynthError::InvalidCover("sheet does not reach the target".into()))?;
    let mut w = world.clone();
    w.wrapper.slip = slip;
    w.wrapper.covered = plan.faces();
    w.wrapper.hold = WrapperHold::Pressed;
    w.wrapper.tension = false;
    let top = w.target.face(Face::Abcd);
    let contact = w.actual_cover().map(|p| p.free_edge().midpoint()).unwrap_or_else(|| top.center());
    w.right = HandState { pose: Pose::from_position(contact), holding: Holding::Pressing(Face::Abcd), ..w.right };
    Ok(w)
}

/// Pre- and post-wrap clouds of the region a complete cover occupies, as
/// compared by the wrap-quality metric. The post capture drapes the sheet
/// with the config's bulge and no slip.
pub fn wrap_pair(config: &SceneConfig) -> Result<(PointCloud<f64>, PointCloud<f64>), SynthError> {
    config.validate()?;
    let world = initial_world(config)?;
    let (pre, _) = capture(&world, config, 1)?;
    let (post, _) = capture(&covered_world(&world, 0.0)?, config, 2)?;
    let region = |c: &PointCloud<f64>| {
        predict_covered_cloud(c, &world.target, &world.wrapper.rest).map_err(|e| SynthError::InvalidCover(e.to_string()))
    };
    Ok((region(&pre)?, region(&post)?))
}

/// Point cloud of the sheet draped over `faces`, which must be a connected
/// prefix of the strip the sheet unrolls over.
pub fn drape_wrapper(
    world: &WorldState,
    faces: &[Face],
    bulge: &BulgeSpec,
    sampling: Sampling,
    seed: u64,
) -> Result<PointCloud<f64>, SynthError> {
    let drape = drape_over(world, faces, Some(bulge))?;
    let part = Part::new(Shape::Drape(drape), Label::Wrapper, world.wrapper.rest.color);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cloud, _) = sample_parts(&[part], sampling, &mut rng);
    Ok(cloud)
}

fn drape_over(world: &WorldState, faces: &[Face], bulge: Option<&BulgeSpec>) -> Result<Drape, SynthError> {
    if !matches!(world.shape, TargetShape::Box { .. }) {
        return Err(SynthError::Unsupported("covering a cylinder"));
    }
    if faces.is_empty() {
        return Err(SynthError::InvalidCover("no faces".into()));
    }
    if !connected(faces) {
        return Err(SynthError::InvalidCover("faces are not connected".into()));
    }
    let plan = world.actual_cover().ok_or_else(|| SynthError::InvalidCover("sheet does not reach the target".into()))?;
    let nominal = world.cover_plan().expect("actual plan implies nominal plan");
    let order = nominal.faces();
    let strip_faces = [nominal.entry, Face::Abcd, nominal.entry.opposite()];
    let mut sorted: Vec<Face> = faces.to_vec();
    sorted.sort_by_key(|f| strip_faces.iter().position(|g| g == f).unwrap_or(usize::MAX));
    sorted.dedup();
    if sorted.len() != faces.len() || sorted.iter().zip(strip_faces.iter()).any(|(a, b)| a != b) {
        return Err(SynthError::InvalidCover("faces are not reachable by unrolling the sheet".into()));
    }
    if sorted.len() > order.len() + 1 {
        return Err(SynthError::InvalidCover("sheet is too short for these faces".into()));
    }
    let last = &plan.pieces[(sorted.len() - 1).min(plan.pieces.len() - 1)];
    let s_end = last.start + last.covered;
    Ok(Drape::new(plan, s_end, bulge))
}

fn connected(faces: &[Face]) -> bool {
    let mut seen = vec![faces[0]];
    let mut frontier = vec![faces[0]];
    while let Some(f) = frontier.pop() {
        for g in faces {
            if !seen.contains(g) && f.is_adjacent(*g) {
                seen.push(*g);
                frontier.push(*g);
            }
        }
    }
    faces.iter().all(|f| seen.contains(f))
}

/// Fused capture of every visible surface of `world`, with one label per point.
pub fn capture(world: &WorldState, config: &SceneConfig, salt: u64) -> Result<(PointCloud<f64>, Vec<Label>), SynthError> {
    let parts = scene_parts(world, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt);
    Ok(sample_parts(&parts, config.sampling(), &mut rng))
}

fn sample_parts(parts: &[Part], sampling: Sampling, rng: &mut ChaCha8Rng) -> (PointCloud<f64>, Vec<Label>) {
    let spacing = 1.0 / sampling.density.sqrt();
    let normal = (sampling.noise > 0.0).then(|| Normal::new(0.0, sampling.noise).expect("finite sigma"));
    let mut raw: Vec<(Vec3, Vec3, usize)> = Vec::new();
    for (k, part) in parts.iter().enumerate() {
        part.sample(spacing, Some(&mut *rng), &mut |p, n| raw.push((p, n, k)));
    }
    let mut points = Vec::with_capacity(raw.len());
    let mut colors = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    for (p, n, k) in raw {
        let d = normal.map_or(0.0, |g| g.sample(rng));
        points.push(p + n * d);
        colors.push(parts[k].color);
        labels.push(parts[k].label);
    }
    (PointCloud::with_colors(points, colors).expect("parallel attributes"), labels)
}

/// Orthographic top-down view over the table extent: per pixel the color
/// and the 3D point of the highest surface.
pub fn render_views(world: &WorldState, config: &SceneConfig) -> Result<SceneImage<f64>, SynthError> {
    let parts = scene_parts(world, config)?;
    let res = config.resolution;
    let [x0, x1, y0, y1] = config.table_extent;
    let width = ((x1 - x0) / res).round() as usize;
    let height = ((y1 - y0) / res).round() as usize;
    let mut img = SceneImage::blank(width, height, config.table_color);
    let mut zbuf = vec![0.0f64; width * height];
    for py in 0..height {
        for px in 0..width {
            let i = img.index(px, py);
            img.lookup[i] = Some(Vec3::new(x0 + (px as f64 + 0.5) * res, y1 - (py as f64 + 0.5) * res, 0.0));
        }
    }
    for part in parts.iter().filter(|p| p.label != Label::Table) {
        part.sample(res * 0.5, None, &mut |p, _| {
            let fx = (p.x - x0) / res;
            let fy = (y1 - p.y) / res;
            if fx < 0.0 || fy < 0.0 {
                return;
            }
            let (px, py) = (fx as usize, fy as usize);
            if px >= width || py >= height {
                return;
            }
            let i = py * width + px;
            if p.z > zbuf[i] {
                zbuf[i] = p.z;
                img.rgb[i] = part.color;
                img.lookup[i] = Some(Vec3::new(x0 + (px as f64 + 0.5) * res, y1 - (py as f64 + 0.5) * res, p.z));
            }
        });
    }
    Ok(img)
}

/// A flat sticker on the table.
#[derive(Clone, Copy, Debug)]
struct Sticker {
    pose: Pose<f64>,
    size: Vector2<f64>,
    color: Rgb,
}

fn clutter(config: &SceneConfig, world: &WorldState) -> Vec<Sticker> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xC1u64.rotate_left(56));
    let [x0, x1, y0, y1] = config.table_extent;
    let mut out: Vec<Sticker> = Vec::new();
    let target_r = world.target.size.xy().norm() * 0.5 + 0.03;
    let seal_r = 0.5 * Vector2::new(world.seal.width, world.seal.length).norm() + 0.03;
    let mut attempts = 0;
    while out.len() < config.clutter && attempts < 1000 {
        attempts += 1;
        let size = Vector2::new(rng.random_range(0.03..0.06), rng.random_range(0.02..0.05));
        let r = size.norm() * 0.5;
        let c = Vec3::new(rng.random_range(x0 + r + 0.01..x1 - r - 0.01), rng.random_range(y0 + r + 0.01..y1 - r - 0.01), 0.0);
        let yaw = rng.random_range(0.0..std::f64::consts::PI);
        let clear_target = (c - world.target.center()).xy().norm() > target_r + r;
        let clear_seal = (c - world.seal.rest.position).xy().norm() > seal_r + r;
        let sheet = &world.wrapper.rest;
        let local = sheet.pose.inverse_transform_point(&c);
        let clear_sheet = local.x.abs() > sheet.width * 0.5 + r + 0.01 || local.y.abs() > sheet.length * 0.5 + r + 0.01;
        let clear_others = out.iter().all(|s| (s.pose.position - c).norm() > s.size.norm() * 0.5 + r + 0.01);
        if clear_target && clear_seal && clear_sheet && clear_others {
            out.push(Sticker { pose: Pose::from_yaw(c, yaw), size, color: CLUTTER_COLORS[out.len() % CLUTTER_COLORS.len()] });
        }
    }
    out
}

fn rect_quad(pose: &Pose<f64>, w: f64, l: f64, lift: f64) -> Shape {
    let x = pose.transform_vector(&Vec3::x()) * w;
    let y = pose.transform_vector(&Vec3::y()) * l;
    let z = pose.transform_vector(&Vec3::z());
    Shape::Quad { origin: pose.position - x * 0.5 - y * 0.5 + z * lift, u: x, v: y }
}

fn in_rect(pose: Pose<f64>, w: f64, l: f64, depth: f64) -> impl Fn(&Vec3) -> bool {
    move |p| {
        let q = pose.inverse_transform_point(p);
        q.x.abs() <= w * 0.5 && q.y.abs() <= l * 0.5 && q.z.abs() <= depth
    }
}

/// Everything visible in `world`, with occlusion masks.
fn scene_parts(world: &WorldState, config: &SceneConfig) -> Result<Vec<Part>, SynthError> {
    let target = world.target;
    let half = target.half_size();
    let mut parts = Vec::new();

    // Sheet state.
    let sheet = world.wrapper.rest;
    let plan = world.cover_plan();
    let mut drape: Option<Drape> = None;
    let mut ribbon: Option<Shape> = None;
    let lifted = world.wrapper.hold != WrapperHold::Free && plan.is_some();
    if let Some(plan) = plan.as_ref().filter(|_| lifted) {
        let (_, l) = plan.local_axes();
        let lateral = target.pose.transform_vector(&l);
        match world.wrapper.hold {
            WrapperHold::Grasped => {
                let hand = world.right.pose.position;
                let covered = &world.wrapper.covered;
                let n = covered.len().min(plan.pieces.len());
                let mut s_a = if n == 0 { 0.0 } else { (plan.pieces[n - 1].start + plan.pieces[n - 1].face_length).min(plan.reach) };
                let on_surface = n > 0 && world.target.signed_distance(&hand).abs() < 0.01;
                if on_surface {
                    if let Some((s, _)) = surface::strip_coord(plan, &hand) {
                        s_a = s.min(plan.reach);
                    }
                }
                let d = Drape::new(plan.clone(), s_a, None);
                if !on_surface {
                    let (t0, t1) = plan.lateral;
                    let tm = 0.5 * (t0 + t1);
                    let (b0, _) = d.point(s_a, t0);
                    let (b1, _) = d.point(s_a, t1);
                    let h0 = hand + lateral * (t0 - tm);
                    ribbon = Some(Shape::Quad { origin: b0, u: b1 - b0, v: h0 - b0 });
                }
                if s_a > 0.0 {
                    drape = Some(d);
                }
            }
            WrapperHold::Pressed | WrapperHold::Sealed => {
                let actual = plan.with_reach(plan.reach + world.wrapper.slip);
                let s_end = actual.reach.min(actual.strip_capacity());
                drape = Some(Drape::new(actual, s_end, Some(&config.bulge)));
            }
            WrapperHold::Free => {}
        }
    }
    let beyond_entry: Option<Mask> = plan.as_ref().filter(|_| lifted).map(|plan| {
        let (e, _) = plan.local_axes();
        let he = half.dot(&e.abs());
        let tp = target.pose;
        Box::new(move |p: &Vec3| tp.inverse_transform_point(p).dot(&e) > he) as Mask
    });

    // Table.
    let [x0, x1, y0, y1] = config.table_extent;
    let stickers = clutter(config, world);
    let mut table = Part::new(
        Shape::Quad { origin: Vec3::new(x0, y0, 0.0), u: Vec3::new(x1 - x0, 0.0, 0.0), v: Vec3::new(0.0, y1 - y0, 0.0) },
        Label::Table,
        config.table_color,
    );
    table = table.mask(footprint_mask(world));
    {
        let in_sheet = in_rect(sheet.pose, sheet.width, sheet.length, 0.01);
        let beyond = plan.as_ref().filter(|_| lifted).map(|plan| {
            let (e, _) = plan.local_axes();
            let he = half.dot(&e.abs());
            let tp = target.pose;
            move |p: &Vec3| tp.inverse_transform_point(p).dot(&e) > he
        });
        table = table.mask(Box::new(move |p| in_sheet(p) && !beyond.as_ref().is_some_and(|b| b(p))));
    }
    let seal_on_table = !world.seal.held && !world.seal.attached;
    if seal_on_table {
        table = table.mask(Box::new(in_rect(world.seal.pose, world.seal.width, world.seal.length, 0.01)));
    }
    for s in &stickers {
        table = table.mask(Box::new(in_rect(s.pose, s.size.x, s.size.y, 0.01)));
    }
    parts.push(table);

    // Clutter.
    for s in &stickers {
        parts.push(Part::new(rect_quad(&s.pose, s.size.x, s.size.y, 0.0005), Label::Clutter, s.color));
    }

    // Flat part of the sheet.
    let mut flat = Part::new(rect_quad(&sheet.pose, sheet.width, sheet.length, SHEET_THICKNESS), Label::Wrapper, sheet.color)
        .mask(footprint_mask(world));
    if let Some(b) = beyond_entry {
        flat = flat.mask(b);
    }
    parts.push(flat);
    if let Some(r) = ribbon {
        parts.push(Part::new(r, Label::Wrapper, sheet.color));
    }

    // Seal.
    let seal = &world.seal;
    let seal_lift = if seal.attached { 0.0015 } else { 0.0005 };
    parts.push(Part::new(rect_quad(&seal.pose, seal.width, seal.length, seal_lift), Label::Seal, seal.color));

    // Draped sheet.
    if let Some(d) = &drape {
        let mut p = Part::new(Shape::Drape(d.clone()), Label::Wrapper, sheet.color);
        if seal.attached {
            p = p.mask(Box::new(in_rect(seal.pose, seal.width, seal.length, 0.01)));
        }
        parts.push(p);
    }

    // Target.
    let target_color = world.target_color;
    match world.shape {
        TargetShape::Box { .. } => {
            for face in Face::ALL.into_iter().filter(|f| *f != Face::Efgh) {
                let q = target.face(face);
                let (mut u, mut v) = (q.corners[1] - q.corners[0], q.corners[3] - q.corners[0]);
                if u.cross(&v).dot(&q.normal) < 0.0 {
                    std::mem::swap(&mut u, &mut v);
                }
                let mut part = Part::new(Shape::Quad { origin: q.corners[0], u, v }, Label::Target, target_color);
                if let Some(d) = &drape {
                    let d = d.clone();
                    part = part.mask(Box::new(move |p| d.hides(p)));
                }
                if seal.attached {
                    part = part.mask(Box::new(in_rect(seal.pose, seal.width, seal.length, 0.01)));
                }
                parts.push(part);
            }
        }
        TargetShape::Cylinder { radius, height } => {
            let base = Vec3::new(target.center().x, target.center().y, 0.0);
            let mut top = Part::new(Shape::Disk { center: base + Vec3::z() * height, radius }, Label::Target, target_color);
            if seal.attached {
                top = top.mask(Box::new(in_rect(seal.pose, seal.width, seal.length, 0.01)));
            }
            parts.push(top);
            parts.push(Part::new(Shape::CylinderSide { base, radius, height }, Label::Target, target_color));
        }
    }
    Ok(parts)
}

fn footprint_mask(world: &WorldState) -> Mask {
    let target = world.target;
    let half = target.half_size();
    match world.shape {
        TargetShape::Box { .. } => Box::new(move |p: &Vec3| {
            let q = target.pose.inverse_transform_point(p);
            q.x.abs() <= half.x && q.y.abs() <= half.y
        }),
        TargetShape::Cylinder { radius, .. } => {
            let c = target.center();
            Box::new(move |p: &Vec3| (p - c).xy().norm() <= radius)
        }
    }
}
