use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{check_positive, GeometryError, Pose};
use crate::Real;

/// Labeled corner of the target box. `A..D` form the top face, `E..H` the
/// bottom face, with `A` directly above `E`, `B` above `F` and so on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vertex {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Vertex {
    pub const ALL: [Vertex; 8] = [
        Vertex::A,
        Vertex::B,
        Vertex::C,
        Vertex::D,
        Vertex::E,
        Vertex::F,
        Vertex::G,
        Vertex::H,
    ];

    /// Sign pattern of the corner in the box frame, in units of half-size.
    pub fn signs(self) -> [i8; 3] {
        match self {
            Vertex::A => [1, -1, 1],
            Vertex::B => [-1, -1, 1],
            Vertex::C => [-1, 1, 1],
            Vertex::D => [1, 1, 1],
            Vertex::E => [1, -1, -1],
            Vertex::F => [-1, -1, -1],
            Vertex::G => [-1, 1, -1],
            Vertex::H => [1, 1, -1],
        }
    }

    pub fn letter(self) -> char {
        (b'a' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Option<Vertex> {
        let c = c.to_ascii_lowercase();
        if ('a'..='h').contains(&c) {
            Some(Vertex::ALL[(c as u8 - b'a') as usize])
        } else {
            None
        }
    }
}

/// One of the six box faces, named by its corner labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Face {
    /// Top, +z.
    Abcd,
    /// Bottom, -z.
    Efgh,
    /// Robot-right side, -y.
    Abfe,
    /// Robot-left side, +y.
    Cdhg,
    /// Near side facing the robot, -x.
    Bcgf,
    /// Far side, +x.
    Adhe,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Abcd,
        Face::Efgh,
        Face::Abfe,
        Face::Cdhg,
        Face::Bcgf,
        Face::Adhe,
    ];

    pub fn vertices(self) -> [Vertex; 4] {
        use Vertex::*;
        match self {
            Face::Abcd => [A, B, C, D],
            Face::Efgh => [E, F, G, H],
            Face::Abfe => [A, B, F, E],
            Face::Cdhg => [C, D, H, G],
            Face::Bcgf => [B, C, G, F],
            Face::Adhe => [A, D, H, E],
        }
    }

    /// Outward normal in the box frame.
    pub fn local_normal<T: Real>(self) -> Vector3<T> {
        let (o, z) = (T::ONE, T::ZERO);
        match self {
            Face::Abcd => Vector3::new(z, z, o),
            Face::Efgh => Vector3::new(z, z, -o),
            Face::Abfe => Vector3::new(z, -o, z),
            Face::Cdhg => Vector3::new(z, o, z),
            Face::Bcgf => Vector3::new(-o, z, z),
            Face::Adhe => Vector3::new(o, z, z),
        }
    }

    /// The face sharing no vertex with this one.
    pub fn opposite(self) -> Face {
        match self {
            Face::Abcd => Face::Efgh,
            Face::Efgh => Face::Abcd,
            Face::Abfe => Face::Cdhg,
            Face::Cdhg => Face::Abfe,
            Face::Bcgf => Face::Adhe,
            Face::Adhe => Face::Bcgf,
        }
    }

    pub fn is_adjacent(self, other: Face) -> bool {
        self != other && self.opposite() != other
    }

    /// The edge shared with an adjacent face.
    pub fn shared_edge(self, other: Face) -> Option<Edge> {
        if !self.is_adjacent(other) {
            return None;
        }
        let mine = self.vertices();
        let theirs = other.vertices();
        let common: Vec<Vertex> = mine.iter().copied().filter(|v| theirs.contains(v)).collect();
        Edge::new(common[0], common[1]).ok()
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::Abcd => "abcd",
            Face::Efgh => "efgh",
            Face::Abfe => "abfe",
            Face::Cdhg => "cdhg",
            Face::Bcgf => "bcgf",
            Face::Adhe => "adhe",
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Face {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Face::ALL
            .iter()
            .copied()
            .find(|f| f.label() == lower)
            .ok_or_else(|| GeometryError::InvalidLabel(s.to_string()))
    }
}

impl From<Face> for String {
    fn from(f: Face) -> String {
        f.label().to_string()
    }
}

impl TryFrom<String> for Face {
    type Error = GeometryError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One of the twelve box edges. Stored with endpoints in label order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Edge(Vertex, Vertex);

impl Edge {
    pub fn new(p: Vertex, q: Vertex) -> Result<Edge, GeometryError> {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        let sp = p.signs();
        let sq = q.signs();
        let differing = (0..3).filter(|&i| sp[i] != sq[i]).count();
        if differing == 1 {
            Ok(Edge(p, q))
        } else {
            Err(GeometryError::InvalidLabel(format!("{}{}", p.letter(), q.letter())))
        }
    }

    pub fn endpoints(self) -> (Vertex, Vertex) {
        (self.0, self.1)
    }

    /// The two faces meeting at this edge.
    pub fn faces(self) -> [Face; 2] {
        let mut out = Face::ALL
            .iter()
            .copied()
            .filter(|f| f.vertices().contains(&self.0) && f.vertices().contains(&self.1));
        [out.next().expect("edge has two faces"), out.next().expect("edge has two faces")]
    }

    pub fn label(self) -> String {
        format!("{}{}", self.0.letter(), self.1.letter())
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0.letter(), self.1.letter())
    }
}

impl FromStr for Edge {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().collect();
        let bad = || GeometryError::InvalidLabel(s.to_string());
        if chars.len() != 2 {
            return Err(bad());
        }
        let p = Vertex::from_letter(chars[0]).ok_or_else(bad)?;
        let q = Vertex::from_letter(chars[1]).ok_or_else(bad)?;
        Edge::new(p, q).map_err(|_| bad())
    }
}

impl From<Edge> for String {
    fn from(e: Edge) -> String {
        e.label()
    }
}

impl TryFrom<String> for Edge {
    type Error = GeometryError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A face of a box realized in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct FaceQuad<T: Real> {
    pub face: Option<Face>,
    pub corners: [Vector3<T>; 4],
    /// Outward unit normal.
    pub normal: Vector3<T>,
}

impl<T: Real> FaceQuad<T> {
    pub fn center(&self) -> Vector3<T> {
        self.corners.iter().fold(Vector3::zeros(), |acc, c| acc + c) * T::lit(0.25)
    }

    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        self.normal.dot(&(p - self.corners[0]))
    }

    /// Whether the orthogonal projection of `p` onto the face plane falls in
    /// the (closed) quad.
    pub fn projects_inside(&self, p: &Vector3<T>) -> bool {
        let mut pos = true;
        let mut neg = true;
        for i in 0..4 {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            let s = (b - a).cross(&(p - a)).dot(&self.normal);
            pos &= s >= T::ZERO;
            neg &= s <= T::ZERO;
        }
        pos || neg
    }
}

/// A straight segment between two labeled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct EdgeSegment<T: Real> {
    pub endpoints: [Vector3<T>; 2],
    pub labels: [char; 2],
}

impl<T: Real> EdgeSegment<T> {
    pub fn midpoint(&self) -> Vector3<T> {
        (self.endpoints[0] + self.endpoints[1]) * T::HALF
    }

    pub fn length(&self) -> T {
        (self.endpoints[1] - self.endpoints[0]).norm()
    }

    pub fn direction(&self) -> Option<Vector3<T>> {
        (self.endpoints[1] - self.endpoints[0]).try_normalize(T::default_epsilon())
    }
}

/// The target model: a box given by its center pose and full extents along
/// the local x, y, z axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct OrientedBox<T: Real> {
    pub pose: Pose<T>,
    pub size: Vector3<T>,
}

impl<T: Real> OrientedBox<T> {
    pub fn new(pose: Pose<T>, size: Vector3<T>) -> Result<Self, GeometryError> {
        check_positive(&[size.x, size.y, size.z])?;
        if !pose.is_finite() {
            return Err(GeometryError::NonFinitePose);
        }
        Ok(Self { pose, size })
    }

    pub fn half_size(&self) -> Vector3<T> {
        self.size * T::HALF
    }

    pub fn center(&self) -> Vector3<T> {
        self.pose.position
    }

    pub fn local_vertex(&self, v: Vertex) -> Vector3<T> {
        let s = v.signs();
        let h = self.half_size();
        Vector3::new(
            h.x * T::lit(s[0] as f64),
            h.y * T::lit(s[1] as f64),
            h.z * T::lit(s[2] as f64),
        )
    }

    pub fn vertex(&self, v: Vertex) -> Vector3<T> {
        self.pose.transform_point(&self.local_vertex(v))
    }

    /// All eight corners in label order `a..h`.
    pub fn vertices(&self) -> [Vector3<T>; 8] {
        Vertex::ALL.map(|v| self.vertex(v))
    }

    pub fn face(&self, face: Face) -> FaceQuad<T> {
        FaceQuad {
            face: Some(face),
            corners: face.vertices().map(|v| self.vertex(v)),
            normal: self.pose.transform_vector(&face.local_normal()),
        }
    }

    pub fn face_by_label(&self, label: &str) -> Result<FaceQuad<T>, GeometryError> {
        Ok(self.face(label.parse()?))
    }

    pub fn edge(&self, edge: Edge) -> EdgeSegment<T> {
        let (p, q) = edge.endpoints();
        EdgeSegment {
            endpoints: [self.vertex(p), self.vertex(q)],
            labels: [p.letter(), q.letter()],
        }
    }

    pub fn edge_by_label(&self, label: &str) -> Result<EdgeSegment<T>, GeometryError> {
        Ok(self.edge(label.parse()?))
    }

    /// Signed distance from `p` to the box surface (negative inside).
    pub fn signed_distance(&self, p: &Vector3<T>) -> T {
        let local = self.pose.inverse_transform_point(p);
        let h = self.half_size();
        let q = local.abs() - h;
        let outside = Vector3::new(q.x.max(T::ZERO), q.y.max(T::ZERO), q.z.max(T::ZERO)).norm();
        let inside = q.x.max(q.y).max(q.z).min(T::ZERO);
        outside + inside
    }

    pub fn contains(&self, p: &Vector3<T>) -> bool {
        self.signed_distance(p) <= T::ZERO
    }

    /// Face whose plane `p` is farthest outside of (least inside), with that
    /// signed plane distance.
    pub fn nearest_face(&self, p: &Vector3<T>) -> (Face, T) {
        let local = self.pose.inverse_transform_point(p);
        let half = self.half_size();
        let mut best = (Face::ALL[0], T::min_value().expect("bounded"));
        for f in Face::ALL {
            let n = f.local_normal::<T>();
            let d = local.dot(&n) - half.dot(&n.abs());
            if d > best.1 {
                best = (f, d);
            }
        }
        best
    }

    pub fn transformed(&self, motion: &nalgebra::Isometry3<T>) -> Self {
        Self { pose: self.pose.transformed(motion), size: self.size }
    }
}
