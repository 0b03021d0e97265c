use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use wrapkit::geometry::*;
use wrapkit::Vec3;

fn arb_box() -> impl Strategy<Value = OrientedBox<f64>> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        prop::array::uniform3(-3.2f64..3.2),
        prop::array::uniform3(0.01f64..0.5),
    )
        .prop_map(|(p, [r, pi, y], s)| {
            let pose = Pose::new(Vec3::from(p), UnitQuaternion::from_euler_angles(r, pi, y));
            OrientedBox::new(pose, Vec3::from(s)).unwrap()
        })
}

const EDGES: [&str; 12] = ["ab", "bc", "cd", "da", "ef", "fg", "gh", "he", "ae", "bf", "cg", "dh"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn faces_are_outward_and_on_the_surface(bx in arb_box()) {
        for face in Face::ALL {
            let quad = bx.face(face);
            prop_assert!((quad.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(quad.normal.dot(&(quad.center() - bx.center())) > 0.0);
            prop_assert!(bx.signed_distance(&quad.center()).abs() < 1e-9);
            for c in &quad.corners {
                prop_assert!(quad.signed_distance(c).abs() < 1e-9);
            }
            let opposite = bx.face(face.opposite());
            prop_assert!((quad.normal + opposite.normal).norm() < 1e-12);
        }
    }

    #[test]
    fn edge_lengths_reproduce_size(bx in arb_box()) {
        for label in EDGES {
            let seg = bx.edge_by_label(label).unwrap();
            let (p, q) = (label.chars().next().unwrap(), label.chars().nth(1).unwrap());
            let (vp, vq) = (Vertex::from_letter(p).unwrap(), Vertex::from_letter(q).unwrap());
            let axis = (0..3).find(|&i| vp.signs()[i] != vq.signs()[i]).unwrap();
            prop_assert!((seg.length() - bx.size[axis]).abs() < 1e-9);
            let edge = Edge::new(vp, vq).unwrap();
            for face in edge.faces() {
                let quad = bx.face(face);
                prop_assert!(quad.signed_distance(&seg.midpoint()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interior_points_have_negative_distance(bx in arb_box(), u in prop::array::uniform3(-0.99f64..0.99)) {
        let local = Vec3::from(u).component_mul(&bx.half_size());
        let p = bx.pose.transform_point(&local);
        prop_assert!(bx.signed_distance(&p) < 0.0);
        prop_assert!(Face::ALL.iter().all(|f| bx.face(*f).signed_distance(&p) < 0.0));
    }

    #[test]
    fn pose_round_trips_points(bx in arb_box(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let p = Vec3::from(p);
        let back = bx.pose.inverse_transform_point(&bx.pose.transform_point(&p));
        prop_assert!((back - p).norm() < 1e-12);
        let iso = bx.pose.to_isometry();
        prop_assert_eq!(Pose::from_isometry(&iso), bx.pose);
    }

    #[test]
    fn yaw_round_trips(yaw in -3.1f64..3.1, p in prop::array::uniform3(-1.0f64..1.0)) {
        let pose = Pose::from_yaw(Vec3::from(p), yaw);
        prop_assert!((pose.yaw() - yaw).abs() < 1e-12);
    }

    #[test]
    fn roi_boundaries_are_closed(c in prop::array::uniform3(-1.0f64..1.0), r in 0.01f64..1.0, dir in prop::array::uniform3(-1.0f64..1.0)) {
        let c = Vec3::from(c);
        let d = Vec3::from(dir);
        prop_assume!(d.norm() > 0.1);
        let sphere = Roi::Sphere { center: c, radius: r };
        prop_assert!(sphere.contains(&c));
        prop_assert!(sphere.contains(&(c + d.normalize() * r * (1.0 - 1e-12))));
        prop_assert!(!sphere.contains(&(c + d.normalize() * r * 1.001)));
        let lo = c - Vec3::repeat(r);
        let hi = c + Vec3::repeat(r);
        let aabb = Roi::Aabb { min: lo, max: hi };
        prop_assert!(aabb.contains(&lo) && aabb.contains(&hi));
        prop_assert!(!aabb.contains(&(hi + Vec3::repeat(1e-9))));
    }

    #[test]
    fn half_faces_cover_the_face(bx in arb_box(), s in prop::array::uniform2(-0.99f64..0.99)) {
        let quad = bx.face(Face::Abcd);
        let local = Vec3::new(s[0] * bx.half_size().x, s[1] * bx.half_size().y, bx.half_size().z);
        let p = bx.pose.transform_point(&local);
        let face = Roi::Face { quad: quad.clone(), thickness: 0.005 };
        let right = Roi::HalfFace { quad: quad.clone(), side: Side::RobotRight, thickness: 0.005 };
        let left = Roi::HalfFace { quad, side: Side::RobotLeft, thickness: 0.005 };
        prop_assert!(face.contains(&p));
        prop_assert!(right.contains(&p) || left.contains(&p));
        prop_assert_eq!(right.count_inside([p].iter()) + left.count_inside([p].iter()) >= 1, true);
    }
}

#[test]
fn face_labels_and_normals_follow_the_frame() {
    let bx = OrientedBox::new(Pose::identity(), Vec3::new(0.2, 0.4, 0.6)).unwrap();
    let expect = [
        (Face::Abcd, Vec3::z()),
        (Face::Efgh, -Vec3::z()),
        (Face::Abfe, -Vec3::y()),
        (Face::Cdhg, Vec3::y()),
        (Face::Bcgf, -Vec3::x()),
        (Face::Adhe, Vec3::x()),
    ];
    for (face, n) in expect {
        assert_eq!(bx.face(face).normal, n, "{face:?}");
        assert_eq!(bx.face_by_label(face.label()).unwrap().normal, n);
    }
    assert!(bx.face_by_label("abce").is_err());
    assert!(bx.edge_by_label("ac").is_err());
    assert_eq!(Face::Abcd.shared_edge(Face::Abfe).map(|e| e.label()), Some("ab".to_string()));
    assert_eq!(Face::Abcd.shared_edge(Face::Efgh), None);
}

#[test]
fn wrapper_corners_and_edges() {
    let w = ColoredBBox::new(Pose::from_yaw(Vec3::new(0.0, 0.3, 0.0), 0.0), 0.2, 0.6, Rgb::new(200, 40, 40)).unwrap();
    let corners = w.corners();
    for i in 0..4 {
        let j = (i + 1) % 4;
        let len = (corners[i] - corners[j]).norm();
        assert!((len - 0.2).abs() < 1e-12 || (len - 0.6).abs() < 1e-12);
    }
    assert!((w.edge_by_label("cd").unwrap().length() - w.edge_by_label("ab").unwrap().length()).abs() < 1e-12);
    assert!((w.long_axis() - Vec3::y()).norm() < 1e-12);
    assert!(w.footprint_contains(&Vec3::new(0.1, 0.6, 0.0)));
    assert!(!w.footprint_contains(&Vec3::new(0.1001, 0.3, 0.0)));
    assert!(ColoredBBox::new(Pose::identity(), 0.0, 0.6, Rgb::new(0, 0, 0)).is_err());
}

#[test]
fn free_edge_spans_the_lateral_overlap() {
    let target = OrientedBox::new(Pose::from_position(Vec3::new(0.0, 0.0, 0.0575)), Vec3::new(0.145, 0.215, 0.115)).unwrap();
    for (shift, expected) in [(0.0, 0.145), (0.05, 0.0725 + 0.0375), (-0.05, 0.0725 + 0.0375)] {
        let sheet = ColoredBBox::new(Pose::from_position(Vec3::new(shift, 0.0, 0.0)), 0.175, 0.60, Rgb::new(200, 40, 40)).unwrap();
        let plan = CoverPlan::new(&target, &sheet).expect("sheet reaches the target");
        assert!(plan.covered_length() > 0.0 && plan.covered_length() <= plan.strip_capacity() + 1e-12);
        let edge = plan.free_edge();
        assert!((edge.length() - expected).abs() < 1e-9, "shift {shift}: {}", edge.length());
        assert!(target.signed_distance(&edge.midpoint()).abs() < 1e-9);
        let mid = ((shift - 0.0875f64).max(-0.0725) + (shift + 0.0875f64).min(0.0725)) / 2.0;
        assert!((edge.midpoint().x - mid).abs() < 1e-9);
    }
}
