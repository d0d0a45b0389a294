use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::boundary::{mask_boundary, tophat_mask};
use crate::geom::apply_transform;

fn small(seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        extent: 120.0,
        buildings: 4,
        ground_spacing: 0.5,
        trajectory: loop_trajectory(120.0, 5.0),
        vegetation: 1,
        ..SceneSpec::default()
    }
}

#[test]
fn generation_is_deterministic() {
    let a = gen_city(&small(3)).unwrap();
    let b = gen_city(&small(3)).unwrap();
    assert_eq!(a.ground, b.ground);
    assert_eq!(a.tracks, b.tracks);
    assert_eq!(a.overview, b.overview);
    assert_eq!(a.dsm, b.dsm);
    assert_eq!(a.mesh.faces, b.mesh.faces);
    let c = gen_city(&small(4)).unwrap();
    assert_ne!(a.ground.points, c.ground.points);
}

#[test]
fn city_layout_respects_the_constraints() {
    let spec = small(5);
    let city = gen_city(&spec).unwrap();
    assert_eq!(city.buildings.len(), 4);
    for (i, a) in city.buildings.iter().enumerate() {
        for b in &city.buildings[i + 1..] {
            assert!(a.distance_to_building(b) >= spec.building_gap);
        }
        for w in spec.trajectory.windows(2) {
            assert!(a.distance_to_segment(&w[0], &w[1]) >= spec.street_half_width);
        }
    }
    assert!(!city.ground.is_empty());
    assert_eq!(city.tracks.len(), city.ground.len());
    assert!(city.tracks.iter().all(|t| !t.is_empty() && t.len() <= 3));
    // every ground point lies within range of its first observer
    for (p, t) in city.ground.points.iter().zip(&city.tracks) {
        assert!((city.poses[t[0] as usize].center - p).norm() <= spec.view_range + 0.2);
    }
}

#[test]
fn no_buildings_gives_flat_ground() {
    let spec = SceneSpec { buildings: 0, vegetation: 0, ..small(1) };
    let city = gen_city(&spec).unwrap();
    assert!(city.truth_dsm.band("height").unwrap().iter().all(|&h| h == 0.0));
    let mask = tophat_mask(&city.truth_dsm, 15.0, 3.0).unwrap();
    assert_eq!(mask.count(), 0);
}

#[test]
fn overview_has_one_point_per_cell() {
    let spec = SceneSpec {
        extent: 400.0,
        buildings: 10,
        vegetation: 0,
        ground_spacing: 0.5,
        trajectory: loop_trajectory(400.0, 5.0),
        ..SceneSpec::default()
    };
    let city = gen_city(&spec).unwrap();
    let expected = (spec.extent / spec.gsd).powi(2);
    assert!((city.overview.len() as f64 - expected).abs() <= 0.1 * expected);
}

#[test]
fn crowded_scene_fails_to_place() {
    let spec = SceneSpec { buildings: 60, ..small(2) };
    assert!(matches!(gen_city(&spec), Err(Error::Generation(_))));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(gen_city(&SceneSpec { gsd: 0.01, ground_spacing: 0.02, ..small(0) }).is_err());
    assert!(gen_city(&SceneSpec { footprint: [0.0, 3.0], ..small(0) }).is_err());
}

#[test]
fn trees_have_high_ndvi_and_are_removed() {
    let city = gen_city(&small(8)).unwrap();
    let mask = tophat_mask(&city.truth_dsm, 15.0, 3.0).unwrap();
    let g = city.truth_dsm.georef;
    let tree_cells: Vec<usize> = (0..g.len())
        .filter(|&i| mask.cells[i])
        .filter(|&i| {
            let q = g.cell_center(i / g.width, i % g.width);
            city.trees.iter().any(|t| (q - t.center).norm() < t.radius)
        })
        .collect();
    assert!(!tree_cells.is_empty());
    let clean = crate::boundary::remove_vegetation(&mask, &crate::boundary::ndvi(&city.truth_dsm).unwrap(), 0.2).unwrap();
    assert!(tree_cells.iter().all(|&i| !clean.cells[i]));
}

#[test]
fn distortion_without_drift_is_identity() {
    let city = gen_city(&small(1)).unwrap();
    let d = distort(&city.ground, &city.poses, &DriftModel::default()).unwrap();
    assert_eq!(d.cloud.points, city.ground.points);
    assert!(d.corrections.iter().all(|c| c.norm() == 0.0));
    for (a, b) in d.poses.iter().zip(&city.poses) {
        assert_eq!(a.center, b.center);
        assert!(a.rotation.angle_to(&b.rotation) < 1e-12);
    }
}

#[test]
fn heading_drift_rotates_about_the_start() {
    // straight 1 km track: the last pose sits 1000 m from the first
    let poses: Vec<PoseRecord> = (0..=250)
        .map(|k| {
            let c = Point3::new(k as f64 * 4.0, 0.0, 2.0);
            let cam = PerspectiveCamera::look_at(c, c + Vec3::y(), 80.0, 160, 120).unwrap();
            PoseRecord::from_camera(k, &cam)
        })
        .collect();
    let drift = DriftModel { heading_rate: 1e-4, ..DriftModel::default() };
    let cloud = PointCloud::from_points(vec![Point3::new(1000.0, 0.0, 5.0)]);
    let d = distort(&cloud, &poses, &drift).unwrap();
    let p = d.cloud.points[0];
    assert_relative_eq!(p.y.atan2(p.x), 0.1, epsilon = 1e-12);
    assert_relative_eq!(p.x.hypot(p.y), 1000.0, epsilon = 1e-9);
    let end = d.poses.last().unwrap().center;
    assert_relative_eq!(end.y.atan2(end.x), 0.1, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn corrections_restore_the_cloud(
        rate in -1e-3f64..1e-3, lat in -1e-3f64..1e-3, th in -3.0f64..3.0,
        tx in -200.0f64..200.0, ty in -200.0f64..200.0, dz in -5.0f64..5.0,
        pts in proptest::collection::vec((0.0f64..300.0, 0.0f64..300.0, 0.0f64..30.0), 1..60),
    ) {
        let spec = small(0);
        let poses = spec.poses().unwrap();
        let drift = DriftModel { t0: Transform2D5::new(1.0, th, tx, ty, dz), heading_rate: rate, lateral_rate: lat };
        let cloud = PointCloud::from_points(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect());
        let d = distort(&cloud, &poses, &drift).unwrap();
        for ((q, c), p) in d.cloud.points.iter().zip(&d.corrections).zip(&cloud.points) {
            prop_assert!((q + c - p).norm() < 1e-9);
        }
    }
}

fn boxes_cloud() -> PointCloud {
    let mut pts = Vec::new();
    for (x0, y0, w, d, h) in [(0.0, 0.0, 12.0, 8.0, 6.0), (20.0, 5.0, 6.0, 15.0, 10.0), (5.0, 20.0, 10.0, 10.0, 4.0)] {
        let n = 40;
        for i in 0..n {
            let u = i as f64 / n as f64;
            for j in 0..10 {
                let z = h * j as f64 / 10.0;
                pts.push(Point3::new(x0 + u * w, y0, z));
                pts.push(Point3::new(x0 + w, y0 + u * d, z));
                pts.push(Point3::new(x0 + w - u * w, y0 + d, z));
                pts.push(Point3::new(x0, y0 + d - u * d, z));
            }
        }
    }
    PointCloud::from_points(pts)
}

#[test]
fn icp_on_identical_clouds_is_identity() {
    let c = boxes_cloud();
    let r = icp_baseline(&c, &c, 50).unwrap();
    assert!(r.converged);
    assert!(r.transform.theta.abs() < 1e-6 && r.transform.t.norm() < 1e-6 && r.transform.dz.abs() < 1e-6);
}

#[test]
fn icp_recovers_a_small_offset() {
    let dst = boxes_cloud();
    let t = Transform2D5::new(1.0, 5f64.to_radians(), 2.0, 0.0, 0.0);
    let src = apply_transform(&dst, &t.inverse());
    let r = icp_baseline(&src, &dst, 200).unwrap();
    assert!(angle_diff(r.transform.theta, t.theta).abs() < 0.5f64.to_radians(), "{:?}", r);
    assert!((r.transform.t - t.t).norm() < 0.1, "{:?}", r);
}

use crate::geom::angle_diff;

#[test]
fn registration_error_examples() {
    let d = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-4.0, 0.0, 1.0)]);
    let corr = vec![Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.0, -2.0, 0.0)];
    let truth = PointCloud::from_points(d.points.iter().zip(&corr).map(|(p, c)| p + c).collect());
    assert_eq!(eval_registration(&truth, &d, &corr).unwrap(), 0.0);
    let off = apply_transform(&truth, &Transform2D5::new(1.0, 0.0, 0.0, 1.0, 0.0));
    assert_relative_eq!(eval_registration(&off, &d, &corr).unwrap(), 1.0, epsilon = 1e-12);
    assert!(eval_registration(&off, &d, &corr[..1]).is_err());
}

#[test]
fn dsm_error_examples() {
    let city = gen_city(&SceneSpec { vegetation: 0, ..small(2) }).unwrap();
    let truth = &city.truth_dsm;
    assert_eq!(eval_dsm(DsmSource::Grid(truth), truth).unwrap(), 0.0);
    let mut up = truth.clone();
    let h: Vec<f64> = up.band("height").unwrap().iter().map(|h| h + 0.5).collect();
    up.set_band("height", h).unwrap();
    assert_relative_eq!(eval_dsm(DsmSource::Grid(&up), truth).unwrap(), 0.5, epsilon = 1e-9);
    // the true mesh reproduces the truth DSM away from footprint edges
    let mesh_rmse = eval_dsm(DsmSource::Mesh(&city.mesh), truth).unwrap();
    assert!(mesh_rmse < 2.0, "{mesh_rmse}");
    let g = &truth.georef;
    let heights = truth.band("height").unwrap();
    let centers: Vec<Point3> = (0..g.len())
        .map(|i| {
            let q = g.cell_center(i / g.width, i % g.width);
            Point3::new(q.x, q.y, heights[i])
        })
        .collect();
    assert_eq!(eval_dsm(DsmSource::Cloud(&PointCloud::from_points(centers)), truth).unwrap(), 0.0);
    // overview points sit anywhere in their cell: noise plus the footprint-edge error
    let cloud_rmse = eval_dsm(DsmSource::Cloud(&city.overview), truth).unwrap();
    assert!(cloud_rmse > 0.28 && cloud_rmse < 1.5, "{cloud_rmse}");
    let far = PointCloud::from_points(vec![Point3::new(-1e4, -1e4, 0.0)]);
    assert!(matches!(eval_dsm(DsmSource::Cloud(&far), truth), Err(Error::Eval(_))));
}

#[test]
fn rectangle_boundaries_match_the_perimeter() {
    let city = gen_city(&SceneSpec { vegetation: 0, ..small(6) }).unwrap();
    let mask = tophat_mask(&city.truth_dsm, 15.0, 3.0).unwrap();
    let segs = mask_boundary(&mask, 4);
    assert_eq!(segs.len(), city.buildings.len());
    let truth = perimeter_cells(&city.buildings, &city.truth_dsm.georef);
    assert!(boundary_iou(&segs, &truth, &city.truth_dsm.georef) >= 0.9);
}

#[test]
fn hausdorff_of_a_mesh_with_itself_is_zero() {
    let a = cube_mesh(3.0);
    assert!(mesh_hausdorff(&a, &a, 0.5).unwrap() < 1e-12);
    let mut b = a.clone();
    for v in &mut b.vertices {
        v.z += 0.25;
    }
    assert_relative_eq!(mesh_hausdorff(&a, &b, 0.5).unwrap(), 0.25, epsilon = 1e-9);
}

#[test]
fn frames_show_the_city() {
    let city = gen_city(&small(1)).unwrap();
    let frames = render_frames(&city, &city.poses, 20);
    assert_eq!(frames.len(), city.poses.len().div_ceil(20));
    let (_, img) = &frames[0];
    assert_eq!((img.width(), img.height()), (160, 120));
    // the lower half sees the street, not the sky
    assert_ne!(img.get_pixel(80, 110).0, SKY);
}
