use std::path::Path;

use crossfuse::geom::{Georef, HeightGrid, PointCloud, Point3, Vec3};
use crossfuse::io::*;
use nalgebra::UnitQuaternion;
use proptest::prelude::*;

fn arb_cloud() -> impl Strategy<Value = PointCloud> {
    (1usize..40, any::<bool>(), any::<bool>()).prop_flat_map(|(n, colors, normals)| {
        (
            prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4, -100f64..100.0), n),
            prop::collection::vec(any::<[u8; 3]>(), n),
            prop::collection::vec((-1f64..1.0, -1f64..1.0, 0.1f64..1.0), n),
        )
            .prop_map(move |(p, c, nn)| PointCloud {
                points: p.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect(),
                colors: colors.then_some(c),
                normals: normals.then(|| nn.into_iter().map(|(x, y, z)| Vec3::new(x, y, z).normalize()).collect()),
            })
    })
}

proptest! {
    #[test]
    fn binary_ply_is_lossless(cloud in arb_cloud()) {
        let bytes = encode_ply(&cloud, PlyFormat::BinaryLittleEndian);
        let (back, faces) = parse_ply(Path::new("mem.ply"), &bytes).unwrap();
        prop_assert!(faces.is_empty());
        prop_assert_eq!(&back.points, &cloud.points);
        prop_assert_eq!(&back.colors, &cloud.colors);
        prop_assert_eq!(back.normals.is_some(), cloud.normals.is_some());
        // normals are stored single precision
        for (a, b) in back.normals.iter().flatten().zip(cloud.normals.iter().flatten()) {
            prop_assert!((a - b).norm() <= 1e-6);
        }
    }

    #[test]
    fn ascii_ply_keeps_coordinates(cloud in arb_cloud()) {
        let bytes = encode_ply(&cloud, PlyFormat::Ascii);
        let (back, _) = parse_ply(Path::new("mem.ply"), &bytes).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in back.points.iter().zip(&cloud.points) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.coords.norm()));
        }
        prop_assert_eq!(back.colors, cloud.colors);
    }

    #[test]
    fn grid_is_lossless(w in 1usize..12, h in 1usize..12, gsd in 0.1f64..5.0, seed in any::<u64>()) {
        let georef = Georef::new(100.5, -20.25, gsd, w, h).unwrap();
        let mut grid = HeightGrid::filled(georef, &["height", "red"], 0.0).unwrap();
        let vals: Vec<f64> = (0..w * h)
            .map(|i| if (seed >> (i % 64)) & 1 == 1 { f64::NAN } else { i as f64 * 0.37 - 3.0 })
            .collect();
        grid.set_band("height", vals.clone()).unwrap();
        let back = parse_grid(Path::new("mem.hgt"), &encode_grid(&grid)).unwrap();
        prop_assert!(back.georef.same_as(&georef));
        let got = back.band("height").unwrap();
        for (a, b) in got.iter().zip(&vals) {
            // values are stored single precision
            prop_assert!(a.to_bits() == (*b as f32 as f64).to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn tracks_roundtrip(tracks in prop::collection::vec(prop::collection::vec(0u32..5000, 1..4), 0..30)) {
        let back = parse_tracks(Path::new("mem.trk"), &encode_tracks(&tracks)).unwrap();
        prop_assert_eq!(back, tracks);
    }

    #[test]
    fn poses_roundtrip(yaw in -3.1f64..3.1, pitch in -1.0f64..1.0, x in -500f64..500.0, f in 10f64..2000.0) {
        let pose = PoseRecord {
            frame_id: 7,
            focal: f,
            cx: 80.0,
            cy: 60.0,
            rotation: UnitQuaternion::from_euler_angles(0.0, pitch, yaw),
            center: Point3::new(x, -x / 2.0, 3.0),
        };
        let back = parse_poses(Path::new("mem.txt"), &encode_poses(std::slice::from_ref(&pose))).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert!((back[0].center - pose.center).norm() < 1e-9);
        prop_assert!(back[0].rotation.angle_to(&pose.rotation) < 1e-9);
        prop_assert!((back[0].focal - f).abs() < 1e-9);
    }
}

#[test]
fn truncated_binary_ply_is_a_parse_error() {
    let cloud = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0); 4]);
    let bytes = encode_ply(&cloud, PlyFormat::BinaryLittleEndian);
    let err = parse_ply(Path::new("cut.ply"), &bytes[..bytes.len() - 5]).unwrap_err();
    assert!(err.is_input_error(), "{err}");
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.cfg");
    std::fs::write(&p, "# coarse rotation search\nrotation_step_deg = 6\nk_adj = 2\n").unwrap();
    let cfg = read_config(&p).unwrap();
    assert_eq!(cfg.rotation_step_deg, 6.0);
    assert_eq!(cfg.k_adj, 2);
    assert_eq!(cfg.lambda_smooth, RunConfig::default().lambda_smooth);
    assert!(read_config(dir.path().join("absent.cfg")).unwrap_err().is_input_error());
}
