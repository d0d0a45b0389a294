//! Camera pose list: one record per line,
//! `id focal cx cy qw qx qy qz x y z`, `#` starts a comment.
//! The quaternion rotates world directions into the camera frame.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geom::{PerspectiveCamera, Point3};

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub frame_id: u32,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: UnitQuaternion<f64>,
    pub center: Point3,
}

impl PoseRecord {
    pub fn from_camera(frame_id: u32, cam: &PerspectiveCamera) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(cam.rotation);
        Self {
            frame_id,
            focal: cam.focal,
            cx: cam.cx,
            cy: cam.cy,
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            center: cam.center,
        }
    }

    /// Image size defaults to twice the principal point.
    pub fn camera(&self) -> PerspectiveCamera {
        PerspectiveCamera {
            focal: self.focal,
            cx: self.cx,
            cy: self.cy,
            width: (2.0 * self.cx).round().max(1.0) as usize,
            height: (2.0 * self.cy).round().max(1.0) as usize,
            rotation: *self.rotation.to_rotation_matrix().matrix(),
            center: self.center,
        }
    }
}

pub fn parse_poses(path: &Path, text: &str) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 11 {
            return Err(Error::parse(
                path,
                Some(lineno),
                format!("expected 11 fields, found {}", toks.len()),
            ));
        }
        let frame_id = toks[0]
            .parse::<u32>()
            .map_err(|_| Error::parse(path, Some(lineno), format!("bad frame id {:?}", toks[0])))?;
        let mut v = [0f64; 10];
        for (k, t) in toks[1..].iter().enumerate() {
            v[k] = t
                .parse::<f64>()
                .map_err(|_| Error::parse(path, Some(lineno), format!("bad number {t:?}")))?;
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > 1e-3 {
            return Err(Error::Validation {
                line: lineno,
                msg: format!("quaternion norm {} is not unit", q.norm()),
            });
        }
        if !(v[0] > 0.0) {
            return Err(Error::Validation {
                line: lineno,
                msg: format!("focal {} must be positive", v[0]),
            });
        }
        out.push(PoseRecord {
            frame_id,
            focal: v[0],
            cx: v[1],
            cy: v[2],
            rotation: UnitQuaternion::from_quaternion(q),
            center: Point3::new(v[7], v[8], v[9]),
        });
    }
    Ok(out)
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<PoseRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(path, &text)
}

pub fn encode_poses(poses: &[PoseRecord]) -> String {
    let mut s = String::from("# id focal cx cy qw qx qy qz x y z\n");
    for p in poses {
        let q = p.rotation.quaternion();
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {}",
            p.frame_id, p.focal, p.cx, p.cy, q.w, q.i, q.j, q.k, p.center.x, p.center.y, p.center.z
        );
    }
    s
}

pub fn write_poses(poses: &[PoseRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_poses(poses)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use nalgebra::Matrix3;

    use super::*;

    fn p() -> &'static Path {
        Path::new("poses.txt")
    }

    #[test]
    fn identity_record() {
        let poses = parse_poses(p(), "0 100 50 50 1 0 0 0 0 0 0\n").unwrap();
        assert_eq!(poses.len(), 1);
        let cam = poses[0].camera();
        assert_eq!(cam.rotation, Matrix3::identity());
        assert_eq!(cam.center, Point3::origin());
        assert_eq!((cam.focal, cam.width, cam.height), (100.0, 100, 100));
    }

    #[test]
    fn comments_are_ignored() {
        let text = "# header\n0 100 50 50 1 0 0 0 0 0 0\n1 100 50 50 1 0 0 0 1 0 0 # trailing\n\n2 100 50 50 1 0 0 0 2 0 0\n";
        assert_eq!(parse_poses(p(), text).unwrap().len(), 3);
    }

    #[test]
    fn non_unit_quaternion_names_line() {
        let text = "# c\n0 100 50 50 2 0 0 0 0 0 0\n";
        match parse_poses(p(), text) {
            Err(Error::Validation { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roundtrip() {
        let cam = PerspectiveCamera::look_at(
            Point3::new(3.0, 4.0, 1.7),
            Point3::new(10.0, -2.0, 5.0),
            320.0,
            640,
            480,
        )
        .unwrap();
        let rec = PoseRecord::from_camera(7, &cam);
        let back = parse_poses(p(), &encode_poses(std::slice::from_ref(&rec))).unwrap();
        assert_eq!(back[0].frame_id, 7);
        assert!((back[0].camera().rotation - cam.rotation).abs().max() < 1e-12);
        assert_eq!(back[0].center, cam.center);
    }
}
