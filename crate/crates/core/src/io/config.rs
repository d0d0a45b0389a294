//! Run configuration: flat `key = value` text, `#` comments. Missing keys
//! keep their defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

macro_rules! run_config {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty = $default:expr, [$lo:expr, $hi:expr]; )*) => {
        /// Every tunable of the pipeline, with defaults.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $( $(#[$doc])* pub $name: $ty, )*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $( $name: $default, )* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($name), )*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($name) => {
                        let v: $ty = value.parse().map_err(|_| Error::Config(format!(
                            "key `{}` expects {}, got {:?}", key, stringify!($ty), value
                        )))?;
                        #[allow(clippy::unnecessary_cast)]
                        let f = v as f64;
                        if !(f >= $lo as f64 && f <= $hi as f64) {
                            return Err(Error::Config(format!(
                                "key `{}` = {} outside [{}, {}]", key, value, $lo, $hi
                            )));
                        }
                        self.$name = v;
                        Ok(())
                    } )*
                    _ => Err(Error::Config(format!(
                        "unknown key `{}` (did you mean `{}`?)", key, nearest_key(key)
                    ))),
                }
            }

            /// Writes every key with its current value.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $( let _ = writeln!(s, "{} = {}", stringify!($name), self.$name); )*
                s
            }
        }
    };
}

run_config! {
    /// Radius of the disk structuring element of the top-hat, meters.
    tophat_radius_m: f64 = 15.0, [0.0, 1e4];
    /// Minimum top-hat response for a high object, meters.
    tophat_h_min_m: f64 = 3.0, [0.0, 1e3];
    ndvi_max: f64 = 0.2, [-1.0, f64::INFINITY];
    /// Smallest overhead building component kept, cells.
    min_cells: usize = 4, [1, usize::MAX];
    normal_k: usize = 12, [3, 1000];
    /// Occupancy cell size for façade region growing, meters.
    facade_cell_m: f64 = 0.5, [1e-3, 100.0];
    /// A ground segment is kept when it has more points than this.
    min_facade_pts: usize = 500, [0, usize::MAX];
    /// Maximum angle of a façade normal from horizontal, degrees.
    facade_tol_deg: f64 = 10.0, [0.0, 90.0];
    rotation_step_deg: f64 = 3.0, [0.01, 360.0];
    /// Destination points per group in pairwise matching.
    group_c: usize = 10, [1, 100_000];
    /// Source subsample cap per scoring pass.
    n_eval: usize = 200, [1, 1_000_000];
    scale: f64 = 1.0, [1e-6, 1e6];
    dmap_margin_m: f64 = 20.0, [0.0, 1e5];
    /// Hypotheses with a larger mean re-scored error are discarded, meters.
    err_max_m: f64 = 2.0, [0.0, f64::INFINITY];
    d_th_m: f64 = 2.0, [0.0, 1e4];
    theta_th_deg: f64 = 10.0, [1e-6, 360.0];
    t_th_m: f64 = 100.0, [1e-6, 1e7];
    k_adj: usize = 3, [0, 10_000];
    p_large_cap: f64 = 20.0, [0.0, 1e9];
    vertical_cell_m: f64 = 2.0, [1e-3, 1e3];
    ground_band_m: f64 = 0.5, [0.0, 1e3];
    min_ground_pts: usize = 50, [0, usize::MAX];
    dedup_radius_m: f64 = 1.0, [0.0, 1e3];
    /// Ray weight of orthophoto rays relative to ground-view rays.
    lambda_ortho: f64 = 0.5, [0.0, 1e6];
    /// Soft-visibility sigma as a multiple of the median point spacing.
    sigma_factor: f64 = 2.0, [1e-6, 1e6];
    sink_depth_sigmas: f64 = 1.0, [0.0, 1e3];
    ortho_margin_m: f64 = 10.0, [0.0, 1e5];
    max_mesh_points: usize = 2_000_000, [5, usize::MAX];
    repair_passes: usize = 20, [0, 10_000];
    lambda_smooth: f64 = 1.0, [0.0, 1e12];
    ortho_bias: f64 = 0.25, [1e-6, 1e6];
    color_mu: f64 = 0.1, [0.0, 1e6];
    max_atlas: usize = 8192, [16, 65536];
    /// Side of the synthetic scene, meters.
    scene_extent_m: f64 = 260.0, [10.0, 1e5];
    buildings: usize = 16, [0, 10_000];
    footprint_min_m: f64 = 12.0, [0.1, 1e4];
    footprint_max_m: f64 = 26.0, [0.1, 1e4];
    height_min_m: f64 = 8.0, [0.1, 1e3];
    height_max_m: f64 = 25.0, [0.1, 1e3];
    /// Overhead cell size of the synthetic scene, meters.
    gsd_m: f64 = 0.5, [1e-3, 100.0];
    sigma_overhead_m: f64 = 0.3, [0.0, 100.0];
    /// Ground sample spacing, meters.
    ground_spacing_m: f64 = 0.4, [1e-3, 100.0];
    sigma_ground_m: f64 = 0.02, [0.0, 100.0];
    vegetation: usize = 4, [0, 10_000];
    view_range_m: f64 = 25.0, [0.1, 1e4];
    pose_spacing_m: f64 = 4.0, [0.01, 1e4];
    /// Every this many poses a ground image is rendered; 0 renders none.
    frame_stride: usize = 10, [0, usize::MAX];
    t0_scale: f64 = 1.0, [1e-3, 1e3];
    t0_theta_deg: f64 = 30.0, [-360.0, 360.0];
    t0_tx_m: f64 = 100.0, [-1e6, 1e6];
    t0_ty_m: f64 = -50.0, [-1e6, 1e6];
    t0_dz_m: f64 = 1.7, [-1e4, 1e4];
    /// Heading drift, radians per meter of trajectory.
    drift_heading: f64 = 0.0, [-1.0, 1.0];
    /// Sideways drift, meters per meter of trajectory.
    drift_lateral: f64 = 0.0, [-1.0, 1.0];
    icp_max_iter: usize = 50, [1, 100_000];
}

fn nearest_key(key: &str) -> &'static str {
    RunConfig::KEYS
        .iter()
        .min_by_key(|k| strsim::levenshtein(key, k))
        .copied()
        .unwrap_or("")
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
