//! End-to-end stages on a run directory: generate a synthetic city, extract
//! boundaries, register, mesh, texture and evaluate. Each stage reads the
//! files written by the earlier ones.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::RgbImage;

use crate::boundary::{
    estimate_normals, estimate_vertical, ground_segments, mask_boundary, ndvi, remove_vegetation, tophat_mask,
    BinaryMask, BoundarySegment, Source,
};
use crate::error::{Error, Result};
use crate::geom::{angle_diff, apply_transform, Georef, HeightGrid, Point2, Point3, PointCloud, Transform2D5, Vec3};
use crate::io::{
    read_grid, read_mesh_ply, read_ply, read_poses, read_tracks, write_grid, write_mesh_ply, write_ply, write_poses,
    write_tracks, PlyFormat, PoseRecord, RunConfig,
};
use crate::mesh::{mesh_stats, ortho_rays, perspective_rays, reconstruct, MeshParams, Reconstruction};
use crate::register::{
    apply_to_poses, build_graph, distance_transform, filter_hypotheses, fuse_clouds, match_all, minimize_energy,
    resolve_transform, smoothness_scale, vertical_align, EnergyParams, MatchParams, Resolved,
};
use crate::synth::{
    boundary_iou, distort, eval_dsm, eval_registration, gen_city, icp_baseline, loop_trajectory, mesh_hausdorff,
    perimeter_cells, render_frames, Building, DriftModel, DsmSource, EvalReport, SceneSpec,
};
use crate::texture::{bake, color_adjust, face_visibility, view_labeling, write_obj, TexturedMesh, View, ViewSet};

/// Scene specification from the configuration keys.
pub fn scene_spec(cfg: &RunConfig, seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        extent: cfg.scene_extent_m,
        buildings: cfg.buildings,
        footprint: [cfg.footprint_min_m, cfg.footprint_max_m],
        height: [cfg.height_min_m, cfg.height_max_m],
        gsd: cfg.gsd_m,
        sigma_o: cfg.sigma_overhead_m,
        ground_spacing: cfg.ground_spacing_m,
        sigma_g: cfg.sigma_ground_m,
        trajectory: loop_trajectory(cfg.scene_extent_m, 5.0),
        drift: drift_model(cfg),
        vegetation: cfg.vegetation,
        view_range: cfg.view_range_m,
        pose_spacing: cfg.pose_spacing_m,
        ..SceneSpec::default()
    }
}

pub fn drift_model(cfg: &RunConfig) -> DriftModel {
    DriftModel {
        t0: Transform2D5::new(cfg.t0_scale, cfg.t0_theta_deg.to_radians(), cfg.t0_tx_m, cfg.t0_ty_m, cfg.t0_dz_m),
        heading_rate: cfg.drift_heading,
        lateral_rate: cfg.drift_lateral,
    }
}

pub struct Extracted {
    /// Overhead building mask after vegetation removal.
    pub mask: BinaryMask,
    pub overhead: Vec<BoundarySegment>,
    pub ground: Vec<BoundarySegment>,
    pub vertical: Vec3,
    /// The ground cloud with estimated normals.
    pub normals: PointCloud,
}

pub fn extract(dsm: &HeightGrid, ground: &PointCloud, poses: &[PoseRecord], cfg: &RunConfig) -> Result<Extracted> {
    let mask = tophat_mask(dsm, cfg.tophat_radius_m, cfg.tophat_h_min_m)?;
    let mask = remove_vegetation(&mask, &ndvi(dsm)?, cfg.ndvi_max)?;
    let overhead = mask_boundary(&mask, cfg.min_cells);
    let sensors: Vec<Point3> = poses.iter().map(|p| p.center).collect();
    let est = estimate_normals(ground, cfg.normal_k, (!sensors.is_empty()).then_some(&sensors[..]))?;
    let vertical = estimate_vertical(&est.cloud, Some(&est.degenerate))?;
    let ground_segs =
        ground_segments(&est.cloud, &vertical, cfg.facade_cell_m, cfg.min_facade_pts, cfg.facade_tol_deg)?;
    log::info!(
        "extract: {} overhead segments, {} ground segments, vertical ({:.4}, {:.4}, {:.4})",
        overhead.len(),
        ground_segs.len(),
        vertical.x,
        vertical.y,
        vertical.z
    );
    Ok(Extracted { mask, overhead, ground: ground_segs, vertical, normals: est.cloud })
}

pub struct Registration {
    pub resolved: Resolved,
    pub dz: f64,
    pub cloud: PointCloud,
    pub poses: Vec<PoseRecord>,
    pub hypotheses: usize,
    pub kept: usize,
    pub energy: f64,
}

/// Planar length of the pose sequence.
pub fn trajectory_length(poses: &[PoseRecord]) -> f64 {
    poses
        .windows(2)
        .map(|w| (w[1].center.x - w[0].center.x).hypot(w[1].center.y - w[0].center.y))
        .sum()
}

pub fn register(
    dsm: &HeightGrid,
    overhead: &[BoundarySegment],
    ground_segs: &[BoundarySegment],
    ground: &PointCloud,
    poses: &[PoseRecord],
    cfg: &RunConfig,
) -> Result<Registration> {
    if overhead.is_empty() {
        return Err(Error::Registration("no overhead building boundaries".into()));
    }
    if ground_segs.is_empty() {
        return Err(Error::Registration("no ground façade segments".into()));
    }
    let seeds: Vec<Point2> = overhead.iter().flat_map(|s| s.points2d.iter().copied()).collect();
    let dmap = distance_transform(&seeds, &dsm.georef, cfg.dmap_margin_m)?;
    let params = MatchParams { rotation_step_deg: cfg.rotation_step_deg, group_c: cfg.group_c, n_eval: cfg.n_eval };
    let hyps = match_all(overhead, ground_segs, &dmap, cfg.scale, &params)?;
    let ground_pts: Vec<Point2> = ground_segs.iter().flat_map(|s| s.points2d.iter().copied()).collect();
    let traj = trajectory_length(poses);
    let kept = filter_hypotheses(&hyps, ground_segs, &ground_pts, &dmap, traj, cfg.err_max_m)?;
    log::info!("register: {} hypotheses, {} kept", hyps.len(), kept.len());
    let graph = build_graph(ground_segs, cfg.k_adj)?;
    let energy = EnergyParams {
        d_th: cfg.d_th_m,
        theta_th: cfg.theta_th_deg.to_radians(),
        t_th: cfg.t_th_m,
        h: smoothness_scale(ground_pts.len()),
        k_adj: cfg.k_adj,
        p_large_cap: cfg.p_large_cap,
    };
    let result = minimize_energy(&graph, ground_segs, &kept, &dmap, &energy)?;
    let planar = resolve_transform(&result.labeling, &kept, ground_segs, 0.0)?;
    let dz = vertical_align(
        &planar.apply_piecewise(ground),
        dsm,
        cfg.vertical_cell_m,
        cfg.ground_band_m,
        cfg.min_ground_pts,
    )?;
    let resolved = resolve_transform(&result.labeling, &kept, ground_segs, dz)?;
    let cloud = resolved.apply_piecewise(ground);
    let poses = poses
        .iter()
        .flat_map(|p| apply_to_poses(std::slice::from_ref(p), resolved.transform_at(p.center.x, p.center.y)))
        .collect();
    Ok(Registration {
        dz,
        cloud,
        poses,
        hypotheses: hyps.len(),
        kept: kept.len(),
        energy: result.energy,
        resolved,
    })
}

pub struct Models {
    /// Overview cloud alone with nadir visibility.
    pub satellite: Reconstruction,
    /// Fused cloud with nadir and ground-camera visibility.
    pub combined: Reconstruction,
    pub fused: PointCloud,
}

pub fn build_models(
    overview: &PointCloud,
    registered: &PointCloud,
    tracks: &[Vec<u32>],
    poses: &[PoseRecord],
    georef: &Georef,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Models> {
    let params = MeshParams {
        sigma_factor: cfg.sigma_factor,
        sink_depth_sigmas: cfg.sink_depth_sigmas,
        max_points: cfg.max_mesh_points,
        seed,
        repair_passes: cfg.repair_passes,
    };
    let sat_rays = ortho_rays(overview, georef, cfg.ortho_margin_m, cfg.lambda_ortho);
    let satellite = reconstruct(&overview.points, &sat_rays, &params)?;
    let fused = fuse_clouds(overview, registered, cfg.dedup_radius_m);
    let mut rays = perspective_rays(registered, tracks, poses, 1.0)?;
    rays.extend(ortho_rays(&fused, georef, cfg.ortho_margin_m, cfg.lambda_ortho));
    let combined = reconstruct(&fused.points, &rays, &params)?;
    Ok(Models { satellite, combined, fused })
}

pub fn texture(
    mesh: &crate::geom::TriMesh,
    ortho: &HeightGrid,
    poses: &[PoseRecord],
    frames: Vec<(u32, RgbImage)>,
    cfg: &RunConfig,
) -> Result<TexturedMesh> {
    let mut ground = Vec::new();
    for (id, img) in frames {
        let pose = poses
            .iter()
            .find(|p| p.frame_id == id)
            .ok_or_else(|| Error::Input(format!("frame {id} has no pose")))?;
        ground.push(View::perspective(img, pose.camera())?);
    }
    let views = ViewSet::new(Some(View::ortho(ortho)?), ground)?;
    let vis = face_visibility(mesh, &views)?;
    let labeling = view_labeling(mesh, &vis, &views, cfg.lambda_smooth, cfg.ortho_bias);
    let corrections = color_adjust(mesh, &labeling, &views, cfg.color_mu);
    bake(mesh, &labeling, &corrections, &views, cfg.max_atlas)
}

/// File names inside a run directory.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Path of an input that an earlier stage should have written.
    fn input(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Input(format!("missing input file {}; run the `{stage}` stage first", p.display())))
        }
    }

    pub fn frames_dir(&self) -> PathBuf {
        self.root.join("frames")
    }
}

pub const TRUTH_DSM: &str = "truth_dsm.hgt";
pub const DSM: &str = "dsm.hgt";
pub const ORTHO: &str = "ortho.hgt";
pub const OVERVIEW: &str = "overview.ply";
pub const GROUND: &str = "ground.ply";
pub const TRACKS: &str = "ground.trk";
pub const POSES: &str = "poses.txt";
pub const GROUND_TRUTH: &str = "ground_truth.ply";
pub const TRUTH_POSES: &str = "truth_poses.txt";
pub const TRUTH_MESH: &str = "truth_mesh.ply";
pub const BUILDINGS: &str = "buildings.csv";
pub const MASK: &str = "mask.hgt";
pub const OVERHEAD_SEGMENTS: &str = "overhead_segments.ply";
pub const GROUND_SEGMENTS: &str = "ground_segments.ply";
pub const GROUND_NORMALS: &str = "ground_normals.ply";
pub const REGISTERED: &str = "registered.ply";
pub const REGISTERED_POSES: &str = "registered_poses.txt";
pub const TRANSFORMS: &str = "transforms.csv";
pub const FUSED: &str = "fused.ply";
pub const MESH_SATELLITE: &str = "mesh_satellite.ply";
pub const MESH_COMBINED: &str = "mesh_combined.ply";
pub const TEXTURED: &str = "textured";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

const BIN: PlyFormat = PlyFormat::BinaryLittleEndian;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// Segments as a cloud: x, y of each boundary point, z = segment id.
fn segments_to_cloud(segs: &[BoundarySegment]) -> PointCloud {
    PointCloud::from_points(
        segs.iter().flat_map(|s| s.points2d.iter().map(move |p| Point3::new(p.x, p.y, s.id as f64))).collect(),
    )
}

fn segments_from_cloud(cloud: &PointCloud, source: Source) -> Vec<BoundarySegment> {
    let mut groups: std::collections::BTreeMap<usize, Vec<Point2>> = Default::default();
    for p in &cloud.points {
        groups.entry(p.z as usize).or_default().push(Point2::new(p.x, p.y));
    }
    groups.into_iter().filter_map(|(id, pts)| BoundarySegment::new(id, pts, source)).collect()
}

fn write_buildings(path: &Path, buildings: &[Building]) -> Result<()> {
    let mut s = String::from("id,min_x,min_y,max_x,max_y,height\n");
    for (i, b) in buildings.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{},{}", b.min.x, b.min.y, b.max.x, b.max.y, b.height);
    }
    write_text(path, &s)
}

fn read_buildings(path: &Path) -> Result<Vec<Building>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, line)| {
            let v: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, Some(i + 1), e.to_string()))?;
            if v.len() != 6 {
                return Err(Error::parse(path, Some(i + 1), "expected 6 fields"));
            }
            Ok(Building { min: Point2::new(v[1], v[2]), max: Point2::new(v[3], v[4]), height: v[5], color: [0; 3] })
        })
        .collect()
}

fn mask_to_grid(mask: &BinaryMask) -> Result<HeightGrid> {
    let mut g = HeightGrid::new(mask.georef, &["mask"])?;
    g.set_band("mask", mask.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect())?;
    Ok(g)
}

fn frame_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("frame_{id:05}.png"))
}

pub fn stage_gen(dir: &RunDir, cfg: &RunConfig, seed: u64) -> Result<()> {
    fs::create_dir_all(&dir.root).map_err(|e| Error::io(&dir.root, e))?;
    let spec = scene_spec(cfg, seed);
    let city = gen_city(&spec)?;
    let d = distort(&city.ground, &city.poses, &spec.drift)?;
    write_grid(&city.truth_dsm, dir.path(TRUTH_DSM))?;
    write_grid(&city.dsm, dir.path(DSM))?;
    write_grid(&city.ortho, dir.path(ORTHO))?;
    write_ply(&city.overview, dir.path(OVERVIEW), BIN)?;
    write_ply(&d.cloud, dir.path(GROUND), BIN)?;
    write_ply(&city.ground, dir.path(GROUND_TRUTH), BIN)?;
    write_tracks(&city.tracks, dir.path(TRACKS))?;
    write_poses(&d.poses, dir.path(POSES))?;
    write_poses(&city.poses, dir.path(TRUTH_POSES))?;
    write_mesh_ply(&city.mesh, dir.path(TRUTH_MESH), BIN)?;
    write_buildings(&dir.path(BUILDINGS), &city.buildings)?;
    let frames = dir.frames_dir();
    if frames.exists() {
        fs::remove_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
    }
    fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
    for (id, img) in render_frames(&city, &city.poses, cfg.frame_stride) {
        let p = frame_path(&frames, id);
        img.save(&p).map_err(|e| Error::Io { path: p.clone(), source: std::io::Error::other(e) })?;
    }
    log::info!(
        "gen: {} buildings, {} overview points, {} ground points, {} poses",
        city.buildings.len(),
        city.overview.len(),
        city.ground.len(),
        city.poses.len()
    );
    Ok(())
}

pub fn stage_extract(dir: &RunDir, cfg: &RunConfig) -> Result<Extracted> {
    let dsm = read_grid(dir.input(DSM, "gen")?)?;
    let ground = read_ply(dir.input(GROUND, "gen")?)?;
    let poses = read_poses(dir.input(POSES, "gen")?)?;
    let ex = extract(&dsm, &ground, &poses, cfg)?;
    write_grid(&mask_to_grid(&ex.mask)?, dir.path(MASK))?;
    write_ply(&segments_to_cloud(&ex.overhead), dir.path(OVERHEAD_SEGMENTS), BIN)?;
    write_ply(&segments_to_cloud(&ex.ground), dir.path(GROUND_SEGMENTS), BIN)?;
    write_ply(&ex.normals, dir.path(GROUND_NORMALS), BIN)?;
    Ok(ex)
}

pub fn stage_register(dir: &RunDir, cfg: &RunConfig) -> Result<Registration> {
    let dsm = read_grid(dir.input(DSM, "gen")?)?;
    let overhead = segments_from_cloud(&read_ply(dir.input(OVERHEAD_SEGMENTS, "extract")?)?, Source::Overhead);
    let ground_segs = segments_from_cloud(&read_ply(dir.input(GROUND_SEGMENTS, "extract")?)?, Source::Ground);
    let ground = read_ply(dir.input(GROUND, "gen")?)?;
    let poses = read_poses(dir.input(POSES, "gen")?)?;
    let reg = register(&dsm, &overhead, &ground_segs, &ground, &poses, cfg)?;
    write_ply(&reg.cloud, dir.path(REGISTERED), BIN)?;
    write_poses(&reg.poses, dir.path(REGISTERED_POSES))?;
    let mut s = String::from("segment,bx,by,s,theta,tx,ty,dz\n");
    let row = |s: &mut String, name: &str, b: Point2, t: &Transform2D5| {
        let _ = writeln!(s, "{name},{},{},{},{},{},{},{}", b.x, b.y, t.s, t.theta, t.t.x, t.t.y, t.dz);
    };
    row(&mut s, "dominant", Point2::origin(), &reg.resolved.dominant);
    for (id, b, t) in &reg.resolved.anchors {
        row(&mut s, &id.to_string(), *b, t);
    }
    write_text(&dir.path(TRANSFORMS), &s)?;
    Ok(reg)
}

/// The dominant transform recorded by the register stage.
pub fn read_dominant(path: &Path) -> Result<Transform2D5> {
    let text = read_text(path)?;
    let line = text
        .lines()
        .find(|l| l.starts_with("dominant,"))
        .ok_or_else(|| Error::parse(path, None, "no dominant row"))?;
    let v: Vec<f64> = line
        .split(',')
        .skip(3)
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, None, e.to_string()))?;
    if v.len() != 5 || !(v[0] > 0.0) {
        return Err(Error::parse(path, None, "malformed dominant row"));
    }
    Ok(Transform2D5::new(v[0], v[1], v[2], v[3], v[4]))
}

pub fn stage_mesh(dir: &RunDir, cfg: &RunConfig, seed: u64) -> Result<Models> {
    let georef = read_grid(dir.input(DSM, "gen")?)?.georef;
    let overview = read_ply(dir.input(OVERVIEW, "gen")?)?;
    let registered = read_ply(dir.input(REGISTERED, "register")?)?;
    let tracks = read_tracks(dir.input(TRACKS, "gen")?)?;
    let poses = read_poses(dir.input(REGISTERED_POSES, "register")?)?;
    let models = build_models(&overview, &registered, &tracks, &poses, &georef, cfg, seed)?;
    write_ply(&models.fused, dir.path(FUSED), BIN)?;
    write_mesh_ply(&models.satellite.mesh, dir.path(MESH_SATELLITE), BIN)?;
    write_mesh_ply(&models.combined.mesh, dir.path(MESH_COMBINED), BIN)?;
    log::info!(
        "mesh: satellite {} faces, combined {} faces",
        models.satellite.mesh.faces.len(),
        models.combined.mesh.faces.len()
    );
    Ok(models)
}

pub fn stage_texture(dir: &RunDir, cfg: &RunConfig) -> Result<TexturedMesh> {
    let mesh = read_mesh_ply(dir.input(MESH_COMBINED, "mesh")?)?;
    let ortho = read_grid(dir.input(ORTHO, "gen")?)?;
    let poses = read_poses(dir.input(REGISTERED_POSES, "register")?)?;
    let mut frames = Vec::new();
    for p in &poses {
        let path = frame_path(&dir.frames_dir(), p.frame_id);
        if path.is_file() {
            let img = image::open(&path)
                .map_err(|e| Error::parse(&path, None, e.to_string()))?
                .to_rgb8();
            frames.push((p.frame_id, img));
        }
    }
    let tex = texture(&mesh, &ortho, &poses, frames, cfg)?;
    write_obj(&tex, &dir.root, TEXTURED)?;
    Ok(tex)
}

/// Scores whatever the earlier stages left in the directory.
pub fn stage_eval(dir: &RunDir, cfg: &RunConfig, seed: u64) -> Result<EvalReport> {
    let mut report = EvalReport::new(seed);
    let truth = read_grid(dir.input(TRUTH_DSM, "gen")?)?;
    report.push("dsm_rmse_truth_self", eval_dsm(DsmSource::Grid(&truth), &truth)?, "m", "gen");
    let have = |name: &str| dir.path(name).is_file();
    if have(OVERVIEW) {
        let overview = read_ply(dir.path(OVERVIEW))?;
        report.push("dsm_rmse_overview_cloud", eval_dsm(DsmSource::Cloud(&overview), &truth)?, "m", "gen");
    }
    if have(OVERHEAD_SEGMENTS) && have(BUILDINGS) {
        let segs = segments_from_cloud(&read_ply(dir.path(OVERHEAD_SEGMENTS))?, Source::Overhead);
        let buildings = read_buildings(&dir.path(BUILDINGS))?;
        let cells = perimeter_cells(&buildings, &truth.georef);
        report.push("boundary_iou", boundary_iou(&segs, &cells, &truth.georef), "-", "extract");
    }
    if have(REGISTERED) && have(GROUND) && have(GROUND_TRUTH) {
        let distorted = read_ply(dir.path(GROUND))?;
        let registered = read_ply(dir.path(REGISTERED))?;
        let truth_cloud = read_ply(dir.path(GROUND_TRUTH))?;
        if truth_cloud.len() != distorted.len() {
            return Err(Error::Input("ground truth and ground cloud differ in size".into()));
        }
        let corrections: Vec<Vec3> = truth_cloud.points.iter().zip(&distorted.points).map(|(t, d)| t - d).collect();
        report.push(
            "registration_rmse",
            eval_registration(&registered, &distorted, &corrections)?,
            "m",
            "register",
        );
        if have(OVERVIEW) {
            let overview = read_ply(dir.path(OVERVIEW))?;
            let icp = icp_baseline(&distorted, &overview, cfg.icp_max_iter)?;
            let moved = apply_transform(&distorted, &icp.transform);
            report.push("icp_rmse", eval_registration(&moved, &distorted, &corrections)?, "m", "register");
            report.push("icp_converged", if icp.converged { 1.0 } else { 0.0 }, "-", "register");
        }
        if have(TRANSFORMS) {
            let got = read_dominant(&dir.path(TRANSFORMS))?;
            let want = drift_model(cfg).t0.inverse();
            report.push("theta_error_deg", angle_diff(got.theta, want.theta).abs().to_degrees(), "deg", "register");
            report.push("t_error_m", (got.t - want.t).norm(), "m", "register");
            report.push("dz_error_m", (got.dz - want.dz).abs(), "m", "register");
        }
    }
    for (name, file) in [("satellite", MESH_SATELLITE), ("combined", MESH_COMBINED)] {
        if !have(file) {
            continue;
        }
        let mesh = read_mesh_ply(dir.path(file))?;
        report.push(&format!("dsm_rmse_{name}"), eval_dsm(DsmSource::Mesh(&mesh), &truth)?, "m", "mesh");
        let stats = mesh_stats(&mesh);
        report.push(&format!("manifold_edges_{name}"), stats.manifold_edge_fraction(), "-", "mesh");
        if have(TRUTH_MESH) {
            let truth_mesh = read_mesh_ply(dir.path(TRUTH_MESH))?;
            report.push(&format!("hausdorff_{name}"), mesh_hausdorff(&mesh, &truth_mesh, 2.0)?, "m", "mesh");
        }
    }
    Ok(report)
}

/// Wall-clock seconds per stage.
pub type Timings = Vec<(String, f64)>;

/// Every stage in order; the report is written as text and CSV. Stage
/// timings are returned rather than written, so the outputs stay reproducible.
pub fn run_pipeline(dir: &RunDir, cfg: &RunConfig, seed: u64) -> Result<(EvalReport, Timings)> {
    let mut timings = Vec::new();
    let mut timed = |name: &str, t: Instant| timings.push((name.to_string(), t.elapsed().as_secs_f64()));
    let t = Instant::now();
    stage_gen(dir, cfg, seed)?;
    timed("gen", t);
    let t = Instant::now();
    stage_extract(dir, cfg)?;
    timed("extract", t);
    let t = Instant::now();
    stage_register(dir, cfg)?;
    timed("register", t);
    let t = Instant::now();
    stage_mesh(dir, cfg, seed)?;
    timed("mesh", t);
    let t = Instant::now();
    stage_texture(dir, cfg)?;
    timed("texture", t);
    let t = Instant::now();
    let report = stage_eval(dir, cfg, seed)?;
    timed("eval", t);
    write_report(dir, &report)?;
    Ok((report, timings))
}

pub fn write_report(dir: &RunDir, report: &EvalReport) -> Result<()> {
    write_text(&dir.path(REPORT_TXT), &report.to_text())?;
    write_text(&dir.path(REPORT_CSV), &report.to_csv())
}
