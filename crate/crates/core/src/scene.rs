//! Synthetic classroom scenes and the camera surrogate: a top-down
//! orthographic raster of the room with a bright Gaussian marker at the
//! target user and dimmer markers for everyone else. Labeled samples pair
//! these rasters with the CSI-derived best beam of the target user.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::channel::{best_beam_csi, generate_channel, ArrayGeometry, Codebook, GainModel, UserChannel};
use crate::error::{Result, SimError};
use crate::rng::standard_normal;
use crate::types::Position;

/// Marker peak intensity of the target user.
const TARGET_PEAK: f64 = 0.9;
/// Marker peak intensity of distractor users.
const DISTRACTOR_PEAK: f64 = 0.3;
/// Gaussian markers are truncated at this many sigmas.
const BLOB_CUTOFF_SIGMAS: f64 = 3.0;

/// How users are placed in the room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    UniformRandom,
    Grid { cols: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub room_width: f64,
    pub room_depth: f64,
    /// Base-station position; the array boresight points toward +y. The
    /// default sits behind the front wall so the whole room is in the
    /// array's far field and beam sectors stay wider than a raster pixel.
    pub bs_position: Position,
    pub user_count: usize,
    pub placement: Placement,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_width: 10.0,
            room_depth: 10.0,
            bs_position: Position::new(5.0, -10.0),
            user_count: 40,
            placement: Placement::UniformRandom,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.room_width > 0.0 && self.room_depth > 0.0) {
            return Err(SimError::Domain("scene: room dimensions must be positive".into()));
        }
        if self.user_count == 0 {
            return Err(SimError::Domain("scene.user_count: must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneUser {
    pub id: u32,
    pub position: Position,
}

/// A populated room snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room_width: f64,
    pub room_depth: f64,
    pub bs_position: Position,
    /// Sorted by ascending id; ids unique.
    pub users: Vec<SceneUser>,
}

impl Scene {
    pub fn user(&self, id: u32) -> Option<&SceneUser> {
        self.users.iter().find(|u| u.id == id)
    }
}

/// Grayscale raster observation, intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl SceneImage {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Gaussian marker sigma in pixels.
    pub marker_radius_px: u32,
    pub pixel_noise_sigma: f64,
    /// Std-dev of the target marker placement error, metres.
    pub position_jitter_m: f64,
    pub background_texture_seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            marker_radius_px: 2,
            pixel_noise_sigma: 0.05,
            position_jitter_m: 0.1,
            background_texture_seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(SimError::Domain("render: image dimensions must be >= 1".into()));
        }
        if self.marker_radius_px == 0 {
            return Err(SimError::Domain("render.marker_radius_px: must be >= 1".into()));
        }
        if !(self.pixel_noise_sigma >= 0.0) {
            return Err(SimError::Domain("render.pixel_noise_sigma: must be >= 0".into()));
        }
        if !(self.position_jitter_m >= 0.0) {
            return Err(SimError::Domain("render.position_jitter_m: must be >= 0".into()));
        }
        Ok(())
    }
}

/// A raster tagged with the CSI-derived best beam of its target user.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: SceneImage,
    pub label: usize,
    pub user_id: u32,
    pub true_position: Position,
}

/// Places `user_count` users in the room, on a regular grid or i.i.d.
/// uniform. Deterministic for a fixed random stream.
pub fn generate_scene<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Result<Scene> {
    config.validate()?;
    let users = match config.placement {
        Placement::UniformRandom => (0..config.user_count)
            .map(|i| SceneUser {
                id: i as u32,
                position: Position::new(
                    rng.gen::<f64>() * config.room_width,
                    rng.gen::<f64>() * config.room_depth,
                ),
            })
            .collect(),
        Placement::Grid { cols, rows } => {
            if cols == 0 || rows == 0 {
                return Err(SimError::Domain("scene: grid dimensions must be >= 1".into()));
            }
            if config.user_count > cols * rows {
                return Err(SimError::Domain(format!(
                    "scene: {} users exceed grid capacity {}",
                    config.user_count,
                    cols * rows
                )));
            }
            (0..config.user_count)
                .map(|i| {
                    let (cx, cy) = (i % cols, i / cols);
                    SceneUser {
                        id: i as u32,
                        position: Position::new(
                            (cx as f64 + 0.5) * config.room_width / cols as f64,
                            (cy as f64 + 0.5) * config.room_depth / rows as f64,
                        ),
                    }
                })
                .collect()
        }
    };
    Ok(Scene {
        room_width: config.room_width,
        room_depth: config.room_depth,
        bs_position: config.bs_position,
        users,
    })
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Constant background intensity derived from the texture seed.
pub(crate) fn background_level(seed: u64) -> f64 {
    0.05 + 0.1 * (mix64(seed) as f64 / u64::MAX as f64)
}

fn add_blob(pixels: &mut [f64], width: usize, height: usize, pcx: f64, pcy: f64, sigma: f64, peak: f64) {
    let cutoff = BLOB_CUTOFF_SIGMAS * sigma;
    let r0 = ((pcy - cutoff).floor().max(0.0)) as usize;
    let r1 = ((pcy + cutoff).ceil().min(height as f64 - 1.0)).max(0.0) as usize;
    let c0 = ((pcx - cutoff).floor().max(0.0)) as usize;
    let c1 = ((pcx + cutoff).ceil().min(width as f64 - 1.0)).max(0.0) as usize;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let dx = c as f64 + 0.5 - pcx;
            let dy = r as f64 + 0.5 - pcy;
            let d2 = dx * dx + dy * dy;
            if d2 <= cutoff * cutoff {
                pixels[r * width + c] += peak * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
}

/// Renders the single-user observation for `user_id`: room mapped
/// orthographically onto the pixel grid (x to columns, y to rows), the
/// target as a bright marker at its jittered position, every other user as
/// a dim marker, plus additive pixel noise, clamped to [0, 1].
pub fn render_user_image<R: Rng + ?Sized>(
    scene: &Scene,
    user_id: u32,
    config: &RenderConfig,
    rng: &mut R,
) -> Result<SceneImage> {
    config.validate()?;
    let target = scene
        .user(user_id)
        .ok_or_else(|| SimError::Lookup(format!("user {user_id} not in scene")))?;

    let (w, h) = (config.width, config.height);
    let mut pixels = vec![background_level(config.background_texture_seed); w * h];
    let sigma = config.marker_radius_px as f64;
    let to_px = |p: Position| (p.x / scene.room_width * w as f64, p.y / scene.room_depth * h as f64);

    for user in &scene.users {
        if user.id != user_id {
            let (pcx, pcy) = to_px(user.position);
            add_blob(&mut pixels, w, h, pcx, pcy, sigma, DISTRACTOR_PEAK);
        }
    }

    // Location feedback identifies the target; jitter models its error.
    let jx = standard_normal(rng) * config.position_jitter_m;
    let jy = standard_normal(rng) * config.position_jitter_m;
    let marked = Position::new(target.position.x + jx, target.position.y + jy);
    let (pcx, pcy) = to_px(marked);
    add_blob(&mut pixels, w, h, pcx, pcy, sigma, TARGET_PEAK);

    if config.pixel_noise_sigma > 0.0 {
        for p in pixels.iter_mut() {
            *p += standard_normal(rng) * config.pixel_noise_sigma;
        }
    }

    Ok(SceneImage {
        width: w,
        height: h,
        pixels: pixels.into_iter().map(|p| p.clamp(0.0, 1.0) as f32).collect(),
    })
}

/// One stage-1 snapshot: a fresh scene, channels for all its users, and a
/// labeled sample for one uniformly chosen target.
pub(crate) fn training_snapshot<R: Rng + ?Sized>(
    scene_config: &SceneConfig,
    geometry: &ArrayGeometry,
    gain_model: &GainModel,
    codebook: &Codebook,
    render_config: &RenderConfig,
    rng: &mut R,
) -> Result<(Scene, BTreeMap<u32, UserChannel>, LabeledSample)> {
    let scene = generate_scene(scene_config, rng)?;
    let mut channels = BTreeMap::new();
    for user in &scene.users {
        channels.insert(
            user.id,
            generate_channel(geometry, gain_model, user.id, user.position, scene.bs_position, rng)?,
        );
    }
    let target = scene.users[rng.gen_range(0..scene.users.len())];
    let image = render_user_image(&scene, target.id, render_config, rng)?;
    let label = best_beam_csi(&channels[&target.id], codebook);
    let sample = LabeledSample { image, label, user_id: target.id, true_position: target.position };
    Ok((scene, channels, sample))
}

/// Builds `sample_count` labeled samples, each from a fresh random scene,
/// labeling the target by its current true channel.
pub fn make_training_set<R: Rng + ?Sized>(
    scene_config: &SceneConfig,
    geometry: &ArrayGeometry,
    gain_model: &GainModel,
    codebook: &Codebook,
    sample_count: usize,
    render_config: &RenderConfig,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    if sample_count == 0 {
        return Err(SimError::Domain("make_training_set: sample_count must be >= 1".into()));
    }
    (0..sample_count)
        .map(|_| {
            training_snapshot(scene_config, geometry, gain_model, codebook, render_config, rng)
                .map(|(_, _, sample)| sample)
        })
        .collect()
}
