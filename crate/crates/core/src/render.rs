//! Deterministic software rasterizer.
//!
//! Meshes are auto-framed by their bounding sphere, rotated into camera space
//! by [`camera_transform`], projected orthographically and z-buffered. Shading
//! is two-sided Lambertian with a headlight (light travels along the view
//! direction), over a flat albedo.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{dot, sub, TriangleMesh, Vec3};

pub type Mat3 = [[f64; 3]; 3];

/// Angles are snapped to multiples of this step after wrapping so that
/// `a` and `a + 2π` land on the same value despite rounding in the addition.
const ANGLE_QUANTUM: f64 = 1.0 / (1u64 << 32) as f64;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid view angles: {0}")]
    InvalidView(String),
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error("invalid image buffer: {0}")]
    InvalidImage(String),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Camera orientation. Every angle is wrapped into `(-π, π]` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewAngles {
    elevation: f64,
    azimuth: f64,
    rotation: f64,
}

impl ViewAngles {
    pub fn new(elevation: f64, azimuth: f64, rotation: f64) -> Result<Self, RenderError> {
        if ![elevation, azimuth, rotation].iter().all(|a| a.is_finite()) {
            return Err(RenderError::InvalidView(format!(
                "({elevation}, {azimuth}, {rotation}) contains a non-finite angle"
            )));
        }
        Ok(Self { elevation: wrap_angle(elevation), azimuth: wrap_angle(azimuth), rotation: wrap_angle(rotation) })
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }
}

impl Default for ViewAngles {
    fn default() -> Self {
        Self { elevation: 0.0, azimuth: 0.0, rotation: 0.0 }
    }
}

/// Wraps into `(-π, π]`, snapped to [`ANGLE_QUANTUM`].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    a = (a / ANGLE_QUANTUM).round() * ANGLE_QUANTUM;
    if a > PI {
        a -= TAU;
    }
    if a <= -PI {
        a += TAU;
    }
    a
}

/// World-to-camera rotation `Roll(rotation) · Pitch(-elevation) · Yaw(-azimuth)`.
///
/// World up is `+y`. Yaw orbits the camera about `+y`, pitch raises it above
/// the `xz` plane, roll spins the image about the view axis. In camera space
/// the camera looks down `-z`, `+y` is screen-up and `+x` screen-right. With
/// the camera orbited by `azimuth`, the world-to-camera yaw is the right-handed
/// rotation `Ry(azimuth)`, so `(0, π/2, 0)` maps `+x` to `-z`.
pub fn camera_transform(view: &ViewAngles) -> Mat3 {
    let yaw = rot_y(view.azimuth);
    let pitch = rot_x(view.elevation);
    let roll = rot_z(view.rotation);
    mat_mul(&roll, &mat_mul(&pitch, &yaw))
}

fn rot_x(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Rasterizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    /// Fraction of the smaller image dimension covered by the bounding sphere's diameter.
    pub framing: f64,
    /// Surface colour in `[0, 1]` per channel.
    pub albedo: [f64; 3],
    pub ambient: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 224,
            height: 224,
            background: [128, 128, 128],
            framing: 0.9,
            albedo: [0.92, 0.62, 0.32],
            ambient: 0.15,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidConfig(format!(
                "image size {}x{} must be non-zero",
                self.width, self.height
            )));
        }
        if !(self.framing > 0.0 && self.framing <= 1.0) {
            return Err(RenderError::InvalidConfig(format!("framing {} must be in (0, 1]", self.framing)));
        }
        if !self.albedo.iter().all(|c| (0.0..=1.0).contains(c)) || !(0.0..=1.0).contains(&self.ambient) {
            return Err(RenderError::InvalidConfig("albedo and ambient must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Radius in pixels of the disc the bounding sphere projects to.
    pub fn frame_radius_px(&self) -> f64 {
        0.5 * self.framing * self.width.min(self.height) as f64
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RenderError> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(RenderError::InvalidImage(format!(
                "{}x{} RGB image needs {expected} bytes, got {}",
                width,
                height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    pub fn rgb_pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Copies `tile` into `self` with its top-left corner at `(x0, y0)`.
    pub fn blit(&mut self, tile: &ImageBuffer, x0: u32, y0: u32) {
        for y in 0..tile.height.min(self.height.saturating_sub(y0)) {
            let w = tile.width.min(self.width.saturating_sub(x0)) as usize * 3;
            let src = y as usize * tile.width as usize * 3;
            let dst = ((y0 + y) as usize * self.width as usize + x0 as usize) * 3;
            self.pixels[dst..dst + w].copy_from_slice(&tile.pixels[src..src + w]);
        }
    }
}

/// A rendered image plus whether the mesh was degenerate (nothing drawn).
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: ImageBuffer,
    pub degenerate: bool,
}

/// Bounding sphere around the axis-aligned bounding box centre.
///
/// Computed in a rescaled frame so that radii near `f64::MAX` do not overflow
/// when squared.
pub fn bounding_sphere(vertices: &[Vec3]) -> Option<(Vec3, f64)> {
    let first = vertices.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let center = [0, 1, 2].map(|k| lo[k] * 0.5 + hi[k] * 0.5);
    let extent = vertices.iter().flat_map(|v| (0..3).map(move |k| (v[k] - center[k]).abs())).fold(0.0f64, f64::max);
    if !(extent > 0.0 && extent.is_finite()) {
        return Some((center, 0.0));
    }
    let max_sq = vertices
        .iter()
        .map(|v| {
            let d = sub(*v, center);
            let s = [d[0] / extent, d[1] / extent, d[2] / extent];
            dot(s, s)
        })
        .fold(0.0f64, f64::max);
    Some((center, max_sq.sqrt() * extent))
}

/// Renders `mesh` from `view`.
///
/// An empty or zero-radius mesh yields a background-only image with
/// `degenerate = true`.
pub fn render(mesh: &TriangleMesh, view: &ViewAngles, config: &RenderConfig) -> Result<Rendered, RenderError> {
    config.validate()?;
    let mut image = ImageBuffer::filled(config.width, config.height, config.background);

    let Some((center, radius)) = bounding_sphere(&mesh.vertices) else {
        return Ok(Rendered { image, degenerate: true });
    };
    if mesh.triangles.is_empty() || !(radius > 0.0 && radius.is_finite()) {
        return Ok(Rendered { image, degenerate: true });
    }

    let rotation = camera_transform(view);
    let (w, h) = (config.width as f64, config.height as f64);
    let px = config.frame_radius_px();

    // Screen-space x, y in pixels (y down) and camera-space depth (larger = nearer).
    let projected: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|v| {
            // Divide before rotating: |v - center| may be near f64::MAX.
            let rel = sub(*v, center);
            let c = mat_vec(&rotation, [rel[0] / radius, rel[1] / radius, rel[2] / radius]);
            [0.5 * w + c[0] * px, 0.5 * h - c[1] * px, c[2]]
        })
        .collect();
    let normals: Vec<Vec3> = mesh.normals.iter().map(|n| mat_vec(&rotation, *n)).collect();

    let mut depth = vec![f64::NEG_INFINITY; config.width as usize * config.height as usize];
    for tri in &mesh.triangles {
        let [ia, ib, ic] = tri.map(|i| i as usize);
        let (a, b, c) = (projected[ia], projected[ib], projected[ic]);
        let area = edge(a, b, c);
        if area == 0.0 || !area.is_finite() {
            continue;
        }

        let x_min = a[0].min(b[0]).min(c[0]).floor().max(0.0) as i64;
        let x_max = (a[0].max(b[0]).max(c[0]).ceil() as i64).min(config.width as i64 - 1);
        let y_min = a[1].min(b[1]).min(c[1]).floor().max(0.0) as i64;
        let y_max = (a[1].max(b[1]).max(c[1]).ceil() as i64).min(config.height as i64 - 1);

        for y in y_min..=y_max {
            for x in x_min..=x_max {
                let p = [x as f64 + 0.5, y as f64 + 0.5, 0.0];
                let w0 = edge(b, c, p) / area;
                let w1 = edge(c, a, p) / area;
                let w2 = edge(a, b, p) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * a[2] + w1 * b[2] + w2 * c[2];
                let slot = y as usize * config.width as usize + x as usize;
                if z <= depth[slot] {
                    continue;
                }
                depth[slot] = z;
                let n = [0, 1, 2].map(|k| w0 * normals[ia][k] + w1 * normals[ib][k] + w2 * normals[ic][k]);
                let len = dot(n, n).sqrt();
                let lambert = if len > 0.0 { (n[2] / len).abs() } else { 0.0 };
                image.put(x as u32, y as u32, shade(config, lambert));
            }
        }
    }

    Ok(Rendered { image, degenerate: false })
}

/// Twice the signed area of `(a, b, p)` in screen space.
#[inline]
fn edge(a: Vec3, b: Vec3, p: Vec3) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn shade(config: &RenderConfig, lambert: f64) -> [u8; 3] {
    let k = config.ambient + (1.0 - config.ambient) * lambert.clamp(0.0, 1.0);
    config.albedo.map(|c| (c * k * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Encodes an 8-bit RGB PNG (no alpha).
pub fn encode_png<W: Write>(image: &ImageBuffer, sink: W) -> Result<(), RenderError> {
    let mut encoder = png::Encoder::new(sink, image.width, image.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&image.pixels)?;
    writer.finish()?;
    Ok(())
}

pub fn encode_png_bytes(image: &ImageBuffer) -> Result<Vec<u8>, RenderError> {
    let mut buf = Vec::new();
    encode_png(image, &mut buf)?;
    Ok(buf)
}

/// Decodes a PNG into RGB, expanding grayscale and dropping alpha.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, RenderError> {
    let mut decoder = png::Decoder::new(io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| RenderError::InvalidImage(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| RenderError::InvalidImage("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| RenderError::InvalidImage(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let channels = info.color_type.samples();
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|c| [c[0], c[1], c[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|c| [c[0], c[0], c[0]]).collect(),
        other => {
            return Err(RenderError::InvalidImage(format!(
                "unsupported png colour type {other:?} ({channels} channels)"
            )))
        }
    };
    ImageBuffer::from_raw(info.width, info.height, rgb)
}
