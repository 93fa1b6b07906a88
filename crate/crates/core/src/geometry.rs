//! Superformula evaluation, the 3D spherical-product surface, tessellation and
//! OBJ export.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Default grid resolution along both parameter axes.
pub const DEFAULT_RESOLUTION: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid superformula parameters: {0}")]
    InvalidParams(String),
    #[error("invalid tessellation resolution {theta}x{phi}: both must be at least 3")]
    InvalidResolution { theta: usize, phi: usize },
    #[error("surface evaluates to a non-finite point at theta={theta}, phi={phi}")]
    NonFiniteSurface { theta: f64, phi: f64 },
}

/// The six scalars of one superformula instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperformulaParams {
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

impl SuperformulaParams {
    /// Builds a parameter set, rejecting values for which the radius is undefined.
    pub fn new(m: f64, a: f64, b: f64, n1: f64, n2: f64, n3: f64) -> Result<Self, GeometryError> {
        let params = Self { m, a, b, n1, n2, n3 };
        params.validate()?;
        Ok(params)
    }

    /// `a = b = 1, n1 = n2 = n3 = 2`: the bracket is `cos² + sin²`, so the radius is 1 everywhere.
    pub const fn unit_circle() -> Self {
        Self { m: 0.0, a: 1.0, b: 1.0, n1: 2.0, n2: 2.0, n3: 2.0 }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [("m", self.m), ("a", self.a), ("b", self.b), ("n1", self.n1), ("n2", self.n2), ("n3", self.n3)];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(GeometryError::InvalidParams(format!("{name} = {value} is not finite")));
            }
        }
        for (name, value) in [("a", self.a), ("b", self.b), ("n1", self.n1)] {
            if value <= 0.0 {
                return Err(GeometryError::InvalidParams(format!("{name} = {value} must be > 0")));
            }
        }
        for (name, value) in [("n2", self.n2), ("n3", self.n3)] {
            if value < 0.0 {
                return Err(GeometryError::InvalidParams(format!("{name} = {value} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Unchecked radius; callers must have validated `self`.
    #[inline]
    fn radius_unchecked(&self, angle: f64) -> f64 {
        let t = self.m * angle / 4.0;
        let c = (t.cos() / self.a).abs().powf(self.n2);
        let s = (t.sin() / self.b).abs().powf(self.n3);
        (c + s).powf(-1.0 / self.n1)
    }
}

/// Superformula radius `r(angle)`.
///
/// The two bracket terms never vanish together (cos and sin share no zero),
/// so the result is strictly positive for valid parameters.
pub fn radius2d(params: &SuperformulaParams, angle: f64) -> Result<f64, GeometryError> {
    params.validate()?;
    if !angle.is_finite() {
        return Err(GeometryError::InvalidParams(format!("angle {angle} is not finite")));
    }
    Ok(params.radius_unchecked(angle))
}

/// Point on the supershape: `r1` is evaluated at longitude `theta`, `r2` at
/// latitude `phi`.
pub fn surface_point(
    r1: &SuperformulaParams,
    r2: &SuperformulaParams,
    theta: f64,
    phi: f64,
) -> Result<Vec3, GeometryError> {
    r1.validate()?;
    r2.validate()?;
    if !theta.is_finite() || !phi.is_finite() {
        return Err(GeometryError::InvalidParams(format!("surface coordinates ({theta}, {phi}) are not finite")));
    }
    Ok(point_unchecked(r1, r2, theta, phi))
}

#[inline]
fn point_unchecked(r1: &SuperformulaParams, r2: &SuperformulaParams, theta: f64, phi: f64) -> Vec3 {
    let rt = r1.radius_unchecked(theta);
    let rp = r2.radius_unchecked(phi);
    [rt * theta.cos() * rp * phi.cos(), rt * theta.sin() * rp * phi.cos(), rp * phi.sin()]
}

/// Longitude of grid column `i` for a tessellation with `resolution` steps.
#[inline]
pub fn grid_theta(i: usize, resolution: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / resolution as f64
}

/// Latitude of grid row `j` for a tessellation with `resolution` steps.
#[inline]
pub fn grid_phi(j: usize, resolution: usize) -> f64 {
    -FRAC_PI_2 + PI * j as f64 / resolution as f64
}

/// Indexed triangle mesh with per-vertex unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }
}

/// Samples the supershape on an inclusive `(theta, phi)` grid and triangulates it.
///
/// Vertex `(i, j)` (column `i` along theta, row `j` along phi) lives at index
/// `j * (resolution_theta + 1) + i`. Quads touching a pole row emit one
/// triangle instead of two.
pub fn tessellate(
    r1: &SuperformulaParams,
    r2: &SuperformulaParams,
    resolution_theta: usize,
    resolution_phi: usize,
) -> Result<TriangleMesh, GeometryError> {
    r1.validate()?;
    r2.validate()?;
    if resolution_theta < 3 || resolution_phi < 3 {
        return Err(GeometryError::InvalidResolution { theta: resolution_theta, phi: resolution_phi });
    }

    let cols = resolution_theta + 1;
    let rows = resolution_phi + 1;
    let mut vertices = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        let phi = grid_phi(j, resolution_phi);
        for i in 0..cols {
            let theta = grid_theta(i, resolution_theta);
            let p = point_unchecked(r1, r2, theta, phi);
            if !p.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFiniteSurface { theta, phi });
            }
            vertices.push(p);
        }
    }

    let index = |i: usize, j: usize| (j * cols + i) as u32;
    let mut triangles = Vec::with_capacity(2 * resolution_theta * resolution_phi);
    for j in 0..resolution_phi {
        for i in 0..resolution_theta {
            let v00 = index(i, j);
            let v10 = index(i + 1, j);
            let v01 = index(i, j + 1);
            let v11 = index(i + 1, j + 1);
            // Row 0 sits on the south pole (v00 ~ v10), the last row on the north pole (v01 ~ v11).
            if j != 0 {
                triangles.push([v00, v10, v11]);
            }
            if j + 1 != resolution_phi {
                triangles.push([v00, v11, v01]);
            }
        }
    }

    let normals = vertex_normals(&vertices, &triangles);
    Ok(TriangleMesh { vertices, normals, triangles })
}

/// Area-weighted vertex normals.
///
/// Positions are rescaled by their largest magnitude first so that cross
/// products of very large supershapes do not overflow.
pub fn vertex_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let extent = vertices.iter().flat_map(|v| v.iter()).fold(0.0f64, |acc, c| acc.max(c.abs()));
    let inv = if extent > 0.0 { 1.0 / extent } else { 1.0 };
    let scaled: Vec<Vec3> = vertices.iter().map(|v| scale(*v, inv)).collect();

    let mut acc = vec![[0.0; 3]; vertices.len()];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| i as usize);
        let n = cross(sub(scaled[b], scaled[a]), sub(scaled[c], scaled[a]));
        for idx in [a, b, c] {
            acc[idx] = add(acc[idx], n);
        }
    }

    acc.into_iter()
        .zip(&scaled)
        .map(|(n, p)| normalize(n).or_else(|| normalize(*p)).unwrap_or([0.0, 0.0, 1.0]))
        .collect()
}

/// Writes the mesh as Wavefront OBJ: `v`, then `vn`, then `f a//a b//b c//c`
/// lines with 1-based indices and six decimal places.
pub fn export_obj<W: Write>(mesh: &TriangleMesh, sink: &mut W) -> io::Result<()> {
    let mut out = io::BufWriter::new(sink);
    for v in &mesh.vertices {
        writeln!(out, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2])?;
    }
    for n in &mesh.normals {
        writeln!(out, "vn {:.6} {:.6} {:.6}", n[0], n[1], n[2])?;
    }
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
    }
    out.flush()
}

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn normalize(v: Vec3) -> Option<Vec3> {
    let len = dot(v, v).sqrt();
    (len > 0.0 && len.is_finite()).then(|| scale(v, 1.0 / len))
}
