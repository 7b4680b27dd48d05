//! Minimal 8-bit grayscale raster with binary PGM (P5) I/O and an
//! anti-aliased shaft-silhouette renderer used to exercise the edge
//! refinement stage without a render engine.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::cylinder::{self, Cylinder3};
use crate::geometry::{project_point, CameraModel, Point2, Point3, Real};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("pgm: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::Format(format!(
                "expected {} bytes for {}x{}, got {}",
                width * height,
                width,
                height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: u8) {
        self.data[v * self.width + u] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    /// Writes binary PGM (P5), maxval 255. The byte stream is fully
    /// deterministic.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<(), RasterError> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), RasterError> {
        let file = std::fs::File::create(path)?;
        self.write_pgm(io::BufWriter::new(file))
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self, RasterError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::parse_pgm(&bytes)
    }

    pub fn load_pgm(path: &Path) -> Result<Self, RasterError> {
        Self::parse_pgm(&std::fs::read(path)?)
    }

    fn parse_pgm(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut pos = 0;
        let mut fields = Vec::new();
        // Header: magic, width, height, maxval; '#' starts a comment.
        while fields.len() < 4 {
            match bytes.get(pos) {
                None => return Err(RasterError::Format("truncated header".into())),
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => {
                    let start = pos;
                    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                        pos += 1;
                    }
                    fields.push(&bytes[start..pos]);
                }
            }
        }
        if fields[0] != b"P5" {
            return Err(RasterError::Format("not a binary PGM (P5)".into()));
        }
        let parse = |f: &[u8], what: &str| -> Result<usize, RasterError> {
            std::str::from_utf8(f)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| RasterError::Format(format!("bad {what}")))
        };
        let width = parse(fields[1], "width")?;
        let height = parse(fields[2], "height")?;
        let maxval = parse(fields[3], "maxval")?;
        if maxval != 255 {
            return Err(RasterError::Format(format!(
                "only maxval 255 supported, got {maxval}"
            )));
        }
        // Exactly one whitespace byte separates the header from the data.
        pos += 1;
        let expected = width * height;
        if bytes.len() < pos + expected {
            return Err(RasterError::Format("truncated pixel data".into()));
        }
        Self::from_raw(width, height, bytes[pos..pos + expected].to_vec())
    }
}

fn coverage_ramp(signed_dist: Real) -> Real {
    (signed_dist + 0.5).clamp(0.0, 1.0)
}

/// Renders the shaft silhouette (the band between the two projected edges,
/// capped at the shaft ends) as a white-on-black image with ~1 px
/// anti-aliasing. `shaft_length` is the rendered extent along the
/// centerline, proximal from `cyl.p0`.
pub fn render_shaft_silhouette(
    camera: &CameraModel,
    cyl: &Cylinder3,
    shaft_length: Real,
) -> Result<GrayImage, RasterError> {
    let (e1, e2) = cylinder::project_cylinder_edges_normalized(cyl)
        .map_err(|e| RasterError::Format(format!("shaft not projectable: {e}")))?;
    // Pixel-space signed distance fields for the two oriented edges.
    let kt_inv = camera.inverse_matrix().transpose();
    let edge_px = |e: &nalgebra::Vector3<Real>| {
        let l = kt_inv * e;
        let n = (l.x * l.x + l.y * l.y).sqrt();
        (l.x / n, l.y / n, l.z / n)
    };
    let (a1, b1, c1) = edge_px(&e1);
    let (a2, b2, c2) = edge_px(&e2);

    // Axial gating between the projections of the two shaft ends. Clamp the
    // proximal end to stay in front of the camera.
    let d = cyl.d.into_inner();
    let mut len = shaft_length.max(1e-3);
    if d.z > 1e-9 {
        let max_len = (cyl.p0.z - 1e-3) / d.z;
        len = len.min(max_len.max(1e-3));
    }
    let distal = project_point(camera, &cyl.p0)
        .map_err(|e| RasterError::Format(format!("shaft end behind camera: {e}")))?;
    let proximal = project_point(camera, &Point3::from(cyl.p0.coords - len * d))
        .map_err(|e| RasterError::Format(format!("shaft tail behind camera: {e}")))?;
    let axis_img = proximal - distal;
    let axis_len = axis_img.norm();

    let width = camera.width.round() as usize;
    let height = camera.height.round() as usize;
    let mut img = GrayImage::new(width, height);
    for v in 0..height {
        for u in 0..width {
            let p = Point2::new(u as Real + 0.5, v as Real + 0.5);
            let mut cov = coverage_ramp(a1 * p.x + b1 * p.y + c1)
                * coverage_ramp(a2 * p.x + b2 * p.y + c2);
            if axis_len > 1e-9 {
                let s = (p - distal).dot(&axis_img) / axis_len;
                cov *= coverage_ramp(s) * coverage_ramp(axis_len - s);
            }
            img.set(u, v, (cov * 255.0).round() as u8);
        }
    }
    Ok(img)
}
