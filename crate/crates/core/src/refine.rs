//! Pixel-level edge refinement: gate edge pixels near a coarse line
//! hypothesis, then re-fit the inliers with RANSAC and a total
//! least-squares polish.
//!
//! The module is detector-agnostic: edge pixels can come from an external
//! detector (plain-text `u v` files) or from the built-in gradient
//! extractor for synthetic rasters.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{ImageLine, Point2, Real};
use crate::raster::GrayImage;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("need at least 2 points to fit a line, got {0}")]
    InsufficientPoints(usize),
    #[error("edge pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds {
        u: i64,
        v: i64,
        width: usize,
        height: usize,
    },
    #[error("edge pixel file line {line}: {reason}")]
    BadPixelFile { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Provenance tag for an edge pixel set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSource {
    ExternalDetector,
    BuiltinGradient,
}

/// Sparse integer edge map.
#[derive(Debug, Clone)]
pub struct EdgePixelSet {
    pub pixels: Vec<(u32, u32)>,
    pub source: EdgeSource,
}

impl EdgePixelSet {
    /// Validates that all pixels fall inside a `width x height` image.
    pub fn new(
        pixels: Vec<(u32, u32)>,
        source: EdgeSource,
        width: usize,
        height: usize,
    ) -> Result<Self, RefineError> {
        for &(u, v) in &pixels {
            if u as usize >= width || v as usize >= height {
                return Err(RefineError::PixelOutOfBounds {
                    u: u as i64,
                    v: v as i64,
                    width,
                    height,
                });
            }
        }
        Ok(Self { pixels, source })
    }

    /// Reads a plain-text file with one `u v` integer pair per line.
    pub fn from_text_file(
        path: &Path,
        width: usize,
        height: usize,
    ) -> Result<Self, RefineError> {
        let text = std::fs::read_to_string(path)?;
        let mut pixels = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<u32, RefineError> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| RefineError::BadPixelFile {
                        line: i + 1,
                        reason: format!("expected two integers, got {raw:?}"),
                    })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(RefineError::BadPixelFile {
                    line: i + 1,
                    reason: format!("trailing tokens in {raw:?}"),
                });
            }
            pixels.push((u, v));
        }
        Self::new(pixels, EdgeSource::ExternalDetector, width, height)
    }

    pub fn write_text_file(&self, path: &Path) -> Result<(), RefineError> {
        let mut out = String::new();
        for &(u, v) in &self.pixels {
            out.push_str(&format!("{u} {v}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RefineConfig {
    /// Inlier gate: maximum point-to-line distance (pixels).
    pub distance_threshold: Real,
    /// Below this inlier count the input line is returned unchanged.
    pub min_inliers: usize,
    pub ransac_iterations: usize,
    /// RANSAC consensus tolerance (pixels).
    pub ransac_inlier_tol: Real,
    pub rng_seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            distance_threshold: 3.0,
            min_inliers: 10,
            ransac_iterations: 200,
            ransac_inlier_tol: 1.0,
            rng_seed: 0,
        }
    }
}

/// Extracts edge pixels from a grayscale raster: Sobel gradient magnitude
/// thresholded by Otsu's method, thinned to local maxima along the
/// gradient direction.
pub fn extract_edge_pixels(image: &GrayImage) -> Result<EdgePixelSet, RefineError> {
    let (w, h) = (image.width(), image.height());
    if w == 0 || h == 0 {
        return Err(RefineError::EmptyImage);
    }
    if w < 3 || h < 3 {
        return EdgePixelSet::new(Vec::new(), EdgeSource::BuiltinGradient, w, h);
    }

    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    let mut mag = vec![0.0f64; w * h];
    let px = |u: usize, v: usize| image.get(u, v) as f64;
    let mut max_mag = 0.0f64;
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            let sx = (px(u + 1, v - 1) + 2.0 * px(u + 1, v) + px(u + 1, v + 1))
                - (px(u - 1, v - 1) + 2.0 * px(u - 1, v) + px(u - 1, v + 1));
            let sy = (px(u - 1, v + 1) + 2.0 * px(u, v + 1) + px(u + 1, v + 1))
                - (px(u - 1, v - 1) + 2.0 * px(u, v - 1) + px(u + 1, v - 1));
            let m = (sx * sx + sy * sy).sqrt();
            let i = v * w + u;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = m;
            max_mag = max_mag.max(m);
        }
    }
    if max_mag <= 0.0 {
        return EdgePixelSet::new(Vec::new(), EdgeSource::BuiltinGradient, w, h);
    }

    // Otsu threshold over a 256-bin histogram of scaled magnitudes.
    let scale = 255.0 / max_mag;
    let mut hist = [0u64; 256];
    for &m in &mag {
        hist[(m * scale).round().min(255.0) as usize] += 1;
    }
    let threshold_bin = otsu_threshold(&hist);
    let threshold = threshold_bin as f64 / scale;

    let mut pixels = Vec::new();
    for v in 1..h - 1 {
        for u in 1..w - 1 {
            let i = v * w + u;
            if mag[i] <= threshold || mag[i] <= 0.0 {
                continue;
            }
            // Non-maximum suppression along the quantized gradient direction.
            let (du, dv) = quantize_direction(gx[i], gy[i]);
            let m_fwd = mag[(v as isize + dv) as usize * w + (u as isize + du) as usize];
            let m_bwd = mag[(v as isize - dv) as usize * w + (u as isize - du) as usize];
            if mag[i] >= m_fwd && mag[i] >= m_bwd {
                pixels.push((u as u32, v as u32));
            }
        }
    }
    EdgePixelSet::new(pixels, EdgeSource::BuiltinGradient, w, h)
}

/// Maximizes between-class variance; returns the threshold bin.
fn otsu_threshold(hist: &[u64; 256]) -> usize {
    let total: u64 = hist.iter().sum();
    let total_f = total as f64;
    let global_sum: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut best_bin = 0;
    let mut best_var = -1.0;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for (bin, &count) in hist.iter().enumerate() {
        w0 += count as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total_f - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += bin as f64 * count as f64;
        let mu0 = sum0 / w0;
        let mu1 = (global_sum - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_bin = bin;
        }
    }
    best_bin
}

fn quantize_direction(gx: f64, gy: f64) -> (isize, isize) {
    let angle = gy.atan2(gx).to_degrees();
    let angle = if angle < 0.0 { angle + 180.0 } else { angle };
    match angle {
        a if !(22.5..157.5).contains(&a) => (1, 0),
        a if a < 67.5 => (1, 1),
        a if a < 112.5 => (0, 1),
        _ => (-1, 1),
    }
}

/// Total least-squares line through a point set: minimizes the sum of
/// squared perpendicular distances. Returns `None` when the points are
/// coincident.
pub fn fit_line_tls(points: &[Point2]) -> Option<ImageLine> {
    let n = points.len() as Real;
    if points.len() < 2 {
        return None;
    }
    let cx = points.iter().map(|p| p.x).sum::<Real>() / n;
    let cy = points.iter().map(|p| p.y).sum::<Real>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy < 1e-18 {
        return None;
    }
    // Normal = eigenvector of the smaller eigenvalue of the scatter matrix.
    let trace_half = (sxx + syy) / 2.0;
    let det = sxx * syy - sxy * sxy;
    let disc = (trace_half * trace_half - det).max(0.0).sqrt();
    let lambda_min = trace_half - disc;
    // (sxx - l) * a + sxy * b = 0; pick the better-conditioned row.
    let (a, b) = if (sxx - lambda_min).abs() > (syy - lambda_min).abs() {
        (sxy, -(sxx - lambda_min))
    } else {
        (-(syy - lambda_min), sxy)
    };
    let (a, b) = if a.abs() + b.abs() < 1e-18 {
        // Isotropic scatter: direction is arbitrary, fall back to x-axis.
        (0.0, 1.0)
    } else {
        (a, b)
    };
    ImageLine::new(a, b, -(a * cx + b * cy)).ok()
}

/// RANSAC line fit: best-consensus 2-point hypothesis, polished with a
/// total least-squares re-fit over its inlier set. Deterministic for a
/// fixed seed.
pub fn ransac_fit_line(points: &[Point2], cfg: &RefineConfig) -> Result<ImageLine, RefineError> {
    if points.len() < 2 {
        return Err(RefineError::InsufficientPoints(points.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut best: Option<(usize, ImageLine)> = None;
    for _ in 0..cfg.ransac_iterations.max(1) {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        if i == j {
            continue;
        }
        let Ok(hyp) = ImageLine::through(&points[i], &points[j]) else {
            continue;
        };
        let inliers = points
            .iter()
            .filter(|p| hyp.distance(p) <= cfg.ransac_inlier_tol)
            .count();
        if best.as_ref().is_none_or(|(n, _)| inliers > *n) {
            best = Some((inliers, hyp));
        }
    }
    let (_, hyp) = best.ok_or(RefineError::InsufficientPoints(points.len()))?;
    let consensus: Vec<Point2> = points
        .iter()
        .copied()
        .filter(|p| hyp.distance(p) <= cfg.ransac_inlier_tol)
        .collect();
    Ok(fit_line_tls(&consensus).unwrap_or(hyp))
}

/// Refines a coarse line against edge evidence.
///
/// Gates edge pixels within `distance_threshold` of the input line; with
/// fewer than `min_inliers` the input is returned unchanged (bitwise).
/// Otherwise the gated set is re-fit by [`ransac_fit_line`], and the refit
/// is kept only when it does not worsen the median gated-pixel distance.
pub fn refine_line(line: &ImageLine, edges: &EdgePixelSet, cfg: &RefineConfig) -> ImageLine {
    let gated: Vec<Point2> = edges
        .pixels
        .iter()
        .map(|&(u, v)| Point2::new(u as Real, v as Real))
        .filter(|p| line.distance(p) < cfg.distance_threshold)
        .collect();
    if gated.len() < cfg.min_inliers.max(2) {
        return *line;
    }
    let Ok(refined) = ransac_fit_line(&gated, cfg) else {
        return *line;
    };
    if median_distance(&refined, &gated) <= median_distance(line, &gated) {
        refined
    } else {
        *line
    }
}

fn median_distance(line: &ImageLine, points: &[Point2]) -> Real {
    let mut d: Vec<Real> = points.iter().map(|p| line.distance(p)).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / 2.0
    }
}
