use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{CameraModel, GeometryError, Point2, Real};

/// A 2D line `A*u + B*v + C = 0` in pixel coordinates, stored in canonical
/// form: `A^2 + B^2 = 1` and the first nonzero of (A, B) positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageLine {
    a: Real,
    b: Real,
    c: Real,
}

impl ImageLine {
    /// Canonicalizes raw coefficients. Fails when (A, B) is numerically zero.
    pub fn new(a: Real, b: Real, c: Real) -> Result<Self, GeometryError> {
        let norm = (a * a + b * b).sqrt();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(GeometryError::DegenerateLine);
        }
        // +0.0 so that -0.0 coefficients compare and hash like +0.0.
        let mut a = a / norm + 0.0;
        let mut b = b / norm + 0.0;
        let mut c = c / norm + 0.0;
        let flip = a < 0.0 || (a == 0.0 && b < 0.0);
        if flip {
            a = -a + 0.0;
            b = -b + 0.0;
            c = -c + 0.0;
        }
        Ok(Self { a, b, c })
    }

    /// Line through two distinct points.
    pub fn through(p: &Point2, q: &Point2) -> Result<Self, GeometryError> {
        // (A, B) is the normal of the direction q - p.
        Self::new(
            q.y - p.y,
            p.x - q.x,
            q.x * p.y - p.x * q.y, // cross(q, p)
        )
    }

    pub fn a(&self) -> Real {
        self.a
    }

    pub fn b(&self) -> Real {
        self.b
    }

    pub fn c(&self) -> Real {
        self.c
    }

    pub fn coefficients(&self) -> [Real; 3] {
        [self.a, self.b, self.c]
    }

    /// Signed value `A*u + B*v + C`; equals the signed distance because the
    /// coefficients are unit-normalized.
    pub fn eval(&self, p: &Point2) -> Real {
        self.a * p.x + self.b * p.y + self.c
    }

    /// Absolute point-to-line distance in pixels.
    pub fn distance(&self, p: &Point2) -> Real {
        self.eval(p).abs()
    }

    /// Direction angle of the line normal, in [0, pi).
    pub fn normal_angle(&self) -> Real {
        let theta = self.b.atan2(self.a);
        if theta < 0.0 {
            theta + PI
        } else if theta >= PI {
            theta - PI
        } else {
            theta
        }
    }
}

/// Centered polar line parameters: the unique global descriptor
/// `rho_c = (u - W/2) cos(theta_c) + (v - H/2) sin(theta_c)` with
/// `theta_c` in [0, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughLine {
    /// Normal angle (radians), folded into [0, pi).
    pub theta_c: Real,
    /// Signed distance from the image center (pixels).
    pub rho_c: Real,
}

impl HoughLine {
    /// Normalizes theta into [0, pi); theta = pi folds to 0 with rho negated.
    pub fn new(theta_c: Real, rho_c: Real) -> Self {
        let mut theta = theta_c.rem_euclid(2.0 * PI);
        let mut rho = rho_c;
        if theta >= PI {
            theta -= PI;
            rho = -rho;
        }
        // rem_euclid can land exactly on pi for inputs just below -pi.
        if theta >= PI {
            theta -= PI;
            rho = -rho;
        }
        Self {
            theta_c: theta,
            rho_c: rho,
        }
    }
}

/// Converts a canonical pixel-space line to centered polar parameters.
///
/// Works directly on the (A, B, C) form, so lines through the image center
/// (and through the pixel origin) are handled without special cases.
pub fn line_to_hough(line: &ImageLine, camera: &CameraModel) -> HoughLine {
    // Translate the coordinate origin to the image center: the C coefficient
    // becomes C + A*W/2 + B*H/2 while (A, B) is unchanged.
    let c_centered = line.c() + line.a() * camera.width / 2.0 + line.b() * camera.height / 2.0;
    let theta = line.b().atan2(line.a());
    if theta < 0.0 {
        // Fold the normal angle into [0, pi); rho changes sign with it.
        HoughLine::new(theta + PI, c_centered)
    } else {
        HoughLine::new(theta, -c_centered)
    }
}

/// Inverse of [`line_to_hough`].
pub fn hough_to_line(h: &HoughLine, camera: &CameraModel) -> ImageLine {
    let (sin_t, cos_t) = h.theta_c.sin_cos();
    let c = -h.rho_c - cos_t * camera.width / 2.0 - sin_t * camera.height / 2.0;
    ImageLine::new(cos_t, sin_t, c).expect("unit normal cannot be degenerate")
}

/// Clips an infinite line to the image rectangle [0, W] x [0, H].
///
/// Returns the chord endpoints ordered by ascending u (ties by ascending v),
/// or `None` when the line misses the rectangle.
pub fn clip_line_to_image(line: &ImageLine, camera: &CameraModel) -> Option<(Point2, Point2)> {
    // Point on the line closest to the pixel origin, direction along the line.
    let px = -line.c() * line.a();
    let py = -line.c() * line.b();
    let dx = -line.b();
    let dy = line.a();

    // Liang-Barsky interval clipping of p + s*d against the rectangle.
    let mut s_min = Real::NEG_INFINITY;
    let mut s_max = Real::INFINITY;
    for (p, d, lo, hi) in [
        (px, dx, 0.0, camera.width),
        (py, dy, 0.0, camera.height),
    ] {
        if d.abs() < 1e-15 {
            if p < lo || p > hi {
                return None;
            }
        } else {
            let (s0, s1) = ((lo - p) / d, (hi - p) / d);
            let (s0, s1) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
            s_min = s_min.max(s0);
            s_max = s_max.min(s1);
        }
    }
    if s_min > s_max {
        return None;
    }
    let e0 = Point2::new(px + s_min * dx, py + s_min * dy);
    let e1 = Point2::new(px + s_max * dx, py + s_max * dy);
    if (e0.x, e0.y) <= (e1.x, e1.y) {
        Some((e0, e1))
    } else {
        Some((e1, e0))
    }
}
