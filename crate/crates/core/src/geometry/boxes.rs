use super::vec3::{det3, Vec3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxTag {
    Tube2D,
    Plate,
    Plank,
    Cube,
    CapBox,
}

/// A rectangular box `center + sum_i s_i axes[i]`, `|s_i| <= half[i]`.
///
/// Planar boxes live in the `xy` plane: their third axis is `z` and only
/// the first two half-dimensions are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub half: [f64; 3],
    pub tag: BoxTag,
    pub planar: bool,
    /// Set when the box pokes out of the region it was generated for.
    #[serde(default)]
    pub clipped: bool,
}

const ORTHO_TOL: f64 = 1e-10;

impl OrientedBox {
    pub fn new(center: Vec3, axes: [Vec3; 3], half: [f64; 3], tag: BoxTag) -> Result<Self> {
        for i in 0..3 {
            if !(half[i] > 0.0 && half[i].is_finite()) {
                return Err(Error::InvalidSpec(format!("half-dimension {} = {}", i, half[i])));
            }
            if (axes[i].norm() - 1.0).abs() > ORTHO_TOL {
                return Err(Error::InvalidSpec(format!("axis {i} is not a unit vector")));
            }
            for j in i + 1..3 {
                if axes[i].dot(&axes[j]).abs() > ORTHO_TOL {
                    return Err(Error::InvalidSpec(format!("axes {i} and {j} are not orthogonal")));
                }
            }
        }
        Ok(Self { center, axes, half, tag, planar: false, clipped: false })
    }

    /// Planar rectangle: long axis at angle `theta`, half-length and
    /// half-width as given.
    pub fn planar(cx: f64, cy: f64, theta: f64, half_len: f64, half_width: f64, tag: BoxTag) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        let mut b = Self::new(
            Vec3::new(cx, cy, 0.0),
            [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::Z],
            [half_len, half_width, 0.5],
            tag,
        )?;
        b.planar = true;
        Ok(b)
    }

    /// Axis-aligned square (planar) or cube of the given half-side.
    pub fn axis_aligned(center: Vec3, half_side: f64, planar: bool) -> Self {
        Self {
            center,
            axes: [Vec3::X, Vec3::Y, Vec3::Z],
            half: [half_side; 3],
            tag: BoxTag::Cube,
            planar,
            clipped: false,
        }
    }

    pub fn dims(&self) -> usize {
        if self.planar {
            2
        } else {
            3
        }
    }

    /// Area for planar boxes, volume otherwise.
    pub fn measure(&self) -> f64 {
        if self.planar {
            4.0 * self.half[0] * self.half[1]
        } else {
            8.0 * self.half[0] * self.half[1] * self.half[2]
        }
    }

    pub fn corners(&self) -> Vec<Vec3> {
        let signs: &[[f64; 3]] = if self.planar {
            &[[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0]]
        } else {
            &[
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
                [1.0, -1.0, 1.0],
                [-1.0, 1.0, 1.0],
                [1.0, 1.0, 1.0],
            ]
        };
        signs
            .iter()
            .map(|s| {
                let mut p = self.center;
                for i in 0..3 {
                    p = p + self.axes[i] * (s[i] * self.half[i]);
                }
                p
            })
            .collect()
    }

    /// Coordinates of `p` in the box frame.
    pub fn local(&self, p: &Vec3) -> [f64; 3] {
        let d = *p - self.center;
        [d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2])]
    }

    /// Whether `p` lies in the box up to an absolute slack `tol`.
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        let l = self.local(p);
        (0..self.dims()).all(|i| l[i].abs() <= self.half[i] + tol)
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        let mut lo = self.center;
        let mut hi = self.center;
        for k in 0..3 {
            let r: f64 = (0..self.dims()).map(|i| self.half[i] * self.axes[i].0[k].abs()).sum();
            lo.0[k] -= r;
            hi.0[k] += r;
        }
        (lo, hi)
    }

    /// Same box with every half-dimension multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut b = *self;
        b.half.iter_mut().for_each(|h| *h *= factor);
        b
    }

    /// Aspect sanity: tubes have one long side, plates two comparable long
    /// sides and one short, planks three distinct scales. `c` is the
    /// comparability constant.
    pub fn aspect_consistent(&self, c: f64) -> bool {
        let mut h = if self.planar { vec![self.half[0], self.half[1]] } else { self.half.to_vec() };
        h.sort_by(|a, b| a.total_cmp(b));
        match self.tag {
            BoxTag::Tube2D => self.planar && h[1] >= c * h[0],
            BoxTag::Plate => h[2] <= c * h[1] && h[1] >= c * h[0],
            BoxTag::Plank => h[1] >= h[0] && h[2] >= h[1] && h[2] > h[0],
            BoxTag::Cube => h[h.len() - 1] <= c * h[0],
            BoxTag::CapBox => true,
        }
    }

    /// Separating-axis test. Boxes that merely touch are not overlapping.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let d = other.center - self.center;
        let radius = |b: &OrientedBox, axis: &Vec3| -> f64 {
            (0..b.dims()).map(|i| b.half[i] * b.axes[i].dot(axis).abs()).sum()
        };
        let separated = |axis: &Vec3| -> bool {
            let n = axis.norm();
            if n < 1e-12 {
                return false;
            }
            d.dot(axis).abs() >= radius(self, axis) + radius(other, axis) - 1e-15 * n
        };
        if self.planar && other.planar {
            return !(0..2).any(|i| separated(&self.axes[i]) || separated(&other.axes[i]));
        }
        for i in 0..3 {
            if separated(&self.axes[i]) || separated(&other.axes[i]) {
                return false;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                if separated(&self.axes[i].cross(&other.axes[j])) {
                    return false;
                }
            }
        }
        true
    }

    /// Exact area (planar) or volume of the intersection with `other`.
    pub fn intersection_measure(&self, other: &OrientedBox) -> f64 {
        if self.planar != other.planar {
            return 0.0;
        }
        if !self.overlaps(other) {
            return 0.0;
        }
        if self.planar {
            let mut poly: Vec<[f64; 2]> = self.corners().iter().map(|p| [p.x(), p.y()]).collect();
            for (n, d) in other.half_spaces() {
                poly = clip_polygon_2d(&poly, [n.x(), n.y()], d);
                if poly.len() < 3 {
                    return 0.0;
                }
            }
            polygon_area(&poly)
        } else {
            let mut poly = Polytope::from_box(self);
            for (n, d) in other.half_spaces() {
                poly = poly.clip(&n, d);
                if poly.faces.is_empty() {
                    return 0.0;
                }
            }
            poly.volume()
        }
    }

    /// Outward half-spaces `n . x <= d` bounding the box.
    pub fn half_spaces(&self) -> Vec<(Vec3, f64)> {
        let mut out = Vec::with_capacity(6);
        for i in 0..self.dims() {
            let n = self.axes[i];
            let c = n.dot(&self.center);
            out.push((n, c + self.half[i]));
            out.push((-n, -c + self.half[i]));
        }
        out
    }
}

/// Sutherland–Hodgman clip of a polygon against `n . x <= d`.
pub fn clip_polygon_2d(poly: &[[f64; 2]], n: [f64; 2], d: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let dist = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - d;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (dist(&a), dist(&b));
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Shoelace area (absolute value).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Convex polytope as a list of outward-oriented face polygons.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub faces: Vec<Vec<Vec3>>,
}

impl Polytope {
    pub fn from_box(b: &OrientedBox) -> Self {
        // make the frame right-handed so the face winding below is outward
        let mut axes = b.axes;
        let mut half = b.half;
        if det3(&axes[0], &axes[1], &axes[2]) < 0.0 {
            axes.swap(0, 1);
            half.swap(0, 1);
        }
        let mut faces = Vec::with_capacity(6);
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for sign in [1.0, -1.0] {
                let fc = b.center + axes[i] * (sign * half[i]);
                let u = axes[j] * half[j];
                let v = axes[k] * half[k];
                let mut face = vec![fc + u + v, fc - u + v, fc - u - v, fc + u - v];
                if sign < 0.0 {
                    face.reverse();
                }
                faces.push(face);
            }
        }
        Self { faces }
    }

    /// Keep the part with `n . x <= d`.
    pub fn clip(&self, n: &Vec3, d: f64) -> Polytope {
        // signed distances within rounding of the plane count as on it
        let scale = self.faces.iter().flatten().fold(d.abs(), |m, p| m.max(p.max_abs() * n.max_abs()));
        let eps = 1e-13 * scale.max(1e-300);
        let side = |p: &Vec3| {
            let s = n.dot(p) - d;
            if s.abs() <= eps { 0.0 } else { s }
        };
        let (mut inside, mut outside) = (false, false);
        for p in self.faces.iter().flatten() {
            let s = side(p);
            inside |= s < 0.0;
            outside |= s > 0.0;
        }
        if !inside {
            return Polytope { faces: Vec::new() };
        }
        if !outside {
            // a plane through an existing face must not add a second copy of it
            return self.clone();
        }
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut section: Vec<Vec3> = Vec::new();
        for face in &self.faces {
            let mut out = Vec::with_capacity(face.len() + 2);
            for i in 0..face.len() {
                let a = face[i];
                let b = face[(i + 1) % face.len()];
                let (da, db) = (side(&a), side(&b));
                if da <= 0.0 {
                    out.push(a);
                    if da == 0.0 {
                        section.push(a);
                    }
                }
                if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                    let t = da / (da - db);
                    let p = a + (b - a) * t;
                    out.push(p);
                    section.push(p);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if faces.is_empty() {
            return Polytope { faces };
        }
        // cap polygon: order the section points by angle about their centroid
        let mut pts: Vec<Vec3> = Vec::with_capacity(section.len());
        let scale = section.iter().fold(0.0f64, |m, p| m.max(p.max_abs())).max(1.0);
        for p in section {
            if !pts.iter().any(|q| (*q - p).max_abs() <= 1e-14 * scale) {
                pts.push(p);
            }
        }
        if pts.len() >= 3 {
            let centroid = pts.iter().fold(Vec3::ZERO, |acc, p| acc + *p) * (1.0 / pts.len() as f64);
            let helper = if n.x().abs() < 0.9 { Vec3::X } else { Vec3::Y };
            let e1 = n.cross(&helper).normalized();
            let e2 = n.normalized().cross(&e1);
            let mut keyed: Vec<(f64, Vec3)> = pts
                .into_iter()
                .map(|p| {
                    let r = p - centroid;
                    (r.dot(&e2).atan2(r.dot(&e1)), p)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            faces.push(keyed.into_iter().map(|(_, p)| p).collect());
        }
        Polytope { faces }
    }

    /// Volume by the divergence theorem over fan triangles.
    pub fn volume(&self) -> f64 {
        let Some(origin) = self.faces.first().and_then(|f| f.first()).copied() else {
            return 0.0;
        };
        let mut v = 0.0;
        for face in &self.faces {
            let a = face[0] - origin;
            for i in 1..face.len() - 1 {
                v += det3(&a, &(face[i] - origin), &(face[i + 1] - origin));
            }
        }
        (v / 6.0).max(0.0)
    }
}
