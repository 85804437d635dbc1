use super::boxes::{BoxTag, OrientedBox};
use super::vec3::Vec3;
use crate::expsum::frenet_frame;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A closed parameter interval `[lo, lo + len]` inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub len: f64,
}

impl Interval {
    pub fn new(lo: f64, len: f64) -> Result<Self> {
        if !(len > 0.0 && lo >= -1e-12 && lo + len <= 1.0 + 1e-12) {
            return Err(Error::Precondition(format!("interval [{lo}, {lo} + {len}] not inside [0, 1]")));
        }
        Ok(Self { lo, len })
    }
    pub fn mid(&self) -> f64 {
        self.lo + 0.5 * self.len
    }
    pub fn hi(&self) -> f64 {
        self.lo + self.len
    }
}

/// `(delta, 1, 1)`-plate with normal `t(mid I)` and in-plane axes
/// `n(mid I)`, `b(mid I)`, centered at `center`. The `clipped` flag records
/// whether it leaves `[0, 1]^3`.
pub fn vinogradov_plate(interval: Interval, center: Vec3) -> Result<OrientedBox> {
    let f = frenet_frame(interval.mid());
    let mut plate = OrientedBox::new(center, [f.t_vec, f.n_vec, f.b_vec], [interval.len / 2.0, 0.5, 0.5], BoxTag::Plate)?;
    let eps = 1e-12;
    plate.clipped = plate
        .corners()
        .iter()
        .any(|p| p.0.iter().any(|&v| v < -eps || v > 1.0 + eps));
    Ok(plate)
}

/// Angle between two plates (between their normals, folded into `[0, pi/2]`).
pub fn plate_angle(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let ang = a.axes[0].angle(&b.axes[0]);
    ang.min(std::f64::consts::PI - ang)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateIntersection {
    pub volume: f64,
    pub angle: f64,
    /// `delta^2 / D` with `delta` the thinner plate and `D` the angle.
    pub predicted: f64,
}

pub fn plate_intersection_volume(s1: &OrientedBox, s2: &OrientedBox) -> Result<PlateIntersection> {
    if s1.tag != BoxTag::Plate || s2.tag != BoxTag::Plate || s1.planar || s2.planar {
        return Err(Error::Precondition("both arguments must be plates".into()));
    }
    let delta = (2.0 * s1.half[0]).min(2.0 * s2.half[0]);
    let angle = plate_angle(s1, s2);
    let volume = s1.intersection_measure(s2);
    let predicted = if angle > 0.0 { delta * delta / angle } else { f64::INFINITY };
    Ok(PlateIntersection { volume, angle, predicted })
}

/// Plank of side lengths `(c delta, c delta / D, c)` centered at the origin:
/// short axis `t(t0)`, long axis along `t(t0) x t(t0 + D)`.
pub fn small_angle_plank(t0: f64, d: f64, delta: f64, c: f64) -> Result<OrientedBox> {
    let short = frenet_frame(t0).t_vec;
    let long = short.cross(&frenet_frame(t0 + d).t_vec).normalized();
    let middle = long.cross(&short);
    OrientedBox::new(
        Vec3::ZERO,
        [short, middle, long],
        [c * delta / 2.0, c * delta / d / 2.0, c / 2.0],
        BoxTag::Plank,
    )
}

/// Whether the plank attached to `J = [t0, t0 + D]` sits inside the
/// origin-centered plate of `I`, by checking its eight corners.
pub fn plank_in_plate_check(j: Interval, i: Interval, c: f64) -> Result<bool> {
    if i.lo < j.lo - 1e-12 || i.hi() > j.hi() + 1e-12 {
        return Err(Error::Precondition("I must be contained in J".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Precondition("shrink constant must be positive".into()));
    }
    let plank = small_angle_plank(j.lo, j.len, i.len, c)?;
    let plate = vinogradov_plate(i, Vec3::ZERO)?;
    Ok(plank.corners().iter().all(|p| plate.contains(p, 1e-15)))
}

/// Origin-centered Vinogradov plank `(R^{1/3}, R^{2/3}, R)` along the
/// frame at `t`.
pub fn vinogradov_plank(t: f64, r: f64) -> OrientedBox {
    let f = frenet_frame(t);
    OrientedBox::new(
        Vec3::ZERO,
        [f.t_vec, f.n_vec, f.b_vec],
        [r.cbrt() / 2.0, r.powf(2.0 / 3.0) / 2.0, r / 2.0],
        BoxTag::Plank,
    )
    .expect("frame is orthonormal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosingBox {
    pub bounding: OrientedBox,
    /// Smallest `K` with every plank corner inside `K (R s^2, R s, R) / 2`.
    pub constant: f64,
    pub planks: Vec<OrientedBox>,
}

/// Box along the frame at the center of `J = [lo, lo + sigma]` with
/// dimensions proportional to `(R sigma^2, R sigma, R)` containing every
/// plank of the `R^{-1/3}`-intervals partitioning `J`.
pub fn enclosing_box(j: Interval, r: f64) -> Result<EnclosingBox> {
    let step = r.powf(-1.0 / 3.0);
    if j.len < step * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!("sigma = {} below R^(-1/3) = {step}", j.len)));
    }
    let pieces = (j.len / step).round().max(1.0) as usize;
    let planks: Vec<OrientedBox> = (0..pieces)
        .map(|k| vinogradov_plank(j.lo + (k as f64 + 0.5) * j.len / pieces as f64, r))
        .collect();
    let f = frenet_frame(j.mid());
    let axes = [f.t_vec, f.n_vec, f.b_vec];
    let base = [r * j.len * j.len / 2.0, r * j.len / 2.0, r / 2.0];
    let mut k_needed = 0.0f64;
    for plank in &planks {
        for corner in plank.corners() {
            for i in 0..3 {
                k_needed = k_needed.max(corner.dot(&axes[i]).abs() / base[i]);
            }
        }
    }
    let bounding = OrientedBox::new(Vec3::ZERO, axes, base.map(|h| h * k_needed), BoxTag::Plank)?;
    Ok(EnclosingBox { bounding, constant: k_needed, planks })
}
