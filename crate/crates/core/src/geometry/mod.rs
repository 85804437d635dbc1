//! Tubes, plates and planks: intersection volumes, Kakeya overlaps,
//! structured families and rich-cube counts.

mod boxes;
mod families;
mod kakeya;
mod plates;
mod rich;
mod vec3;

pub use boxes::{clip_polygon_2d, polygon_area, BoxTag, OrientedBox, Polytope};
pub use families::{
    audit_structure, generate_random_tubes, generate_structured_tubes, generate_vinogradov_family, intervals_in,
    max_tube_family_size, AuditCheck, AuditFailure, AuditReport, BoxFamily, BoxLabel, BroadGroup, Structure,
    TubeFill, TubeOptions, BROAD_RANGES,
};
pub use kakeya::{kakeya_l2_overlap, rasterized_l2_overlap, OverlapReport};
pub use plates::{
    enclosing_box, plank_in_plate_check, plate_angle, plate_intersection_volume, small_angle_plank,
    vinogradov_plank, vinogradov_plate, EnclosingBox, Interval, PlateIntersection,
};
pub use rich::{count_rich_cubes, CubeGrid, RichCubeHistogram, INFLATION};
pub use vec3::{det3, Vec3};
