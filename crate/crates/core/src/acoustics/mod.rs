//! Shoebox room acoustics and rigid-sphere array recordings.

mod render;
mod room;
mod schroeder;
mod sphere;

pub use render::{
    band_edge_taper, render_rirs, simulate_recording, ExactRenderer, NoiseSpec, RecordingRenderer, TableSpec,
    TabulatedRenderer,
};
pub use room::{
    enumerate_images, image_sources, reflection_for, t60_to_reflection, ImageLimits, ImageSource,
    ImageSourceList, ReflectionModel, RoomSpec,
};
pub use schroeder::{measure_t60, omni_rir, schroeder_curve_db};
pub use sphere::{
    legendre, rigid_sphere_steering, spherical_jn, spherical_yn, truncation_order,
    ArrayGeometry, SphereModes, SteeringSet, DEFAULT_SPEED_OF_SOUND,
};
