//! BEV perception dataset toolkit: scenario sampling, a kinematic scene
//! generator, BEV ground-truth composition, 3D box annotation, detection and
//! segmentation evaluation, and dataset I/O.

pub mod annotate;
pub mod bevgt;
pub mod digest;
pub mod eval;
pub mod grid;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod synth;

pub use annotate::{annotate_frame, collect_boxes, count_points, label_validity, AnnotateError};
pub use bevgt::morphology::{binary_closing, StructuringElement};
pub use bevgt::{compose, compose_bev_gt, Composition};
pub use eval::{EvalError, MatchMethod, Prediction};
pub use grid::{BevGrid, BitPlane, GridError, GridSpec, MaskProvenance, SemanticMask};
pub use io::{IoError, Manifest};
pub use model::{
    BBox3D, BevClass, CoordFrame, DetectionClass, PointCloud, Pose, SensorKind, Validity, Vec3, Waypoint,
};
pub use pipeline::{build_scene, generate_into, PipelineError};
pub use sampler::{sample_scene_config, Overrides, SamplerError, SceneConfig, SeedStreams};
pub use synth::{generate_scene, Frame, RoadNetwork, Scene, SceneSimulator, SynthError, SynthOptions};
