//! Synthetic training pairs: random polygon layouts composited from
//! calibration images over low-light backgrounds.

mod benchtop;
mod compose;
mod dataset;
mod scene;

pub use benchtop::{render_benchtop, BenchtopScene, BenchtopSpec};
pub use compose::{compose_pair, compose_unclamped, procedural_background, BackgroundSource, TrainingPair, BACKGROUND_MAX};
pub use dataset::{
    generate_dataset, load_pair, make_pair, DatasetEntry, DatasetManifest, MANIFEST_FILE, SCENES_FILE,
};
pub use scene::{random_scene, rasterize_masks, Polygon, SceneLimits, SceneMasks, SceneSpec};
