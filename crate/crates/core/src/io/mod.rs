//! File formats and persistence: point clouds, camera lists, images,
//! descriptor tables, network checkpoints, edit scripts, and the
//! checkpoint directory that bundles a trained scene.

pub mod cameras;
pub mod checkpoint;
pub mod descfile;
pub mod image;
pub mod ply;
pub mod scenedir;
pub mod script;

pub use cameras::{camera_by_id, read_cameras, write_cameras, CameraRecord};
pub use checkpoint::{load_network, read_checkpoint_tensors, write_checkpoint};
pub use descfile::{read_descriptors, write_descriptors};
pub use image::{read_image, write_image};
pub use ply::{read_ply, write_ply};
pub use scenedir::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use script::{
    apply_edit_script, read_edit_script, read_transform, write_edit_script, BoxSpec, EditOp,
    TransformSpec,
};
