pub mod cloud;
pub mod submap;
pub mod colour;
pub mod keypoints;
pub mod descriptors;
#[cfg(test)]
mod testutil;
pub mod alignment;
pub mod scene;
pub mod bench;
