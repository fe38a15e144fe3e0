//! Sparse-view surface reconstruction from Gaussian surfels, with a
//! flow-matching generator that synthesizes extra views along
//! visibility-checked camera orbits.
//!
//! The crate is organized around the stages of the reconstruction loop:
//!
//! - [`geometry`]: cameras, rigid poses, rays, triangle meshes and exact
//!   ray/mesh intersection.
//! - [`scene`]: procedural synthetic scenes with exact RGB/depth/normal
//!   ground truth at any pose.
//! - [`splat`]: the Gaussian-surfel representation and a differentiable
//!   CPU rasterizer with an analytic backward pass.
//! - [`flow`]: flow-matching velocity fields - an analytic Gaussian-mixture
//!   oracle and a small trainable MLP.
//! - [`guide`]: diffusion inversion, Euler denoising, and the staged masked
//!   blending that steers generation toward rendered references.
//! - [`trajectory`]: visibility-based orbit sampling, screening, extension
//!   and keyframe selection.
//! - [`surface`]: TSDF depth fusion, marching-cubes extraction, and
//!   mesh-ray-traced unseen-region masks.
//! - [`pipeline`]: the outer optimization loop - view-set recursion,
//!   losses, confidence weighting, densification.
//! - [`metrics`]: Chamfer distance, F-score, normal consistency, PSNR, SSIM.

pub mod flow;
pub mod geometry;
pub mod guide;
pub mod img;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod scene;
pub mod splat;
pub mod surface;
pub mod trajectory;
