//! Annotated indoor scene scans to task-specific USD.
//!
//! * [`scene`]: annotated scan model and its OBJ/PLY + JSON interchange.
//! * [`usd`]: a text-USD subset (parse/emit) and the descriptive and
//!   geometry-focused scene flavors.
//! * [`geometry`]: RANSAC planes, AABB collision, quickhull, quadric
//!   decimation, convex decomposition, mesh merge/weld.
//! * [`llm`]: conversational-model backends and the three structured queries.
//! * [`insertion`]: the semantically guided object-insertion pipeline.
//! * [`guard`]: allowlist validation and a closed interpreter for generated
//!   insertion scripts.
//! * [`simprep`]: simulation bundle compilation (decimation policy, merging,
//!   ground fixing, collision pieces, task configuration).

pub mod config;
pub mod geometry;
pub mod guard;
pub mod insertion;
pub mod llm;
pub mod scene;
pub mod simprep;
pub mod usd;
