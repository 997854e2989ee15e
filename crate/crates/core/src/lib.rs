//! Tight-box mining over per-class segmentation confidence maps.
//!
//! A proposal box is rated by how pure it is (mean confidence inside the
//! box) minus how much object response remains in the ring between the box
//! and an enlarged copy of it (mean of the strongest fraction of ring
//! pixels). Tight boxes score high on the first term and low on the second;
//! boxes trapped on a discriminative part leave object pixels in their ring
//! and are pushed down the ranking.
//!
//! The crate is `no_std` + `alloc` by default. The `std` feature turns on
//! `std::error::Error` integration and the `parallel` feature spreads batch
//! scoring over a rayon pool.
//!
//! Modules:
//! - [`geometry`]: half-open integer boxes, IoU, enlargement, surrounding rings.
//! - [`confmap`]: confidence maps, summed-area tables, ring extraction.
//! - [`scoring`]: purity, conditional average, objectness, candidate pools.
//! - [`pseudomask`]: CAM + saliency to pseudo segmentation labels.
//! - [`synth`]: part-trap scene generator, proposal families, naive oracle.
//! - [`eval`]: recall@k, CorLoc, VOC AP, ablation sweep.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod confmap;
pub mod eval;
pub mod geometry;
pub mod pseudomask;
mod ring_select;
pub mod scoring;
pub mod synth;

pub use confmap::{ConfMap, ConfMapError, IntegralImage, RawMap};
pub use geometry::{iou, BBox, GeometryError, RingRegion};
pub use scoring::{
    CandidatePool, ClassScorer, EmptyRingPolicy, ScoredProposal, ScoringConfig, ScoringError,
};
