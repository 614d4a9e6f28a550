//! Model-centric geometry of the data domain for ReLU classifiers.
//!
//! A trained softmax classifier induces, at every input `x`, the local data
//! matrix `G(x,w) = E_{y~p}[∇_x log p(y|x,w) ∇_x log p(y|x,w)ᵀ]`. It is PSD
//! with rank below the class count, and for piecewise-linear networks the
//! distribution `x ↦ (ker G)^⊥` is involutive, so the data domain splits into
//! low-dimensional leaves. This crate computes `G` (and the parameter-space
//! Fisher analogue) in factored form, checks those properties numerically,
//! and walks along leaves (horizontal paths) or across them (kernel walks).
//!
//! | module       | contents                                              |
//! |--------------|-------------------------------------------------------|
//! | [`data`]     | IDX files, byte normalization, synthetic fixtures     |
//! | [`net`]      | dense ReLU net, input and parameter gradients         |
//! | [`train`]    | SGD, trace-of-G monitoring, checkpoints               |
//! | [`geometry`] | factored `G`/`F`, spectra, projections, KL, brackets  |
//! | [`paths`]    | horizontal paths, kernel walks, PGM strips            |
//! | [`cli`]      | the `foliate` command line                            |

pub mod cli;
pub mod data;
pub mod geometry;
pub mod net;
pub mod paths;
pub mod rng;
pub mod suite;
pub mod train;
