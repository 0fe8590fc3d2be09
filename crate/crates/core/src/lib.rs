//! Batch construction for contrastive learning that packs hard negatives
//! into the same batch.
//!
//! The cross inner-product matrix `X Y^T` of a paired dataset is thresholded
//! at a high quantile, the surviving entries form a sparse similarity graph,
//! and a Cuthill-McKee ordering of that graph concentrates similar samples
//! near each other. Cutting the ordering into consecutive batches then keeps
//! the in-batch NT-Xent loss close to the loss over all negatives.
//!
//! Modules:
//! * [`tensor_io`]: embedding matrices and file formats
//! * [`similarity`]: quantile estimation and the sparse graph
//! * [`bandwidth`]: Cuthill-McKee and bandwidth measurement
//! * [`batching`]: batch assignments, baselines and the full pipeline
//! * [`losses`]: global/in-batch losses, gap bounds and batch objectives
//! * [`oracle`]: exhaustive solvers for tiny instances

pub mod bandwidth;
pub mod batching;
pub mod error;
pub mod losses;
pub mod oracle;
pub mod reduce;
pub mod similarity;
pub mod stats;
pub mod synth;
pub mod tensor_io;

pub use bandwidth::{cuthill_mckee, exhaustive_min_bandwidth, matrix_bandwidth, Permutation};
pub use batching::{
    gcbs_pipeline, hard_negative_batches, random_batches, sequential_batches, BatchAssignment,
    PipelineConfig, PipelineOutput, Strategy,
};
pub use error::{Error, Result};
pub use losses::{
    gap_report, gap_upper_bounds, lse_component_bounds, ntxent_global, ntxent_train, qap_objective,
    qbap_objective, GapReport, Temperature,
};
pub use oracle::{exhaustive_min_gap, exhaustive_qap, exhaustive_qbap, OracleResult};
pub use similarity::{
    build_sparse_graph, estimate_quantile_threshold, expected_retained_fraction,
    SimilarityThreshold, SparseSimilarityGraph,
};
pub use tensor_io::{
    load_embeddings, load_permutation, save_embeddings, save_permutation, EmbeddingFormat,
    EmbeddingMatrix, EmbeddingPair,
};
