//! Experimental side of the pipeline: counts, witness estimates with confidence,
//! noise metrics, tomography, fidelities and the triangle bound.

mod counts;
mod fidelity;
mod stream;
mod tomography;

pub use counts::{
    estimate, exact_counts, noise_metrics, sample_counts, sequential_probabilities, Aggregate,
    ContextPlan, ExperimentCounts, NoiseReport, Order, OutcomeCounts, WitnessEstimate,
    CONFIDENCE_Z,
};
pub use fidelity::{
    fidelity, optimal_isometry_fidelity, optimal_isometry_fidelity_with, squared_fidelity,
    squared_fidelity_pure, triangle_lower_bound, AscentSettings, IsometryFit, TriangleBound,
};
pub use stream::{
    context_for_symbol, context_pair_stream_check, context_stream_check, symbol_for_context,
    StreamReport, FLAG_LEVEL, SYMBOLS,
};
pub use tomography::{
    povm_frequencies, povm_tomography, povm_tomography_with, probe_expectations, probe_states,
    state_tomography, PovmEstimate, PovmFitSettings, TomographyData, BASIS_VERSION,
};
