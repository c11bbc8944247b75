//! Cascading bandits with linear generalization.
//!
//! The crate simulates the cascade click model (a user scans a ranked list
//! top-down and clicks the first attractive item), implements four
//! learning policies (CascadeUCB1, CascadeLinTS, CascadeLinUCB and
//! RankedLinTS), derives item features from a feedback matrix by truncated
//! SVD and runs multi-seed regret experiments.

pub mod environment;
pub mod error;
pub mod features;
pub mod harness;
pub mod ingestion;
pub mod numerics;
pub mod policies;
pub mod rng;

pub use environment::{
    attraction_probs, greedy_oracle, observed_weights, reward, simulate_click, AttractionProbabilities, ClickFeedback,
    Environment, FeedbackMatrix, RecommendationList, StepOutcome,
};
pub use error::{Error, Result};
pub use features::{build_features, split_rows, FeatureSplit, ItemFeatures};
pub use harness::{run_experiment, theorem_bound, write_trace, Algo, ExperimentConfig, Prepared, RegretTrace};
pub use numerics::{sample_mvn, truncated_svd, PdMatrixInverse, SvdFactors};
pub use policies::{CascadeLinTs, CascadeLinUcb, CascadeUcb1, LinearState, Policy, RankedLinTs};
pub use rng::SimRng;
