pub mod baselines;
pub mod config;
pub mod fasta;
pub mod landscape;
pub mod mcts;
pub mod metrics;
pub mod prior;
pub mod rng;
pub mod scalar;
pub mod sequence;
pub mod sidecar;
pub mod value;
pub mod experiment;
pub mod output;

pub type NkLandscapeF64 = landscape::NkLandscape<f64>;
pub type NkLandscapeF32 = landscape::NkLandscape<f32>;
pub type ProfileLandscapeF64 = landscape::ProfileLandscape<f64>;
pub type ProfilePriorF64 = prior::ProfilePrior<f64>;
pub type ProfilePriorF32 = prior::ProfilePrior<f32>;
pub type ValueModelF64 = value::ValueModel<f64>;
pub type ValueModelF32 = value::ValueModel<f32>;
pub type ValueLearnerF64 = value::ValueLearner<f64>;
pub type RunResultF64 = mcts::RunResult<f64>;
pub type SearchTreeF64 = mcts::tree::SearchTree<f64>;
