//! Online reward service and desk-scale PPO loop for the gavel judge
//! engine.

pub mod api;
pub mod config;
pub mod ppo;

pub use api::{router, CompareRequest, CompareResponse, ScoreRequest, ScoreResponse, ServiceState};
pub use config::ServiceConfig;
pub use ppo::{
    kl_coefficient, toy_online_loop, KlSchedule, PpoError, StepStats, ToyPpoConfig, TrainingTrace,
};
