//! Backend gateway for the gavel reward engine: a wire client for any
//! chat-completions-compatible endpoint, a deterministic scripted mock, the
//! batching/retry gateway, and the judging pipeline built on top of them.

pub mod backend;
pub mod flaglog;
pub mod gateway;
pub mod http;
pub mod judge;
pub mod longdoc;
pub mod mock;

pub use backend::{BackendConfig, BackendError, CompletionBackend, GenerationParams, RetryConfig};
pub use flaglog::FlagLog;
pub use gateway::{
    gateway_from_file_or_env, plan_sub_batches, BackendFileConfig, Gateway, GatewayError,
    DOC_SUB_BATCH,
};
pub use http::HttpBackend;
pub use judge::{Judge, JudgeConfig, JudgeError, Verdict};
pub use longdoc::{
    export_trace_jsonl, score_long_answer, ChunkScore, DocumentContext, LongDocError,
    LongDocOutcome, DEFAULT_WINDOW_TOKENS,
};
pub use mock::{loglik_fingerprint, prompt_fingerprint, ScriptedBackend};
