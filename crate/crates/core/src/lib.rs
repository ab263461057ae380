//! Progress-aware multi-turn tool-use agents trained with group-relative
//! policy optimization, at toy scale.

pub mod curriculum;
pub mod fc;
pub mod grpo;
pub mod io;
pub mod mocks;
pub mod pag;
pub mod parallel;
pub mod policy;
pub mod prompts;
pub mod reward;
pub mod rollout;
pub mod seed;
pub mod synth;
pub mod task;
pub mod toolenv;
