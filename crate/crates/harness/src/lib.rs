//! File formats, HTTP backends, sweeps and reports for parley negotiations.
//!
//! - [`scenario_io`]: scenario files and schema maps
//! - [`config`]: sweep and prompt-config files
//! - [`backend`]: OpenAI-compatible chat-completion client
//! - [`results`]: the results CSV and JSONL transcripts
//! - [`sweep`]: the parallel, resumable sweep runner
//! - [`report`]: agreement, CoT, action and price reports

pub mod backend;
pub mod config;
pub mod report;
pub mod results;
pub mod scenario_io;
pub mod sweep;
