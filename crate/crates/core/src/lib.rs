//! Spelling inquiry engine.
//!
//! A misspelling is analysed against its target word, diagnosed, matched to
//! hypothesis templates, planned as a short inquiry trace and compiled into
//! an executable plan that a session runtime steps through with the learner.
//!
//! ```no_run
//! use inquiry_core::{detection::AttemptContext, pipeline::Engine};
//!
//! let engine = Engine::offline();
//! let ctx = AttemptContext::new("constractd", "constructed", "I like how the art of constractd.");
//! let plan = engine.plan(&ctx).unwrap();
//! println!("{}", inquiry_core::program::serialize_plan(&plan));
//! ```

pub mod analysis;
pub mod batch;
pub mod codec;
pub mod detection;
pub mod error;
pub mod hypothesis;
pub mod knowledge;
pub mod linguistics;
pub mod par;
pub mod pipeline;
pub mod planner;
pub mod program;
pub mod providers;
pub mod runtime;

pub use error::{Error, Result};
pub use knowledge::Knowledge;
pub use pipeline::{Engine, Inquiry};
