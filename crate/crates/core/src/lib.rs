//! Requirements selection for the next release by clustering requirements on
//! effort and stakeholder satisfaction.
//!
//! The pipeline standardizes each requirement's (effort, satisfaction),
//! estimates the number of clusters, clusters with k-means, PAM and
//! hierarchical clustering, picks the algorithm that wins most validity
//! indexes, labels clusters Must/Should/Could/Won't, and closes the Must
//! cluster over the dependency graph to obtain a viable release.
//!
//! ```no_run
//! use reqsel_core::{load_problem_path, run_pipeline, PipelineOptions};
//!
//! let loaded = load_problem_path("problem.json".as_ref())?;
//! let report = run_pipeline(&loaded.problem, &PipelineOptions::default())?;
//! println!("{:?}", report.moscow().plan.viable_set());
//! # Ok::<(), reqsel_core::Error>(())
//! ```

pub mod clustering;
pub mod error;
pub mod ids;
pub mod kselect;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod selection;
pub mod session;
pub mod validity;
pub mod warning;

pub use error::{Error, Result};
pub use model::{load_problem, load_problem_path, Format, Loaded, ProblemFile, ProblemInstance};
pub use pipeline::{run_pipeline, KChoice, PipelineOptions, PipelineReport};
pub use selection::{ReleasePlan, ReqId};
pub use session::{Change, NegotiationSession, Override};
pub use warning::{Warning, WarningKind};
