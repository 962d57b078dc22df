//! ISO 27001 readiness assessment.
//!
//! Assessors grade leaf-level assessment issues on a 0–4 scale; the grades
//! roll up through controls and six analysis domains (policy, tools &
//! technology, organization, culture, stakeholder, knowledge) to an overall
//! achievement. Priority is the remaining gap to the ideal score.
//!
//! - [`taxonomy`]: framework trees, the framework file format and the
//!   built-in ISO 27001 essential-controls framework.
//! - [`scoring`]: recursive mean aggregation, priority, percent, predicate.
//! - [`sessions`]: users, assessment sessions and trends over an event log.
//! - [`reporting`]: histogram series, summaries and exports.
//! - [`service`]: the HTTP JSON API.
//! - [`cli`]: the `isol` command line.

pub mod canonical;
pub mod cli;
pub mod reporting;
pub mod scoring;
pub mod service;
pub mod sessions;
pub mod taxonomy;

pub use reporting::{histogram, summarize, ExportFormat, HistogramSeries, Level, SummaryReport};
pub use scoring::{aggregate, AggregateResult, AnswerSet, Mode, NodeScore};
pub use sessions::{SessionRecord, Store, StoreError, TrendReport, UserRecord};
pub use taxonomy::{builtin_iso27001, parse_framework, FrameworkDefinition, FrameworkNode, GradingScale};
