//! Dataset plumbing, the one-vs-rest evaluation protocol, reporting,
//! and synthetic corpora for desk-scale validation.

pub mod dataset;
pub mod protocol;
pub mod report;
pub mod synth;

pub use dataset::{
    ingest, read_binary_labels_csv, read_class_column, subsample_negatives, DatasetEntry,
    DatasetLayout, DatasetManifest, Split,
};
pub use protocol::{run_protocol, ProtocolConfig};
pub use report::{render_report, report_emit, ClassOutcome, EvalReport, ReportFormat};
pub use synth::{handcrafted_presence_model, synth_generate, SynthRule};
