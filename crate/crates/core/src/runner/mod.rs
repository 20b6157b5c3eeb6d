//! Experiment registry, persistence and reporting.

mod commands;
mod io;
mod records;
mod report;
mod study;

pub use commands::{load_spec, Committed, Workspace};
pub use io::{append_line, check_format_version, write_atomic, FORMAT_VERSION};
pub use records::{
    append_record, read_log, CommandKind, Outcome, ResultRecord, RunRecord, SubsamplePoint, SubsampleTable,
    TOOLKIT_VERSION,
};
pub use report::{report, Grouping, ReportFilter, ReportFormat, ReportKind, ReportSpec};
pub use study::{subsample_study, subsets_nested};
