//! File formats: TSPLIB instances, benchmark reports and reference tables.

pub mod report;
pub mod tsplib;

pub use report::{
    bundled_reference, read_reference_csv, read_report_csv, reference_length, summarize,
    write_report_csv, write_summary_json, BenchRow, MethodSummary, ReferenceRow, REPORT_HEADER,
};
pub use tsplib::{
    parse_tsplib, parse_tsplib_file, read_tsplib, tsplib_distance, write_tsplib, EdgeWeightType,
    TsplibFile, TsplibHeader,
};
