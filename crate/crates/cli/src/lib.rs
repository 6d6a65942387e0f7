//! Job documents, verb dispatch and verification suites behind the `cstar-desk` binary.

pub mod codec;
pub mod doc;
pub mod verbs;
pub mod verify;

pub use doc::{JobDocument, Options, Report, Status};
pub use verbs::dispatch;
pub use verify::verify;

/// Runs a parsed document under `flags`, which take precedence over its options.
pub fn run_document(verb: &str, doc: &JobDocument, flags: &Options) -> Report {
    let opts = flags.clone().or(doc.options.clone());
    dispatch(verb, &doc.payload, &opts)
}
