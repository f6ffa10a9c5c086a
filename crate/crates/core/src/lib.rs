//! Arithmetic-vulnerability verification over a C subset: source frontend,
//! candidate extraction, bitvector encodings, chain composition, runtime
//! guards, deployment policy and reporting.

pub mod frontend;
pub mod encode;
pub mod extract;
pub mod chain;
pub mod guard;
pub mod kv;
pub mod policy;
pub mod report;
pub mod corpus;
