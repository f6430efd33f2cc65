//! Case files, result documents, the HiGHS backend and the `griddef`
//! command line on top of `griddef-core`.

pub mod backend;
pub mod case_io;
pub mod cli;
pub mod dump;
pub mod oracle_check;
pub mod report;
pub mod sweep;
