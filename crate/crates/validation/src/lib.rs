//! Holds the `acceptance` test target; there is no library code.
//!
//! Kept as its own package so the suite runs after the other crates' tests
//! and depends only on the core library and the session service.
