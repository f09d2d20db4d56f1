//! End-to-end acceptance checks live in `tests/acceptance.rs`. The package
//! sorts after the others so its verdict lines close a workspace test run.
