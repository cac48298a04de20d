//! Acceptance criteria for the lab live in `tests/acceptance.rs`; run them
//! with `cargo test -p hnls-validation --test acceptance`.
