//! Acceptance suite for `kpo-core`. The criteria live in `tests/acceptance.rs`
//! and run with `cargo test -p kpo-validation --test acceptance`.
