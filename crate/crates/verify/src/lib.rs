//! Acceptance checks for `polycreep`; see `tests/acceptance.rs`.
