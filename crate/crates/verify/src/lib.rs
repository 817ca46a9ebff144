//! Acceptance harness; the checks live in `translab::verify`.
