//! Benchmark support crate; see benches/render.rs.
