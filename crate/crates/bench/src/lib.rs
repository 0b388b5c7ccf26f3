//! Criterion benchmarks for the numeric kernels, one training step and greedy
//! decoding. Run with `cargo bench -p offalign-bench`.
