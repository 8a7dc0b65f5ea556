//! Criterion benchmarks for the forecaster; run with `cargo bench -p eadcast-bench`.
