//! Criterion benchmarks for `dyadic-core`; see `benches/`.
