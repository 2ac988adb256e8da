//! Benchmarks for the simulator and the rate layer; see `benches/`.
