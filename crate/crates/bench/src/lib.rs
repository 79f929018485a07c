//! Criterion benchmarks for the solver, the LLP oracle and full runs live in `benches/`.
