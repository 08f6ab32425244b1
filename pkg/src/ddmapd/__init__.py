"""Double-deck multi-agent pickup and delivery: planners, validator and benchmarks."""
