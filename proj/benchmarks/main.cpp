#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a carries LTO bytecode tied to one compiler
// patch release, so the entry point is compiled here instead.
BENCHMARK_MAIN();
