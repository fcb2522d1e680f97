#include <benchmark/benchmark.h>

// Own main: the packaged benchmark_main archive carries LTO bytecode tied to one compiler build.
BENCHMARK_MAIN();
