#include <benchmark/benchmark.h>

#include "chainforge/chain.hpp"
#include "chainforge/validate.hpp"

using namespace chainforge;

namespace {

std::string chain_text(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += " -> ";
        s += "[The runner takes step " + std::to_string(i) + " along the trail]";
    }
    return s;
}

void BM_ParseChain(benchmark::State& state) {
    const auto text = chain_text(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(parse_chain(text));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseChain)->Arg(2)->Arg(5)->Arg(10);

void BM_SerializeChain(benchmark::State& state) {
    const auto chain = parse_chain(chain_text(static_cast<std::size_t>(state.range(0)))).value();
    for (auto _ : state) benchmark::DoNotOptimize(serialize_chain(chain));
}
BENCHMARK(BM_SerializeChain)->Arg(5)->Arg(10);

void BM_ValidateChain(benchmark::State& state) {
    const auto text = chain_text(6);
    for (auto _ : state) benchmark::DoNotOptimize(validate_chain(text));
}
BENCHMARK(BM_ValidateChain);

void BM_ValidateAgainstQa(benchmark::State& state) {
    const auto chain = parse_chain(chain_text(6)).value();
    for (auto _ : state) {
        benchmark::DoNotOptimize(validate_against_qa(chain, "Why did the runner stop?", "the trail ended"));
    }
}
BENCHMARK(BM_ValidateAgainstQa);

}  // namespace
