#include <benchmark/benchmark.h>

#include "chainforge/perturb.hpp"

using namespace chainforge;

namespace {

const CausalChain& sample_chain() {
    static const auto chain = *CausalChain::from_texts({
        "The boy rides down a steep hill",
        "The girl shouts loudly at the boy",
        "The boy looks back at the girl",
        "The front wheel hits a rock",
        "The boy falls off the bike",
    });
    return chain;
}

Lexicons lexicons() {
    return Lexicons::make({"boy", "girl", "man", "woman"}, {{"steep", "flat"}, {"loudly", "quietly"}, {"falls", "rises"}})
        .value();
}

void BM_Perturb(benchmark::State& state) {
    const auto lx = lexicons();
    const auto strategy = kAllStrategies[static_cast<std::size_t>(state.range(0))];
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(perturb(sample_chain(), strategy, ++seed, lx));
    state.SetLabel(std::string(to_string(strategy)));
}
BENCHMARK(BM_Perturb)->DenseRange(0, 5);

void BM_GenerateNegatives(benchmark::State& state) {
    const auto lx = lexicons();
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_negatives(sample_chain(), 6, ++seed, lx));
}
BENCHMARK(BM_GenerateNegatives);

}  // namespace
