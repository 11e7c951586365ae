#include <benchmark/benchmark.h>

#include "chainforge/metrics.hpp"
#include "chainforge/text.hpp"
#include "chainforge/rng.hpp"

using namespace chainforge;

namespace {

TokenSequence random_tokens(SeededRng& rng, std::size_t n) {
    static const char* vocab[] = {"boy", "falls", "rock", "bike", "trail", "steep", "wheel", "hits", "speeds", "ground"};
    TokenSequence out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(vocab[rng.below(10)]);
    return out;
}

template <typename F>
void run_pairwise(benchmark::State& state, F&& metric) {
    SeededRng rng(7);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_tokens(rng, n);
    const auto b = random_tokens(rng, n);
    for (auto _ : state) benchmark::DoNotOptimize(metric(a, b));
}

void BM_Bleu4(benchmark::State& state) {
    run_pairwise(state, [](const auto& a, const auto& b) { return bleu_n(a, b, 4); });
}
BENCHMARK(BM_Bleu4)->Arg(16)->Arg(64);

void BM_RougeL(benchmark::State& state) {
    run_pairwise(state, [](const auto& a, const auto& b) { return rouge_l(a, b); });
}
BENCHMARK(BM_RougeL)->Arg(16)->Arg(64);

void BM_MeteorLite(benchmark::State& state) {
    run_pairwise(state, [](const auto& a, const auto& b) { return meteor_lite(a, b); });
}
BENCHMARK(BM_MeteorLite)->Arg(16)->Arg(64);

}  // namespace
