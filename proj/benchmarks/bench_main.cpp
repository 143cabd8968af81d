#include "screenorder/action_language.hpp"
#include "screenorder/embedding.hpp"
#include "screenorder/ordering.hpp"
#include "screenorder/representation.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <string>

namespace so = screenorder;

namespace {

so::EnvironmentState state_of_size(std::size_t n) {
    std::mt19937_64 rng(n);
    std::uniform_int_distribution<int> xs(0, 1240), ys(0, 680), size(4, 40);
    so::EnvironmentState s;
    s.viewport_width = 1280;
    s.viewport_height = 720;
    for (std::size_t i = 0; i < n; ++i) {
        so::Element e;
        const double x = xs(rng), y = ys(rng);
        e.bbox = {x, y, x + size(rng), y + size(rng)};
        e.interactable = i % 3 != 0;
        if (e.interactable) e.actions = {"click"};
        e.tag = e.interactable ? "BUTTON" : "";
        e.text = "label " + std::to_string(i);
        s.elements.push_back(std::move(e));
    }
    return s;
}

void BM_Raster(benchmark::State& st) {
    const auto s = state_of_size(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(so::order_raster(s));
    st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_Raster)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_Random(benchmark::State& st) {
    const auto s = state_of_size(static_cast<std::size_t>(st.range(0)));
    std::uint64_t seed = 0;
    for (auto _ : st) benchmark::DoNotOptimize(so::order_random(s, ++seed));
}
BENCHMARK(BM_Random)->RangeMultiplier(4)->Range(16, 4096);

void BM_Tsne(benchmark::State& st) {
    const auto s = state_of_size(static_cast<std::size_t>(st.range(0)));
    const so::tsne::TsneParams params;
    for (auto _ : st) benchmark::DoNotOptimize(so::order_tsne(s, params, 1));
    st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_Tsne)->RangeMultiplier(2)->Range(8, 128)->Unit(benchmark::kMillisecond)->Complexity();

void BM_SerializeText(benchmark::State& st) {
    const auto s = state_of_size(static_cast<std::size_t>(st.range(0)));
    const auto view = so::apply_ordering(s, so::order_raster(s));
    for (auto _ : st) benchmark::DoNotOptimize(so::serialize_text(view, s, {}));
}
BENCHMARK(BM_SerializeText)->RangeMultiplier(4)->Range(16, 4096);

void BM_ParseResponse(benchmark::State& st) {
    std::string body;
    for (int i = 0; i < st.range(0); ++i) body += "click [" + std::to_string(i + 1) + "]\nwrite [hello world]\n";
    const std::string response = "Plan:\n```\n" + body + "```\n";
    for (auto _ : st) benchmark::DoNotOptimize(so::parse_response(response, so::Dialect::OmniAct));
}
BENCHMARK(BM_ParseResponse)->RangeMultiplier(4)->Range(1, 256);

} // namespace

BENCHMARK_MAIN();
