#include <benchmark/benchmark.h>

#include <omp.h>

#include "ttifair/rng.hpp"
#include "ttifair/scoring.hpp"
#include "ttifair/synthetic.hpp"

using namespace ttifair;

namespace {

EvalConfig bench_config(int personas) {
    EvalConfig c;
    c.queries = {"doctor"};
    c.attribute = {"race", {"Asian", "Black", "Caucasian", "Indian", "Latino", "Middle Eastern"}};
    c.inclusion_features = {{"gender", FeatureKind::CategoricalMatch, {"male", "female"}, 0, 0},
                            {"age", FeatureKind::NumericRange, {}, 15, 65}};
    c.prompt_templates = {"A photo face of a {a} {q}."};
    c.persona_count = personas;
    c.master_seed = 11;
    return c;
}

struct Fixture {
    explicit Fixture(int personas) : cfg(bench_config(personas)), stream(cfg.master_seed, "bench") {
        for (const auto& r : synthetic_records(cfg)) {
            if (r.conditioned_value) pool.push_back(r);
        }
        features = persona_features(cfg);
        this->personas = sample_personas(cfg, stream.substream("personas"));
    }
    EvalConfig cfg;
    RandomStream stream;
    std::vector<ImageRecord> pool;
    std::vector<Persona> personas;
    PersonaFeatures features;
};

void BM_RepAttrSerial(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(rep_attr_score_serial(f.pool, f.personas, f.features, 5, f.stream));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RepAttrParallel(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(rep_attr_score(f.pool, f.personas, f.features, 5, f.stream));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_RepAttrSerial)->Arg(5000)->Arg(50000)->UseRealTime()->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RepAttrParallel)->ArgsProduct({{5000, 50000}, {1, 2, 4, 8}})->UseRealTime()->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
