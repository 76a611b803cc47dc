#include <catch2/catch_amalgamated.hpp>

#include "painter/checkpoint.hpp"
#include "painter/prompt_tuning.hpp"
#include "painter/synth.hpp"

using namespace painter;

namespace {

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.patch_size = 8;
    cfg.embed_dim = 32;
    cfg.depth = 2;
    cfg.heads = 4;
    cfg.merge_after = 1;
    cfg.drop_path_rate = 0.0;
    cfg.image_h = 32;
    cfg.image_w = 32;
    return cfg;
}

std::vector<LoadedSample> semseg_samples(int count, std::uint64_t seed) {
    SceneSpec spec;
    spec.size = 32;
    spec.stick_figures = false;
    std::vector<LoadedSample> out;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Scene s = gen_scene(spec, rng);
        out.push_back({s.image, s.labels});
    }
    return out;
}

}  // namespace

TEST_CASE("in-context inference produces a query-sized prediction") {
    ModelConfig cfg = tiny_model();
    Rng rng(1);
    ParamStore ps = init_params(cfg, rng);
    auto samples = semseg_samples(2, 2);
    CodecContext codec(6);
    auto prompt = sample_prompt_pair(TaskKind::semseg, samples[0], codec);
    InferResult res = in_context_infer(ps, cfg, prompt, samples[1].input);
    CHECK(res.canvas.height == cfg.canvas_h());
    CHECK(res.prediction.height == cfg.image_h);
    CHECK(res.prediction.width == cfg.image_w);
    // deterministic
    InferResult res2 = in_context_infer(ps, cfg, prompt, samples[1].input);
    CHECK(res.canvas == res2.canvas);
}

TEST_CASE("a single candidate wins the search") {
    ModelConfig cfg = tiny_model();
    Rng rng(3);
    ParamStore ps = init_params(cfg, rng);
    auto samples = semseg_samples(3, 4);
    CodecContext codec(6);
    auto prompt = sample_prompt_pair(TaskKind::semseg, samples[0], codec);
    std::vector<LoadedSample> eval_set(samples.begin() + 1, samples.end());
    PromptSearchResult res = search_prompts(ps, cfg, {prompt}, eval_set, TaskKind::semseg, codec);
    CHECK(res.best_index == 0);
    CHECK(res.scores.size() == 1);
    CHECK(res.best.first == prompt.first);
    CHECK_THROWS_AS(search_prompts(ps, cfg, {}, eval_set, TaskKind::semseg, codec), error);
}

TEST_CASE("search scores do not depend on candidate order") {
    ModelConfig cfg = tiny_model();
    Rng rng(5);
    ParamStore ps = init_params(cfg, rng);
    auto samples = semseg_samples(4, 6);
    CodecContext codec(6);
    auto p0 = sample_prompt_pair(TaskKind::semseg, samples[0], codec);
    auto p1 = sample_prompt_pair(TaskKind::semseg, samples[1], codec);
    std::vector<LoadedSample> eval_set(samples.begin() + 2, samples.end());
    PromptSearchResult fwd = search_prompts(ps, cfg, {p0, p1}, eval_set, TaskKind::semseg, codec);
    PromptSearchResult rev = search_prompts(ps, cfg, {p1, p0}, eval_set, TaskKind::semseg, codec);
    CHECK(fwd.scores[0] == rev.scores[1]);
    CHECK(fwd.scores[1] == rev.scores[0]);
    if (fwd.scores[0] != fwd.scores[1]) {  // exact ties legitimately go to the first candidate
        CHECK(fwd.best.first == rev.best.first);
        CHECK(fwd.best.second == rev.best.second);
    }
}

TEST_CASE("zero learning steps return the init pair unchanged") {
    ModelConfig cfg = tiny_model();
    Rng rng(7);
    ParamStore ps = init_params(cfg, rng);
    auto samples = semseg_samples(2, 8);
    CodecContext codec(6);
    auto prompt = sample_prompt_pair(TaskKind::semseg, samples[0], codec);
    PromptLearnConfig pcfg;
    pcfg.steps = 0;
    PromptLearnResult res = learn_prompts(ps, cfg, prompt, {samples[1]}, TaskKind::semseg, codec, pcfg);
    CHECK(res.prompt.first == prompt.first);
    CHECK(res.prompt.second == prompt.second);
    CHECK(res.loss_curve.size() == 1);
}

TEST_CASE("prompt learning never hurts the loss and never touches the model") {
    ModelConfig cfg = tiny_model();
    Rng rng(9);
    ParamStore ps = init_params(cfg, rng);
    std::string before = serialize_checkpoint(cfg, ps);
    auto samples = semseg_samples(3, 10);
    CodecContext codec(6);
    auto prompt = sample_prompt_pair(TaskKind::semseg, samples[0], codec);
    std::vector<LoadedSample> queries(samples.begin() + 1, samples.end());
    PromptLearnConfig pcfg;
    pcfg.steps = 10;
    pcfg.lr = 5e-3;
    PromptLearnResult res = learn_prompts(ps, cfg, prompt, queries, TaskKind::semseg, codec, pcfg);
    REQUIRE(res.loss_curve.size() == 11);
    double best = *std::min_element(res.loss_curve.begin(), res.loss_curve.end());
    CHECK(best <= res.loss_curve.front());
    CHECK(serialize_checkpoint(cfg, ps) == before);  // frozen-model guarantee

    // the returned pair really scores no worse than the init pair
    auto loss_of = [&](const std::pair<Image, Image>& p) {
        PromptLearnConfig zero;
        zero.steps = 0;
        return learn_prompts(ps, cfg, p, queries, TaskKind::semseg, codec, zero).loss_curve[0];
    };
    CHECK(loss_of(res.prompt) <= loss_of(prompt) + 1e-12);
}
