#include <doctest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "fbcir/error.hpp"
#include "fbcir/formats.hpp"

using namespace fbcir;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Backend;
}

AugmentedSample asset_sample() {
    MockGenerationClient client(1);
    SourceTriplet t{"t1", "img/q", "a red car", "img/p", SourceKind::EditingDriven, "d", {}};
    const std::vector<std::string> distractors{"img/x"};
    auto s = plan_augmented_sample(t, AugmentPlan{}, client, distractors);
    return s;
}

void check_same(const AugmentedSample& a, const AugmentedSample& b) {
    CHECK(a.sample_id == b.sample_id);
    CHECK(a.provenance == b.provenance);
    CHECK(a.query_text == b.query_text);
    CHECK(a.query_image == b.query_image);
    REQUIRE(a.query.image_count() == b.query.image_count());
    REQUIRE(a.query.text_count() == b.query.text_count());
    for (std::size_t i = 0; i < a.query.image_count(); ++i) {
        const auto &x = a.query.image_tokens()[i], &y = b.query.image_tokens()[i];
        CHECK(x.area_weight == y.area_weight);
        CHECK(x.mask == y.mask);
        CHECK(x.feature.has_value() == y.feature.has_value());
        if (x.feature) CHECK(*x.feature == *y.feature);
    }
    for (std::size_t i = 0; i < a.query.text_count(); ++i) {
        const auto &x = a.query.text_tokens()[i], &y = b.query.text_tokens()[i];
        CHECK(x.surface == y.surface);
        if (x.feature) CHECK(*x.feature == *y.feature);
    }
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        CHECK(a.candidates[i].id == b.candidates[i].id);
        CHECK(a.candidates[i].kind == b.candidates[i].kind);
        CHECK(a.candidates[i].asset == b.candidates[i].asset);
        if (a.candidates[i].feature) CHECK(*a.candidates[i].feature == *b.candidates[i].feature);
    }
}

}  // namespace

TEST_CASE("inline benchmark round trip is lossless") {
    WorldConfig config;
    config.seed = 21;
    const auto samples = generate_world(config, 12, 0.5);
    std::stringstream buffer;
    write_benchmark(buffer, samples);
    const auto first = buffer.str();
    const auto file = read_benchmark(buffer);
    CHECK(file.mode == PayloadMode::Inline);
    REQUIRE(file.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) check_same(samples[i], file.samples[i]);
    std::stringstream again;
    write_benchmark(again, file.samples);
    CHECK(again.str() == first);
}

TEST_CASE("asset benchmark round trip") {
    const std::vector<AugmentedSample> samples{asset_sample()};
    std::stringstream buffer;
    write_benchmark(buffer, samples);
    CHECK(buffer.str().rfind(benchmark_header_line(PayloadMode::Asset), 0) == 0);
    const auto file = read_benchmark(buffer);
    CHECK(file.mode == PayloadMode::Asset);
    check_same(samples[0], file.samples[0]);
}

TEST_CASE("bundled fixture parses") {
    const auto file = read_benchmark_file(std::string(FBCIR_FIXTURE_DIR) + "/synth10.jsonl");
    CHECK(file.mode == PayloadMode::Inline);
    CHECK(file.samples.size() == 10);
}

TEST_CASE("mixed payloads are rejected") {
    WorldConfig config;
    auto inline_sample = generate_world(config, 1)[0];
    inline_sample.candidates[0].feature.reset();
    CHECK(code_of([&] { payload_mode_of(inline_sample); }) == ErrorCode::Parse);
    const std::vector<AugmentedSample> mixed{generate_world(config, 1)[0], asset_sample()};
    std::stringstream out;
    CHECK(code_of([&] { write_benchmark(out, mixed); }) == ErrorCode::Parse);
}

TEST_CASE("malformed lines report their line number") {
    WorldConfig config;
    std::stringstream good;
    write_benchmark(good, generate_world(config, 2));
    auto text = good.str();

    std::stringstream broken(text + "{not json\n");
    try {
        read_benchmark(broken);
        FAIL("expected Parse");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }

    auto j = sample_to_json(generate_world(config, 1)[0]);
    j["candidates"][0]["kind"] = "distractor";
    j["candidates"][1]["kind"] = "distractor";
    j["candidates"][2]["kind"] = "distractor";
    j["candidates"][3]["kind"] = "distractor";
    j["candidates"][4]["kind"] = "distractor";
    std::stringstream no_positive(benchmark_header_line(PayloadMode::Inline) + "\n" + j.dump() + "\n");
    try {
        read_benchmark(no_positive);
        FAIL("expected Parse");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == std::string("Parse: line 2: sample ") + j["sample_id"].get<std::string>() +
                                           ": exactly one positive required");
    }

    std::stringstream asset_as_inline(benchmark_header_line(PayloadMode::Inline) + "\n" +
                                      sample_to_json(asset_sample()).dump() + "\n");
    CHECK(code_of([&] { read_benchmark(asset_as_inline); }) == ErrorCode::Parse);

    std::stringstream no_header(sample_to_json(asset_sample()).dump() + "\n");
    CHECK(code_of([&] { read_benchmark(no_header); }) == ErrorCode::Parse);
    std::stringstream empty;
    CHECK(code_of([&] { read_benchmark(empty); }) == ErrorCode::Parse);
}

TEST_CASE("triplets round trip") {
    std::ifstream in(std::string(FBCIR_FIXTURE_DIR) + "/triplets.jsonl");
    const auto triplets = read_triplets(in);
    REQUIRE(triplets.size() == 15);
    std::stringstream out;
    for (const auto& t : triplets) out << triplet_to_json(t).dump() << '\n';
    const auto again = read_triplets(out);
    REQUIRE(again.size() == triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        CHECK(again[i].id == triplets[i].id);
        CHECK(again[i].source == triplets[i].source);
        CHECK(again[i].dataset == triplets[i].dataset);
        CHECK(again[i].segments.size() == triplets[i].segments.size());
    }
    std::stringstream bad("{\"id\":\"x\"}\n");
    CHECK(code_of([&] { read_triplets(bad); }) == ErrorCode::Parse);
}

TEST_CASE("scorer parameters round trip exactly") {
    auto p = ToyScorerParams::identity(4);
    p.image_projection(1, 2) = 0.1 + 0.2;
    p.text_projection(3, 0) = -1e-17;
    const auto q = params_from_json(json::parse(params_to_json(p).dump()));
    CHECK(q.image_projection == p.image_projection);
    CHECK(q.text_projection == p.text_projection);
    CHECK(code_of([] { params_from_json(json::parse(R"({"image_projection":[[1]],"text_projection":[[1]]})")); }) ==
          ErrorCode::Parse);
}

TEST_CASE("config readers reject unknown keys") {
    CHECK(code_of([] { plan_from_json(json::parse(R"({"text_aug_cnt":1})")); }) == ErrorCode::Parse);
    CHECK(code_of([] { world_config_from_json(json::parse(R"({"dims":8})")); }) == ErrorCode::Parse);
    CHECK(code_of([] { training_config_from_json(json::parse(R"({"lr":1})"), {}); }) == ErrorCode::Parse);

    const auto plan = plan_from_json(json::parse(R"({"negative_ratio":0.5,"positive_policy":"keep"})"));
    CHECK(plan.negative_ratio == 0.5);
    CHECK(plan.positive_policy == PositivePolicy::KeepOriginal);

    WorldConfig w;
    w.dim = 12;
    w.text_emphasis = 1.7;
    const auto w2 = world_config_from_json(world_config_to_json(w));
    CHECK(w2.dim == 12);
    CHECK(w2.text_emphasis == 1.7);

    TrainingConfig t;
    t.kl_order = KlOrder::TeacherFirst;
    t.ramp.fraction = 0.3;
    const auto t2 = training_config_from_json(training_config_to_json(t), {});
    CHECK(t2.kl_order == KlOrder::TeacherFirst);
    CHECK(t2.ramp.fraction == 0.3);
    const auto t3 = training_config_from_json(json::parse(R"({"steps":5})"), t);
    CHECK(t3.steps == 5);
    CHECK(t3.kl_order == KlOrder::TeacherFirst);
}

TEST_CASE("focus report json carries local ids and identities") {
    const std::vector<RawSegment> segs{{0.7, std::nullopt, {}}, {0.3, std::nullopt, {}}};
    const std::vector<RawToken> toks{{"a", std::nullopt}, {"b", std::nullopt}};
    const auto q = normalize_query(segs, toks);
    FocusReport report;
    const std::vector<std::size_t> kept{1, 2};
    report.states.push_back({{TokenMask::from_indices(4, kept)}, 0.3, 0.5, 0.1});
    report.r_image = 0.375;
    report.r_text = 0.625;
    report.imbalance = 0.25;
    report.inference_count = 9;
    const auto j = focus_report_to_json("s", report, q);
    CHECK(j["n_image"] == 2);
    CHECK(j["states"][0]["image"] == json::array({1}));
    CHECK(j["states"][0]["text"] == json::array({0}));
    CHECK(j["r_image"].get<double>() + j["r_text"].get<double>() == doctest::Approx(1.0));
    CHECK(j["inference_count"] == 9);

    EvaluationReport eval;
    eval.recall_at[1] = 0.5;
    CHECK(evaluation_report_to_json(eval).dump().find("Rs@1") != std::string::npos);
}
