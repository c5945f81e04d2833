#include "fbcir/formats.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "fbcir/error.hpp"

namespace fbcir {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(const std::string& message) { throw Error(ErrorCode::Parse, message); }

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, std::string_view what) {
    if (!j.is_array() || j.empty()) parse_error(std::string(what) + ": feature must be a non-empty number array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) parse_error(std::string(what) + ": feature entries must be numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    if (!v.allFinite()) parse_error(std::string(what) + ": feature entries must be finite");
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, std::string_view what) {
    if (!j.is_array() || j.empty()) parse_error(std::string(what) + ": matrix must be a non-empty array of rows");
    const auto cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != cols) parse_error(std::string(what) + ": ragged matrix");
        m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], what).transpose();
    }
    return m;
}

template <typename T>
T field(const json& j, const char* key, std::string_view where) {
    const auto it = j.find(key);
    if (it == j.end()) parse_error(std::string(where) + ": missing \"" + key + "\"");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        parse_error(std::string(where) + ": \"" + key + "\" has the wrong type");
    }
}

template <typename T>
void optional_field(const json& j, const char* key, T& target, std::string_view where) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        target = it->get<T>();
    } catch (const json::exception&) {
        parse_error(std::string(where) + ": \"" + key + "\" has the wrong type");
    }
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) parse_error(std::string(where) + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || a == key;
        if (!known) parse_error(std::string(where) + ": unknown key \"" + key + "\"");
    }
}

std::string_view to_string(KlOrder order) noexcept {
    return order == KlOrder::StudentFirst ? "student_first" : "teacher_first";
}

KlOrder kl_order_from_string(std::string_view text) {
    if (text == "student_first") return KlOrder::StudentFirst;
    if (text == "teacher_first") return KlOrder::TeacherFirst;
    parse_error("unknown KL order \"" + std::string(text) + "\"");
}

// Exceptions from the type-level parsers are reported as Parse with their message.
template <typename F>
auto as_parse(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) throw;
        throw Error(ErrorCode::Parse, e.what());
    }
}

}  // namespace

std::string_view to_string(PayloadMode mode) noexcept { return mode == PayloadMode::Inline ? "inline" : "asset"; }

PayloadMode payload_mode_from_string(std::string_view text) {
    if (text == "inline") return PayloadMode::Inline;
    if (text == "asset") return PayloadMode::Asset;
    parse_error("unknown payload mode \"" + std::string(text) + "\"");
}

PayloadMode payload_mode_of(const AugmentedSample& sample) {
    std::size_t with = 0, total = 0;
    auto count = [&](const std::optional<FeatureVector>& f) {
        ++total;
        if (f) ++with;
    };
    for (const auto& t : sample.query.image_tokens()) count(t.feature);
    for (const auto& t : sample.query.text_tokens()) count(t.feature);
    for (const auto& c : sample.candidates) count(c.feature);
    if (with == total) return PayloadMode::Inline;
    if (with == 0) return PayloadMode::Asset;
    parse_error(sample.sample_id + ": mixed inline and asset payloads");
}

json sample_to_json(const AugmentedSample& sample) {
    json image = json::array();
    for (const auto& t : sample.query.image_tokens()) {
        json token{{"id", t.id}, {"area", t.area_weight}};
        if (t.feature) token["feature"] = vector_to_json(*t.feature);
        if (!t.mask.empty()) token["mask"] = t.mask;
        image.push_back(std::move(token));
    }
    json text = json::array();
    for (const auto& t : sample.query.text_tokens()) {
        json token{{"id", t.id}, {"surface", t.surface}};
        if (t.feature) token["feature"] = vector_to_json(*t.feature);
        text.push_back(std::move(token));
    }
    json candidates = json::array();
    for (const auto& c : sample.candidates) {
        json cand{{"id", c.id}, {"kind", to_string(c.kind)}};
        if (!c.asset.empty()) cand["asset"] = c.asset;
        if (c.feature) cand["feature"] = vector_to_json(*c.feature);
        candidates.push_back(std::move(cand));
    }
    return json{{"sample_id", sample.sample_id},
                {"provenance", sample.provenance},
                {"query_text", sample.query_text},
                {"query_image", sample.query_image},
                {"query", {{"image", std::move(image)}, {"text", std::move(text)}}},
                {"candidates", std::move(candidates)}};
}

AugmentedSample sample_from_json(const json& j, PayloadMode mode) {
    if (!j.is_object()) parse_error("sample must be a JSON object");
    AugmentedSample sample;
    sample.sample_id = field<std::string>(j, "sample_id", "sample");
    const std::string where = "sample " + sample.sample_id;
    optional_field(j, "provenance", sample.provenance, where);
    optional_field(j, "query_text", sample.query_text, where);
    optional_field(j, "query_image", sample.query_image, where);

    const auto query = j.find("query");
    if (query == j.end() || !query->is_object()) parse_error(where + ": missing \"query\" object");
    const auto image = field<json>(*query, "image", where);
    const auto text = field<json>(*query, "text", where);
    if (!image.is_array() || !text.is_array()) parse_error(where + ": query image/text must be arrays");

    std::vector<ImageToken> image_tokens;
    for (const auto& t : image) {
        ImageToken token;
        token.id = field<std::size_t>(t, "id", where);
        token.area_weight = field<double>(t, "area", where);
        if (t.contains("feature")) token.feature = vector_from_json(t["feature"], where);
        optional_field(t, "mask", token.mask, where);
        image_tokens.push_back(std::move(token));
    }
    std::vector<TextToken> text_tokens;
    for (const auto& t : text) {
        TextToken token;
        token.id = field<std::size_t>(t, "id", where);
        token.surface = field<std::string>(t, "surface", where);
        if (t.contains("feature")) token.feature = vector_from_json(t["feature"], where);
        text_tokens.push_back(std::move(token));
    }
    sample.query = as_parse([&] { return TokenizedQuery(std::move(image_tokens), std::move(text_tokens)); });

    const auto candidates = field<json>(j, "candidates", where);
    if (!candidates.is_array() || candidates.empty()) parse_error(where + ": candidates must be a non-empty array");
    std::set<CandidateId> ids;
    for (const auto& c : candidates) {
        Candidate cand;
        cand.id = field<CandidateId>(c, "id", where);
        cand.kind = as_parse([&] { return candidate_kind_from_string(field<std::string>(c, "kind", where)); });
        optional_field(c, "asset", cand.asset, where);
        if (c.contains("feature")) cand.feature = vector_from_json(c["feature"], where);
        if (!ids.insert(cand.id).second) parse_error(where + ": duplicate candidate id " + std::to_string(cand.id));
        sample.candidates.push_back(std::move(cand));
    }
    if (sample.count_kind(CandidateKind::Positive) != 1) parse_error(where + ": exactly one positive required");

    const auto actual = payload_mode_of(sample);
    if (actual != mode) {
        parse_error(where + ": payloads are " + std::string(to_string(actual)) + " in a " +
                    std::string(to_string(mode)) + " file");
    }
    if (mode == PayloadMode::Asset) {
        if (sample.query_image.empty()) parse_error(where + ": asset mode requires query_image");
        for (const auto& c : sample.candidates) {
            if (c.asset.empty()) parse_error(where + ": asset mode requires an asset on every candidate");
        }
    }
    return sample;
}

std::string benchmark_header_line(PayloadMode mode) {
    return json{{"format", kBenchmarkFormat}, {"version", kBenchmarkVersion}, {"mode", to_string(mode)}}.dump();
}

void write_benchmark(std::ostream& out, std::span<const AugmentedSample> samples) {
    PayloadMode mode = PayloadMode::Inline;
    if (!samples.empty()) mode = payload_mode_of(samples.front());
    for (const auto& s : samples) {
        if (payload_mode_of(s) != mode) parse_error(s.sample_id + ": payload mode differs from the first sample");
    }
    out << benchmark_header_line(mode) << '\n';
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

BenchmarkFile read_benchmark(std::istream& in) {
    BenchmarkFile file;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            parse_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (!j.is_object() || j.value("format", "") != kBenchmarkFormat) {
                parse_error("line " + std::to_string(line_no) + ": missing fbcir-bench header");
            }
            if (j.value("version", 0) != kBenchmarkVersion) {
                parse_error("line " + std::to_string(line_no) + ": unsupported version");
            }
            file.mode = payload_mode_from_string(j.value("mode", ""));
            have_header = true;
            continue;
        }
        try {
            file.samples.push_back(sample_from_json(j, file.mode));
        } catch (const Error& e) {
            parse_error("line " + std::to_string(line_no) + ": " + e.detail());
        }
    }
    if (!have_header) parse_error("empty benchmark file");
    return file;
}

BenchmarkFile read_benchmark_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) parse_error("cannot open " + path.string());
    return read_benchmark(in);
}

void write_benchmark_file(const std::filesystem::path& path, std::span<const AugmentedSample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    write_benchmark(out, samples);
}

std::vector<SourceTriplet> read_triplets(std::istream& in) {
    std::vector<SourceTriplet> triplets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            parse_error(where + ": " + e.what());
        }
        if (!j.is_object()) parse_error(where + ": expected an object");
        SourceTriplet t;
        t.id = field<std::string>(j, "id", where);
        t.query_image = field<std::string>(j, "query_image", where);
        t.query_text = field<std::string>(j, "query_text", where);
        t.positive = field<std::string>(j, "positive", where);
        t.source = as_parse([&] { return source_kind_from_string(field<std::string>(j, "source", where)); });
        optional_field(j, "dataset", t.dataset, where);
        if (j.contains("segments")) {
            for (const auto& s : j["segments"]) {
                RawSegment seg;
                seg.area = field<double>(s, "area", where);
                optional_field(s, "mask", seg.mask, where);
                t.segments.push_back(std::move(seg));
            }
        }
        as_parse([&] {
            validate_triplet(t);
            return 0;
        });
        triplets.push_back(std::move(t));
    }
    return triplets;
}

json triplet_to_json(const SourceTriplet& t) {
    json j{{"id", t.id},
           {"query_image", t.query_image},
           {"query_text", t.query_text},
           {"positive", t.positive},
           {"source", to_string(t.source)},
           {"dataset", t.dataset}};
    if (!t.segments.empty()) {
        json segments = json::array();
        for (const auto& s : t.segments) {
            json seg{{"area", s.area}};
            if (!s.mask.empty()) seg["mask"] = s.mask;
            segments.push_back(std::move(seg));
        }
        j["segments"] = std::move(segments);
    }
    return j;
}

json focus_report_to_json(const std::string& sample_id, const FocusReport& report, const TokenizedQuery& query) {
    json states = json::array();
    for (const auto& s : report.states) {
        json image = json::array(), text = json::array();
        for (auto index : s.state.preserved.indices()) {
            if (query.modality_of(index) == Modality::Image) {
                image.push_back(index);
            } else {
                text.push_back(index - query.image_count());
            }
        }
        states.push_back({{"image", std::move(image)},
                          {"text", std::move(text)},
                          {"p_image", s.p_image},
                          {"p_text", s.p_text},
                          {"margin", s.margin}});
    }
    return json{{"sample_id", sample_id},
                {"n_image", query.image_count()},
                {"n_text", query.text_count()},
                {"states", std::move(states)},
                {"r_image", report.r_image},
                {"r_text", report.r_text},
                {"imbalance", report.imbalance},
                {"inference_count", report.inference_count}};
}

json evaluation_report_to_json(const EvaluationReport& report) {
    json recall = json::object();
    for (const auto& [k, v] : report.recall_at) recall["Rs@" + std::to_string(k)] = v;
    json samples = json::array();
    for (const auto& s : report.samples) {
        json hits = json::object();
        for (const auto& [k, hit] : s.hits) hits["Rs@" + std::to_string(k)] = hit;
        json entry{{"sample_id", s.sample_id}, {"positive_rank", s.positive_rank}, {"hits", std::move(hits)}};
        if (s.focus) {
            entry["r_image"] = s.focus->r_image;
            entry["r_text"] = s.focus->r_text;
            entry["imbalance"] = s.focus->imbalance;
            entry["inference_count"] = s.focus->inference_count;
        }
        samples.push_back(std::move(entry));
    }
    return json{{"sample_count", report.samples.size()},
                {"recall", std::move(recall)},
                {"focus_samples", report.focus_samples},
                {"mean_r_image", report.mean_r_image},
                {"mean_r_text", report.mean_r_text},
                {"imbalance", report.imbalance},
                {"samples", std::move(samples)}};
}

json params_to_json(const ToyScorerParams& params) {
    return json{{"dim", params.dim()},
                {"image_projection", matrix_to_json(params.image_projection)},
                {"text_projection", matrix_to_json(params.text_projection)}};
}

ToyScorerParams params_from_json(const json& j) {
    reject_unknown_keys(j, {"dim", "image_projection", "text_projection"}, "params");
    ToyScorerParams params;
    params.image_projection = matrix_from_json(field<json>(j, "image_projection", "params"), "image_projection");
    params.text_projection = matrix_from_json(field<json>(j, "text_projection", "params"), "text_projection");
    as_parse([&] {
        params.validate();
        return 0;
    });
    if (j.contains("dim") && field<std::size_t>(j, "dim", "params") != params.dim()) {
        parse_error("params: dim disagrees with the matrices");
    }
    return params;
}

AugmentPlan plan_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"text_aug_count", "image_aug_count", "identity_count", "positive_policy", "negative_ratio",
                         "local_pool_size", "seed", "max_in_flight"},
                        "plan");
    AugmentPlan plan;
    optional_field(j, "text_aug_count", plan.text_aug_count, "plan");
    optional_field(j, "image_aug_count", plan.image_aug_count, "plan");
    optional_field(j, "identity_count", plan.identity_count, "plan");
    optional_field(j, "negative_ratio", plan.negative_ratio, "plan");
    optional_field(j, "local_pool_size", plan.local_pool_size, "plan");
    optional_field(j, "seed", plan.seed, "plan");
    optional_field(j, "max_in_flight", plan.max_in_flight, "plan");
    if (j.contains("positive_policy")) {
        const auto policy = field<std::string>(j, "positive_policy", "plan");
        if (policy == "synthesize") {
            plan.positive_policy = PositivePolicy::SynthesizeReplacement;
        } else if (policy == "keep") {
            plan.positive_policy = PositivePolicy::KeepOriginal;
        } else if (policy != "auto") {
            parse_error("plan: positive_policy must be auto, synthesize or keep");
        }
    }
    as_parse([&] {
        plan.validate();
        return 0;
    });
    return plan;
}

WorldConfig world_config_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"dim", "concept_count", "filler_count", "min_image_tokens", "max_image_tokens",
                         "min_text_tokens", "max_text_tokens", "pool_size", "modality_bias", "feature_noise", "text_emphasis", "edit_strength",
                         "seed"},
                        "world");
    WorldConfig c;
    optional_field(j, "dim", c.dim, "world");
    optional_field(j, "concept_count", c.concept_count, "world");
    optional_field(j, "filler_count", c.filler_count, "world");
    optional_field(j, "min_image_tokens", c.min_image_tokens, "world");
    optional_field(j, "max_image_tokens", c.max_image_tokens, "world");
    optional_field(j, "min_text_tokens", c.min_text_tokens, "world");
    optional_field(j, "max_text_tokens", c.max_text_tokens, "world");
    optional_field(j, "pool_size", c.pool_size, "world");
    optional_field(j, "modality_bias", c.modality_bias, "world");
    optional_field(j, "feature_noise", c.feature_noise, "world");
    optional_field(j, "text_emphasis", c.text_emphasis, "world");
    optional_field(j, "edit_strength", c.edit_strength, "world");
    optional_field(j, "seed", c.seed, "world");
    as_parse([&] {
        c.validate();
        return 0;
    });
    return c;
}

json world_config_to_json(const WorldConfig& c) {
    return json{{"dim", c.dim},
                {"concept_count", c.concept_count},
                {"filler_count", c.filler_count},
                {"min_image_tokens", c.min_image_tokens},
                {"max_image_tokens", c.max_image_tokens},
                {"min_text_tokens", c.min_text_tokens},
                {"max_text_tokens", c.max_text_tokens},
                {"pool_size", c.pool_size},
                {"modality_bias", c.modality_bias},
                {"feature_noise", c.feature_noise},
                {"text_emphasis", c.text_emphasis},
                {"edit_strength", c.edit_strength},
                {"seed", c.seed}};
}

TrainingConfig training_config_from_json(const json& j, TrainingConfig c) {
    reject_unknown_keys(j,
                        {"steps", "learning_rate", "batch_size", "contrastive_temperature", "ramp_start", "ramp_end",
                         "ramp_fraction", "distill_temperature", "distill_weight", "kl_order", "negative_ratio",
                         "in_sample_negatives", "cosine_schedule", "eval_interval", "hard_eval_count", "probe_count",
                         "probe_beam_width", "seed", "train_stream", "eval_stream"},
                        "training");
    optional_field(j, "steps", c.steps, "training");
    optional_field(j, "learning_rate", c.learning_rate, "training");
    optional_field(j, "batch_size", c.batch_size, "training");
    optional_field(j, "contrastive_temperature", c.contrastive_temperature, "training");
    optional_field(j, "ramp_start", c.ramp.start, "training");
    optional_field(j, "ramp_end", c.ramp.end, "training");
    optional_field(j, "ramp_fraction", c.ramp.fraction, "training");
    optional_field(j, "distill_temperature", c.distill_temperature, "training");
    optional_field(j, "distill_weight", c.distill_weight, "training");
    if (j.contains("kl_order")) c.kl_order = kl_order_from_string(field<std::string>(j, "kl_order", "training"));
    optional_field(j, "negative_ratio", c.negative_ratio, "training");
    optional_field(j, "in_sample_negatives", c.in_sample_negatives, "training");
    optional_field(j, "cosine_schedule", c.cosine_schedule, "training");
    optional_field(j, "eval_interval", c.eval_interval, "training");
    optional_field(j, "hard_eval_count", c.hard_eval_count, "training");
    optional_field(j, "probe_count", c.probe_count, "training");
    optional_field(j, "probe_beam_width", c.probe_beam_width, "training");
    optional_field(j, "seed", c.seed, "training");
    optional_field(j, "train_stream", c.train_stream, "training");
    optional_field(j, "eval_stream", c.eval_stream, "training");
    as_parse([&] {
        c.validate();
        return 0;
    });
    return c;
}

json training_config_to_json(const TrainingConfig& c) {
    return json{{"steps", c.steps},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"contrastive_temperature", c.contrastive_temperature},
                {"ramp_start", c.ramp.start},
                {"ramp_end", c.ramp.end},
                {"ramp_fraction", c.ramp.fraction},
                {"distill_temperature", c.distill_temperature},
                {"distill_weight", c.distill_weight},
                {"kl_order", to_string(c.kl_order)},
                {"negative_ratio", c.negative_ratio},
                {"in_sample_negatives", c.in_sample_negatives},
                {"cosine_schedule", c.cosine_schedule},
                {"eval_interval", c.eval_interval},
                {"hard_eval_count", c.hard_eval_count},
                {"probe_count", c.probe_count},
                {"probe_beam_width", c.probe_beam_width},
                {"seed", c.seed},
                {"train_stream", c.train_stream},
                {"eval_stream", c.eval_stream}};
}

json history_record_to_json(const HistoryRecord& r) {
    return json{{"step", r.step}, {"loss", r.loss}, {"rs_at_1", r.rs_at_1}, {"imbalance", r.imbalance}};
}

json hard_set_evaluation_to_json(const HardSetEvaluation& e) {
    return json{{"rs_at_1", e.rs_at_1},
                {"mean_r_image", e.mean_r_image},
                {"mean_r_text", e.mean_r_text},
                {"imbalance", e.imbalance},
                {"single_modality_fraction", e.single_modality_fraction}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) parse_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        parse_error(path.string() + ": " + e.what());
    }
}

}  // namespace fbcir
