#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "fbcir/augment.hpp"
#include "fbcir/formats.hpp"
#include "fbcir/metrics.hpp"
#include "fbcir/protocol.hpp"
#include "fbcir/refinement.hpp"
#include "fbcir/remote.hpp"
#include "fbcir/trainer.hpp"

namespace fbcir::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Transport:
        case ErrorCode::ProtocolViolation:
        case ErrorCode::Timeout:
        case ErrorCode::Backend:
        case ErrorCode::GenerationFailed:
            return kBackendError;
        case ErrorCode::DivergedLoss:
            return kInvariantViolation;
        default:
            return kInputError;
    }
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> explicit_seed) {
    if (explicit_seed) return *explicit_seed;
    const char* env = std::getenv("FBCIR_SEED");
    if (env == nullptr || *env == '\0') return 0;
    std::uint64_t value = 0;
    const auto* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error(ErrorCode::InvalidArgument, "FBCIR_SEED must be an unsigned integer");
    }
    return value;
}

namespace {

// Thrown by self-checks on computed results.
struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Runs work(i) on `workers` threads and hands results to sink(i, result) strictly in index
/// order. A throwing work item is rethrown at its position in that order and stops the
/// remaining work.
template <typename R>
void ordered_parallel(std::size_t count, std::size_t workers, const std::function<R(std::size_t)>& work,
                      const std::function<void(std::size_t, R&)>& sink) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            R r = work(i);
            sink(i, r);
        }
        return;
    }
    struct Slot {
        std::optional<R> value;
        std::exception_ptr error;
        bool done = false;
    };
    std::vector<Slot> slots(count);
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, count); ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const auto i = next.fetch_add(1);
                    if (i >= count || stop.load()) return;
                    std::optional<R> value;
                    std::exception_ptr error;
                    try {
                        value.emplace(work(i));
                    } catch (...) {
                        error = std::current_exception();
                    }
                    std::lock_guard lock(mutex);
                    slots[i].value = std::move(value);
                    slots[i].error = error;
                    slots[i].done = true;
                    ready.notify_all();
                }
            });
        }
        try {
            for (std::size_t i = 0; i < count; ++i) {
                std::unique_lock lock(mutex);
                ready.wait(lock, [&] { return slots[i].done; });
                lock.unlock();
                if (slots[i].error) std::rethrow_exception(slots[i].error);
                sink(i, *slots[i].value);
            }
        } catch (...) {
            stop.store(true);
            throw;
        }
    }
}

class OutputTarget {
public:
    OutputTarget(const std::string& path, std::ostream& fallback) {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
        if (!*file_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
        stream_ = file_.get();
    }
    std::ostream& stream() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

struct ScorerOptions {
    std::string spec = "toy";
    std::string params_path;
    int timeout_ms = 30000;
    std::size_t retries = 2;
};

void add_scorer_options(CLI::App& cmd, ScorerOptions& o) {
    cmd.add_option("--scorer", o.spec, "toy | remote:<exec:CMD | tcp://HOST:PORT>")->capture_default_str();
    cmd.add_option("--params", o.params_path, "Toy scorer parameters (JSON); identity when omitted");
    cmd.add_option("--timeout-ms", o.timeout_ms, "Per-request timeout for remote scorers")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--retries", o.retries, "Reconnect attempts for remote scorers")->capture_default_str();
}

std::unique_ptr<Scorer> make_scorer(const ScorerOptions& o, const BenchmarkFile& file, std::size_t workers) {
    if (o.spec == "toy") {
        if (file.mode != PayloadMode::Inline) {
            throw Error(ErrorCode::InvalidArgument, "the toy scorer needs an inline-mode benchmark file");
        }
        if (!o.params_path.empty()) return std::make_unique<ToyScorer>(params_from_json(read_json_file(o.params_path)));
        std::size_t dim = 2;
        if (!file.samples.empty()) dim = static_cast<std::size_t>(file.samples.front().candidates.front().feature->size());
        return std::make_unique<ToyScorer>(ToyScorerParams::identity(dim));
    }
    constexpr std::string_view prefix = "remote:";
    if (o.spec.starts_with(prefix)) {
        RemoteOptions options;
        options.timeout = std::chrono::milliseconds(o.timeout_ms);
        options.retries = o.retries;
        options.pool_size = std::max<std::size_t>(1, workers);
        return std::make_unique<RemoteScorer>(Endpoint::parse(o.spec.substr(prefix.size())), options);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown scorer '" + o.spec + "'");
}

void check_focus_report(const FocusReport& report, const AugmentedSample& sample, std::size_t beam_width) {
    auto fail = [&](const std::string& what) { throw InvariantViolation("sample " + sample.sample_id + ": " + what); };
    for (const auto& s : report.states) {
        if (s.p_image < 0.0 || s.p_image > 1.0 + 1e-9 || s.p_text < 0.0 || s.p_text > 1.0 + 1e-9) {
            fail("focus proportion outside [0,1]");
        }
    }
    if (std::abs(report.r_image + report.r_text - 1.0) > 1e-9) fail("r_I + r_T != 1");
    if (report.imbalance < 0.0 || report.imbalance > 1.0) fail("imbalance outside [0,1]");
    const auto budget =
        predicted_inference_budget(sample.query.image_count(), sample.query.text_count(), beam_width);
    if (report.inference_count > budget) fail("validations exceed the inference budget");
}

struct RefineOptions {
    std::string input;
    std::string out;
    ScorerOptions scorer;
    std::size_t beam = 5;
    std::string mode = "top1";
    std::size_t parallel = 1;
    std::optional<std::size_t> max_iterations;
    std::optional<std::uint64_t> seed;
};

RefinementConfig refinement_config(std::size_t beam, const std::string& mode, std::optional<std::size_t> max_iter) {
    RefinementConfig config;
    config.beam_width = beam;
    config.mode = validity_mode_from_string(mode);
    config.max_iterations = max_iter;
    return config;
}

// Reports the failing sample id on stderr and converts the error into an exit code.
int report_sample_failure(std::ostream& err, const std::string& command, const std::string& sample_id,
                          const Error& e) {
    err << "fbcir " << command << ": sample " << sample_id << ": " << e.what() << '\n';
    return exit_code_for(e.code());
}

int cmd_refine(const RefineOptions& o, std::ostream& out, std::ostream& err) {
    const auto file = read_benchmark_file(o.input);
    auto scorer = make_scorer(o.scorer, file, o.parallel);
    const auto config = refinement_config(o.beam, o.mode, o.max_iterations);
    OutputTarget target(o.out, out);

    std::size_t current = 0;
    try {
        ordered_parallel<json>(
            file.samples.size(), o.parallel,
            [&](std::size_t i) {
                const auto& sample = file.samples[i];
                const auto result = refine(sample, *scorer, config);
                const auto report = make_focus_report(result, sample.query);
                check_focus_report(report, sample, config.beam_width);
                auto doc = focus_report_to_json(sample.sample_id, report, sample.query);
                doc["truncated"] = result.trace.truncated;
                return doc;
            },
            [&](std::size_t i, json& doc) {
                current = i;
                target.stream() << doc.dump() << '\n';
                target.stream().flush();
                current = i + 1;
            });
    } catch (const Error& e) {
        return report_sample_failure(err, "refine", file.samples[current].sample_id, e);
    } catch (const InvariantViolation& e) {
        err << "fbcir refine: invariant violated: " << e.what() << '\n';
        return kInvariantViolation;
    }
    return kSuccess;
}

struct EvaluateOptions {
    RefineOptions refine;
    std::vector<std::size_t> ks{1};
    bool focus = true;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
    const auto file = read_benchmark_file(o.refine.input);
    auto scorer = make_scorer(o.refine.scorer, file, o.refine.parallel);
    const auto config = refinement_config(o.refine.beam, o.refine.mode, o.refine.max_iterations);

    std::vector<SampleEvaluation> evaluations;
    std::size_t current = 0;
    try {
        ordered_parallel<SampleEvaluation>(
            file.samples.size(), o.refine.parallel,
            [&](std::size_t i) {
                const auto& sample = file.samples[i];
                SampleEvaluation eval;
                eval.sample_id = sample.sample_id;
                const auto ranking = rank(*scorer, sample, sample.query.full_mask());
                eval.positive_rank = ranking.position_of(sample.positive_id()) + 1;
                for (auto k : o.ks) eval.hits[k] = eval.positive_rank <= k;
                if (o.focus) {
                    const auto report = make_focus_report(refine(sample, *scorer, config), sample.query);
                    check_focus_report(report, sample, config.beam_width);
                    eval.focus = report;
                }
                return eval;
            },
            [&](std::size_t i, SampleEvaluation& eval) {
                current = i;
                evaluations.push_back(std::move(eval));
                current = i + 1;
            });
    } catch (const Error& e) {
        return report_sample_failure(err, "evaluate", file.samples[current].sample_id, e);
    } catch (const InvariantViolation& e) {
        err << "fbcir evaluate: invariant violated: " << e.what() << '\n';
        return kInvariantViolation;
    }

    const auto report = aggregate_evaluation(std::move(evaluations), o.ks);
    for (const auto& [k, value] : report.recall_at) {
        if (value < 0.0 || value > 1.0) {
            err << "fbcir evaluate: invariant violated: Rs@" << k << " outside [0,1]\n";
            return kInvariantViolation;
        }
    }
    OutputTarget target(o.refine.out, out);
    target.stream() << evaluation_report_to_json(report).dump(2) << '\n';
    return kSuccess;
}

struct AugmentOptions {
    std::string triplets;
    std::string plan;
    std::string client = "mock";
    std::string out;
    std::vector<unsigned> mix;
    std::string exhaustion = "rescale";
    std::optional<double> ratio;
    std::optional<std::uint64_t> seed;
    std::size_t parallel = 1;
    int timeout_ms = 30000;
};

ExhaustionPolicy exhaustion_from_string(const std::string& text) {
    if (text == "rescale") return ExhaustionPolicy::Rescale;
    if (text == "stop") return ExhaustionPolicy::Stop;
    if (text == "raise") return ExhaustionPolicy::Raise;
    throw Error(ErrorCode::InvalidArgument, "exhaustion policy must be rescale, stop or raise");
}

int cmd_augment(const AugmentOptions& o, std::ostream& out, std::ostream& err) {
    std::ifstream in(o.triplets);
    if (!in) throw Error(ErrorCode::Parse, "cannot open " + o.triplets);
    auto triplets = read_triplets(in);

    AugmentPlan plan = o.plan.empty() ? AugmentPlan{} : plan_from_json(read_json_file(o.plan));
    if (o.seed || o.plan.empty()) plan.seed = resolve_seed(o.seed);
    if (o.ratio) plan.negative_ratio = *o.ratio;
    plan.max_in_flight = std::max(plan.max_in_flight, o.parallel);
    plan.validate();

    if (!o.mix.empty()) {
        // Sources are the dataset tags in order of first appearance.
        std::vector<std::string> order;
        std::map<std::string, std::vector<SourceTriplet>> groups;
        for (auto& t : triplets) {
            if (!groups.contains(t.dataset)) order.push_back(t.dataset);
            groups[t.dataset].push_back(std::move(t));
        }
        if (order.size() != o.mix.size()) {
            throw Error(ErrorCode::InvalidArgument, "--mix has " + std::to_string(o.mix.size()) + " entries for " +
                                                        std::to_string(order.size()) + " dataset tags");
        }
        std::vector<std::vector<SourceTriplet>> sources;
        for (const auto& name : order) sources.push_back(std::move(groups[name]));
        triplets = mix_sources(std::move(sources), o.mix, plan.seed, exhaustion_from_string(o.exhaustion));
    }

    std::unique_ptr<GenerationClient> client;
    if (o.client == "mock") {
        client = std::make_unique<MockGenerationClient>(plan.seed);
    } else if (o.client.starts_with("remote:")) {
        RemoteOptions options;
        options.timeout = std::chrono::milliseconds(o.timeout_ms);
        options.pool_size = std::max<std::size_t>(1, plan.max_in_flight);
        client = std::make_unique<RemoteGenerationClient>(Endpoint::parse(o.client.substr(7)), options);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown client '" + o.client + "'");
    }

    std::vector<AugmentedSample> samples;
    try {
        samples = plan_corpus(triplets, plan, *client);
    } catch (const Error& e) {
        err << "fbcir augment: " << e.what() << '\n';
        return exit_code_for(e.code());
    }
    for (const auto& s : samples) {
        if (s.count_kind(CandidateKind::Positive) != 1) {
            err << "fbcir augment: invariant violated: sample " << s.sample_id << " lacks a unique positive\n";
            return kInvariantViolation;
        }
    }
    OutputTarget target(o.out, out);
    write_benchmark(target.stream(), samples);
    return kSuccess;
}

struct SynthDemoOptions {
    std::string config;
    std::string out;
    std::vector<double> ratios;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> pretrain_steps;
    std::optional<std::uint64_t> seed;
};

SweepConfig load_sweep_config(const std::string& path) {
    SweepConfig config = default_sweep_config();
    if (path.empty()) return config;
    const auto doc = read_json_file(path);
    if (!doc.is_object()) throw Error(ErrorCode::Parse, path + ": expected an object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "world") {
            config.world = world_config_from_json(value);
        } else if (key == "pretrain") {
            config.pretrain = training_config_from_json(value, config.pretrain);
        } else if (key == "finetune") {
            config.finetune = training_config_from_json(value, config.finetune);
        } else if (key == "ratios") {
            config.ratios = value.get<std::vector<double>>();
        } else {
            throw Error(ErrorCode::Parse, path + ": unknown key \"" + key + "\"");
        }
    }
    return config;
}

std::string ratio_tag(double ratio) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", ratio);
    return buffer;
}

void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    for (const auto& record : history) file << history_record_to_json(record).dump() << '\n';
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    file << doc.dump(2) << '\n';
}

int cmd_synth_demo(const SynthDemoOptions& o, std::ostream& out, std::ostream&) {
    auto config = load_sweep_config(o.config);
    if (!o.ratios.empty()) config.ratios = o.ratios;
    if (o.steps) config.finetune.steps = *o.steps;
    if (o.pretrain_steps) config.pretrain.steps = *o.pretrain_steps;
    if (o.seed || std::getenv("FBCIR_SEED")) {
        const auto seed = resolve_seed(o.seed);
        config.world.seed = config.pretrain.seed = config.finetune.seed = seed;
    }
    for (double r : config.ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::InvalidArgument, "ratios must lie in [0,1]");
    }

    const auto result = run_ratio_sweep(config);

    const std::filesystem::path dir(o.out);
    std::filesystem::create_directories(dir);
    write_json(dir / "config.json", {{"world", world_config_to_json(config.world)},
                                     {"pretrain", training_config_to_json(config.pretrain)},
                                     {"finetune", training_config_to_json(config.finetune)},
                                     {"ratios", config.ratios}});
    write_history(dir / "pretrain.history.jsonl", result.pretrained.history);
    write_json(dir / "teacher.params.json", params_to_json(result.pretrained.params));

    json entries = json::array();
    out << "ratio  rs@1   r_I    r_T    imbalance  single_modality\n";
    for (const auto& entry : result.entries) {
        const auto tag = ratio_tag(entry.ratio);
        const auto history_name = "ratio_" + tag + ".history.jsonl";
        write_history(dir / history_name, entry.result.history);
        write_json(dir / ("ratio_" + tag + ".params.json"), params_to_json(entry.result.params));
        const auto& e = entry.result.final_evaluation;
        entries.push_back({{"ratio", entry.ratio},
                           {"history", history_name},
                           {"final", hard_set_evaluation_to_json(e)}});
        char line[128];
        std::snprintf(line, sizeof line, "%-6s %.3f  %.3f  %.3f  %.3f      %.2f\n", tag.c_str(), e.rs_at_1,
                      e.mean_r_image, e.mean_r_text, e.imbalance, e.single_modality_fraction);
        out << line;
    }
    write_json(dir / "summary.json", {{"pretrained", hard_set_evaluation_to_json(result.pretrained.final_evaluation)},
                                      {"entries", std::move(entries)}});
    return kSuccess;
}

struct SynthWorldOptions {
    std::string config;
    std::string out;
    std::size_t count = 10;
    double hard_fraction = 0.5;
    std::optional<std::uint64_t> seed;
};

int cmd_synth_world(const SynthWorldOptions& o, std::ostream& out, std::ostream&) {
    WorldConfig config = o.config.empty() ? WorldConfig{} : world_config_from_json(read_json_file(o.config));
    if (o.seed || o.config.empty()) config.seed = resolve_seed(o.seed);
    const auto samples = generate_world(config, o.count, o.hard_fraction);
    OutputTarget target(o.out, out);
    write_benchmark(target.stream(), samples);
    return kSuccess;
}

int cmd_protocol_check(const std::string& endpoint, int timeout_ms, std::ostream& out) {
    const auto report = protocol::run_protocol_check(Endpoint::parse(endpoint), std::chrono::milliseconds(timeout_ms));
    for (const auto& o : report.outcomes) {
        out << (o.passed ? "PASS " : "FAIL ") << o.name;
        if (!o.passed) out << ": " << o.message;
        out << '\n';
    }
    out << (report.passed() ? "PASS" : "FAIL") << '\n';
    return report.passed() ? kSuccess : kBackendError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Focus diagnosis for composed image retrieval", "fbcir"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "fbcir 0.1.0");

    RefineOptions refine_opts;
    auto* refine_cmd = app.add_subcommand("refine", "Find minimal focus states per sample and report focus balance");
    refine_cmd->add_option("--input", refine_opts.input, "Benchmark JSONL file")->required();
    refine_cmd->add_option("--out", refine_opts.out, "Output JSONL (stdout when omitted)");
    add_scorer_options(*refine_cmd, refine_opts.scorer);
    refine_cmd->add_option("--beam", refine_opts.beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
    refine_cmd->add_option("--mode", refine_opts.mode, "Validity mode")
        ->capture_default_str()
        ->check(CLI::IsMember({"top1", "full"}));
    refine_cmd->add_option("--max-iterations", refine_opts.max_iterations, "Stop the search after this many iterations");
    refine_cmd->add_option("--parallel", refine_opts.parallel, "Samples processed concurrently")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    refine_cmd->add_option("--seed", refine_opts.seed, "Seed (falls back to FBCIR_SEED)");

    EvaluateOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "Subset recall and aggregate focus imbalance");
    eval_cmd->add_option("--input", eval_opts.refine.input, "Benchmark JSONL file")->required();
    eval_cmd->add_option("--out", eval_opts.refine.out, "Output JSON (stdout when omitted)");
    add_scorer_options(*eval_cmd, eval_opts.refine.scorer);
    eval_cmd->add_option("--k", eval_opts.ks, "Cutoffs for Rs@k (repeatable)")
        ->capture_default_str()
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--beam", eval_opts.refine.beam, "Beam width for focus refinement")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--mode", eval_opts.refine.mode, "Validity mode")
        ->capture_default_str()
        ->check(CLI::IsMember({"top1", "full"}));
    eval_cmd->add_option("--parallel", eval_opts.refine.parallel, "Samples processed concurrently")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    eval_cmd->add_flag("--focus,!--no-focus", eval_opts.focus, "Run focus refinement for the imbalance aggregate");
    eval_cmd->add_option("--seed", eval_opts.refine.seed, "Seed (falls back to FBCIR_SEED)");

    AugmentOptions aug_opts;
    auto* aug_cmd = app.add_subcommand("augment", "Plan focus-challenging samples from CIR triplets");
    aug_cmd->add_option("--triplets", aug_opts.triplets, "Triplet JSONL file")->required();
    aug_cmd->add_option("--plan", aug_opts.plan, "Augment plan (JSON)");
    aug_cmd->add_option("--client", aug_opts.client, "mock | remote:<endpoint>")->capture_default_str();
    aug_cmd->add_option("--out", aug_opts.out, "Output benchmark JSONL (stdout when omitted)");
    aug_cmd->add_option("--mix", aug_opts.mix, "Mixing ratio over dataset tags, e.g. 3,1,1")->delimiter(',');
    aug_cmd->add_option("--exhaustion", aug_opts.exhaustion, "rescale | stop | raise")
        ->capture_default_str()
        ->check(CLI::IsMember({"rescale", "stop", "raise"}));
    aug_cmd->add_option("--ratio", aug_opts.ratio, "Override the plan's negative ratio")->check(CLI::Range(0.0, 1.0));
    aug_cmd->add_option("--parallel", aug_opts.parallel, "Triplets planned concurrently")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    aug_cmd->add_option("--timeout-ms", aug_opts.timeout_ms, "Per-request timeout for remote clients")
        ->capture_default_str();
    aug_cmd->add_option("--seed", aug_opts.seed, "Seed (falls back to FBCIR_SEED)");

    SynthDemoOptions demo_opts;
    auto* demo_cmd = app.add_subcommand("synth-demo", "Negative-ratio sweep on the synthetic world");
    demo_cmd->add_option("--config", demo_opts.config, "Sweep config JSON {world, pretrain, finetune, ratios}");
    demo_cmd->add_option("--ratios", demo_opts.ratios, "Negative ratios, e.g. 0,0.25,0.5,0.75,1.0")->delimiter(',');
    demo_cmd->add_option("--steps", demo_opts.steps, "Finetuning steps per ratio");
    demo_cmd->add_option("--pretrain-steps", demo_opts.pretrain_steps, "Teacher pretraining steps");
    demo_cmd->add_option("--out", demo_opts.out, "Output directory")->required();
    demo_cmd->add_option("--seed", demo_opts.seed, "Seed (falls back to FBCIR_SEED)");

    SynthWorldOptions world_opts;
    auto* world_cmd = app.add_subcommand("synth-world", "Write synthetic samples as an inline benchmark file");
    world_cmd->add_option("--config", world_opts.config, "World config JSON");
    world_cmd->add_option("--count", world_opts.count, "Number of samples")->capture_default_str();
    world_cmd->add_option("--hard-fraction", world_opts.hard_fraction, "Fraction of hard samples")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    world_cmd->add_option("--out", world_opts.out, "Output benchmark JSONL (stdout when omitted)");
    world_cmd->add_option("--seed", world_opts.seed, "Seed (falls back to FBCIR_SEED)");

    std::uint64_t ni = 0, nt = 0, w = 5;
    auto* bound_cmd = app.add_subcommand("bound", "Worst-case validation count w*n(n+1)/2");
    bound_cmd->add_option("--ni", ni, "Image tokens")->required()->check(CLI::PositiveNumber);
    bound_cmd->add_option("--nt", nt, "Text tokens")->required()->check(CLI::PositiveNumber);
    bound_cmd->add_option("--w", w, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);

    std::string endpoint;
    int check_timeout_ms = 5000;
    auto* check_cmd = app.add_subcommand("protocol-check", "Replay golden scorer transcripts against an endpoint");
    check_cmd->add_option("--endpoint", endpoint, "exec:<command> | tcp://host:port")->required();
    check_cmd->add_option("--timeout-ms", check_timeout_ms, "Per-response timeout")->capture_default_str();

    std::vector<std::string> argv_storage{"fbcir"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }

    try {
        if (*refine_cmd) return cmd_refine(refine_opts, out, err);
        if (*eval_cmd) return cmd_evaluate(eval_opts, out, err);
        if (*aug_cmd) return cmd_augment(aug_opts, out, err);
        if (*demo_cmd) return cmd_synth_demo(demo_opts, out, err);
        if (*world_cmd) return cmd_synth_world(world_opts, out, err);
        if (*bound_cmd) {
            out << predicted_inference_budget(ni, nt, w) << '\n';
            return kSuccess;
        }
        if (*check_cmd) return cmd_protocol_check(endpoint, check_timeout_ms, out);
    } catch (const Error& e) {
        err << "fbcir: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        err << "fbcir: Parse: " << e.what() << '\n';
        return kInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "fbcir: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}

}  // namespace fbcir::cli
