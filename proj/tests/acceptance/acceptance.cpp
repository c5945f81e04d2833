// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fbcir/augment.hpp"
#include "fbcir/formats.hpp"
#include "fbcir/losses.hpp"
#include "fbcir/metrics.hpp"
#include "fbcir/refinement.hpp"
#include "fbcir/trainer.hpp"
#include "instances.hpp"

using namespace fbcir;
using fbcir::testing::InstanceShape;
using fbcir::testing::random_instance;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

struct CliOutcome {
    int code;
    std::string out;
};

CliOutcome run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fbcir-acceptance-" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Verdict oracle_equivalence() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> modality(1, 4), pool(2, 6);
    std::size_t instances = 0, mismatches = 0;
    while (instances < 250) {
        InstanceShape shape{modality(rng), modality(rng), pool(rng), 6};
        if (shape.n_image + shape.n_text > 8) continue;
        const auto s = random_instance(rng, shape, "o" + std::to_string(instances));
        ToyScorer scorer(ToyScorerParams::identity(shape.dim));
        RefinementConfig config;
        config.beam_width = std::size_t{1} << (shape.n_image + shape.n_text);
        const auto found = fbcir::testing::to_bit_set(refine(s, scorer, config).finals);
        const auto library = fbcir::testing::to_bit_set(exhaustive_minimal_states(s, scorer).reachable_minimal);
        const auto independent = fbcir::testing::oracle_minimal_family(s).reachable_minimal;
        if (found != library || found != independent) ++mismatches;
        ++instances;
    }
    const double elapsed = seconds_since(start);
    return {mismatches == 0 && elapsed < 60.0,
            std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches, " +
                fmt(elapsed, 3) + " s"};
}

Verdict validity_minimality() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> modality(1, 13), width(1, 6);
    std::size_t violations = 0, max_n = 0;
    for (int trial = 0; trial < 100; ++trial) {
        InstanceShape shape{modality(rng), modality(rng), 5, 8};
        if (trial == 0) shape.n_image = shape.n_text = 13;
        max_n = std::max(max_n, shape.n_image + shape.n_text);
        const auto s = random_instance(rng, shape, "v" + std::to_string(trial));
        ToyScorer scorer(ToyScorerParams::identity(shape.dim));
        RefinementConfig config;
        config.beam_width = width(rng);
        const auto result = refine(s, scorer, config);
        const auto base = rank(scorer, s, s.query.full_mask());
        if (result.finals.states.empty()) ++violations;
        for (const auto& f : result.finals.states) {
            if (!retrieval_equal(base, rank(scorer, s, f.state.preserved))) ++violations;
            for (auto i : f.state.preserved.indices()) {
                const auto child = f.state.preserved.without(i);
                if (!child.none() && retrieval_equal(base, rank(scorer, s, child))) ++violations;
            }
        }
    }
    return {violations == 0, "100 instances up to n=" + std::to_string(max_n) + ", " + std::to_string(violations) +
                                 " violations"};
}

Verdict budget_bound() {
    std::mt19937_64 rng(91);
    std::uniform_int_distribution<std::size_t> modality(1, 12), width(1, 8);
    std::size_t over = 0;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const InstanceShape shape{modality(rng), modality(rng), 5, 8};
        const auto s = random_instance(rng, shape, "b" + std::to_string(trial));
        ToyScorer scorer(ToyScorerParams::identity(shape.dim));
        RefinementConfig config;
        config.beam_width = width(rng);
        const auto used = refine(s, scorer, config).trace.validations;
        const auto bound = predicted_inference_budget(shape.n_image, shape.n_text, config.beam_width);
        if (used > bound) ++over;
        worst_ratio = std::max(worst_ratio, static_cast<double>(used) / static_cast<double>(bound));
    }
    const auto printed = run_cli({"bound", "--ni", "15", "--nt", "10", "--w", "5"});
    const bool cli_ok = printed.code == 0 && printed.out == "1625\n";
    return {over == 0 && cli_ok, "200 runs, " + std::to_string(over) + " over bound, max used/bound " +
                                     fmt(worst_ratio, 3) + ", bound(15,10,5) printed " +
                                     printed.out.substr(0, printed.out.find('\n'))};
}

Verdict metric_identities() {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<std::size_t> modality(1, 6), states(1, 5);
    std::size_t failures = 0;
    double worst_sum_error = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto s = random_instance(rng, {modality(rng), modality(rng), 2, 4}, "m");
        const auto n = s.query.total_count();
        std::uniform_int_distribution<std::uint64_t> bits(1, (std::uint64_t{1} << n) - 1);
        std::vector<PruneState> set;
        const auto count = states(rng);
        while (set.size() < count) {
            auto mask = TokenMask(n);
            const auto drawn = bits(rng);
            for (std::size_t i = 0; i < n; ++i) {
                if (drawn >> i & 1u) mask.set(i);
            }
            set.push_back({mask});
        }
        const auto r = focus_balance_ratios(set, s.query);
        const double err = std::abs(r.image + r.text - 1.0);
        worst_sum_error = std::max(worst_sum_error, err);
        const double imbalance = focus_imbalance(r.image, r.text);
        if (err > 1e-9 || imbalance < 0.0 || imbalance > 1.0) ++failures;
    }
    // Extreme states: image-only and text-only finals.
    const auto s = random_instance(rng, {3, 3, 2, 4}, "x");
    auto image_only = TokenMask(6), text_only = TokenMask(6);
    image_only.set(0);
    image_only.set(2);
    text_only.set(4);
    const std::vector<PruneState> only_image{{image_only}}, only_text{{text_only}};
    const auto ri = focus_balance_ratios(only_image, s.query);
    const auto rt = focus_balance_ratios(only_text, s.query);
    const bool extremes = focus_imbalance(ri.image, ri.text) == 1.0 && focus_imbalance(rt.image, rt.text) == 1.0;
    return {failures == 0 && extremes, "10000 sets, max |r_I+r_T-1| " + fmt(worst_sum_error, 3) + ", " +
                                           std::to_string(failures) + " failures, extreme imbalance " +
                                           (extremes ? "1" : "not 1")};
}

struct SweepOutcome {
    Verdict trend;
    Verdict shortcut;
};

SweepOutcome sweep_criteria() {
    const auto start = Clock::now();
    const auto config = default_sweep_config();
    const auto sweep = run_ratio_sweep(config);
    const double elapsed = seconds_since(start);

    const auto& entries = sweep.entries;
    const auto& first = entries.front().result.final_evaluation;
    const auto& last = entries.back().result.final_evaluation;
    bool monotone = true;
    std::string series;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double rs = entries[i].result.final_evaluation.rs_at_1;
        if (i > 0 && rs < entries[i - 1].result.final_evaluation.rs_at_1 - 0.02) monotone = false;
        series += (i ? "," : "") + fmt(rs, 3);
    }
    const double gain = last.rs_at_1 - first.rs_at_1;
    Verdict trend{gain >= 0.10 && last.imbalance < first.imbalance && monotone && elapsed < 600.0,
                  "Rs@1 [" + series + "], gain " + fmt(100.0 * gain, 3) + " pts, imbalance " +
                      fmt(first.imbalance, 3) + " -> " + fmt(last.imbalance, 3) + ", " + fmt(elapsed, 3) + " s"};

    // Probe the ratio-0 model (modality bias 1) on 100 hard queries.
    const SyntheticWorld world(config.world);
    const auto& ratio0 = entries.front();
    const auto hard = world.hard_samples(config.finetune.eval_stream, 100);
    const auto probe = evaluate_hard_set(ratio0.result.params, hard, 100, config.finetune.probe_beam_width);
    Verdict shortcut{config.world.modality_bias == 1.0 && ratio0.ratio == 0.0 &&
                         probe.single_modality_fraction >= 0.30,
                     "single-modality final states on " + fmt(100.0 * probe.single_modality_fraction, 3) +
                         "% of 100 probes"};
    return {trend, shortcut};
}

Verdict loss_verification() {
    WorldConfig world_config;
    world_config.dim = 8;
    world_config.seed = 5;
    const SyntheticWorld world(world_config);
    TrainingConfig config;
    config.batch_size = 4;
    config.steps = 100;
    config.negative_ratio = 0.5;
    config.distill_weight = 10.0;
    const auto teacher = ToyScorerParams::identity(8);
    double worst_fd = 0.0;
    for (std::uint64_t b = 0; b < 50; ++b) {
        std::mt19937_64 rng(b);
        std::normal_distribution<double> normal;
        auto params = teacher;
        for (auto* m : {&params.image_projection, &params.text_projection}) {
            for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += 0.3 * normal(rng);
        }
        config.seed = b;
        const auto batch = make_batch(world, config, b);
        worst_fd = std::max(worst_fd, finite_difference_check(params, teacher, batch, config));
    }

    double worst_uniform = 0.0;
    for (std::size_t n = 2; n <= 64; ++n) {
        const std::vector<double> scores(n, 0.37), weights(n, 1.0);
        worst_uniform = std::max(worst_uniform, std::abs(contrastive_loss(scores, 0, 0.07, weights) -
                                                         std::log(static_cast<double>(n))));
    }

    const std::vector<double> logits{0.3, -1.2, 2.5, 0.0};
    const double distill = distillation_loss(logits, logits, 2.0);
    const double ramp_start = in_sample_weight(0, 1000);
    const double ramp_end = in_sample_weight(150, 1000);
    const bool pass = worst_fd < 1e-4 && worst_uniform <= 1e-12 && distill == 0.0 && ramp_start == 0.2 &&
                      ramp_end == 2.0;
    return {pass, "FD max rel err " + fmt(worst_fd, 3) + " over 50 batches, |L-ln n| " + fmt(worst_uniform, 3) +
                      ", KL(x||x) " + fmt(distill, 3) + ", ramp " + fmt(ramp_start) + " -> " + fmt(ramp_end)};
}

Verdict determinism_and_formats() {
    std::vector<std::string> failures;
    const std::string fixture = std::string(FBCIR_FIXTURE_DIR) + "/synth10.jsonl";
    const auto refine_a = run_cli({"refine", "--input", fixture});
    const auto refine_b = run_cli({"refine", "--input", fixture});
    if (refine_a.code != 0 || refine_a.out != refine_b.out) failures.push_back("refine");

    const auto dir = scratch("augment");
    const auto triplets = dir / "triplets.jsonl";
    {
        std::ofstream out(triplets);
        for (int i = 0; i < 8; ++i) {
            const auto id = "t" + std::to_string(i);
            out << triplet_to_json({id, "img/" + id, "make it " + id, "pos/" + id, SourceKind::EditingDriven, "d", {}})
                       .dump()
                << '\n';
        }
    }
    const auto augment_a = run_cli({"augment", "--triplets", triplets.string(), "--seed", "7"});
    const auto augment_b = run_cli({"augment", "--triplets", triplets.string(), "--seed", "7"});
    if (augment_a.code != 0 || augment_a.out != augment_b.out) failures.push_back("augment");
    std::istringstream augmented_in(augment_a.out);
    const auto augmented = read_benchmark(augmented_in);
    bool five = !augmented.samples.empty();
    for (const auto& s : augmented.samples) five = five && s.candidates.size() == 5;
    if (!five) failures.push_back("five candidates");

    const auto config = scratch("demo-config") / "sweep.json";
    std::ofstream(config) << R"({"world":{"dim":8,"seed":3},
        "pretrain":{"steps":20,"batch_size":8,"hard_eval_count":30,"probe_count":4,"eval_interval":10},
        "finetune":{"steps":20,"batch_size":8,"hard_eval_count":30,"probe_count":4,"eval_interval":10},
        "ratios":[0,1]})";
    const auto demo_a = scratch("demo-a"), demo_b = scratch("demo-b");
    const auto ra = run_cli({"synth-demo", "--config", config.string(), "--out", demo_a.string()});
    const auto rb = run_cli({"synth-demo", "--config", config.string(), "--out", demo_b.string()});
    bool demo_same = ra.code == 0 && rb.code == 0 && ra.out == rb.out;
    for (const auto& entry : fs::directory_iterator(demo_a)) {
        demo_same = demo_same && slurp(entry.path()) == slurp(demo_b / entry.path().filename());
    }
    if (!demo_same) failures.push_back("synth-demo");

    WorldConfig world;
    world.seed = 21;
    const auto samples = generate_world(world, 40, 0.5);
    std::stringstream buffer;
    write_benchmark(buffer, samples);
    const auto first = buffer.str();
    const auto parsed = read_benchmark(buffer);
    std::stringstream again;
    write_benchmark(again, parsed.samples);
    if (again.str() != first || parsed.samples.size() != samples.size()) failures.push_back("round trip");

    fs::remove_all(fs::temp_directory_path() / ("fbcir-acceptance-" + std::to_string(::getpid())));
    std::string detail = "refine, augment, synth-demo byte-identical; round trip lossless; 5 local candidates";
    if (!failures.empty()) {
        detail = "failed:";
        for (const auto& f : failures) detail += " " + f;
    }
    return {failures.empty(), detail};
}

Verdict guarded(const std::function<Verdict()>& criterion) {
    try {
        return criterion();
    } catch (const std::exception& e) {
        return {false, std::string("exception: ") + e.what()};
    }
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, Verdict>> results;
    results.emplace_back("oracle equivalence", guarded(oracle_equivalence));
    results.emplace_back("validity/minimality", guarded(validity_minimality));
    results.emplace_back("budget bound", guarded(budget_bound));
    results.emplace_back("metric identities", guarded(metric_identities));
    SweepOutcome sweep;
    try {
        sweep = sweep_criteria();
    } catch (const std::exception& e) {
        sweep.trend = sweep.shortcut = {false, std::string("exception: ") + e.what()};
    }
    results.emplace_back("synthetic trend", sweep.trend);
    results.emplace_back("shortcut emergence", sweep.shortcut);
    results.emplace_back("loss verification", guarded(loss_verification));
    results.emplace_back("determinism & formats", guarded(determinism_and_formats));

    bool all = true;
    for (const auto& [name, verdict] : results) {
        std::cout << (verdict.pass ? "PASS" : "FAIL") << "  " << name << ": " << verdict.detail << '\n';
        all = all && verdict.pass;
    }
    return all ? 0 : 1;
}
