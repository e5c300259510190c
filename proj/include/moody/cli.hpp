#pragma once

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "moody/evaluation.hpp"
#include "moody/io.hpp"
#include "moody/mdl_codec.hpp"
#include "moody/rule_model.hpp"
#include "moody/scorer.hpp"
#include "moody/search.hpp"
#include "moody/synthgen.hpp"

namespace moody::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Offset between the seed of a generated training log and its clean test log.
inline constexpr std::uint64_t kTestSeedOffset = 1000003;

struct LogFlags {
    std::string input;
    std::string schema;
    int bins = 50;
    int precision = 3;
    double epsilon = 0.5;

    LogOptions options() const {
        LogOptions opts;
        opts.bins = bins;
        if (!schema.empty()) apply_schema_json(json::parse(read_file(schema)), opts);
        return opts;
    }
    CodecConfig codec() const {
        CodecConfig c;
        c.precision = precision;
        c.epsilon = epsilon;
        return c;
    }
};

inline void add_log_flags(CLI::App* cmd, LogFlags& f, bool input_required = true) {
    auto* in = cmd->add_option("--input,-i", f.input, "Event log (.csv or .xes)");
    if (input_required) in->required();
    cmd->add_option("--schema", f.schema, "Schema sidecar JSON with declared kinds and categories");
    cmd->add_option("--bins", f.bins, "Histogram bins for numerical variables")->check(CLI::PositiveNumber);
    cmd->add_option("--precision", f.precision, "Significant digits of numerical constants")->check(CLI::Range(1, 15));
    cmd->add_option("--epsilon", f.epsilon, "Prequential smoothing constant")->check(CLI::PositiveNumber);
}

inline std::vector<ConditionOp> parse_ops(const std::string& list) {
    std::vector<ConditionOp> ops;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto op = parse_op(tok);
        if (!op) throw CLI::ValidationError("--ops", "unknown operator '" + tok + "'");
        ops.push_back(*op);
    }
    if (ops.empty()) throw CLI::ValidationError("--ops", "no operators given");
    return ops;
}

inline json score_json(const ScoreBreakdown& s) {
    return {{"l_model", s.l_model}, {"l_cr", s.l_cr}, {"l_cm", s.l_cm}, {"l_cv", s.l_cv}, {"total", s.total}};
}

/// Run the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Mine data modification rules from event logs with MDL"};
    app.set_config("--config", "", "TOML configuration file; command-line flags take precedence");
    app.require_subcommand(1, 1);
    bool version = false;
    app.add_flag("--version", version, "Print version and codec constants");

    // mine
    LogFlags mine_log;
    SearchConfig search;
    std::string model_out, trace_out;
    int max_iter = 0;
    bool no_prune = false;
    int verbose = 0;
    auto* mine_cmd = app.add_subcommand("mine", "Search a rule model for a log");
    add_log_flags(mine_cmd, mine_log);
    mine_cmd->add_option("--nc", search.n_c, "Conditions per operator")->check(CLI::PositiveNumber);
    mine_cmd->add_option("--nu", search.n_u, "Update rules per type and target")->check(CLI::PositiveNumber);
    mine_cmd->add_option("--workers", search.workers, "Concurrent candidate evaluations")->check(CLI::PositiveNumber);
    mine_cmd->add_option("--seed", search.seed, "Random seed (the search is deterministic)");
    mine_cmd->add_option("--max-iterations", max_iter, "Cap on search passes")->check(CLI::PositiveNumber);
    mine_cmd->add_flag("--no-prune", no_prune, "Score every candidate exactly");
    mine_cmd->add_option("--output,-o", model_out, "Model JSON output");
    mine_cmd->add_option("--trace-scores", trace_out, "CSV of the score after each accepted rule");
    mine_cmd->add_flag("-v,--verbose", verbose, "Print the mined rules to stderr");

    // score
    LogFlags score_log;
    std::string score_model;
    auto* score_cmd = app.add_subcommand("score", "Print the description length of a log under a model");
    add_log_flags(score_cmd, score_log);
    score_cmd->add_option("--model,-m", score_model, "Model JSON (empty model when omitted)");

    // generate
    SynthConfig synth;
    std::string ops = "=,<=,>=", target = "mixed", gen_out, gt_out, test_out;
    double gen_noise = 0.0;
    auto* gen_cmd = app.add_subcommand("generate", "Sample a ground-truth model and generate a log from it");
    gen_cmd->add_option("--seed", synth.seed, "Random seed");
    gen_cmd->add_option("--rules", synth.n_rules, "Rules in the ground-truth model")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--cat", synth.n_cat, "Categorical variables")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--num", synth.n_num, "Numerical variables")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--events", synth.n_events, "Minimum number of events")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--ops", ops, "Condition operators, comma separated");
    gen_cmd->add_option("--target", target, "Update targets")->check(CLI::IsMember({"mixed", "categorical", "numerical"}));
    gen_cmd->add_option("--domain", synth.cat_domain_size, "Categorical domain size")->check(CLI::Range(2, 1000));
    gen_cmd->add_option("--trace-min", synth.trace_len.first, "Shortest trace")->check(CLI::Range(2, 100000));
    gen_cmd->add_option("--trace-max", synth.trace_len.second, "Longest trace")->check(CLI::Range(2, 100000));
    gen_cmd->add_option("--noise", gen_noise, "Swap-noise fraction of the training log")->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--out", gen_out, "Log CSV output")->required();
    gen_cmd->add_option("--out-gt", gt_out, "Ground-truth model JSON output");
    gen_cmd->add_option("--out-test", test_out, "Noise-free test log CSV generated with a separate seed");

    // noise
    std::string noise_in, noise_out;
    double noise_q = 0.1;
    std::uint64_t noise_seed = 0;
    auto* noise_cmd = app.add_subcommand("noise", "Apply swap noise to a log");
    noise_cmd->add_option("--input,-i", noise_in, "Input log")->required();
    noise_cmd->add_option("--q", noise_q, "Fraction of values to swap per variable")->check(CLI::Range(0.0, 1.0));
    noise_cmd->add_option("--seed", noise_seed, "Random seed");
    noise_cmd->add_option("--output,-o", noise_out, "Output CSV")->required();

    // evaluate
    LogFlags eval_log;
    std::string eval_model, eval_test, eval_train, eval_report, per_rule_out;
    bool timing = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "Prediction metrics of a model on a test log");
    add_log_flags(eval_cmd, eval_log, false);
    eval_cmd->add_option("--model,-m", eval_model, "Model JSON")->required();
    eval_cmd->add_option("--test", eval_test, "Test log")->required();
    eval_cmd->add_option("--train", eval_train, "Training log for frequencies and fallbacks (default: test log)");
    eval_cmd->add_option("--report", eval_report, "Report JSON output (stdout when omitted)");
    eval_cmd->add_option("--per-rule", per_rule_out, "CSV of per-rule train/test metrics (needs --train)");
    eval_cmd->add_flag("--timing", timing, "Include the runtime in the report");

    // count-dags
    int dag_nodes = 0, dag_edges = 0;
    auto* dag_cmd = app.add_subcommand("count-dags", "Number of labeled DAGs with n nodes and m edges");
    dag_cmd->add_option("--nodes", dag_nodes, "Nodes")->required()->check(CLI::Range(1, 200));
    dag_cmd->add_option("--edges", dag_edges, "Edges")->required()->check(CLI::NonNegativeNumber);

    // --version works without a subcommand
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--version") {
            out << "moody " << kVersion << "\n"
                << "epsilon " << CodecConfig{}.epsilon << "\n"
                << "precision " << CodecConfig{}.precision << "\n"
                << "bins " << LogOptions{}.bins << "\n"
                << "universal_constant " << kUniversalConstant << "\n";
            return kExitOk;
        }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*mine_cmd) {
            const auto log = read_log(mine_log.input, mine_log.options());
            search.codec = mine_log.codec();
            search.prune = !no_prune;
            if (max_iter > 0) search.max_iterations = max_iter;
            const auto result = mine(log, search);
            const auto score = total_score(log, result.model, search.codec);
            if (!model_out.empty()) write_file(model_out, model_to_json(result.model).dump(2) + "\n");
            if (!trace_out.empty()) {
                std::string csv = "iteration,total_bits\n";
                for (std::size_t i = 0; i < result.score_trace.size(); ++i)
                    csv += std::to_string(i) + "," + format_number(result.score_trace[i]) + "\n";
                write_file(trace_out, csv);
            }
            if (verbose)
                for (const auto& r : result.model.rules()) err << to_string(r) << "\n";
            auto j = score_json(score);
            j["rules"] = result.model.size();
            out << j.dump() << "\n";
        } else if (*score_cmd) {
            const auto log = read_log(score_log.input, score_log.options());
            const Model model = score_model.empty() ? Model() : read_model(score_model, score_log.precision);
            auto j = score_json(total_score(log, model, score_log.codec()));
            j["rules"] = model.size();
            out << j.dump() << "\n";
        } else if (*gen_cmd) {
            synth.condition_ops = parse_ops(ops);
            synth.target_kind = target == "categorical" ? TargetKind::categorical_only
                                : target == "numerical" ? TargetKind::numerical_only
                                                        : TargetKind::mixed;
            if (synth.trace_len.second < synth.trace_len.first)
                throw CLI::ValidationError("--trace-max", "must not be below --trace-min");
            const auto gt = sample_ground_truth(synth);
            auto log = generate_log(gt, synth);
            if (gen_noise > 0.0) log = add_swap_noise(std::move(log), gen_noise, synth.seed);
            write_file(gen_out, serialize_csv(log));
            if (!gt_out.empty()) write_file(gt_out, model_to_json(gt).dump(2) + "\n");
            if (!test_out.empty()) {
                auto tcfg = synth;
                tcfg.seed = synth.seed + kTestSeedOffset;
                write_file(test_out, serialize_csv(generate_log(gt, tcfg)));
            }
        } else if (*noise_cmd) {
            auto log = read_log(noise_in);
            write_file(noise_out, serialize_csv(add_swap_noise(std::move(log), noise_q, noise_seed)));
        } else if (*eval_cmd) {
            const auto start = std::chrono::steady_clock::now();
            const auto opts = eval_log.options();
            const Model model = read_model(eval_model, eval_log.precision);
            std::optional<EventLog> train;
            if (!eval_train.empty()) train = read_log(eval_train, opts);
            auto test_opts = opts;
            if (train) test_opts.base = &train->schema;
            const auto test = read_log(eval_test, test_opts);
            const Predictor stats(train ? *train : test);
            auto report = evaluate(model, test, stats);
            if (timing)
                report.runtime_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            const auto text = report_to_json(report).dump(2) + "\n";
            if (eval_report.empty()) out << text;
            else write_file(eval_report, text);
            if (!per_rule_out.empty()) {
                if (!train) throw CLI::ValidationError("--per-rule", "needs --train");
                std::string csv = "rule,metric,train_support,train_value,test_support,test_value\n";
                for (const auto& g : per_rule_generalization(model, *train, test)) {
                    auto value = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
                    csv += detail::csv_escape(to_string(g.rule)) + "," + (g.categorical ? "f1" : "rmse") + "," +
                           std::to_string(g.train_support) + "," + value(g.train_metric) + "," +
                           std::to_string(g.test_support) + "," + value(g.test_metric) + "\n";
                }
                write_file(per_rule_out, csv);
            }
        } else if (*dag_cmd) {
            out << count_dags(dag_nodes, dag_edges) << "\n";
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace moody::cli
