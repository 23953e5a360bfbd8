// turncredit command-line pipeline:
//   simulate -> classify -> advantages -> diagnose -> calibrate
// Stages communicate only via files so each is independently scriptable.
// Exit codes: 0 success, 1 usage, 2 data/validation error, 3 not converged.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <turncredit/turncredit.hpp>

namespace fs = std::filesystem;
using namespace turncredit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNotConverged = 3;

// temp-then-rename so a crashed run never leaves a half-written artifact
void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

void emit(const std::string& output_path, const std::string& content) {
    if (output_path.empty())
        std::cout << content;
    else
        write_file_atomic(output_path, content);
}

ArgValue parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    ArgValue j = ArgValue::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON in " + path);
    return j;
}

// "naive" / "calibrated" / "sparse" or a path to a table document
RewardTable resolve_table(const std::string& spec) {
    if (spec == "naive") return naive_table();
    if (spec == "calibrated") return calibrated_table();
    if (spec == "sparse") return sparse_table();
    return reward_table_from_json(parse_json_file(spec));
}

// "default" or a path to a registry document
ToolRegistry resolve_registry(const std::string& spec) {
    if (spec == "default") return default_registry();
    return registry_from_json(parse_json_file(spec));
}

RolloutBuffer load_buffer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    return parse_buffer(in);
}

struct PolicyFlags {
    std::string policy_file;
    double p_wrong_arg = 0.35;
    double p_extra_read = 0.9;
    double p_error = 0.8;
    double p_duplicate = 0.0;
    std::string error_mode = "failure_linked";
};

void add_policy_flags(CLI::App* cmd, PolicyFlags& flags) {
    cmd->add_option("--policy", flags.policy_file, "policy parameter JSON file");
    cmd->add_option("--p-wrong-arg", flags.p_wrong_arg, "state-call corruption probability");
    cmd->add_option("--p-extra-read", flags.p_extra_read, "redundant read insertion probability");
    cmd->add_option("--p-error", flags.p_error, "tool error flag probability");
    cmd->add_option("--p-duplicate", flags.p_duplicate, "read re-issue probability");
    cmd->add_option("--error-mode", flags.error_mode, "error placement")
        ->check(CLI::IsMember({"independent", "failure_linked"}));
}

PolicyParams resolve_policy(const CLI::App* cmd, const PolicyFlags& flags) {
    PolicyParams p = paper_patterned_params(0);
    if (!flags.policy_file.empty()) {
        const ArgValue j = parse_json_file(flags.policy_file);
        if (auto it = j.find("p_wrong_arg"); it != j.end()) p.p_wrong_arg = it->get<double>();
        if (auto it = j.find("p_extra_read"); it != j.end()) p.p_extra_read = it->get<double>();
        if (auto it = j.find("p_error"); it != j.end()) p.p_error = it->get<double>();
        if (auto it = j.find("p_duplicate"); it != j.end()) p.p_duplicate = it->get<double>();
        if (auto it = j.find("error_mode"); it != j.end())
            p.error_mode = it->get<std::string>() == "independent" ? ErrorMode::independent
                                                                   : ErrorMode::failure_linked;
    }
    // explicit flags override the file
    if (cmd->count("--p-wrong-arg")) p.p_wrong_arg = flags.p_wrong_arg;
    if (cmd->count("--p-extra-read")) p.p_extra_read = flags.p_extra_read;
    if (cmd->count("--p-error")) p.p_error = flags.p_error;
    if (cmd->count("--p-duplicate")) p.p_duplicate = flags.p_duplicate;
    if (cmd->count("--error-mode"))
        p.error_mode = flags.error_mode == "independent" ? ErrorMode::independent
                                                         : ErrorMode::failure_linked;
    p.validate();
    return p;
}

EstimatorConfig make_estimator(const std::string& kind, double gamma, double lambda,
                               double epsilon) {
    EstimatorConfig c;
    c.kind = *estimator_from_name(kind);  // choices enforced by CLI11
    c.gamma = gamma;
    c.lambda = lambda;
    c.epsilon = epsilon;
    return c;
}

std::string pass_rate_line(const RolloutBuffer& buffer) {
    std::size_t passing = 0;
    for (const Rollout& r : buffer) passing += r.outcome == 1 ? 1 : 0;
    char line[128];
    std::snprintf(line, sizeof(line), "%zu rollouts, pass rate %.4f", buffer.size(),
                  buffer.empty() ? 0.0 : static_cast<double>(passing) /
                                             static_cast<double>(buffer.size()));
    return line;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"turn-level credit assignment analytics over rollout logs"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a synthetic rollout buffer");
    std::size_t sim_tasks = 10;
    std::size_t sim_group = 4;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    PolicyFlags sim_policy;
    sim->add_option("--tasks", sim_tasks, "number of task groups")->check(CLI::PositiveNumber);
    sim->add_option("--group-size", sim_group, "rollouts per task (N >= 2)")
        ->check(CLI::Range(static_cast<std::size_t>(2), static_cast<std::size_t>(1024)));
    sim->add_option("--seed", sim_seed, "generation seed");
    sim->add_option("--output,-o", sim_out, "output rollout file")->required();
    add_policy_flags(sim, sim_policy);

    // --- classify ---------------------------------------------------------
    auto* cls = app.add_subcommand("classify", "per-turn tiers and rewards for a buffer");
    std::string cls_in, cls_out;
    std::string cls_table = "naive";
    std::string cls_registry = "default";
    cls->add_option("--input,-i", cls_in, "rollout file")->required();
    cls->add_option("--output,-o", cls_out, "output record file (default stdout)");
    cls->add_option("--reward-table", cls_table, "naive|calibrated|sparse|<path>");
    cls->add_option("--registry", cls_registry, "default|<path>");

    // --- advantages -------------------------------------------------------
    auto* adv = app.add_subcommand("advantages", "per-turn advantage export");
    std::string adv_in, adv_out;
    std::string adv_table = "naive";
    std::string adv_registry = "default";
    std::string adv_kind = "hybrid";
    double adv_gamma = 0.9, adv_lambda = 0.3, adv_epsilon = 1e-4;
    adv->add_option("--input,-i", adv_in, "rollout file")->required();
    adv->add_option("--output,-o", adv_out, "output record file (default stdout)");
    adv->add_option("--reward-table", adv_table, "naive|calibrated|sparse|<path>");
    adv->add_option("--registry", adv_registry, "default|<path>");
    adv->add_option("--estimator", adv_kind, "advantage estimator")
        ->check(CLI::IsMember({"grpo", "mt_grpo", "gtpo", "hybrid"}));
    adv->add_option("--gamma", adv_gamma, "discount factor");
    adv->add_option("--lambda", adv_lambda, "outcome dampening");
    adv->add_option("--epsilon", adv_epsilon, "normalization stabilizer");

    // --- diagnose ---------------------------------------------------------
    auto* diag = app.add_subcommand("diagnose", "discriminative / alignment / allocation report");
    std::string diag_in, diag_out;
    std::string diag_table = "naive";
    std::string diag_registry = "default";
    std::string diag_kind = "hybrid";
    std::string diag_format = "text";
    double diag_gamma = 0.9, diag_lambda = 0.3, diag_epsilon = 1e-4;
    diag->add_option("--input,-i", diag_in, "rollout file")->required();
    diag->add_option("--output,-o", diag_out, "report file (default stdout)");
    diag->add_option("--reward-table", diag_table, "naive|calibrated|sparse|<path>");
    diag->add_option("--registry", diag_registry, "default|<path>");
    diag->add_option("--estimator", diag_kind, "advantage estimator")
        ->check(CLI::IsMember({"grpo", "mt_grpo", "gtpo", "hybrid"}));
    diag->add_option("--gamma", diag_gamma, "discount factor");
    diag->add_option("--lambda", diag_lambda, "outcome dampening");
    diag->add_option("--epsilon", diag_epsilon, "normalization stabilizer");
    diag->add_option("--format", diag_format, "report format")
        ->check(CLI::IsMember({"text", "json"}));

    // --- calibrate --------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "iterative reward calibration loop");
    std::size_t cal_tasks = 50;
    std::size_t cal_group = 4;
    std::uint64_t cal_seed = 0;
    std::size_t cal_max_iter = 10;
    double cal_delta = 0.05, cal_eta = 0.4;
    std::string cal_out, cal_trace, cal_buffer_dir;
    std::string cal_registry = "default";
    std::string cal_kind = "hybrid";
    double cal_gamma = 0.9, cal_lambda = 0.3, cal_epsilon = 1e-4;
    PolicyFlags cal_policy;
    cal->add_option("--tasks", cal_tasks, "task groups per iteration")->check(CLI::PositiveNumber);
    cal->add_option("--group-size", cal_group, "rollouts per task (N >= 2)")
        ->check(CLI::Range(static_cast<std::size_t>(2), static_cast<std::size_t>(1024)));
    cal->add_option("--seed", cal_seed, "generation seed");
    cal->add_option("--buffer-dir", cal_buffer_dir,
                    "directory of per-iteration rollout files (overrides generation)");
    cal->add_option("--max-iterations", cal_max_iter)->check(CLI::PositiveNumber);
    cal->add_option("--delta", cal_delta, "discriminative threshold");
    cal->add_option("--eta", cal_eta, "reward-outcome correlation target");
    cal->add_option("--registry", cal_registry, "default|<path>");
    cal->add_option("--estimator", cal_kind, "alignment estimator")
        ->check(CLI::IsMember({"grpo", "mt_grpo", "gtpo", "hybrid"}));
    cal->add_option("--gamma", cal_gamma, "discount factor");
    cal->add_option("--lambda", cal_lambda, "outcome dampening");
    cal->add_option("--epsilon", cal_epsilon, "normalization stabilizer");
    cal->add_option("--output,-o", cal_out, "final reward table file")->required();
    cal->add_option("--trace", cal_trace, "calibration trace JSON file");
    add_policy_flags(cal, cal_policy);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) {
            PolicyParams params = resolve_policy(sim, sim_policy);
            RolloutBuffer buffer = generate_buffer(sim_tasks, sim_group, params, sim_seed);
            std::ostringstream out;
            serialize_buffer(buffer, out);
            write_file_atomic(sim_out, out.str());
            std::cout << pass_rate_line(buffer) << "\n";
            return kExitOk;
        }

        if (cls->parsed()) {
            RolloutBuffer buffer = load_buffer(cls_in);
            const RewardTable table = resolve_table(cls_table);
            const ToolRegistry registry = resolve_registry(cls_registry);
            std::ostringstream out;
            for (const Rollout& r : buffer) {
                const std::vector<TurnRewards> rewards = assign_rewards(r, table, registry);
                for (std::size_t k = 0; k < rewards.size(); ++k) {
                    ArgValue j = ArgValue::object();
                    j["rollout_id"] = r.rollout_id;
                    j["turn_index"] = k;
                    j["tier"] = tier_name(rewards[k].tier);
                    j["reward"] = rewards[k].reward;
                    if (rewards[k].match) j["match_score"] = rewards[k].match->score;
                    out << j.dump() << '\n';
                }
            }
            emit(cls_out, out.str());
            return kExitOk;
        }

        if (adv->parsed()) {
            RolloutBuffer buffer = load_buffer(adv_in);
            const RewardTable table = resolve_table(adv_table);
            const ToolRegistry registry = resolve_registry(adv_registry);
            const EstimatorConfig config =
                make_estimator(adv_kind, adv_gamma, adv_lambda, adv_epsilon);
            std::ostringstream out;
            std::size_t skipped = 0;
            for (const RolloutGroup& group : group_rollouts(buffer)) {
                if (!group.usable_for_normalization()) {
                    ++skipped;
                    continue;
                }
                std::vector<std::vector<TurnRewards>> rewards;
                for (const Rollout& r : group.rollouts)
                    rewards.push_back(assign_rewards(r, table, registry));
                write_advantage_records(group, compute_advantages(group, rewards, config), out);
            }
            emit(adv_out, out.str());
            if (skipped)
                std::cerr << "skipped " << skipped << " singleton group(s) (N < 2)\n";
            return kExitOk;
        }

        if (diag->parsed()) {
            RolloutBuffer buffer = load_buffer(diag_in);
            const RewardTable table = resolve_table(diag_table);
            const ToolRegistry registry = resolve_registry(diag_registry);
            const EstimatorConfig config =
                make_estimator(diag_kind, diag_gamma, diag_lambda, diag_epsilon);
            const DiagnosticReport report = run_diagnostics(buffer, table, registry, config);
            emit(diag_out, diag_format == "json" ? report_to_json(report).dump(2) + "\n"
                                                 : render_text(report));
            return kExitOk;
        }

        if (cal->parsed()) {
            IrcConfig config;
            config.delta = cal_delta;
            config.eta = cal_eta;
            config.max_iterations = cal_max_iter;
            config.estimator = make_estimator(cal_kind, cal_gamma, cal_lambda, cal_epsilon);
            config.registry = resolve_registry(cal_registry);

            std::function<RolloutBuffer(std::size_t)> source;
            if (!cal_buffer_dir.empty()) {
                std::vector<std::string> files;
                for (const auto& entry : fs::directory_iterator(cal_buffer_dir))
                    if (entry.path().extension() == ".jsonl") files.push_back(entry.path().string());
                std::sort(files.begin(), files.end());
                if (files.empty()) throw Error("no .jsonl files in " + cal_buffer_dir);
                source = [files](std::size_t iter) {
                    return load_buffer(files[std::min(iter, files.size() - 1)]);
                };
            } else {
                PolicyParams params = resolve_policy(cal, cal_policy);
                const std::size_t tasks = cal_tasks;
                const std::size_t group = cal_group;
                const std::uint64_t seed = cal_seed;
                source = [params, tasks, group, seed](std::size_t iter) {
                    return generate_buffer(tasks, group, params, derive_seed(seed, 0xca11b, iter));
                };
            }

            const IrcResult result = calibrate(source, config);
            if (!cal_trace.empty())
                write_file_atomic(cal_trace, irc_trace_to_json(result).dump(2) + "\n");
            if (!result.table) {
                std::cerr << "calibration failed: "
                          << (result.trace.empty() || !result.trace.back().error
                                  ? std::string("no table proposed")
                                  : *result.trace.back().error)
                          << "\n";
                return kExitData;
            }
            write_file_atomic(cal_out, reward_table_to_json(*result.table).dump(2) + "\n");
            std::cout << (result.converged ? "converged" : "not converged") << " after "
                      << result.trace.size() << " iteration(s)\n";
            return result.converged ? kExitOk : kExitNotConverged;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
