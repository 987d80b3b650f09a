// evdr: train, evaluate and apply a deep Q-learning EV fleet scheduler.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evdr/agent.hpp"
#include "evdr/evaluation.hpp"
#include "evdr/io.hpp"

namespace {

using namespace evdr;

struct CommonOptions {
    std::string config;
    std::string checkpoint;
    std::string out;
    std::optional<std::uint64_t> seed;
};

RunConfig load_run_config(const CommonOptions& opt) {
    RunConfig c = load_config(opt.config);
    if (opt.seed)
        c.hp.rng_seed = *opt.seed;
    if (!opt.out.empty())
        c.out_dir = fs::absolute(opt.out);
    return c;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    return out;
}

fs::path checkpoint_path(const CommonOptions& opt, const RunConfig& c) {
    return opt.checkpoint.empty() ? c.out_dir / "checkpoint.bin" : fs::path(opt.checkpoint);
}

int cmd_train(const CommonOptions& opt) {
    const RunConfig config = load_run_config(opt);
    const ResolvedRun run = resolve(config);
    const Environment env = run.environment();

    TrainOptions topt;
    const std::size_t report_every = std::max<std::size_t>(run.hp.epochs / 10, 1);
    topt.on_episode = [&](std::size_t e, const TrainingHistory& h) {
        if ((e + 1) % report_every != 0)
            return;
        const std::size_t from = e + 1 - report_every;
        const double mean = std::accumulate(h.episode_rewards.begin() + static_cast<long>(from),
                                            h.episode_rewards.end(), 0.0) /
                            static_cast<double>(report_every);
        std::cerr << "episode " << e + 1 << "/" << run.hp.epochs << "  mean reward " << mean
                  << "  epsilon " << h.episode_epsilons.back() << '\n';
    };
    const TrainResult result = train(env, run.hp, run.network, topt);

    fs::create_directories(config.out_dir);
    save_checkpoint(config.out_dir / "checkpoint.bin", result.qnet);
    {
        auto out = open_output(config.out_dir / "history.csv");
        write_history_csv(out, result.history);
    }
    {
        auto out = open_output(config.out_dir / "manifest.ini");
        write_config(out, manifest_of(config, run));
    }
    {
        auto out = open_output(config.out_dir / "fleet.csv");
        write_fleet(out, run.fleet);
    }
    std::cout << "trained " << run.hp.epochs << " episodes; wrote " << config.out_dir.string()
              << '\n';
    return 0;
}

struct Loaded {
    RunConfig config;
    ResolvedRun run;
    NetworkParams qnet;
};

Loaded load_policy(const CommonOptions& opt) {
    Loaded l{load_run_config(opt), {}, {}};
    l.run = resolve(l.config);
    l.qnet = load_checkpoint(checkpoint_path(opt, l.config));
    check_shape(l.qnet, l.run.network);
    return l;
}

int cmd_evaluate(const CommonOptions& opt) {
    const Loaded l = load_policy(opt);
    const Environment env = l.run.environment();
    Rng rng(l.config.hp.rng_seed);
    const EvalReport report =
        evaluate(l.qnet, env, {l.config.eval_episodes, l.config.eval_epsilon}, rng);
    if (report.truncated)
        std::cerr << "warning: final rollout hit the step cap without terminating\n";

    fs::create_directories(l.config.out_dir);
    {
        auto out = open_output(l.config.out_dir / "report.txt");
        write_report(out, report);
    }
    {
        auto out = open_output(l.config.out_dir / "curves.csv");
        write_curves_csv(out, report.target, report.achieved, report.baseline);
    }
    write_report(std::cout, report);
    return 0;
}

int cmd_schedule(const CommonOptions& opt) {
    const Loaded l = load_policy(opt);
    const Environment env = l.run.environment();
    const Rollout r = greedy_rollout(l.qnet, env);
    if (r.truncated)
        std::cerr << "warning: rollout hit the step cap without terminating\n";
    fs::create_directories(l.config.out_dir);
    {
        auto out = open_output(l.config.out_dir / "schedule.csv");
        write_schedule_csv(out, env, r.state);
    }
    write_schedule_csv(std::cout, env, r.state);
    return 0;
}

int cmd_baseline(const CommonOptions& opt) {
    const RunConfig config = load_run_config(opt);
    const ResolvedRun run = resolve(config);
    const Environment env = run.environment();
    const ScheduleState base = baseline_schedule(env);
    const std::vector<double> curve(base.per_slot().begin(), base.per_slot().end());

    fs::create_directories(config.out_dir);
    {
        auto out = open_output(config.out_dir / "baseline_schedule.csv");
        write_schedule_csv(out, env, base);
    }
    {
        auto out = open_output(config.out_dir / "baseline_curves.csv");
        write_curves_csv(out, run.program.target, curve, curve);
    }
    write_schedule_csv(std::cout, env, base);
    return 0;
}

int cmd_gen_fleet(std::size_t count, const std::vector<double>& mix, std::uint64_t seed,
                  const std::string& out_path) {
    if (mix.size() != 3)
        throw ArgumentError("--mix needs three fractions (ZOE 22, ZOE 41, LEAF)");
    Rng rng(seed);
    const Fleet fleet = gen_fleet(count, {mix[0], mix[1], mix[2]}, rng);
    if (out_path.empty()) {
        write_fleet(std::cout, fleet);
    } else {
        auto out = open_output(out_path);
        write_fleet(out, fleet);
    }
    return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool needs_checkpoint) {
    cmd->add_option("--config", opt.config, "Run configuration file")->required();
    cmd->add_option("--out", opt.out, "Output directory (overrides the config)");
    cmd->add_option("--seed", opt.seed, "Random seed (overrides the config)");
    if (needs_checkpoint)
        cmd->add_option("--checkpoint", opt.checkpoint,
                        "Checkpoint file (default: <out>/checkpoint.bin)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep Q-learning scheduler for EV fleets in demand-response programs"};
    app.require_subcommand(1);

    CommonOptions train_opt, eval_opt, sched_opt, base_opt;
    auto* train = app.add_subcommand("train", "Train a Q-network and write checkpoint + history");
    add_common(train, train_opt, false);
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint against the target curve");
    add_common(evaluate, eval_opt, true);
    auto* schedule = app.add_subcommand("schedule", "Emit the greedy schedule of a checkpoint");
    add_common(schedule, sched_opt, true);
    auto* baseline = app.add_subcommand("baseline", "Emit the first-come-first-served schedule");
    add_common(baseline, base_opt, false);

    std::size_t count = 30;
    std::vector<double> mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::uint64_t fleet_seed = 0;
    std::string fleet_out;
    auto* gen = app.add_subcommand("gen-fleet", "Generate a synthetic fleet CSV");
    gen->add_option("--count", count, "Number of EVs");
    gen->add_option("--mix", mix, "Fractions of ZOE 22, ZOE 41, LEAF")->delimiter(',');
    gen->add_option("--seed", fleet_seed, "Random seed");
    gen->add_option("--out", fleet_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train)
            return cmd_train(train_opt);
        if (*evaluate)
            return cmd_evaluate(eval_opt);
        if (*schedule)
            return cmd_schedule(sched_opt);
        if (*baseline)
            return cmd_baseline(base_opt);
        if (*gen)
            return cmd_gen_fleet(count, mix, fleet_seed, fleet_out);
    } catch (const evdr::Error& e) {
        std::cerr << "error[" << e.kind() << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
