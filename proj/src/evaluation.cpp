#include "evdr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evdr {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw ArgumentError("pearson: vectors differ in length");
    if (x.size() < 2)
        throw ArgumentError("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelation("pearson: constant curve has zero variance");
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

Deviation deviation_report(std::span<const double> target, std::span<const double> achieved) {
    if (target.size() != achieved.size())
        throw ArgumentError("deviation: curves differ in length");
    Deviation d;
    d.per_slot.reserve(target.size());
    for (std::size_t t = 0; t < target.size(); ++t) {
        if (target[t] < 0.0 || achieved[t] < 0.0)
            throw ArgumentError("deviation: energies must be non-negative magnitudes");
        d.per_slot.push_back(std::abs(target[t] - achieved[t]));
        d.max = std::max(d.max, d.per_slot.back());
    }
    return d;
}

namespace {

constexpr double kTieTolerance = 1e-9;

class OracleSearch {
public:
    OracleSearch(const Environment& env, OracleResult& out)
        : env_(env), out_(out), n_(env.stations().size()), horizon_(env.program().horizon),
          kind_(kind_for(env.program().scenario)), cells_(n_ * horizon_, 0),
          per_slot_(horizon_, 0.0) {
        // energy_[ev][station]; NaN marks an ineligible EV.
        for (const auto& ev : env.fleet()) {
            std::vector<double> row(n_, std::numeric_limits<double>::quiet_NaN());
            if (env.eligible(ev, kind_))
                for (std::size_t i = 0; i < n_; ++i)
                    row[i] = env.assignment_energy(ev, env.stations()[i], kind_);
            energy_.push_back(std::move(row));
        }
        out_.distance = std::numeric_limits<double>::infinity();
    }

    void run() { visit(0); }

private:
    void visit(std::size_t k) {
        if (k == energy_.size()) {
            record();
            return;
        }
        visit(k + 1); // leave EV k unassigned
        if (n_ == 0 || std::isnan(energy_[k][0]))
            return;
        const auto& target = env_.program().target;
        for (std::size_t i = 0; i < n_; ++i) {
            const double e = energy_[k][i];
            for (std::size_t t = 0; t < horizon_; ++t) {
                int& cell = cells_[i * horizon_ + t];
                if (cell != 0 || per_slot_[t] + e > target[t] + kTieTolerance)
                    continue;
                cell = env_.fleet()[k].id;
                per_slot_[t] += e;
                visit(k + 1);
                per_slot_[t] -= e;
                cell = 0;
            }
        }
    }

    void record() {
        ++out_.schedules_visited;
        const double d = l1_distance(env_.program().target, per_slot_);
        if (d < out_.distance - kTieTolerance) {
            out_.distance = d;
            out_.optima.clear();
            best_cells_ = cells_;
        } else if (d <= out_.distance + kTieTolerance) {
            out_.distance = std::min(out_.distance, d);
            if (cells_ < best_cells_)
                best_cells_ = cells_;
        } else {
            return;
        }
        out_.optima.push_back(materialize(cells_));
        out_.best = materialize(best_cells_);
    }

    ScheduleState materialize(const std::vector<int>& cells) const {
        ScheduleState s(n_, horizon_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t t = 0; t < horizon_; ++t)
                if (const int id = cells[i * horizon_ + t]; id != 0)
                    s.place(i, t, id, env_.assignment_energy(env_.vehicle(id), env_.stations()[i], kind_));
        return s;
    }

    const Environment& env_;
    OracleResult& out_;
    std::size_t n_;
    std::size_t horizon_;
    ActionKind kind_;
    std::vector<std::vector<double>> energy_;
    std::vector<int> cells_;
    std::vector<int> best_cells_;
    std::vector<double> per_slot_;
};

} // namespace

OracleResult brute_force_oracle(const Environment& env, std::size_t limit) {
    const std::size_t n_cells = env.stations().size() * env.program().horizon;
    // (cells + 1)^|EV| choices bound the number of complete schedules.
    std::size_t bound = 1;
    for (std::size_t k = 0; k < env.fleet().size(); ++k) {
        if (bound > limit / (n_cells + 1))
            throw CapacityError("instance too large for exhaustive search (> " +
                                std::to_string(limit) + " schedules)");
        bound *= n_cells + 1;
    }
    OracleResult out;
    OracleSearch(env, out).run();
    return out;
}

std::size_t hamming(const ScheduleState& a, const ScheduleState& b) {
    if (a.cells().size() != b.cells().size())
        throw ArgumentError("hamming: schedules differ in shape");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.cells().size(); ++i)
        d += a.cells()[i] != b.cells()[i];
    return d;
}

std::size_t suboptimal_count(const ScheduleState& schedule, const OracleResult& oracle,
                             std::size_t n_evs) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& opt : oracle.optima)
        best = std::min(best, hamming(schedule, opt));
    return std::min(best, n_evs);
}

AllocationHistogram allocation_stats(const NetworkParams& qnet, const Environment& env,
                                     std::size_t episodes, Rng& rng, double epsilon) {
    return allocation_stats(qnet, env, brute_force_oracle(env), episodes, rng, epsilon);
}

AllocationHistogram allocation_stats(const NetworkParams& qnet, const Environment& env,
                                     const OracleResult& oracle, std::size_t episodes, Rng& rng,
                                     double epsilon) {
    AllocationHistogram hist;
    if (episodes == 0)
        return hist;
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t e = 0; e < episodes; ++e) {
        const auto r = rollout(qnet, env, epsilon, rng);
        ++counts[suboptimal_count(r.state, oracle, env.fleet().size())];
    }
    for (const auto& [bucket, count] : counts)
        hist[bucket] = static_cast<double>(count) / static_cast<double>(episodes);
    return hist;
}

namespace {

std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y) {
    try {
        return pearson(x, y);
    } catch (const UndefinedCorrelation&) {
        return std::nullopt;
    } catch (const ArgumentError&) {
        return std::nullopt;
    }
}

} // namespace

EvalReport evaluate(const NetworkParams& qnet, const Environment& env, const EvalOptions& options,
                    Rng& rng) {
    const std::size_t episodes = std::max<std::size_t>(options.episodes, 1);
    EvalReport rep;
    rep.target = env.program().target;

    std::optional<OracleResult> oracle;
    try {
        oracle = brute_force_oracle(env);
        rep.oracle_distance = oracle->distance;
    } catch (const CapacityError&) {
    }

    std::map<std::size_t, std::size_t> counts;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto r = rollout(qnet, env, options.epsilon, rng);
        rep.episode_rewards.push_back(r.total_reward);
        if (oracle)
            ++counts[suboptimal_count(r.state, *oracle, env.fleet().size())];
        if (e + 1 == episodes) {
            rep.achieved = r.ledger.per_slot;
            rep.distance = env.distance(r.state);
            rep.truncated = r.truncated;
            rep.schedule = std::move(r.state);
        }
    }
    if (oracle) {
        AllocationHistogram hist;
        for (const auto& [bucket, count] : counts)
            hist[bucket] = static_cast<double>(count) / static_cast<double>(episodes);
        rep.allocation_histogram = std::move(hist);
    }

    rep.pearson = try_pearson(rep.target, rep.achieved);
    const auto dev = deviation_report(rep.target, rep.achieved);
    rep.per_slot_deviation = dev.per_slot;
    rep.max_deviation = dev.max;

    const auto base = baseline_schedule(env);
    rep.baseline.assign(base.per_slot().begin(), base.per_slot().end());
    rep.baseline_distance = env.distance(base);
    rep.baseline_pearson = try_pearson(rep.target, rep.baseline);
    return rep;
}

} // namespace evdr
