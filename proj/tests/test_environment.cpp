#include <doctest.h>

#include <cmath>
#include <random>

#include "evdr/environment.hpp"
#include "fixtures.hpp"

using namespace evdr;
using namespace evdr::testing;

namespace {

ScheduleState place_legally(const Environment& env, ScheduleState s, const Action& a) {
    auto out = env.step(s, a);
    REQUIRE_FALSE(out.violation);
    return out.next_state;
}

} // namespace

TEST_CASE("reset yields an empty matrix and untouched ledger") {
    Fleet fleet{leaf(1, 0.5)};
    Environment env(charge_program({10, 20, 30}), fleet, make_stations(2));
    const auto s = env.reset();
    CHECK(s.stations() == 2);
    CHECK(s.horizon() == 3);
    for (int c : s.cells())
        CHECK(c == 0);
    const auto l = env.ledger(s);
    CHECK(l.per_slot == std::vector<double>{0, 0, 0});
    CHECK(l.remaining == std::vector<double>{10, 20, 30});

    Environment no_fleet(charge_program({1}), {}, make_stations(1));
    CHECK_THROWS_AS(no_fleet.reset(), ConfigError);
    Environment no_stations(charge_program({1}), fleet, {});
    CHECK_THROWS_AS(no_stations.reset(), ConfigError);
}

TEST_CASE("environment requires ids 1..|EV|") {
    Fleet fleet{leaf(1, 0.5), leaf(5, 0.5)};
    CHECK_THROWS_AS(Environment(charge_program({1}), fleet, make_stations(1)), ConfigError);
}

TEST_CASE("assignment energy is bounded by power and SoC headroom") {
    const auto program = charge_program({100});
    const ChargingStation station{0, 22};
    const SocLimits limits;
    CHECK(assignment_energy(leaf(1, 0.5), station, program, ActionKind::Charge, limits) ==
          doctest::Approx(7.0).epsilon(1e-12));
    // 0.9 * 22 - 0.85 * 22 binds before the 22 kW limit.
    CHECK(assignment_energy(zoe22(1, 0.85), station, program, ActionKind::Charge, limits) ==
          doctest::Approx(1.1).epsilon(1e-12));
    CHECK_THROWS_AS(assignment_energy(zoe41(1, 0.20), station, program, ActionKind::Discharge, limits),
                    EligibilityError);
    // Discharge floor: (0.3 - 0.2) * 41 = 4.1 < 22.
    CHECK(assignment_energy(zoe41(1, 0.30), station, program, ActionKind::Discharge, limits) ==
          doctest::Approx(4.1).epsilon(1e-12));
    // Station limit binds.
    CHECK(assignment_energy(zoe41(1, 0.3), ChargingStation{0, 11}, program, ActionKind::Charge,
                            limits) == doctest::Approx(11.0));
}

TEST_CASE("check_constraints reports the lowest violated constraint") {
    SUBCASE("legal") {
        Environment env(charge_program({10, 10}), Fleet{leaf(1, 0.5)}, make_stations(2));
        CHECK_FALSE(env.check_constraints(env.reset(), {0, 1, 0, ActionKind::Charge}));
    }
    SUBCASE("C1: kind does not match the scenario") {
        Environment env(charge_program({10}), Fleet{leaf(1, 0.5)}, make_stations(1));
        CHECK(env.check_constraints(env.reset(), {0, 1, 0, ActionKind::Discharge}) == Constraint::C1);
    }
    SUBCASE("C2: too full to charge") {
        Environment env(charge_program({10}), Fleet{leaf(1, 0.88)}, make_stations(1));
        CHECK(env.check_constraints(env.reset(), {0, 1, 0, ActionKind::Charge}) == Constraint::C2);
    }
    SUBCASE("C3: too empty to discharge") {
        Environment env({1, 1.0, {10}, Scenario::Discharge}, Fleet{leaf(1, 0.22)}, make_stations(1));
        CHECK(env.check_constraints(env.reset(), {0, 1, 0, ActionKind::Discharge}) == Constraint::C3);
    }
    SUBCASE("C4: occupied cell") {
        Fleet fleet;
        for (int id = 1; id <= 9; ++id)
            fleet.push_back(leaf(id, 0.5));
        Environment env(charge_program({100, 100}), fleet, make_stations(3));
        auto s = place_legally(env, env.reset(), {2, 7, 1, ActionKind::Charge});
        CHECK(env.check_constraints(s, {2, 9, 1, ActionKind::Charge}) == Constraint::C4);
        // The same EV twice is a C4 as well.
        CHECK(env.check_constraints(s, {0, 7, 0, ActionKind::Charge}) == Constraint::C4);
    }
    SUBCASE("C5: target exceeded") {
        // EV 1 moves 5 kWh (5 kW charger); the LEAF would add 7 -> 12 > 10.
        Fleet fleet{{1, "small", 5, 24, "Type1", 0.5}, leaf(2, 0.5)};
        Environment env(charge_program({10}), fleet, make_stations(2));
        auto s = place_legally(env, env.reset(), {0, 1, 0, ActionKind::Charge});
        CHECK(s.per_slot()[0] == doctest::Approx(5.0));
        CHECK(env.check_constraints(s, {1, 2, 0, ActionKind::Charge}) == Constraint::C5);
    }
}

TEST_CASE("step applies, penalizes and terminates") {
    Fleet fleet{leaf(1, 0.5), leaf(2, 0.5)};
    Environment env(charge_program({20, 20}), fleet, make_stations(2));
    const auto s0 = env.reset();

    SUBCASE("legal action changes exactly one cell") {
        const auto out = env.step(s0, {1, 2, 1, ActionKind::Charge});
        CHECK_FALSE(out.violation);
        CHECK_FALSE(out.done);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < s0.cells().size(); ++i)
            changed += s0.cells()[i] != out.next_state.cells()[i];
        CHECK(changed == 1);
        // Reward is the drop in distance times 100: 40 -> 33.
        CHECK(out.reward == doctest::Approx(700.0));
    }
    SUBCASE("placing the last unassigned EV ends the episode") {
        auto s = place_legally(env, s0, {0, 1, 0, ActionKind::Charge});
        const auto out = env.step(s, {0, 2, 1, ActionKind::Charge});
        CHECK_FALSE(out.violation);
        CHECK(out.done);
    }
    SUBCASE("C4 ends the episode with the penalty and keeps the conflict") {
        auto s = place_legally(env, s0, {0, 1, 0, ActionKind::Charge});
        const auto out = env.step(s, {0, 2, 0, ActionKind::Charge});
        CHECK(out.violation == Constraint::C4);
        CHECK(out.reward == env.max_penalty());
        CHECK(out.done);
        REQUIRE(out.next_state.conflict());
        CHECK(*out.next_state.conflict() == Action{0, 2, 0, ActionKind::Charge});
        CHECK(out.next_state.cells()[0] == 1);
        CHECK(env.episode_done(out.next_state));
    }
    SUBCASE("C1 leaves the state unchanged and does not terminate") {
        const auto out = env.step(s0, {0, 1, 0, ActionKind::Discharge});
        CHECK(out.violation == Constraint::C1);
        CHECK(out.reward == -1e5);
        CHECK_FALSE(out.done);
        CHECK(out.next_state == s0);
    }
    SUBCASE("out of range action") {
        CHECK_THROWS_AS(env.step(s0, {2, 1, 0, ActionKind::Charge}), RangeError);
    }
}

TEST_CASE("C5 violation penalizes without terminating") {
    Fleet fleet{leaf(1, 0.5)};
    Environment env(charge_program({5}), fleet, make_stations(1));
    const auto s = env.reset();
    const auto out = env.step(s, {0, 1, 0, ActionKind::Charge});
    CHECK(out.violation == Constraint::C5);
    CHECK(out.reward == env.max_penalty());
    CHECK(out.next_state == s);
    CHECK_FALSE(out.done);
}

TEST_CASE("reward is the negated, scaled L1 distance") {
    Fleet fleet{leaf(1, 0.5), {2, "ten", 10, 40, "Type1", 0.5}, {3, "three", 3, 24, "Type1", 0.5}};
    Environment env(charge_program({7, 10}), fleet, make_stations(2));
    auto s = env.reset();
    s = place_legally(env, s, {0, 1, 0, ActionKind::Charge}); // 7 in slot 0
    s = place_legally(env, s, {0, 2, 1, ActionKind::Charge}); // 10 in slot 1
    CHECK(env.reward(s, std::nullopt) == 0.0);

    Environment env2(charge_program({10, 10}), fleet, make_stations(2));
    auto s2 = env2.reset();
    s2 = place_legally(env2, s2, {0, 1, 0, ActionKind::Charge});
    s2 = place_legally(env2, s2, {0, 2, 1, ActionKind::Charge});
    // per_slot [7, 10] against [10, 10]
    CHECK(env2.reward(s2, std::nullopt) == doctest::Approx(-300.0));
    CHECK(env2.reward(s2, Constraint::C2) == -1e5);
}

TEST_CASE("energy_of_state recomputes the ledger from the matrix") {
    Fleet fleet{leaf(1, 0.5), zoe22(2, 0.5)};
    Environment env(charge_program({50, 50, 50, 50}), fleet, make_stations(2));
    auto s = env.reset();
    CHECK(env.energy_of_state(s).per_slot == std::vector<double>{0, 0, 0, 0});

    auto one = place_legally(env, s, {0, 1, 2, ActionKind::Charge});
    CHECK(env.energy_of_state(one).per_slot == std::vector<double>{0, 0, 7, 0});

    auto two = place_legally(env, one, {1, 2, 2, ActionKind::Charge});
    const auto l = env.energy_of_state(two);
    CHECK(l.per_slot[2] == doctest::Approx(7.0 + 8.8));
    CHECK(l.remaining[2] == doctest::Approx(50 - 15.8));

    ScheduleState foreign(2, 4);
    foreign.place(0, 0, 2, 0.0);
    Environment small(charge_program({50, 50, 50, 50}), Fleet{leaf(1, 0.5)}, make_stations(2));
    CHECK_THROWS_AS(small.energy_of_state(foreign), DataError);
}

TEST_CASE("episode_done follows the termination rules") {
    Fleet fleet;
    for (int id = 1; id <= 30; ++id)
        fleet.push_back(leaf(id, 0.5));
    Environment env(charge_program(std::vector<double>(5, 1000.0)), fleet, make_stations(6));
    auto s = env.reset();
    CHECK_FALSE(env.episode_done(s));
    int id = 1;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t t = 0; t < 5; ++t) {
            if (id == 30)
                break;
            s = place_legally(env, s, {i, id++, t, ActionKind::Charge});
        }
    CHECK(s.assigned_count() == 29);
    CHECK_FALSE(env.episode_done(s));
    const auto last = env.step(s, {5, 30, 4, ActionKind::Charge});
    CHECK(last.done);
    CHECK(env.episode_done(last.next_state));
}

TEST_CASE("episode ends once no remaining EV fits anywhere") {
    // The 16.4 kWh ZOE cannot fit next to the 7 kWh LEAF under a 10 kWh target.
    Fleet fleet{leaf(1, 0.5), zoe41(2, 0.5)};
    Environment env(charge_program({10}), fleet, make_stations(2));
    const auto out = env.step(env.reset(), {0, 1, 0, ActionKind::Charge});
    CHECK_FALSE(out.violation);
    CHECK_FALSE(env.has_legal_action(out.next_state));
    CHECK(out.done);
}

TEST_CASE("baseline is first come, first served") {
    SUBCASE("greedy fill of one station") {
        Fleet fleet{leaf(1, 0.5), leaf(2, 0.5), leaf(3, 0.5)};
        Environment env(charge_program({1, 1}), fleet, make_stations(1));
        const auto s = baseline_schedule(env);
        CHECK(s.at(0, 0) == 1);
        CHECK(s.at(0, 1) == 2);
        CHECK_FALSE(s.contains(3));
        // C5 is ignored.
        CHECK(s.per_slot()[0] == doctest::Approx(7.0));
    }
    SUBCASE("empty fleet") {
        Environment env(charge_program({1, 1}), {}, make_stations(2));
        const auto s = baseline_schedule(env);
        CHECK(s.assigned_count() == 0);
        CHECK(s.cells().size() == 4);
    }
    SUBCASE("no eligible EV") {
        Fleet fleet{leaf(1, 0.89), zoe22(2, 0.95)};
        Environment env(charge_program({1, 1}), fleet, make_stations(2));
        CHECK(baseline_schedule(env).assigned_count() == 0);
    }
    SUBCASE("skips ineligible EVs and is deterministic") {
        Fleet fleet{leaf(1, 0.89), zoe22(2, 0.5), leaf(3, 0.3)};
        Environment env(charge_program({1, 1}), fleet, make_stations(2));
        const auto a = baseline_schedule(env);
        CHECK(a.at(0, 0) == 2);
        CHECK(a.at(1, 0) == 3);
        CHECK(a == baseline_schedule(env));
    }
}

TEST_CASE("random legal episodes keep every environment invariant") {
    std::mt19937_64 rng(11);
    for (int episode = 0; episode < 2000; ++episode) {
        const auto env = random_environment(rng);
        auto s = env.reset();
        while (true) {
            const auto legal = legal_actions(env, s);
            if (legal.empty())
                break;
            std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
            const Action a = env.action_at(legal[pick(rng)]);
            const double before = env.distance(s);
            const double remaining = env.program().target[a.timeslot] - s.per_slot()[a.timeslot];
            const auto out = env.step(s, a);
            REQUIRE_FALSE(out.violation);
            // Pure function of its inputs.
            REQUIRE(env.step(s, a).next_state == out.next_state);
            REQUIRE(out.next_state.assigned_count() == s.assigned_count() + 1);
            const auto recomputed = env.energy_of_state(out.next_state);
            for (std::size_t t = 0; t < env.program().horizon; ++t) {
                REQUIRE(std::abs(recomputed.per_slot[t] - out.next_state.per_slot()[t]) < 1e-9);
                REQUIRE(out.next_state.per_slot()[t] <= env.program().target[t] + 1e-9);
            }
            const double r = env.reward(out.next_state, std::nullopt);
            REQUIRE(r <= 0.0);
            const double e = env.assignment_energy(env.vehicle(a.ev_id), env.stations()[a.station], a.kind);
            if (e <= remaining)
                REQUIRE(env.distance(out.next_state) <= before + 1e-9);
            REQUIRE(out.done == env.episode_done(out.next_state));
            s = out.next_state;
            if (out.done)
                break;
        }
        REQUIRE(env.episode_done(s));
    }
}
