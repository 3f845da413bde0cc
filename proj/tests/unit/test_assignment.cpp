#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "airground/assignment.hpp"
#include "airground/errors.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace airground;
using airground::testing::brute_force_matching_size;
using airground::testing::random_mask;
using namespace airground::testing;


TEST(Assignment, GreedyHandExample) {
  auto mask = FeasibilityMask::empty({0, 1}, {0}, {0});
  mask.set(0, 0, true);
  mask.set(0, 1, true);
  mask.set(1, 0, true);
  mask.set(1, 1, true);
  auto s = ScoreMatrix::masked_like(mask);
  s.at(0, 0) = 5;
  s.at(0, 1) = 1;
  s.at(1, 0) = 5;
  s.at(1, 1) = 0;
  const auto a = greedy_match(s, mask);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.pairs[0], (Pair{0, {VehicleKind::Uav, 0}}));
  EXPECT_EQ(a.pairs[1], (Pair{1, {VehicleKind::Carrier, 0}}));
}

TEST(Assignment, GreedyTieBreakUavBeforeCarrier) {
  auto mask = FeasibilityMask::empty({3}, {9}, {1});
  mask.set(0, 0, true);
  mask.set(0, 1, true);
  auto s = ScoreMatrix::masked_like(mask);
  s.at(0, 0) = 2;
  s.at(0, 1) = 2;
  const auto a = greedy_match(s, mask);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.pairs[0].vehicle.kind, VehicleKind::Uav);
}

TEST(Assignment, GreedyMatchesNaiveOracleAndIsMaximal) {
  Rng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const int rows = static_cast<int>(rng.uniform_int(0, 7));
    const auto mask = random_mask(rng, rows, rng.uniform_int(0, 4), rng.uniform_int(0, 4), 0.5);
    const auto s = random_scores(rng, mask, 3);
    const auto a = greedy_match(s, mask);
    ASSERT_EQ(a.pairs, naive_greedy(s, mask));
    validate_assignment(a, mask);
    std::vector<bool> ru(mask.rows(), false), cu(mask.cols(), false);
    for (const auto& p : a.pairs) {
      ru[std::find(mask.orders.begin(), mask.orders.end(), p.order_id) - mask.orders.begin()] = true;
      for (std::size_t c = 0; c < mask.cols(); ++c)
        if (mask.column(c) == p.vehicle) cu[c] = true;
    }
    for (std::size_t r = 0; r < mask.rows(); ++r)
      for (std::size_t c = 0; c < mask.cols(); ++c)
        EXPECT_FALSE(mask.at(r, c) && !ru[r] && !cu[c]) << "greedy left a free feasible pair";
    EXPECT_GE(2 * a.size(), brute_force_matching_size(mask));
  }
}

TEST(Assignment, GreedyRejectsShapeMismatchAndNaN) {
  auto mask = FeasibilityMask::empty({0}, {0}, {});
  mask.set(0, 0, true);
  auto s = ScoreMatrix::masked_like(mask);
  s.at(0, 0) = std::nan("");
  EXPECT_THROW(greedy_match(s, mask), ContractViolation);
  auto other = FeasibilityMask::empty({0, 1}, {0}, {});
  EXPECT_THROW(greedy_match(ScoreMatrix::masked_like(other), mask), ContractViolation);
}

TEST(Assignment, ExactEqualsEnumeration) {
  Rng rng(9);
  for (int trial = 0; trial < 400; ++trial) {
    const int rows = static_cast<int>(rng.uniform_int(0, 6));
    const auto mask =
        random_mask(rng, rows, rng.uniform_int(0, 3), rng.uniform_int(0, 3), rng.uniform(0.1, 0.9));
    const auto best = enumerate_best_matching(mask);
    const auto hk = exact_match(mask);
    const auto bb = exact_match(mask, {.method = ExactMethod::BranchAndBound});
    ASSERT_EQ(hk.pairs, best) << "trial " << trial;
    ASSERT_EQ(bb.pairs, best) << "trial " << trial;
    EXPECT_EQ(max_matching_size(mask), best.size());
  }
}

TEST(Assignment, ExactRespectsNonContiguousIds) {
  auto mask = FeasibilityMask::empty({40, 7}, {12, 3}, {5});
  mask.set(0, 0, true);
  mask.set(0, 1, true);
  mask.set(1, 0, true);
  const auto a = exact_match(mask);
  ASSERT_EQ(a.size(), 2u);
  validate_assignment(a, mask);
  EXPECT_EQ(a.pairs[0].order_id, 7);
  EXPECT_EQ(a.pairs[0].vehicle.id, 12);
  EXPECT_EQ(a.pairs[1].vehicle.id, 3);
}

TEST(Assignment, ExactSizeCaps) {
  Rng rng(1);
  const auto big = random_mask(rng, 51, 25, 25, 0.1);
  EXPECT_THROW(exact_match(big), SizeError);
  const auto mid = random_mask(rng, 13, 6, 6, 0.3);
  EXPECT_THROW(exact_match_branch_and_bound(mid), SizeError);
  EXPECT_NO_THROW(exact_match(mid));
}

TEST(Assignment, ExactFullSizeIsFast) {
  Rng rng(2);
  const auto mask = random_mask(rng, 50, 25, 25, 0.3);
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = exact_match(mask);
  const auto dt = std::chrono::steady_clock::now() - t0;
  validate_assignment(a, mask);
  EXPECT_EQ(a.size(), max_matching_size(mask));
  EXPECT_LT(std::chrono::duration<double>(dt).count(), 5.0);
}

TEST(Assignment, ValidateCatchesDuplicatesAndMaskedPairs) {
  auto mask = FeasibilityMask::empty({0, 1}, {0}, {0});
  mask.set(0, 0, true);
  mask.set(1, 0, true);
  EXPECT_THROW(validate_assignment({{{0, {VehicleKind::Uav, 0}}, {1, {VehicleKind::Uav, 0}}}}, mask),
               ContractViolation);
  EXPECT_THROW(validate_assignment({{{0, {VehicleKind::Carrier, 0}}}}, mask), ContractViolation);
  EXPECT_THROW(validate_assignment({{{5, {VehicleKind::Uav, 0}}}}, mask), ContractViolation);
}

TEST(Assignment, GreedyDistanceScores) {
  const auto net = airground::testing::line_network(6);
  WorldState w(net);
  w.stations = {{0, {0, 0}}};
  w.orders = {{0, 2, 4, 0, 50}};
  w.uavs = {Uav{.id = 0, .location = {0, 1}}};
  w.carriers = {Carrier{.id = 0, .location_node = 5}};
  const auto mask = build_mask(w, EnergyModel{}, std::size_t{4});
  const auto s = greedy_distance_policy(w, mask);
  EXPECT_NEAR(s.at(0, 0), -(std::sqrt(5.0) + 2.0), 1e-12);
  EXPECT_NEAR(s.at(0, 1), -(3.0 + 2.0), 1e-12);
}
