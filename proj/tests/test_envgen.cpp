#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "paf/envgen.hpp"

using namespace paf;

namespace {

std::string serialized(const World& w) {
  std::ostringstream os;
  save_world(w, os);
  return os.str();
}

}  // namespace

TEST_CASE("generation is deterministic per kind and seed") {
  for (EnvKind kind : {EnvKind::Columns, EnvKind::Office, EnvKind::Racing, EnvKind::RacingMW}) {
    const World a = generate_environment(kind, 1);
    const World b = generate_environment(kind, 1);
    CHECK(serialized(a) == serialized(b));
    const World c = generate_environment(kind, 2);
    CHECK(serialized(a) != serialized(c));
  }
}

TEST_CASE("columns worlds keep start and waypoints clear") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 9ull}) {
    const World w = generate_environment(EnvKind::Columns, seed);
    for (const auto& wp : w.waypoints) CHECK(w.clearance(wp) >= 0.2);
    CHECK(w.clearance(w.start_region.center()) >= 0.2);
    CHECK(w.bounds.contains(w.goal()));
    CHECK(!w.obstacles.empty());
  }
}

TEST_CASE("density scales the obstacle count and lower density is a prefix") {
  EnvGenOptions full;
  EnvGenOptions half;
  half.density = 0.5;
  const World dense = generate_environment(EnvKind::Columns, 4, 20.0, full);
  const World sparse = generate_environment(EnvKind::Columns, 4, 20.0, half);
  CHECK(sparse.obstacles.size() < dense.obstacles.size());
  EnvGenOptions none;
  none.density = 0.0;
  const World open = generate_environment(EnvKind::Columns, 4, 20.0, none);
  CHECK(open.obstacles.empty());
}

TEST_CASE("racing_mw paths visit every waypoint in order") {
  const World w = generate_environment(EnvKind::RacingMW, 7);
  CHECK(w.waypoints.size() >= 4);
  const Roadmap rm = build_prm(w, 800, 10, 7);
  const GuidingPath path = shortest_path(rm, w);
  REQUIRE(path.waypoint_indices.size() == w.waypoints.size());
  int prev = -1;
  for (std::size_t k = 0; k < w.waypoints.size(); ++k) {
    const int idx = path.waypoint_indices[k];
    CHECK(idx > prev);
    CHECK((path.vertices[idx] - w.waypoints[k]).norm() < 1e-9);
    prev = idx;
  }
}

TEST_CASE("office worlds have wall segments with door gaps") {
  const World w = generate_environment(EnvKind::Office, 5);
  CHECK(w.obstacles.size() >= 6);  // three walls, two segments each
  const Roadmap rm = build_prm(w, 800, 10, 5);
  CHECK_NOTHROW(shortest_path(rm, w));
}

TEST_CASE("invalid scale is rejected") {
  CHECK_THROWS_AS(generate_environment(EnvKind::Columns, 1, -1.0), std::invalid_argument);
}

TEST_CASE("kind round-trips through strings") {
  for (EnvKind kind : {EnvKind::Columns, EnvKind::Office, EnvKind::Racing, EnvKind::RacingMW}) {
    CHECK(env_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(env_kind_from_string("swamp"), std::invalid_argument);
}
