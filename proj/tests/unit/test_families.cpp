#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "pbshm/error.hpp"
#include "pbshm/families.hpp"

using namespace pbshm;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::io;
}

std::size_t count_kind(const AttributedGraph& g, ElementTag tag) {
  std::size_t n = 0;
  for (const auto& v : g.vertices()) n += v.kind.tag == tag;
  return n;
}

ThetaVector random_interior(const FamilyTemplate& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> v(f.dimension());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.box(i).lo + u(rng) * f.box(i).width();
  return ThetaVector(std::move(v));
}

}  // namespace

TEST_CASE("family dimensions and midpoint graphs") {
  CHECK(two_span_family()->dimension() == 18);
  CHECK(three_span_family()->dimension() == 30);
  const auto g2 = instantiate(*two_span_family(), two_span_family()->midpoint());
  CHECK(count_kind(g2, ElementTag::deck) == 2);
  CHECK(count_kind(g2, ElementTag::pillar) == 1);
  const auto g3 = instantiate(*three_span_family(), three_span_family()->midpoint());
  CHECK(count_kind(g3, ElementTag::deck) == 3);
  CHECK(count_kind(g3, ElementTag::pillar) == 2);
}

TEST_CASE("two-span topology matches a hand-written adjacency") {
  // G1-D1, D1-D2, D1-P1, D2-P1, P1-G2, D2-G3
  const AttributeBlock a{10, 1, 0.2, 3e10, 2500, 0.3};
  const AttributedGraph hand("hand",
                             {{"ga", ElementKind::ground(), std::nullopt},
                              {"d1", ElementKind::deck(), a},
                              {"p", ElementKind::pillar(), a},
                              {"gb", ElementKind::ground(), std::nullopt},
                              {"d2", ElementKind::deck(), a},
                              {"gc", ElementKind::ground(), std::nullopt}},
                             {{"ga", "d1"}, {"d1", "d2"}, {"d1", "p"}, {"d2", "p"}, {"p", "gb"}, {"d2", "gc"}});
  const auto g = fixture::b2().graph();
  REQUIRE(g.size() == hand.size());
  CHECK(oracle::brute_force_mcs(g, hand) == hand.size());
  CHECK(kind_isomorphic(g, hand));
}

TEST_CASE("instantiate validates the box and round-trips theta") {
  const auto f = two_span_family();
  auto theta = fixture::b2().theta;
  theta[f->coordinate("D1", Param::E)] = 0.0;
  CHECK(kind_of([&] { instantiate(*f, theta); }) == ErrorKind::domain);
  theta[f->coordinate("D1", Param::E)] = 6e11;
  CHECK(kind_of([&] { instantiate(*f, theta); }) == ErrorKind::domain);
  try {
    instantiate(*f, theta);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("D1.E") != std::string::npos);
  }
  CHECK(kind_of([&] { instantiate(*f, ThetaVector(std::vector<double>(17, 1.0))); }) == ErrorKind::domain);

  std::mt19937_64 rng(3);
  for (const auto& fam : {two_span_family(), three_span_family()})
    for (int i = 0; i < 20; ++i) {
      const auto t = random_interior(*fam, rng);
      CHECK(theta_from_graph(*fam, instantiate(*fam, t)) == t);
    }
}

TEST_CASE("three-span contracts onto two-span") {
  const auto map = contract(three_span_family(), two_span_family());
  CHECK(map.zero_indices() == std::vector<std::size_t>{three_span_family()->coordinate("P2", Param::l),
                                                        three_span_family()->coordinate("D3", Param::l)});
  const auto b3 = fixture::b3();
  const auto b2 = fixture::b2();
  const auto rep = map.representative(b2.theta, b3.theta);
  const auto contracted = instantiate(*three_span_family(), rep);
  CHECK(kind_isomorphic(contracted, b2.graph()));
  CHECK(oracle::brute_force_mcs(contracted, b2.graph()) == b2.graph().size());
  CHECK(map.apply(rep) == b2.theta);
  // D3's material stays in theta even though the slot is gone.
  CHECK(rep[three_span_family()->coordinate("D3", Param::E)] == 3e10);

  // Only part of the zero set at zero is not a declared contraction.
  auto half = b3.theta;
  half[three_span_family()->coordinate("D3", Param::l)] = 0.0;
  CHECK(kind_of([&] { instantiate(*three_span_family(), half); }) == ErrorKind::domain);

  // Intermediate contraction states stay connected.
  const auto path = geodesic(b3, b2);
  for (double s = 0.05; s < 1.0; s += 0.05) CHECK_NOTHROW(path.point_at(s).graph());
}

TEST_CASE("zeroing D3's stiffness and density disconnects the structure") {
  auto doc = three_span_family()->to_json();
  doc["name"] = "three_span_material";
  auto& zero = doc["contractions"][0]["zero_set"];
  zero.push_back("D3.E");
  zero.push_back("D3.rho");
  const auto f = std::make_shared<const FamilyTemplate>(FamilyTemplate::from_json(doc));
  CHECK(kind_of([&] { contract(f, two_span_family()); }) == ErrorKind::connectivity);
  CHECK(kind_of([&] { contract(two_span_family(), three_span_family()); }) == ErrorKind::no_path);
}

TEST_CASE("family json round trip") {
  for (const auto& f : {single_span_family(), two_span_family(), three_span_family()}) {
    const auto back = FamilyTemplate::from_json(f->to_json());
    CHECK(back.to_json() == f->to_json());
  }
  CHECK(kind_of([] { FamilyRegistry::builtin().find("four_span"); }) == ErrorKind::not_found);
}

TEST_CASE("geodesics") {
  const auto a = fixture::b2("a");
  const auto b = fixture::with(fixture::with(a, "D1", Param::l, 40.0), "P1", Param::E, 2e10);

  SUBCASE("endpoints are exact and the midpoint is the mean") {
    const auto p = geodesic(a, b);
    CHECK(p.point_at(0.0).theta == a.theta);
    CHECK(p.point_at(1.0).theta == b.theta);
    const auto mid = p.theta_at(0.5);
    for (std::size_t i = 0; i < mid.size(); ++i) CHECK(mid[i] == doctest::Approx(0.5 * (a.theta[i] + b.theta[i])));
    CHECK(kind_of([&] { p.theta_at(1.5); }) == ErrorKind::domain);
  }

  SUBCASE("interior points of box-interior endpoints instantiate") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      const StructureInstance x{"x", three_span_family(), random_interior(*three_span_family(), rng)};
      const StructureInstance y{"y", three_span_family(), random_interior(*three_span_family(), rng)};
      const auto p = geodesic(x, y);
      for (int i = 1; i <= 99; ++i) REQUIRE_NOTHROW(p.point_at(i / 100.0).graph());
    }
  }

  SUBCASE("different families without a contraction have no path") {
    const StructureInstance one{"one", single_span_family(), ThetaVector(fixture::kDeckA)};
    CHECK(kind_of([&] { geodesic(one, a); }) == ErrorKind::no_path);
  }

  SUBCASE("cross-family path lives in the larger family") {
    const auto b3 = fixture::b3();
    for (const auto& p : {geodesic(b3, a), geodesic(a, b3)}) {
      CHECK(p.family().name() == "three_span");
      CHECK(p.zero_indices().size() == 2);
    }
    const auto p = geodesic(b3, a);
    CHECK(p.point_at(0.0).theta == b3.theta);
    CHECK(p.point_at(0.5).theta[three_span_family()->coordinate("D3", Param::l)] == doctest::Approx(5.0));
  }
}

TEST_CASE("interpolating structure splits the distance in half") {
  const auto t = fixture::b2("t");
  const auto s = fixture::with(fixture::with(t, "D2", Param::t, 0.5), "D1", Param::rho, 3000.0);
  const auto star = interpolating_structure(s, t);
  const auto& f = *two_span_family();
  const double full = family_distance(f, s.theta, t.theta);
  CHECK(family_distance(f, s.theta, star.theta) + family_distance(f, star.theta, t.theta) ==
        doctest::Approx(full).epsilon(1e-12));
  CHECK(family_distance(f, s.theta, star.theta) == doctest::Approx(full / 2).epsilon(1e-12));

  // Three-span source, two-span target: S* sits on the contraction path.
  const auto b3 = fixture::b3("s3");
  const auto star3 = interpolating_structure(b3, t);
  const auto path = geodesic(t, b3);
  const auto& f3 = *three_span_family();
  const double legs = family_distance(f3, path.start(), star3.theta) + family_distance(f3, star3.theta, b3.theta);
  CHECK(legs == doctest::Approx(path.length()).epsilon(1e-12));
}

TEST_CASE("embedding two-span into three-span") {
  const auto e = embed(two_span_family(), three_span_family());
  CHECK(e.image_indices().size() == 18);
  const auto b2 = fixture::b2();
  CHECK(e.project(e.embed(b2.theta)) == b2.theta);
  // The embedded instance, with the contracted coordinates zeroed, is B2 itself.
  const auto map = contract(three_span_family(), two_span_family());
  const auto rep = map.representative(b2.theta, e.embed(b2.theta));
  CHECK(kind_isomorphic(instantiate(*three_span_family(), rep), b2.graph()));
  CHECK(map.apply(rep) == b2.theta);
}
