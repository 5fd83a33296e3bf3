#include "profpipe/container.hpp"
#include "profpipe/core.hpp"
#include "profpipe/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace profpipe;

TEST_CASE("label enums are bijections between id and name") {
  std::set<std::string_view> names;
  for (const auto s : kAllScenarios) {
    CHECK(scenario_from_id(index_of(s)) == s);
    CHECK(scenario_from_name(name_of(s)) == s);
    names.insert(name_of(s));
  }
  CHECK(names.size() == 6);
  for (const auto p : kAllProficiency) {
    CHECK(proficiency_from_id(index_of(p)) == p);
    CHECK(proficiency_from_name(name_of(p)) == p);
  }
  for (const auto v : kAllViews) {
    CHECK(view_from_id(index_of(v)) == v);
    CHECK(view_from_name(name_of(v)) == v);
  }
  CHECK(name_of(Scenario::RockClimbing) == "RockClimbing");
  CHECK(display_name(Scenario::RockClimbing) == "Rock Climbing");
  CHECK(name_of(View::Exo3) == "exo3");
  CHECK(index_of(Proficiency::Novice) < index_of(Proficiency::LateExpert));
  CHECK_THROWS_AS(scenario_from_id(6), ValidationError);
  CHECK_THROWS_AS(proficiency_from_id(-1), ValidationError);
  CHECK_THROWS_AS(view_from_name("exo5"), ValidationError);
}

TEST_CASE("exactly one ego view") {
  int ego = 0;
  for (const auto v : kAllViews) ego += v == View::Ego ? 1 : 0;
  CHECK(ego == 1);
  CHECK(kExoViews.size() == 4);
}

TEST_CASE("derived seeds are deterministic and separate streams") {
  CHECK(derive_seed(3, "head") == derive_seed(3, "head"));
  CHECK(derive_seed(3, "head") != derive_seed(4, "head"));
  CHECK(derive_seed(3, "head") != derive_seed(3, "tail"));
  CHECK(derive_seed(0, 1, 2) != derive_seed(0, 2, 1));
}

TEST_CASE("random helpers") {
  Engine e(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(e);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(uniform_index(e, 7) < 7);
  }
  auto perm = permutation(20, e);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);

  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = normal(e);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("container round trip is exact") {
  Container c;
  c.meta = {{"kind", "test"}, {"n", 3}};
  Eigen::MatrixXf a(2, 3);
  a << 1.5f, -2.0f, 3.25f, 0.0f, 1e-7f, -8.0f;
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(4, 1);
  c.arrays.push_back(make_array("a", a));
  c.arrays.push_back(make_array("b", b));
  const auto bytes = encode_container(c);
  // First 8 bytes are the ASCII decimal header length.
  for (int i = 0; i < 8; ++i) CHECK(std::isdigit(bytes[static_cast<std::size_t>(i)]));

  const Container d = decode_container(bytes);
  CHECK(d.meta == c.meta);
  CHECK(to_matrix<float>(d.at("a")) == a);
  CHECK(to_matrix<double>(d.at("b")) == b);
  CHECK(d.find("zzz") == nullptr);
}

TEST_CASE("corrupt containers raise CorruptContainerError") {
  Container c;
  c.arrays.push_back(make_array("a", Eigen::MatrixXf::Ones(8, 8)));
  auto bytes = encode_container(c);

  SUBCASE("truncated at half length") {
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(decode_container(bytes), CorruptContainerError);
  }
  SUBCASE("shorter than the prefix") {
    bytes.resize(5);
    CHECK_THROWS_AS(decode_container(bytes), CorruptContainerError);
  }
  SUBCASE("non-numeric prefix") {
    bytes[0] = 'x';
    CHECK_THROWS_AS(decode_container(bytes), CorruptContainerError);
  }
  SUBCASE("garbage header") {
    bytes[10] = '}';
    CHECK_THROWS_AS(decode_container(bytes), CorruptContainerError);
  }
}

TEST_CASE("missing files raise IoError") {
  CHECK_THROWS_AS(read_container("/nonexistent/profpipe/x.clip"), IoError);
}
