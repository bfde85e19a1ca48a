#include "doctest.h"

#include <random>

#include "bridgedss/classifier.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/filters.hpp"

using namespace bdss;

namespace {

Dataset mixed(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> w(0, 2);
  Dataset d;
  d.schema.attributes = {{"weather", AttributeKind::Nominal, {"dry", "wet", "snow"}},
                         {"severity", AttributeKind::Numeric, {}},
                         {"demand", AttributeKind::Numeric, {}}};
  d.schema.classNames = {"a", "b", "c"};
  d.x.resize(n, 3);
  d.y.resize(n);
  for (int r = 0; r < n; ++r) {
    d.x(r, 0) = w(rng);
    d.x(r, 1) = u(rng);
    d.x(r, 2) = u(rng);
    const double s = d.x(r, 1) + d.x(r, 2) * 0.5 + 0.2 * d.x(r, 0);
    d.y(r) = s < 0.6 ? 0 : (s < 1.1 ? 1 : 2);
  }
  return d;
}

}  // namespace

TEST_CASE("every classifier predicts identically after a JSON round trip") {
  const Dataset raw = mixed(1, 150);
  for (const auto& id : classifierIds()) {
    CAPTURE(id);
    const auto f = id == "hnb" ? discreteFilter(raw) : normalFilter(raw);
    auto model = makeClassifier(id, id == "ffnn" ? nlohmann::json{{"epochs", 30}} : nlohmann::json::object());
    model->fit(f.data);
    const auto doc = nlohmann::json::parse(model->toJson().dump());
    auto back = loadClassifier(doc);
    CHECK(back->algorithm() == id);
    CHECK(back->fitted());
    CHECK(back->schema() == model->schema());
    CHECK(back->params() == model->params());
    CHECK(back->predict(f.data) == model->predict(f.data));
  }
}

TEST_CASE("filters replay identically after a JSON round trip") {
  const Dataset raw = mixed(2, 60);
  for (auto kind : {FilterKind::Normal, FilterKind::Discrete}) {
    const auto f = applyFilter(raw, kind);
    const Filter back = Filter::fromJson(nlohmann::json::parse(f.filter.toJson().dump()));
    CHECK(back.outputSchema() == f.filter.outputSchema());
    CHECK(back.apply(raw).x == f.data.x);
  }
}

TEST_CASE("loading rejects foreign or unfitted documents") {
  CHECK_THROWS(loadClassifier(nlohmann::json{{"format", "something-else"}}));
  auto model = makeClassifier("cart");
  CHECK_THROWS_AS(model->toJson(), PreconditionError);
  CHECK_THROWS_AS(makeClassifier("c5"), ValidationError);
}
