#include "doctest.h"

#include <sstream>

#include "bridgedss/errors.hpp"
#include "bridgedss/filters.hpp"

using namespace bdss;

namespace {

Dataset mixed() {
  Dataset d;
  d.schema.attributes = {{"w", AttributeKind::Nominal, {"rain", "snow"}},
                         {"a", AttributeKind::Numeric, {}},
                         {"c", AttributeKind::Numeric, {}}};
  d.schema.classNames = {"A", "B"};
  d.x.resize(3, 3);
  d.x << 0, 2, 7,  //
      1, 4, 7,     //
      1, 6, 7;
  d.y.resize(3);
  d.y << 0, 1, 1;
  return d;
}

}  // namespace

TEST_CASE("normal filter scales numeric columns and leaves nominal ones") {
  auto f = normalFilter(mixed());
  Eigen::MatrixXd expected(3, 3);
  expected << 0, 0, 0, 1, 0.5, 0, 1, 1, 0;
  CHECK(f.data.x == expected);
  CHECK(f.data.schema == mixed().schema);
  Eigen::VectorXd unseen(3);
  unseen << 0, 5, 9;
  auto row = f.filter.applyRow(unseen);
  CHECK(row(1) == 0.75);
  CHECK(row(2) == 0.0);
  // a column already spanning [0, 1] is unchanged
  CHECK(normalFilter(f.data).data.x == f.data.x);
}

TEST_CASE("discrete filter bins on equal widths with the last bin closed") {
  Dataset d;
  d.schema.attributes = {{"v", AttributeKind::Numeric, {}}};
  d.schema.classNames = {"A"};
  d.x.resize(4, 1);
  d.x << 0.0, 0.55, 1.0, 0.6;
  d.y = Eigen::VectorXi::Zero(4);
  auto f = discreteFilter(d);
  CHECK(f.data.x(0, 0) == 0);
  CHECK(f.data.x(1, 0) == 5);
  CHECK(f.data.x(2, 0) == 9);
  CHECK(f.data.x(3, 0) == 6);
  CHECK(f.data.schema.attributes[0].nominal());
  CHECK(f.data.schema.attributes[0].cardinality() == 10);
  CHECK(f.filter.edges(0).size() == 9);
  auto constant = discreteFilter(mixed());
  for (int i = 0; i < 3; ++i) CHECK(constant.data.x(i, 2) == 0);
  CHECK_THROWS_AS(discreteFilter(d, 1), PreconditionError);
}

TEST_CASE("filters are row-order independent") {
  auto d = mixed();
  std::vector<Eigen::Index> perm{2, 0, 1};
  auto a = normalFilter(d.subset(perm)).data;
  auto b = normalFilter(d).data.subset(perm);
  CHECK(a.x == b.x);
  auto c = discreteFilter(d.subset(perm)).data;
  auto e = discreteFilter(d).data.subset(perm);
  CHECK(c.x == e.x);
}

TEST_CASE("filter parameters survive JSON and reject foreign schemas") {
  auto f = discreteFilter(mixed()).filter;
  auto back = Filter::fromJson(nlohmann::json::parse(f.toJson().dump()));
  CHECK(back.apply(mixed()).x == f.apply(mixed()).x);
  CHECK(back.outputSchema() == f.outputSchema());
  auto normal = normalFilter(mixed()).filter;
  CHECK_THROWS_AS(normal.apply(discreteFilter(mixed()).data), SchemaError);
  CHECK_THROWS_AS(f.applyRow(Eigen::VectorXd::Zero(2)), SchemaError);
  CHECK((parseFilterKind("normal") == FilterKind::Normal));
  CHECK_THROWS_AS(parseFilterKind("zscore"), ValidationError);
}

TEST_CASE("ARFF round-trip preserves attributes and instances") {
  auto d = mixed();
  d.schema.classNames = {"unrestricted-0.0", "900 0.2"};
  std::stringstream ss;
  writeArff(ss, d, "bridge");
  const auto text = ss.str();
  CHECK(text.find("@attribute w {rain,snow}") != std::string::npos);
  CHECK(text.find("@attribute a numeric") != std::string::npos);
  CHECK(text.find("'900 0.2'") != std::string::npos);
  auto back = readArff(ss);
  CHECK(back.schema == d.schema);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);

  std::stringstream bad("@relation r\n@attribute a numeric\n@attribute class {x}\n@data\nfoo,x\n");
  CHECK_THROWS_AS(readArff(bad), ValidationError);
}
