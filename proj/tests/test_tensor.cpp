#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>
#include <vector>

#include "doctest.h"
#include "enspost/graph.hpp"
#include "enspost/ops.hpp"
#include "enspost/tensor.hpp"

using namespace enspost::nn;

TEST_CASE("shape index math is row-major NCHW") {
  Shape4 s{2, 3, 4, 5};
  CHECK(s.size() == 120);
  CHECK(s.index(0, 0, 0, 0) == 0);
  CHECK(s.index(0, 0, 0, 1) == 1);
  CHECK(s.index(0, 0, 1, 0) == 5);
  CHECK(s.index(0, 1, 0, 0) == 20);
  CHECK(s.index(1, 0, 0, 0) == 60);
  CHECK(s.index(1, 2, 3, 4) == 119);
}

TEST_CASE("from_data rejects size mismatch") {
  CHECK_THROWS_AS(Tensor<float>::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f}),
                  std::invalid_argument);
}

TEST_CASE("item() rejects non-scalar tensors") {
  auto t = Tensor<double>::zeros({1, 1, 2, 2});
  CHECK_THROWS_AS(t.item(), std::invalid_argument);
  CHECK(Tensor<double>::scalar(4.5).item() == 4.5);
}

TEST_CASE("grad storage is lazy and zeroable") {
  auto t = Tensor<float>::zeros({1, 2, 2, 2});
  CHECK(!t.has_grad());
  t.set_requires_grad(true);
  CHECK(t.has_grad());
  t.grad_data()[3] = 7.f;
  t.zero_grad();
  for (float g : t.grad()) CHECK(g == 0.f);
}

TEST_CASE("clone copies values but not storage") {
  auto t = Tensor<double>::full({1, 1, 1, 3}, 2.0);
  auto c = t.clone();
  c.data()[0] = 9.0;
  CHECK(t.data()[0] == 2.0);
  CHECK(c.data()[1] == 2.0);
}

TEST_CASE("tensors share storage through copies") {
  auto t = Tensor<double>::zeros({1, 1, 1, 2});
  Tensor<double> u = t;
  u.data()[0] = 5.0;
  CHECK(t.data()[0] == 5.0);
  CHECK(t.node() == u.node());
}

TEST_CASE("backward on sum of squares gives 2x") {
  // loss = sum(x^2) for x = [1,2,3] -> grad [2,4,6]
  Graph<double> g;
  auto x = Tensor<double>::from_data({1, 1, 1, 3}, {1, 2, 3}, true);
  auto loss = sum_all(&g, mul(&g, x, x));
  CHECK(loss.item() == 14.0);
  g.backward(loss);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(x.grad()[2] == 6.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph<double> g;
  auto x = Tensor<double>::zeros({1, 1, 1, 3}, true);
  auto y = mul(&g, x, x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("backward visits ops in reverse recording order exactly once") {
  Graph<double> g;
  auto x = Tensor<double>::from_data({1, 1, 1, 2}, {0.3, -0.7}, true);
  auto a = relu(&g, x);
  auto b = add(&g, a, x);
  auto loss = sum_all(&g, b);
  g.backward(loss);
  const auto& v = g.visited();
  REQUIRE(v.size() == 3);
  CHECK(std::string(v[0]) == "sum_all");
  CHECK(std::string(v[1]) == "add");
  CHECK(std::string(v[2]) == "relu");
}

TEST_CASE("leaf gradients accumulate across backward calls until zeroed") {
  auto x = Tensor<double>::from_data({1, 1, 1, 1}, {3.0}, true);
  {
    Graph<double> g;
    auto loss = mul(&g, x, x);
    g.backward(loss);
  }
  CHECK(x.grad()[0] == 6.0);
  {
    Graph<double> g;
    auto loss = mul(&g, x, x);
    g.backward(loss);
  }
  CHECK(x.grad()[0] == 12.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("gradients of parameters not reached by the loss stay zero") {
  Graph<double> g;
  auto used = Tensor<double>::from_data({1, 1, 1, 1}, {2.0}, true);
  auto unused = Tensor<double>::from_data({1, 1, 1, 1}, {5.0}, true);
  auto loss = mul(&g, used, used);
  g.backward(loss);
  CHECK(used.grad()[0] == 4.0);
  CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("intermediate grads are zeroed per backward, not accumulated") {
  Graph<double> g;
  auto x = Tensor<double>::from_data({1, 1, 1, 1}, {2.0}, true);
  auto y = mul(&g, x, x);
  auto loss = sum_all(&g, y);
  g.backward(loss);
  g.backward(loss);  // same graph replayed
  // y's grad was reset each time; x accumulates across the two calls.
  CHECK(y.grad()[0] == 1.0);
  CHECK(x.grad()[0] == 8.0);
}

TEST_CASE("ops run without a graph when inference only") {
  auto x = Tensor<double>::from_data({1, 1, 1, 2}, {1.0, -1.0});
  auto y = relu<double>(nullptr, x);
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 0.0);
  CHECK(!y.requires_grad());
}
