#include "oracles.hpp"

#include "hybridsig/nn/serialize.hpp"

#include <doctest.h>

using namespace hybridsig;
using namespace hybridsig::nn;

namespace {

CnnModel<float> small_model() {
  CnnModel<float> m({16, 16, 3}, reference_architecture());
  m.initialize(9);
  for (auto* p : m.parameters())
    for (Index i = 0; i < p->size(); ++i) (*p)[i] += 0.001f * static_cast<float>(i % 7);
  return m;
}

Tensor<float> sample_input(const Shape& s) {
  Tensor<float> x(s);
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>((i * 37) % 101) / 100.0f;
  return x;
}

}  // namespace

TEST_CASE("save/load round trip reproduces the forward pass bitwise") {
  const auto m = small_model();
  const auto loaded = load_model(save_model(m));
  CHECK_FALSE(loaded.optimizer.has_value());
  CHECK(loaded.model.specs() == m.specs());
  const auto x = sample_input(m.input_shape());
  CHECK(loaded.model.forward(x).values() == m.forward(x).values());
  CHECK(save_model(loaded.model) == save_model(m));
}

TEST_CASE("optimizer state survives the round trip") {
  auto m = small_model();
  AdamState<float> opt(m.parameters(), 3e-4);
  auto grads = m.zero_gradients();
  for (auto& g : grads) g.values().setConstant(0.5f);
  adam_step(m.parameters(), grads, opt);
  adam_step(m.parameters(), grads, opt);

  const auto bytes = save_model(m, &opt);
  const auto loaded = load_model(bytes);
  REQUIRE(loaded.optimizer.has_value());
  CHECK(loaded.optimizer->step == 2);
  CHECK(loaded.optimizer->lr == 3e-4);
  CHECK(loaded.optimizer->epsilon == 1e-8);
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    CHECK(loaded.optimizer->m[i].values() == opt.m[i].values());
    CHECK(loaded.optimizer->v[i].values() == opt.v[i].values());
  }
  CHECK(save_model(loaded.model, &*loaded.optimizer) == bytes);
}

TEST_CASE("file size follows the layer table") {
  const auto m = init_model(3, 1);
  std::size_t expected = 16;
  for (const auto& l : m.layers()) {
    // kind byte, rank, input dims, units
    expected += 1 + 4 + 4 * l.input_shape.size() + 4;
    expected += 4 * static_cast<std::size_t>(l.parameter_count());
    CHECK(layer_descriptor_bytes(l) == 1 + 4 + 4 * l.input_shape.size() + 4);
  }
  const auto bytes = save_model(m);
  CHECK(bytes.size() == expected);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "HSIG");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 14);

  AdamState<float> opt(init_model(3, 1).parameters(), 1e-3);
  auto mm = init_model(3, 1);
  CHECK(save_model(mm, &opt).size() == expected + 8 + 4 * 8 + 2 * 4 * static_cast<std::size_t>(m.parameter_count()));
}

TEST_CASE("corrupted files are rejected") {
  const auto bytes = save_model(small_model());
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_model(bad), FormatError);

  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(load_model(bad), FormatError);

  bad = bytes;
  bad.resize(bytes.size() - 3);
  CHECK_THROWS_AS(load_model(bad), FormatError);
  CHECK_THROWS_AS(load_model(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)), FormatError);

  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(load_model(bad), FormatError);

  bad = bytes;
  bad[16] = 42;  // first layer kind
  CHECK_THROWS_AS(load_model(bad), FormatError);
}
