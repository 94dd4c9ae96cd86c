#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "matcha/matrix.hpp"
#include "matcha/ops.hpp"

namespace matcha::bench {

using Inputs = std::vector<Matrix>;

struct Shape {
  std::size_t rows, cols;
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct BenchmarkTask {
  std::string id;
  std::string description;
  // Seeded, deterministic input builder (uniform [0,1) values).
  std::function<Inputs(std::uint64_t seed)> generate;
  // Results in a fixed order; output_shapes lists their shapes.
  std::function<std::vector<Matrix>(const Inputs&)> body;
  std::vector<Shape> output_shapes;
};

namespace detail {

// One independent stream per input so shapes can change without disturbing
// the other inputs.
inline Inputs uniform_inputs(std::uint64_t seed, const std::vector<Shape>& shapes) {
  Inputs in;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    in.push_back(random(shapes[k].rows, shapes[k].cols, seed * 0x9E3779B97F4A7C15ull + k + 1));
  }
  return in;
}

}  // namespace detail

// The four speed-comparison tasks. Task 4 is one forward and one backward
// step of a single-layer perceptron: A = X W, B = A + bias, C = X^T D.
inline std::vector<BenchmarkTask> define_tasks() {
  std::vector<BenchmarkTask> t;
  t.push_back({"task1", "Addition of two 1000x1000 matrices",
               [](std::uint64_t s) { return detail::uniform_inputs(s, {{1000, 1000}, {1000, 1000}}); },
               [](const Inputs& in) { return std::vector<Matrix>{add(in[0], in[1])}; },
               {{1000, 1000}}});
  t.push_back({"task2", "Multiplication of a 1000x100 matrix and a 100x10 matrix",
               [](std::uint64_t s) { return detail::uniform_inputs(s, {{1000, 100}, {100, 10}}); },
               [](const Inputs& in) { return std::vector<Matrix>{matmul(in[0], in[1])}; },
               {{1000, 10}}});
  t.push_back({"task3", "Multiplication of a 1000x100 matrix and a 100x1000 matrix",
               [](std::uint64_t s) { return detail::uniform_inputs(s, {{1000, 100}, {100, 1000}}); },
               [](const Inputs& in) { return std::vector<Matrix>{matmul(in[0], in[1])}; },
               {{1000, 1000}}});
  t.push_back({"task4",
               "A = (200x500)(500x200); B = A + broadcast 200x1; C = transpose(200x500)(200x50)",
               [](std::uint64_t s) { return detail::uniform_inputs(s, {{200, 500}, {500, 200}, {200, 1}, {200, 50}}); },
               [](const Inputs& in) {
                 const Matrix a = matmul(in[0], in[1]);
                 const Matrix b = add(a, in[2]);
                 const Matrix c = matmul(in[0].t(), in[3]);
                 return std::vector<Matrix>{b, c};
               },
               {{200, 200}, {500, 50}}});
  return t;
}

}  // namespace matcha::bench
