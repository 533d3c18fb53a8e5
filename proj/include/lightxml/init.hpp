#pragma once

#include <random>

#include "lightxml/tensor.hpp"

namespace lightxml {

template <typename T>
Tensor<T> random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(values));
}

}  // namespace lightxml
