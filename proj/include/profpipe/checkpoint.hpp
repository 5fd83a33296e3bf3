#pragma once

#include "profpipe/container.hpp"
#include "profpipe/nn.hpp"

#include <string>

namespace profpipe {

template <typename Scalar>
void store_parameters(const ParameterRefs<Scalar>& params, Container& out) {
  for (const auto* p : params) out.arrays.push_back(make_array(p->name, p->value));
}

/// Overwrites each parameter with the same-named array; shapes must match.
template <typename Scalar>
void restore_parameters(const Container& in, const ParameterRefs<Scalar>& params) {
  for (auto* p : params) {
    const auto& a = in.at(p->name);
    Matrix<Scalar> m = to_matrix<Scalar>(a);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw CorruptContainerError("parameter '" + p->name + "' has shape " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + ", expected " + std::to_string(p->value.rows()) +
                                  "x" + std::to_string(p->value.cols()));
    }
    p->value = std::move(m);
    p->zero_grad();
  }
}

}  // namespace profpipe
