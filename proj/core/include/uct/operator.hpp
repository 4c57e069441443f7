#pragma once

#include <concepts>

namespace uct {

/// A linear map between two discretized spaces whose adjoint is taken with
/// respect to the cell-measure weighted inner products.
template <class Op>
concept LinearOperator = requires(const Op& op, const typename Op::domain_type& x,
                                  const typename Op::range_type& y) {
  { op.apply(x) } -> std::same_as<typename Op::range_type>;
  { op.adjoint(y) } -> std::same_as<typename Op::domain_type>;
};

/// A (possibly non-linear) differentiable map exposing [dT(f)]^* (dg).
template <class Op>
concept DifferentiableOperator = requires(const Op& op, const typename Op::domain_type& f,
                                          const typename Op::range_type& dg) {
  { op.apply(f) } -> std::same_as<typename Op::range_type>;
  { op.derivative_adjoint(f, dg) } -> std::same_as<typename Op::domain_type>;
};

}  // namespace uct
