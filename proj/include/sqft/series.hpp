#pragma once

// Truncated power series arithmetic. Used for the Frobenius recursion at the
// horizon and for local Taylor expansions of the effective potential.

#include <sqft/errors.hpp>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <vector>

namespace sqft::series {

template <class T>
using Series = std::vector<T>;

template <class T>
Series<T> mul(const Series<T>& a, const Series<T>& b, std::size_t n) {
  Series<T> c(n, T{});
  for (std::size_t i = 0; i < std::min(n, a.size()); ++i)
    for (std::size_t j = 0; j < std::min(n - i, b.size()); ++j)
      c[i + j] += a[i] * b[j];
  return c;
}

template <class T>
Series<T> reciprocal(const Series<T>& a, std::size_t n) {
  if (a.empty() || a[0] == T{})
    throw DomainError("series::reciprocal: zero constant term");
  Series<T> c(n, T{});
  c[0] = T{1} / a[0];
  for (std::size_t k = 1; k < n; ++k) {
    T acc{};
    for (std::size_t j = 1; j <= std::min(k, a.size() - 1); ++j)
      acc += a[j] * c[k - j];
    c[k] = -acc / a[0];
  }
  return c;
}

/// Square root with the branch fixed by the supplied value of sqrt(a[0]).
template <class T>
Series<T> sqrt(const Series<T>& a, T root0, std::size_t n) {
  Series<T> c(n, T{});
  c[0] = root0;
  for (std::size_t k = 1; k < n; ++k) {
    T acc = k < a.size() ? a[k] : T{};
    for (std::size_t j = 1; j < k; ++j)
      acc -= c[j] * c[k - j];
    c[k] = acc / (T{2} * c[0]);
  }
  return c;
}

template <class T>
Series<T> derivative(const Series<T>& a) {
  if (a.size() <= 1)
    return Series<T>{};
  Series<T> d(a.size() - 1);
  for (std::size_t k = 1; k < a.size(); ++k)
    d[k - 1] = a[k] * static_cast<double>(k);
  return d;
}

template <class T>
T evaluate(const Series<T>& a, T x) {
  T acc{};
  for (std::size_t k = a.size(); k-- > 0;)
    acc = acc * x + a[k];
  return acc;
}

} // namespace sqft::series
