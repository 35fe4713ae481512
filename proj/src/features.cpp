#include "stabrl/features.hpp"

#include <numeric>
#include <sstream>

#include "stabrl/errors.hpp"

namespace stabrl {
namespace {

double ipow(double base, int exponent) {
  double r = 1.0;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

void check_dim(const Vector& x, int n, const char* who) {
  if (x.size() != n) {
    std::ostringstream os;
    os << who << ": state has length " << x.size() << ", expected " << n;
    throw InputError(os.str());
  }
}

// All exponent vectors of length n and total degree d, x_1's power descending.
void enumerate_degree(int n, int d, Exponents& current, int pos,
                      std::vector<Exponents>& out) {
  if (pos == n - 1) {
    current[pos] = d;
    out.push_back(current);
    return;
  }
  for (int e = d; e >= 0; --e) {
    current[pos] = e;
    enumerate_degree(n, d - e, current, pos + 1, out);
  }
}

}  // namespace

Monomial::Monomial(Exponents exponents) : exponents_(std::move(exponents)) {
  if (exponents_.empty()) throw InputError("monomial needs at least one variable");
  for (int e : exponents_) {
    if (e < 0) throw InputError("monomial exponents must be non-negative");
  }
  degree_ = std::accumulate(exponents_.begin(), exponents_.end(), 0);
}

double Monomial::value(const Vector& x) const {
  double v = 1.0;
  for (int j = 0; j < state_dim(); ++j) v *= ipow(x[j], exponents_[j]);
  return v;
}

Vector Monomial::gradient(const Vector& x) const {
  const int n = state_dim();
  Vector g = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (exponents_[j] == 0) continue;
    double v = exponents_[j] * ipow(x[j], exponents_[j] - 1);
    for (int k = 0; k < n; ++k) {
      if (k != j) v *= ipow(x[k], exponents_[k]);
    }
    g[j] = v;
  }
  return g;
}

Matrix Monomial::hessian(const Vector& x) const {
  const int n = state_dim();
  Matrix h = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = j; k < n; ++k) {
      double v;
      if (j == k) {
        const int e = exponents_[j];
        if (e < 2) continue;
        v = e * (e - 1) * ipow(x[j], e - 2);
      } else {
        if (exponents_[j] == 0 || exponents_[k] == 0) continue;
        v = exponents_[j] * ipow(x[j], exponents_[j] - 1) * exponents_[k] *
            ipow(x[k], exponents_[k] - 1);
      }
      for (int l = 0; l < n; ++l) {
        if (l != j && l != k) v *= ipow(x[l], exponents_[l]);
      }
      h(j, k) = v;
      h(k, j) = v;
    }
  }
  return h;
}

std::string Monomial::to_string() const {
  if (degree_ == 0) return "1";
  std::ostringstream os;
  bool first = true;
  for (int j = 0; j < state_dim(); ++j) {
    if (exponents_[j] == 0) continue;
    if (!first) os << "*";
    os << "x" << (j + 1);
    if (exponents_[j] > 1) os << "^" << exponents_[j];
    first = false;
  }
  return os.str();
}

FeatureMap::FeatureMap(FeatureKind kind, int state_dim, std::vector<Monomial> terms)
    : kind_(kind), state_dim_(state_dim), terms_(std::move(terms)) {}

FeatureMap FeatureMap::monomials(int state_dim, int degree, bool constant) {
  if (state_dim < 1) throw InputError("feature map: state dimension must be >= 1");
  if (degree < 1) throw InputError("feature map: monomial degree must be >= 1");
  std::vector<Monomial> terms;
  Exponents scratch(state_dim, 0);
  for (int d = constant ? 0 : 1; d <= degree; ++d) {
    std::vector<Exponents> level;
    enumerate_degree(state_dim, d, scratch, 0, level);
    for (auto& e : level) terms.emplace_back(std::move(e));
  }
  return FeatureMap(FeatureKind::kMonomials, state_dim, std::move(terms));
}

FeatureMap FeatureMap::from_terms(int state_dim, std::vector<Exponents> exponent_list) {
  if (state_dim < 1) throw InputError("feature map: state dimension must be >= 1");
  if (exponent_list.empty()) throw InputError("feature map: needs at least one feature");
  std::vector<Monomial> terms;
  terms.reserve(exponent_list.size());
  for (auto& e : exponent_list) {
    if (static_cast<int>(e.size()) != state_dim) {
      throw InputError("feature map: exponent vector length does not match state dimension");
    }
    for (const auto& existing : terms) {
      if (existing.exponents() == e) throw InputError("feature map: duplicate feature");
    }
    terms.emplace_back(std::move(e));
  }
  return FeatureMap(FeatureKind::kList, state_dim, std::move(terms));
}

std::optional<int> FeatureMap::index_of(const Exponents& exponents) const {
  for (int i = 0; i < size(); ++i) {
    if (terms_[i].exponents() == exponents) return i;
  }
  return std::nullopt;
}

FeatureEval FeatureMap::eval(const Vector& x, int order) const {
  if (order < 0 || order > 2) throw InputError("feature map: order must be 0, 1 or 2");
  check_dim(x, state_dim_, "feature map");
  FeatureEval out;
  out.value.resize(size());
  for (int i = 0; i < size(); ++i) out.value[i] = terms_[i].value(x);
  if (order >= 1) {
    Matrix jac(size(), state_dim_);
    for (int i = 0; i < size(); ++i) jac.row(i) = terms_[i].gradient(x).transpose();
    out.jacobian = std::move(jac);
  }
  if (order == 2) {
    std::vector<Matrix> hs;
    hs.reserve(size());
    for (const auto& t : terms_) hs.push_back(t.hessian(x));
    out.hessians = std::move(hs);
  }
  return out;
}

std::string FeatureMap::describe() const {
  std::ostringstream os;
  os << "{";
  for (int i = 0; i < size(); ++i) {
    if (i) os << ", ";
    os << terms_[i].to_string();
  }
  os << "}";
  return os.str();
}

Polynomial::Polynomial(int state_dim, std::vector<std::pair<Exponents, double>> terms)
    : state_dim_(state_dim) {
  for (auto& [e, c] : terms) {
    if (static_cast<int>(e.size()) != state_dim) {
      throw InputError("polynomial: exponent vector length does not match state dimension");
    }
    if (c == 0.0) continue;
    terms_.emplace_back(Monomial(std::move(e)), c);
  }
}

double Polynomial::value(const Vector& x) const {
  check_dim(x, state_dim_, "polynomial");
  double v = 0.0;
  for (const auto& [m, c] : terms_) v += c * m.value(x);
  return v;
}

Vector Polynomial::gradient(const Vector& x) const {
  check_dim(x, state_dim_, "polynomial");
  Vector g = Vector::Zero(state_dim_);
  for (const auto& [m, c] : terms_) g += c * m.gradient(x);
  return g;
}

Matrix Polynomial::hessian(const Vector& x) const {
  check_dim(x, state_dim_, "polynomial");
  Matrix h = Matrix::Zero(state_dim_, state_dim_);
  for (const auto& [m, c] : terms_) h += c * m.hessian(x);
  return h;
}

std::pair<Vector, Polynomial> Polynomial::project(const FeatureMap& features) const {
  if (features.state_dim() != state_dim_) {
    throw InputError("polynomial: feature map state dimension mismatch");
  }
  Vector coeffs = Vector::Zero(features.size());
  std::vector<std::pair<Exponents, double>> rest;
  for (const auto& [m, c] : terms_) {
    if (auto i = features.index_of(m.exponents())) {
      coeffs[*i] += c;
    } else {
      rest.emplace_back(m.exponents(), c);
    }
  }
  return {coeffs, Polynomial(state_dim_, std::move(rest))};
}

}  // namespace stabrl
