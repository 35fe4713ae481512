#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stabrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Multi-index of a monomial: exponents[j] is the power of x_j.
using Exponents = std::vector<int>;

/// A single monomial x^e with closed-form first and second derivatives.
class Monomial {
 public:
  explicit Monomial(Exponents exponents);

  int state_dim() const { return static_cast<int>(exponents_.size()); }
  int degree() const { return degree_; }
  const Exponents& exponents() const { return exponents_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  // Filled as a symmetric matrix: only the upper triangle is computed and
  // then mirrored, so H == H^T holds bit for bit.
  Matrix hessian(const Vector& x) const;

  std::string to_string() const;

 private:
  Exponents exponents_;
  int degree_ = 0;
};

// Result of evaluating a feature map. Derivative members are present only
// when the requested order covers them.
struct FeatureEval {
  Vector value;                                // phi(x), length N_c
  std::optional<Matrix> jacobian;              // N_c x n, row i = grad phi_i
  std::optional<std::vector<Matrix>> hessians;  // N_c matrices, n x n
};

enum class FeatureKind { kMonomials, kList };

/// Ordered list of monomial features phi_1..phi_Nc over an n-dimensional state.
///
/// `monomials(n, d)` enumerates every monomial with total degree 1..d
/// (degree 0 too when `constant` is set) in graded lexicographic order:
/// ascending total degree, and within one degree the exponent of x_1 is
/// largest first. `from_terms` keeps the caller's order verbatim.
class FeatureMap {
 public:
  static FeatureMap monomials(int state_dim, int degree, bool constant = false);
  static FeatureMap from_terms(int state_dim, std::vector<Exponents> terms);

  FeatureKind kind() const { return kind_; }
  int state_dim() const { return state_dim_; }
  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<Monomial>& terms() const { return terms_; }

  // Position of a monomial in the map, if present.
  std::optional<int> index_of(const Exponents& exponents) const;

  // order must be 0, 1 or 2; x must have length state_dim().
  FeatureEval eval(const Vector& x, int order) const;
  Vector values(const Vector& x) const { return eval(x, 0).value; }

  std::string describe() const;

 private:
  FeatureMap(FeatureKind kind, int state_dim, std::vector<Monomial> terms);

  FeatureKind kind_;
  int state_dim_;
  std::vector<Monomial> terms_;
};

/// Sparse polynomial sum_j c_j x^{e_j}. Used for closed-form value functions
/// and for the approximation remainder V - theta*^T phi.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int state_dim, std::vector<std::pair<Exponents, double>> terms);

  int state_dim() const { return state_dim_; }
  const std::vector<std::pair<Monomial, double>>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  // Coefficients of `features` (0 where absent) and the remainder made of
  // every term the map cannot represent.
  std::pair<Vector, Polynomial> project(const FeatureMap& features) const;

 private:
  int state_dim_ = 0;
  std::vector<std::pair<Monomial, double>> terms_;
};

}  // namespace stabrl
