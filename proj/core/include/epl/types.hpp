#pragma once

#include <Eigen/Dense>
#include <span>
#include <variant>

#include "epl/error.hpp"

namespace epl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ThetaVec = Eigen::VectorXd;

// Stacked per-player, per-state, per-action tensor, flat index j*X*A + x*A + a.
template <class Tag>
class StackedProfile {
 public:
  StackedProfile() = default;
  StackedProfile(int players, int states, int actions)
      : J_(players), X_(states), A_(actions), data_(Vec::Zero(static_cast<Eigen::Index>(players) * states * actions)) {}
  StackedProfile(int players, int states, int actions, Vec data)
      : J_(players), X_(states), A_(actions), data_(std::move(data)) {
    if (data_.size() != static_cast<Eigen::Index>(J_) * X_ * A_)
      throw DimensionError("profile data has " + std::to_string(data_.size()) + " entries, expected " +
                           std::to_string(J_ * X_ * A_));
  }

  int num_players() const { return J_; }
  int num_states() const { return X_; }
  int num_actions() const { return A_; }
  Eigen::Index size() const { return data_.size(); }

  Eigen::Index index(int j, int x, int a) const { return (static_cast<Eigen::Index>(j) * X_ + x) * A_ + a; }
  double& operator()(int j, int x, int a) { return data_[index(j, x, a)]; }
  double operator()(int j, int x, int a) const { return data_[index(j, x, a)]; }

  auto row(int j, int x) { return data_.segment(index(j, x, 0), A_); }
  auto row(int j, int x) const { return data_.segment(index(j, x, 0), A_); }
  std::span<const double> row_span(int j, int x) const { return {data_.data() + index(j, x, 0), static_cast<size_t>(A_)}; }
  std::span<double> row_span(int j, int x) { return {data_.data() + index(j, x, 0), static_cast<size_t>(A_)}; }

  const Vec& flat() const { return data_; }
  Vec& flat() { return data_; }

  bool same_shape(const StackedProfile& o) const { return J_ == o.J_ && X_ == o.X_ && A_ == o.A_; }

 private:
  int J_ = 0, X_ = 0, A_ = 0;
  Vec data_;
};

struct CcpTag {};
struct ValueTag {};

// P[j][x][a]
using CcpProfile = StackedProfile<CcpTag>;
// v[j][x][a]
using ValueProfile = StackedProfile<ValueTag>;

// throws DimensionError unless every row is strictly positive and sums to one within tol
void validate_ccp(const CcpProfile& P, double tol = 1e-12);
void validate_values(const ValueProfile& v);

CcpProfile uniform_ccp(int players, int states, int actions);

// gamma = (theta, Y) with Y = v for games or Y = P for the single-agent variant
struct CompoundParam {
  ThetaVec theta;
  std::variant<ValueProfile, CcpProfile> aux;

  const ValueProfile& v() const { return std::get<ValueProfile>(aux); }
  const CcpProfile& P() const { return std::get<CcpProfile>(aux); }
  bool is_value_form() const { return std::holds_alternative<ValueProfile>(aux); }
};

}  // namespace epl
