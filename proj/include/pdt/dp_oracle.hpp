#pragma once

// Exact backward induction for the component game.
//
// Runs on observable states only: the hidden reliability is integrated out
// with the current belief psi, so the next outcome is Y = 0 with probability
// psi * theta_bad + (1 - psi) * theta_good. This is the belief-MDP kernel
// the simulator realizes by sampling theta explicitly.

#include <compare>
#include <iosfwd>
#include <map>
#include <vector>

#include "pdt/belief_mdp.hpp"
#include "pdt/env_component.hpp"

namespace pdt::oracle {

struct TabularState {
  int n_success = 0;
  int n_fail = 0;
  int days_left = 0;

  auto operator<=>(const TabularState&) const = default;
};

TabularState tabular(const component::State& s);

// States reachable from (0, 0, horizon), sorted and deduplicated.
std::vector<TabularState> enumerate_states(int horizon);

using TabularPolicy = std::map<TabularState, component::Action>;

class ValueTable {
 public:
  ValueTable(int horizon, bool constrained);

  int horizon() const { return horizon_; }
  bool constrained() const { return constrained_; }
  bool contains(const TabularState& s) const;
  double value(const TabularState& s) const;
  component::Action action(const TabularState& s) const;
  double initial_value() const { return value({0, 0, horizon_}); }

  const std::vector<TabularState>& states() const { return states_; }
  TabularPolicy policy() const;

  void set(const TabularState& s, double value, component::Action action);

 private:
  std::size_t index(const TabularState& s) const;

  int horizon_;
  bool constrained_;
  std::vector<TabularState> states_;
  std::vector<double> values_;
  std::vector<component::Action> actions_;
  std::vector<bool> known_;
};

// The constrained flag overrides config.constrained.
ValueTable backward_induction(const component::Config& config, bool constrained);

// Exact expected undiscounted return from `start` under a deterministic
// policy. Throws PolicyUndefinedAtState if the policy misses a state it can
// reach, and PolicyReturnedMaskedAction if it picks a masked action.
double policy_value(const TabularPolicy& policy, const component::Config& config);
double policy_value(const TabularPolicy& policy, const component::Config& config, const TabularState& start);

// Simulator-facing view of a table's greedy actions.
Policy<component::State> as_policy(const ValueTable& table);

// Rows: n_success,n_fail,days_left,value,action
void write_table_csv(std::ostream& out, const ValueTable& table);

}  // namespace pdt::oracle
