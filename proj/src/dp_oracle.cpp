#include "pdt/dp_oracle.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <ostream>
#include <set>

#include "pdt/error.hpp"

namespace pdt::oracle {

using component::Action;
using component::kActionCount;

namespace {

component::State as_state(const TabularState& t) { return {{t.n_success, t.n_fail}, t.days_left, 0.0}; }

std::vector<TabularState> successors(const TabularState& t) {
  if (t.days_left <= 0) return {};
  const int d = t.days_left - 1;
  return {{t.n_success, t.n_fail, 0},
          {t.n_success + 1, t.n_fail, d},
          {t.n_success, t.n_fail + 1, d},
          {0, 0, d}};
}

struct Outcome {
  double probability;
  double reward;
  TabularState next;
};

// Marginal one-step kernel for a non-terminal state.
std::vector<Outcome> kernel(const TabularState& t, Action a, const component::Config& c) {
  const int d = t.days_left - 1;
  switch (a) {
    case Action::Terminate:
      return {{1.0, c.reward_terminate, {t.n_success, t.n_fail, 0}}};
    case Action::Replace:
      return {{1.0, c.cost_replace, {0, 0, d}}};
    case Action::Test:
    case Action::Use: {
      const double p0 = component::success_probability(component::belief_psi({t.n_success, t.n_fail}, c), c);
      const bool use = a == Action::Use;
      return {{p0, use ? c.reward_use : c.cost_test, {t.n_success + 1, t.n_fail, d}},
              {1.0 - p0, use ? -c.loss_use : c.cost_test, {t.n_success, t.n_fail + 1, d}}};
    }
  }
  throw InvalidArgument("unknown component action");
}

}  // namespace

TabularState tabular(const component::State& s) { return {s.belief.n_success, s.belief.n_fail, s.days_left}; }

std::vector<TabularState> enumerate_states(int horizon) {
  if (horizon < 0) throw InvalidArgument("horizon must be non-negative");
  std::set<TabularState> seen{{0, 0, horizon}};
  std::deque<TabularState> frontier{{0, 0, horizon}};
  while (!frontier.empty()) {
    const TabularState t = frontier.front();
    frontier.pop_front();
    for (const auto& n : successors(t))
      if (seen.insert(n).second) frontier.push_back(n);
  }
  return {seen.begin(), seen.end()};
}

ValueTable::ValueTable(int horizon, bool constrained)
    : horizon_(horizon), constrained_(constrained), states_(enumerate_states(horizon)) {
  const auto n = static_cast<std::size_t>(horizon + 1);
  values_.assign(n * n * n, 0.0);
  actions_.assign(n * n * n, Action::Terminate);
  known_.assign(n * n * n, false);
}

std::size_t ValueTable::index(const TabularState& s) const {
  const int n = horizon_ + 1;
  if (s.n_success < 0 || s.n_fail < 0 || s.days_left < 0 || s.n_success >= n || s.n_fail >= n ||
      s.days_left >= n)
    throw InvalidArgument("state outside the table");
  return static_cast<std::size_t>((s.days_left * n + s.n_success) * n + s.n_fail);
}

bool ValueTable::contains(const TabularState& s) const {
  const int n = horizon_ + 1;
  if (s.n_success < 0 || s.n_fail < 0 || s.days_left < 0 || s.n_success >= n || s.n_fail >= n ||
      s.days_left >= n)
    return false;
  return known_[index(s)];
}

double ValueTable::value(const TabularState& s) const {
  if (!contains(s)) throw InvalidArgument("state not in value table");
  return values_[index(s)];
}

Action ValueTable::action(const TabularState& s) const {
  if (!contains(s)) throw InvalidArgument("state not in value table");
  return actions_[index(s)];
}

void ValueTable::set(const TabularState& s, double value, Action action) {
  const auto i = index(s);
  values_[i] = value;
  actions_[i] = action;
  known_[i] = true;
}

TabularPolicy ValueTable::policy() const {
  TabularPolicy p;
  for (const auto& s : states_)
    if (s.days_left > 0) p.emplace(s, action(s));
  return p;
}

ValueTable backward_induction(const component::Config& config, bool constrained) {
  component::Config c = config;
  c.constrained = constrained;
  ValueTable table(c.horizon, constrained);
  auto states = table.states();
  std::stable_sort(states.begin(), states.end(),
                   [](const TabularState& a, const TabularState& b) { return a.days_left < b.days_left; });
  for (const auto& s : states) {
    if (s.days_left == 0) {
      table.set(s, 0.0, Action::Terminate);
      continue;
    }
    const ActionMask mask = component::action_mask(as_state(s), c);
    double best = -std::numeric_limits<double>::infinity();
    Action best_action = Action::Terminate;
    for (std::size_t a = 0; a < kActionCount; ++a) {
      if (!mask[a]) continue;
      double q = 0.0;
      for (const auto& o : kernel(s, static_cast<Action>(a), c))
        q += o.probability * (o.reward + table.value(o.next));
      if (q > best) {
        best = q;
        best_action = static_cast<Action>(a);
      }
    }
    table.set(s, best, best_action);
  }
  return table;
}

double policy_value(const TabularPolicy& policy, const component::Config& config, const TabularState& start) {
  std::map<TabularState, double> memo;
  std::function<double(const TabularState&)> value = [&](const TabularState& s) -> double {
    if (s.days_left <= 0) return 0.0;
    if (auto it = memo.find(s); it != memo.end()) return it->second;
    auto p = policy.find(s);
    if (p == policy.end())
      throw PolicyUndefinedAtState("(" + std::to_string(s.n_success) + ", " + std::to_string(s.n_fail) + ", " +
                                   std::to_string(s.days_left) + ")");
    if (!component::action_mask(as_state(s), config)[static_cast<std::size_t>(p->second)])
      throw PolicyReturnedMaskedAction("tabular policy picks a masked action");
    double v = 0.0;
    for (const auto& o : kernel(s, p->second, config)) v += o.probability * (o.reward + value(o.next));
    memo.emplace(s, v);
    return v;
  };
  return value(start);
}

double policy_value(const TabularPolicy& policy, const component::Config& config) {
  return policy_value(policy, config, {0, 0, config.horizon});
}

Policy<component::State> as_policy(const ValueTable& table) {
  return [table](const component::State& s, const ActionMask&, Rng&) {
    return static_cast<std::size_t>(table.action(tabular(s)));
  };
}

void write_table_csv(std::ostream& out, const ValueTable& table) {
  out << "n_success,n_fail,days_left,value,action\n";
  for (const auto& s : table.states())
    out << s.n_success << ',' << s.n_fail << ',' << s.days_left << ',' << format_double(table.value(s)) << ','
        << component::kActionNames[static_cast<std::size_t>(table.action(s))] << '\n';
}

}  // namespace pdt::oracle
