#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace sdewms {

/// 0-based regime label.
using State = std::size_t;

/// Generator Q of a finite continuous-time Markov chain. Off-diagonal rates are
/// non-negative and every row sums to zero.
class GeneratorMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  /// `rates` is row-major, n_states × n_states.
  GeneratorMatrix(std::size_t n_states, std::vector<double> rates)
      : n_(n_states), rates_(std::move(rates)) {
    if (n_ == 0) throw ValidationError("generator: need at least one state");
    if (rates_.size() != n_ * n_) {
      throw ValidationError("generator: expected " + std::to_string(n_ * n_) + " entries, got " +
                            std::to_string(rates_.size()));
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double row_sum = 0.0;
      for (std::size_t k = 0; k < n_; ++k) {
        const double q = (*this)(i, k);
        if (!std::isfinite(q)) throw ValidationError("generator: non-finite rate");
        if (i != k && q < 0.0) {
          std::ostringstream os;
          os << "generator: negative off-diagonal rate q(" << i << "," << k << ") = " << q;
          throw ValidationError(os.str());
        }
        row_sum += q;
      }
      if (std::abs(row_sum) > kRowSumTolerance) {
        std::ostringstream os;
        os << "generator: row " << i << " sums to " << row_sum << ", not 0";
        throw ValidationError(os.str());
      }
    }
  }

  /// Nested-row convenience, e.g. {{-0.5, 0.5}, {0.5, -0.5}}.
  explicit GeneratorMatrix(const std::vector<std::vector<double>>& rows)
      : GeneratorMatrix(rows.size(), flatten(rows)) {}

  /// Single absorbing state.
  static GeneratorMatrix singleton() { return GeneratorMatrix(1, {0.0}); }

  std::size_t n_states() const noexcept { return n_; }
  double operator()(std::size_t from, std::size_t to) const { return rates_[from * n_ + to]; }

  /// Total exit rate −q_ii.
  double exit_rate(State i) const { return -(*this)(i, i); }

  /// max_i (−q_ii), the rate bounding switch counts.
  double max_exit_rate() const {
    double m = 0.0;
    for (State i = 0; i < n_; ++i) m = std::max(m, exit_rate(i));
    return m;
  }

 private:
  static std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * rows.size());
    for (const auto& row : rows) {
      if (row.size() != rows.size()) throw ValidationError("generator: matrix is not square");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
  }

  std::size_t n_;
  std::vector<double> rates_;
};

struct SwitchEvent {
  double time;
  State new_state;

  friend bool operator==(const SwitchEvent&, const SwitchEvent&) = default;
};

/// One realised càdlàg path of the chain on [0, T]. Immutable once built.
class ChainPath {
 public:
  ChainPath(State initial_state, std::vector<SwitchEvent> events, double horizon)
      : initial_(initial_state), events_(std::move(events)), horizon_(horizon) {
    if (!(horizon_ > 0.0)) throw ArgumentError("chain path: horizon must be positive");
    State prev = initial_;
    double prev_time = 0.0;
    for (const auto& e : events_) {
      if (!(e.time > prev_time) || e.time > horizon_) {
        throw ValidationError("chain path: event times must be strictly increasing within (0, T]");
      }
      if (e.new_state == prev) throw ValidationError("chain path: event does not change state");
      prev = e.new_state;
      prev_time = e.time;
    }
  }

  State initial_state() const noexcept { return initial_; }
  const std::vector<SwitchEvent>& events() const noexcept { return events_; }
  double horizon() const noexcept { return horizon_; }

  /// r(t), right-continuous: a switch at time t is already in effect at t.
  State state_at(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) throw ArgumentError("state_at: t outside [0, T]");
    const auto it = first_after(t);
    return it == events_.begin() ? initial_ : std::prev(it)->new_state;
  }

  /// Number of switches in (s, t].
  std::size_t count_switches(double s, double t) const {
    check_interval(s, t, "count_switches");
    return static_cast<std::size_t>(first_after(t) - first_after(s));
  }

  /// Earliest switch time in (s, t], if any.
  std::optional<double> first_switch_in(double s, double t) const {
    check_interval(s, t, "first_switch_in");
    const auto it = first_after(s);
    if (it == events_.end() || it->time > t) return std::nullopt;
    return it->time;
  }

 private:
  std::vector<SwitchEvent>::const_iterator first_after(double t) const {
    return std::upper_bound(events_.begin(), events_.end(), t,
                            [](double v, const SwitchEvent& e) { return v < e.time; });
  }

  void check_interval(double s, double t, const char* what) const {
    if (!(s < t)) throw ArgumentError(std::string(what) + ": need s < t");
    if (s < 0.0 || t > horizon_) throw ArgumentError(std::string(what) + ": interval outside [0, T]");
  }

  State initial_;
  std::vector<SwitchEvent> events_;
  double horizon_;
};

/// Exact event-driven simulation. In state i the holding time is Exp(−q_ii);
/// the next state is the first k ≠ i whose cumulative share
/// Σ_{k' ≤ k, k' ≠ i} q_ik' / (−q_ii) reaches a fresh uniform. States with
/// q_ii = 0 are absorbing.
template <RandomStream S>
ChainPath simulate_chain(const GeneratorMatrix& q, State i0, double horizon, S& stream) {
  if (!(horizon > 0.0)) throw ArgumentError("simulate_chain: horizon must be positive");
  if (i0 >= q.n_states()) throw ArgumentError("simulate_chain: initial state out of range");

  std::vector<SwitchEvent> events;
  State current = i0;
  double t = 0.0;
  for (;;) {
    const double rate = q.exit_rate(current);
    if (rate <= 0.0) break;
    t += -std::log1p(-static_cast<double>(stream.uniform())) / rate;
    if (t > horizon) break;

    const double u = stream.uniform();
    State next = current;
    double cumulative = 0.0;
    for (State k = 0; k < q.n_states(); ++k) {
      if (k == current) continue;
      next = k;
      cumulative += q(current, k) / rate;
      if (u <= cumulative && q(current, k) > 0.0) break;
    }
    // Rounding can leave the cumulative share just under 1; fall back to the
    // last reachable state.
    if (q(current, next) <= 0.0) {
      for (State k = q.n_states(); k-- > 0;) {
        if (k != current && q(current, k) > 0.0) {
          next = k;
          break;
        }
      }
    }
    events.push_back({t, next});
    current = next;
  }
  return ChainPath(i0, std::move(events), horizon);
}

}  // namespace sdewms
