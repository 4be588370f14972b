#include "nnpda/controller.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace nnpda {

const char* to_string(WeightOrder o) {
  switch (o) {
    case WeightOrder::second: return "second";
    case WeightOrder::third: return "third";
    case WeightOrder::full_order: return "full_order";
  }
  return "?";
}

const char* to_string(ActionActivation a) {
  return a == ActionActivation::linear ? "linear" : "bipolar";
}

WeightOrder parse_weight_order(std::string_view s) {
  if (s == "second") return WeightOrder::second;
  if (s == "third") return WeightOrder::third;
  if (s == "full_order" || s == "full") return WeightOrder::full_order;
  throw std::invalid_argument("unknown weight order '" + std::string(s) + "'");
}

ActionActivation parse_action_activation(std::string_view s) {
  if (s == "bipolar") return ActionActivation::bipolar;
  if (s == "linear") return ActionActivation::linear;
  throw std::invalid_argument("unknown action activation '" + std::string(s) + "'");
}

const char* to_string(ClassifyRule r) {
  return r == ClassifyRule::h_measure ? "h_measure" : "state_and_stack";
}

ClassifyRule parse_classify_rule(std::string_view s) {
  if (s == "h_measure" || s == "h") return ClassifyRule::h_measure;
  if (s == "state_and_stack") return ClassifyRule::state_and_stack;
  throw std::invalid_argument("unknown classification rule '" + std::string(s) + "'");
}

WeightSet::WeightSet(WeightOrder order, NetworkShape shape, ActionActivation action_activation)
    : order_(order), shape_(shape), action_activation_(action_activation) {
  shape_.validate();
  if (order_ != WeightOrder::full_order && action_activation_ == ActionActivation::linear)
    throw std::invalid_argument("linear action output is only defined for full order");
  params_.assign(theta_a_offset() + (has_theta_a() ? 1 : 0), 0.0);
  initial_state_.assign(shape_.n_state, 0.0);
  initial_state_[0] = 1.0;
}

std::size_t WeightSet::context_size() const {
  return order_ == WeightOrder::second ? shape_.n_read + shape_.n_input
                                       : shape_.n_read * shape_.n_input;
}

std::size_t WeightSet::action_rows() const {
  return order_ == WeightOrder::full_order ? (std::size_t{1} << shape_.n_state)
                                           : shape_.n_state;
}

void WeightSet::set_theta_a(double v) {
  if (!has_theta_a()) throw std::logic_error("linear action output has no bias");
  params_[theta_a_offset()] = v;
}

void WeightSet::set_initial_state(std::vector<double> s) {
  if (s.size() != shape_.n_state) throw std::invalid_argument("initial state has wrong size");
  for (double x : s)
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("initial state outside [0, 1]");
  initial_state_ = std::move(s);
}

void WeightSet::truncate_action_weights() {
  if (order_ != WeightOrder::full_order || action_activation_ != ActionActivation::linear) return;
  for (double& x : w_action()) x = std::clamp(x, -1.0, 1.0);
}

void WeightSet::check_finite() const {
  for (double x : params_)
    if (!std::isfinite(x)) throw std::runtime_error("non-finite weight");
}

WeightSet random_weights(WeightOrder order, NetworkShape shape, ActionActivation act,
                         std::uint64_t seed, double range) {
  WeightSet w(order, shape, act);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (double& x : w.params()) x = dist(rng);
  w.truncate_action_weights();
  return w;
}

ExtendedState extended_state(std::span<const double> s) {
  for (double x : s)
    if (!(x >= -1e-9 && x <= 1.0 + 1e-9))
      throw std::invalid_argument("state component outside [0, 1]");
  const std::size_t n = s.size();
  ExtendedState e;
  e.p.assign(std::size_t{1} << n, 1.0);
  for (std::size_t corner = 0; corner < e.p.size(); ++corner)
    for (std::size_t m = 0; m < n; ++m)
      e.p[corner] *= ExtendedState::bit(corner, m) ? s[m] : 1.0 - s[m];
  return e;
}

std::vector<double> extended_state_jacobian(std::span<const double> s) {
  const std::size_t n = s.size();
  const std::size_t corners = std::size_t{1} << n;
  std::vector<double> jac(corners * n, 0.0);
  for (std::size_t corner = 0; corner < corners; ++corner) {
    for (std::size_t m = 0; m < n; ++m) {
      double prod = ExtendedState::bit(corner, m) ? 1.0 : -1.0;
      for (std::size_t q = 0; q < n; ++q) {
        if (q == m) continue;
        prod *= ExtendedState::bit(corner, q) ? s[q] : 1.0 - s[q];
      }
      jac[corner * n + m] = prod;
    }
  }
  return jac;
}

std::vector<double> context_vector(const WeightSet& w, std::span<const double> reading,
                                   std::span<const double> input) {
  const auto& sh = w.shape();
  if (reading.size() != sh.n_read || input.size() != sh.n_input)
    throw std::invalid_argument("reading/input dimension mismatch");
  std::vector<double> x;
  x.reserve(w.context_size());
  if (w.order() == WeightOrder::second) {
    x.insert(x.end(), reading.begin(), reading.end());
    x.insert(x.end(), input.begin(), input.end());
  } else {
    for (std::size_t k = 0; k < sh.n_read; ++k)
      for (std::size_t l = 0; l < sh.n_input; ++l) x.push_back(reading[k] * input[l]);
  }
  return x;
}

namespace {

void check_state(const WeightSet& w, std::span<const double> s) {
  if (s.size() != w.shape().n_state) throw std::invalid_argument("state dimension mismatch");
}

std::vector<double> action_basis(const WeightSet& w, std::span<const double> s) {
  if (w.order() == WeightOrder::full_order) return extended_state(s).p;
  return {s.begin(), s.end()};
}

double action_output(const WeightSet& w, double net) {
  return w.action_activation() == ActionActivation::linear ? net : 2.0 * sigmoid(net) - 1.0;
}

}  // namespace

StepResult step(const WeightSet& w, std::span<const double> s, std::span<const double> reading,
                std::span<const double> input) {
  check_state(w, s);
  const auto x = context_vector(w, reading, input);
  const std::size_t ns = w.shape().n_state, nc = x.size();
  StepResult out;
  out.next_s.resize(ns);
  auto theta = w.theta_s();
  for (std::size_t i = 0; i < ns; ++i) {
    double net = theta[i];
    for (std::size_t j = 0; j < ns; ++j) {
      if (s[j] == 0.0) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < nc; ++c) acc += w.ws(i, j, c) * x[c];
      net += s[j] * acc;
    }
    out.next_s[i] = sigmoid(net);
  }
  const auto z = action_basis(w, s);
  double net_a = w.theta_a();
  for (std::size_t r = 0; r < z.size(); ++r) {
    if (z[r] == 0.0) continue;
    double acc = 0.0;
    for (std::size_t c = 0; c < nc; ++c) acc += w.wa(r, c) * x[c];
    net_a += z[r] * acc;
  }
  out.next_a = action_output(w, net_a);
  return out;
}

StepJacobian step_with_jacobian(const WeightSet& w, std::span<const double> s,
                                std::span<const double> reading,
                                std::span<const double> input) {
  check_state(w, s);
  const auto& sh = w.shape();
  const std::size_t ns = sh.n_state, nr = sh.n_read, ni = sh.n_input;
  StepJacobian jac;
  jac.context = context_vector(w, reading, input);
  const auto& x = jac.context;
  const std::size_t nc = x.size();
  const bool second = w.order() == WeightOrder::second;

  // d X_c / d R_k is sparse: second order X_k = R_k; otherwise X_{k,l} = R_k I_l.
  auto sum_dx_dr = [&](auto&& weight_at, std::size_t k) {
    if (second) return weight_at(k);
    double acc = 0.0;
    for (std::size_t l = 0; l < ni; ++l)
      if (input[l] != 0.0) acc += weight_at(k * ni + l) * input[l];
    return acc;
  };

  jac.next_s.resize(ns);
  jac.g_prime.resize(ns);
  jac.ds_ds.assign(ns * ns, 0.0);
  jac.ds_dr.assign(ns * nr, 0.0);
  auto theta = w.theta_s();
  for (std::size_t i = 0; i < ns; ++i) {
    double net = theta[i];
    for (std::size_t j = 0; j < ns; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < nc; ++c) acc += w.ws(i, j, c) * x[c];
      jac.ds_ds[i * ns + j] = acc;
      net += s[j] * acc;
      for (std::size_t k = 0; k < nr; ++k)
        jac.ds_dr[i * nr + k] +=
            s[j] * sum_dx_dr([&](std::size_t c) { return w.ws(i, j, c); }, k);
    }
    jac.next_s[i] = sigmoid(net);
    jac.g_prime[i] = jac.next_s[i] * (1.0 - jac.next_s[i]);
  }

  jac.action_basis = action_basis(w, s);
  const auto& z = jac.action_basis;
  std::vector<double> u(z.size(), 0.0);
  double net_a = w.theta_a();
  jac.da_dr.assign(nr, 0.0);
  for (std::size_t r = 0; r < z.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < nc; ++c) acc += w.wa(r, c) * x[c];
    u[r] = acc;
    net_a += z[r] * acc;
    if (z[r] == 0.0) continue;
    for (std::size_t k = 0; k < nr; ++k)
      jac.da_dr[k] += z[r] * sum_dx_dr([&](std::size_t c) { return w.wa(r, c); }, k);
  }
  jac.da_ds.assign(ns, 0.0);
  if (w.order() == WeightOrder::full_order) {
    const auto dp = extended_state_jacobian(s);
    for (std::size_t r = 0; r < z.size(); ++r)
      for (std::size_t m = 0; m < ns; ++m) jac.da_ds[m] += u[r] * dp[r * ns + m];
  } else {
    for (std::size_t m = 0; m < ns; ++m) jac.da_ds[m] = u[m];
  }
  jac.next_a = action_output(w, net_a);
  jac.f_prime = w.action_activation() == ActionActivation::linear
                    ? 1.0
                    : 0.5 * (1.0 - jac.next_a * jac.next_a);
  return jac;
}

RunResult run_sequence(const WeightSet& w, const Alphabet& alphabet,
                       std::span<const SymbolIndex> string, const RunOptions& opts) {
  const auto& sh = w.shape();
  if (alphabet.size() != sh.n_input)
    throw std::invalid_argument("alphabet size does not match the network input layer");
  const bool phi = sh.has_empty_neuron();
  RunResult run;
  std::vector<double> s = w.initial_state();
  std::vector<double> reading = run.stack.read(alphabet.size()).neural(phi);
  std::vector<SymbolIndex> symbols(string.begin(), string.end());
  if (alphabet.has_end()) symbols.push_back(alphabet.end_index());
  std::vector<double> input(sh.n_input, 0.0);
  for (std::size_t t = 0; t < symbols.size(); ++t) {
    const SymbolIndex sym = symbols[t];
    if (sym >= alphabet.size()) throw std::invalid_argument("symbol index out of range");
    std::fill(input.begin(), input.end(), 0.0);
    input[sym] = 1.0;
    StepResult st = step(w, s, reading, input);
    double a = std::clamp(st.next_a, -1.0, 1.0);
    ActionOutcome outcome = run.stack.apply_in_place(a, sym, opts.epsilon);
    if (outcome.kind == ActionKind::pop_empty) run.pop_empty.push_back({t, outcome.deficit});
    reading = run.stack.read(alphabet.size()).neural(phi);
    s = std::move(st.next_s);
    run.final_action = a;
    if (opts.trace)
      run.steps.push_back({sym, s, a, std::move(outcome), run.stack, reading});
  }
  run.final_state = std::move(s);
  return run;
}

double h_measure(double s_ns, double l) { return s_ns - l; }

bool classify(const RunResult& run, ClassifyRule rule, bool pop_empty_rejects) {
  if (pop_empty_rejects)
    for (const auto& e : run.pop_empty)
      if (e.deficit > kPopEmptyClassifyTolerance) return false;
  const double s = run.final_s_last();
  const double l = run.stack.total_length();
  if (rule == ClassifyRule::h_measure) return h_measure(s, l) > 0.5;
  return s > 0.5 && l <= 0.5;
}

namespace {

struct NeuronLayout {
  std::vector<std::size_t> neuron_of;  // per PDA state
  bool flag = false;                   // last neuron marks acceptance
  std::size_t needed = 0;
};

NeuronLayout layout_for(const DiscretePda& pda) {
  NeuronLayout lay;
  const std::size_t n = pda.state_count();
  lay.neuron_of.assign(n, 0);
  const bool single_accept =
      pda.accepting.size() == 1 && *pda.accepting.begin() != pda.start;
  lay.flag = !single_accept;
  lay.needed = lay.flag ? n + 1 : n;
  std::size_t next = 0;
  lay.neuron_of[pda.start] = next++;
  for (std::size_t q = 0; q < n; ++q) {
    if (static_cast<StateId>(q) == pda.start) continue;
    if (single_accept && static_cast<StateId>(q) == *pda.accepting.begin()) continue;
    lay.neuron_of[q] = next++;
  }
  if (single_accept) lay.neuron_of[*pda.accepting.begin()] = n - 1;
  return lay;
}

}  // namespace

std::size_t required_state_neurons(const DiscretePda& pda) { return layout_for(pda).needed; }

WeightSet construct_from_pda(const DiscretePda& pda, NetworkShape shape, double gain,
                             WeightOrder order) {
  pda.validate();
  if (order == WeightOrder::second)
    throw std::invalid_argument("construction needs third-order state weights");
  if (shape.n_input != pda.alphabet.size())
    throw std::invalid_argument("shape input layer does not match the pda alphabet");
  if (!shape.has_empty_neuron())
    throw std::invalid_argument("construction needs the empty-stack reading neuron");
  const NeuronLayout lay = layout_for(pda);
  if (lay.needed > shape.n_state)
    throw std::invalid_argument("pda needs " + std::to_string(lay.needed) +
                                " state neurons, shape has " + std::to_string(shape.n_state));
  // Unused neurons sit between the occupied ones and the last neuron.
  std::vector<std::size_t> neuron_of = lay.neuron_of;
  for (auto& nidx : neuron_of)
    if (nidx == lay.needed - 1) nidx = shape.n_state - 1;
  const std::size_t flag_neuron = shape.n_state - 1;

  const ActionActivation act =
      order == WeightOrder::full_order ? ActionActivation::linear : ActionActivation::bipolar;
  WeightSet w(order, shape, act);
  const std::size_t phi = shape.n_input;

  auto corner_of = [&](StateId q) {
    std::size_t corner = std::size_t{1} << neuron_of[q];
    if (lay.flag && pda.accepting.count(q)) corner |= std::size_t{1} << flag_neuron;
    return corner;
  };

  for (const auto& [key, t] : pda.transitions) {
    const std::size_t j = neuron_of[key.state];
    const std::size_t k = key.reading == kEmptyReading ? phi : key.reading;
    const std::size_t c = w.context_index(k, key.input);
    if (t.next != kDeadState) {
      w.ws(neuron_of[t.next], j, c) = gain;
      if (lay.flag && pda.accepting.count(t.next)) w.ws(flag_neuron, j, c) = gain;
    }
    const double a = static_cast<double>(static_cast<int>(t.action));
    if (order == WeightOrder::full_order)
      w.wa(corner_of(key.state), c) = a;
    else
      w.wa(j, c) = gain * a;
  }
  for (double& th : w.theta_s()) th = -gain / 2.0;
  if (w.has_theta_a()) w.set_theta_a(0.0);

  std::vector<double> s0(shape.n_state, 0.0);
  s0[neuron_of[pda.start]] = 1.0;
  if (lay.flag && pda.accepting.count(pda.start)) s0[flag_neuron] = 1.0;
  w.set_initial_state(std::move(s0));
  return w;
}

}  // namespace nnpda
