#include "nnpda/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace nnpda {

const char* to_string(Objective o) {
  return o == Objective::unified ? "unified" : "trap_state";
}

const char* to_string(PopEmptyPolicy p) {
  switch (p) {
    case PopEmptyPolicy::stop_and_grow_stack: return "stop_and_grow_stack";
    case PopEmptyPolicy::illegal_only_skip: return "illegal_only_skip";
    case PopEmptyPolicy::stop_with_hint: return "stop_with_hint";
    case PopEmptyPolicy::ignore: return "ignore";
  }
  return "?";
}

const char* to_string(UpdateMode m) { return m == UpdateMode::batch ? "batch" : "stochastic"; }

const char* to_string(KernelMode m) {
  switch (m) {
    case KernelMode::automatic: return "auto";
    case KernelMode::serial: return "serial";
    case KernelMode::parallel: return "parallel";
  }
  return "?";
}

NetworkShape TrainingConfig::shape() const {
  const std::size_t ni = grammar_alphabet(grammar).size();
  return {n_state, ni, ni + (empty_neuron ? 1 : 0), 1};
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (n_state == 0) fail("n_state must be positive");
  if (order == WeightOrder::full_order && n_state > 16) fail("full order needs n_state <= 16");
  if (action_activation == ActionActivation::linear && order != WeightOrder::full_order)
    fail("linear action activation requires full order");
  if (!(learning_rate() > 0.0)) fail("eta must be positive");
  if (!(epsilon >= 0.0 && epsilon < 0.5)) fail("epsilon must be in [0, 0.5)");
  if (!(legal_rate_multiplier > 0.0)) fail("legal_rate_multiplier must be positive");
  if (!(pop_empty_step >= 0.0)) fail("pop_empty_step must be non-negative");
  if (!(init_range > 0.0)) fail("init_range must be positive");
  for (std::size_t i = 1; i < length_schedule.size(); ++i)
    if (length_schedule[i].max_len <= length_schedule[i - 1].max_len)
      fail("length_schedule lengths must increase");
  for (std::size_t i = 0; i + 1 < length_schedule.size(); ++i)
    if (length_schedule[i].epochs == 0) fail("only the last length stage may be open-ended");
  shape().validate();
}

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& v) {
  std::size_t pos = 0;
  const unsigned long long x = std::stoull(v, &pos);
  if (pos != v.size() || v[0] == '-') throw std::invalid_argument("expected a count, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

template <class E, std::size_t N>
E parse_enum(const std::string& v, const E (&values)[N]) {
  for (E e : values)
    if (v == to_string(e)) return e;
  throw std::invalid_argument("unknown value '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string TrainingConfig::to_text() const {
  std::ostringstream o;
  o << "grammar = " << nnpda::to_string(grammar) << "\n"
    << "order = " << nnpda::to_string(order) << "\n"
    << "action_activation = " << nnpda::to_string(action_activation) << "\n"
    << "n_state = " << n_state << "\n"
    << "empty_neuron = " << (empty_neuron ? "true" : "false") << "\n"
    << "objective = " << nnpda::to_string(objective) << "\n"
    << "classify = " << nnpda::to_string(rule) << "\n"
    << "pop_empty_rejects = " << (pop_empty_rejects ? "true" : "false") << "\n"
    << "pop_empty = " << nnpda::to_string(pop_empty) << "\n"
    << "mode = " << nnpda::to_string(mode) << "\n"
    << "kernels = " << nnpda::to_string(kernels) << "\n";
  if (eta) o << "eta = " << fmt(*eta) << "\n";
  o << "epsilon = " << fmt(epsilon) << "\n"
    << "legal_rate_multiplier = " << fmt(legal_rate_multiplier) << "\n"
    << "pop_empty_step = " << fmt(pop_empty_step) << "\n"
    << "interleave = " << interleave << "\n"
    << "shuffle = " << (shuffle ? "true" : "false") << "\n"
    << "init_range = " << fmt(init_range) << "\n"
    << "seed = " << seed << "\n"
    << "max_epochs = " << max_epochs << "\n";
  if (!stage_epochs.empty()) {
    o << "stage_epochs = ";
    for (std::size_t i = 0; i < stage_epochs.size(); ++i)
      o << (i ? "," : "") << stage_epochs[i];
    o << "\n";
  }
  if (!length_schedule.empty()) {
    o << "length_schedule = ";
    for (std::size_t i = 0; i < length_schedule.size(); ++i) {
      o << (i ? "," : "") << length_schedule[i].max_len;
      if (length_schedule[i].epochs) o << ":" << length_schedule[i].epochs;
    }
    o << "\n";
  }
  o << "stop_when_perfect = " << (stop_when_perfect ? "true" : "false") << "\n";
  return o.str();
}

TrainingConfig TrainingConfig::parse(std::string_view text) {
  TrainingConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (seen[key]++) throw std::invalid_argument("config: duplicate key '" + key + "'");
    try {
      if (key == "grammar") c.grammar = parse_grammar(v);
      else if (key == "order") c.order = parse_weight_order(v);
      else if (key == "action_activation") c.action_activation = parse_action_activation(v);
      else if (key == "n_state") c.n_state = parse_size(v);
      else if (key == "empty_neuron") c.empty_neuron = parse_bool(v);
      else if (key == "objective")
        c.objective = parse_enum(v, {Objective::unified, Objective::trap_state});
      else if (key == "classify") c.rule = parse_classify_rule(v);
      else if (key == "pop_empty_rejects") c.pop_empty_rejects = parse_bool(v);
      else if (key == "pop_empty")
        c.pop_empty = parse_enum(v, {PopEmptyPolicy::stop_and_grow_stack,
                                     PopEmptyPolicy::illegal_only_skip,
                                     PopEmptyPolicy::stop_with_hint, PopEmptyPolicy::ignore});
      else if (key == "mode") c.mode = parse_enum(v, {UpdateMode::stochastic, UpdateMode::batch});
      else if (key == "kernels")
        c.kernels = parse_enum(v, {KernelMode::automatic, KernelMode::serial, KernelMode::parallel});
      else if (key == "eta") c.eta = parse_double(v);
      else if (key == "epsilon") c.epsilon = parse_double(v);
      else if (key == "legal_rate_multiplier") c.legal_rate_multiplier = parse_double(v);
      else if (key == "pop_empty_step") c.pop_empty_step = parse_double(v);
      else if (key == "interleave") c.interleave = parse_size(v);
      else if (key == "shuffle") c.shuffle = parse_bool(v);
      else if (key == "init_range") c.init_range = parse_double(v);
      else if (key == "seed") c.seed = parse_size(v);
      else if (key == "max_epochs") c.max_epochs = parse_size(v);
      else if (key == "stage_epochs") {
        for (const auto& item : split(v, ',')) c.stage_epochs.push_back(parse_size(item));
      } else if (key == "length_schedule") {
        for (const auto& item : split(v, ',')) {
          const auto colon = item.find(':');
          LengthStage st;
          st.max_len = parse_size(trim(item.substr(0, colon)));
          if (colon != std::string::npos) st.epochs = parse_size(trim(item.substr(colon + 1)));
          c.length_schedule.push_back(st);
        }
      } else if (key == "stop_when_perfect") c.stop_when_perfect = parse_bool(v);
      else throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + " (" + key +
                                  "): " + e.what());
    }
  }
  c.validate();
  return c;
}

TrainingConfig TrainingConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RtrlTracker::RtrlTracker(const WeightSet& w, KernelMode kernels) : w_(&w) {
  const auto& sh = w.shape();
  sens_ = SensitivitySet(w.parameter_count(), sh.n_state, sh.n_read);
  next_ = sens_;
  input_.assign(sh.n_input, 0.0);
  parallel_ = kernels == KernelMode::parallel ||
              (kernels == KernelMode::automatic && max_threads() > 1 &&
               w.parameter_count() >= 512);
  reset();
}

void RtrlTracker::reset() {
  s_ = w_->initial_state();
  a_ = 0.0;
  sens_.reset();
}

double RtrlTracker::advance(std::span<const double> reading, SymbolIndex input) {
  std::fill(input_.begin(), input_.end(), 0.0);
  input_.at(input) = 1.0;
  const StepJacobian jac = step_with_jacobian(*w_, s_, reading, input_);
  // A clipped linear action no longer depends on the weights.
  const double gate = std::abs(jac.next_a) > 1.0 ? 0.0 : 1.0;
  if (parallel_)
    propagate_sensitivities_parallel(*w_, jac, s_, gate, sens_, next_);
  else
    propagate_sensitivities_serial(*w_, jac, s_, gate, sens_, next_);
  for (std::size_t p = 0; p < sens_.params; ++p) next_.dl[p] = sens_.dl[p] + next_.da[p];
  std::fill(next_.dr.begin(), next_.dr.end(), 0.0);
  std::swap(sens_, next_);
  s_ = jac.next_s;
  a_ = jac.next_a;
  for (double x : s_)
    if (!std::isfinite(x)) throw NumericError("state became non-finite");
  if (!std::isfinite(a_)) throw NumericError("action became non-finite");
  return a_;
}

double unified_target(bool legal, double s_last, double l) {
  return legal ? 1.0 : std::min(0.0, s_last - l);
}

double unified_error(bool legal, double s_last, double l) {
  const double e = unified_target(legal, s_last, l) + l - s_last;
  return e * e;
}

namespace {

void add_scaled(std::vector<double>& delta, double c, const SensitivitySet& sens,
                bool use_state, bool use_length, double c_length) {
  const std::size_t ns = sens.n_state;
  for (std::size_t p = 0; p < sens.params; ++p) {
    double d = 0.0;
    if (use_state) d += c * sens.ds[p * ns + ns - 1];
    if (use_length) d += c_length * sens.dl[p];
    delta[p] += d;
  }
}

}  // namespace

StringOutcome accumulate_string(const WeightSet& w, const LabeledEntry& entry,
                                const TrainingConfig& cfg, std::vector<double>& delta) {
  const Alphabet alphabet = grammar_alphabet(cfg.grammar);
  std::vector<SymbolIndex> symbols = alphabet.encode(entry.text);
  if (alphabet.has_end()) symbols.push_back(alphabet.end_index());
  const bool phi = w.shape().has_empty_neuron();
  const double scale = entry.legal ? cfg.legal_rate_multiplier : 1.0;
  delta.resize(w.parameter_count(), 0.0);

  RtrlTracker tracker(w, cfg.kernels);
  SensitivitySet& sens = tracker.sensitivities();
  ContinuousStack stack;
  std::vector<double> reading = stack.read(alphabet.size()).neural(phi);
  StringOutcome out;

  for (std::size_t t = 0; t < symbols.size(); ++t) {
    const SymbolIndex sym = symbols[t];
    const double a = std::clamp(tracker.advance(reading, sym), -1.0, 1.0);
    ++out.steps;
    const double s_last = tracker.state().back();

    if (cfg.objective == Objective::trap_state && t < entry.text.size() &&
        !viable_prefix(cfg.grammar, std::string_view(entry.text).substr(0, t + 1))) {
      // Trap: target 0 on the last neuron, stack length unsupervised.
      out.trapped = true;
      out.error = s_last * s_last;
      add_scaled(delta, scale * (0.0 - s_last), sens, true, false, 0.0);
      return out;
    }

    const ActionOutcome outcome = stack.apply_in_place(a, sym, cfg.epsilon);
    if (outcome.kind == ActionKind::pop_empty) {
      out.pop_empty = true;
      switch (cfg.pop_empty) {
        case PopEmptyPolicy::stop_and_grow_stack:
          out.error = 1.0;
          add_scaled(delta, 0.0, sens, false, true, scale * cfg.pop_empty_step);
          return out;
        case PopEmptyPolicy::stop_with_hint:
          out.error = entry.legal ? 1.0 : 0.0;
          add_scaled(delta, 0.0, sens, false, true,
                     scale * (entry.legal ? cfg.pop_empty_step : -cfg.pop_empty_step));
          return out;
        case PopEmptyPolicy::illegal_only_skip:
          if (!entry.legal) return out;
          break;
        case PopEmptyPolicy::ignore:
          break;
      }
      // The clamped stack is empty whatever the weights were.
      std::fill(sens.dl.begin(), sens.dl.end(), 0.0);
    }

    const StackReading view = stack.read(alphabet.size());
    reading = view.neural(phi);
    if (outcome.kind != ActionKind::pop_empty && view.mass > 0.0) {
      const std::size_t nr = sens.n_read;
      for (std::size_t p = 0; p < sens.params; ++p) {
        double* dr = sens.dr_row(p);
        if (view.section_count >= 2) {
          dr[*view.r1] += sens.da[p];
          dr[*view.r2] -= sens.da[p];
        }
        if (phi && view.mass < 1.0) dr[nr - 1] = -sens.dl[p];
      }
    }
  }

  const double s_last = tracker.state().back();
  const double l = stack.total_length();
  if (cfg.objective == Objective::unified) {
    const double e = unified_target(entry.legal, s_last, l) + l - s_last;
    out.error = e * e;
    add_scaled(delta, scale * e, sens, true, true, -scale * e);
  } else {
    const double es = 1.0 - s_last;
    double el;
    if (entry.legal) el = -l;
    else el = l >= 0.9 ? 0.1 : 1.0 - l;
    const double counted = (!entry.legal && l > 1.0) ? 0.0 : (entry.legal ? -l : 1.0 - l);
    out.error = es * es + counted * counted;
    add_scaled(delta, scale * es, sens, true, true, scale * el);
  }
  if (!sens.finite()) throw NumericError("sensitivities became non-finite");
  return out;
}

std::string metrics_header() { return "epoch\tmean_error\ttrain_accuracy\tpop_empty_count"; }

std::string format_metrics(const EpochMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.4f\t%zu", m.epoch, m.mean_error,
                m.train_accuracy, m.pop_empty_count);
  return buf;
}

WeightSet initial_weights(const TrainingConfig& cfg) {
  return random_weights(cfg.order, cfg.shape(), cfg.action_activation, cfg.seed, cfg.init_range);
}

double dataset_accuracy(const WeightSet& w, Grammar g, const std::vector<LabeledEntry>& entries,
                        double epsilon, ClassifyRule rule, bool pop_empty_rejects) {
  if (entries.empty()) return 1.0;
  const Alphabet alphabet = grammar_alphabet(g);
  std::size_t correct = 0;
  for (const auto& e : entries) {
    const auto run = run_sequence(w, alphabet, alphabet.encode(e.text), {epsilon, false});
    if (classify(run, rule, pop_empty_rejects) == e.legal) ++correct;
  }
  return double(correct) / double(entries.size());
}

namespace {

std::vector<const LabeledEntry*> presentation_order(const std::vector<const LabeledEntry*>& active,
                                                    const TrainingConfig& cfg,
                                                    std::mt19937_64& rng) {
  std::vector<const LabeledEntry*> legal, illegal, out;
  for (const auto* e : active) (e->legal ? legal : illegal).push_back(e);
  if (cfg.shuffle) {
    std::shuffle(legal.begin(), legal.end(), rng);
    std::shuffle(illegal.begin(), illegal.end(), rng);
  }
  if (cfg.interleave == 0) {
    out = active;
    if (cfg.shuffle) std::shuffle(out.begin(), out.end(), rng);
    return out;
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < illegal.size(); ++i) {
    out.push_back(illegal[i]);
    if ((i + 1) % cfg.interleave == 0 && !legal.empty()) out.push_back(legal[next++ % legal.size()]);
  }
  while (next < legal.size()) out.push_back(legal[next++]);
  return out;
}

std::size_t length_limit(const TrainingConfig& cfg, std::size_t epoch) {
  std::size_t start = 0;
  for (const auto& st : cfg.length_schedule) {
    if (st.epochs == 0 || epoch < start + st.epochs) return st.max_len;
    start += st.epochs;
  }
  return cfg.length_schedule.empty() ? SIZE_MAX : cfg.length_schedule.back().max_len;
}

}  // namespace

TrainResult train(const LabeledDataset& data, const TrainingConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (data.grammar != cfg.grammar) throw std::invalid_argument("dataset grammar does not match config");
  TrainResult result;
  result.weights = opts.initial ? *opts.initial : initial_weights(cfg);
  WeightSet& w = result.weights;
  if (w.shape() != cfg.shape() || w.order() != cfg.order)
    throw std::invalid_argument("initial weights do not match the config shape");

  const int n_stages = std::max(1, data.stage_count());
  std::vector<std::size_t> stage_epochs = cfg.stage_epochs;
  if (stage_epochs.empty()) {
    if (n_stages > 1) throw std::invalid_argument("multi-stage dataset needs stage_epochs");
    stage_epochs = {cfg.max_epochs};
  }
  if (static_cast<int>(stage_epochs.size()) != n_stages)
    throw std::invalid_argument("stage_epochs must list one count per dataset stage");

  const double eta = cfg.learning_rate();
  std::vector<double> delta(w.parameter_count());
  std::size_t epoch = 0;
  for (int s = 0; s < n_stages; ++s) {
    const auto entries = data.stage(s);
    bool perfect = false;
    const std::size_t stage_end = epoch + stage_epochs[s];
    for (; epoch < stage_end; ++epoch) {
      if (epoch < opts.start_epoch) continue;
      std::seed_seq seq{cfg.seed, std::uint64_t(epoch), std::uint64_t(0x5eed)};
      std::mt19937_64 rng(seq);
      const std::size_t max_len = length_limit(cfg, epoch);
      std::vector<const LabeledEntry*> active;
      for (const auto& e : entries)
        if (e.text.size() <= max_len) active.push_back(&e);
      const auto order = presentation_order(active, cfg, rng);

      EpochMetrics m;
      m.epoch = epoch;
      m.stage = s;
      double total_error = 0.0;
      std::fill(delta.begin(), delta.end(), 0.0);
      for (const auto* e : order) {
        if (cfg.mode == UpdateMode::stochastic) std::fill(delta.begin(), delta.end(), 0.0);
        const StringOutcome o = accumulate_string(w, *e, cfg, delta);
        total_error += o.error;
        m.pop_empty_count += o.pop_empty ? 1 : 0;
        if (cfg.mode == UpdateMode::stochastic) {
          auto p = w.params();
          for (std::size_t i = 0; i < p.size(); ++i) p[i] += eta * delta[i];
          if (w.order() == WeightOrder::full_order) w.truncate_action_weights();
        }
      }
      if (cfg.mode == UpdateMode::batch) {
        auto p = w.params();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += eta * delta[i];
        if (w.order() == WeightOrder::full_order) w.truncate_action_weights();
      }
      try {
        w.check_finite();
      } catch (const std::exception& ex) {
        throw NumericError(std::string("weights became non-finite: ") + ex.what());
      }
      m.mean_error = order.empty() ? 0.0 : total_error / double(order.size());
      m.train_accuracy = dataset_accuracy(w, cfg.grammar, entries, cfg.epsilon, cfg.rule,
                                          cfg.pop_empty_rejects);
      result.history.push_back(m);
      if (opts.on_epoch) opts.on_epoch(m, w);
      perfect = m.train_accuracy == 1.0;
      if (perfect && cfg.stop_when_perfect) {
        epoch = stage_end;
        break;
      }
    }
    if (s == n_stages - 1) result.converged = perfect;
  }
  return result;
}

std::vector<std::string> misclassified_strings(const WeightSet& w, Grammar g,
                                               std::size_t max_len, double epsilon,
                                               ClassifyRule rule, bool pop_empty_rejects,
                                               std::size_t limit) {
  ClassifySettings settings{epsilon, rule, pop_empty_rejects, limit};
  StringEnumerator strings(grammar_alphabet(g).string_symbols(), max_len, 1);
  return classify_range_parallel(w, g, strings, settings).errors;
}

LabeledDataset augment_with_errors(const LabeledDataset& data,
                                   const std::vector<std::string>& errors, int stage) {
  LabeledDataset out = data;
  for (const auto& s : errors) out.entries.push_back({s, label(data.grammar, s), stage});
  return out;
}

AugmentResult augment_retrain_loop(const LabeledDataset& data, const TrainingConfig& cfg,
                                   const AugmentOptions& opts) {
  AugmentResult out;
  out.data = data;
  std::optional<WeightSet> current;
  for (std::size_t r = 0; r < opts.max_rounds; ++r) {
    TrainOptions topts;
    topts.initial = current;
    const TrainResult tr = train(out.data, cfg, topts);
    current = tr.weights;
    AugmentRound round;
    round.test_len = std::min(opts.first_test_len + r, opts.max_test_len);
    round.train_accuracy = tr.history.empty() ? 0.0 : tr.history.back().train_accuracy;
    round.errors = misclassified_strings(*current, cfg.grammar, round.test_len, cfg.epsilon,
                                         cfg.rule, cfg.pop_empty_rejects, opts.max_added);
    const bool clean = round.errors.empty();
    out.data = augment_with_errors(out.data, round.errors, 0);
    out.rounds.push_back(std::move(round));
    if (clean) {
      out.terminated = true;
      break;
    }
  }
  out.weights = *current;
  return out;
}

}  // namespace nnpda
