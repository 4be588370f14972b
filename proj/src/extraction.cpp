#include "nnpda/extraction.hpp"

#include "nnpda/grammars.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace nnpda {

int quantize_action(double a, double a_star) {
  if (a > a_star) return 1;
  if (a < -a_star) return -1;
  return 0;
}

std::vector<int> quantize_action_weights(const WeightSet& w, double w_star) {
  if (w.order() != WeightOrder::full_order || w.action_activation() != ActionActivation::linear)
    throw std::invalid_argument("action weight quantization needs full-order linear weights");
  std::vector<int> out;
  out.reserve(w.w_action_size());
  for (double x : w.w_action()) out.push_back(quantize_action(x, w_star));
  return out;
}

const char* to_string(StateScheme s) {
  switch (s) {
    case StateScheme::levels: return "levels";
    case StateScheme::binary: return "binary";
    case StateScheme::kmeans: return "kmeans";
  }
  return "?";
}

StateScheme parse_state_scheme(std::string_view s) {
  if (s == "levels") return StateScheme::levels;
  if (s == "binary") return StateScheme::binary;
  if (s == "kmeans") return StateScheme::kmeans;
  throw std::invalid_argument("unknown state scheme '" + std::string(s) + "'");
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t nearest_center(const std::vector<std::vector<double>>& centers,
                           std::span<const double> p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(centers[c], p);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

KMeansFit fit_kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                     std::uint64_t seed, std::size_t max_iter) {
  if (points.empty()) throw std::invalid_argument("k-means needs at least one point");
  if (k == 0) throw std::invalid_argument("k-means needs k >= 1");
  k = std::min(k, points.size());
  std::mt19937_64 rng(seed);
  KMeansFit fit;
  fit.centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)]);
  std::vector<double> d2(points.size());
  while (fit.centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = sq_dist(points[i], fit.centers[nearest_center(fit.centers, points[i])]);
      total += d2[i];
    }
    if (total == 0.0) break;  // fewer distinct points than k
    std::discrete_distribution<std::size_t> pick(d2.begin(), d2.end());
    fit.centers.push_back(points[pick(rng)]);
  }
  const std::size_t dim = points[0].size();
  std::vector<std::size_t> assign(points.size(), SIZE_MAX);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t c = nearest_center(fit.centers, points[i]);
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sum(fit.centers.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(fit.centers.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) sum[assign[i]][d] += points[i][d];
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < fit.centers.size(); ++c)
      if (count[c])
        for (std::size_t d = 0; d < dim; ++d) fit.centers[c][d] = sum[c][d] / double(count[c]);
  }
  double total = 0.0;
  for (const auto& p : points) total += std::sqrt(sq_dist(p, fit.centers[nearest_center(fit.centers, p)]));
  fit.average_distance = total / double(points.size());
  return fit;
}

StateQuantizer StateQuantizer::levels(std::vector<double> grid) {
  if (grid.empty()) throw std::invalid_argument("level grid is empty");
  std::sort(grid.begin(), grid.end());
  StateQuantizer q;
  q.scheme_ = StateScheme::levels;
  q.grid_ = std::move(grid);
  return q;
}

StateQuantizer StateQuantizer::binary() {
  StateQuantizer q;
  q.scheme_ = StateScheme::binary;
  return q;
}

StateQuantizer StateQuantizer::kmeans(KMeansFit fit) {
  if (fit.centers.empty()) throw std::invalid_argument("k-means quantizer needs fitted centers");
  StateQuantizer q;
  q.scheme_ = StateScheme::kmeans;
  q.fit_ = std::move(fit);
  return q;
}

std::vector<double> StateQuantizer::quantize(std::span<const double> s) const {
  switch (scheme_) {
    case StateScheme::levels: return decode_state_label(s, grid_);
    case StateScheme::binary: {
      std::vector<double> out(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] >= 0.5 ? 1.0 : 0.0;
      return out;
    }
    case StateScheme::kmeans: {
      if (fit_.centers.empty()) throw std::logic_error("k-means quantizer is not fitted");
      return fit_.centers[nearest_center(fit_.centers, s)];
    }
  }
  return {};
}

std::string format_state_label(std::span<const double> v) {
  std::string out = "(";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%g", v[i]);
    out += (i ? ", " : "");
    out += buf;
  }
  return out + ")";
}

std::string StateQuantizer::label(std::span<const double> s) const {
  if (scheme_ == StateScheme::kmeans)
    return "k" + std::to_string(nearest_center(fit_.centers, s));
  return format_state_label(quantize(s));
}

std::vector<std::vector<double>> collect_states(const WeightSet& w, const Alphabet& alphabet,
                                                const std::vector<std::string>& strings,
                                                double epsilon) {
  std::vector<std::vector<double>> out{w.initial_state()};
  for (const auto& s : strings) {
    const auto run = run_sequence(w, alphabet, alphabet.encode(s), {epsilon, true});
    for (const auto& st : run.steps) out.push_back(st.state);
  }
  return out;
}

std::vector<std::pair<StateId, SymbolIndex>> reachable_pairs(
    StateId start, std::size_t n_inputs, std::optional<SymbolIndex> end_input,
    const TransitionOracle& oracle, std::size_t max_pairs) {
  using Entry = std::pair<StateId, SymbolIndex>;  // state on entering a level, its top
  std::map<Entry, std::set<StateId>> same_level, pops;
  std::map<Entry, std::set<Entry>> callers;
  std::set<std::pair<StateId, SymbolIndex>> seen_pairs;
  std::vector<std::pair<StateId, SymbolIndex>> order;
  std::deque<std::pair<Entry, StateId>> work;

  auto add_fact = [&](const Entry& e, StateId p) {
    if (p == kDeadState) return;
    if (!same_level[e].insert(p).second) return;
    if (seen_pairs.insert({p, e.second}).second) {
      order.emplace_back(p, e.second);
      if (order.size() > max_pairs) {
        std::vector<std::string> frontier;
        for (const auto& [ent, st] : work)
          frontier.push_back(std::to_string(st) + "/" + std::to_string(ent.second));
        throw NonClosureError("extraction did not close within " + std::to_string(max_pairs) +
                                  " (state, reading) pairs",
                              std::move(frontier));
      }
    }
    work.emplace_back(e, p);
  };

  add_fact({start, kEmptyReading}, start);
  while (!work.empty()) {
    const auto [e, p] = work.front();
    work.pop_front();
    const SymbolIndex top = e.second;
    for (SymbolIndex in = 0; in < n_inputs; ++in) {
      const auto t = oracle(p, in, top);
      if (!t || t->next == kDeadState) continue;
      if (end_input && in == *end_input) continue;
      switch (t->action) {
        case DiscreteAction::noop: add_fact(e, t->next); break;
        case DiscreteAction::push: {
          const Entry inner{t->next, in};
          callers[inner].insert(e);
          add_fact(inner, t->next);
          for (StateId q : std::set<StateId>(pops[inner])) add_fact(e, q);
          break;
        }
        case DiscreteAction::pop: {
          if (top == kEmptyReading) break;  // pop on an empty stack rejects
          if (!pops[e].insert(t->next).second) break;
          for (const Entry& c : std::set<Entry>(callers[e])) add_fact(c, t->next);
          break;
        }
      }
    }
  }
  return order;
}

Extraction extract_pda(const WeightSet& w, const Alphabet& alphabet, const StateQuantizer& q,
                       const ExtractOptions& opts) {
  const auto& sh = w.shape();
  if (alphabet.size() != sh.n_input)
    throw std::invalid_argument("alphabet size does not match the network input layer");
  const bool phi = sh.has_empty_neuron();
  Extraction ex;
  DiscretePda& pda = ex.pda;
  pda.alphabet = alphabet;
  pda.require_empty_stack = true;

  std::map<std::string, StateId> ids;
  auto intern = [&](std::span<const double> raw) {
    const std::string label = q.label(raw);
    auto it = ids.find(label);
    if (it != ids.end()) return it->second;
    const StateId id = pda.add_state(label);
    ids.emplace(label, id);
    auto rep = q.quantize(raw);
    const bool trap = opts.trap_rule == TrapRule::last_neuron_low && rep.back() < 0.5;
    if (trap) pda.traps.insert(id);
    else if (rep.back() > 0.5) pda.accepting.insert(id);
    ex.representatives.push_back(std::move(rep));
    return id;
  };
  pda.start = intern(w.initial_state());

  auto reading_vector = [&](SymbolIndex r) {
    std::vector<double> v(sh.n_read, 0.0);
    if (r == kEmptyReading) {
      if (phi) v.back() = 1.0;
    } else {
      v[r] = 1.0;
    }
    return v;
  };

  std::map<TransitionKey, Transition> cache;
  TransitionOracle oracle = [&](StateId p, SymbolIndex in, SymbolIndex r) -> std::optional<Transition> {
    const TransitionKey key{p, in, r};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const std::vector<double> s = ex.representatives.at(p);
    const auto st = step(w, s, reading_vector(r), one_hot(in, sh.n_input));
    const int a = quantize_action(std::clamp(st.next_a, -1.0, 1.0), opts.action_threshold);
    Transition t{intern(st.next_s), static_cast<DiscreteAction>(a)};
    if (t.action == DiscreteAction::pop && r == kEmptyReading) t.next = kDeadState;
    if (pda.traps.count(p)) {
      if (!pda.traps.count(t.next)) ex.leaks.push_back({p, key, t});
      if (opts.absorbing_traps) t = {p, DiscreteAction::push};
    }
    cache.emplace(key, t);
    pda.add_rule(key, t);
    return t;
  };

  const auto end = alphabet.has_end() ? std::optional<SymbolIndex>(alphabet.end_index()) : std::nullopt;
  ex.pairs_expanded = reachable_pairs(pda.start, alphabet.size(), end, oracle, opts.max_pairs).size();
  if (!opts.absorbing_traps) pda.traps.clear();
  pda.validate();
  return ex;
}

DiscretePda restrict_to_reachable(const DiscretePda& pda) {
  TransitionOracle oracle = [&](StateId p, SymbolIndex in, SymbolIndex r) -> std::optional<Transition> {
    if (pda.traps.count(p)) return std::nullopt;
    const Transition* t = pda.find({p, in, r});
    if (!t) return std::nullopt;
    return *t;
  };
  const auto end = pda.alphabet.has_end() ? std::optional<SymbolIndex>(pda.alphabet.end_index())
                                          : std::nullopt;
  const auto pairs = reachable_pairs(pda.start, pda.alphabet.size(), end, oracle);
  const std::set<std::pair<StateId, SymbolIndex>> keep(pairs.begin(), pairs.end());
  DiscretePda out = pda;
  out.transitions.clear();
  for (const auto& [k, t] : pda.transitions)
    if (keep.count({k.state, k.reading})) out.transitions.emplace(k, t);
  return out;
}

namespace {

// Copy of `pda` keeping the states flagged in `keep` (renumbered in order).
DiscretePda keep_states(const DiscretePda& pda, const std::vector<bool>& keep) {
  DiscretePda out;
  out.alphabet = pda.alphabet;
  out.require_empty_stack = pda.require_empty_stack;
  std::vector<StateId> remap(pda.state_count(), kDeadState);
  for (std::size_t i = 0; i < pda.state_count(); ++i)
    if (keep[i]) remap[i] = out.add_state(pda.state_labels[i]);
  out.start = remap.at(pda.start);
  for (StateId s : pda.accepting)
    if (keep[s]) out.accepting.insert(remap[s]);
  for (StateId s : pda.traps)
    if (keep[s]) out.traps.insert(remap[s]);
  for (const auto& [k, t] : pda.transitions) {
    if (!keep[k.state]) continue;
    if (t.next != kDeadState && !keep[t.next]) continue;
    out.transitions.emplace(TransitionKey{remap[k.state], k.input, k.reading},
                            Transition{t.next == kDeadState ? kDeadState : remap[t.next], t.action});
  }
  return out;
}

}  // namespace

DiscretePda trim_pda(const DiscretePda& pda) {
  DiscretePda cleaned = pda;
  cleaned.transitions.clear();
  for (const auto& [k, t] : pda.transitions) {
    if (t.next == kDeadState) continue;
    if (t.action == DiscreteAction::pop && k.reading == kEmptyReading) continue;
    if (pda.traps.count(k.state)) continue;
    cleaned.transitions.emplace(k, t);
  }
  const std::size_t n = pda.state_count();
  std::vector<bool> live(n, false);
  std::deque<StateId> work;
  for (StateId s : pda.accepting)
    if (!pda.traps.count(s)) {
      live[s] = true;
      work.push_back(s);
    }
  while (!work.empty()) {
    const StateId s = work.front();
    work.pop_front();
    for (const auto& [k, t] : cleaned.transitions)
      if (t.next == s && !live[k.state]) {
        live[k.state] = true;
        work.push_back(k.state);
      }
  }
  live[pda.start] = true;
  DiscretePda out = keep_states(cleaned, live);
  // The start state may be kept without being live; drop what leaves it then.
  return out;
}

DiscretePda reduce_pda(const DiscretePda& pda) {
  const std::size_t n = pda.state_count();
  if (n == 0) return pda;
  std::vector<int> cls(n);
  for (std::size_t s = 0; s < n; ++s)
    cls[s] = pda.traps.count(s) ? 2 : pda.accepting.count(s) ? 1 : 0;
  using Letter = std::tuple<SymbolIndex, SymbolIndex, int>;
  std::vector<std::vector<std::pair<Letter, StateId>>> out_edges(n);
  for (const auto& [k, t] : pda.transitions)
    out_edges[k.state].push_back({Letter{k.input, k.reading, static_cast<int>(t.action)}, t.next});

  std::size_t blocks = 0;
  while (true) {
    std::map<std::pair<int, std::vector<std::pair<Letter, int>>>, int> sig_ids;
    std::vector<int> next(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::pair<Letter, int>> sig;
      for (const auto& [letter, target] : out_edges[s])
        sig.push_back({letter, target == kDeadState ? -1 : cls[target]});
      auto [it, inserted] = sig_ids.emplace(std::make_pair(cls[s], std::move(sig)),
                                            static_cast<int>(sig_ids.size()));
      next[s] = it->second;
    }
    const std::size_t count = sig_ids.size();
    cls = std::move(next);
    if (count == blocks) break;
    blocks = count;
  }

  // Blocks numbered by their first member so labels stay in source order.
  std::map<int, StateId> block_id;
  DiscretePda out;
  out.alphabet = pda.alphabet;
  out.require_empty_stack = pda.require_empty_stack;
  std::vector<std::string> labels;
  std::vector<StateId> first_member;
  for (std::size_t s = 0; s < n; ++s) {
    auto [it, inserted] = block_id.emplace(cls[s], static_cast<StateId>(labels.size()));
    if (inserted) {
      labels.push_back(pda.state_labels[s]);
      first_member.push_back(static_cast<StateId>(s));
    } else {
      labels[it->second] += " | " + pda.state_labels[s];
    }
  }
  for (auto& l : labels) out.add_state(l);
  out.start = block_id.at(cls[pda.start]);
  for (StateId s : pda.accepting) out.accepting.insert(block_id.at(cls[s]));
  for (StateId s : pda.traps) out.traps.insert(block_id.at(cls[s]));
  for (std::size_t b = 0; b < first_member.size(); ++b) {
    const StateId rep = first_member[b];
    for (const auto& [k, t] : pda.transitions) {
      if (k.state != rep) continue;
      out.transitions.emplace(
          TransitionKey{static_cast<StateId>(b), k.input, k.reading},
          Transition{t.next == kDeadState ? kDeadState : block_id.at(cls[t.next]), t.action});
    }
  }
  return out;
}

DiscretePda canonical_form(const DiscretePda& pda) {
  const std::size_t n = pda.state_count();
  std::vector<StateId> order;
  std::vector<StateId> remap(n, kDeadState);
  std::deque<StateId> work{pda.start};
  remap[pda.start] = 0;
  order.push_back(pda.start);
  // Keys sorted by (input, reading) with the empty reading first.
  auto reading_rank = [](SymbolIndex r) { return r == kEmptyReading ? 0 : r + 1; };
  while (!work.empty()) {
    const StateId s = work.front();
    work.pop_front();
    std::vector<std::pair<std::pair<SymbolIndex, SymbolIndex>, StateId>> edges;
    for (const auto& [k, t] : pda.transitions)
      if (k.state == s && t.next != kDeadState)
        edges.push_back({{k.input, reading_rank(k.reading)}, t.next});
    std::sort(edges.begin(), edges.end());
    for (const auto& [key, target] : edges)
      if (remap[target] == kDeadState) {
        remap[target] = static_cast<StateId>(order.size());
        order.push_back(target);
        work.push_back(target);
      }
  }
  DiscretePda out;
  out.alphabet = pda.alphabet;
  out.require_empty_stack = pda.require_empty_stack;
  for (std::size_t i = 0; i < order.size(); ++i) out.add_state(std::to_string(i + 1));
  out.start = 0;
  for (StateId s : pda.accepting)
    if (remap[s] != kDeadState) out.accepting.insert(remap[s]);
  for (StateId s : pda.traps)
    if (remap[s] != kDeadState) out.traps.insert(remap[s]);
  for (const auto& [k, t] : pda.transitions) {
    if (remap[k.state] == kDeadState) continue;
    out.transitions.emplace(TransitionKey{remap[k.state], k.input, k.reading},
                            Transition{t.next == kDeadState ? kDeadState : remap[t.next], t.action});
  }
  return out;
}

namespace {

DiscretePda normal_form(const DiscretePda& p) {
  return canonical_form(reduce_pda(trim_pda(restrict_to_reachable(p))));
}

}  // namespace

bool isomorphic(const DiscretePda& a, const DiscretePda& b) {
  if (!(a.alphabet == b.alphabet)) return false;
  const DiscretePda x = normal_form(a), y = normal_form(b);
  return x.state_count() == y.state_count() && x.accepting == y.accepting &&
         x.traps == y.traps && x.require_empty_stack == y.require_empty_stack &&
         x.transitions == y.transitions;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string export_dot(const DiscretePda& pda, const DotOptions& opts) {
  std::ostringstream o;
  o << "digraph " << opts.name << " {\n";
  o << "  rankdir=LR;\n";
  o << "  node [shape=circle];\n";
  o << "  start [shape=point];\n";
  bool has_dead = false;
  for (const auto& [k, t] : pda.transitions) has_dead |= t.next == kDeadState;
  for (std::size_t s = 0; s < pda.state_count(); ++s) {
    const auto id = static_cast<StateId>(s);
    o << "  s" << s << " [label=\"" << s + 1;
    if (pda.state_labels[s] != std::to_string(s + 1))
      o << "\\n" << dot_escape(pda.state_labels[s]);
    o << "\"";
    if (pda.accepting.count(id)) o << ", shape=doublecircle";
    if (pda.traps.count(id)) o << ", style=dashed";
    o << "];\n";
  }
  if (has_dead) o << "  dead [label=\"pop empty stack\", shape=plaintext];\n";
  o << "  start -> s" << pda.start << ";\n";
  auto sym = [&](SymbolIndex i) { return std::string(1, pda.alphabet.symbol(i)); };
  for (const auto& [k, t] : pda.transitions) {
    o << "  s" << k.state << " -> " << (t.next == kDeadState ? "dead" : "s" + std::to_string(t.next))
      << " [label=\"(" << dot_escape(sym(k.input)) << ", "
      << (k.reading == kEmptyReading ? std::string("φ") : dot_escape(sym(k.reading))) << ", "
      << static_cast<int>(t.action) << ")\"];\n";
  }
  o << "}\n";
  return o.str();
}

namespace {

template <typename Pred>
AgreementReport agreement(const Alphabet& alphabet, std::size_t max_len, Pred&& same) {
  AgreementReport rep;
  const StringEnumerator strings(alphabet.string_symbols(), max_len, 1);
  for (std::uint64_t i = 0; i < strings.count(); ++i) {
    const std::string s = strings.at(i);
    ++rep.checked;
    if (same(alphabet.encode(s))) continue;
    ++rep.disagreements;
    if (rep.examples.size() < 8) rep.examples.push_back(s);
  }
  return rep;
}

}  // namespace

AgreementReport compare_network_to_pda(const WeightSet& w, const DiscretePda& pda,
                                       std::size_t max_len, ClassifyRule rule,
                                       double epsilon) {
  RunOptions opts;
  opts.epsilon = epsilon;
  return agreement(pda.alphabet, max_len, [&](const std::vector<SymbolIndex>& s) {
    return classify(run_sequence(w, pda.alphabet, s, opts), rule) ==
           accepted(run_pda_indices(pda, s).verdict);
  });
}

AgreementReport compare_pdas(const DiscretePda& a, const DiscretePda& b, std::size_t max_len) {
  if (!(a.alphabet == b.alphabet)) throw std::invalid_argument("machines use different alphabets");
  return agreement(a.alphabet, max_len, [&](const std::vector<SymbolIndex>& s) {
    return accepted(run_pda_indices(a, s).verdict) == accepted(run_pda_indices(b, s).verdict);
  });
}

}  // namespace nnpda
