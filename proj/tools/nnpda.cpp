#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "nnpda/extraction.hpp"
#include "nnpda/kernels.hpp"
#include "nnpda/manifest.hpp"
#include "nnpda/model.hpp"
#include "nnpda/training.hpp"

using namespace nnpda;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNoConvergence = 4, kNumeric = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// "a..b" or a single seed.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      auto v = std::stoull(s);
      return {v, v};
    }
    auto a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
    if (b < a) throw UsageError("empty seed range " + s);
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError("bad seed range '" + s + "'");
  }
}

// Inserts ".seedN" before the extension unless the path has a "{seed}" slot.
std::string seeded_path(const std::string& path, std::uint64_t seed, bool many) {
  const std::string tag = std::to_string(seed);
  if (auto p = path.find("{seed}"); p != std::string::npos)
    return path.substr(0, p) + tag + path.substr(p + 6);
  if (!many) return path;
  auto slash = path.find_last_of('/');
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + ".seed" + tag;
  return path.substr(0, dot) + ".seed" + tag + path.substr(dot);
}

StateQuantizer parse_quantizer(const std::string& spec, const WeightSet& w, const Alphabet& a,
                               std::size_t kmeans_len, double epsilon, std::uint64_t seed) {
  if (spec == "binary") return StateQuantizer::binary();
  if (spec == "five") return StateQuantizer::five_level();
  if (spec.rfind("levels:", 0) == 0) {
    std::vector<double> grid;
    std::stringstream ss(spec.substr(7));
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    return StateQuantizer::levels(grid);
  }
  if (spec.rfind("kmeans:", 0) == 0) {
    const auto k = std::stoul(spec.substr(7));
    const auto strings = StringEnumerator(a.string_symbols(), kmeans_len, 0).all();
    const auto fit = fit_kmeans(collect_states(w, a, strings, epsilon), k, seed);
    std::fprintf(stderr, "kmeans k=%lu average distance %.6f\n", k, fit.average_distance);
    return StateQuantizer::kmeans(fit);
  }
  throw UsageError("unknown quantizer '" + spec + "' (binary, five, levels:..., kmeans:K)");
}

Grammar grammar_arg(const std::string& name) {
  try {
    return parse_grammar(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::size_t default_eval_len(const Alphabet& a) {
  return a.string_symbols().size() <= 2 ? 16 : 9;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string grammar, random, out;
  std::size_t exhaustive = 0, legal_of_length = 0;
  int stage = 0;
  std::uint64_t seed = 1;
  bool fixture = false, standard = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  const Grammar g = grammar_arg(a.grammar);
  LabeledDataset d;
  if (a.fixture) {
    if (g != Grammar::anbn) throw UsageError("--fixture only exists for anbn");
    d = anbn_fixture();
  } else if (a.standard) {
    d = standard_dataset(g, a.seed);
  } else {
    DatasetSpec spec;
    spec.exhaustive_up_to = a.exhaustive;
    spec.legal_of_length = a.legal_of_length;
    spec.stage = a.stage;
    if (!a.random.empty()) {
      // COUNTxMAX or COUNTxMIN-MAX
      auto x = a.random.find('x');
      if (x == std::string::npos) throw UsageError("--random expects COUNTxMAX or COUNTxMIN-MAX");
      try {
        spec.random_count = std::stoul(a.random.substr(0, x));
        auto range = a.random.substr(x + 1);
        if (auto dash = range.find('-'); dash != std::string::npos) {
          spec.random_min_len = std::stoul(range.substr(0, dash));
          spec.random_max_len = std::stoul(range.substr(dash + 1));
        } else {
          spec.random_max_len = std::stoul(range);
          spec.random_min_len = std::min(a.exhaustive + 1, spec.random_max_len);
        }
      } catch (const std::logic_error&) {
        throw UsageError("bad --random '" + a.random + "'");
      }
    }
    d = build_dataset(g, {spec}, a.seed);
  }
  write_file(a.out, d.to_text());
  std::fprintf(stderr, "%zu strings, %zu legal\n", d.entries.size(), d.legal_count());
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string config, data, out, seeds, resume, metrics, manifest;
  std::uint64_t data_seed = 1;
  bool augment = false;
  AugmentOptions augment_opts;
};

struct SeedRun {
  std::uint64_t seed = 0;
  bool converged = false;
  std::string error;
  bool numeric = false;
};

SeedRun train_one(const TrainArgs& a, TrainingConfig cfg, const LabeledDataset& data,
                  const std::string& data_path, const std::string& digest, std::uint64_t seed,
                  bool many) {
  SeedRun run;
  run.seed = seed;
  cfg.seed = seed;
  RunManifest man;
  TrainOptions opts;
  std::string model_path = seeded_path(a.out.empty() ? "model.txt" : a.out, seed, many);
  bool append = false;
  if (!a.resume.empty()) {
    const auto prev = RunManifest::load(seeded_path(a.resume, seed, many));
    if (prev.dataset_digest != digest)
      throw std::invalid_argument("resume: dataset digest differs from the manifest");
    opts.initial = load_model(prev.model_path).weights;
    opts.start_epoch = prev.epochs;
    if (a.out.empty()) model_path = prev.model_path;
    man.metrics_path = prev.metrics_path;
    append = true;
  }
  if (man.metrics_path.empty())
    man.metrics_path = a.metrics.empty() ? model_path + ".metrics.tsv" : seeded_path(a.metrics, seed, many);
  std::ofstream metrics(man.metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + man.metrics_path);

  man.config = cfg.to_text();
  man.seed = seed;
  man.dataset_path = data_path;
  man.dataset_digest = digest;
  man.model_path = model_path;

  Model model{grammar_alphabet(cfg.grammar), {}, cfg.epsilon, cfg.rule, cfg.pop_empty_rejects};
  try {
    if (a.augment) {
      if (!a.resume.empty()) throw UsageError("--augment cannot resume");
      metrics << "round\ttest_len\ttrain_accuracy\terrors\n";
      const auto r = augment_retrain_loop(data, cfg, a.augment_opts);
      for (std::size_t i = 0; i < r.rounds.size(); ++i)
        metrics << i << '\t' << r.rounds[i].test_len << '\t' << r.rounds[i].train_accuracy << '\t'
                << r.rounds[i].errors.size() << '\n';
      model.weights = r.weights;
      man.augment_rounds = r.rounds.size();
      man.epochs = r.rounds.size() * cfg.max_epochs;
      man.converged = r.terminated;
    } else {
      if (!append) metrics << metrics_header() << '\n';
      opts.on_epoch = [&](const EpochMetrics& m, const WeightSet&) {
        metrics << format_metrics(m) << '\n';
        metrics.flush();
      };
      const auto r = train(data, cfg, opts);
      model.weights = r.weights;
      man.epochs = r.history.empty() ? opts.start_epoch : r.history.back().epoch + 1;
      man.converged = r.converged;
    }
  } catch (const NumericError& e) {
    run.error = e.what();
    run.numeric = true;
    return run;
  }
  save_model(model, model_path);
  man.save(a.manifest.empty() ? model_path + ".manifest.json" : seeded_path(a.manifest, seed, many));
  run.converged = man.converged;
  return run;
}

int cmd_train(const TrainArgs& a) {
  TrainingConfig cfg;
  if (!a.config.empty()) {
    cfg = TrainingConfig::load(a.config);
  } else if (!a.resume.empty()) {
    cfg = TrainingConfig::parse(RunManifest::load(seeded_path(a.resume, 0, false)).config);
  } else {
    throw UsageError("train needs --config (or --resume)");
  }
  LabeledDataset data;
  std::string data_path = a.data, bytes;
  if (!a.data.empty()) {
    bytes = read_file(a.data);
    data = LabeledDataset::parse(cfg.grammar, bytes);
  } else {
    data = cfg.grammar == Grammar::anbn ? anbn_fixture() : standard_dataset(cfg.grammar, a.data_seed);
    bytes = data.to_text();
    data_path = "standard:" + std::to_string(a.data_seed);
  }
  const std::string digest = digest_bytes(bytes);

  auto [first, last] = a.seeds.empty() ? std::pair{cfg.seed, cfg.seed} : parse_seed_range(a.seeds);
  const bool many = last > first;
  const std::size_t n = last - first + 1;
  std::vector<SeedRun> runs(n);
  std::vector<std::string> failures(n);
  // Independent runs; kernels inside stay serial when nested.
#pragma omp parallel for schedule(dynamic) if (many)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      runs[i] = train_one(a, cfg, data, data_path, digest, first + i, many);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  bool any = false, numeric = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) throw std::runtime_error(failures[i]);
    const auto& r = runs[i];
    if (r.numeric) {
      numeric = true;
      std::fprintf(stderr, "seed %llu: numeric failure: %s\n", (unsigned long long)r.seed,
                   r.error.c_str());
    } else {
      std::fprintf(stderr, "seed %llu: %s\n", (unsigned long long)r.seed,
                   r.converged ? "converged" : "not converged");
    }
    any = any || r.converged;
  }
  if (any) return kOk;
  return numeric ? kNumeric : kNoConvergence;
}

// ---- eval ----

struct EvalArgs {
  std::string model, pda, grammar, data, rule;
  bool exhaustive = false, verbose = false;
  std::size_t max_len = 0;
};

int cmd_eval(const EvalArgs& a) {
  if (a.model.empty() == a.pda.empty()) throw UsageError("eval needs exactly one of --model, --pda");
  const Grammar g = grammar_arg(a.grammar);
  std::optional<Model> model;
  std::optional<DiscretePda> pda;
  Alphabet alphabet = grammar_alphabet(g);
  if (!a.model.empty()) {
    model = load_model(a.model);
    if (!a.rule.empty()) model->rule = parse_classify_rule(a.rule);
    alphabet = model->alphabet;
  } else {
    pda = DiscretePda::load(a.pda);
    alphabet = pda->alphabet;
  }
  if (!(alphabet == grammar_alphabet(g)))
    throw std::invalid_argument("model alphabet does not match grammar " + a.grammar);

  auto predict = [&](const std::string& s) {
    if (pda) return accepted(run_pda(*pda, s).verdict);
    RunOptions ro;
    ro.epsilon = model->epsilon;
    const auto run = run_sequence(model->weights, alphabet, alphabet.encode(s), ro);
    return classify(run, model->rule, model->pop_empty_rejects);
  };

  ClassifyCounts c;
  auto tally = [&](const std::string& s, bool legal) {
    const bool p = predict(s);
    ++c.total;
    (legal ? c.legal : c.illegal)++;
    if (p == legal) {
      ++c.correct;
      (legal ? c.legal_correct : c.illegal_correct)++;
    } else if (c.errors.size() < 32) {
      c.errors.push_back(s);
    }
    if (a.verbose) std::printf("%s\t%c\t%c\n", s.c_str(), legal ? 'y' : 'n', p ? 'y' : 'n');
  };

  if (a.exhaustive) {
    const std::size_t len = a.max_len ? a.max_len : default_eval_len(alphabet);
    const StringEnumerator strings(alphabet.string_symbols(), len, 1);
    if (model && !a.verbose) {
      ClassifySettings cs{model->epsilon, model->rule, model->pop_empty_rejects, 32};
      c = classify_range_parallel(model->weights, g, strings, cs);
    } else {
      for (std::uint64_t i = 0; i < strings.count(); ++i) {
        const auto s = strings.at(i);
        tally(s, label(g, s));
      }
    }
  } else if (!a.data.empty()) {
    for (const auto& e : LabeledDataset::load(g, a.data).entries) tally(e.text, e.legal);
  } else {
    throw UsageError("eval needs --data or --exhaustive");
  }
  std::printf("strings %llu correct %llu accuracy %.6f legal %llu/%llu illegal %llu/%llu\n",
              (unsigned long long)c.total, (unsigned long long)c.correct, c.accuracy(),
              (unsigned long long)c.legal_correct, (unsigned long long)c.legal,
              (unsigned long long)c.illegal_correct, (unsigned long long)c.illegal);
  for (const auto& e : c.errors) std::printf("error\t%s\n", e.c_str());
  return kOk;
}

// ---- trace ----

std::string join(const std::vector<double>& v) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.4f", i ? "," : "", v[i]);
    out += buf;
  }
  return out;
}

int cmd_trace(const std::string& model_path, const std::string& text) {
  const Model m = load_model(model_path);
  RunOptions ro;
  ro.epsilon = m.epsilon;
  ro.trace = true;
  const auto run = run_sequence(m.weights, m.alphabet, m.alphabet.encode(text), ro);
  std::printf("step\tinput\tstate\taction\tsegments\n");
  std::printf("0\t-\t%s\t0.0000\t\n", join(m.weights.initial_state()).c_str());
  for (std::size_t t = 0; t < run.steps.size(); ++t) {
    const auto& st = run.steps[t];
    std::printf("%zu\t%c\t%s\t%.4f\t%s\n", t + 1, m.alphabet.symbol(st.input),
                join(st.state).c_str(), st.action, format_segments(st.stack, m.alphabet).c_str());
  }
  std::printf("# length %.4f %s\n", run.stack.total_length(),
              classify(run, m.rule, m.pop_empty_rejects) ? "legal" : "illegal");
  return kOk;
}

// ---- extract ----

struct ExtractArgs {
  std::string model, quant = "binary", trap_rule = "none", out, dot;
  bool no_reduce = false, open_traps = false;
  std::size_t max_pairs = 4096, kmeans_len = 6;
  double action_threshold = 0.5;
  std::uint64_t seed = 1;
};

int cmd_extract(const ExtractArgs& a) {
  const Model m = load_model(a.model);
  const auto q = parse_quantizer(a.quant, m.weights, m.alphabet, a.kmeans_len, m.epsilon, a.seed);
  ExtractOptions opts;
  opts.action_threshold = a.action_threshold;
  opts.max_pairs = a.max_pairs;
  opts.absorbing_traps = !a.open_traps;
  if (a.trap_rule == "last_neuron_low") opts.trap_rule = TrapRule::last_neuron_low;
  else if (a.trap_rule != "none") throw UsageError("unknown trap rule '" + a.trap_rule + "'");
  Extraction ex;
  try {
    ex = extract_pda(m.weights, m.alphabet, q, opts);
  } catch (const NonClosureError& e) {
    throw std::runtime_error(std::string(e.what()) + " (frontier size " +
                             std::to_string(e.frontier.size()) + ")");
  }
  DiscretePda out = ex.pda;
  if (!a.no_reduce) out = canonical_form(reduce_pda(trim_pda(restrict_to_reachable(out))));
  std::fprintf(stderr, "extracted %zu states, %zu pairs, %zu leaks; output %zu states\n",
               ex.pda.state_count(), ex.pairs_expanded, ex.leaks.size(), out.state_count());
  write_file(a.out, out.to_text());
  if (!a.dot.empty()) write_file(a.dot, export_dot(out));
  return kOk;
}

// ---- construct / minimize / export-dot ----

int cmd_construct(const std::string& pda_path, const std::string& out, double gain,
                  const std::string& order, std::size_t n_state) {
  const auto pda = DiscretePda::load(pda_path);
  const auto o = parse_weight_order(order);
  const std::size_t need = required_state_neurons(pda);
  if (n_state && n_state < need)
    throw std::invalid_argument("pda needs " + std::to_string(need) + " state neurons");
  NetworkShape sh{n_state ? n_state : need, pda.alphabet.size(), pda.alphabet.size() + 1, 1};
  Model m{pda.alphabet, construct_from_pda(pda, sh, gain, o), kDefaultEpsilon,
          ClassifyRule::state_and_stack, true};
  write_file(out, save_model_text(m));
  return kOk;
}

int cmd_minimize(const std::string& in, const std::string& out) {
  const auto pda = DiscretePda::load(in);
  const auto red = canonical_form(reduce_pda(trim_pda(restrict_to_reachable(pda))));
  std::fprintf(stderr, "%zu states -> %zu\n", pda.state_count(), red.state_count());
  write_file(out, red.to_text());
  return kOk;
}

int cmd_export_dot(const std::string& in, const std::string& out, const std::string& name) {
  write_file(out, export_dot(DiscretePda::load(in), {name}));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("NNPDA_THREADS")) set_threads(std::atoi(t));

  CLI::App app{"Neural network pushdown automata: training, evaluation, extraction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Write a labelled dataset");
  gen->add_option("grammar", gd.grammar, "paren, anbn or palindrome")->required();
  gen->add_option("--exhaustive", gd.exhaustive, "every string of length 1..N");
  gen->add_option("--random", gd.random, "COUNTxMAX or COUNTxMIN-MAX, half legal");
  gen->add_option("--legal-of-length", gd.legal_of_length, "add the legal strings of length N");
  gen->add_option("--stage", gd.stage, "stage tag for the strings");
  gen->add_flag("--fixture", gd.fixture, "the fixed 27-string 1^n0^n listing");
  gen->add_flag("--standard", gd.standard, "the experiment's standard set");
  gen->add_option("--seed", gd.seed, "random seed");
  gen->add_option("-o,--out", gd.out, "output file (default stdout)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a controller with RTRL");
  tr->add_option("-c,--config", ta.config, "training config file");
  tr->add_option("-d,--data", ta.data, "dataset file (default: the standard set)");
  tr->add_option("--data-seed", ta.data_seed, "seed of the standard set");
  tr->add_option("-o,--out", ta.out, "model file; '{seed}' is replaced per seed");
  tr->add_option("--seeds", ta.seeds, "seed or range a..b, run concurrently");
  tr->add_option("--resume", ta.resume, "manifest of a run to continue");
  tr->add_option("--metrics", ta.metrics, "metrics TSV (default <model>.metrics.tsv)");
  tr->add_option("--manifest", ta.manifest, "manifest (default <model>.manifest.json)");
  tr->add_flag("--augment", ta.augment, "augment-retrain loop with exhaustive tests");
  tr->add_option("--rounds", ta.augment_opts.max_rounds, "loop rounds");
  tr->add_option("--first-test-len", ta.augment_opts.first_test_len, "first test length");
  tr->add_option("--max-test-len", ta.augment_opts.max_test_len, "largest test length");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Classification accuracy of a model or pda");
  ev->add_option("-m,--model", ea.model, "model file");
  ev->add_option("--pda", ea.pda, "pda file instead of a model");
  ev->add_option("-g,--grammar", ea.grammar, "grammar giving the labels")->required();
  ev->add_option("-d,--data", ea.data, "dataset file");
  ev->add_flag("--exhaustive", ea.exhaustive, "every string up to --max-len");
  ev->add_option("--max-len", ea.max_len, "default 16 (two symbols) or 9");
  ev->add_option("--rule", ea.rule, "h_measure or state_and_stack");
  ev->add_flag("-v,--verbose", ea.verbose, "one line per string");

  std::string trace_model, trace_text;
  auto* tc = app.add_subcommand("trace", "Step-by-step run as TSV");
  tc->add_option("-m,--model", trace_model, "model file")->required();
  tc->add_option("string", trace_text, "input string (may be empty)");

  ExtractArgs xa;
  auto* ex = app.add_subcommand("extract", "Extract a discrete pda from a model");
  ex->add_option("-m,--model", xa.model, "model file")->required();
  ex->add_option("-q,--quant", xa.quant, "binary, five, levels:a,b,..., kmeans:K");
  ex->add_option("--kmeans-len", xa.kmeans_len, "strings up to this length feed k-means");
  ex->add_option("--seed", xa.seed, "k-means seed");
  ex->add_option("--trap-rule", xa.trap_rule, "none or last_neuron_low");
  ex->add_flag("--open-traps", xa.open_traps, "keep observed transitions out of traps");
  ex->add_option("--action-threshold", xa.action_threshold, "A* for action quantization");
  ex->add_option("--max-pairs", xa.max_pairs, "give up past this many (state, reading) pairs");
  ex->add_flag("--no-reduce", xa.no_reduce, "write the raw extracted machine");
  ex->add_option("-o,--out", xa.out, "pda file (default stdout)");
  ex->add_option("--dot", xa.dot, "also write DOT here");

  std::string con_in, con_out, con_order = "third";
  double con_gain = 20.0;
  std::size_t con_states = 0;
  auto* co = app.add_subcommand("construct", "Build a model that runs a pda");
  co->add_option("pda", con_in, "pda file")->required();
  co->add_option("-o,--out", con_out, "model file (default stdout)");
  co->add_option("--gain", con_gain, "weight magnitude");
  co->add_option("--order", con_order, "third or full_order");
  co->add_option("--n-state", con_states, "state neurons (default: the minimum)");

  std::string mi_in, mi_out;
  auto* mi = app.add_subcommand("minimize", "Trim and reduce a pda");
  mi->add_option("pda", mi_in, "pda file")->required();
  mi->add_option("-o,--out", mi_out, "output (default stdout)");

  std::string dot_in, dot_out, dot_name = "pda";
  auto* dt = app.add_subcommand("export-dot", "Write a pda as Graphviz DOT");
  dt->add_option("pda", dot_in, "pda file")->required();
  dt->add_option("-o,--out", dot_out, "output (default stdout)");
  dt->add_option("--name", dot_name, "graph name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gd);
    if (*tr) return cmd_train(ta);
    if (*ev) return cmd_eval(ea);
    if (*tc) return cmd_trace(trace_model, trace_text);
    if (*ex) return cmd_extract(xa);
    if (*co) return cmd_construct(con_in, con_out, con_gain, con_order, con_states);
    if (*mi) return cmd_minimize(mi_in, mi_out);
    if (*dt) return cmd_export_dot(dot_in, dot_out, dot_name);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage: %s\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
