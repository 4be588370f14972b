#include "nnpda/model.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace nnpda {

namespace {

constexpr const char* kMagic = "nnpda-model 1";

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_tensor(std::ostringstream& out, const std::string& name,
                  const std::vector<std::size_t>& dims, std::span<const double> values) {
  out << "tensor " << name << ' ' << dims.size();
  for (auto d : dims) out << ' ' << d;
  out << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << fmt17(values[i]) << ((i + 1) % 8 == 0 || i + 1 == values.size() ? '\n' : ' ');
  }
}

std::vector<std::size_t> w_state_dims(const WeightSet& w) {
  const auto& s = w.shape();
  if (w.order() == WeightOrder::second) return {s.n_state, s.n_state, s.n_read + s.n_input};
  return {s.n_state, s.n_state, s.n_read, s.n_input};
}

std::vector<std::size_t> w_action_dims(const WeightSet& w) {
  const auto& s = w.shape();
  if (w.order() == WeightOrder::second) return {s.n_state, s.n_read + s.n_input};
  return {w.action_rows(), s.n_read, s.n_input};
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::invalid_argument("bad number '" + tok + "' in model file");
  return v;
}

}  // namespace

std::string save_model_text(const Model& m) {
  const WeightSet& w = m.weights;
  std::ostringstream out;
  out << kMagic << '\n';
  out << "alphabet:";
  for (char c : m.alphabet.string_symbols()) out << ' ' << c;
  out << '\n';
  if (m.alphabet.has_end()) out << "end: " << *m.alphabet.end_symbol() << '\n';
  out << "order: " << to_string(w.order()) << '\n';
  out << "action_activation: " << to_string(w.action_activation()) << '\n';
  out << "epsilon: " << fmt17(m.epsilon) << '\n';
  out << "classify: " << to_string(m.rule) << '\n';
  out << "pop_empty_rejects: " << (m.pop_empty_rejects ? "true" : "false") << '\n';
  const auto& s = w.shape();
  out << "shape: " << s.n_state << ' ' << s.n_input << ' ' << s.n_read << ' ' << s.n_action
      << '\n';
  write_tensor(out, "initial_state", {s.n_state}, w.initial_state());
  write_tensor(out, "w_state", w_state_dims(w), w.w_state());
  write_tensor(out, "w_action", w_action_dims(w), w.w_action());
  write_tensor(out, "theta_s", {s.n_state}, w.theta_s());
  if (w.has_theta_a()) {
    const double ta = w.theta_a();
    write_tensor(out, "theta_a", {1}, std::span<const double>(&ta, 1));
  }
  out << "end-model\n";
  return out.str();
}

Model parse_model_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::invalid_argument("not an nnpda model file (expected '" + std::string(kMagic) +
                                "')");
  std::map<std::string, std::string> header;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> tensors;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "end-model") {
      ended = true;
      break;
    }
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream hs(line.substr(7));
      std::string name;
      std::size_t rank = 0;
      if (!(hs >> name >> rank)) throw std::invalid_argument("bad tensor header: " + line);
      std::vector<std::size_t> dims(rank);
      std::size_t count = 1;
      for (auto& d : dims) {
        if (!(hs >> d)) throw std::invalid_argument("bad tensor dims: " + line);
        count *= d;
      }
      std::vector<double> values;
      values.reserve(count);
      std::string tok;
      while (values.size() < count && in >> tok) values.push_back(parse_double(tok));
      if (values.size() != count) throw std::invalid_argument("tensor " + name + " truncated");
      tensors[name] = {std::move(dims), std::move(values)};
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad model line: " + line);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value[0] == ' ') value.erase(0, 1);
    header[line.substr(0, colon)] = value;
  }
  if (!ended) throw std::invalid_argument("model file truncated (no end-model)");

  auto need = [&](const std::string& k) -> const std::string& {
    auto it = header.find(k);
    if (it == header.end()) throw std::invalid_argument("model file lacks '" + k + "'");
    return it->second;
  };
  Model m;
  std::vector<char> symbols;
  {
    std::istringstream as(need("alphabet"));
    std::string t;
    while (as >> t) {
      if (t.size() != 1) throw std::invalid_argument("alphabet tokens are single characters");
      symbols.push_back(t[0]);
    }
  }
  std::optional<char> end;
  if (header.count("end")) {
    const auto& e = header["end"];
    if (e.size() != 1) throw std::invalid_argument("bad end symbol");
    end = e[0];
    symbols.push_back(*end);
  }
  m.alphabet = Alphabet(symbols, end);
  NetworkShape shape;
  {
    std::istringstream ss(need("shape"));
    if (!(ss >> shape.n_state >> shape.n_input >> shape.n_read >> shape.n_action))
      throw std::invalid_argument("bad shape line");
  }
  m.weights = WeightSet(parse_weight_order(need("order")), shape,
                        parse_action_activation(need("action_activation")));
  m.epsilon = parse_double(need("epsilon"));
  m.rule = parse_classify_rule(need("classify"));
  if (header.count("pop_empty_rejects")) {
    const auto& v = header["pop_empty_rejects"];
    if (v != "true" && v != "false") throw std::invalid_argument("bad pop_empty_rejects value");
    m.pop_empty_rejects = v == "true";
  }

  auto fill = [&](const std::string& name, const std::vector<std::size_t>& dims,
                  std::span<double> dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("model file lacks tensor " + name);
    if (it->second.first != dims)
      throw std::invalid_argument("tensor " + name + " has wrong dimensions");
    std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
  };
  WeightSet& w = m.weights;
  fill("w_state", w_state_dims(w), w.w_state());
  fill("w_action", w_action_dims(w), w.w_action());
  fill("theta_s", {shape.n_state}, w.theta_s());
  if (w.has_theta_a()) {
    double ta = 0.0;
    fill("theta_a", {1}, std::span<double>(&ta, 1));
    w.set_theta_a(ta);
  }
  std::vector<double> s0(shape.n_state);
  fill("initial_state", {shape.n_state}, s0);
  w.set_initial_state(std::move(s0));
  w.check_finite();
  return m;
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  out << save_model_text(m);
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str());
}

}  // namespace nnpda
