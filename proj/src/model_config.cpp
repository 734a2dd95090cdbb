#include "phylomoments/model_config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace phylomoments {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

auto words_of(const std::string& s) -> std::vector<std::string> {
  auto in = std::istringstream{s};
  auto out = std::vector<std::string>{};
  auto w = std::string{};
  while (in >> w) {
    out.push_back(w);
  }
  return out;
}

class Reader {
 public:
  Reader(std::map<std::string, Entry> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  auto has(const std::string& key) const -> bool { return entries_.count(key) > 0; }

  auto error(const std::string& key, const std::string& what) const -> std::runtime_error {
    const auto it = entries_.find(key);
    const auto where = it == entries_.end() ? source_ : source_ + ":" + std::to_string(it->second.line);
    return std::runtime_error(where + ": " + key + ": " + what);
  }

  auto text(const std::string& key, const std::string& fallback) const -> std::string {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  auto numbers(const std::string& key) const -> std::vector<double> {
    auto out = std::vector<double>{};
    for (const auto& w : words_of(entries_.at(key).value)) {
      auto v = 0.0;
      auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
      if (ec != std::errc{} || end != w.data() + w.size()) {
        throw error(key, "'" + w + "' is not a number");
      }
      out.push_back(v);
    }
    return out;
  }

  auto integer(const std::string& key, int fallback) const -> int {
    if (!has(key)) {
      return fallback;
    }
    const auto v = numbers(key);
    if (v.size() != 1 || v[0] != static_cast<int>(v[0])) {
      throw error(key, "expected one integer");
    }
    return static_cast<int>(v[0]);
  }

  auto boolean(const std::string& key, bool fallback) const -> bool {
    const auto v = text(key, fallback ? "true" : "false");
    if (v == "true" || v == "yes" || v == "1") {
      return true;
    }
    if (v == "false" || v == "no" || v == "0") {
      return false;
    }
    throw error(key, "expected true or false");
  }

  void check_known(std::initializer_list<const char*> keys) const {
    for (const auto& [k, e] : entries_) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* known) { return k == known; }) == keys.end()) {
        throw error(k, "unknown key");
      }
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  std::string source_;
};

auto trim(std::string s) -> std::string {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

auto read_model(const Reader& r, int m) -> RateModel {
  if (r.has("rates") || r.has("stationary")) {
    if (!r.has("rates") || !r.has("stationary")) {
      throw r.error(r.has("rates") ? "rates" : "stationary", "rates and stationary go together");
    }
    const auto q = r.numbers("rates");
    const auto pi = r.numbers("stationary");
    if (static_cast<int>(q.size()) != m * m) {
      throw r.error("rates", "expected " + std::to_string(m * m) + " numbers");
    }
    if (static_cast<int>(pi.size()) != m) {
      throw r.error("stationary", "expected " + std::to_string(m) + " numbers");
    }
    auto qm = Matrix{m, m};
    auto pv = Vector{m};
    for (auto i = 0; i < m; ++i) {
      pv[i] = pi[i];
      for (auto j = 0; j < m; ++j) {
        qm(i, j) = q[i * m + j];
      }
    }
    if (r.boolean("normalize", false)) {
      const auto rate = -(pv.array() * qm.diagonal().array()).sum();
      if (!(rate > 0.0)) {
        throw r.error("normalize", "cannot normalise a generator with zero mean rate");
      }
      qm /= rate;
    }
    try {
      return RateModel::from_rates(qm, pv);
    } catch (const ModelError& e) {
      throw r.error("rates", e.what());
    }
  }
  if (m != 4) {
    throw r.error("states", "models with states != 4 need 'rates' and 'stationary'");
  }
  const auto exch = r.has("exchangeabilities") ? r.numbers("exchangeabilities") : std::vector<double>(6, 1.0);
  const auto freqs = r.has("base_freqs") ? r.numbers("base_freqs") : std::vector<double>(4, 0.25);
  if (exch.size() != 6) {
    throw r.error("exchangeabilities", "expected 6 numbers (AC AG AT CG CT GT)");
  }
  if (freqs.size() != 4) {
    throw r.error("base_freqs", "expected 4 numbers (A C G T)");
  }
  try {
    return build_gtr(exch, freqs, r.boolean("normalize", true));
  } catch (const ModelError& e) {
    throw r.error("exchangeabilities", e.what());
  }
}

auto read_label(const Reader& r, int m) -> SummaryLabel {
  const auto kind = r.text("label", "counts");
  if (kind == "counts") {
    const auto words = words_of(r.text("label_pairs", "all"));
    if (words.size() == 1 && words[0] == "all") {
      return SummaryLabel::all_substitutions(m);
    }
    auto pairs = std::vector<std::pair<int, int>>{};
    for (const auto& w : words) {
      const auto dash = w.find('-');
      auto from = 0;
      auto to = 0;
      if (dash == std::string::npos ||
          std::from_chars(w.data(), w.data() + dash, from).ptr != w.data() + dash ||
          std::from_chars(w.data() + dash + 1, w.data() + w.size(), to).ptr != w.data() + w.size()) {
        throw r.error("label_pairs", "expected pairs like 1-2, got '" + w + "'");
      }
      pairs.emplace_back(from - 1, to - 1);
    }
    auto label = SummaryLabel::counts(std::move(pairs));
    try {
      label.validate(m);
    } catch (const ModelError& e) {
      throw r.error("label_pairs", e.what());
    }
    return label;
  }
  if (kind == "dwelling") {
    if (!r.has("state_mask")) {
      throw r.error("label", "dwelling times need state_mask");
    }
    auto mask = std::vector<int>{};
    for (auto v : r.numbers("state_mask")) {
      mask.push_back(static_cast<int>(v));
    }
    auto label = SummaryLabel::dwelling(std::move(mask));
    try {
      label.validate(m);
    } catch (const ModelError& e) {
      throw r.error("state_mask", e.what());
    }
    return label;
  }
  throw r.error("label", "expected counts or dwelling");
}

}  // namespace

auto parse_model_config(std::istream& in, const std::string& source) -> ModelConfig {
  auto entries = std::map<std::string, Entry>{};
  auto line = std::string{};
  auto line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (entries.count(key)) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    entries[key] = Entry{trim(line.substr(eq + 1)), line_no};
  }
  const auto r = Reader{std::move(entries), source};
  r.check_known({"states", "exchangeabilities", "base_freqs", "normalize", "rates", "stationary", "label",
                 "label_pairs", "state_mask"});
  const auto m = r.integer("states", 4);
  if (m < 2 || m > 32) {
    throw r.error("states", "must be between 2 and 32");
  }
  return ModelConfig{read_model(r, m), read_label(r, m)};
}

auto read_model_config(const std::string& path) -> ModelConfig {
  auto in = std::ifstream{path};
  if (!in) {
    throw std::runtime_error("cannot open model file '" + path + "'");
  }
  return parse_model_config(in, path);
}

auto default_model_config() -> ModelConfig {
  return ModelConfig{build_jc69(), SummaryLabel::all_substitutions(4)};
}

}  // namespace phylomoments
