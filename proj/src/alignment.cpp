#include "phylomoments/alignment.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace phylomoments {

namespace {

constexpr StateSet k_a = 1, k_c = 2, k_g = 4, k_t = 8;

// index = state set, value = IUPAC code
constexpr std::array<char, 16> k_codes = {'?', 'A', 'C', 'M', 'G', 'R', 'S', 'V',
                                          'T', 'W', 'Y', 'H', 'K', 'D', 'B', 'N'};

auto trim(std::string_view s) -> std::string_view {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

struct RawRows {
  std::vector<std::string> names;
  std::vector<std::vector<StateSet>> rows;
  std::vector<int> line;  // for messages
};

void check_names(const RawRows& raw) {
  auto seen = std::unordered_set<std::string>{};
  for (auto i = std::size_t{0}; i < raw.names.size(); ++i) {
    if (raw.names[i].empty()) {
      throw AlignmentError("line " + std::to_string(raw.line[i]) + ": empty sequence name");
    }
    if (!seen.insert(raw.names[i]).second) {
      throw AlignmentError("duplicate sequence name '" + raw.names[i] + "'");
    }
  }
}

auto to_columns(RawRows raw, int num_states) -> Alignment {
  check_names(raw);
  auto result = Alignment{};
  result.num_states = num_states;
  if (raw.rows.empty()) {
    return result;
  }
  const auto length = raw.rows.front().size();
  for (auto i = std::size_t{0}; i < raw.rows.size(); ++i) {
    if (raw.rows[i].size() != length) {
      throw AlignmentError("sequence '" + raw.names[i] + "' has length " + std::to_string(raw.rows[i].size()) +
                           ", expected " + std::to_string(length));
    }
  }
  result.names = std::move(raw.names);
  result.columns.resize(length);
  for (auto site = std::size_t{0}; site < length; ++site) {
    auto& col = result.columns[site].states;
    col.reserve(raw.rows.size());
    for (const auto& row : raw.rows) {
      col.push_back(row[site]);
    }
  }
  return result;
}

void append_nucleotides(std::string_view text, std::vector<StateSet>& row, int line) {
  for (auto c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      continue;
    }
    try {
      row.push_back(nucleotide_set(c));
    } catch (const AlignmentError& e) {
      throw AlignmentError("line " + std::to_string(line) + ": " + e.what());
    }
  }
}

auto read_fasta(std::istream& in) -> RawRows {
  auto raw = RawRows{};
  auto text = std::string{};
  auto line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    const auto line = trim(text);
    if (line.empty() || line.front() == ';') {
      continue;
    }
    if (line.front() == '>') {
      auto name = trim(line.substr(1));
      // the name is the first word; the rest is a description
      const auto space = name.find_first_of(" \t");
      raw.names.emplace_back(name.substr(0, space));
      raw.rows.emplace_back();
      raw.line.push_back(line_no);
      continue;
    }
    if (raw.rows.empty()) {
      throw AlignmentError("line " + std::to_string(line_no) + ": sequence data before the first '>' header");
    }
    append_nucleotides(line, raw.rows.back(), line_no);
  }
  return raw;
}

// Relaxed PHYLIP: header "ntax nchar", then one row per taxon with the name as the
// first whitespace-delimited word.  Interleaved blocks continue rows in order.
auto read_phylip(std::istream& in) -> RawRows {
  auto raw = RawRows{};
  auto text = std::string{};
  auto line_no = 0;
  auto ntax = -1;
  auto nchar = -1;
  while (ntax < 0 && std::getline(in, text)) {
    ++line_no;
    if (trim(text).empty()) {
      continue;
    }
    auto header = std::istringstream{text};
    if (!(header >> ntax >> nchar) || ntax < 0 || nchar < 0) {
      throw AlignmentError("line " + std::to_string(line_no) + ": PHYLIP header must give taxon and site counts");
    }
  }
  if (ntax < 0) {
    throw AlignmentError("empty PHYLIP file");
  }
  auto next = 0;
  while (std::getline(in, text)) {
    ++line_no;
    const auto line = trim(text);
    if (line.empty()) {
      continue;
    }
    if (static_cast<int>(raw.names.size()) < ntax) {
      const auto space = line.find_first_of(" \t");
      if (space == std::string_view::npos) {
        throw AlignmentError("line " + std::to_string(line_no) + ": expected a name followed by sequence data");
      }
      raw.names.emplace_back(line.substr(0, space));
      raw.rows.emplace_back();
      raw.line.push_back(line_no);
      append_nucleotides(line.substr(space), raw.rows.back(), line_no);
    } else {
      append_nucleotides(line, raw.rows[next], line_no);
      next = (next + 1) % ntax;
    }
  }
  if (static_cast<int>(raw.names.size()) != ntax) {
    throw AlignmentError("PHYLIP header promises " + std::to_string(ntax) + " taxa, found " +
                         std::to_string(raw.names.size()));
  }
  for (auto i = 0; i < ntax; ++i) {
    if (static_cast<int>(raw.rows[i].size()) != nchar) {
      throw AlignmentError("sequence '" + raw.names[i] + "' has " + std::to_string(raw.rows[i].size()) +
                           " sites, header says " + std::to_string(nchar));
    }
  }
  return raw;
}

auto read_tokens(std::istream& in, int num_states) -> RawRows {
  auto raw = RawRows{};
  auto text = std::string{};
  auto line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    const auto line = trim(text);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto words = std::istringstream{std::string{line}};
    auto name = std::string{};
    words >> name;
    raw.names.push_back(name);
    raw.rows.emplace_back();
    raw.line.push_back(line_no);
    auto token = std::string{};
    while (words >> token) {
      if (token == "?" || token == "-") {
        raw.rows.back().push_back(all_states(num_states));
        continue;
      }
      auto value = 0;
      auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc{} || end != token.data() + token.size() || value < 1 || value > num_states) {
        throw AlignmentError("line " + std::to_string(line_no) + ": bad state token '" + token + "' for " +
                             std::to_string(num_states) + " states");
      }
      raw.rows.back().push_back(single_state(value - 1));
    }
  }
  return raw;
}

auto row_chars(const Alignment& a, int row) -> std::string {
  auto s = std::string{};
  s.reserve(a.columns.size());
  for (const auto& col : a.columns) {
    s.push_back(nucleotide_char(col.states[row]));
  }
  return s;
}

void require_nucleotides(const Alignment& a) {
  if (a.num_states != 4) {
    throw AlignmentError("FASTA and PHYLIP output need 4 states; use the token format");
  }
}

}  // namespace

auto nucleotide_set(char c) -> StateSet {
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'A': return k_a;
    case 'C': return k_c;
    case 'G': return k_g;
    case 'T':
    case 'U': return k_t;
    case 'R': return k_a | k_g;
    case 'Y': return k_c | k_t;
    case 'S': return k_c | k_g;
    case 'W': return k_a | k_t;
    case 'K': return k_g | k_t;
    case 'M': return k_a | k_c;
    case 'B': return k_c | k_g | k_t;
    case 'D': return k_a | k_g | k_t;
    case 'H': return k_a | k_c | k_t;
    case 'V': return k_a | k_c | k_g;
    case 'N':
    case '?':
    case '-':
    case '.': return k_a | k_c | k_g | k_t;
    default: break;
  }
  throw AlignmentError(std::string{"unknown nucleotide character '"} + c + "'");
}

auto nucleotide_char(StateSet s) -> char {
  if (s == 0 || s > 15) {
    throw AlignmentError("state set does not describe a nucleotide");
  }
  return s == 15 ? '-' : k_codes[s];
}

auto parse_alignment_format(const std::string& name) -> AlignmentFormat {
  if (name == "fasta") {
    return AlignmentFormat::fasta;
  }
  if (name == "phylip") {
    return AlignmentFormat::phylip;
  }
  if (name == "tokens") {
    return AlignmentFormat::tokens;
  }
  throw AlignmentError("unknown alignment format '" + name + "' (fasta, phylip, tokens)");
}

auto guess_alignment_format(const std::string& path) -> AlignmentFormat {
  const auto dot = path.rfind('.');
  auto ext = dot == std::string::npos ? std::string{} : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "fasta" || ext == "fa" || ext == "fas" || ext == "fna") {
    return AlignmentFormat::fasta;
  }
  if (ext == "phy" || ext == "phylip") {
    return AlignmentFormat::phylip;
  }
  return AlignmentFormat::tokens;
}

auto read_alignment(std::istream& in, AlignmentFormat format, int num_states) -> Alignment {
  if (format != AlignmentFormat::tokens && num_states != 4) {
    throw AlignmentError("FASTA and PHYLIP input need 4 states; use the token format");
  }
  if (num_states < 2 || num_states > k_max_states) {
    throw AlignmentError("unsupported number of states");
  }
  switch (format) {
    case AlignmentFormat::fasta: return to_columns(read_fasta(in), 4);
    case AlignmentFormat::phylip: return to_columns(read_phylip(in), 4);
    case AlignmentFormat::tokens: return to_columns(read_tokens(in, num_states), num_states);
  }
  return {};
}

auto read_alignment_file(const std::string& path, AlignmentFormat format, int num_states) -> Alignment {
  auto in = std::ifstream{path};
  if (!in) {
    throw AlignmentError("cannot open alignment file '" + path + "'");
  }
  try {
    return read_alignment(in, format, num_states);
  } catch (const AlignmentError& e) {
    throw AlignmentError(path + ": " + e.what());
  }
}

void write_alignment(std::ostream& out, const Alignment& alignment, AlignmentFormat format) {
  switch (format) {
    case AlignmentFormat::fasta:
      require_nucleotides(alignment);
      for (auto r = 0; r < alignment.num_rows(); ++r) {
        out << '>' << alignment.names[r] << '\n' << row_chars(alignment, r) << '\n';
      }
      break;
    case AlignmentFormat::phylip:
      require_nucleotides(alignment);
      out << alignment.num_rows() << ' ' << alignment.num_sites() << '\n';
      for (auto r = 0; r < alignment.num_rows(); ++r) {
        out << alignment.names[r] << "  " << row_chars(alignment, r) << '\n';
      }
      break;
    case AlignmentFormat::tokens: {
      const auto full = all_states(alignment.num_states);
      for (auto r = 0; r < alignment.num_rows(); ++r) {
        out << alignment.names[r];
        for (const auto& col : alignment.columns) {
          const auto s = col.states[r];
          if (s == full) {
            out << " ?";
          } else if (std::has_single_bit(s)) {
            out << ' ' << std::countr_zero(s) + 1;
          } else {
            throw AlignmentError("token format cannot store partial ambiguity");
          }
        }
        out << '\n';
      }
      break;
    }
  }
}

void write_alignment_file(const std::string& path, const Alignment& alignment, AlignmentFormat format) {
  auto out = std::ofstream{path};
  if (!out) {
    throw AlignmentError("cannot write alignment file '" + path + "'");
  }
  write_alignment(out, alignment, format);
}

auto match_to_tree(const Alignment& alignment, const Phylogeny& phylo) -> Alignment {
  auto row_of = std::unordered_map<std::string, int>{};
  for (auto r = 0; r < alignment.num_rows(); ++r) {
    row_of.emplace(alignment.names[r], r);
  }
  for (const auto& name : alignment.names) {
    if (phylo.tip_index(name) == k_no_index) {
      throw AlignmentError("sequence '" + name + "' is not a tip of the tree");
    }
  }
  auto order = std::vector<int>{};
  for (const auto& tip : phylo.tip_names()) {
    auto it = row_of.find(tip);
    if (it == row_of.end()) {
      throw AlignmentError("tip '" + tip + "' has no sequence in the alignment");
    }
    order.push_back(it->second);
  }
  auto result = Alignment{};
  result.num_states = alignment.num_states;
  result.names = phylo.tip_names();
  result.columns.resize(alignment.columns.size());
  for (auto site = std::size_t{0}; site < alignment.columns.size(); ++site) {
    auto& col = result.columns[site].states;
    col.reserve(order.size());
    for (auto r : order) {
      col.push_back(alignment.columns[site].states[r]);
    }
  }
  return result;
}

}  // namespace phylomoments
