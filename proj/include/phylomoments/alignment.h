#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "phylomoments/moments.h"
#include "phylomoments/phylogeny.h"

namespace phylomoments {

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Columns of tip observations.  `names[k]` labels entry k of every column.
struct Alignment {
  std::vector<std::string> names;
  std::vector<TipData> columns;
  int num_states = 4;

  auto num_sites() const -> int { return static_cast<int>(columns.size()); }
  auto num_rows() const -> int { return static_cast<int>(names.size()); }
};

// fasta and phylip hold nucleotides (A, C, G, T = states 0..3, IUPAC ambiguity codes,
// and -, ?, N for missing).  tokens holds one row per line: a name followed by
// whitespace-separated 1-based states, or ? for missing; it works for any m.
enum class AlignmentFormat { fasta, phylip, tokens };

auto parse_alignment_format(const std::string& name) -> AlignmentFormat;
// From the file extension; tokens for anything unrecognised.
auto guess_alignment_format(const std::string& path) -> AlignmentFormat;

auto read_alignment(std::istream& in, AlignmentFormat format, int num_states = 4) -> Alignment;
auto read_alignment_file(const std::string& path, AlignmentFormat format, int num_states = 4) -> Alignment;
void write_alignment(std::ostream& out, const Alignment& alignment, AlignmentFormat format);
void write_alignment_file(const std::string& path, const Alignment& alignment, AlignmentFormat format);

// Nucleotide character for a state set, and back.  Throws on unknown characters.
auto nucleotide_set(char c) -> StateSet;
auto nucleotide_char(StateSet s) -> char;

// Rows reordered to the phylogeny's tip order.  Throws naming the first tip that
// is missing from either side.
auto match_to_tree(const Alignment& alignment, const Phylogeny& phylo) -> Alignment;

}  // namespace phylomoments
