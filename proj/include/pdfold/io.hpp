#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdfold/rna.hpp"

namespace pdfold {

// Parse failure with the 1-based line where it happened (0 = whole input).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : message),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct StructureRecord {
    RnaSequence seq;
    PairSet pairs;
    std::string source;  // file path or caller-supplied tag
    std::string format;  // "ct", "bpseq", "dbn"
};

// Connectivity table: a header line starting with the length, then one line
// per base "idx base prev next pair idx" (1-based, pair 0 = unpaired).
// Comment lines before the first integer-led line are skipped.
StructureRecord parse_ct(const std::string& text, const std::string& source = "");
std::string serialize_ct(const StructureRecord& rec);

// BPSEQ: one line per base "idx base pair" (1-based, 0 = unpaired).
StructureRecord parse_bpseq(const std::string& text, const std::string& source = "");
std::string serialize_bpseq(const StructureRecord& rec);

// Extended dot-bracket: nested pairs use (), crossing layers [], {}, <>;
// assignment is greedy first-fit. More than 4 mutually crossing layers is an
// error. Serialized form is ">id\nSEQUENCE\nSTRUCTURE\n".
std::string to_dot_bracket(const StructureRecord& rec);
std::string dot_bracket_annotation(const PairSet& pairs, int length);
StructureRecord parse_dot_bracket(const std::string& text, const std::string& source = "");

std::vector<RnaSequence> parse_fasta(const std::string& text);

// L x 4 one-hot encoding, column order A,U,C,G; ambiguity rows are all-zero.
Mat one_hot(const RnaSequence& seq);

struct DatasetIndex {
    std::vector<StructureRecord> records;
    std::map<std::string, int> family_counts;
    int files_skipped = 0;
    std::vector<std::string> skip_reasons;
};

// Recursively ingests CT/BPSEQ files under root. The family label is the
// first path component below root ("" for files directly in root). Records
// are deduplicated on exact (sequence letters, pair set) identity and kept in
// sorted-path order. Unreadable or malformed files are skipped and counted.
DatasetIndex scan_dataset(const std::string& root_dir);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Arc diagram of a predicted structure: bases on a baseline, pairs as
// semicircular arcs, crossing pairs in a distinct stroke class.
std::string arc_diagram_svg(const StructureRecord& rec);

}  // namespace pdfold
