#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdfold/mat.hpp"

namespace pdfold {

// Canonical base codes; this order fixes the one-hot column layout everywhere
// (checkpoints record it as "AUCG").
enum BaseCode : int8_t {
    kBaseA = 0,
    kBaseU = 1,
    kBaseC = 2,
    kBaseG = 3,
    kBaseAmbiguous = -1,
};

constexpr const char* kBaseOrder = "AUCG";

// An RNA primary sequence. Letters are stored upper-cased with T mapped to U;
// anything outside {A,U,C,G} is kept verbatim and flagged as ambiguous
// (code -1), never silently canonicalized.
struct RnaSequence {
    std::string id;
    std::string family;
    std::string letters;
    std::vector<int8_t> code;

    int length() const { return static_cast<int>(letters.size()); }

    static RnaSequence from_letters(std::string letters, std::string id = "",
                                    std::string family = "");
};

// A set of base pairs (i, j), 0-based, i < j, forming a matching: no index
// appears in more than one pair. Stored sorted for determinism.
class PairSet {
public:
    PairSet() = default;
    static PairSet from_pairs(std::vector<std::pair<int, int>> pairs);

    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    bool contains(int i, int j) const;

    bool operator==(const PairSet& o) const { return pairs_ == o.pairs_; }

private:
    std::vector<std::pair<int, int>> pairs_;
};

struct PairMatrix {
    enum class Mode { kRelaxed, kBinary };
    Mat entries;
    Mode mode = Mode::kRelaxed;
};

// Binary mask of admissible cells: 1 iff the two bases can pair (AU, UA, GC,
// CG, GU, UG) and |i - j| >= 4. Symmetric, zero diagonal band.
struct ConstraintMask {
    Mat entries;
    int length() const { return entries.rows(); }
    bool all_zero() const;
};

constexpr int kMinPairDistance = 4;

bool bases_can_pair(int8_t a, int8_t b);

ConstraintMask build_constraint_mask(const RnaSequence& seq);

// Squares, symmetrizes and masks a free matrix into a nonnegative symmetric
// pairing relaxation: 0.5*(H + H^T) o mask with H = ahat o ahat. Output may
// exceed 1 before clipping.
Mat pair_transform(const Mat& ahat, const ConstraintMask& mask);

struct Violation {
    enum class Kind { kNotBinary, kAsymmetric, kPairType, kSharpLoop, kOverlap };
    Kind kind;
    int i = -1;
    int j = -1;
    std::string describe() const;
};

// Checks a binary pairing matrix against the structural constraints; empty
// result means valid. Throws std::invalid_argument on dimension mismatch.
std::vector<Violation> validate_structure(const PairMatrix& a, const RnaSequence& seq);

// True iff some two pairs (i,j), (k,l) cross: i < k < j < l.
bool is_pseudoknotted(const PairSet& p);

// Thresholds a relaxed pairing matrix, then resolves residual row conflicts
// greedily by descending value (ties: smaller (i,j) first). The result is a
// valid matching over mask-admissible cells.
PairMatrix round_structure(const Mat& relaxed, const ConstraintMask& mask,
                           double threshold = 0.5);

PairSet matrix_to_pairs(const Mat& binary);
Mat pairs_to_matrix(const PairSet& p, int length);

}  // namespace pdfold
