#include "pdfold/rna.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <stdexcept>

namespace pdfold {

RnaSequence RnaSequence::from_letters(std::string letters, std::string id,
                                      std::string family) {
    if (letters.empty()) throw std::invalid_argument("RnaSequence: empty sequence");
    RnaSequence s;
    s.id = std::move(id);
    s.family = std::move(family);
    s.letters.reserve(letters.size());
    s.code.reserve(letters.size());
    for (char raw : letters) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (c == 'T') c = 'U';
        int8_t code = kBaseAmbiguous;
        switch (c) {
            case 'A': code = kBaseA; break;
            case 'U': code = kBaseU; break;
            case 'C': code = kBaseC; break;
            case 'G': code = kBaseG; break;
            default:
                if (!std::isalpha(static_cast<unsigned char>(c)))
                    throw std::invalid_argument(std::string("RnaSequence: invalid symbol '") +
                                                raw + "'");
                break;
        }
        s.letters.push_back(c);
        s.code.push_back(code);
    }
    return s;
}

PairSet PairSet::from_pairs(std::vector<std::pair<int, int>> pairs) {
    PairSet p;
    for (auto& [i, j] : pairs) {
        if (i == j) throw std::invalid_argument("PairSet: self pair");
        if (i > j) std::swap(i, j);
        if (i < 0) throw std::invalid_argument("PairSet: negative index");
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    std::vector<int> seen;
    for (const auto& [i, j] : pairs) {
        seen.push_back(i);
        seen.push_back(j);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw std::invalid_argument("PairSet: index appears in more than one pair");
    p.pairs_ = std::move(pairs);
    return p;
}

bool PairSet::contains(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(pairs_.begin(), pairs_.end(), std::make_pair(i, j));
}

bool ConstraintMask::all_zero() const {
    for (std::size_t k = 0; k < entries.size(); ++k)
        if (entries[k] != 0.0) return false;
    return true;
}

bool bases_can_pair(int8_t a, int8_t b) {
    if (a == kBaseAmbiguous || b == kBaseAmbiguous) return false;
    const bool au = (a == kBaseA && b == kBaseU) || (a == kBaseU && b == kBaseA);
    const bool gc = (a == kBaseG && b == kBaseC) || (a == kBaseC && b == kBaseG);
    const bool gu = (a == kBaseG && b == kBaseU) || (a == kBaseU && b == kBaseG);
    return au || gc || gu;
}

ConstraintMask build_constraint_mask(const RnaSequence& seq) {
    const int L = seq.length();
    ConstraintMask m{Mat(L, L)};
    for (int i = 0; i < L; ++i) {
        for (int j = i + kMinPairDistance; j < L; ++j) {
            if (bases_can_pair(seq.code[i], seq.code[j])) {
                m.entries(i, j) = 1.0;
                m.entries(j, i) = 1.0;
            }
        }
    }
    return m;
}

Mat pair_transform(const Mat& ahat, const ConstraintMask& mask) {
    check_same_shape(ahat, mask.entries, "pair_transform");
    const int L = ahat.rows();
    Mat out(L, L);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const double sq_ij = ahat(i, j) * ahat(i, j);
            const double sq_ji = ahat(j, i) * ahat(j, i);
            out(i, j) = 0.5 * (sq_ij + sq_ji) * mask.entries(i, j);
        }
    }
    return out;
}

std::string Violation::describe() const {
    std::string where = " at (" + std::to_string(i) + "," + std::to_string(j) + ")";
    switch (kind) {
        case Kind::kNotBinary: return "non-binary entry" + where;
        case Kind::kAsymmetric: return "asymmetric entry" + where;
        case Kind::kPairType: return "non-pairable bases" + where;
        case Kind::kSharpLoop: return "sharp loop |i-j| < 4" + where;
        case Kind::kOverlap: return "overlapping pairs at index " + std::to_string(i);
    }
    return "unknown violation";
}

std::vector<Violation> validate_structure(const PairMatrix& a, const RnaSequence& seq) {
    const int L = seq.length();
    if (a.entries.rows() != L || a.entries.cols() != L)
        throw std::invalid_argument("validate_structure: matrix does not match sequence length");
    std::vector<Violation> out;
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const double v = a.entries(i, j);
            if (v != 0.0 && v != 1.0) {
                out.push_back({Violation::Kind::kNotBinary, i, j});
                return out;  // remaining checks assume a binary matrix
            }
        }
    }
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j)
            if (a.entries(i, j) != a.entries(j, i))
                out.push_back({Violation::Kind::kAsymmetric, i, j});
    for (int i = 0; i < L; ++i) {
        for (int j = i + 1; j < L; ++j) {
            if (a.entries(i, j) == 0.0) continue;
            if (!bases_can_pair(seq.code[i], seq.code[j]))
                out.push_back({Violation::Kind::kPairType, i, j});
            if (j - i < kMinPairDistance)
                out.push_back({Violation::Kind::kSharpLoop, i, j});
        }
    }
    for (int i = 0; i < L; ++i) {
        double s = 0.0;
        for (int j = 0; j < L; ++j) s += a.entries(i, j);
        if (s > 1.0) out.push_back({Violation::Kind::kOverlap, i, -1});
    }
    return out;
}

bool is_pseudoknotted(const PairSet& p) {
    const auto& v = p.pairs();
    for (std::size_t a = 0; a < v.size(); ++a) {
        for (std::size_t b = a + 1; b < v.size(); ++b) {
            const auto [i, j] = v[a];
            const auto [k, l] = v[b];
            if ((i < k && k < j && j < l) || (k < i && i < l && l < j)) return true;
        }
    }
    return false;
}

PairMatrix round_structure(const Mat& relaxed, const ConstraintMask& mask,
                           double threshold) {
    check_same_shape(relaxed, mask.entries, "round_structure");
    const int L = relaxed.rows();
    struct Cand {
        double value;
        int i, j;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j)
            if (mask.entries(i, j) != 0.0 && relaxed(i, j) >= threshold)
                cands.push_back({relaxed(i, j), i, j});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<char> used(L, 0);
    PairMatrix out{Mat(L, L), PairMatrix::Mode::kBinary};
    for (const auto& c : cands) {
        if (used[c.i] || used[c.j]) continue;
        used[c.i] = used[c.j] = 1;
        out.entries(c.i, c.j) = 1.0;
        out.entries(c.j, c.i) = 1.0;
    }
    return out;
}

PairSet matrix_to_pairs(const Mat& binary) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < binary.rows(); ++i)
        for (int j = i + 1; j < binary.cols(); ++j)
            if (binary(i, j) != 0.0) pairs.emplace_back(i, j);
    return PairSet::from_pairs(std::move(pairs));
}

Mat pairs_to_matrix(const PairSet& p, int length) {
    Mat m(length, length);
    for (const auto& [i, j] : p.pairs()) {
        if (j >= length) throw std::invalid_argument("pairs_to_matrix: index out of range");
        m(i, j) = 1.0;
        m(j, i) = 1.0;
    }
    return m;
}

}  // namespace pdfold
