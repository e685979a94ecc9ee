#include "pdfold/oracle.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "pdfold/ppnet.hpp"

namespace pdfold {

namespace {

struct Candidate {
    double weight;
    int i, j;
};

struct Search {
    const std::vector<Candidate>& cands;
    std::vector<double> suffix_sum;
    int length;
    long nodes = 0;
    double best = 0.0;
    std::vector<int> best_set, current;

    explicit Search(const std::vector<Candidate>& c, int L) : cands(c), length(L) {
        suffix_sum.assign(c.size() + 1, 0.0);
        for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k)
            suffix_sum[k] = suffix_sum[k + 1] + c[k].weight;
    }

    // Each pair contributes its weight to both endpoints' row maxima, so half
    // the sum of per-free-index maxima bounds what the remaining candidates
    // can still add.
    double row_max_bound(int from, unsigned used) const {
        double per_index[kExactDecodeMaxLen] = {};
        for (std::size_t k = from; k < cands.size(); ++k) {
            const auto& c = cands[k];
            if (used & (1u << c.i) || used & (1u << c.j)) continue;
            per_index[c.i] = std::max(per_index[c.i], c.weight);
            per_index[c.j] = std::max(per_index[c.j], c.weight);
        }
        double s = 0.0;
        for (int i = 0; i < length; ++i) s += per_index[i];
        return 0.5 * s;
    }

    void dfs(int k, unsigned used, double value) {
        ++nodes;
        if (value > best) {
            best = value;
            best_set = current;
        }
        if (k == static_cast<int>(cands.size())) return;
        if (value + suffix_sum[k] <= best) return;
        if (value + row_max_bound(k, used) <= best) return;

        const auto& c = cands[k];
        if (!(used & (1u << c.i)) && !(used & (1u << c.j))) {
            current.push_back(k);
            dfs(k + 1, used | (1u << c.i) | (1u << c.j), value + c.weight);
            current.pop_back();
        }
        dfs(k + 1, used, value);
    }
};

}  // namespace

OracleResult exact_decode(const Mat& u, double s, const ConstraintMask& mask) {
    const int L = mask.length();
    if (u.rows() != L || u.cols() != L)
        throw std::invalid_argument("exact_decode: score matrix does not match mask");
    if (L > kExactDecodeMaxLen)
        throw std::invalid_argument("exact_decode: length " + std::to_string(L) +
                                    " exceeds exhaustive bound " +
                                    std::to_string(kExactDecodeMaxLen));

    std::vector<Candidate> cands;
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j)
            if (mask.entries(i, j) != 0.0 && u(i, j) - s > 0.0)
                cands.push_back({u(i, j) - s, i, j});
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    Search search(cands, L);
    search.dfs(0, 0u, 0.0);

    std::vector<std::pair<int, int>> pairs;
    for (int k : search.best_set) pairs.emplace_back(cands[k].i, cands[k].j);
    OracleResult out;
    out.pairs = PairSet::from_pairs(std::move(pairs));
    out.objective = search.best;
    out.nodes_explored = search.nodes;
    return out;
}

OracleResult nested_decode(const Mat& u, double s, const ConstraintMask& mask) {
    const int L = mask.length();
    if (u.rows() != L || u.cols() != L)
        throw std::invalid_argument("nested_decode: score matrix does not match mask");

    auto weight = [&](int i, int j) { return u(i, j) - s; };
    auto usable = [&](int i, int j) {
        return mask.entries(i, j) != 0.0 && weight(i, j) > 0.0;
    };

    // best[i][j] over the closed interval [i, j]; -1 as "right end unpaired",
    // otherwise the chosen partner k of j.
    std::vector<std::vector<double>> best(L, std::vector<double>(L, 0.0));
    std::vector<std::vector<int>> choice(L, std::vector<int>(L, -1));
    for (int span = kMinPairDistance; span < L; ++span) {
        for (int i = 0; i + span < L; ++i) {
            const int j = i + span;
            double v = best[i][j - 1];
            int c = -1;
            for (int k = i; k <= j - kMinPairDistance; ++k) {
                if (!usable(k, j)) continue;
                const double cand = (k > i ? best[i][k - 1] : 0.0) + weight(k, j) +
                                    (k + 1 <= j - 1 ? best[k + 1][j - 1] : 0.0);
                if (cand > v) {
                    v = cand;
                    c = k;
                }
            }
            best[i][j] = v;
            choice[i][j] = c;
        }
    }

    std::vector<std::pair<int, int>> pairs;
    long visited = 0;
    std::vector<std::pair<int, int>> stack{{0, L - 1}};
    while (!stack.empty()) {
        auto [i, j] = stack.back();
        stack.pop_back();
        ++visited;
        if (i >= j || j - i < kMinPairDistance) continue;
        const int k = choice[i][j];
        if (k < 0) {
            stack.emplace_back(i, j - 1);
        } else {
            pairs.emplace_back(k, j);
            if (k > i) stack.emplace_back(i, k - 1);
            if (k + 1 <= j - 1) stack.emplace_back(k + 1, j - 1);
        }
    }

    OracleResult out;
    out.pairs = PairSet::from_pairs(std::move(pairs));
    out.objective = L > 0 ? best[0][L - 1] : 0.0;
    out.nodes_explored = visited;
    return out;
}

OracleTrialReport oracle_vs_solver_trials(int trials, int min_len, int max_len,
                                          std::uint64_t seed, double ratio_threshold) {
    if (max_len > kExactDecodeMaxLen)
        throw std::invalid_argument("oracle_vs_solver_trials: max_len exceeds the exact bound");
    if (min_len < 1 || min_len > max_len)
        throw std::invalid_argument("oracle_vs_solver_trials: bad length range");

    static const char alphabet[] = "AUCG";
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 3);
    const PpParams hyper;  // defaults
    std::uniform_real_distribution<double> noise(-1.0, 3.0);

    OracleTrialReport report;
    report.trials = trials;
    double ratio_sum = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        std::uniform_int_distribution<int> len_dist(min_len, max_len);
        const int L = len_dist(rng);
        std::string letters;
        for (int i = 0; i < L; ++i) letters.push_back(alphabet[pick(rng)]);
        const auto seq = RnaSequence::from_letters(letters, "trial" + std::to_string(trial));
        const auto mask = build_constraint_mask(seq);

        Mat u = Mat::full(L, L, hyper.s - 2.0);
        for (int i = 0; i < L; ++i) {
            for (int j = i + 1; j < L; ++j) {
                if (mask.entries(i, j) == 0.0) continue;
                const double v = hyper.s + noise(rng);
                u(i, j) = v;
                u(j, i) = v;
            }
        }

        const auto exact = exact_decode(u, hyper.s, mask);
        const auto solved = pp_solve_convergent(u, mask, hyper);
        double solver_obj = 0.0;
        for (const auto& [i, j] : solved.pairs.pairs()) solver_obj += u(i, j) - hyper.s;

        double ratio;
        if (exact.objective <= 1e-12)
            ratio = solver_obj >= -1e-12 ? 1.0 : 0.0;
        else
            ratio = solver_obj / exact.objective;
        report.ratios.push_back(ratio);
        ratio_sum += ratio;
        report.min_ratio = std::min(report.min_ratio, ratio);
        if (ratio >= ratio_threshold) ++report.passed;
    }
    report.pass_rate = trials > 0 ? static_cast<double>(report.passed) / trials : 0.0;
    report.mean_ratio = trials > 0 ? ratio_sum / trials : 0.0;
    return report;
}

}  // namespace pdfold
