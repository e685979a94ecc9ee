#pragma once

#include <string>
#include <vector>

#include "pdfold/rna.hpp"

namespace pdfold {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Exact-set or one-position-shift precision/recall/F1. With shift on, a
// predicted pair matches a truth pair at Manhattan distance <= 1 on the
// normalized (i < j) representation, and each truth pair is consumable by at
// most one prediction (greedy in pair order). Both empty -> (1,1,1).
Prf prf(const PairSet& pred, const PairSet& truth, bool allow_shift);

struct PkConfusion {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    double set_f1 = 0.0;  // mean exact F1 over the truly pseudoknotted subset
    int set_count = 0;
};

PkConfusion pseudoknot_confusion(const std::vector<PairSet>& preds,
                                 const std::vector<PairSet>& truths);

// sum(L_i * f1_i) / sum(L_i); throws on empty input.
double length_weighted_f1(const std::vector<std::pair<int, double>>& per_seq);

struct EvalInput {
    std::string id;
    std::string family;
    int length = 0;
    PairSet pred, truth;
};

struct SeqEval {
    std::string id;
    std::string family;
    int length = 0;
    Prf exact, shifted;
    bool pk_pred = false, pk_truth = false;
};

struct FamilyRow {
    std::string family;
    int count = 0;
    Prf exact, shifted;  // per-family means
};

std::vector<FamilyRow> per_family_report(const std::vector<SeqEval>& rows);

struct EvalReport {
    std::vector<SeqEval> per_seq;
    Prf exact_mean, shifted_mean;
    double weighted_f1 = 0.0;
    double weighted_f1_shifted = 0.0;
    std::vector<FamilyRow> families;
    PkConfusion pk;
};

EvalReport evaluate(const std::vector<EvalInput>& inputs);

std::string format_report_text(const EvalReport& report);
// One "key=value ..." record per sequence, for downstream tooling.
std::string format_report_records(const EvalReport& report);

}  // namespace pdfold
