#include "pdfold/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pdfold {

namespace {

bool shift_hit(const std::pair<int, int>& p, const std::pair<int, int>& t) {
    return std::abs(p.first - t.first) + std::abs(p.second - t.second) <= 1;
}

double safe_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

Prf mean_prf(const std::vector<Prf>& v) {
    Prf m;
    if (v.empty()) return m;
    for (const auto& x : v) {
        m.precision += x.precision;
        m.recall += x.recall;
        m.f1 += x.f1;
    }
    m.precision /= v.size();
    m.recall /= v.size();
    m.f1 /= v.size();
    return m;
}

}  // namespace

Prf prf(const PairSet& pred, const PairSet& truth, bool allow_shift) {
    if (pred.empty() && truth.empty()) return {1.0, 1.0, 1.0};

    int hits = 0;
    if (!allow_shift) {
        for (const auto& p : pred.pairs())
            if (truth.contains(p.first, p.second)) ++hits;
    } else {
        std::vector<char> consumed(truth.size(), 0);
        for (const auto& p : pred.pairs()) {
            for (std::size_t k = 0; k < truth.size(); ++k) {
                if (consumed[k]) continue;
                if (shift_hit(p, truth.pairs()[k])) {
                    consumed[k] = 1;
                    ++hits;
                    break;
                }
            }
        }
    }

    Prf out;
    out.precision = pred.empty() ? 0.0 : static_cast<double>(hits) / pred.size();
    out.recall = truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size();
    out.f1 = safe_f1(out.precision, out.recall);
    return out;
}

PkConfusion pseudoknot_confusion(const std::vector<PairSet>& preds,
                                 const std::vector<PairSet>& truths) {
    if (preds.size() != truths.size())
        throw std::invalid_argument("pseudoknot_confusion: prediction/truth count mismatch");
    PkConfusion out;
    double set_f1_sum = 0.0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        const bool pk_pred = is_pseudoknotted(preds[k]);
        const bool pk_truth = is_pseudoknotted(truths[k]);
        if (pk_truth && pk_pred) ++out.tp;
        if (!pk_truth && pk_pred) ++out.fp;
        if (!pk_truth && !pk_pred) ++out.tn;
        if (pk_truth && !pk_pred) ++out.fn;
        if (pk_truth) {
            set_f1_sum += prf(preds[k], truths[k], false).f1;
            ++out.set_count;
        }
    }
    out.set_f1 = out.set_count > 0 ? set_f1_sum / out.set_count : 0.0;
    return out;
}

double length_weighted_f1(const std::vector<std::pair<int, double>>& per_seq) {
    if (per_seq.empty()) throw std::invalid_argument("length_weighted_f1: empty input");
    double num = 0.0, den = 0.0;
    for (const auto& [len, f1] : per_seq) {
        num += len * f1;
        den += len;
    }
    return num / den;
}

std::vector<FamilyRow> per_family_report(const std::vector<SeqEval>& rows) {
    std::map<std::string, std::vector<const SeqEval*>> groups;
    for (const auto& r : rows) groups[r.family].push_back(&r);
    std::vector<FamilyRow> out;
    for (const auto& [family, members] : groups) {
        FamilyRow row;
        row.family = family;
        row.count = static_cast<int>(members.size());
        std::vector<Prf> exact, shifted;
        for (const auto* m : members) {
            exact.push_back(m->exact);
            shifted.push_back(m->shifted);
        }
        row.exact = mean_prf(exact);
        row.shifted = mean_prf(shifted);
        out.push_back(std::move(row));
    }
    return out;
}

EvalReport evaluate(const std::vector<EvalInput>& inputs) {
    EvalReport report;
    std::vector<PairSet> preds, truths;
    std::vector<Prf> exact, shifted;
    std::vector<std::pair<int, double>> lw, lw_shifted;
    for (const auto& in : inputs) {
        SeqEval row;
        row.id = in.id;
        row.family = in.family;
        row.length = in.length;
        row.exact = prf(in.pred, in.truth, false);
        row.shifted = prf(in.pred, in.truth, true);
        row.pk_pred = is_pseudoknotted(in.pred);
        row.pk_truth = is_pseudoknotted(in.truth);
        exact.push_back(row.exact);
        shifted.push_back(row.shifted);
        lw.emplace_back(in.length, row.exact.f1);
        lw_shifted.emplace_back(in.length, row.shifted.f1);
        preds.push_back(in.pred);
        truths.push_back(in.truth);
        report.per_seq.push_back(std::move(row));
    }
    report.exact_mean = mean_prf(exact);
    report.shifted_mean = mean_prf(shifted);
    if (!inputs.empty()) {
        report.weighted_f1 = length_weighted_f1(lw);
        report.weighted_f1_shifted = length_weighted_f1(lw_shifted);
    }
    report.families = per_family_report(report.per_seq);
    report.pk = pseudoknot_confusion(preds, truths);
    return report;
}

std::string format_report_text(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    out << "sequences evaluated: " << report.per_seq.size() << "\n\n";
    out << std::left << std::setw(16) << "" << std::setw(8) << "prec" << std::setw(8) << "rec"
        << std::setw(8) << "f1" << std::setw(9) << "prec(s)" << std::setw(8) << "rec(s)"
        << std::setw(8) << "f1(s)" << "\n";
    auto line = [&](const std::string& label, const Prf& e, const Prf& s) {
        out << std::left << std::setw(16) << label << std::setw(8) << e.precision
            << std::setw(8) << e.recall << std::setw(8) << e.f1 << std::setw(9) << s.precision
            << std::setw(8) << s.recall << std::setw(8) << s.f1 << "\n";
    };
    line("overall", report.exact_mean, report.shifted_mean);
    for (const auto& fam : report.families)
        line(fam.family.empty() ? "(none)" : fam.family, fam.exact, fam.shifted);
    out << "\nlength-weighted f1: " << report.weighted_f1
        << "   shifted: " << report.weighted_f1_shifted << "\n";
    out << "pseudoknots: tp=" << report.pk.tp << " fp=" << report.pk.fp
        << " tn=" << report.pk.tn << " fn=" << report.pk.fn
        << "  set-f1=" << report.pk.set_f1 << " (n=" << report.pk.set_count << ")\n";
    return out.str();
}

std::string format_report_records(const EvalReport& report) {
    std::ostringstream out;
    out << std::setprecision(10);
    for (const auto& r : report.per_seq) {
        out << "id=" << r.id << " family=" << (r.family.empty() ? "-" : r.family)
            << " length=" << r.length << " precision=" << r.exact.precision
            << " recall=" << r.exact.recall << " f1=" << r.exact.f1
            << " precision_shift=" << r.shifted.precision << " recall_shift=" << r.shifted.recall
            << " f1_shift=" << r.shifted.f1 << " pk_pred=" << (r.pk_pred ? 1 : 0)
            << " pk_truth=" << (r.pk_truth ? 1 : 0) << "\n";
    }
    return out.str();
}

}  // namespace pdfold
