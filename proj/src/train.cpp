#include "pdfold/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pdfold/evaluation.hpp"
#include "pdfold/pipeline.hpp"

namespace pdfold {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs_pretrain < 0 || epochs_finetune < 0)
        throw std::invalid_argument("TrainConfig: negative epoch count");
    if (batch_size < 1 || accumulation_steps < 1)
        throw std::invalid_argument("TrainConfig: batch_size and accumulation_steps must be >= 1");
    if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: negative weight decay");
    if (grad_clip <= 0.0) throw std::invalid_argument("TrainConfig: grad_clip must be > 0");
    if (pp_lr_scale < 0.0) throw std::invalid_argument("TrainConfig: negative pp_lr_scale");
    if (max_len < 1) throw std::invalid_argument("TrainConfig: max_len must be >= 1");
    if (loss.gamma <= 0.0 || loss.gamma > 1.0)
        throw std::invalid_argument("TrainConfig: loss.gamma must be in (0,1]");
    if (loss.pos_weight <= 0.0) throw std::invalid_argument("TrainConfig: loss.pos_weight must be > 0");
    if (loss.mix < 0.0) throw std::invalid_argument("TrainConfig: loss.mix must be >= 0");
    pp.validate();
    score.validate();
    const double fsum = frac_train + frac_valid + frac_test;
    if (std::fabs(fsum - 1.0) > 1e-9)
        throw std::invalid_argument("TrainConfig: split fractions must sum to 1");
}

std::string TrainConfig::to_json() const {
    json j;
    j["epochs_pretrain"] = epochs_pretrain;
    j["epochs_finetune"] = epochs_finetune;
    j["batch_size"] = batch_size;
    j["accumulation_steps"] = accumulation_steps;
    j["learning_rate"] = learning_rate;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["grad_clip"] = grad_clip;
    j["pp_lr_scale"] = pp_lr_scale;
    j["seed"] = seed;
    j["max_len"] = max_len;
    j["learn_pp"] = learn_pp;
    j["fractions"] = {frac_train, frac_valid, frac_test};
    j["loss"] = {{"gamma", loss.gamma}, {"pos_weight", loss.pos_weight}, {"mix", loss.mix}};
    j["pp"] = {{"w", pp.w},
               {"s", pp.s},
               {"alpha", pp.alpha},
               {"beta", pp.beta},
               {"gamma_alpha", pp.gamma_alpha},
               {"gamma_beta", pp.gamma_beta},
               {"rho", pp.rho},
               {"unroll_depth", pp.unroll_depth},
               {"temperature", pp.temperature}};
    j["score"] = {{"d", score.d},
                  {"psi_count", score.psi_count},
                  {"encoder_layers", score.encoder_layers},
                  {"heads", score.heads},
                  {"ff_width", score.ff_width},
                  {"init_seed", score.init_seed}};
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("epochs_pretrain", c.epochs_pretrain);
    get("epochs_finetune", c.epochs_finetune);
    get("batch_size", c.batch_size);
    get("accumulation_steps", c.accumulation_steps);
    get("learning_rate", c.learning_rate);
    get("momentum", c.momentum);
    get("weight_decay", c.weight_decay);
    get("grad_clip", c.grad_clip);
    get("pp_lr_scale", c.pp_lr_scale);
    get("seed", c.seed);
    get("max_len", c.max_len);
    get("learn_pp", c.learn_pp);
    if (j.contains("fractions")) {
        const auto f = j.at("fractions").get<std::vector<double>>();
        if (f.size() != 3) throw std::invalid_argument("TrainConfig: fractions must have 3 entries");
        c.frac_train = f[0];
        c.frac_valid = f[1];
        c.frac_test = f[2];
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        if (l.contains("gamma")) c.loss.gamma = l.at("gamma").get<double>();
        if (l.contains("pos_weight")) c.loss.pos_weight = l.at("pos_weight").get<double>();
        if (l.contains("mix")) c.loss.mix = l.at("mix").get<double>();
    }
    if (j.contains("pp")) {
        const auto& p = j.at("pp");
        auto getp = [&](const char* key, auto& field) {
            if (p.contains(key)) field = p.at(key).get<std::decay_t<decltype(field)>>();
        };
        getp("w", c.pp.w);
        getp("s", c.pp.s);
        getp("alpha", c.pp.alpha);
        getp("beta", c.pp.beta);
        getp("gamma_alpha", c.pp.gamma_alpha);
        getp("gamma_beta", c.pp.gamma_beta);
        getp("rho", c.pp.rho);
        getp("unroll_depth", c.pp.unroll_depth);
        getp("temperature", c.pp.temperature);
    }
    if (j.contains("score")) {
        const auto& s = j.at("score");
        auto gets = [&](const char* key, auto& field) {
            if (s.contains(key)) field = s.at(key).get<std::decay_t<decltype(field)>>();
        };
        gets("d", c.score.d);
        gets("psi_count", c.score.psi_count);
        gets("encoder_layers", c.score.encoder_layers);
        gets("heads", c.score.heads);
        gets("ff_width", c.score.ff_width);
        gets("init_seed", c.score.init_seed);
    }
    c.validate();
    return c;
}

SplitResult stratified_split(const DatasetIndex& index, double frac_train, double frac_valid,
                             double frac_test, std::uint64_t seed) {
    if (std::fabs(frac_train + frac_valid + frac_test - 1.0) > 1e-9)
        throw std::invalid_argument("stratified_split: fractions must sum to 1");

    std::map<std::string, std::vector<int>> by_family;
    for (std::size_t k = 0; k < index.records.size(); ++k)
        by_family[index.records[k].seq.family].push_back(static_cast<int>(k));

    int parts = 1;
    if (frac_valid > 0.0) ++parts;
    if (frac_test > 0.0) ++parts;

    SplitResult out;
    std::mt19937_64 rng(seed);
    for (auto& [family, members] : by_family) {
        std::shuffle(members.begin(), members.end(), rng);
        const int n = static_cast<int>(members.size());
        if (n < parts) {
            for (int idx : members) out.train.push_back(index.records[idx]);
            out.warnings.push_back("family '" + family + "' has only " + std::to_string(n) +
                                   " records; all assigned to train");
            continue;
        }
        const int n_valid = static_cast<int>(std::floor(n * frac_valid));
        const int n_test = static_cast<int>(std::floor(n * frac_test));
        int pos = 0;
        for (int k = 0; k < n_valid; ++k) out.valid.push_back(index.records[members[pos++]]);
        for (int k = 0; k < n_test; ++k) out.test.push_back(index.records[members[pos++]]);
        for (; pos < n; ++pos) out.train.push_back(index.records[members[pos]]);
    }
    return out;
}

SamplingSchedule upsample_families(const std::vector<StructureRecord>& train,
                                   std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("upsample_families: empty training set");
    std::map<std::string, int> counts;
    for (const auto& r : train) counts[r.seq.family] += 1;
    SamplingSchedule sched;
    sched.seed = seed;
    sched.weights.resize(train.size());
    double total = 0.0;
    for (std::size_t k = 0; k < train.size(); ++k) {
        sched.weights[k] = 1.0 / counts[train[k].seq.family];
        total += sched.weights[k];
    }
    for (auto& w : sched.weights) w /= total;
    return sched;
}

std::vector<int> SamplingSchedule::epoch_indices(int epoch, int count) const {
    std::vector<double> cumulative(weights.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        cumulative[k] = acc;
    }
    cumulative.back() = 1.0;

    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<int> out(count);
    for (int k = 0; k < count; ++k) {
        const double u = uni(rng);
        out[k] = static_cast<int>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    }
    return out;
}

namespace {

using GradMap = std::map<std::string, Mat>;

struct Sgd {
    double lr, momentum, weight_decay, grad_clip;
    GradMap velocity;

    // Scale factor that caps the global L2 norm of the mean gradient.
    double clip_scale(const GradMap& grads, double inv_count) const {
        double sq = 0.0;
        for (const auto& [name, g] : grads)
            for (std::size_t k = 0; k < g.size(); ++k) sq += g[k] * g[k];
        const double norm = std::sqrt(sq) * inv_count;
        return norm > grad_clip ? grad_clip / norm : 1.0;
    }

    // Momentum step on one tensor from its accumulated gradient sum; the
    // accumulator is cleared afterwards.
    void step_tensor(const std::string& name, Mat& param, Mat& grad_sum, double scaled_inv,
                     bool decay) {
        auto it = velocity.find(name);
        if (it == velocity.end())
            it = velocity.emplace(name, Mat(grad_sum.rows(), grad_sum.cols())).first;
        Mat& v = it->second;
        const double wd = decay ? weight_decay : 0.0;
        for (std::size_t k = 0; k < grad_sum.size(); ++k) {
            v[k] = momentum * v[k] + (grad_sum[k] * scaled_inv + wd * param[k]);
            param[k] -= lr * v[k];
        }
        grad_sum.fill(0.0);
    }
};

bool is_bias(const std::string& name) { return name.find(".b") != std::string::npos; }

void accumulate_score_grads(ad::Tape& tape, ScoreNetVars& vars, GradMap& grads) {
    vars.for_each_var([&](const std::string& name, ad::Var v) {
        const Mat& g = tape.grad(v);
        if (!all_finite(g))
            throw TrainingDiverged("non-finite gradient for " + name +
                                   " (saturated attention or overflow)");
        auto it = grads.find(name);
        if (it == grads.end())
            it = grads.emplace(name, Mat(g.rows(), g.cols())).first;
        for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
    });
}

template <typename F>
void for_each_pp_var(PpVars& pv, F&& f) {
    f("pp.w", pv.w);
    f("pp.s", pv.s);
    f("pp.alpha", pv.alpha);
    f("pp.beta", pv.beta);
    f("pp.gamma_alpha", pv.gamma_alpha);
    f("pp.gamma_beta", pv.gamma_beta);
    f("pp.rho", pv.rho);
}

template <typename F>
void for_each_pp_field(PpParams& p, F&& f) {
    f("pp.w", p.w);
    f("pp.s", p.s);
    f("pp.alpha", p.alpha);
    f("pp.beta", p.beta);
    f("pp.gamma_alpha", p.gamma_alpha);
    f("pp.gamma_beta", p.gamma_beta);
    f("pp.rho", p.rho);
}

void accumulate_pp_grads(ad::Tape& tape, PpVars& pv, GradMap& grads) {
    for_each_pp_var(pv, [&](const std::string& name, ad::Var v) {
        const Mat& g = tape.grad(v);
        if (!all_finite(g)) throw TrainingDiverged("non-finite gradient for " + name);
        auto it = grads.find(name);
        if (it == grads.end()) it = grads.emplace(name, Mat(1, 1)).first;
        it->second(0, 0) += g(0, 0);
    });
}

std::vector<StructureRecord> filter_by_length(const std::vector<StructureRecord>& data,
                                              int max_len) {
    std::vector<StructureRecord> out;
    for (const auto& r : data)
        if (r.seq.length() <= max_len) out.push_back(r);
    return out;
}

}  // namespace

ScoreNetParams pretrain(const TrainConfig& config, const std::vector<StructureRecord>& data,
                        std::vector<EpochLog>* log) {
    config.validate();
    const auto records = filter_by_length(data, config.max_len);
    if (records.empty()) throw std::invalid_argument("pretrain: no records within max_len");

    ScoreNetParams params = ScoreNetParams::init(config.score);
    SamplingSchedule schedule = upsample_families(records, config.seed);
    Sgd opt{config.learning_rate, config.momentum, config.weight_decay, config.grad_clip, {}};
    GradMap grads;
    const int update_every = config.batch_size * config.accumulation_steps;

    for (int epoch = 0; epoch < config.epochs_pretrain; ++epoch) {
        const auto order = schedule.epoch_indices(epoch, static_cast<int>(records.size()));
        double epoch_loss = 0.0;
        int pending = 0;
        auto flush = [&]() {
            if (pending == 0) return;
            const double inv = 1.0 / pending;
            const double scaled_inv = inv * opt.clip_scale(grads, inv);
            params.for_each_tensor([&](const std::string& name, Mat& m) {
                auto it = grads.find(name);
                if (it != grads.end())
                    opt.step_tensor(name, m, it->second, scaled_inv, !is_bias(name));
            });
            pending = 0;
        };
        for (int idx : order) {
            const auto& rec = records[idx];
            ad::Tape tape;
            ScoreNetVars vars = lift_score_params(tape, params);
            ad::Var u = score_forward(tape, vars, params.config, rec.seq);
            const Mat astar = pairs_to_matrix(rec.pairs, rec.seq.length());
            ad::Var loss = weighted_bce(u, astar, config.loss.pos_weight);
            const double loss_value = tape.value(loss).scalar_value();
            if (!std::isfinite(loss_value))
                throw TrainingDiverged("pretrain: loss became non-finite at epoch " +
                                       std::to_string(epoch) + " on record " + rec.seq.id);
            epoch_loss += loss_value;
            tape.backward(loss);
            accumulate_score_grads(tape, vars, grads);
            if (++pending == update_every) flush();
        }
        flush();
        if (log != nullptr)
            log->push_back({epoch, "pretrain", epoch_loss / order.size(), -1.0});
    }
    return params;
}

FinetuneResult finetune(const TrainConfig& config, const std::vector<StructureRecord>& train,
                        const std::vector<StructureRecord>& valid, ScoreNetParams theta,
                        PpParams phi) {
    config.validate();
    const auto records = filter_by_length(train, config.max_len);
    if (records.empty()) throw std::invalid_argument("finetune: no records within max_len");

    FinetuneResult result;
    SamplingSchedule schedule = upsample_families(records, config.seed + 1);
    Sgd opt{config.learning_rate, config.momentum, config.weight_decay, config.grad_clip, {}};
    Sgd opt_phi{config.learning_rate * config.pp_lr_scale, config.momentum, 0.0,
                config.grad_clip, {}};
    GradMap grads;
    const int update_every = config.batch_size * config.accumulation_steps;

    for (int epoch = 0; epoch < config.epochs_finetune; ++epoch) {
        const auto order = schedule.epoch_indices(epoch, static_cast<int>(records.size()));
        double epoch_loss = 0.0;
        int pending = 0;
        auto flush = [&]() {
            if (pending == 0) return;
            const double inv = 1.0 / pending;
            const double scaled_inv = inv * opt.clip_scale(grads, inv);
            theta.for_each_tensor([&](const std::string& name, Mat& m) {
                auto it = grads.find(name);
                if (it != grads.end())
                    opt.step_tensor(name, m, it->second, scaled_inv, !is_bias(name));
            });
            if (config.learn_pp) {
                for_each_pp_field(phi, [&](const std::string& name, double& field) {
                    auto it = grads.find(name);
                    if (it == grads.end()) return;
                    Mat view(1, 1);
                    view(0, 0) = field;
                    opt_phi.step_tensor(name, view, it->second, scaled_inv, false);
                    field = view(0, 0);
                });
                phi.project();
            }
            pending = 0;
        };
        for (int idx : order) {
            const auto& rec = records[idx];
            ad::Tape tape;
            ScoreNetVars vars = lift_score_params(tape, theta);
            ad::Var u = score_forward(tape, vars, theta.config, rec.seq);
            const Mat astar = pairs_to_matrix(rec.pairs, rec.seq.length());

            ad::Var loss;
            PpVars pv;
            const bool has_pairs = !rec.pairs.empty();
            if (has_pairs) {
                pv = lift_pp_params(tape, phi);
                const ConstraintMask mask = build_constraint_mask(rec.seq);
                const auto traj = pp_unroll_tape(tape, u, mask, pv, phi);
                ad::Var tloss = trajectory_loss(traj, astar, config.loss.gamma);
                ad::Var bce = weighted_bce(u, astar, config.loss.pos_weight);
                loss = ad::add(tloss, ad::affine(bce, config.loss.mix, 0.0));
            } else {
                loss = weighted_bce(u, astar, config.loss.pos_weight);
            }
            const double loss_value = tape.value(loss).scalar_value();
            if (!std::isfinite(loss_value))
                throw TrainingDiverged("finetune: loss became non-finite at epoch " +
                                       std::to_string(epoch) + " on record " + rec.seq.id);
            epoch_loss += loss_value;
            tape.backward(loss);
            accumulate_score_grads(tape, vars, grads);
            if (config.learn_pp && has_pairs) accumulate_pp_grads(tape, pv, grads);
            if (++pending == update_every) flush();
        }
        flush();
        const double val = valid.empty() ? -1.0 : validation_f1(theta, phi, valid);
        result.log.push_back({epoch, "finetune", epoch_loss / order.size(), val});
    }
    result.score = std::move(theta);
    result.pp = phi;
    return result;
}

double validation_f1(const ScoreNetParams& score, const PpParams& pp,
                     const std::vector<StructureRecord>& records) {
    if (records.empty()) return 0.0;
    double total = 0.0;
    for (const auto& rec : records) {
        const Prediction pred = predict_structure(score, pp, rec.seq);
        total += prf(pred.pairs, rec.pairs, false).f1;
    }
    return total / records.size();
}

std::string format_training_log(const std::vector<EpochLog>& log) {
    std::ostringstream out;
    out << std::setprecision(10);
    for (const auto& e : log) {
        out << "phase=" << e.phase << " epoch=" << e.epoch << " loss=" << e.loss;
        if (e.val_f1 >= 0.0) out << " val_f1=" << e.val_f1;
        out << "\n";
    }
    return out.str();
}

}  // namespace pdfold
