#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdfold/checkpoint.hpp"
#include "pdfold/evaluation.hpp"
#include "pdfold/io.hpp"
#include "pdfold/oracle.hpp"
#include "pdfold/pipeline.hpp"
#include "pdfold/train.hpp"

namespace fs = std::filesystem;
using namespace pdfold;

namespace {

// stable exit codes: 0 ok, 1 usage, 2 model missing/unreadable,
// 3 input parse error, 4 other runtime failure
constexpr int kExitOk = 0;
constexpr int kExitModel = 2;
constexpr int kExitInput = 3;
constexpr int kExitRuntime = 4;

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string config_path;
    int threads = 1;
    nlohmann::json config;  // parsed --config file, possibly empty
};

void print_config_line(const std::string& subcommand,
                       const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cerr << "config: subcommand=" << subcommand;
    for (const auto& [k, v] : kv) std::cerr << " " << k << "=" << v;
    std::cerr << "\n";
}

std::string sanitize_filename(const std::string& id) {
    std::string out;
    for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    if (out.empty()) out = "seq";
    return out.substr(0, 80);
}

// Runs fn(i) for i in [0, n) over `threads` workers; results must be written
// to pre-sized slots so output order stays deterministic.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::vector<RnaSequence> load_input_sequences(const std::string& path) {
    const std::string text = read_text_file(path);
    std::string ext = fs::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    std::vector<RnaSequence> seqs;
    if (ext == ".ct") {
        seqs.push_back(parse_ct(text, path).seq);
    } else if (ext == ".bpseq") {
        seqs.push_back(parse_bpseq(text, path).seq);
    } else if (ext == ".dbn") {
        seqs.push_back(parse_dot_bracket(text, path).seq);
    } else {
        seqs = parse_fasta(text);
    }
    return seqs;
}

StructureRecord load_structure_file(const std::string& path) {
    const std::string text = read_text_file(path);
    std::string ext = fs::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ct") return parse_ct(text, path);
    if (ext == ".bpseq") return parse_bpseq(text, path);
    if (ext == ".dbn" || ext == ".dot") return parse_dot_bracket(text, path);
    throw ParseError("unrecognized structure format: " + path);
}

std::string serialize_structure(const StructureRecord& rec, const std::string& format) {
    if (format == "ct") return serialize_ct(rec);
    if (format == "bpseq") return serialize_bpseq(rec);
    if (format == "dbn") return to_dot_bracket(rec);
    throw std::invalid_argument("unknown output format: " + format);
}

int cmd_predict(const GlobalOpts& global, const std::string& model_path,
                const std::string& input_path, const std::string& out_dir,
                const std::string& out_format, bool classic, bool svg, double threshold) {
    print_config_line("predict", {{"model", model_path},
                                  {"input", input_path},
                                  {"out", out_dir},
                                  {"out_format", out_format},
                                  {"classic", classic ? "true" : "false"},
                                  {"svg", svg ? "true" : "false"},
                                  {"threshold", std::to_string(threshold)},
                                  {"threads", std::to_string(global.threads)}});
    Checkpoint ckpt;
    try {
        ckpt = load_checkpoint(model_path);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot load model: " << e.what() << "\n";
        return kExitModel;
    }

    std::vector<RnaSequence> seqs;
    try {
        seqs = load_input_sequences(input_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << input_path << ": " << e.what() << "\n";
        return kExitInput;
    }
    if (seqs.empty()) {
        std::cerr << "warning: no sequences in " << input_path << ", nothing to do\n";
        return kExitOk;
    }

    fs::create_directories(out_dir);
    PredictOptions opt;
    opt.classic = classic;
    opt.threshold = threshold;

    std::vector<Prediction> preds(seqs.size());
    std::vector<std::string> errors(seqs.size());
    parallel_for(static_cast<int>(seqs.size()), global.threads, [&](int i) {
        try {
            preds[i] = predict_structure(ckpt.score, ckpt.pp, seqs[i], opt);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    for (std::size_t i = 0; i < seqs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "error: " << seqs[i].id << ": " << errors[i] << "\n";
            return kExitRuntime;
        }
        const auto& pred = preds[i];
        StructureRecord rec;
        rec.seq = seqs[i];
        rec.pairs = pred.pairs;
        if (!validate_structure(pred.structure, seqs[i]).empty()) {
            std::cerr << "error: internal: invalid structure for " << seqs[i].id << "\n";
            return kExitRuntime;
        }
        const std::string stem =
            sanitize_filename(seqs[i].id.empty() ? "seq" + std::to_string(i) : seqs[i].id);
        const std::string path = (fs::path(out_dir) / (stem + "." + out_format)).string();
        write_text_file(path, serialize_structure(rec, out_format));
        if (svg)
            write_text_file((fs::path(out_dir) / (stem + ".svg")).string(),
                            arc_diagram_svg(rec));
        if (!pred.solver_converged)
            std::cerr << "warning: solver did not converge for " << seqs[i].id << "\n";
        std::cout << seqs[i].id << "\t" << seqs[i].length() << "\t" << pred.pairs.size() << "\t"
                  << path << "\n";
    }
    return kExitOk;
}

int cmd_train(const GlobalOpts& global, const std::string& data_dir,
              const std::string& out_path, const std::string& log_path) {
    TrainConfig cfg;
    if (global.config.contains("train"))
        cfg = TrainConfig::from_json(global.config.at("train").dump());
    else if (global.config.contains("epochs_pretrain"))
        cfg = TrainConfig::from_json(global.config.dump());
    cfg.seed = global.seed;

    print_config_line("train", {{"data", data_dir},
                                {"out", out_path},
                                {"seed", std::to_string(cfg.seed)},
                                {"epochs_pretrain", std::to_string(cfg.epochs_pretrain)},
                                {"epochs_finetune", std::to_string(cfg.epochs_finetune)},
                                {"learning_rate", std::to_string(cfg.learning_rate)},
                                {"max_len", std::to_string(cfg.max_len)}});

    DatasetIndex index;
    try {
        index = scan_dataset(data_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    if (index.records.empty()) {
        std::cerr << "error: no parsable records under " << data_dir << "\n";
        return kExitInput;
    }
    std::cerr << "dataset: " << index.records.size() << " records, "
              << index.family_counts.size() << " families, " << index.files_skipped
              << " files skipped\n";
    for (const auto& reason : index.skip_reasons) std::cerr << "  skipped: " << reason << "\n";

    auto split =
        stratified_split(index, cfg.frac_train, cfg.frac_valid, cfg.frac_test, cfg.seed);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "split: train=" << split.train.size() << " valid=" << split.valid.size()
              << " test=" << split.test.size() << "\n";

    try {
        std::vector<EpochLog> log;
        ScoreNetParams theta = pretrain(cfg, split.train, &log);
        FinetuneResult ft = finetune(cfg, split.train, split.valid, std::move(theta), cfg.pp);
        log.insert(log.end(), ft.log.begin(), ft.log.end());

        Checkpoint ckpt{std::move(ft.score), ft.pp, kBaseOrder, kPsiFamilyTag, cfg.to_json()};
        save_checkpoint(ckpt, out_path);
        const std::string log_text = format_training_log(log);
        const std::string lpath = log_path.empty() ? out_path + ".log" : log_path;
        write_text_file(lpath, log_text);
        std::cout << log_text;
        std::cerr << "checkpoint written to " << out_path << "\n";
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_eval(const GlobalOpts&, const std::string& pred_dir, const std::string& truth_dir,
             const std::string& records_path) {
    print_config_line("eval", {{"pred", pred_dir}, {"truth", truth_dir}});

    auto collect = [](const std::string& dir) {
        std::map<std::string, fs::path> by_stem;
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".ct" || ext == ".bpseq" || ext == ".dbn")
                by_stem[entry.path().stem().string()] = entry.path();
        }
        return by_stem;
    };

    std::map<std::string, fs::path> preds, truths;
    try {
        preds = collect(pred_dir);
        truths = collect(truth_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }

    std::vector<EvalInput> inputs;
    for (const auto& [stem, truth_path] : truths) {
        auto it = preds.find(stem);
        if (it == preds.end()) {
            std::cerr << "warning: no prediction for " << stem << ", skipped\n";
            continue;
        }
        try {
            StructureRecord truth = load_structure_file(truth_path.string());
            StructureRecord pred = load_structure_file(it->second.string());
            if (pred.seq.length() != truth.seq.length()) {
                std::cerr << "warning: length mismatch for " << stem << ", skipped\n";
                continue;
            }
            EvalInput in;
            in.id = stem;
            const auto rel = fs::relative(truth_path, truth_dir);
            in.family = rel.has_parent_path() ? rel.begin()->string() : "";
            in.length = truth.seq.length();
            in.pred = pred.pairs;
            in.truth = truth.pairs;
            inputs.push_back(std::move(in));
        } catch (const std::exception& e) {
            std::cerr << "warning: " << stem << ": " << e.what() << ", skipped\n";
        }
    }
    if (inputs.empty()) {
        std::cerr << "error: nothing to evaluate\n";
        return kExitInput;
    }

    EvalReport report = evaluate(inputs);
    std::cout << format_report_text(report);
    const std::string records = format_report_records(report);
    if (!records_path.empty()) {
        write_text_file(records_path, records);
        std::cerr << "per-sequence records written to " << records_path << "\n";
    } else {
        std::cout << "\n" << records;
    }
    return kExitOk;
}

int cmd_convert(const GlobalOpts&, const std::string& input_path, const std::string& to,
                const std::string& out_path) {
    print_config_line("convert", {{"input", input_path}, {"to", to}, {"out", out_path}});
    StructureRecord rec;
    try {
        rec = load_structure_file(input_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << input_path << ": " << e.what() << "\n";
        return kExitInput;
    }
    try {
        const std::string text = serialize_structure(rec, to);
        if (out_path.empty())
            std::cout << text;
        else
            write_text_file(out_path, text);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_oracle_check(const GlobalOpts& global, int trials, int min_len, int max_len,
                     double ratio_threshold) {
    print_config_line("oracle-check", {{"trials", std::to_string(trials)},
                                       {"min_len", std::to_string(min_len)},
                                       {"max_len", std::to_string(max_len)},
                                       {"seed", std::to_string(global.seed)},
                                       {"ratio", std::to_string(ratio_threshold)}});
    OracleTrialReport report;
    try {
        report = oracle_vs_solver_trials(trials, min_len, max_len, global.seed, ratio_threshold);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    int buckets[5] = {};
    for (double r : report.ratios) {
        if (r >= 0.999)
            buckets[0]++;
        else if (r >= 0.95)
            buckets[1]++;
        else if (r >= 0.9)
            buckets[2]++;
        else if (r >= 0.5)
            buckets[3]++;
        else
            buckets[4]++;
    }
    std::cout << "trials=" << report.trials << " pass_rate=" << report.pass_rate
              << " mean_ratio=" << report.mean_ratio << " min_ratio=" << report.min_ratio
              << "\n";
    std::cout << "ratio distribution: ~1.0:" << buckets[0] << "  [0.95,1):" << buckets[1]
              << "  [0.90,0.95):" << buckets[2] << "  [0.5,0.9):" << buckets[3]
              << "  <0.5:" << buckets[4] << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RNA secondary structure prediction via a learned score network and an "
                 "unrolled primal-dual decoder"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--seed", global.seed, "global random seed");
    app.add_option("--config", global.config_path, "JSON configuration file");
    app.add_option("--threads", global.threads, "worker threads for batch prediction");

    // predict
    std::string model_path, input_path, out_dir = "predictions", out_format = "ct";
    bool classic = false, svg = false;
    double threshold = 0.5;
    auto* predict = app.add_subcommand("predict", "predict structures for sequences");
    predict->add_option("input", input_path, "FASTA/CT/BPSEQ/DBN input file")->required();
    predict->add_option("--model", model_path, "model checkpoint")->required();
    predict->add_option("--out", out_dir, "output directory");
    predict->add_option("--out-format", out_format, "ct|bpseq|dbn")
        ->check(CLI::IsMember({"ct", "bpseq", "dbn"}));
    predict->add_flag("--classic", classic, "use the convergent solver instead of the unroll");
    predict->add_flag("--svg", svg, "also write arc-diagram SVGs");
    predict->add_option("--threshold", threshold, "rounding threshold");

    // train
    std::string data_dir, train_out = "model.json", train_log;
    auto* train = app.add_subcommand("train", "train a model on a CT/BPSEQ dataset");
    train->add_option("--data", data_dir, "dataset root directory")->required();
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--log", train_log, "training log path (default <out>.log)");

    // eval
    std::string pred_dir, truth_dir, records_path;
    auto* eval = app.add_subcommand("eval", "compare predictions against reference structures");
    eval->add_option("--pred", pred_dir, "directory of predicted structures")->required();
    eval->add_option("--truth", truth_dir, "directory of reference structures")->required();
    eval->add_option("--records", records_path, "write per-sequence key=value records here");

    // convert
    std::string conv_in, conv_to = "ct", conv_out;
    auto* convert = app.add_subcommand("convert", "transcode CT/BPSEQ/dot-bracket files");
    convert->add_option("input", conv_in, "input structure file")->required();
    convert->add_option("--to", conv_to, "ct|bpseq|dbn")
        ->check(CLI::IsMember({"ct", "bpseq", "dbn"}));
    convert->add_option("--out", conv_out, "output path (default stdout)");

    // oracle-check
    int trials = 200, min_len = 8, max_len = 12;
    double ratio_threshold = 0.95;
    auto* oracle_check =
        app.add_subcommand("oracle-check", "randomized solver-vs-exact-decoder comparison");
    oracle_check->add_option("--trials", trials, "number of random landscapes");
    oracle_check->add_option("--min-len", min_len, "minimum sequence length");
    oracle_check->add_option("--max-len", max_len, "maximum sequence length (<= 16)");
    oracle_check->add_option("--ratio", ratio_threshold, "per-trial pass threshold");

    CLI11_PARSE(app, argc, argv);

    if (!global.config_path.empty()) {
        try {
            global.config = nlohmann::json::parse(read_text_file(global.config_path));
        } catch (const std::exception& e) {
            std::cerr << "error: cannot read config " << global.config_path << ": " << e.what()
                      << "\n";
            return kExitInput;
        }
        if (global.config.contains("seed") && !app.count("--seed"))
            global.seed = global.config.at("seed").get<std::uint64_t>();
        if (global.config.contains("threads") && !app.count("--threads"))
            global.threads = global.config.at("threads").get<int>();
    }

    try {
        if (predict->parsed())
            return cmd_predict(global, model_path, input_path, out_dir, out_format, classic,
                               svg, threshold);
        if (train->parsed()) return cmd_train(global, data_dir, train_out, train_log);
        if (eval->parsed()) return cmd_eval(global, pred_dir, truth_dir, records_path);
        if (convert->parsed()) return cmd_convert(global, conv_in, conv_to, conv_out);
        if (oracle_check->parsed())
            return cmd_oracle_check(global, trials, min_len, max_len, ratio_threshold);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
