#include "pdfold/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace pdfold {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream in(line);
    std::string t;
    while (in >> t) toks.push_back(t);
    return toks;
}

bool parse_int(const std::string& s, long& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stol(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

bool integer_led(const std::string& line) {
    long v;
    auto toks = tokenize(line);
    return !toks.empty() && parse_int(toks[0], v);
}

// Shared tail of the CT/BPSEQ parsers: 1-based partner array -> PairSet.
PairSet pairs_from_partner(const std::vector<long>& partner,
                           const std::vector<int>& line_no) {
    const long L = static_cast<long>(partner.size()) - 1;
    std::vector<std::pair<int, int>> pairs;
    for (long i = 1; i <= L; ++i) {
        const long j = partner[i];
        if (j == 0) continue;
        if (j < 1 || j > L)
            throw ParseError("pair index " + std::to_string(j) + " out of range", line_no[i]);
        if (j == i) throw ParseError("base paired with itself", line_no[i]);
        if (partner[j] != i)
            throw ParseError("asymmetric pairing: " + std::to_string(i) + " -> " +
                                 std::to_string(j) + " but " + std::to_string(j) + " -> " +
                                 std::to_string(partner[j]),
                             line_no[i]);
        if (i < j) pairs.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
    }
    return PairSet::from_pairs(std::move(pairs));
}

std::string basename_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

}  // namespace

StructureRecord parse_ct(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    std::size_t k = 0;
    while (k < lines.size() && !integer_led(lines[k])) ++k;
    if (k == lines.size()) throw ParseError("no header line with sequence length found");

    auto header = tokenize(lines[k]);
    long L;
    parse_int(header[0], L);
    if (L < 1) throw ParseError("non-positive sequence length", static_cast<int>(k + 1));
    std::string id;
    for (std::size_t t = 1; t < header.size(); ++t) {
        if (!id.empty()) id += " ";
        id += header[t];
    }
    if (id.empty()) id = basename_of(source);
    ++k;

    std::string letters(L, 'N');
    std::vector<long> partner(L + 1, 0);
    std::vector<int> line_no(L + 1, 0);
    std::vector<char> seen(L + 1, 0);
    long parsed = 0;
    for (; k < lines.size() && parsed < L; ++k) {
        const std::string line = trim(lines[k]);
        if (line.empty()) continue;
        auto toks = tokenize(line);
        long idx, pair_idx;
        if (toks.size() < 6 || !parse_int(toks[0], idx) || !parse_int(toks[4], pair_idx))
            throw ParseError("malformed record line '" + line + "'", static_cast<int>(k + 1));
        if (idx < 1 || idx > L)
            throw ParseError("base index " + std::to_string(idx) + " out of range",
                             static_cast<int>(k + 1));
        if (seen[idx])
            throw ParseError("duplicate base index " + std::to_string(idx),
                             static_cast<int>(k + 1));
        if (toks[1].size() != 1)
            throw ParseError("expected single-letter base, got '" + toks[1] + "'",
                             static_cast<int>(k + 1));
        seen[idx] = 1;
        letters[idx - 1] = toks[1][0];
        partner[idx] = pair_idx;
        line_no[idx] = static_cast<int>(k + 1);
        ++parsed;
    }
    if (parsed < L)
        throw ParseError("expected " + std::to_string(L) + " base lines, found " +
                         std::to_string(parsed));

    StructureRecord rec;
    rec.seq = RnaSequence::from_letters(letters, id);
    rec.pairs = pairs_from_partner(partner, line_no);
    rec.source = source;
    rec.format = "ct";
    return rec;
}

std::string serialize_ct(const StructureRecord& rec) {
    const int L = rec.seq.length();
    std::vector<int> partner(L + 1, 0);
    for (const auto& [i, j] : rec.pairs.pairs()) {
        partner[i + 1] = j + 1;
        partner[j + 1] = i + 1;
    }
    std::ostringstream out;
    out << L << " " << (rec.seq.id.empty() ? "structure" : rec.seq.id) << "\n";
    for (int i = 1; i <= L; ++i) {
        out << i << " " << rec.seq.letters[i - 1] << " " << (i - 1) << " "
            << (i < L ? i + 1 : 0) << " " << partner[i] << " " << i << "\n";
    }
    return out.str();
}

StructureRecord parse_bpseq(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    std::vector<long> idxs, pair_idxs;
    std::vector<char> bases;
    std::vector<int> lineno;
    bool in_body = false;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string line = trim(lines[k]);
        if (line.empty()) continue;
        if (!in_body && !integer_led(line)) continue;  // header comments
        in_body = true;
        auto toks = tokenize(line);
        long idx, pair_idx;
        if (toks.size() != 3 || !parse_int(toks[0], idx) || !parse_int(toks[2], pair_idx))
            throw ParseError("malformed record line '" + line + "'", static_cast<int>(k + 1));
        if (toks[1].size() != 1)
            throw ParseError("expected single-letter base, got '" + toks[1] + "'",
                             static_cast<int>(k + 1));
        idxs.push_back(idx);
        bases.push_back(toks[1][0]);
        pair_idxs.push_back(pair_idx);
        lineno.push_back(static_cast<int>(k + 1));
    }
    if (idxs.empty()) throw ParseError("no record lines found");

    const long L = static_cast<long>(idxs.size());
    std::string letters(L, 'N');
    std::vector<long> partner(L + 1, 0);
    std::vector<int> line_no(L + 1, 0);
    std::vector<char> seen(L + 1, 0);
    for (std::size_t k = 0; k < idxs.size(); ++k) {
        const long idx = idxs[k];
        if (idx < 1 || idx > L)
            throw ParseError("base index " + std::to_string(idx) +
                                 " out of range (expected 1.." + std::to_string(L) + ")",
                             lineno[k]);
        if (seen[idx]) throw ParseError("duplicate base index " + std::to_string(idx), lineno[k]);
        seen[idx] = 1;
        letters[idx - 1] = bases[k];
        partner[idx] = pair_idxs[k];
        line_no[idx] = lineno[k];
    }

    StructureRecord rec;
    rec.seq = RnaSequence::from_letters(letters, basename_of(source));
    rec.pairs = pairs_from_partner(partner, line_no);
    rec.source = source;
    rec.format = "bpseq";
    return rec;
}

std::string serialize_bpseq(const StructureRecord& rec) {
    const int L = rec.seq.length();
    std::vector<int> partner(L + 1, 0);
    for (const auto& [i, j] : rec.pairs.pairs()) {
        partner[i + 1] = j + 1;
        partner[j + 1] = i + 1;
    }
    std::ostringstream out;
    for (int i = 1; i <= L; ++i)
        out << i << " " << rec.seq.letters[i - 1] << " " << partner[i] << "\n";
    return out.str();
}

static constexpr const char* kOpen = "([{<";
static constexpr const char* kClose = ")]}>";
static constexpr int kMaxLayers = 4;

std::string dot_bracket_annotation(const PairSet& pairs, int length) {
    std::string s(length, '.');
    std::vector<std::vector<std::pair<int, int>>> layers(kMaxLayers);
    for (const auto& pr : pairs.pairs()) {
        if (pr.second >= length)
            throw std::invalid_argument("dot_bracket_annotation: pair index out of range");
        int assigned = -1;
        for (int layer = 0; layer < kMaxLayers && assigned < 0; ++layer) {
            bool crosses = false;
            for (const auto& q : layers[layer]) {
                const bool cross = (pr.first < q.first && q.first < pr.second && pr.second < q.second) ||
                                   (q.first < pr.first && pr.first < q.second && q.second < pr.second);
                if (cross) {
                    crosses = true;
                    break;
                }
            }
            if (!crosses) assigned = layer;
        }
        if (assigned < 0)
            throw std::runtime_error(
                "dot-bracket serialization: structure needs more than 4 crossing layers");
        layers[assigned].push_back(pr);
        s[pr.first] = kOpen[assigned];
        s[pr.second] = kClose[assigned];
    }
    return s;
}

std::string to_dot_bracket(const StructureRecord& rec) {
    std::ostringstream out;
    out << ">" << (rec.seq.id.empty() ? "structure" : rec.seq.id) << "\n"
        << rec.seq.letters << "\n"
        << dot_bracket_annotation(rec.pairs, rec.seq.length()) << "\n";
    return out.str();
}

StructureRecord parse_dot_bracket(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    std::string id, letters, structure;
    int structure_line = 0;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string line = trim(lines[k]);
        if (line.empty()) continue;
        if (line[0] == '>') {
            if (!letters.empty()) break;
            id = trim(line.substr(1));
        } else if (letters.empty()) {
            letters = line;
        } else if (structure.empty()) {
            structure = line;
            structure_line = static_cast<int>(k + 1);
        }
    }
    if (letters.empty()) throw ParseError("no sequence line found");
    if (structure.empty()) throw ParseError("no structure line found");
    if (structure.size() != letters.size())
        throw ParseError("structure length " + std::to_string(structure.size()) +
                             " does not match sequence length " + std::to_string(letters.size()),
                         structure_line);

    std::vector<std::pair<int, int>> pairs;
    std::vector<std::vector<int>> stacks(kMaxLayers);
    for (int i = 0; i < static_cast<int>(structure.size()); ++i) {
        const char c = structure[i];
        if (c == '.') continue;
        const char* open_pos = std::strchr(kOpen, c);
        const char* close_pos = std::strchr(kClose, c);
        if (open_pos) {
            stacks[open_pos - kOpen].push_back(i);
        } else if (close_pos) {
            auto& st = stacks[close_pos - kClose];
            if (st.empty())
                throw ParseError(std::string("unbalanced '") + c + "' at position " +
                                     std::to_string(i),
                                 structure_line);
            pairs.emplace_back(st.back(), i);
            st.pop_back();
        } else {
            throw ParseError(std::string("unexpected character '") + c + "' in structure",
                             structure_line);
        }
    }
    for (int layer = 0; layer < kMaxLayers; ++layer)
        if (!stacks[layer].empty())
            throw ParseError(std::string("unbalanced '") + kOpen[layer] + "' left open",
                             structure_line);

    StructureRecord rec;
    rec.seq = RnaSequence::from_letters(letters, id.empty() ? basename_of(source) : id);
    rec.pairs = PairSet::from_pairs(std::move(pairs));
    rec.source = source;
    rec.format = "dbn";
    return rec;
}

std::vector<RnaSequence> parse_fasta(const std::string& text) {
    const auto lines = split_lines(text);
    std::vector<RnaSequence> out;
    std::string id, body;
    bool have_record = false;
    auto flush = [&](int at_line) {
        if (!have_record) return;
        if (body.empty())
            throw ParseError("empty sequence body for record '" + id + "'", at_line);
        out.push_back(RnaSequence::from_letters(body, id));
        body.clear();
    };
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string line = trim(lines[k]);
        if (line.empty()) continue;
        if (line[0] == '>') {
            flush(static_cast<int>(k + 1));
            id = trim(line.substr(1));
            have_record = true;
        } else {
            if (!have_record) throw ParseError("sequence data before first header", static_cast<int>(k + 1));
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) body.push_back(c);
        }
    }
    flush(static_cast<int>(lines.size()));
    return out;
}

Mat one_hot(const RnaSequence& seq) {
    const int L = seq.length();
    Mat m(L, 4);
    for (int i = 0; i < L; ++i)
        if (seq.code[i] >= 0) m(i, seq.code[i]) = 1.0;
    return m;
}

DatasetIndex scan_dataset(const std::string& root_dir) {
    namespace fs = std::filesystem;
    DatasetIndex index;
    if (!fs::exists(root_dir)) throw std::runtime_error("dataset root not found: " + root_dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".ct" || ext == ".bpseq") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::set<std::pair<std::string, std::vector<std::pair<int, int>>>> seen;
    for (const auto& path : files) {
        std::string family;
        const auto rel = fs::relative(path, root_dir);
        if (rel.has_parent_path()) family = rel.begin()->string();
        try {
            const std::string text = read_text_file(path.string());
            std::string ext = path.extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            StructureRecord rec = ext == ".ct" ? parse_ct(text, path.string())
                                               : parse_bpseq(text, path.string());
            rec.seq.family = family;
            auto key = std::make_pair(rec.seq.letters, rec.pairs.pairs());
            if (!seen.insert(key).second) continue;
            index.family_counts[family] += 1;
            index.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            index.files_skipped += 1;
            index.skip_reasons.push_back(path.string() + ": " + e.what());
        }
    }
    return index;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

std::string arc_diagram_svg(const StructureRecord& rec) {
    const int L = rec.seq.length();
    const double step = 14.0, margin = 20.0;
    const double width = margin * 2 + step * (L - 1);
    double max_r = 0.0;
    for (const auto& [i, j] : rec.pairs.pairs()) max_r = std::max(max_r, (j - i) * step / 2.0);
    const double baseline = max_r + 30.0;
    const double height = baseline + 30.0;

    const auto& pairs = rec.pairs.pairs();
    auto crossing = [&](std::size_t a) {
        for (std::size_t b = 0; b < pairs.size(); ++b) {
            if (a == b) continue;
            const auto [i, j] = pairs[a];
            const auto [k, l] = pairs[b];
            if ((i < k && k < j && j < l) || (k < i && i < l && l < j)) return true;
        }
        return false;
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<style>.arc{fill:none;stroke:#333;stroke-width:1.5}"
        << ".pk{stroke:#8000c0;stroke-dasharray:4 2}"
        << ".base{font:10px monospace;text-anchor:middle}</style>\n";
    for (std::size_t a = 0; a < pairs.size(); ++a) {
        const auto [i, j] = pairs[a];
        const double x1 = margin + i * step, x2 = margin + j * step;
        const double r = (x2 - x1) / 2.0;
        out << "<path class=\"arc" << (crossing(a) ? " pk" : "") << "\" d=\"M " << x1 << " "
            << baseline << " A " << r << " " << r << " 0 0 1 " << x2 << " " << baseline
            << "\"/>\n";
    }
    for (int i = 0; i < L; ++i)
        out << "<text class=\"base\" x=\"" << margin + i * step << "\" y=\"" << baseline + 14
            << "\">" << rec.seq.letters[i] << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace pdfold
