#include "routecal/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "routecal/errors.hpp"

namespace routecal {

using json = nlohmann::json;

namespace {

std::vector<double> to_reals(const json& j, const char* field) {
    if (!j.is_array()) throw InputError(fmt::format("'{}' must be an array", field));
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw InputError(fmt::format("'{}' must contain numbers", field));
        out.push_back(v.get<double>());
    }
    return out;
}

std::size_t to_label(const json& j) {
    if (!j.is_number_integer() || j.get<long long>() < 0) {
        throw InputError("'label' must be a non-negative integer");
    }
    return j.get<std::size_t>();
}

std::vector<RoutingMatrix> to_alpha(const json& j) {
    if (!j.is_array()) throw InputError("'alpha' must be an array of layers");
    std::vector<RoutingMatrix> layers;
    for (const auto& layer : j) {
        if (!layer.is_array() || layer.empty()) throw InputError("alpha layer must be a non-empty T x N array");
        RoutingMatrix m;
        m.tokens = layer.size();
        for (const auto& row : layer) {
            auto values = to_reals(row, "alpha");
            if (m.positions == 0) m.positions = values.size();
            if (values.size() != m.positions) throw InputError("alpha layer has ragged rows");
            m.values.insert(m.values.end(), values.begin(), values.end());
        }
        layers.push_back(std::move(m));
    }
    return layers;
}

PredictionRecord parse_record(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw InputError(fmt::format("malformed JSON: {}", e.what()));
    }
    if (!j.is_object()) throw InputError("record must be a JSON object");
    for (const char* required : {"id", "logits", "label"}) {
        if (!j.contains(required)) throw InputError(fmt::format("missing field '{}'", required));
    }
    PredictionRecord rec;
    if (!j["id"].is_string()) throw InputError("'id' must be a string");
    rec.id = j["id"].get<std::string>();
    rec.logits = to_reals(j["logits"], "logits");
    rec.label = to_label(j["label"]);
    if (j.contains("entropy_profile") && !j["entropy_profile"].is_null()) {
        rec.entropy_profile = to_reals(j["entropy_profile"], "entropy_profile");
    }
    if (j.contains("alpha") && !j["alpha"].is_null()) rec.alpha = to_alpha(j["alpha"]);
    return rec;
}

// Per-line checks so that a violation is reported against its line.
class LineChecker {
public:
    void check(const PredictionRecord& rec, std::size_t line) {
        try {
            validate_record(rec);
            const std::size_t k = rec.logits.size();
            std::size_t l = 0;
            if (rec.alpha) {
                l = rec.alpha->size();
            } else if (rec.entropy_profile) {
                l = rec.entropy_profile->size();
            }
            if (first_) {
                k_ = k;
                l_ = l;
                first_ = false;
            } else if (k != k_) {
                throw InputError(fmt::format("K={} differs from K={} of first record", k, k_));
            } else if (l != l_) {
                throw InputError(fmt::format("L={} differs from L={} of first record", l, l_));
            }
            if (!ids_.insert(rec.id).second) throw InputError(fmt::format("duplicate id '{}'", rec.id));
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line, e.what()), line);
        } catch (const ComputeError& e) {
            throw InputError(fmt::format("line {}: {}", line, e.what()), line);
        }
    }

private:
    bool first_ = true;
    std::size_t k_ = 0;
    std::size_t l_ = 0;
    std::unordered_set<std::string> ids_;
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw InputError(fmt::format("not a number: '{}'", s));
    return v;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t") == std::string::npos;
}

json record_to_json(const PredictionRecord& rec) {
    json j;
    j["id"] = rec.id;
    j["logits"] = rec.logits;
    j["label"] = rec.label;
    if (rec.entropy_profile) j["entropy_profile"] = *rec.entropy_profile;
    if (rec.alpha) {
        json layers = json::array();
        for (const auto& m : *rec.alpha) {
            json rows = json::array();
            for (std::size_t t = 0; t < m.tokens; ++t) {
                rows.push_back(std::vector<double>(m.values.begin() + static_cast<std::ptrdiff_t>(t * m.positions),
                                                   m.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * m.positions)));
            }
            layers.push_back(std::move(rows));
        }
        j["alpha"] = std::move(layers);
    }
    return j;
}

}  // namespace

Dataset read_jsonl(std::istream& in) {
    std::vector<PredictionRecord> records;
    LineChecker checker;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (blank(line)) continue;
        PredictionRecord rec;
        try {
            rec = parse_record(line);
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        }
        checker.check(rec, line_no);
        records.push_back(std::move(rec));
    }
    return Dataset(std::move(records));
}

void write_jsonl(std::ostream& out, const Dataset& data) {
    for (const auto& rec : data.records()) out << record_to_json(rec).dump() << '\n';
}

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) return Dataset{};
    strip_cr(line);
    const auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "id" || header[1] != "label") {
        throw InputError("line 1: CSV header must start with id,label,logit_0,logit_1", 1);
    }
    std::size_t k = 0;
    std::size_t l = 0;
    for (std::size_t c = 2; c < header.size(); ++c) {
        if (header[c] == fmt::format("logit_{}", k) && l == 0) {
            ++k;
        } else if (header[c] == fmt::format("h_{}", l)) {
            ++l;
        } else {
            throw InputError(fmt::format("line 1: unexpected CSV column '{}'", header[c]), 1);
        }
    }

    std::vector<PredictionRecord> records;
    LineChecker checker;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (blank(line)) continue;
        PredictionRecord rec;
        try {
            const auto cells = split_csv(line);
            if (cells.size() != header.size()) {
                throw InputError(fmt::format("expected {} columns, got {}", header.size(), cells.size()));
            }
            rec.id = cells[0];
            const double label = parse_double(cells[1]);
            if (label < 0 || label != static_cast<double>(static_cast<std::size_t>(label))) {
                throw InputError("'label' must be a non-negative integer");
            }
            rec.label = static_cast<std::size_t>(label);
            for (std::size_t c = 0; c < k; ++c) rec.logits.push_back(parse_double(cells[2 + c]));
            if (l > 0) {
                rec.entropy_profile.emplace();
                for (std::size_t c = 0; c < l; ++c) rec.entropy_profile->push_back(parse_double(cells[2 + k + c]));
            }
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        }
        checker.check(rec, line_no);
        records.push_back(std::move(rec));
    }
    return Dataset(std::move(records));
}

void write_csv(std::ostream& out, const Dataset& data) {
    out << "id,label";
    for (std::size_t c = 0; c < data.class_count(); ++c) out << ",logit_" << c;
    for (std::size_t c = 0; c < data.layer_count(); ++c) out << ",h_" << c;
    out << '\n';
    for (const auto& rec : data.records()) {
        out << rec.id << ',' << rec.label;
        for (double z : rec.logits) out << ',' << fmt::format("{}", z);
        if (rec.entropy_profile) {
            for (double h : *rec.entropy_profile) out << ',' << fmt::format("{}", h);
        }
        out << '\n';
    }
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    if (path.extension() == ".csv") return read_csv(in);
    return read_jsonl(in);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    if (path.extension() == ".csv") {
        write_csv(out, data);
    } else {
        write_jsonl(out, data);
    }
}

std::vector<ProbabilityRecord> read_probability_jsonl(std::istream& in) {
    std::vector<ProbabilityRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (blank(line)) continue;
        try {
            const json j = json::parse(line);
            ProbabilityRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.label = to_label(j.at("label"));
            rec.probs = to_reals(j.at("probs"), "probs");
            if (j.contains("entropy_profile")) rec.entropy_profile = to_reals(j["entropy_profile"], "entropy_profile");
            if (rec.probs.size() < 2 || rec.label >= rec.probs.size()) throw InputError("bad probs/label");
            out.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        } catch (const InputError& e) {
            throw InputError(fmt::format("line {}: {}", line_no, e.what()), line_no);
        }
    }
    return out;
}

void write_probability_jsonl(std::ostream& out, const std::vector<ProbabilityRecord>& records) {
    for (const auto& rec : records) {
        json j;
        j["id"] = rec.id;
        j["label"] = rec.label;
        j["probs"] = rec.probs;
        if (!rec.entropy_profile.empty()) j["entropy_profile"] = rec.entropy_profile;
        out << j.dump() << '\n';
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace routecal
