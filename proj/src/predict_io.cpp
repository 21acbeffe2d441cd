#include <bit>
#include <fstream>
#include <sstream>

#include "pairforge/predict.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_tensor(std::string& out, const Eigen::VectorXd& v) {
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    put_u32(out, 1);
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    std::uint64_t uint(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint(8)); }
    std::string bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Eigen::VectorXd tensor() {
        const auto rows = uint(4), cols = uint(4);
        if (cols != 1) throw Error(ErrorCode::BadFormat, "checkpoint tensor is not a column");
        Eigen::VectorXd v(static_cast<Eigen::Index>(rows));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorCode::BadFormat, "truncated checkpoint");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string history_tsv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch\ttrain_loss\tvalidation_loss\tvalidation_mcc\tvalidation_threshold\n";
    for (const auto& h : history)
        out += std::to_string(h.epoch) + "\t" + text::format_double(h.train_loss) + "\t" +
               text::format_double(h.validation_loss) + "\t" + text::format_double(h.validation_mcc) + "\t" +
               text::format_double(h.validation_threshold) + "\n";
    return out;
}

void write_checkpoint(const std::string& path, const TrainedModel& m) {
    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    auto spec = to_json(m.spec);
    spec["input_dim"] = m.input_dim;
    const auto spec_text = spec.dump();
    put_u64(out, spec_text.size());
    out += spec_text;
    put_u32(out, 3);
    put_tensor(out, m.params);
    put_tensor(out, m.input_mean);
    put_tensor(out, m.input_scale);
    put_f64(out, m.calibration_temperature);
    put_f64(out, m.decision_threshold);
    text::write_file(path, out);
    text::write_file(path + ".history.tsv", history_tsv(m.history));
}

TrainedModel read_checkpoint(const std::string& path) {
    Reader r(text::read_file(path));
    if (r.bytes(4) != std::string(kMagic, 4)) throw Error(ErrorCode::BadFormat, path + ": not a model checkpoint");
    if (const auto v = r.uint(4); v != kVersion)
        throw Error(ErrorCode::BadFormat, path + ": unsupported checkpoint version " + std::to_string(v));
    const auto spec_len = r.uint(8);
    nlohmann::json spec_json;
    try {
        spec_json = nlohmann::json::parse(r.bytes(spec_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, e.what());
    }
    TrainedModel m = build_model(model_spec_from_json(spec_json), spec_json.at("input_dim").get<std::size_t>());
    if (r.uint(4) != 3) throw Error(ErrorCode::BadFormat, "unexpected tensor count");
    auto params = r.tensor();
    if (params.size() != m.params.size()) throw Error(ErrorCode::BadFormat, "parameter count does not match the spec");
    m.params = std::move(params);
    m.input_mean = r.tensor();
    m.input_scale = r.tensor();
    if (static_cast<std::size_t>(m.input_mean.size()) != m.input_dim ||
        static_cast<std::size_t>(m.input_scale.size()) != m.input_dim)
        throw Error(ErrorCode::BadFormat, "standardization width does not match the spec");
    m.calibration_temperature = r.f64();
    m.decision_threshold = r.f64();
    if (!r.done()) throw Error(ErrorCode::BadFormat, "trailing bytes in checkpoint");

    std::ifstream hist(path + ".history.tsv");
    std::string line;
    if (hist && text::read_line(hist, line)) {
        while (text::read_line(hist, line)) {
            const auto f = text::split(line, '\t');
            if (f.size() != 5) throw Error(ErrorCode::BadFormat, "history row");
            EpochRecord e;
            e.epoch = static_cast<std::size_t>(text::parse_double(f[0]).value_or(0));
            e.train_loss = text::parse_double(f[1]).value_or(0);
            e.validation_loss = text::parse_double(f[2]).value_or(0);
            e.validation_mcc = text::parse_double(f[3]).value_or(0);
            e.validation_threshold = text::parse_double(f[4]).value_or(0);
            m.history.push_back(e);
        }
    }
    return m;
}

}  // namespace pairforge
