#include <istream>
#include <ostream>

#include "pairforge/split.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

void write_bundle(std::ostream& out, const DatasetBundle& bundle) {
    out << "a_id\tb_id\tlabel\tsplit\tsource\n";
    for (auto s : kAllSplits)
        for (const auto& p : bundle.pairs(s))
            out << p.a_id << '\t' << p.b_id << '\t' << (p.label == Label::positive ? '1' : '0') << '\t' << to_string(s)
                << '\t' << p.source << '\n';
}

DatasetBundle read_bundle(std::istream& in) {
    DatasetBundle bundle;
    std::string line;
    if (!text::read_line(in, line) || line.rfind("a_id\tb_id\tlabel\tsplit", 0) != 0)
        throw Error(ErrorCode::BadFormat, "bundle header must start with a_id, b_id, label, split");
    std::size_t line_no = 1;
    while (text::read_line(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, '\t');
        if (f.size() < 4 || f.size() > 5) throw Error(ErrorCode::MalformedRow, "bundle line " + std::to_string(line_no));
        PairExample p{std::string(f[0]), std::string(f[1]), Label::positive, f.size() == 5 ? std::string(f[4]) : ""};
        if (f[2] == "0") p.label = Label::negative;
        else if (f[2] != "1") throw Error(ErrorCode::BadLabel, "bundle line " + std::to_string(line_no));
        bundle.pairs(parse_split(f[3])).push_back(std::move(p));
    }
    return bundle;
}

nlohmann::ordered_json split_manifest_json(const DatasetBundle& bundle, const SplitAssignment& assignment) {
    nlohmann::ordered_json j;
    j["seed"] = assignment.seed;
    j["ratios"] = assignment.ratios;
    nlohmann::ordered_json proteins, protein_counts, counts;
    for (auto s : kAllSplits) {
        const std::string name(to_string(s));
        proteins[name] = assignment.proteins_in(s);
        protein_counts[name] = proteins[name].size();
        const auto c = bundle.class_counts(s);
        counts[name] = {{"positives", c.positives}, {"negatives", c.negatives}};
    }
    j["protein_counts"] = protein_counts;
    j["proteins"] = proteins;
    j["pair_counts"] = counts;
    return j;
}

SplitAssignment assignment_from_manifest(const nlohmann::json& manifest) {
    try {
        SplitAssignment a;
        a.seed = manifest.at("seed").get<std::uint64_t>();
        a.ratios = manifest.at("ratios").get<std::array<double, 3>>();
        for (auto s : kAllSplits)
            for (const auto& id : manifest.at("proteins").at(std::string(to_string(s))))
                if (!a.split_of.emplace(id.get<std::string>(), s).second)
                    throw Error(ErrorCode::DuplicateId, "protein " + id.get<std::string>() + " in two splits");
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, std::string("split manifest: ") + e.what());
    }
}

}  // namespace pairforge
