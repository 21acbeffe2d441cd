// Writes the small synthetic corpus under data/synthetic/.
//
//   make_synthetic_corpus <out_dir> [seed]
//
// 240 host proteins in six clusters. Clusters 0/1, 2/3 and 4/5 are partners;
// interactions fall inside a cluster or between partners, and embeddings,
// compartments and Pfam families follow the cluster.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pairforge/ingest.hpp"
#include "pairforge/rng.hpp"
#include "pairforge/text.hpp"

namespace fs = std::filesystem;
using namespace pairforge;

namespace {

constexpr std::size_t kClusters = 6;
constexpr std::size_t kPerCluster = 40;
constexpr std::size_t kDim = 16;
constexpr std::size_t kPositives = 1200;
constexpr std::string_view kResidues = "ACDEFGHIKLMNPQRSTVWY";

const char* const kCompartments[kClusters][2] = {
    {"nucleus", "nucleus"},         {"nucleus", "cytoplasm"},        {"cytoplasm", "mitochondrion"},
    {"mitochondrion", "cytoplasm"}, {"membrane", "extracellular"},   {"extracellular", "endosome"},
};

std::string id_of(std::size_t i) {
    std::ostringstream s;
    s << "SYN" << (i < 10 ? "00" : i < 100 ? "0" : "") << i;
    return s.str();
}

std::size_t partner(std::size_t c) { return c ^ 1U; }

void save(const fs::path& p, const std::string& contents) {
    std::ofstream f(p, std::ios::binary);
    f << contents;
    if (!f) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_synthetic_corpus <out_dir> [seed]\n";
        return 2;
    }
    const fs::path dir = argv[1];
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 2024;
    fs::create_directories(dir);
    Rng rng(seed);
    const std::size_t n = kClusters * kPerCluster;

    // Each cluster prefers a handful of residues.
    std::vector<std::vector<double>> composition(kClusters, std::vector<double>(kResidues.size(), 1.0));
    for (auto& c : composition)
        for (int k = 0; k < 5; ++k) c[rng.uniform_index(kResidues.size())] += 4.0;

    std::ostringstream fasta;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& w = composition[i / kPerCluster];
        double total = 0.0;
        for (double x : w) total += x;
        const std::size_t len = 50 + rng.uniform_index(151);
        std::string seq;
        for (std::size_t k = 0; k < len; ++k) {
            double u = rng.uniform01() * total;
            std::size_t r = 0;
            while (r + 1 < w.size() && u >= w[r]) u -= w[r++];
            seq.push_back(kResidues[r]);
        }
        fasta << '>' << id_of(i) << " role=host cluster=" << i / kPerCluster << '\n';
        for (std::size_t k = 0; k < seq.size(); k += 60) fasta << seq.substr(k, 60) << '\n';
    }
    save(dir / "proteins.fasta", fasta.str());

    EmbeddingTable emb;
    emb.dimension = kDim;
    std::vector<std::vector<double>> centroid(kClusters, std::vector<double>(kDim));
    for (auto& c : centroid)
        for (auto& x : c) x = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(kDim);
        for (std::size_t d = 0; d < kDim; ++d)
            v[d] = static_cast<float>(centroid[i / kPerCluster][d] + 0.6 * rng.normal());
        emb.vectors.emplace(id_of(i), std::move(v));
    }
    std::ostringstream emb_text;
    emb_text << "# 16-dimensional synthetic embeddings\n";
    write_embedding_text(emb_text, emb);
    save(dir / "embeddings.tsv", emb_text.str());

    std::ostringstream ann;
    ann << "# protein\tnamespace\tterm\n";
    for (std::size_t c = 0; c < kClusters; c += 2)
        ann << "-\tddi\tPF1000" << c << "|PF1000" << partner(c) << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform01() < 0.2) continue;
        const std::size_t c = i / kPerCluster;
        const auto id = id_of(i);
        ann << id << "\tcompartment\t" << kCompartments[c][0] << '\n';
        if (rng.uniform01() < 0.5) ann << id << "\tcompartment\t" << kCompartments[c][1] << '\n';
        ann << id << "\tpfam\tPF1000" << c << '\n';
        if (rng.uniform01() < 0.4) ann << id << "\tpfam\tPF2" << rng.uniform_index(20) + 1000 << '\n';
        ann << id << "\tgo_bp\tGO:00" << 10000 + c * 10 + rng.uniform_index(3) << '\n';
        if (rng.uniform01() < 0.5) ann << id << "\treactome\tR-SYN-" << 100 + c << '\n';
    }
    save(dir / "annotations.tsv", ann.str());

    std::set<std::pair<std::string, std::string>> positives;
    while (positives.size() < kPositives) {
        const std::size_t c = rng.uniform_index(kClusters);
        const std::size_t d = rng.uniform01() < 0.6 ? c : partner(c);
        const auto a = id_of(c * kPerCluster + rng.uniform_index(kPerCluster));
        const auto b = id_of(d * kPerCluster + rng.uniform_index(kPerCluster));
        if (a == b) continue;
        positives.emplace(std::min(a, b), std::max(a, b));
    }
    std::ostringstream pairs, complexes;
    pairs << "a_id\tb_id\tlabel\tsource\n";
    std::size_t k = 0;
    for (const auto& [a, b] : positives) {
        pairs << a << '\t' << b << "\t1\tsynthetic\n";
        if (k++ % 10 == 0) complexes << a << '\t' << b << '\n';
    }
    save(dir / "pairs.tsv", pairs.str());
    save(dir / "co_complex.tsv", complexes.str());

    save(dir / "config.toml",
         "# Settings for the bundled synthetic corpus. Paths are relative to this file.\n"
         "seed = 7\n"
         "task = \"host_host\"\n"
         "proteins = \"proteins.fasta\"\n"
         "annotations = \"annotations.tsv\"\n"
         "\n"
         "[split]\n"
         "pairs = \"pairs.tsv\"\n"
         "co_complex = \"co_complex.tsv\"\n"
         "ratios = \"0.7,0.1,0.2\"\n"
         "\n"
         "[featurize]\n"
         "embeddings = \"embeddings.tsv\"\n"
         "zscale = \"../scales/sandberg_z5.tsv\"\n"
         "eisenberg = \"../scales/eisenberg.tsv\"\n"
         "lag = 5\n"
         "\n"
         "[induce]\n"
         "strategy = \"hybrid\"\n"
         "\n"
         "[train]\n"
         "architecture = \"two_tower\"\n"
         "folds = 5\n"
         "bags = 3\n"
         "hidden = \"64,32\"\n"
         "tower_out = 32\n"
         "epochs = 100\n"
         "patience = 15\n"
         "batch_size = 32\n"
         "learning_rate = 0.003\n"
         "\n"
         "[explain]\n"
         "max_instances = 100\n"
         "mode = \"exact\"\n");
    std::cout << "wrote " << n << " proteins and " << positives.size() << " positive pairs to " << dir.string()
              << "\n";
    return 0;
}
