#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pairforge/error.hpp"

namespace pairforge {

enum class Role { host, pathogen };
enum class Task { host_host, pathogen_host };
enum class Label { negative = 0, positive = 1 };
enum class Split { train = 0, validation = 1, test = 2 };

inline constexpr std::array<Split, 3> kAllSplits{Split::train, Split::validation, Split::test};

std::string_view to_string(Role role) noexcept;
std::string_view to_string(Task task) noexcept;
std::string_view to_string(Split split) noexcept;

Role parse_role(std::string_view text);
Task parse_task(std::string_view text);
Split parse_split(std::string_view text);

// Uppercases and checks the 21-letter alphabet (20 canonical residues + X).
// ILLEGAL_RESIDUE reports a 1-based position.
std::string validate_sequence(std::string_view raw);

bool is_canonical_residue(char c) noexcept;

class ProteinRecord {
public:
    // Validates both the id and the sequence.
    ProteinRecord(std::string id, Role role, std::string_view sequence);

    const std::string& id() const noexcept { return id_; }
    Role role() const noexcept { return role_; }
    const std::string& sequence() const noexcept { return sequence_; }
    std::size_t length() const noexcept { return sequence_.size(); }

private:
    std::string id_;
    Role role_;
    std::string sequence_;
};

struct PairExample {
    std::string a_id;
    std::string b_id;
    Label label = Label::positive;
    std::string source;

    friend bool operator==(const PairExample&, const PairExample&) = default;
};

// Host-host pairs are unordered and stored smallest-first; pathogen-host pairs
// keep (pathogen, host) order as given.
std::pair<std::string, std::string> canonical_pair(std::string_view a, std::string_view b, Task task,
                                                   bool allow_self = false);

// Order-free key used for duplicate and conflict detection.
std::string pair_key(std::string_view a, std::string_view b);

struct SplitAssignment {
    std::map<std::string, Split> split_of;
    std::array<double, 3> ratios{0.70, 0.10, 0.20};
    std::uint64_t seed = 0;

    std::vector<std::string> proteins_in(Split split) const;
    std::array<std::size_t, 3> counts() const;
};

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t total() const noexcept { return positives + negatives; }
};

struct DatasetBundle {
    std::array<std::vector<PairExample>, 3> splits;
    std::uint64_t seed = 0;
    std::vector<std::string> manifest;

    std::vector<PairExample>& pairs(Split s) { return splits[static_cast<std::size_t>(s)]; }
    const std::vector<PairExample>& pairs(Split s) const { return splits[static_cast<std::size_t>(s)]; }
    ClassCounts class_counts(Split s) const;
    std::size_t size() const noexcept;
};

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

}  // namespace pairforge
