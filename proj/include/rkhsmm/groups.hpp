#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rkhsmm/errors.hpp"

namespace rkhsmm {

/// A subset v of the input variables. Indices are 1-based and strictly increasing.
struct Group {
    std::vector<int> vars;
    std::string name;

    std::size_t size() const noexcept { return vars.size(); }
    bool contains(int var) const noexcept {
        for (int a : vars)
            if (a == var) return true;
        return false;
    }
};

/// "v" followed by the dot-joined indices: v1, v1.3, v1.2.3.
inline std::string group_name(std::span<const int> vars) {
    std::string name = "v";
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (i) name += '.';
        name += std::to_string(vars[i]);
    }
    return name;
}

/// All subsets of {1..d} of size 1..dmax, ordered by size then lexicographically.
struct GroupSet {
    int d = 0;
    int dmax = 0;
    std::vector<Group> groups;

    std::size_t size() const noexcept { return groups.size(); }
    const Group& operator[](std::size_t i) const { return groups[i]; }
    auto begin() const noexcept { return groups.begin(); }
    auto end() const noexcept { return groups.end(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (groups[i].name == name) return i;
        return std::nullopt;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(groups.size());
        for (const auto& g : groups) out.push_back(g.name);
        return out;
    }
};

inline GroupSet build_group_set(int d, int dmax) {
    if (d < 1) throw invalid_argument("build_group_set: d must be >= 1");
    if (dmax < 1 || dmax > d)
        throw invalid_argument("build_group_set: dmax must lie in [1, d], got dmax=" +
                               std::to_string(dmax) + " d=" + std::to_string(d));
    GroupSet set{d, dmax, {}};
    std::vector<int> idx;
    for (int k = 1; k <= dmax; ++k) {
        idx.resize(k);
        for (int i = 0; i < k; ++i) idx[i] = i + 1;
        while (true) {
            set.groups.push_back({idx, group_name(idx)});
            int pos = k - 1;
            while (pos >= 0 && idx[pos] == d - (k - 1 - pos)) --pos;
            if (pos < 0) break;
            ++idx[pos];
            for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
        }
    }
    return set;
}

} // namespace rkhsmm
