#include "sparse_infer/types.hpp"

#include <algorithm>

namespace sparse_infer {

IndexSet& canonicalize(IndexSet& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
    IndexSet out(a);
    out.insert(out.end(), b.begin(), b.end());
    return canonicalize(out);
}

IndexSet complement(const IndexSet& s, Index p) {
    IndexSet out;
    out.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        if (!contains(s, j)) out.push_back(j);
    }
    return out;
}

bool contains(const IndexSet& s, Index j) {
    return std::find(s.begin(), s.end(), j) != s.end();
}

}  // namespace sparse_infer
