#include "ttifair/core.hpp"

#include <algorithm>

namespace ttifair {

int AttributeScheme::index_of(const std::string& label) const {
    auto it = std::find(values.begin(), values.end(), label);
    return it == values.end() ? -1 : static_cast<int>(it - values.begin());
}

std::vector<double> FairDistribution::resolve(std::size_t n) const {
    if (kind == FairKind::Explicit) return weights;
    if (n == 0) return {};
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

const InclusionFeatureSpec* EvalConfig::feature(const std::string& name) const {
    for (const auto& f : inclusion_features) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

}  // namespace ttifair
