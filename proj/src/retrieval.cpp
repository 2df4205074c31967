#include "tryon/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tryon {

std::vector<RetrievalHit> retrieve_poses(const torch::Tensor& query, const std::vector<RetrievalEntry>& database,
                                         int64_t k) {
    if (k <= 0) throw std::invalid_argument("retrieve_poses: k must be positive, got " + std::to_string(k));
    auto q = query.detach().to(torch::kDouble).reshape({-1});
    std::vector<RetrievalHit> hits;
    hits.reserve(database.size());
    for (size_t i = 0; i < database.size(); ++i) {
        auto f = database[i].features.detach().to(torch::kDouble).reshape({-1});
        if (f.numel() != q.numel()) {
            throw std::invalid_argument("retrieve_poses: database entry " + std::to_string(i) +
                                        " has a different feature size than the query");
        }
        const double d = std::sqrt((f - q).pow(2).sum().item<double>());
        hits.push_back({i, database[i].pose_id, d});
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const RetrievalHit& a, const RetrievalHit& b) { return a.distance < b.distance; });
    if (static_cast<size_t>(k) < hits.size()) hits.resize(static_cast<size_t>(k));
    return hits;
}

torch::Tensor clothing_features(Cloth2Pose& model, const torch::Tensor& clothing) {
    torch::NoGradGuard guard;
    auto x = clothing.dim() == 3 ? clothing.unsqueeze(0) : clothing;
    return model->extract(x).flatten(1);
}

}  // namespace tryon
