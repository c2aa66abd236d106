// Frozen-embedding kNN classification under cosine similarity.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sslab/common.hpp"
#include "sslab/data.hpp"
#include "sslab/model.hpp"

namespace sslab {

// Row-normalized embeddings with their labels.
struct EmbeddingTable {
    Mat<float> rows;          // n x d, every row unit-norm
    std::vector<int> labels;  // n class ids
};

inline void l2_normalize_rows(Mat<float>& m) {
    for (int r = 0; r < m.rows; ++r) {
        double n2 = 0;
        for (int j = 0; j < m.cols; ++j) n2 += static_cast<double>(m.at(r, j)) * m.at(r, j);
        const float inv = n2 > 0 ? static_cast<float>(1.0 / std::sqrt(n2)) : 0.0f;
        for (int j = 0; j < m.cols; ++j) m.at(r, j) *= inv;
    }
}

// Projector outputs z in inference mode (running BN statistics), rows
// L2-normalized.
inline EmbeddingTable embed_dataset(ModelParams<float>& params, const Dataset& ds, int batch_size = 256) {
    if (!ds.labeled()) throw ParameterError("embed_dataset: dataset must be labeled");
    EmbeddingTable table;
    table.rows = Mat<float>(static_cast<int>(ds.size()), params.cfg.embed_dim);
    table.labels = ds.labels;
    for (size_t start = 0; start < ds.size(); start += batch_size) {
        const size_t end = std::min(ds.size(), start + batch_size);
        std::vector<Image> batch(ds.images.begin() + start, ds.images.begin() + end);
        const auto out = forward(params, batch, /*training=*/false);
        for (size_t i = start; i < end; ++i)
            for (int j = 0; j < params.cfg.embed_dim; ++j)
                table.rows.at(static_cast<int>(i), j) = out.z.at(static_cast<int>(i - start), j);
    }
    l2_normalize_rows(table.rows);
    return table;
}

// Majority vote among the top-k cosine neighbors. Vote ties break by summed
// similarity, then by lowest class id.
inline std::vector<int> knn_classify(const EmbeddingTable& train, const Mat<float>& queries, int k) {
    const int n = train.rows.rows;
    if (n == 0) throw ParameterError("knn_classify: empty training table");
    if (k < 1 || k > n) throw ParameterError("knn_classify: k must be in [1, n_train]");
    if (queries.cols != train.rows.cols) throw ContractViolation("knn_classify: dimension mismatch");

    const int n_classes = 1 + *std::max_element(train.labels.begin(), train.labels.end());
    std::vector<int> pred(queries.rows);
    std::vector<std::pair<double, int>> sims(n);  // (-similarity, index) for stable partial sort
    for (int q = 0; q < queries.rows; ++q) {
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < queries.cols; ++j)
                s += static_cast<double>(queries.at(q, j)) * train.rows.at(i, j);
            sims[i] = {-s, i};
        }
        std::partial_sort(sims.begin(), sims.begin() + k, sims.end());
        std::vector<int> votes(n_classes, 0);
        std::vector<double> simsum(n_classes, 0.0);
        for (int i = 0; i < k; ++i) {
            const int cls = train.labels[sims[i].second];
            ++votes[cls];
            simsum[cls] += -sims[i].first;
        }
        int best = 0;
        for (int c = 1; c < n_classes; ++c) {
            if (votes[c] > votes[best] || (votes[c] == votes[best] && simsum[c] > simsum[best])) best = c;
        }
        pred[q] = best;
    }
    return pred;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw ParameterError("accuracy: length mismatch");
    if (pred.empty()) return 0.0;
    size_t correct = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace sslab
