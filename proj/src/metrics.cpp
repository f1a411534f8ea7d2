#include "labelgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "labelgcn/error.hpp"

namespace labelgcn {

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> targets) {
    if (preds.size() != targets.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (preds.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == targets[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

ConfusionCounts confusion(std::span<const std::size_t> preds, std::span<const std::size_t> targets,
                          std::size_t positive_class) {
    if (preds.size() != targets.size()) throw std::invalid_argument("confusion: length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == positive_class;
        const bool t = targets[i] == positive_class;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
    PrecisionRecallF1 r;
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    }
    return r;
}

PrecisionRecallF1 precision_recall_f1(std::span<const std::size_t> preds, std::span<const std::size_t> targets,
                                      std::size_t positive_class) {
    return precision_recall_f1(confusion(preds, targets, positive_class));
}

std::vector<double> neighbor_label_average(const GraphDataset& ds, const SparseMatrix& adjacency) {
    if (ds.label_encoding != LabelEncoding::scalar_map) {
        throw DataError("neighbor_label_average: dataset has no scalar label map");
    }
    if (adjacency.rows() != ds.n() || adjacency.cols() != ds.n()) {
        throw DimensionError("neighbor_label_average: adjacency does not match dataset");
    }
    std::vector<double> mapped(ds.n(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.labels[i]) mapped[i] = ds.class_scalars[*ds.labels[i]];
    }
    std::vector<double> out(ds.n(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        double sum = 0.0;
        std::size_t deg = 0;
        for (std::size_t j : adjacency.row_cols(i)) {
            if (j == i) continue;
            sum += mapped[j];
            ++deg;
        }
        if (deg > 0) out[i] = sum / static_cast<double>(deg);
    }
    return out;
}

LabelHistogram label_histogram(const GraphDataset& ds, std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram: need at least one bin");
    if (values.size() != ds.n()) throw DimensionError("histogram: one value per node expected");
    LabelHistogram h;
    const double width = 2.0 / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) h.bin_centers.push_back(-1.0 + width * (static_cast<double>(b) + 0.5));
    h.counts.assign(ds.n_classes(), std::vector<std::size_t>(bins, 0));
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (!ds.labels[i]) continue;
        const double v = std::clamp(values[i], -1.0, 1.0);
        auto b = static_cast<std::size_t>(std::floor((v + 1.0) / width));
        b = std::min(b, bins - 1);
        ++h.counts[*ds.labels[i]][b];
    }
    return h;
}

std::string histogram_csv(const GraphDataset& ds, const LabelHistogram& hist) {
    std::ostringstream os;
    os << "bin_center";
    for (const auto& name : ds.class_names) os << ",count_" << name;
    os << '\n';
    for (std::size_t b = 0; b < hist.bin_centers.size(); ++b) {
        os << hist.bin_centers[b];
        for (const auto& per_class : hist.counts) os << ',' << per_class[b];
        os << '\n';
    }
    return os.str();
}

}  // namespace labelgcn
