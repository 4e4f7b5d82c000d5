#ifndef CEGATE_METRICS_HPP
#define CEGATE_METRICS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "cegate/check.hpp"

namespace cegate {

// counts[c_true * C + c_pred]
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes)
        : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {
        check(num_classes >= 1, "confusion matrix: need at least 1 class");
    }

    void add(std::span<const int> truth, std::span<const int> prediction) {
        check(truth.size() == prediction.size(),
              "confusion matrix: label/prediction length mismatch");
        for (std::size_t i = 0; i < truth.size(); ++i) {
            check_index(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < num_classes_,
                        "confusion matrix: label out of range");
            check_index(prediction[i] >= 0 &&
                            static_cast<std::size_t>(prediction[i]) < num_classes_,
                        "confusion matrix: prediction out of range");
            ++counts_[static_cast<std::size_t>(truth[i]) * num_classes_ +
                      static_cast<std::size_t>(prediction[i])];
        }
    }

    std::size_t num_classes() const { return num_classes_; }

    std::size_t count(std::size_t c_true, std::size_t c_pred) const {
        check_index(c_true < num_classes_ && c_pred < num_classes_,
                    "confusion matrix: class index out of range");
        return counts_[c_true * num_classes_ + c_pred];
    }

    std::size_t true_positive(std::size_t c) const { return count(c, c); }

    std::size_t false_positive(std::size_t c) const {
        std::size_t fp = 0;
        for (std::size_t t = 0; t < num_classes_; ++t)
            if (t != c) fp += count(t, c);
        return fp;
    }

    std::size_t false_negative(std::size_t c) const {
        std::size_t fn = 0;
        for (std::size_t p = 0; p < num_classes_; ++p)
            if (p != c) fn += count(c, p);
        return fn;
    }

    // Class appears in ground truth or prediction.
    bool class_present(std::size_t c) const {
        return true_positive(c) + false_positive(c) + false_negative(c) > 0;
    }

private:
    std::size_t num_classes_;
    std::vector<std::size_t> counts_;
};

struct IouReport {
    std::vector<double> per_class;     // -1 for classes absent from both sides
    std::vector<bool> class_present;
    double miou = 0.0;                 // mean over present classes
};

inline IouReport iou_report(const ConfusionMatrix& cm) {
    IouReport r;
    const std::size_t num_classes = cm.num_classes();
    r.per_class.assign(num_classes, -1.0);
    r.class_present.assign(num_classes, false);
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!cm.class_present(c)) continue;
        r.class_present[c] = true;
        double denom = static_cast<double>(cm.true_positive(c) + cm.false_positive(c) +
                                           cm.false_negative(c));
        r.per_class[c] = static_cast<double>(cm.true_positive(c)) / denom;
        total += r.per_class[c];
        ++present;
    }
    check(present > 0, "iou_report: no class present in labels or predictions");
    r.miou = total / static_cast<double>(present);
    return r;
}

inline IouReport mean_iou(std::span<const int> truth, std::span<const int> prediction,
                          std::size_t num_classes) {
    ConfusionMatrix cm(num_classes);
    cm.add(truth, prediction);
    return iou_report(cm);
}

}  // namespace cegate

#endif
