#pragma once

#include <cstddef>
#include <Eigen/Dense>

namespace sindex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// One arriving block of observations. Rows of `x` are observations.
struct Batch {
    Vector y;
    Matrix x;
    std::size_t index = 0;

    Index n() const { return y.size(); }
    Index p() const { return x.cols(); }

    /// Throws on shape mismatch or non-finite entries.
    void validate() const;
};

/// Non-owning view on a contiguous row range of a batch.
struct BatchView {
    Eigen::Ref<const Vector> y;
    Eigen::Ref<const Matrix> x;

    BatchView(const Batch& b) : y(b.y), x(b.x) {}
    BatchView(Eigen::Ref<const Vector> y_, Eigen::Ref<const Matrix> x_) : y(y_), x(x_) {}

    Index n() const { return y.size(); }
    Index p() const { return x.cols(); }
};

struct SplitBatch {
    BatchView first;
    BatchView second;
};

/// First half holds floor(n/2) rows, second half the rest.
SplitBatch split_batch(const Batch& batch);

} // namespace sindex
