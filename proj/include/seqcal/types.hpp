#ifndef SEQCAL_TYPES_HPP
#define SEQCAL_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Joint simulation input z = (x, theta), every coordinate scaled to [0,1].
struct JointInput {
    VectorXd design;  // size q
    VectorXd params;  // size p

    JointInput() = default;
    JointInput(VectorXd x, VectorXd theta)
        : design(std::move(x)), params(std::move(theta)) {}

    int q() const { return static_cast<int>(design.size()); }
    int p() const { return static_cast<int>(params.size()); }
    int dim() const { return q() + p(); }

    VectorXd joint() const {
        VectorXd z(dim());
        z << design, params;
        return z;
    }

    static JointInput split(const VectorXd& z, int q, int p) {
        if (z.size() != q + p)
            throw std::invalid_argument("JointInput::split: size mismatch");
        return JointInput(z.head(q), z.tail(p));
    }
};

// Growing set of (joint input, scalar output) simulation records. Append-only.
class SimDataset {
public:
    SimDataset(int q, int p) : q_(q), p_(p) {
        if (q < 1 || p < 1)
            throw std::invalid_argument("SimDataset: q >= 1 and p >= 1 required");
    }

    void append(const JointInput& z, double output) {
        if (z.q() != q_ || z.p() != p_)
            throw std::invalid_argument("SimDataset::append: dimension mismatch");
        const auto n = inputs_.rows();
        inputs_.conservativeResize(n + 1, q_ + p_);
        inputs_.row(n) = z.joint().transpose();
        outputs_.conservativeResize(n + 1);
        outputs_(n) = output;
    }

    int size() const { return static_cast<int>(outputs_.size()); }
    int q() const { return q_; }
    int p() const { return p_; }
    int dim() const { return q_ + p_; }

    // n x (q+p) matrix of inputs, one row per record.
    const MatrixXd& inputs() const { return inputs_; }
    const VectorXd& outputs() const { return outputs_; }

    JointInput input(int i) const {
        return JointInput::split(inputs_.row(i).transpose(), q_, p_);
    }

private:
    int q_;
    int p_;
    MatrixXd inputs_{0, 0};
    VectorXd outputs_{0};
};

// Affine scaling between natural units and the unit cube, per coordinate.
struct BoxScaling {
    VectorXd lo;
    VectorXd hi;

    BoxScaling() = default;
    BoxScaling(VectorXd lo_, VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size() || ((hi - lo).array() <= 0.0).any())
            throw std::invalid_argument("BoxScaling: require lo < hi elementwise");
    }

    static BoxScaling unit(int dim) {
        return BoxScaling(VectorXd::Zero(dim), VectorXd::Ones(dim));
    }

    VectorXd to_unit(const VectorXd& v) const {
        return (v - lo).cwiseQuotient(hi - lo);
    }
    VectorXd from_unit(const VectorXd& u) const {
        return lo + u.cwiseProduct(hi - lo);
    }
    int dim() const { return static_cast<int>(lo.size()); }
};

struct EmulatorSingular : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CovarianceSingular : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPositiveDeterminant : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AcquisitionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace seqcal

#endif
