#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sqa {

using real = double;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<real>;
using Vector = VectorX<real>;
using RowVector = RowVectorX<real>;

using DocId = std::uint32_t;
using TermId = std::uint32_t;

/// Malformed or inconsistent input data (questions, corpus, qrels).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A persisted file (index, checkpoint) that cannot be decoded.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during training or inference.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sqa
