#pragma once

#include <stdexcept>
#include <string>

namespace xferops {

struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NotAbsolutelyContinuous : std::runtime_error {
    explicit NotAbsolutelyContinuous(const std::string& what) : std::runtime_error(what) {}
};

struct HarmonicZeroDivision : std::runtime_error {
    explicit HarmonicZeroDivision(const std::string& what) : std::runtime_error(what) {}
};

struct NotHarmonic : std::runtime_error {
    explicit NotHarmonic(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroLimit : std::runtime_error {
    explicit ZeroLimit(const std::string& what) : std::runtime_error(what) {}
};

struct ChainMismatch : std::runtime_error {
    explicit ChainMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct KernelNotStochastic : std::runtime_error {
    explicit KernelNotStochastic(const std::string& what) : std::runtime_error(what) {}
};

struct NotUnitary : std::runtime_error {
    explicit NotUnitary(const std::string& what) : std::runtime_error(what) {}
};

struct NotDecomposable : std::runtime_error {
    explicit NotDecomposable(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergentCascade : std::runtime_error {
    explicit NonConvergentCascade(const std::string& what) : std::runtime_error(what) {}
};

struct WeightZeroLoss : std::runtime_error {
    explicit WeightZeroLoss(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace xferops
