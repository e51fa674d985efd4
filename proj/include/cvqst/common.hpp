#ifndef CVQST_COMMON_HPP
#define CVQST_COMMON_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cvqst {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Thrown when an operator or state dimension is out of range or mismatched.
struct InvalidDimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a scalar parameter fails validation (negative n̄, bad seed, ...).
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown on malformed bulk input (mismatched lengths, empty datasets, ...).
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numeric kernel fails (eigensolver no-convergence, non-finite
/// objective). Maps to CLI exit code 3.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 step; used to derive independent per-stream seeds from a master
/// seed so parallel chains/workers stay reproducible.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xa076'1d64'78bd'642fULL * (stream + 1));
    return splitmix64(s);
}

/// Number of worker threads. Honors the CVQST_THREADS environment variable.
int thread_count();

/// Runs fn(i) for i in [0, n). Work is split across threads; each index is
/// processed exactly once, so writes keyed by i are deterministic regardless
/// of the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidParameter(msg);
}

}  // namespace cvqst

#endif
