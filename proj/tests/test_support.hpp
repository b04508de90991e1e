#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "vsseg/nn/graph.hpp"
#include "vsseg/nn/ops.hpp"
#include "vsseg/rng.hpp"
#include "vsseg/tensor.hpp"

namespace vsseg::test {

inline DTensor random_dtensor(const std::vector<std::size_t>& shape, Rng& rng, double lo = -1.0,
                              double hi = 1.0) {
    DTensor t(shape);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline double rel_err(double a, double b) {
    const double denom = std::max({1e-8, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

// Central finite differences of scalar(), which must re-run the forward pass
// from current leaf values, against the analytic gradient of `leaf`.
// Returns the max relative error over all elements.
inline double fd_check(const std::function<double()>& scalar_fwd,
                       const std::function<void()>& run_backward, nn::Var<double> leaf,
                       double h = 1e-6) {
    leaf->zero_grad();
    run_backward();
    double worst = 0.0;
    for (std::size_t i = 0; i < leaf->value.numel(); ++i) {
        const double orig = leaf->value[i];
        leaf->value[i] = orig + h;
        const double fp = scalar_fwd();
        leaf->value[i] = orig - h;
        const double fm = scalar_fwd();
        leaf->value[i] = orig;
        const double numeric = (fp - fm) / (2 * h);
        const double analytic = leaf->grad.data.empty() ? 0.0 : leaf->grad[i];
        worst = std::max(worst, rel_err(numeric, analytic));
    }
    return worst;
}

// Regularized lower incomplete gamma P(a, x); used for chi-square p-values.
inline double gamma_p(double a, double x) {
    if (x < 0 || a <= 0) return 0.0;
    if (x == 0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // series
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-14) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction for Q, then P = 1 - Q
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, hh = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        hh *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * hh;
}

// p-value of a chi-square statistic with `dof` degrees of freedom.
inline double chi2_pvalue(double stat, double dof) { return 1.0 - gamma_p(dof / 2.0, stat / 2.0); }

// Scoped temporary directory under the build tree.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("vsseg_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace vsseg::test
