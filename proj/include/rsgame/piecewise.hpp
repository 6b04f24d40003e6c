#pragma once

#include <algorithm>
#include <cassert>
#include <vector>

namespace rsgame {

/// Right-continuous step function of time. A constant is the common case;
/// interior breakpoints split [0, T] into finitely many constant pieces.
template <class T>
class Piecewise {
  public:
    Piecewise() = default;
    Piecewise(T constant) : values_{std::move(constant)} {}
    Piecewise(std::vector<double> breaks, std::vector<T> values)
        : breaks_(std::move(breaks)), values_(std::move(values)) {
        assert(values_.size() == breaks_.size() + 1);
        assert(std::is_sorted(breaks_.begin(), breaks_.end()));
    }

    const T& eval(double s) const {
        if (breaks_.empty()) return values_.front();
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
        return values_[static_cast<size_t>(it - breaks_.begin())];
    }

    const T& operator()(double s) const { return eval(s); }

    bool constant() const { return breaks_.empty(); }
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<T>& pieces() const { return values_; }

  private:
    std::vector<double> breaks_;
    std::vector<T> values_{T{}};
};

}  // namespace rsgame
