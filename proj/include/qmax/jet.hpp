#pragma once

// Truncated Taylor polynomials in one variable. Coefficient k is the k-th
// Taylor coefficient, i.e. the k-th derivative divided by k!.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <ostream>
#include <vector>

namespace qmax {

struct Taylor {
    static constexpr int N = 8;
    std::array<double, N> c{};

    Taylor() = default;
    Taylor(double v) { c[0] = v; }  // NOLINT: implicit on purpose

    static Taylor variable(double v0, double v1 = 1.0) {
        Taylor t(v0);
        t.c[1] = v1;
        return t;
    }
    static Taylor from_derivatives(const double* d, int count) {
        Taylor t;
        double fact = 1.0;
        for (int k = 0; k < count && k < N; ++k) {
            if (k > 0) fact *= k;
            t.c[k] = d[k] / fact;
        }
        return t;
    }
    double value() const { return c[0]; }
    double derivative(int k) const {
        double fact = 1.0;
        for (int i = 2; i <= k; ++i) fact *= i;
        return c[k] * fact;
    }

    Taylor& operator+=(const Taylor& o) {
        for (int i = 0; i < N; ++i) c[i] += o.c[i];
        return *this;
    }
    Taylor& operator-=(const Taylor& o) {
        for (int i = 0; i < N; ++i) c[i] -= o.c[i];
        return *this;
    }
    Taylor& operator*=(const Taylor& o) {
        *this = *this * o;
        return *this;
    }
    Taylor& operator/=(const Taylor& o) {
        *this = *this / o;
        return *this;
    }
    Taylor& operator*=(double s) {
        for (auto& v : c) v *= s;
        return *this;
    }

    friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
    friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
    friend Taylor operator-(Taylor a) {
        for (auto& v : a.c) v = -v;
        return a;
    }
    friend Taylor operator*(const Taylor& a, const Taylor& b) {
        Taylor r;
        for (int i = 0; i < N; ++i) {
            if (a.c[i] == 0.0) continue;
            for (int j = 0; i + j < N; ++j) r.c[i + j] += a.c[i] * b.c[j];
        }
        return r;
    }
    friend Taylor operator*(Taylor a, double s) { return a *= s; }
    friend Taylor operator*(double s, Taylor a) { return a *= s; }
    friend Taylor operator/(const Taylor& a, const Taylor& b) {
        Taylor r;
        for (int k = 0; k < N; ++k) {
            double s = a.c[k];
            for (int j = 1; j <= k; ++j) s -= b.c[j] * r.c[k - j];
            r.c[k] = s / b.c[0];
        }
        return r;
    }
    friend Taylor operator/(Taylor a, double s) {
        for (auto& v : a.c) v /= s;
        return a;
    }
    friend Taylor operator/(double s, const Taylor& b) { return Taylor(s) / b; }

    friend bool operator<(const Taylor& a, const Taylor& b) { return a.c[0] < b.c[0]; }
    friend bool operator>(const Taylor& a, const Taylor& b) { return a.c[0] > b.c[0]; }
    friend bool operator<=(const Taylor& a, const Taylor& b) { return a.c[0] <= b.c[0]; }
    friend bool operator>=(const Taylor& a, const Taylor& b) { return a.c[0] >= b.c[0]; }
    friend bool operator==(const Taylor& a, const Taylor& b) { return a.c == b.c; }
    friend bool operator!=(const Taylor& a, const Taylor& b) { return a.c != b.c; }

    friend std::ostream& operator<<(std::ostream& os, const Taylor& t) {
        os << "[";
        for (int i = 0; i < N; ++i) os << (i ? ", " : "") << t.c[i];
        return os << "]";
    }
};

inline Taylor exp(const Taylor& a) {
    Taylor r;
    r.c[0] = std::exp(a.c[0]);
    for (int k = 1; k < Taylor::N; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
        r.c[k] = s / k;
    }
    return r;
}

inline Taylor log(const Taylor& a) {
    Taylor r;
    r.c[0] = std::log(a.c[0]);
    for (int k = 1; k < Taylor::N; ++k) {
        double s = k * a.c[k];
        for (int j = 1; j < k; ++j) s -= j * r.c[j] * a.c[k - j];
        r.c[k] = s / (k * a.c[0]);
    }
    return r;
}

inline Taylor sqrt(const Taylor& a) {
    Taylor r;
    r.c[0] = std::sqrt(a.c[0]);
    for (int k = 1; k < Taylor::N; ++k) {
        double s = a.c[k];
        for (int j = 1; j < k; ++j) s -= r.c[j] * r.c[k - j];
        r.c[k] = s / (2.0 * r.c[0]);
    }
    return r;
}

inline void sincos(const Taylor& a, Taylor& s, Taylor& co) {
    s = Taylor();
    co = Taylor();
    s.c[0] = std::sin(a.c[0]);
    co.c[0] = std::cos(a.c[0]);
    for (int k = 1; k < Taylor::N; ++k) {
        double ss = 0.0, cc = 0.0;
        for (int j = 1; j <= k; ++j) {
            ss += j * a.c[j] * co.c[k - j];
            cc -= j * a.c[j] * s.c[k - j];
        }
        s.c[k] = ss / k;
        co.c[k] = cc / k;
    }
}

inline Taylor sin(const Taylor& a) {
    Taylor s, c;
    sincos(a, s, c);
    return s;
}

inline Taylor cos(const Taylor& a) {
    Taylor s, c;
    sincos(a, s, c);
    return c;
}

inline Taylor pow(const Taylor& a, int n) {
    Taylor r(1.0);
    for (int i = 0; i < n; ++i) r = r * a;
    return r;
}

// Scalar helpers usable for both double and Taylor in templated code.
inline double value_of(double v) { return v; }
inline double value_of(const Taylor& t) { return t.c[0]; }

}  // namespace qmax

namespace Eigen {

template <>
struct NumTraits<qmax::Taylor> : NumTraits<double> {
    using Real = qmax::Taylor;
    using NonInteger = qmax::Taylor;
    using Nested = qmax::Taylor;
    using Literal = double;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = qmax::Taylor::N,
        AddCost = qmax::Taylor::N,
        MulCost = qmax::Taylor::N * qmax::Taylor::N,
    };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<qmax::Taylor, double, BinaryOp> {
    using ReturnType = qmax::Taylor;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, qmax::Taylor, BinaryOp> {
    using ReturnType = qmax::Taylor;
};

}  // namespace Eigen

namespace qmax {

// Derivatives of t -> f(u(t)) at t0 from the derivatives of u at t0.
template <class F>
std::vector<double> compose_jet(F&& f, const std::vector<double>& derivs) {
    Taylor u = Taylor::from_derivatives(derivs.data(), int(derivs.size()));
    Taylor r = f(u);
    std::vector<double> out(derivs.size());
    for (std::size_t k = 0; k < derivs.size(); ++k) out[k] = r.derivative(int(k));
    return out;
}

}  // namespace qmax
