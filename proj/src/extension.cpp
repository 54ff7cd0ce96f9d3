#include "qmax/compat.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

namespace qmax {

namespace {

// FFTW planning is not thread safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// 2-D transform over the tangential plane (x2 slowest, x1 fastest).
class PlaneFft {
public:
    PlaneFft(int n1, int n2, int sign) : n_(std::size_t(n1) * std::size_t(n2)) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
        plan_ = fftw_plan_dft_2d(n2, n1, buf_, buf_, sign, FFTW_ESTIMATE);
    }
    ~PlaneFft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    PlaneFft(const PlaneFft&) = delete;
    PlaneFft& operator=(const PlaneFft&) = delete;

    fftw_complex* data() { return buf_; }
    void run() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan plan_;
};

int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

// Smooth step: 0 for x <= 0, 1 for x >= 1.
template <class S>
S smooth_step(const S& x) {
    using std::exp;
    S a = exp(-1.0 / x), b = exp(-1.0 / (1.0 - x));
    return a / (a + b);
}

}  // namespace

double JetExtension::psi(double s) {
    double a = std::abs(s);
    if (a <= 0.5) return 1.0;
    if (a >= 2.0) return 0.0;
    return smooth_step((2.0 - a) / 1.5);
}

Taylor JetExtension::psi(const Taylor& s) {
    double a = std::abs(s.value());
    if (a <= 0.5) return Taylor(1.0);
    if (a >= 2.0) return Taylor(0.0);
    Taylor t = s.value() < 0 ? -1.0 * s : s;
    return smooth_step((2.0 - t) / 1.5);
}

std::size_t JetExtension::at(int k, int line, int c) const {
    const std::size_t nm = std::size_t(grid_.n1) * std::size_t(grid_.n2);
    return ((std::size_t(k) * std::size_t(grid_.n3) + std::size_t(line)) * 6 + std::size_t(c)) * nm;
}

JetExtension::JetExtension(const std::vector<Field>& h, double t0, double tail_threshold)
    : t0_(t0), m_(int(h.size())) {
    if (h.empty()) throw Error(ErrorCode::shape_mismatch, "jet extension needs at least one field");
    if (m_ > Taylor::N) throw Error(ErrorCode::order_exceeds_derivative_data, "too many jet fields");
    grid_ = h[0].grid;
    for (const auto& f : h) {
        f.check_consistent();
        if (!(f.grid == grid_)) throw Error(ErrorCode::shape_mismatch, "jet fields on different grids");
        if (!f.finite()) throw Error(ErrorCode::non_smooth_input, "jet field is not finite");
    }
    const int n1 = grid_.n1, n2 = grid_.n2;
    const std::size_t nm = std::size_t(n1) * std::size_t(n2);
    bracket_.resize(nm);
    std::vector<bool> outer(nm);
    for (int j = 0; j < n2; ++j)
        for (int i = 0; i < n1; ++i) {
            int a = wavenumber(i, n1), b = wavenumber(j, n2);
            double x1 = 2 * M_PI * a / grid_.L1, x2 = 2 * M_PI * b / grid_.L2;
            bracket_[std::size_t(j) * std::size_t(n1) + std::size_t(i)] = std::sqrt(1.0 + x1 * x1 + x2 * x2);
            double r = std::max(std::abs(a) / (0.5 * n1), std::abs(b) / (0.5 * n2));
            outer[std::size_t(j) * std::size_t(n1) + std::size_t(i)] = r > 2.0 / 3.0;
        }
    re_.assign(std::size_t(m_) * std::size_t(grid_.n3) * 6 * nm, 0.0);
    im_ = re_;
    PlaneFft fft(n1, n2, FFTW_FORWARD);
    for (int k = 0; k < m_; ++k) {
        double total = 0.0, tail = 0.0;
        for (int line = 0; line < grid_.n3; ++line)
            for (int c = 0; c < 6; ++c) {
                for (int j = 0; j < n2; ++j)
                    for (int i = 0; i < n1; ++i) {
                        auto* z = fft.data()[std::size_t(j) * std::size_t(n1) + std::size_t(i)];
                        z[0] = h[std::size_t(k)](i, j, line)(c);
                        z[1] = 0.0;
                    }
                fft.run();
                const std::size_t base = at(k, line, c);
                for (std::size_t q = 0; q < nm; ++q) {
                    re_[base + q] = fft.data()[q][0];
                    im_[base + q] = fft.data()[q][1];
                    double e = re_[base + q] * re_[base + q] + im_[base + q] * im_[base + q];
                    total += e;
                    if (outer[q]) tail += e;
                }
            }
        if (total > 0.0) {
            double frac = tail / total;
            tail_ = std::max(tail_, frac);
            if (frac > tail_threshold)
                throw Error(ErrorCode::non_smooth_input,
                            "jet field " + std::to_string(k) + " fails the spectral tail test (fraction " +
                                std::to_string(frac) + ")");
        }
    }
}

Field JetExtension::evaluate(double t) const { return derivatives(t, 1)[0]; }

std::vector<Field> JetExtension::derivatives(double t, int count) const {
    if (count < 1 || count > Taylor::N)
        throw Error(ErrorCode::order_exceeds_derivative_data, "derivative count out of range");
    const int n1 = grid_.n1, n2 = grid_.n2;
    const std::size_t nm = std::size_t(n1) * std::size_t(n2);
    const Taylor s = Taylor::variable(t - t0_);
    // Taylor factors per mode: psi(<xi> s) and s^k / k!.
    std::vector<Taylor> cut(nm);
    for (std::size_t q = 0; q < nm; ++q) cut[q] = psi(bracket_[q] * s);
    std::vector<Taylor> mono(static_cast<std::size_t>(m_));
    Taylor pw(1.0);
    double fact = 1.0;
    for (int k = 0; k < m_; ++k) {
        if (k > 0) {
            pw = pw * s;
            fact *= k;
        }
        mono[std::size_t(k)] = pw / fact;
    }
    std::vector<Field> out(static_cast<std::size_t>(count), Field(grid_));
    PlaneFft ifft(n1, n2, FFTW_BACKWARD);
    const double norm = 1.0 / double(nm);
    for (int d = 0; d < count; ++d)
        for (int line = 0; line < grid_.n3; ++line)
            for (int c = 0; c < 6; ++c) {
                for (std::size_t q = 0; q < nm; ++q) {
                    Taylor pr(0.0), pi(0.0);
                    for (int k = 0; k < m_; ++k) {
                        const std::size_t b = at(k, line, c) + q;
                        pr += re_[b] * mono[std::size_t(k)];
                        pi += im_[b] * mono[std::size_t(k)];
                    }
                    ifft.data()[q][0] = (cut[q] * pr).derivative(d);
                    ifft.data()[q][1] = (cut[q] * pi).derivative(d);
                }
                ifft.run();
                for (int j = 0; j < n2; ++j)
                    for (int i = 0; i < n1; ++i)
                        out[std::size_t(d)](i, j, line)(c) =
                            ifft.data()[std::size_t(j) * std::size_t(n1) + std::size_t(i)][0] * norm;
            }
    return out;
}

double JetExtension::sobolev_surrogate() const {
    const std::size_t nm = bracket_.size();
    const double cell = grid_.h1() * grid_.h2() / double(nm);
    double sum = 0.0;
    for (int k = 0; k < m_; ++k) {
        const double s = double(m_ - k) - 0.5;
        double acc = 0.0;
        for (int line = 0; line < grid_.n3; ++line) {
            const double w = grid_.weight3(line) * cell;
            for (int c = 0; c < 6; ++c) {
                const std::size_t b = at(k, line, c);
                for (std::size_t q = 0; q < nm; ++q)
                    acc += w * std::pow(bracket_[q], 2.0 * s) * (re_[b + q] * re_[b + q] + im_[b + q] * im_[b + q]);
            }
        }
        sum += std::sqrt(acc);
    }
    return sum;
}

}  // namespace qmax
