#include "sns/spectral/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace sns::spectral {

SpectralField::SpectralField(int N, int components) : n_(N), comps_(components) {
    if (N < 1) throw std::invalid_argument("spectral field: cutoff must be >= 1");
    if (components < 1) throw std::invalid_argument("spectral field: components must be >= 1");
    data_.assign(static_cast<std::size_t>(components) * static_cast<std::size_t>(2 * N + 1) * row_length(N), cplx{});
}

cplx SpectralField::coef(int c, int k1, int k2) const {
    if (std::abs(k1) > n_ || std::abs(k2) > n_) return {};
    if (k2 >= 0) return at(c, k1, k2);
    return std::conj(at(c, -k1, -k2));
}

void SpectralField::set_mode(int c, int k1, int k2, cplx v) {
    if (k2 < 0 || (k2 == 0 && k1 < 0)) {
        k1 = -k1;
        k2 = -k2;
        v = std::conj(v);
    }
    at(c, k1, k2) = v;
    if (k2 == 0) at(c, -k1, 0) = std::conj(v);
}

void SpectralField::set_zero() { std::fill(data_.begin(), data_.end(), cplx{}); }

void SpectralField::enforce_hermitian() {
    for (int c = 0; c < comps_; ++c) {
        for (int k1 = 1; k1 <= n_; ++k1) at(c, -k1, 0) = std::conj(at(c, k1, 0));
        at(c, 0, 0) = cplx(at(c, 0, 0).real(), 0.0);
    }
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    if (!same_shape(o)) throw std::invalid_argument("field shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    if (!same_shape(o)) throw std::invalid_argument("field shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double a) {
    for (auto& v : data_) v *= a;
    return *this;
}

void SpectralField::axpy(double a, const SpectralField& x) {
    if (!same_shape(x)) throw std::invalid_argument("field shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

SpectralField SpectralField::resized(int N) const {
    SpectralField out(N, comps_);
    const int m = std::min(N, n_);
    for (int c = 0; c < comps_; ++c)
        for (int k1 = -m; k1 <= m; ++k1)
            for (int k2 = 0; k2 <= m; ++k2) out.at(c, k1, k2) = at(c, k1, k2);
    return out;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

double inner(const SpectralField& a, const SpectralField& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("field shape mismatch");
    const int N = a.cutoff();
    double s = 0.0;
    for (int c = 0; c < a.components(); ++c)
        for_each_stored_mode(N, [&](int k1, int k2, int w) {
            const cplx x = a.at(c, k1, k2), y = b.at(c, k1, k2);
            s += w * (x.real() * y.real() + x.imag() * y.imag());
        });
    return s;
}

double norm(const SpectralField& a) { return std::sqrt(inner(a, a)); }

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("field shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double q = std::norm(a.data()[i] - b.data()[i]);
        if (std::isnan(q)) return q;
        m = std::max(m, q);
    }
    return std::sqrt(m);
}

double max_abs(const SpectralField& a) {
    double m = 0.0;
    for (const auto& v : a.data()) {
        const double q = std::norm(v);
        if (std::isnan(q)) return q;
        m = std::max(m, q);
    }
    return std::sqrt(m);
}

double max_divergence(const SpectralField& f) {
    if (f.components() != 2) throw std::invalid_argument("divergence needs a 2-component field");
    double m = 0.0;
    for_each_stored_mode(f.cutoff(), [&](int k1, int k2, int) {
        m = std::max(m, std::abs(double(k1) * f.at(0, k1, k2) + double(k2) * f.at(1, k1, k2)));
    });
    return m;
}

void leray_project_inplace(SpectralField& f) {
    if (f.components() != 2) throw std::invalid_argument("Leray projection needs a 2-component field");
    for_each_stored_mode(f.cutoff(), [&](int k1, int k2, int) {
        cplx& a = f.at(0, k1, k2);
        cplx& b = f.at(1, k1, k2);
        if (k1 == 0 && k2 == 0) {
            a = b = cplx{};
            return;
        }
        const double q = 1.0 / double(k1 * k1 + k2 * k2);
        const cplx kd = (double(k1) * a + double(k2) * b) * q;
        a -= double(k1) * kd;
        b -= double(k2) * kd;
    });
}

SpectralField leray_project(const SpectralField& f) {
    SpectralField g = f;
    leray_project_inplace(g);
    return g;
}

const std::vector<std::pair<int, int>>& shell_order(int N) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<std::vector<std::pair<int, int>>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[N];
    if (!slot) {
        auto v = std::make_unique<std::vector<std::pair<int, int>>>();
        for (int m = 1; m <= N; ++m)
            for (int k2 = 0; k2 <= m; ++k2)
                for (int k1 = -m; k1 <= m; ++k1) {
                    if (std::max(std::abs(k1), k2) != m) continue;
                    if (k2 == 0 && k1 <= 0) continue;
                    v->emplace_back(k1, k2);
                }
        slot = std::move(v);
    }
    return *slot;
}

// ---------------------------------------------------------------------------

template <class T>
T* FftwAllocator<T>::allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p && n) throw std::bad_alloc();
    return static_cast<T*>(p);
}

template <class T>
void FftwAllocator<T>::deallocate(T* p, std::size_t) noexcept {
    fftw_free(p);
}

template struct FftwAllocator<double>;
template struct FftwAllocator<cplx>;

int nice_fft_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

int dealiased_grid_size(int N) { return nice_fft_size(3 * N + 1); }

std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

// Only the columns k2 <= N carry data, so the 2-D transforms are split into
// 1-D passes and the column pass skips the empty columns.
GridTransform::GridTransform(int N, int M) : n_(N), m_(M) {
    if (M < 2 * N + 1) throw std::invalid_argument("grid too small for the cutoff");
    half_ = static_cast<std::size_t>(M / 2 + 1);
    spec_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(M) * half_));
    double* real = static_cast<double*>(fftw_malloc(sizeof(double) * grid_points()));
    auto* c = reinterpret_cast<fftw_complex*>(spec_);
    const int h = static_cast<int>(half_);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        // ESTIMATE keeps the plans, hence the rounding, identical from run to run
        col_bwd_ = fftw_plan_many_dft(1, &m_, N + 1, c, nullptr, h, 1, c, nullptr, h, 1, FFTW_BACKWARD, FFTW_ESTIMATE);
        col_fwd_ = fftw_plan_many_dft(1, &m_, N + 1, c, nullptr, h, 1, c, nullptr, h, 1, FFTW_FORWARD, FFTW_ESTIMATE);
        row_c2r_ = fftw_plan_many_dft_c2r(1, &m_, M, c, nullptr, 1, h, real, nullptr, 1, M, FFTW_ESTIMATE);
        row_r2c_ = fftw_plan_many_dft_r2c(1, &m_, M, real, nullptr, 1, M, c, nullptr, 1, h, FFTW_ESTIMATE);
    }
    fftw_free(real);
}

GridTransform::~GridTransform() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    for (void* p : {col_bwd_, col_fwd_, row_c2r_, row_r2c_}) fftw_destroy_plan(static_cast<fftw_plan>(p));
    fftw_free(spec_);
}

void GridTransform::to_grid(const SpectralField& f, int c, double* out) {
    if (f.cutoff() > n_) throw std::invalid_argument("field cutoff exceeds transform cutoff");
    const int N = f.cutoff();
    for (int r = 0; r < m_; ++r) {
        cplx* row = spec_ + static_cast<std::size_t>(r) * half_;
        const int k1 = r <= m_ / 2 ? r : r - m_;
        if (std::abs(k1) <= N) {
            std::copy(&f.at(c, k1, 0), &f.at(c, k1, 0) + N + 1, row);
            std::fill(row + N + 1, row + half_, cplx{});
        } else {
            std::fill(row, row + half_, cplx{});
        }
    }
    fftw_execute_dft(static_cast<fftw_plan>(col_bwd_), reinterpret_cast<fftw_complex*>(spec_),
                     reinterpret_cast<fftw_complex*>(spec_));
    fftw_execute_dft_c2r(static_cast<fftw_plan>(row_c2r_), reinterpret_cast<fftw_complex*>(spec_), out);
}

void GridTransform::from_grid(const double* in, SpectralField& f, int c) {
    if (f.cutoff() > n_) throw std::invalid_argument("field cutoff exceeds transform cutoff");
    fftw_execute_dft_r2c(static_cast<fftw_plan>(row_r2c_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(spec_));
    fftw_execute_dft(static_cast<fftw_plan>(col_fwd_), reinterpret_cast<fftw_complex*>(spec_),
                     reinterpret_cast<fftw_complex*>(spec_));
    const int N = f.cutoff();
    const double scale = 1.0 / static_cast<double>(grid_points());
    for (int k1 = -N; k1 <= N; ++k1) {
        const cplx* row = spec_ + static_cast<std::size_t>((k1 + m_) % m_) * half_;
        cplx* dst = &f.at(c, k1, 0);
        for (int k2 = 0; k2 <= N; ++k2) dst[k2] = row[k2] * scale;
    }
}

}  // namespace sns::spectral
