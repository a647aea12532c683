#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace sns::spectral {

using cplx = std::complex<double>;

// Real field on the torus [0, 2pi)^2, f(x) = sum_k f_k e^{i k.x}, square
// truncation |k|_inf <= N. Storage keeps the half plane k2 >= 0 for every
// component; the k2 = 0 row stores both k1 and -k1 (kept conjugate).
class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(int N, int components = 2);

    int cutoff() const { return n_; }
    int components() const { return comps_; }
    bool empty() const { return data_.empty(); }

    static std::size_t row_length(int N) { return static_cast<std::size_t>(N) + 1; }
    std::size_t index(int c, int k1, int k2) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(2 * n_ + 1) +
                static_cast<std::size_t>(k1 + n_)) *
                   row_length(n_) +
               static_cast<std::size_t>(k2);
    }

    // k2 >= 0 only.
    cplx& at(int c, int k1, int k2) { return data_[index(c, k1, k2)]; }
    const cplx& at(int c, int k1, int k2) const { return data_[index(c, k1, k2)]; }
    // Any k with |k|_inf <= N.
    cplx coef(int c, int k1, int k2) const;
    // Sets f_k and f_{-k} = conj(f_k).
    void set_mode(int c, int k1, int k2, cplx v);

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    void set_zero();
    void enforce_hermitian();  // copy k1 > 0 onto k1 < 0 on the k2 = 0 row; zero mode real
    bool same_shape(const SpectralField& o) const { return n_ == o.n_ && comps_ == o.comps_; }

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double a);
    void axpy(double a, const SpectralField& x);  // this += a x

    // Zero-pad or truncate to a new cutoff.
    SpectralField resized(int N) const;

private:
    int n_ = 0;
    int comps_ = 0;
    std::vector<cplx> data_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

// sum over all k and components of Re(conj(a_k) b_k)
double inner(const SpectralField& a, const SpectralField& b);
double norm(const SpectralField& a);  // sqrt(inner(a, a))
double max_abs_diff(const SpectralField& a, const SpectralField& b);
double max_abs(const SpectralField& a);

// max_k |k . f_k| for a 2-component field
double max_divergence(const SpectralField& f);

// Leray projector P_k = I - k k^T / |k|^2 applied per mode; zero mode removed.
void leray_project_inplace(SpectralField& f);
SpectralField leray_project(const SpectralField& f);

// Visit every stored mode of the half plane once: fn(k1, k2, weight), where
// weight counts how many modes of the full lattice the entry stands for (1 or 2).
template <class Fn>
void for_each_stored_mode(int N, Fn&& fn) {
    for (int k1 = -N; k1 <= N; ++k1)
        for (int k2 = 0; k2 <= N; ++k2) fn(k1, k2, k2 == 0 ? 1 : 2);
}

// Representatives of +-k pairs (k2 > 0, or k2 = 0 and k1 > 0) listed shell by
// shell in |k|_inf, so the list for N is a prefix of the list for N + 1.
const std::vector<std::pair<int, int>>& shell_order(int N);

// ---------------------------------------------------------------------------
// FFT between coefficients and an M x M physical grid (x_j = 2 pi j / M).

template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) {}
    T* allocate(std::size_t n);
    void deallocate(T* p, std::size_t) noexcept;
    template <class U>
    bool operator==(const FftwAllocator<U>&) const { return true; }
};

using RealGrid = std::vector<double, FftwAllocator<double>>;

// Smallest 2^a 3^b 5^c 7^d >= n.
int nice_fft_size(int n);
// Grid on which quadratic products of degree-N fields are alias free (M >= 3N+1).
int dealiased_grid_size(int N);

class GridTransform {
public:
    GridTransform(int N, int M);
    ~GridTransform();
    GridTransform(const GridTransform&) = delete;
    GridTransform& operator=(const GridTransform&) = delete;

    int cutoff() const { return n_; }
    int grid() const { return m_; }
    std::size_t grid_points() const { return static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_); }
    RealGrid make_grid() const { return RealGrid(grid_points(), 0.0); }

    // Values of component c on the grid, row-major [j1][j2].
    void to_grid(const SpectralField& f, int c, double* out);
    // Coefficients |k|_inf <= N of a grid function into component c of f.
    void from_grid(const double* in, SpectralField& f, int c);

private:
    int n_, m_;
    std::size_t half_;
    cplx* spec_ = nullptr;
    void* col_bwd_ = nullptr;
    void* col_fwd_ = nullptr;
    void* row_c2r_ = nullptr;
    void* row_r2c_ = nullptr;
};

std::mutex& fftw_planner_mutex();

}  // namespace sns::spectral
