#pragma once

// Small numerical building blocks shared by the modules: compensated
// accumulators, a fixed-shape reduction tree, and a deterministic block
// scheduler for data-parallel sums.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace liouconv {

using Complex = std::complex<double>;

/// Neumaier (improved Kahan) accumulator.
template <typename Real>
class CompensatedSum {
public:
    void add(Real v)
    {
        Real t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            carry_ += (sum_ - t) + v;
        else
            carry_ += (v - t) + sum_;
        sum_ = t;
    }
    Real value() const { return sum_ + carry_; }

private:
    Real sum_{0};
    Real carry_{0};
};

/// Complex accumulator with independent compensation on each component.
class ComplexSum {
public:
    void add(Complex v)
    {
        re_.add(v.real());
        im_.add(v.imag());
    }
    Complex value() const { return {re_.value(), im_.value()}; }

private:
    CompensatedSum<double> re_;
    CompensatedSum<double> im_;
};

/// Pairwise tree reduction; the tree shape depends only on values.size().
inline Complex pairwise_reduce(std::span<const Complex> values)
{
    if (values.empty())
        return {0.0, 0.0};
    if (values.size() == 1)
        return values[0];
    const std::size_t half = values.size() / 2;
    return pairwise_reduce(values.first(half)) + pairwise_reduce(values.subspan(half));
}

inline constexpr std::size_t kReductionBlock = 64;

/// Runs fn(begin, end) over [0, count) split into contiguous chunks, one per
/// worker. The chunking never changes what fn computes for a given index.
template <typename Fn>
void parallel_chunks(std::size_t count, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, workers);
    if (workers == 1 || count < 2) {
        fn(std::size_t{0}, count);
        return;
    }
    const std::size_t used = std::min<std::size_t>(workers, count);
    const std::size_t step = (count + used - 1) / used;
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    for (std::size_t w = 0; w < used; ++w) {
        const std::size_t begin = w * step;
        const std::size_t end = std::min(count, begin + step);
        if (begin >= end)
            break;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard guard(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

/// Sums term(i) for i in [0, count). Terms are grouped in blocks of 64,
/// each block is accumulated sequentially with compensation, and the block
/// partials are combined by a pairwise tree. The result is bit-identical
/// for any worker count.
template <typename Term>
Complex deterministic_sum(std::size_t count, unsigned workers, Term&& term)
{
    const std::size_t blocks = (count + kReductionBlock - 1) / kReductionBlock;
    std::vector<Complex> partial(blocks);
    parallel_chunks(blocks, workers, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            ComplexSum acc;
            const std::size_t end = std::min(count, (b + 1) * kReductionBlock);
            for (std::size_t i = b * kReductionBlock; i < end; ++i)
                acc.add(term(i));
            partial[b] = acc.value();
        }
    });
    return pairwise_reduce(partial);
}

/// Composite Gauss-Legendre rule on [lo, hi] with `panels` equal panels.
/// Exact for polynomials of degree <= 19 on each panel.
class GaussLegendre {
public:
    GaussLegendre();

    template <typename Fn>
    auto integrate(Fn&& fn, double lo, double hi, std::size_t panels = 1) const
    {
        using R = decltype(fn(lo));
        R total{};
        const double width = (hi - lo) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            const double a = lo + width * static_cast<double>(p);
            const double half = 0.5 * width;
            const double mid = a + half;
            R acc{};
            for (std::size_t k = 0; k < nodes_.size(); ++k)
                acc += weights_[k] * fn(mid + half * nodes_[k]);
            total += acc * half;
        }
        return total;
    }

    std::span<const double> nodes() const { return nodes_; }
    std::span<const double> weights() const { return weights_; }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

const GaussLegendre& gauss_legendre();

} // namespace liouconv
