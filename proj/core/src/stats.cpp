#include "kinlim/stats.hpp"

#include "kinlim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kinlim {

std::vector<double> uniform_edges(double lo, double hi, int bins) {
    if (!(hi > lo) || bins < 1) throw ValidationError("invalid uniform binning");
    std::vector<double> e(bins + 1);
    for (int i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * i / bins;
    e.back() = hi;
    return e;
}

std::vector<double> log_edges(double lo, double hi, int bins) {
    if (!(lo > 0.0 && hi > lo) || bins < 1) throw ValidationError("invalid logarithmic binning");
    std::vector<double> e(bins + 1);
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i <= bins; ++i) e[i] = std::exp(a + (b - a) * i / bins);
    e.front() = lo;
    e.back() = hi;
    return e;
}

std::vector<double> default_xi_edges(double xi_bar) {
    auto e = uniform_edges(0.0, 10.0 * xi_bar, 200);
    const auto tail = log_edges(10.0 * xi_bar, 1000.0 * xi_bar, 60);
    e.insert(e.end(), tail.begin() + 1, tail.end());
    return e;
}

std::vector<double> default_label_edges() { return uniform_edges(-1.0, 1.0, 40); }

Histogram::Histogram(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
    if (edges_.empty() || edges_.size() > 3) throw ValidationError("histograms have 1 to 3 axes");
    std::size_t n = 1;
    strides_.assign(edges_.size(), 1);
    for (int a = dim() - 1; a >= 0; --a) {
        const auto& e = edges_[a];
        if (e.size() < 2) throw ValidationError("each axis needs at least one bin");
        for (std::size_t i = 1; i < e.size(); ++i)
            if (!(e[i] > e[i - 1])) throw ValidationError("bin edges must increase strictly");
        strides_[a] = n;
        n *= e.size() - 1;
    }
    counts_.assign(n, 0);
}

long Histogram::locate(const double* x) const {
    std::size_t flat_index = 0;
    for (int a = 0; a < dim(); ++a) {
        const auto& e = edges_[a];
        if (!(x[a] >= e.front() && x[a] < e.back())) return -1;
        const auto it = std::upper_bound(e.begin(), e.end(), x[a]);
        flat_index += static_cast<std::size_t>(it - e.begin() - 1) * strides_[a];
    }
    return static_cast<long>(flat_index);
}

void Histogram::add(const double* x) {
    const long i = locate(x);
    if (i < 0)
        ++outside_;
    else
        ++counts_[i];
}

std::size_t Histogram::flat(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (int a = 0; a < dim(); ++a) f += idx.at(a) * strides_[a];
    return f;
}

std::vector<std::size_t> Histogram::unflat(std::size_t i) const {
    std::vector<std::size_t> idx(dim());
    for (int a = 0; a < dim(); ++a) {
        idx[a] = i / strides_[a];
        i %= strides_[a];
    }
    return idx;
}

std::uint64_t Histogram::in_range() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

double Histogram::volume(std::size_t flat_index) const {
    const auto idx = unflat(flat_index);
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= edges_[a][idx[a] + 1] - edges_[a][idx[a]];
    return v;
}

double Histogram::density(std::size_t flat_index) const {
    const auto n = total();
    if (n == 0) return 0.0;
    return static_cast<double>(counts_[flat_index]) / (static_cast<double>(n) * volume(flat_index));
}

std::vector<double> Histogram::densities() const {
    std::vector<double> out(counts_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = density(i);
    return out;
}

double Histogram::center(int axis, std::size_t bin) const {
    return 0.5 * (edges_.at(axis).at(bin) + edges_.at(axis).at(bin + 1));
}

bool Histogram::same_binning(const Histogram& other) const { return edges_ == other.edges_; }

void Histogram::merge(const Histogram& other) {
    if (other.edges_.empty()) return;
    if (edges_.empty()) {
        *this = other;
        return;
    }
    if (!same_binning(other)) throw ValidationError("histogram binning mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    outside_ += other.outside_;
    censored_ += other.censored_;
}

Histogram merge(const Histogram& a, const Histogram& b) {
    Histogram out = a;
    out.merge(b);
    return out;
}

TabulatedCdf::TabulatedCdf(std::vector<double> grid, const std::function<double(double)>& cdf) : x_(std::move(grid)) {
    if (x_.size() < 2 || !std::is_sorted(x_.begin(), x_.end())) throw ValidationError("CDF grid must be sorted");
    f_.resize(x_.size());
    double run = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
        run = std::max(run, std::clamp(cdf(x_[i]), 0.0, 1.0));
        f_[i] = run;
    }
}

double TabulatedCdf::operator()(double x) const {
    if (x <= x_.front()) return f_.front();
    if (x >= x_.back()) return f_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = it - x_.begin() - 1;
    const double t = (x - x_[i]) / (x_[i + 1] - x_[i]);
    return f_[i] + t * (f_[i + 1] - f_[i]);
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw ValidationError("empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

double ks_distance(const Histogram& h, const std::function<double(double)>& cdf) {
    if (h.dim() != 1) throw ValidationError("binned KS needs a 1-D histogram");
    const double n = static_cast<double>(h.total());
    if (n == 0.0) throw ValidationError("empty histogram");
    const auto& e = h.edges(0);
    double cum = 0.0;
    double d = std::abs(cdf(e.front()));
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        cum += static_cast<double>(h.count(i)) / n;
        d = std::max(d, std::abs(cum - cdf(e[i + 1])));
    }
    return d;
}

double l1_bin_error(const Histogram& h, const std::function<double(double)>& cdf) {
    if (h.dim() != 1) throw ValidationError("binned L1 needs a 1-D histogram");
    const double n = static_cast<double>(h.total());
    if (n == 0.0) throw ValidationError("empty histogram");
    const auto& e = h.edges(0);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        s += std::abs(static_cast<double>(h.count(i)) / n - (cdf(e[i + 1]) - cdf(e[i])));
    return s;
}

double l1_distance(const Histogram& a, const Histogram& b) {
    if (!a.same_binning(b)) throw ValidationError("histogram binning mismatch");
    const double na = static_cast<double>(a.total()), nb = static_cast<double>(b.total());
    if (na == 0.0 || nb == 0.0) throw ValidationError("empty histogram");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::abs(static_cast<double>(a.count(i)) / na - static_cast<double>(b.count(i)) / nb);
    return s;
}

FreePathAccumulator::FreePathAccumulator(double r, int d, std::vector<double> edges, bool keep_samples)
    : scale_(std::pow(r, d - 1)), keep_(keep_samples), phi0_({edges}), first_({std::move(edges)}) {
    if (!(r > 0.0) || d < 2) throw ValidationError("free path accumulator needs r > 0 and d >= 2");
}

void FreePathAccumulator::add_event(const CollisionEvent& e) {
    const double xi = scale_ * e.flight_time;
    if (e.index == 0) {
        first_.add(xi);
        first_sum_ += xi;
        if (keep_) first_samples_.push_back(xi);
        return;
    }
    phi0_.add(xi);
    sum_ += xi;
    sum2_ += xi * xi;
    if (keep_) samples_.push_back(xi);
}

void FreePathAccumulator::finish(const TrajectoryRecord& rec) {
    if (rec.reason != Termination::Censored) return;
    const double xi = scale_ * rec.censored_length;
    if (rec.collisions == 0) {
        first_.add_censored();
        first_cap_sum_ += xi;
    } else {
        phi0_.add_censored();
        cap_sum_ += xi;
        sum2_ += xi * xi;
    }
}

void FreePathAccumulator::add_record(const TrajectoryRecord& rec) {
    for (const auto& e : rec.events) add_event(e);
    finish(rec);
}

EventSink FreePathAccumulator::sink() {
    return [this](const CollisionEvent& e) { add_event(e); };
}

void FreePathAccumulator::merge(const FreePathAccumulator& other) {
    if (other.scale_ != scale_) throw ValidationError("accumulators use different r");
    phi0_.merge(other.phi0_);
    first_.merge(other.first_);
    samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
    first_samples_.insert(first_samples_.end(), other.first_samples_.begin(), other.first_samples_.end());
    sum_ += other.sum_;
    sum2_ += other.sum2_;
    first_sum_ += other.first_sum_;
    cap_sum_ += other.cap_sum_;
    first_cap_sum_ += other.first_cap_sum_;
}

double FreePathAccumulator::mean() const {
    const double n = static_cast<double>(phi0_.total());
    return n > 0 ? (sum_ + cap_sum_) / n : 0.0;
}

double FreePathAccumulator::mean_stderr() const {
    const double n = static_cast<double>(phi0_.total());
    if (n < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum2_ / n - m * m) / (n - 1));
}

double FreePathAccumulator::first_flight_mean() const {
    const double n = static_cast<double>(first_.total());
    return n > 0 ? (first_sum_ + first_cap_sum_) / n : 0.0;
}

double FreePathAccumulator::censored_fraction() const {
    const double n = static_cast<double>(phi0_.total());
    return n > 0 ? static_cast<double>(phi0_.censored()) / n : 0.0;
}

EmpiricalKernel2D::EmpiricalKernel2D(double r, std::vector<double> wp_edges, std::vector<double> xi_edges,
                                     std::vector<double> w_edges, std::vector<SpotBox> spots)
    : r_(r), hist_({std::move(wp_edges), std::move(xi_edges), std::move(w_edges)}), spots_(std::move(spots)) {
    if (!(r > 0.0)) throw ValidationError("r must be positive");
    slice_totals_.assign(hist_.bins(0), 0);
    spot_hits_.assign(spots_.size(), 0);
    spot_slice_.assign(spots_.size(), 0);
}

void EmpiricalKernel2D::add_event(const CollisionEvent& e) {
    if (e.index == 0 || std::isnan(prev_exit_)) {
        prev_exit_ = e.exit_signed;
        return;
    }
    const double wp = prev_exit_, xi = r_ * e.flight_time, w = e.impact_signed;
    const auto& we = hist_.edges(0);
    if (wp >= we.front() && wp < we.back())
        ++slice_totals_[std::upper_bound(we.begin(), we.end(), wp) - we.begin() - 1];
    hist_.add(wp, xi, w);
    for (std::size_t i = 0; i < spots_.size(); ++i) {
        const SpotBox& s = spots_[i];
        if (std::abs(wp - s.w_prime) >= s.half_w) continue;
        ++spot_slice_[i];
        if (std::abs(xi - s.xi) < s.half_xi && std::abs(w - s.w) < s.half_w) ++spot_hits_[i];
    }
    prev_exit_ = e.exit_signed;
}

void EmpiricalKernel2D::finish(const TrajectoryRecord& rec) {
    if (rec.reason == Termination::Censored && rec.collisions > 0 && !std::isnan(prev_exit_)) {
        const auto& we = hist_.edges(0);
        if (prev_exit_ >= we.front() && prev_exit_ < we.back())
            ++slice_totals_[std::upper_bound(we.begin(), we.end(), prev_exit_) - we.begin() - 1];
        hist_.add_censored();
        for (std::size_t i = 0; i < spots_.size(); ++i)
            if (std::abs(prev_exit_ - spots_[i].w_prime) < spots_[i].half_w) ++spot_slice_[i];
    }
    prev_exit_ = std::numeric_limits<double>::quiet_NaN();
}

void EmpiricalKernel2D::add_record(const TrajectoryRecord& rec) {
    prev_exit_ = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : rec.events) add_event(e);
    finish(rec);
}

EventSink EmpiricalKernel2D::sink() {
    return [this](const CollisionEvent& e) { add_event(e); };
}

void EmpiricalKernel2D::merge(const EmpiricalKernel2D& other) {
    if (other.r_ != r_ || other.spots_.size() != spots_.size()) throw ValidationError("kernel estimates differ");
    hist_.merge(other.hist_);
    for (std::size_t i = 0; i < slice_totals_.size(); ++i) slice_totals_[i] += other.slice_totals_[i];
    for (std::size_t i = 0; i < spots_.size(); ++i) {
        spot_hits_[i] += other.spot_hits_[i];
        spot_slice_[i] += other.spot_slice_[i];
    }
}

std::uint64_t EmpiricalKernel2D::transitions() const {
    return std::accumulate(slice_totals_.begin(), slice_totals_.end(), std::uint64_t{0});
}

double EmpiricalKernel2D::value(std::size_t i_wp, std::size_t i_xi, std::size_t i_w) const {
    const std::uint64_t n = slice_totals_.at(i_wp);
    if (n == 0) return 0.0;
    const auto& xe = hist_.edges(1);
    const auto& we = hist_.edges(2);
    const double cell = (xe[i_xi + 1] - xe[i_xi]) * 0.5 * (we[i_w + 1] - we[i_w]);
    return static_cast<double>(hist_.count(hist_.flat({i_wp, i_xi, i_w}))) / (static_cast<double>(n) * cell);
}

std::vector<std::size_t> EmpiricalKernel2D::sparse_slices(std::uint64_t min_count) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < slice_totals_.size(); ++i)
        if (slice_totals_[i] < min_count) out.push_back(i);
    return out;
}

EmpiricalKernel2D::Spot EmpiricalKernel2D::spot(std::size_t i) const {
    Spot s;
    s.box = spots_.at(i);
    s.hits = spot_hits_[i];
    s.slice = spot_slice_[i];
    if (s.slice == 0) return s;
    const double cell = 2.0 * s.box.half_xi * s.box.half_w;  // d xi times d p(w) = dw / 2
    s.value = static_cast<double>(s.hits) / (static_cast<double>(s.slice) * cell);
    s.stderr_ = s.hits > 0 ? s.value / std::sqrt(static_cast<double>(s.hits)) : 1.0 / (s.slice * cell);
    return s;
}

std::vector<double> kernel_cell_averages(const EmpiricalKernel2D& est, const LatticeKernel2D& k, int n) {
    if (n < 1) throw ValidationError("need n >= 1");
    const Histogram& h = est.histogram();
    std::vector<double> out(h.size());
    const auto& a = h.edges(0);
    const auto& b = h.edges(1);
    const auto& c = h.edges(2);
    for (std::size_t f = 0; f < h.size(); ++f) {
        const auto idx = h.unflat(f);
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    const double wp = a[idx[0]] + (a[idx[0] + 1] - a[idx[0]]) * (i + 0.5) / n;
                    const double xi = b[idx[1]] + (b[idx[1] + 1] - b[idx[1]]) * (j + 0.5) / n;
                    const double w = c[idx[2]] + (c[idx[2] + 1] - c[idx[2]]) * (l + 0.5) / n;
                    s += k.value(wp, xi, w);
                }
        out[f] = s / (n * n * n);
    }
    return out;
}

namespace {

std::size_t xi_bins_below(const Histogram& h, double xi_cut) {
    const auto& e = h.edges(1);
    std::size_t n = 0;
    while (n + 1 < e.size() && e[n + 1] <= xi_cut * (1.0 + 1e-12)) ++n;
    return n;
}

double cell_weight(const Histogram& h, std::size_t i_xi, std::size_t i_w) {
    return (h.edges(1)[i_xi + 1] - h.edges(1)[i_xi]) * 0.5 * (h.edges(2)[i_w + 1] - h.edges(2)[i_w]);
}

constexpr std::uint64_t kMinSlice = 1000;

}  // namespace

KernelComparison compare_kernel(const EmpiricalKernel2D& est, const LatticeKernel2D& k, double xi_cut) {
    const Histogram& h = est.histogram();
    const auto avg = kernel_cell_averages(est, k);
    const std::size_t nx = xi_bins_below(h, xi_cut);
    KernelComparison out;
    out.sparse = est.sparse_slices(kMinSlice);
    out.slice_l1.assign(h.bins(0), 0.0);
    int used = 0;
    for (std::size_t i = 0; i < h.bins(0); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < nx; ++j)
            for (std::size_t l = 0; l < h.bins(2); ++l)
                s += std::abs(est.value(i, j, l) - avg[h.flat({i, j, l})]) * cell_weight(h, j, l);
        out.slice_l1[i] = s;
        if (est.slice_totals()[i] < kMinSlice) continue;
        out.mean_l1 += s;
        out.max_l1 = std::max(out.max_l1, s);
        ++used;
    }
    if (used == 0) throw ValidationError("no kernel slice has enough transitions");
    out.mean_l1 /= used;
    return out;
}

double max_slice_spread(const EmpiricalKernel2D& est, double xi_cut) {
    const Histogram& h = est.histogram();
    const std::size_t nx = xi_bins_below(h, xi_cut);
    double worst = 0.0;
    for (std::size_t a = 0; a < h.bins(0); ++a) {
        if (est.slice_totals()[a] < kMinSlice) continue;
        for (std::size_t b = a + 1; b < h.bins(0); ++b) {
            if (est.slice_totals()[b] < kMinSlice) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < nx; ++j)
                for (std::size_t l = 0; l < h.bins(2); ++l)
                    s += std::abs(est.value(a, j, l) - est.value(b, j, l)) * cell_weight(h, j, l);
            worst = std::max(worst, s);
        }
    }
    return worst;
}

double symmetry_defect(const EmpiricalKernel2D& est, double xi_cut) {
    const Histogram& h = est.histogram();
    if (h.edges(0) != h.edges(2)) throw ValidationError("symmetry check needs equal w and w' binning");
    const std::size_t nx = xi_bins_below(h, xi_cut);
    double total = 0.0;
    int used = 0;
    for (std::size_t a = 0; a < h.bins(0); ++a) {
        if (est.slice_totals()[a] < kMinSlice) continue;
        double s = 0.0;
        for (std::size_t b = 0; b < h.bins(2); ++b) {
            if (est.slice_totals()[b] < kMinSlice) continue;
            for (std::size_t j = 0; j < nx; ++j)
                s += std::abs(est.value(a, j, b) - est.value(b, j, a)) * cell_weight(h, j, b);
        }
        total += s;
        ++used;
    }
    if (used == 0) throw ValidationError("no kernel slice has enough transitions");
    return total / used;
}

HistogramKernel2D::HistogramKernel2D(const EmpiricalKernel2D& est, double density)
    : wp_edges_(est.histogram().edges(0)),
      xi_edges_(est.histogram().edges(1)),
      w_edges_(est.histogram().edges(2)),
      density_(density),
      xi_max_(xi_edges_.back()) {
    if (!(density > 0.0)) throw ValidationError("density must be positive");
    const Histogram& h = est.histogram();
    values_.resize(h.size());
    for (std::size_t f = 0; f < h.size(); ++f) {
        const auto idx = h.unflat(f);
        values_[f] = est.value(idx[0], idx[1], idx[2]);
        sup_ = std::max(sup_, values_[f]);
    }
    if (sup_ == 0.0) throw ValidationError("empty kernel estimate");
}

double HistogramKernel2D::k(const Vec& w_prime, double xi, const Vec& w) const {
    auto bin = [](const std::vector<double>& e, double x) -> long {
        if (x < e.front() || x >= e.back()) return -1;
        return std::upper_bound(e.begin(), e.end(), x) - e.begin() - 1;
    };
    auto clamp_bin = [&](const std::vector<double>& e, double x) {
        return std::clamp<long>(std::upper_bound(e.begin(), e.end(), x) - e.begin() - 1, 0,
                                static_cast<long>(e.size()) - 2);
    };
    const long j = bin(xi_edges_, xi);
    if (j < 0) return 0.0;
    const long i = clamp_bin(wp_edges_, w_prime(0));
    const long l = clamp_bin(w_edges_, w(0));
    const std::size_t nx = xi_edges_.size() - 1, nw = w_edges_.size() - 1;
    return values_[(i * nx + j) * nw + l];
}

TailFit tail_slope(const Histogram& h, double lo, double hi, double exponent) {
    if (h.dim() != 1) throw ValidationError("tail fit needs a 1-D histogram");
    const auto& e = h.edges(0);
    std::vector<double> x, y, w;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        if (e[i] < lo * (1.0 - 1e-12) || e[i + 1] > hi * (1.0 + 1e-12) || h.count(i) == 0) continue;
        if (!(e[i] > 0.0)) continue;
        x.push_back(0.5 * (std::log(e[i]) + std::log(e[i + 1])));
        y.push_back(std::log(h.density(i)));
        w.push_back(static_cast<double>(h.count(i)));
    }
    if (x.size() < 10) throw ValidationError("tail window has fewer than 10 nonempty bins");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    TailFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.slope_stderr = 1.0 / std::sqrt(sxx);
    double chi2 = 0.0, sc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        chi2 += w[i] * r * r;
        sc += w[i] * (y[i] - exponent * x[i]);
    }
    f.bins = static_cast<int>(x.size());
    f.residual = chi2 / (f.bins - 2);
    f.constant = std::exp(sc / sw);
    f.censored_fraction = h.total() ? static_cast<double>(h.censored()) / h.total() : 0.0;
    return f;
}

CountDistribution make_distribution(const std::vector<std::uint64_t>& counts) {
    if (counts.empty()) throw ValidationError("no counts");
    CountDistribution d;
    d.samples = static_cast<long>(counts.size());
    const double n = static_cast<double>(counts.size());
    double s = 0.0;
    for (auto c : counts) {
        d.pmf[c] += 1.0 / n;
        s += static_cast<double>(c);
    }
    d.mean = s / n;
    double m2 = 0.0, m4 = 0.0;
    for (auto c : counts) {
        const double t = static_cast<double>(c) - d.mean;
        m2 += t * t;
        m4 += t * t * t * t;
    }
    d.variance = counts.size() > 1 ? m2 / (n - 1.0) : 0.0;
    d.mean_stderr = std::sqrt(d.variance / n);
    const double mu2 = m2 / n, mu4 = m4 / n;
    d.variance_stderr = std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
    return d;
}

double tv_distance(const CountDistribution& a, const CountDistribution& b) {
    double s = 0.0;
    auto ia = a.pmf.begin(), ib = b.pmf.begin();
    while (ia != a.pmf.end() || ib != b.pmf.end()) {
        if (ib == b.pmf.end() || (ia != a.pmf.end() && ia->first < ib->first)) {
            s += ia->second;
            ++ia;
        } else if (ia == a.pmf.end() || ib->first < ia->first) {
            s += ib->second;
            ++ib;
        } else {
            s += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return 0.5 * s;
}


CountStatistics count_statistics(const ScattererConfig& config, const Vec& y, double r, const std::vector<Box>& boxes,
                                 long samples, std::uint64_t seed, int threads) {
    const int d = config.dim();
    if (samples < 1) throw ValidationError("need at least one sample");
    if (boxes.empty()) throw ValidationError("need at least one box");
    for (const auto& b : boxes)
        if (b.dim() != d) throw ValidationError("box dimension mismatch");
    const bool poisson = config.is_poisson();
    if (!poisson && y.size() != d) throw ValidationError("y has the wrong dimension");
    std::vector<std::vector<std::uint64_t>> counts(boxes.size(), std::vector<std::uint64_t>(samples));
    const LorentzScatteringMap map{d, specular_angle()};
    parallel_for(samples, threads, [&](long i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        Vec wp = random_in_ball(d - 1, rng);
        ScattererConfig cfg = config;
        Vec yi = y;
        if (poisson) {
            // Palm version: the configuration plus a point at the origin, which is never counted
            auto& ps = std::get<PoissonSpec>(cfg.source);
            ps.seed = derive_seed(hash_combine(seed, 0x506f6973ULL), static_cast<std::uint64_t>(i));
            yi = Vec::Zero(d);
        }
        RenormalizedProcess proc(cfg, yi, wp, r, map);
        Vec self = Vec::Zero(d);
        self.tail(d - 1) = -wp;
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            std::uint64_t n = proc.count_in_box(boxes[b]);
            if (!poisson && n > 0 && boxes[b].contains(self)) --n;
            counts[b][i] = n;
        }
    });
    CountStatistics out;
    out.boxes = boxes;
    out.y = poisson ? Vec() : y;
    for (const auto& c : counts) out.per_box.push_back(make_distribution(c));
    return out;
}

}  // namespace kinlim
