#include "splatprune/metrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

namespace splat {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr double kC1 = kSsimK1 * kSsimK1; // dynamic range 1
constexpr double kC2 = kSsimK2 * kSsimK2;

const double* ssim_kernel() {
    static const auto kernel = [] {
        std::array<double, kWin> k{};
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - kHalf;
            k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += k[i];
        }
        for (double& v : k) {
            v /= sum;
        }
        return k;
    }();
    return kernel.data();
}

// Separable valid-region blur: input H x W plane, output (H-10) x (W-10).
void blur_valid(const std::vector<double>& in, int h, int w, std::vector<double>& tmp,
                std::vector<double>& out) {
    const double* g = ssim_kernel();
    const int wv = w - 2 * kHalf;
    const int hv = h - 2 * kHalf;
    tmp.assign(static_cast<std::size_t>(h) * wv, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < wv; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                acc += g[k] * in[static_cast<std::size_t>(r) * w + c + k];
            }
            tmp[static_cast<std::size_t>(r) * wv + c] = acc;
        }
    }
    out.assign(static_cast<std::size_t>(hv) * wv, 0.0);
    for (int r = 0; r < hv; ++r) {
        for (int c = 0; c < wv; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                acc += g[k] * tmp[static_cast<std::size_t>(r + k) * wv + c];
            }
            out[static_cast<std::size_t>(r) * wv + c] = acc;
        }
    }
}

// Correlation of a window-center field (zero outside the valid region) with
// the kernel, evaluated at every pixel of the full image.
void spread_full(const std::vector<double>& centers, int h, int w, std::vector<double>& tmp,
                 std::vector<double>& out) {
    const double* g = ssim_kernel();
    const int wv = w - 2 * kHalf;
    const int hv = h - 2 * kHalf;
    // A center with valid index (r, c) sits at image position (r+5, c+5) and
    // weights pixel (i, j) by g[i-r-5+5] * g[j-c-5+5]; gather per axis.
    tmp.assign(static_cast<std::size_t>(hv) * w, 0.0);
    for (int r = 0; r < hv; ++r) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                const int cc = j - k;
                if (cc >= 0 && cc < wv) {
                    acc += g[k] * centers[static_cast<std::size_t>(r) * wv + cc];
                }
            }
            tmp[static_cast<std::size_t>(r) * w + j] = acc;
        }
    }
    out.assign(static_cast<std::size_t>(h) * w, 0.0);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) {
                const int rr = i - k;
                if (rr >= 0 && rr < hv) {
                    acc += g[k] * tmp[static_cast<std::size_t>(rr) * w + j];
                }
            }
            out[static_cast<std::size_t>(i) * w + j] = acc;
        }
    }
}

void check_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("image shapes differ");
    }
}

void extract_channel(const Image& img, int ch, std::vector<double>& plane) {
    plane.resize(img.pixel_count());
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        plane[p] = img.data[p * 3 + ch];
    }
}

} // namespace

double psnr(const Image& a, const Image& b) {
    check_same_shape(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.data.size());
    if (mse <= 0.0) {
        return 100.0;
    }
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

// Shared SSIM core; when grad != nullptr also accumulates d(value)/d(a).
double ssim_impl(const Image& a, const Image& b, std::vector<double>* grad) {
    check_same_shape(a, b);
    if (a.width < kWin || a.height < kWin) {
        throw ShapeError("image smaller than the 11x11 SSIM window");
    }
    const int h = a.height;
    const int w = a.width;
    const int hv = h - 2 * kHalf;
    const int wv = w - 2 * kHalf;
    const std::size_t n_windows = static_cast<std::size_t>(hv) * wv;

    if (grad) {
        grad->assign(a.data.size(), 0.0);
    }

    std::vector<double> pa, pb, prod, tmp;
    std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
    std::vector<double> field_p, field_q, field_r, sp_p, sp_q, sp_r;
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        extract_channel(a, ch, pa);
        extract_channel(b, ch, pb);
        blur_valid(pa, h, w, tmp, mu_a);
        blur_valid(pb, h, w, tmp, mu_b);
        prod.resize(pa.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            prod[i] = pa[i] * pa[i];
        }
        blur_valid(prod, h, w, tmp, m_aa);
        for (std::size_t i = 0; i < pb.size(); ++i) {
            prod[i] = pb[i] * pb[i];
        }
        blur_valid(prod, h, w, tmp, m_bb);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            prod[i] = pa[i] * pb[i];
        }
        blur_valid(prod, h, w, tmp, m_ab);

        if (grad) {
            field_p.assign(n_windows, 0.0);
            field_q.assign(n_windows, 0.0);
            field_r.assign(n_windows, 0.0);
        }
        double channel_sum = 0.0;
        for (std::size_t i = 0; i < n_windows; ++i) {
            const double ma = mu_a[i];
            const double mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            const double a1 = 2.0 * ma * mb + kC1;
            const double a2 = 2.0 * cov + kC2;
            const double b1 = ma * ma + mb * mb + kC1;
            const double b2 = va + vb + kC2;
            channel_sum += (a1 * a2) / (b1 * b2);
            if (grad) {
                const double alpha = 2.0 * (mb * a2 * b1 - ma * a1 * a2) / (b1 * b1 * b2);
                const double beta = -2.0 * a1 * a2 / (b1 * b2 * b2);
                const double gamma = 2.0 * a1 / (b1 * b2);
                field_p[i] = alpha - beta * ma - gamma * mb;
                field_q[i] = beta;
                field_r[i] = gamma;
            }
        }
        total += channel_sum / static_cast<double>(n_windows);

        if (grad) {
            spread_full(field_p, h, w, tmp, sp_p);
            spread_full(field_q, h, w, tmp, sp_q);
            spread_full(field_r, h, w, tmp, sp_r);
            const double scale = 1.0 / (static_cast<double>(n_windows) * 3.0);
            for (std::size_t p = 0; p < a.pixel_count(); ++p) {
                (*grad)[p * 3 + ch] = scale * (sp_p[p] + pa[p] * sp_q[p] + pb[p] * sp_r[p]);
            }
        }
    }
    return total / 3.0;
}

} // namespace

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, nullptr); }

SsimResult ssim_with_gradient(const Image& a, const Image& b) {
    SsimResult out;
    out.value = ssim_impl(a, b, &out.d_value_d_a);
    return out;
}

GrayImage residual_map(const Image& a, const Image& b) {
    check_same_shape(a, b);
    GrayImage out(a.width, a.height);
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        out.data[p] = (std::abs(a.data[p * 3] - b.data[p * 3]) +
                       std::abs(a.data[p * 3 + 1] - b.data[p * 3 + 1]) +
                       std::abs(a.data[p * 3 + 2] - b.data[p * 3 + 2])) /
                      3.0;
    }
    return out;
}

Histogram volume_histogram(const GaussianCloud& cloud, int bins) {
    if (bins < 1) {
        throw InvalidParameterError("bins must be >= 1");
    }
    std::vector<double> values(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        values[i] = 2.0 * cloud.log_scales[i].sum(); // ln det Sigma
    }
    double lo = 0.0;
    double hi = 1.0;
    if (!values.empty()) {
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
    }
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram out;
    out.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) {
        out.edges[i] = lo + (hi - lo) * i / bins;
    }
    out.counts.assign(bins, 0);
    for (double v : values) {
        const int idx = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
        ++out.counts[std::max(0, idx)];
    }
    return out;
}

MetricsRecord evaluate_views(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                             int divisor, const RenderConfig& cfg) {
    MetricsRecord rec;
    rec.gaussian_count = static_cast<long>(cloud.size());
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    int counted = 0;
    for (const CameraView& view : views) {
        if (!view.gt_image) {
            continue;
        }
        const RenderedImage rendered = render_view(cloud, view, divisor, cfg);
        Image gt = *view.gt_image;
        if (divisor > 1) {
            // Area-average the ground truth down to the render resolution.
            Image small(rendered.rgb.width, rendered.rgb.height);
            for (int r = 0; r < small.height; ++r) {
                for (int c = 0; c < small.width; ++c) {
                    for (int ch = 0; ch < 3; ++ch) {
                        double acc = 0.0;
                        int cnt = 0;
                        for (int dr = 0; dr < divisor; ++dr) {
                            for (int dc = 0; dc < divisor; ++dc) {
                                const int rr = r * divisor + dr;
                                const int cc = c * divisor + dc;
                                if (rr < gt.height && cc < gt.width) {
                                    acc += gt.at(rr, cc, ch);
                                    ++cnt;
                                }
                            }
                        }
                        small.at(r, c, ch) = cnt > 0 ? acc / cnt : 0.0;
                    }
                }
            }
            gt = std::move(small);
        }
        const double p = psnr(rendered.rgb, gt);
        const double s = ssim(rendered.rgb, gt);
        rec.per_view_psnr.push_back(p);
        rec.per_view_ssim.push_back(s);
        psnr_sum += p;
        ssim_sum += s;
        ++counted;
    }
    if (counted > 0) {
        rec.psnr_db = psnr_sum / counted;
        rec.ssim = ssim_sum / counted;
    }
    return rec;
}

double bench_fps(const GaussianCloud& cloud, const std::vector<CameraView>& views, int frames,
                 int warmup, int divisor, const RenderConfig& cfg) {
    if (frames < 1) {
        throw InvalidParameterError("frames must be >= 1");
    }
    if (views.empty()) {
        throw InvalidParameterError("bench_fps needs at least one view");
    }
    for (int i = 0; i < warmup; ++i) {
        render_view(cloud, views[i % views.size()], divisor, cfg);
    }
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < frames; ++i) {
        render_view(cloud, views[i % views.size()], divisor, cfg);
    }
    const auto stop = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(stop - start).count();
    return frames / std::max(elapsed, 1e-9);
}

} // namespace splat
