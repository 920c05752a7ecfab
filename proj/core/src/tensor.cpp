#include "vlfsig/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>

#include "kernels.hpp"

namespace vlfsig {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::vector<double>& acc_grad(detail::TensorData* d) {
    if (d->grad.empty()) d->grad.assign(d->value.size(), 0.0);
    return d->grad;
}

void check_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from_values(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
    const auto n = shape_numel(shape);
    Tensor t = from_values(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), fill),
                           requires_grad);
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    if (values.empty()) values.assign(n, 0.0);
    if (values.size() != n)
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
    Tensor t;
    t.d_ = std::make_shared<detail::TensorData>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(values);
    t.d_->requires_grad = requires_grad;
    t.d_->is_leaf = true;
    t.d_->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_values({1}, {v}, requires_grad);
}

Tensor Tensor::op_output(Shape shape, bool requires_grad) {
    Tensor t = from_values(std::move(shape), {}, requires_grad);
    t.d_->is_leaf = false;
    return t;
}

const Shape& Tensor::shape() const {
    if (!d_) throw StateError("use of empty tensor");
    return d_->shape;
}

int Tensor::dim(int i) const {
    const auto& s = shape();
    if (i < 0) i += static_cast<int>(s.size());
    if (i < 0 || i >= static_cast<int>(s.size()))
        throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::size() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
    if (!d_) throw StateError("use of empty tensor");
    return d_->value;
}

std::span<double> Tensor::values_mut() {
    if (!d_) throw StateError("use of empty tensor");
    if (!d_->is_leaf) throw StateError("only leaf tensors may be mutated");
    return d_->value;
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
    if (!d_) throw StateError("use of empty tensor");
    if (!d_->is_leaf) throw StateError("requires_grad can only be toggled on leaf tensors");
    d_->requires_grad = rg;
}

bool Tensor::is_leaf() const { return d_ && d_->is_leaf; }

bool Tensor::has_grad() const { return d_ && !d_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!d_) throw StateError("use of empty tensor");
    if (d_->grad.empty()) throw StateError("tensor has no gradient; run backward first");
    return d_->grad;
}

std::span<double> Tensor::grad_mut() {
    if (!d_) throw StateError("use of empty tensor");
    return acc_grad(d_.get());
}

void Tensor::zero_grad() {
    if (!d_) throw StateError("use of empty tensor");
    std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

std::uint64_t Tensor::id() const {
    if (!d_) throw StateError("use of empty tensor");
    return d_->id;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() requires a scalar, got " + shape_str(shape()));
    return values()[0];
}

// --- Graph ------------------------------------------------------------------

bool Graph::wants_grad(std::initializer_list<const Tensor*> inputs) const {
    if (!record_ || consumed_) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void Graph::push(Tensor& out, std::initializer_list<const Tensor*> inputs,
                 std::function<void()> back) {
    OpRecord rec;
    rec.out = out.d_;
    rec.inputs.reserve(inputs.size());
    for (const Tensor* t : inputs) rec.inputs.push_back(t->d_);
    rec.back = std::move(back);
    tape_.push_back(std::move(rec));
}

std::vector<std::pair<std::vector<std::uint64_t>, std::uint64_t>> Graph::topology() const {
    std::vector<std::pair<std::vector<std::uint64_t>, std::uint64_t>> out;
    out.reserve(tape_.size());
    for (const auto& rec : tape_) {
        std::vector<std::uint64_t> in_ids;
        for (const auto& p : rec.inputs) in_ids.push_back(p->id);
        out.emplace_back(std::move(in_ids), rec.out->id);
    }
    return out;
}

void Graph::backward(const Tensor& loss) {
    if (!record_) throw StateError("backward on a non-recording graph");
    if (consumed_) throw StateError("backward on a consumed graph");
    if (loss.size() != 1)
        throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    acc_grad(loss.node())[0] += 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        if (it->out->grad.empty()) continue;  // no downstream consumer
        it->back();
    }
    for (auto& rec : tape_)
        if (!rec.out->is_leaf) {
            rec.out->grad.clear();
            rec.out->grad.shrink_to_fit();
        }
    tape_.clear();
    consumed_ = true;
}

// --- ops --------------------------------------------------------------------

Tensor Graph::matmul(const Tensor& a, const Tensor& b) { return matmul_ex(a, b, false, false); }

Tensor Graph::matmul_ex(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    check_rank(a, 2, "matmul");
    check_rank(b, 2, "matmul");
    const int M = trans_a ? a.dim(1) : a.dim(0);
    const int Ka = trans_a ? a.dim(0) : a.dim(1);
    const int Kb = trans_b ? b.dim(1) : b.dim(0);
    const int N = trans_b ? b.dim(0) : b.dim(1);
    if (Ka != Kb)
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                         (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) +
                         (trans_b ? "^T" : ""));
    const int K = Ka;
    Tensor out = Tensor::op_output({M, N}, wants_grad({&a, &b}));
    kern::gemm(trans_a, trans_b, M, N, K, 1.0, a.values().data(), a.dim(1), b.values().data(),
               b.dim(1), out.d_->value.data(), N, false);
    if (out.requires_grad()) {
        auto ad = a.d_, bd = b.d_, od = out.d_;
        push(out, {&a, &b}, [ad, bd, od, trans_a, trans_b, M, N, K] {
            const double* dc = od->grad.data();
            if (ad->requires_grad) {
                double* da = acc_grad(ad.get()).data();
                const double* bv = bd->value.data();
                if (!trans_a && !trans_b)
                    kern::gemm(false, true, M, K, N, 1.0, dc, N, bv, N, da, K, true);
                else if (!trans_a && trans_b)
                    kern::gemm(false, false, M, K, N, 1.0, dc, N, bv, K, da, K, true);
                else if (trans_a && !trans_b)
                    kern::gemm(false, true, K, M, N, 1.0, bv, N, dc, N, da, M, true);
                else
                    kern::gemm(true, true, K, M, N, 1.0, bv, K, dc, N, da, M, true);
            }
            if (bd->requires_grad) {
                double* db = acc_grad(bd.get()).data();
                const double* av = ad->value.data();
                if (!trans_a && !trans_b)
                    kern::gemm(true, false, K, N, M, 1.0, av, K, dc, N, db, N, true);
                else if (!trans_a && trans_b)
                    kern::gemm(true, false, N, K, M, 1.0, dc, N, av, K, db, K, true);
                else if (trans_a && !trans_b)
                    kern::gemm(false, false, K, N, M, 1.0, av, M, dc, N, db, N, true);
                else
                    kern::gemm(true, true, N, K, M, 1.0, dc, N, av, M, db, K, true);
            }
        });
    }
    return out;
}

Tensor Graph::conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (pad < 0) throw ShapeError("conv1d pad must be non-negative");
    return conv1d_asym(x, w, b, stride, pad, pad);
}

Tensor Graph::conv1d_asym(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                          int pad_left, int pad_right) {
    check_rank(x, 2, "conv1d");
    check_rank(w, 3, "conv1d weight");
    check_rank(b, 1, "conv1d bias");
    const int cin = x.dim(0), len = x.dim(1);
    const int cout = w.dim(0), ksz = w.dim(2);
    if (stride < 1) throw ShapeError("conv1d stride must be >= 1");
    if (pad_left < 0) throw ShapeError("conv1d pad_left must be non-negative");
    if (w.dim(1) != cin)
        throw ShapeError("conv1d channel mismatch: x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    if (b.dim(0) != cout)
        throw ShapeError("conv1d bias mismatch: w " + shape_str(w.shape()) + " vs b " +
                         shape_str(b.shape()));
    const int padded = len + pad_left + pad_right;
    if (ksz > padded)
        throw ShapeError("conv1d kernel size " + std::to_string(ksz) +
                         " exceeds padded input length " + std::to_string(padded) + " (x " +
                         shape_str(x.shape()) + ")");
    const int lout = (padded - ksz) / stride + 1;
    Tensor out = Tensor::op_output({cout, lout}, wants_grad({&x, &w, &b}));
    kern::conv1d_forward(x.values().data(), cin, len, w.values().data(), cout, ksz,
                         b.values().data(), stride, pad_left, out.d_->value.data(), lout);
    if (out.requires_grad()) {
        auto xd = x.d_, wd = w.d_, bd = b.d_, od = out.d_;
        push(out, {&x, &w, &b}, [xd, wd, bd, od, cin, len, cout, ksz, stride, pad_left, lout] {
            const double* dy = od->grad.data();
            if (xd->requires_grad)
                kern::conv1d_backward_x(dy, cout, lout, wd->value.data(), cin, ksz, stride,
                                        pad_left, acc_grad(xd.get()).data(), len);
            if (wd->requires_grad)
                kern::conv1d_backward_w(dy, cout, lout, xd->value.data(), cin, len, ksz, stride,
                                        pad_left, acc_grad(wd.get()).data());
            if (bd->requires_grad)
                kern::conv1d_backward_b(dy, cout, lout, acc_grad(bd.get()).data());
        });
    }
    return out;
}

Tensor Graph::softmax(const Tensor& x, int axis) {
    const auto& s = x.shape();
    const int rank = x.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw ShapeError("softmax axis out of range for " + shape_str(s));
    const auto n = x.size();
    const int width = s[static_cast<std::size_t>(axis)];
    std::int64_t inner = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= s[static_cast<std::size_t>(i)];
    const std::int64_t lines = n / width;

    Tensor out = Tensor::op_output(s, wants_grad({&x}));
    double* y = out.d_->value.data();
    std::copy(x.values().begin(), x.values().end(), y);
    if (inner == 1) {
        kern::softmax_rows_inplace(y, lines, width);
    } else {
        for (std::int64_t line = 0; line < lines; ++line) {
            const std::int64_t o = line / inner, i = line % inner;
            double* base = y + o * width * inner + i;
            double m = base[0];
            for (int t = 1; t < width; ++t) m = std::max(m, base[t * inner]);
            double sum = 0.0;
            for (int t = 0; t < width; ++t) {
                const double e = std::exp(base[t * inner] - m);
                base[t * inner] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (int t = 0; t < width; ++t) base[t * inner] *= inv;
        }
    }
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, width, inner, lines] {
            const double* yv = od->value.data();
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
#pragma omp parallel for schedule(static) if (lines * width > 16384)
            for (std::int64_t line = 0; line < lines; ++line) {
                const std::int64_t o = line / inner, i = line % inner;
                const std::int64_t base = o * width * inner + i;
                double dot = 0.0;
                for (int t = 0; t < width; ++t) {
                    const std::int64_t idx = base + t * inner;
                    dot += dy[idx] * yv[idx];
                }
                for (int t = 0; t < width; ++t) {
                    const std::int64_t idx = base + t * inner;
                    dx[idx] += yv[idx] * (dy[idx] - dot);
                }
            }
        });
    }
    return out;
}

Tensor Graph::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const auto& s = x.shape();
    if (x.rank() < 1) throw ShapeError("layer_norm requires rank >= 1");
    const int width = s.back();
    check_rank(gamma, 1, "layer_norm gamma");
    check_rank(beta, 1, "layer_norm beta");
    if (gamma.dim(0) != width || beta.dim(0) != width)
        throw ShapeError("layer_norm parameter width mismatch: x " + shape_str(s) + ", gamma " +
                         shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
    const std::int64_t rows = x.size() / width;

    Tensor out = Tensor::op_output(s, wants_grad({&x, &gamma, &beta}));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
    auto inv_sd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    {
        const double* xv = x.values().data();
        const double* gv = gamma.values().data();
        const double* bv = beta.values().data();
        double* yv = out.d_->value.data();
        double* hv = xhat->data();
#pragma omp parallel for schedule(static) if (rows * width > 16384)
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* xr = xv + r * width;
            double* yr = yv + r * width;
            double* hr = hv + r * width;
            double mean = 0.0;
            for (int j = 0; j < width; ++j) mean += xr[j];
            mean /= width;
            double var = 0.0;
            for (int j = 0; j < width; ++j) {
                const double d = xr[j] - mean;
                var += d * d;
            }
            var /= width;
            const double inv = 1.0 / std::sqrt(var + eps);
            (*inv_sd)[static_cast<std::size_t>(r)] = inv;
            for (int j = 0; j < width; ++j) {
                hr[j] = (xr[j] - mean) * inv;
                yr[j] = gv[j] * hr[j] + bv[j];
            }
        }
    }
    if (out.requires_grad()) {
        auto xd = x.d_, gd = gamma.d_, bd = beta.d_, od = out.d_;
        push(out, {&x, &gamma, &beta}, [xd, gd, bd, od, xhat, inv_sd, rows, width] {
            const double* dy = od->grad.data();
            const double* hv = xhat->data();
            const double* gv = gd->value.data();
            if (xd->requires_grad) {
                double* dx = acc_grad(xd.get()).data();
#pragma omp parallel for schedule(static) if (rows * width > 16384)
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* dyr = dy + r * width;
                    const double* hr = hv + r * width;
                    double* dxr = dx + r * width;
                    const double inv = (*inv_sd)[static_cast<std::size_t>(r)];
                    double s1 = 0.0, s2 = 0.0;
                    for (int j = 0; j < width; ++j) {
                        const double dh = dyr[j] * gv[j];
                        s1 += dh;
                        s2 += dh * hr[j];
                    }
                    s1 /= width;
                    s2 /= width;
                    for (int j = 0; j < width; ++j)
                        dxr[j] += inv * (dyr[j] * gv[j] - s1 - hr[j] * s2);
                }
            }
            if (gd->requires_grad || bd->requires_grad) {
                double* dg = gd->requires_grad ? acc_grad(gd.get()).data() : nullptr;
                double* db = bd->requires_grad ? acc_grad(bd.get()).data() : nullptr;
#pragma omp parallel for schedule(static) if (rows * width > 65536)
                for (int j = 0; j < width; ++j) {
                    double sg = 0.0, sb = 0.0;
                    for (std::int64_t r = 0; r < rows; ++r) {
                        sg += dy[r * width + j] * hv[r * width + j];
                        sb += dy[r * width + j];
                    }
                    if (dg) dg[j] += sg;
                    if (db) db[j] += sb;
                }
            }
        });
    }
    return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const auto n = a.size();
    Tensor out = Tensor::op_output(a.shape(), wants_grad({&a, &b}));
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* yv = out.d_->value.data();
    for (std::int64_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
    if (out.requires_grad()) {
        auto ad = a.d_, bd = b.d_, od = out.d_;
        push(out, {&a, &b}, [ad, bd, od, n] {
            const double* dy = od->grad.data();
            if (ad->requires_grad) {
                double* da = acc_grad(ad.get()).data();
                for (std::int64_t i = 0; i < n; ++i) da[i] += dy[i];
            }
            if (bd->requires_grad) {
                double* db = acc_grad(bd.get()).data();
                for (std::int64_t i = 0; i < n; ++i) db[i] += dy[i];
            }
        });
    }
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const auto n = a.size();
    Tensor out = Tensor::op_output(a.shape(), wants_grad({&a, &b}));
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* yv = out.d_->value.data();
    for (std::int64_t i = 0; i < n; ++i) yv[i] = av[i] * bv[i];
    if (out.requires_grad()) {
        auto ad = a.d_, bd = b.d_, od = out.d_;
        push(out, {&a, &b}, [ad, bd, od, n] {
            const double* dy = od->grad.data();
            if (ad->requires_grad) {
                double* da = acc_grad(ad.get()).data();
                const double* bv2 = bd->value.data();
                for (std::int64_t i = 0; i < n; ++i) da[i] += dy[i] * bv2[i];
            }
            if (bd->requires_grad) {
                double* db = acc_grad(bd.get()).data();
                const double* av2 = ad->value.data();
                for (std::int64_t i = 0; i < n; ++i) db[i] += dy[i] * av2[i];
            }
        });
    }
    return out;
}

Tensor Graph::relu(const Tensor& x) {
    const auto n = x.size();
    Tensor out = Tensor::op_output(x.shape(), wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    for (std::int64_t i = 0; i < n; ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, n] {
            const double* dy = od->grad.data();
            const double* xv2 = xd->value.data();
            double* dx = acc_grad(xd.get()).data();
            for (std::int64_t i = 0; i < n; ++i)
                if (xv2[i] > 0.0) dx[i] += dy[i];
        });
    }
    return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
    const auto n = x.size();
    Tensor out = Tensor::op_output(x.shape(), wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    for (std::int64_t i = 0; i < n; ++i) yv[i] = xv[i] * c;
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, c, n] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i] * c;
        });
    }
    return out;
}

Tensor Graph::mean(const Tensor& x) {
    const auto n = x.size();
    if (n == 0) throw ShapeError("mean of empty tensor");
    Tensor out = Tensor::op_output({1}, wants_grad({&x}));
    const double* xv = x.values().data();
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += xv[i];
    out.d_->value[0] = s / static_cast<double>(n);
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, n] {
            const double g = od->grad[0] / static_cast<double>(n);
            double* dx = acc_grad(xd.get()).data();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += g;
        });
    }
    return out;
}

Tensor Graph::mean_rows(const Tensor& x) {
    check_rank(x, 2, "mean_rows");
    const int rows = x.dim(0), cols = x.dim(1);
    Tensor out = Tensor::op_output({1, cols}, wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    std::fill(yv, yv + cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j) yv[j] += xv[r * cols + j];
    const double inv = 1.0 / rows;
    for (int j = 0; j < cols; ++j) yv[j] *= inv;
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, rows, cols, inv] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < cols; ++j) dx[r * cols + j] += dy[j] * inv;
        });
    }
    return out;
}

Tensor Graph::upsample_nearest(const Tensor& x, int target_len) {
    check_rank(x, 2, "upsample_nearest");
    const int ch = x.dim(0), len = x.dim(1);
    if (target_len < len)
        throw ShapeError("upsample_nearest target length " + std::to_string(target_len) +
                         " is smaller than input length " + std::to_string(len));
    Tensor out = Tensor::op_output({ch, target_len}, wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    for (int c = 0; c < ch; ++c)
        for (int j = 0; j < target_len; ++j)
            yv[c * target_len + j] =
                xv[c * len + static_cast<int>((static_cast<std::int64_t>(j) * len) / target_len)];
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, ch, len, target_len] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (int c = 0; c < ch; ++c)
                for (int j = 0; j < target_len; ++j)
                    dx[c * len + static_cast<int>((static_cast<std::int64_t>(j) * len) / target_len)] +=
                        dy[c * target_len + j];
        });
    }
    return out;
}

Tensor Graph::add_bias(const Tensor& x, const Tensor& b) {
    check_rank(x, 2, "add_bias");
    check_rank(b, 1, "add_bias");
    const int rows = x.dim(0), cols = x.dim(1);
    if (b.dim(0) != cols)
        throw ShapeError("add_bias width mismatch: x " + shape_str(x.shape()) + " vs b " +
                         shape_str(b.shape()));
    Tensor out = Tensor::op_output(x.shape(), wants_grad({&x, &b}));
    const double* xv = x.values().data();
    const double* bv = b.values().data();
    double* yv = out.d_->value.data();
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j) yv[r * cols + j] = xv[r * cols + j] + bv[j];
    if (out.requires_grad()) {
        auto xd = x.d_, bd = b.d_, od = out.d_;
        push(out, {&x, &b}, [xd, bd, od, rows, cols] {
            const double* dy = od->grad.data();
            if (xd->requires_grad) {
                double* dx = acc_grad(xd.get()).data();
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(rows) * cols; ++i)
                    dx[i] += dy[i];
            }
            if (bd->requires_grad) {
                double* db = acc_grad(bd.get()).data();
                for (int j = 0; j < cols; ++j) {
                    double s = 0.0;
                    for (int r = 0; r < rows; ++r) s += dy[r * cols + j];
                    db[j] += s;
                }
            }
        });
    }
    return out;
}

Tensor Graph::transpose(const Tensor& x) {
    check_rank(x, 2, "transpose");
    const int rows = x.dim(0), cols = x.dim(1);
    Tensor out = Tensor::op_output({cols, rows}, wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j) yv[j * rows + r] = xv[r * cols + j];
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, rows, cols] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < cols; ++j) dx[r * cols + j] += dy[j * rows + r];
        });
    }
    return out;
}

Tensor Graph::reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw ShapeError("reshape from " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    Tensor out = Tensor::op_output(std::move(shape), wants_grad({&x}));
    std::copy(x.values().begin(), x.values().end(), out.d_->value.begin());
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        const auto n = x.size();
        push(out, {&x}, [xd, od, n] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[i];
        });
    }
    return out;
}

Tensor Graph::concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows of no tensors");
    const int cols = parts[0].dim(1);
    int rows = 0;
    for (const auto& p : parts) {
        check_rank(p, 2, "concat_rows");
        if (p.dim(1) != cols)
            throw ShapeError("concat_rows width mismatch: " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        rows += p.dim(0);
    }
    bool rg = false;
    for (const auto& p : parts) rg = rg || (record_ && !consumed_ && p.requires_grad());
    Tensor out = Tensor::op_output({rows, cols}, rg);
    double* yv = out.d_->value.data();
    std::int64_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), yv + off);
        off += p.size();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<detail::TensorData>> ins;
        for (const auto& p : parts) ins.push_back(p.d_);
        auto od = out.d_;
        OpRecord rec;
        rec.out = od;
        rec.inputs = ins;
        rec.back = [ins, od] {
            const double* dy = od->grad.data();
            std::int64_t off2 = 0;
            for (const auto& in : ins) {
                const auto n = static_cast<std::int64_t>(in->value.size());
                if (in->requires_grad) {
                    double* dx = acc_grad(in.get()).data();
                    for (std::int64_t i = 0; i < n; ++i) dx[i] += dy[off2 + i];
                }
                off2 += n;
            }
        };
        tape_.push_back(std::move(rec));
    }
    return out;
}

Tensor Graph::concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols of no tensors");
    const int rows = parts[0].dim(0);
    int cols = 0;
    for (const auto& p : parts) {
        check_rank(p, 2, "concat_cols");
        if (p.dim(0) != rows)
            throw ShapeError("concat_cols height mismatch: " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        cols += p.dim(1);
    }
    bool rg = false;
    for (const auto& p : parts) rg = rg || (record_ && !consumed_ && p.requires_grad());
    Tensor out = Tensor::op_output({rows, cols}, rg);
    double* yv = out.d_->value.data();
    int coff = 0;
    for (const auto& p : parts) {
        const int pc = p.dim(1);
        const double* pv = p.values().data();
        for (int r = 0; r < rows; ++r)
            std::copy(pv + r * pc, pv + (r + 1) * pc, yv + r * cols + coff);
        coff += pc;
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<detail::TensorData>> ins;
        std::vector<int> widths;
        for (const auto& p : parts) {
            ins.push_back(p.d_);
            widths.push_back(p.dim(1));
        }
        auto od = out.d_;
        OpRecord rec;
        rec.out = od;
        rec.inputs = ins;
        rec.back = [ins, widths, od, rows, cols] {
            const double* dy = od->grad.data();
            int coff2 = 0;
            for (std::size_t p = 0; p < ins.size(); ++p) {
                const int pc = widths[p];
                if (ins[p]->requires_grad) {
                    double* dx = acc_grad(ins[p].get()).data();
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < pc; ++j) dx[r * pc + j] += dy[r * cols + coff2 + j];
                }
                coff2 += pc;
            }
        };
        tape_.push_back(std::move(rec));
    }
    return out;
}

Tensor Graph::slice_cols(const Tensor& x, int c0, int c1) {
    check_rank(x, 2, "slice_cols");
    const int rows = x.dim(0), cols = x.dim(1);
    if (c0 < 0 || c1 > cols || c0 >= c1)
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") out of range for " + shape_str(x.shape()));
    const int w = c1 - c0;
    Tensor out = Tensor::op_output({rows, w}, wants_grad({&x}));
    const double* xv = x.values().data();
    double* yv = out.d_->value.data();
    for (int r = 0; r < rows; ++r)
        std::copy(xv + r * cols + c0, xv + r * cols + c1, yv + r * w);
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, rows, cols, c0, w] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < w; ++j) dx[r * cols + c0 + j] += dy[r * w + j];
        });
    }
    return out;
}

Tensor Graph::slice_plane(const Tensor& x, int n) {
    check_rank(x, 3, "slice_plane");
    const int N = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (n < 0 || n >= N)
        throw ShapeError("slice_plane index " + std::to_string(n) + " out of range for " +
                         shape_str(x.shape()));
    Tensor out = Tensor::op_output({C, L}, wants_grad({&x}));
    const auto plane = static_cast<std::int64_t>(C) * L;
    const double* xv = x.values().data() + n * plane;
    std::copy(xv, xv + plane, out.d_->value.begin());
    if (out.requires_grad()) {
        auto xd = x.d_, od = out.d_;
        push(out, {&x}, [xd, od, n, plane] {
            const double* dy = od->grad.data();
            double* dx = acc_grad(xd.get()).data() + n * plane;
            for (std::int64_t i = 0; i < plane; ++i) dx[i] += dy[i];
        });
    }
    return out;
}

Tensor Graph::attend_scaled(const Tensor& q, const Tensor& k, double alpha) {
    check_rank(q, 2, "attend_scaled");
    check_rank(k, 2, "attend_scaled");
    if (q.shape() != k.shape())
        throw ShapeError("attend_scaled shape mismatch: q " + shape_str(q.shape()) + " vs k " +
                         shape_str(k.shape()));
    const int T = q.dim(0), D = q.dim(1);
    Tensor out = Tensor::op_output({T, T}, wants_grad({&q, &k}));
    double* av = out.d_->value.data();
    kern::gemm(false, true, T, T, D, alpha, q.values().data(), D, k.values().data(), D, av, T,
               false);
    kern::softmax_rows_inplace(av, T, T);
    if (out.requires_grad()) {
        auto qd = q.d_, kd = k.d_, od = out.d_;
        push(out, {&q, &k}, [qd, kd, od, alpha, T, D] {
            const double* A = od->value.data();
            const double* dA = od->grad.data();
            std::vector<double> ds(static_cast<std::size_t>(T) * T);
#pragma omp parallel for schedule(static) if (static_cast<std::int64_t>(T) * T > 16384)
            for (int r = 0; r < T; ++r) {
                const double* ar = A + static_cast<std::int64_t>(r) * T;
                const double* dr = dA + static_cast<std::int64_t>(r) * T;
                double* sr = ds.data() + static_cast<std::int64_t>(r) * T;
                double dot = 0.0;
                for (int j = 0; j < T; ++j) dot += dr[j] * ar[j];
                for (int j = 0; j < T; ++j) sr[j] = ar[j] * (dr[j] - dot);
            }
            if (qd->requires_grad)
                kern::gemm(false, false, T, D, T, alpha, ds.data(), T, kd->value.data(), D,
                           acc_grad(qd.get()).data(), D, true);
            if (kd->requires_grad)
                kern::gemm(true, false, T, D, T, alpha, ds.data(), T, qd->value.data(), D,
                           acc_grad(kd.get()).data(), D, true);
        });
    }
    return out;
}

Tensor Graph::cross_entropy(const Tensor& logits, std::span<const int> labels) {
    check_rank(logits, 2, "cross_entropy");
    const int B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw ShapeError("cross_entropy label count " + std::to_string(labels.size()) +
                         " does not match batch " + shape_str(logits.shape()));
    for (int i = 0; i < B; ++i)
        if (labels[i] < 0 || labels[i] >= C)
            throw ConfigError("cross_entropy label " + std::to_string(labels[i]) +
                              " out of range [0," + std::to_string(C) + ")");
    Tensor out = Tensor::op_output({1}, wants_grad({&logits}));
    auto probs = std::make_shared<std::vector<double>>(logits.values().begin(),
                                                       logits.values().end());
    kern::softmax_rows_inplace(probs->data(), B, C);
    const double* zv = logits.values().data();
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        const double* row = zv + i * C;
        double m = row[0];
        for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int j = 0; j < C; ++j) s += std::exp(row[j] - m);
        loss += m + std::log(s) - row[labels[i]];
    }
    out.d_->value[0] = loss / B;
    if (out.requires_grad()) {
        auto zd = logits.d_, od = out.d_;
        std::vector<int> lab(labels.begin(), labels.end());
        push(out, {&logits}, [zd, od, probs, lab, B, C] {
            const double up = od->grad[0] / B;
            double* dz = acc_grad(zd.get()).data();
            const double* pv = probs->data();
            for (int i = 0; i < B; ++i)
                for (int j = 0; j < C; ++j)
                    dz[i * C + j] += up * (pv[i * C + j] - (j == lab[i] ? 1.0 : 0.0));
        });
    }
    return out;
}

}  // namespace vlfsig
