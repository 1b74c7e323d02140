#include "mixprop/klr.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "mixprop/rng.hpp"
#include "mixprop/roc.hpp"

namespace mixprop::klr {

namespace {

constexpr int kMaxNewtonIters = 100;
constexpr double kGradTol = 1e-8;

double log1pexp(double v) {
    return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

// Squared-distance matrix between row sets.
Matrix sq_dist(const Matrix& a, const Matrix& b) {
    Vector an = a.rowwise().squaredNorm();
    Vector bn = b.rowwise().squaredNorm();
    Matrix d = -2.0 * (a * b.transpose());
    d.colwise() += an;
    d.rowwise() += bn.transpose();
    return d.cwiseMax(0.0);
}

Matrix kernel_from_sq_dist(const Matrix& d, double sigma) {
    return (-d / (2.0 * sigma * sigma)).array().exp();
}

struct DualFit {
    Vector alpha;
    double bias = 0.0;
    bool converged = false;
    std::vector<double> trace;
};

// Damped Newton on J(alpha, b) = sum log(1+e^f) - y.f + (lambda/2) a'Ka,
// f = K a + b.  The Newton system is solved in the K-premultiplied form
// [WK + lambda I, W1; 1'WK, 1'W1] so no K W K product is formed.
DualFit newton_klr(const Matrix& K, const Vector& y, double lambda) {
    const Index n = K.rows();
    DualFit fit;
    fit.alpha = Vector::Zero(n);
    double pbar = y.mean();
    pbar = std::clamp(pbar, 1e-12, 1.0 - 1e-12);
    fit.bias = std::log(pbar / (1.0 - pbar));

    Vector f = Vector::Constant(n, fit.bias);  // K alpha + b
    Vector k_alpha = Vector::Zero(n);

    auto objective = [&](const Vector& fv, const Vector& av, const Vector& kav) {
        double nll = 0.0;
        for (Index i = 0; i < n; ++i) nll += log1pexp(fv[i]) - y[i] * fv[i];
        return nll + 0.5 * lambda * av.dot(kav);
    };

    double obj = objective(f, fit.alpha, k_alpha);
    fit.trace.push_back(obj);

    Matrix A(n + 1, n + 1);
    Vector rhs(n + 1), p(n), w(n);
    for (int iter = 0; iter < kMaxNewtonIters; ++iter) {
        for (Index i = 0; i < n; ++i) {
            p[i] = sigmoid(f[i]);
            w[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
        }
        Vector resid = (p - y) + lambda * fit.alpha;
        Vector grad_alpha = K * resid;
        double grad_b = (p - y).sum();
        double gnorm = std::max(grad_alpha.cwiseAbs().maxCoeff(), std::abs(grad_b));
        if (gnorm <= kGradTol) {
            fit.converged = true;
            break;
        }

        A.topLeftCorner(n, n) = w.asDiagonal() * K;
        A.topLeftCorner(n, n).diagonal().array() += lambda;
        A.topRightCorner(n, 1) = w;
        Vector kw = K * w;
        A.bottomLeftCorner(1, n) = kw.transpose();
        A(n, n) = w.sum();
        rhs.head(n) = -resid;
        rhs[n] = -grad_b;

        Vector step = A.partialPivLu().solve(rhs);
        Vector d_alpha = step.head(n);
        double d_b = step[n];
        Vector u = K * d_alpha;

        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            Vector f_t = f + t * (u.array() + d_b).matrix();
            Vector a_t = fit.alpha + t * d_alpha;
            Vector ka_t = k_alpha + t * u;
            double obj_t = objective(f_t, a_t, ka_t);
            if (obj_t <= obj - 1e-14 * std::abs(obj) - 1e-300) {
                f = std::move(f_t);
                fit.alpha = std::move(a_t);
                k_alpha = std::move(ka_t);
                fit.bias += t * d_b;
                obj = obj_t;
                accepted = true;
                break;
            }
        }
        fit.trace.push_back(obj);
        if (!accepted) break;  // no descent step found; keep best iterate
    }
    return fit;
}

Vector posterior_from_kernel(const Matrix& K_eval, const Vector& alpha, double bias) {
    Vector f = K_eval * alpha;
    f.array() += bias;
    Vector out(f.size());
    for (Index i = 0; i < f.size(); ++i)
        out[i] = std::clamp(sigmoid(f[i]), 1e-12, 1.0 - 1e-12);
    return out;
}

}  // namespace

double gaussian_kernel(const Vector& x, const Vector& y, double sigma) {
    if (sigma <= 0) throw MixpropError("bandwidth must be positive");
    if (x.size() != y.size()) throw MixpropError("kernel dimension mismatch");
    return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

KlrModel train_klr(const Matrix& X, const std::vector<int>& y, double sigma, double lambda) {
    if (sigma <= 0 || lambda <= 0) throw MixpropError("sigma and lambda must be positive");
    if (X.rows() != static_cast<Index>(y.size())) throw MixpropError("label count mismatch");
    Vector yv(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw MixpropError("train_klr expects 0/1 labels");
        yv[i] = y[i];
    }
    if (yv.sum() == 0 || yv.sum() == static_cast<double>(X.rows()))
        throw MixpropError("both classes must be present");

    Matrix K = kernel_from_sq_dist(sq_dist(X, X), sigma);
    K.diagonal().array() += 1e-10;
    DualFit fit = newton_klr(K, yv, lambda);

    KlrModel m;
    m.support_points = X;
    m.dual_weights = std::move(fit.alpha);
    m.bias = fit.bias;
    m.bandwidth = sigma;
    m.regularization = lambda;
    m.converged = fit.converged;
    m.objective_trace = std::move(fit.trace);
    return m;
}

Vector predict_posterior(const KlrModel& m, const Matrix& X) {
    if (X.rows() == 0) return Vector();
    if (X.cols() != m.support_points.cols()) throw MixpropError("feature dimension mismatch");
    Matrix K = kernel_from_sq_dist(sq_dist(X, m.support_points), m.bandwidth);
    return posterior_from_kernel(K, m.dual_weights, m.bias);
}

namespace {

struct FoldSplit {
    std::vector<Index> train, val;
};

std::vector<FoldSplit> stratified_folds(const std::vector<int>& y, int folds, std::uint64_t seed) {
    std::set<int> classes(y.begin(), y.end());
    std::vector<int> fold_of(y.size());
    int class_id = 0;
    for (int c : classes) {
        std::vector<Index> idx;
        for (Index i = 0; i < static_cast<Index>(y.size()); ++i)
            if (y[i] == c) idx.push_back(i);
        auto stream = rng::make_stream(seed, {0x666f6c64ULL, static_cast<std::uint64_t>(class_id++)});
        std::shuffle(idx.begin(), idx.end(), stream);
        for (Index j = 0; j < static_cast<Index>(idx.size()); ++j)
            fold_of[idx[j]] = static_cast<int>(j % folds);
    }
    std::vector<FoldSplit> out(folds);
    for (Index i = 0; i < static_cast<Index>(y.size()); ++i)
        for (int f = 0; f < folds; ++f)
            (fold_of[i] == f ? out[f].val : out[f].train).push_back(i);
    return out;
}

}  // namespace

HyperParams select_hyperparameters(const Matrix& X, const std::vector<int>& y,
                                   const std::vector<double>& sigma_grid,
                                   const std::vector<double>& lambda_grid, int folds,
                                   CvCriterion criterion, std::uint64_t seed) {
    if (folds < 2) throw MixpropError("need at least 2 folds");
    if (sigma_grid.empty() || lambda_grid.empty()) throw MixpropError("empty hyperparameter grid");
    if (X.rows() != static_cast<Index>(y.size())) throw MixpropError("label count mismatch");

    std::set<int> class_set(y.begin(), y.end());
    std::vector<int> classes(class_set.begin(), class_set.end());
    const int n_classes = static_cast<int>(classes.size());
    if (n_classes < 2) throw MixpropError("need at least 2 classes");
    if (criterion == CvCriterion::auc && n_classes != 2)
        throw MixpropError("auc criterion requires a binary problem");

    std::vector<double> sorted_sigma = sigma_grid, sorted_lambda = lambda_grid;
    std::sort(sorted_sigma.begin(), sorted_sigma.end());
    std::sort(sorted_lambda.begin(), sorted_lambda.end());

    auto splits = stratified_folds(y, folds, seed);

    // Per-fold squared-distance blocks; kernels are rebuilt per sigma only.
    struct FoldData {
        Matrix d_tr, d_val;
        std::vector<int> y_tr, y_val;
    };
    std::vector<FoldData> fold_data;
    for (const auto& s : splits) {
        if (s.val.empty() || s.train.empty()) continue;
        FoldData fd;
        Matrix x_tr(static_cast<Index>(s.train.size()), X.cols());
        Matrix x_val(static_cast<Index>(s.val.size()), X.cols());
        for (Index i = 0; i < x_tr.rows(); ++i) {
            x_tr.row(i) = X.row(s.train[i]);
            fd.y_tr.push_back(y[s.train[i]]);
        }
        for (Index i = 0; i < x_val.rows(); ++i) {
            x_val.row(i) = X.row(s.val[i]);
            fd.y_val.push_back(y[s.val[i]]);
        }
        fd.d_tr = sq_dist(x_tr, x_tr);
        fd.d_val = sq_dist(x_val, x_tr);
        fold_data.push_back(std::move(fd));
    }

    HyperParams best;
    bool have_best = false;
    for (double sigma : sorted_sigma) {
        std::vector<Matrix> k_tr, k_val;
        for (const auto& fd : fold_data) {
            Matrix k = kernel_from_sq_dist(fd.d_tr, sigma);
            k.diagonal().array() += 1e-10;
            k_tr.push_back(std::move(k));
            k_val.push_back(kernel_from_sq_dist(fd.d_val, sigma));
        }
        for (double lambda : sorted_lambda) {
            double score_sum = 0.0;
            int usable = 0;
            for (std::size_t fi = 0; fi < fold_data.size(); ++fi) {
                const auto& fd = fold_data[fi];
                std::set<int> tr_classes(fd.y_tr.begin(), fd.y_tr.end());
                if (static_cast<int>(tr_classes.size()) < n_classes) continue;

                if (n_classes == 2) {
                    const int pos = classes[1];
                    Vector y01(static_cast<Index>(fd.y_tr.size()));
                    for (Index i = 0; i < y01.size(); ++i) y01[i] = fd.y_tr[i] == pos ? 1.0 : 0.0;
                    DualFit fit = newton_klr(k_tr[fi], y01, lambda);
                    Vector post = posterior_from_kernel(k_val[fi], fit.alpha, fit.bias);
                    if (criterion == CvCriterion::accuracy) {
                        double correct = 0;
                        for (Index i = 0; i < post.size(); ++i) {
                            int pred = post[i] >= 0.5 ? classes[1] : classes[0];
                            if (pred == fd.y_val[i]) correct += 1;
                        }
                        score_sum += correct / static_cast<double>(post.size());
                        ++usable;
                    } else {
                        std::vector<double> s_pos, s_neg;
                        for (Index i = 0; i < post.size(); ++i)
                            (fd.y_val[i] == pos ? s_pos : s_neg).push_back(post[i]);
                        if (s_pos.empty() || s_neg.empty()) continue;
                        Vector sp = Eigen::Map<Vector>(s_pos.data(), static_cast<Index>(s_pos.size()));
                        Vector sn = Eigen::Map<Vector>(s_neg.data(), static_cast<Index>(s_neg.size()));
                        score_sum += roc::roc_auc(roc::empirical_roc(sp, sn));
                        ++usable;
                    }
                } else {
                    // One-vs-rest; accuracy on the arg-max posterior.
                    Matrix posts(static_cast<Index>(fd.y_val.size()), n_classes);
                    for (int ci = 0; ci < n_classes; ++ci) {
                        Vector y01(static_cast<Index>(fd.y_tr.size()));
                        for (Index i = 0; i < y01.size(); ++i)
                            y01[i] = fd.y_tr[i] == classes[ci] ? 1.0 : 0.0;
                        DualFit fit = newton_klr(k_tr[fi], y01, lambda);
                        posts.col(ci) = posterior_from_kernel(k_val[fi], fit.alpha, fit.bias);
                    }
                    double correct = 0;
                    for (Index i = 0; i < posts.rows(); ++i) {
                        Index arg;
                        posts.row(i).maxCoeff(&arg);
                        if (classes[arg] == fd.y_val[i]) correct += 1;
                    }
                    score_sum += correct / static_cast<double>(posts.rows());
                    ++usable;
                }
            }
            if (usable == 0) continue;
            double score = score_sum / usable;
            // >= so equal scores resolve to the larger sigma, then lambda.
            if (!have_best || score >= best.score) {
                best = {sigma, lambda, score};
                have_best = true;
            }
        }
    }
    if (!have_best)
        throw MixpropError("no fold had all classes; cannot cross-validate");
    return best;
}

double median_pairwise_distance(const Matrix& X, std::uint64_t seed, Index max_points) {
    Index n = X.rows();
    Matrix sub = X;
    if (n > max_points) {
        std::vector<Index> idx(n);
        for (Index i = 0; i < n; ++i) idx[i] = i;
        auto stream = rng::make_stream(seed, {0x6d656469ULL});
        std::shuffle(idx.begin(), idx.end(), stream);
        sub.resize(max_points, X.cols());
        for (Index i = 0; i < max_points; ++i) sub.row(i) = X.row(idx[i]);
        n = max_points;
    }
    if (n < 2) return 1.0;
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) dists.push_back((sub.row(i) - sub.row(j)).norm());
    auto mid = dists.begin() + dists.size() / 2;
    std::nth_element(dists.begin(), mid, dists.end());
    return std::max(*mid, 1e-6);
}

}  // namespace mixprop::klr
