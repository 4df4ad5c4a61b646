#include "gcal/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace gcal {

LossBatch batch_metadata(const DatasetIndex& ds, std::span<const std::size_t> rows) {
    const std::size_t n = rows.size();
    LossBatch b;
    b.patient.resize(2 * n);
    b.volume.resize(2 * n);
    std::vector<int> index(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = ds.slice(rows[i]);
        b.patient[i] = b.patient[i + n] = s.patient_id;
        b.volume[i] = b.volume[i + n] = s.volume_id;
        index[i] = index[i + n] = s.slice_index;
    }
    b.slice_positives.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 2 * n; ++j) {
            if (j != i && b.volume[j] == b.volume[i] && std::abs(index[j] - index[i]) <= 1) {
                b.slice_positives[i].push_back(j);
            }
        }
    }
    return b;
}

void LossConfig::validate() const {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("loss config: temperature must be positive");
    }
    if (lambda[0] != 0.0 && lambda[0] != 1.0) {
        throw std::invalid_argument("loss config: NT-Xent weight is a 0/1 switch");
    }
    bool any = false;
    for (double l : lambda) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw std::invalid_argument("loss config: weights must be finite and non-negative");
        }
        any = any || l > 0.0;
    }
    if (!any) {
        throw std::invalid_argument("loss config: at least one weight must be positive");
    }
    if (!(eps_norm > 0.0)) {
        throw std::invalid_argument("loss config: eps_norm must be positive");
    }
}

double cosine_sim(std::span<const double> a, std::span<const double> b, double eps_norm) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    return dot / (std::max(std::sqrt(na), eps_norm) * std::max(std::sqrt(nb), eps_norm));
}

namespace {

// Row-normalized embeddings (norms clamped at eps) and the clamped norms.
struct Normalized {
    Matrix u;
    std::vector<double> norm;
};

Normalized normalize_rows(const Matrix& z, double eps) {
    Normalized out{Matrix(z.rows(), z.cols()), std::vector<double>(z.rows())};
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double s = 0.0;
        for (double x : z.row(i)) s += x * x;
        out.norm[i] = std::max(std::sqrt(s), eps);
        for (std::size_t k = 0; k < z.cols(); ++k) {
            out.u(i, k) = z(i, k) / out.norm[i];
        }
    }
    return out;
}

Matrix similarity(const Matrix& u) {
    Matrix s(u.rows(), u.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t j = i; j < u.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < u.cols(); ++k) dot += u(i, k) * u(j, k);
            s(i, j) = s(j, i) = dot;
        }
    }
    return s;
}

void check_batch(const LossBatch& b) {
    if (b.z.rows() < 2 || b.z.rows() % 2 != 0) {
        throw std::invalid_argument("loss: batch needs 2N >= 2 rows");
    }
    if (b.patient.size() != b.z.rows()) {
        throw std::invalid_argument("loss: patient ids must cover all 2N rows");
    }
}

// Softmax-style accumulation for one anchor: adds d(loss)/d(S_ik) into
// grad_s (when non-null) and returns the anchor's log-ratio sum
// sum_{j in pos} (S_ij/tau - logsumexp_{k in den} S_ik/tau).
template <typename InDenominator>
double anchor_term(const Matrix& s, std::size_t i, std::span<const std::size_t> positives,
                   InDenominator in_den, double tau, double scale, Matrix* grad_s) {
    const std::size_t rows = s.rows();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows; ++k) {
        if (k != i && in_den(k)) mx = std::max(mx, s(i, k) / tau);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
        if (k != i && in_den(k)) sum += std::exp(s(i, k) / tau - mx);
    }
    const double log_den = mx + std::log(sum);
    double term = 0.0;
    for (std::size_t j : positives) {
        term += s(i, j) / tau - log_den;
    }
    if (grad_s != nullptr && !positives.empty()) {
        // loss contribution = -scale * term
        const double count = static_cast<double>(positives.size());
        for (std::size_t j : positives) {
            (*grad_s)(i, j) -= scale / tau;
        }
        for (std::size_t k = 0; k < rows; ++k) {
            if (k != i && in_den(k)) {
                (*grad_s)(i, k) += scale * count / tau * std::exp(s(i, k) / tau - log_den);
            }
        }
    }
    return term;
}

double ntxent_impl(const Matrix& s, std::size_t n, double tau, double weight, Matrix* grad_s) {
    const std::size_t rows = 2 * n;
    const double scale = weight / static_cast<double>(rows);
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t pos[1] = {i < n ? i + n : i - n};
        total += anchor_term(s, i, pos, [](std::size_t) { return true; }, tau, scale, grad_s);
    }
    return -total / static_cast<double>(rows);
}

const std::vector<int>& partition_labels(const LossBatch& b, GroupType g) {
    const auto& labels = g == GroupType::patient ? b.patient : b.volume;
    if (labels.size() != b.z.rows()) {
        throw std::invalid_argument("loss: " + to_string(g) + " labels missing for group loss");
    }
    return labels;
}

double group_impl(const LossBatch& b, const Matrix& s, GroupType g, double tau, double weight,
                  Matrix* grad_s) {
    const std::size_t n = b.pairs();
    const std::size_t rows = 2 * n;
    std::vector<std::vector<std::size_t>> positives(n);
    std::vector<std::vector<char>> in_group(n, std::vector<char>(rows, 0));
    double group_size = 0.0;

    if (g == GroupType::slice) {
        if (b.slice_positives.size() != n) {
            throw std::invalid_argument("loss: slice positives missing for slice group loss");
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t originals = 0;
            for (std::size_t j : b.slice_positives[i]) {
                if (j >= rows || j == i) {
                    throw std::invalid_argument("loss: invalid slice positive index");
                }
                if (!in_group[i][j]) {
                    in_group[i][j] = 1;
                    positives[i].push_back(j);
                    if (j < n) ++originals;
                }
            }
            acc += 1.0 + static_cast<double>(originals);
        }
        group_size = acc / static_cast<double>(n);
    } else {
        const auto& labels = partition_labels(b, g);
        std::set<int> distinct(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
        group_size = static_cast<double>(n) / static_cast<double>(distinct.size());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < rows; ++j) {
                if (labels[j] == labels[i]) {
                    in_group[i][j] = 1;
                    if (j != i) positives[i].push_back(j);
                }
            }
        }
    }

    const double norm = 1.0 / (static_cast<double>(n) * group_size);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& member = in_group[i];
        auto in_den = [&](std::size_t k) { return member[k] || b.patient[k] != b.patient[i]; };
        total += anchor_term(s, i, positives[i], in_den, tau, weight * norm, grad_s);
    }
    return -norm * total;
}

// d loss / d z from d loss / d S through the clamped-norm cosine similarity.
Matrix similarity_backward(const Matrix& grad_s, const Normalized& nz, const Matrix& z, double eps) {
    const std::size_t rows = z.rows(), cols = z.cols();
    Matrix grad_u(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < rows; ++k) {
            const double g = grad_s(i, k);
            if (g == 0.0) continue;
            for (std::size_t c = 0; c < cols; ++c) {
                grad_u(i, c) += g * nz.u(k, c);
                grad_u(k, c) += g * nz.u(i, c);
            }
        }
    }
    Matrix grad(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const double raw_norm = nz.norm[i];
        double zn = 0.0;
        for (double x : z.row(i)) zn += x * x;
        if (std::sqrt(zn) > eps) {
            double radial = 0.0;
            for (std::size_t c = 0; c < cols; ++c) radial += grad_u(i, c) * nz.u(i, c);
            for (std::size_t c = 0; c < cols; ++c) {
                grad(i, c) = (grad_u(i, c) - radial * nz.u(i, c)) / raw_norm;
            }
        } else {
            for (std::size_t c = 0; c < cols; ++c) grad(i, c) = grad_u(i, c) / eps;
        }
    }
    return grad;
}

}  // namespace

double ntxent_loss(const LossBatch& batch, double tau, double eps_norm) {
    check_batch(batch);
    const auto nz = normalize_rows(batch.z, eps_norm);
    return ntxent_impl(similarity(nz.u), batch.pairs(), tau, 1.0, nullptr);
}

double group_loss(const LossBatch& batch, GroupType group, double tau, double eps_norm) {
    check_batch(batch);
    const auto nz = normalize_rows(batch.z, eps_norm);
    return group_impl(batch, similarity(nz.u), group, tau, 1.0, nullptr);
}

namespace {

LossTerms combined_impl(const LossBatch& batch, const LossConfig& cfg, Matrix* grad_s, const Matrix& s) {
    LossTerms t;
    if (cfg.lambda[0] > 0.0) t.ntxent = ntxent_impl(s, batch.pairs(), cfg.tau, cfg.lambda[0], grad_s);
    if (cfg.lambda[1] > 0.0) t.patient = group_impl(batch, s, GroupType::patient, cfg.tau, cfg.lambda[1], grad_s);
    if (cfg.lambda[2] > 0.0) t.volume = group_impl(batch, s, GroupType::volume, cfg.tau, cfg.lambda[2], grad_s);
    if (cfg.lambda[3] > 0.0) t.slice = group_impl(batch, s, GroupType::slice, cfg.tau, cfg.lambda[3], grad_s);
    t.total = cfg.lambda[0] * t.ntxent + cfg.lambda[1] * t.patient + cfg.lambda[2] * t.volume +
              cfg.lambda[3] * t.slice;
    return t;
}

}  // namespace

LossTerms combined_loss(const LossBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_batch(batch);
    const auto nz = normalize_rows(batch.z, cfg.eps_norm);
    return combined_impl(batch, cfg, nullptr, similarity(nz.u));
}

LossAndGrad loss_grad(const LossBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_batch(batch);
    const auto nz = normalize_rows(batch.z, cfg.eps_norm);
    const Matrix s = similarity(nz.u);
    Matrix grad_s(s.rows(), s.cols());
    const LossTerms t = combined_impl(batch, cfg, &grad_s, s);
    return {t.total, similarity_backward(grad_s, nz, batch.z, cfg.eps_norm)};
}

}  // namespace gcal
