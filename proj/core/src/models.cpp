#include "dynamask/models.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace dynamask {

// ---------------------------------------------------------------------------
// White-box regressor
// ---------------------------------------------------------------------------

WhiteBoxRegressor::WhiteBoxRegressor(SaliencyTarget target)
    : target_(std::move(target)) {
    if (target_.rows() == 0 || target_.cols() == 0) {
        throw std::invalid_argument("WhiteBoxRegressor: empty target grid");
    }
}

Matrix WhiteBoxRegressor::forward(const Matrix& x) const {
    if (x.rows() != target_.rows() || x.cols() != target_.cols()) {
        throw std::invalid_argument(
            "WhiteBoxRegressor::forward: input shape does not match target");
    }
    Matrix out(x.rows(), 1, 0.0);
    for (const auto& [t, i] : target_.pairs()) {
        out(t, 0) += x(t, i) * x(t, i);
    }
    return out;
}

Matrix WhiteBoxRegressor::input_vjp(const Matrix& x,
                                    const Matrix& upstream) const {
    if (x.rows() != target_.rows() || x.cols() != target_.cols()) {
        throw std::invalid_argument(
            "WhiteBoxRegressor::input_vjp: input shape does not match target");
    }
    if (upstream.rows() != x.rows() || upstream.cols() != 1) {
        throw std::invalid_argument(
            "WhiteBoxRegressor::input_vjp: upstream must be T x 1");
    }
    Matrix grad(x.rows(), x.cols(), 0.0);
    for (const auto& [t, i] : target_.pairs()) {
        grad(t, i) = 2.0 * x(t, i) * upstream(t, 0);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// GRU classifier
// ---------------------------------------------------------------------------

struct GruClassifier::StepCache {
    std::vector<double> hprev, z, r, n, uh, h;
    double p = 0.0;
};

void GruClassifier::init_layout() {
    const std::size_t wd = h_ * d_;
    const std::size_t uu = h_ * h_;
    wz_ = 0;
    uz_ = wz_ + wd;
    bz_ = uz_ + uu;
    wr_ = bz_ + h_;
    ur_ = wr_ + wd;
    br_ = ur_ + uu;
    wn_ = br_ + h_;
    un_ = wn_ + wd;
    bn_ = un_ + uu;
    w_ = bn_ + h_;
    b_ = w_ + h_;
    params_.assign(b_ + 1, 0.0);
}

GruClassifier::GruClassifier(std::size_t input_size, std::size_t hidden_size,
                             RngStream& rng)
    : d_(input_size), h_(hidden_size) {
    if (d_ == 0 || h_ == 0) {
        throw std::invalid_argument(
            "GruClassifier: input and hidden sizes must be positive");
    }
    init_layout();
    const double k = 1.0 / std::sqrt(static_cast<double>(h_));
    for (double& p : params_) {
        p = -k + 2.0 * k * rng.uniform01();
    }
}

Matrix GruClassifier::forward_impl(const Matrix& x,
                                   std::vector<StepCache>* caches) const {
    if (x.cols() != d_) {
        throw std::invalid_argument(
            "GruClassifier::forward: input feature count mismatch");
    }
    const std::size_t T = x.rows();
    const double* P = params_.data();
    Matrix out(T, 1, 0.0);
    if (caches) caches->resize(T);

    std::vector<double> h(h_, 0.0), z(h_), r(h_), n(h_), uh(h_);
    for (std::size_t t = 0; t < T; ++t) {
        const double* xt = x.values().data() + t * d_;
        if (caches) (*caches)[t].hprev = h;
        for (std::size_t j = 0; j < h_; ++j) {
            double az = P[bz_ + j];
            double ar = P[br_ + j];
            double an = P[bn_ + j];
            const double* wzr = P + wz_ + j * d_;
            const double* wrr = P + wr_ + j * d_;
            const double* wnr = P + wn_ + j * d_;
            for (std::size_t i = 0; i < d_; ++i) {
                az += wzr[i] * xt[i];
                ar += wrr[i] * xt[i];
                an += wnr[i] * xt[i];
            }
            const double* uzr = P + uz_ + j * h_;
            const double* urr = P + ur_ + j * h_;
            const double* unr = P + un_ + j * h_;
            double u = 0.0;
            for (std::size_t m = 0; m < h_; ++m) {
                az += uzr[m] * h[m];
                ar += urr[m] * h[m];
                u += unr[m] * h[m];
            }
            z[j] = logistic(az);
            r[j] = logistic(ar);
            uh[j] = u;
            n[j] = std::tanh(an + r[j] * u);
        }
        double o = P[b_];
        for (std::size_t j = 0; j < h_; ++j) {
            h[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
            o += P[w_ + j] * h[j];
        }
        const double p = logistic(o);
        out(t, 0) = p;
        if (caches) {
            auto& c = (*caches)[t];
            c.z = z;
            c.r = r;
            c.n = n;
            c.uh = uh;
            c.h = h;
            c.p = p;
        }
    }
    return out;
}

Matrix GruClassifier::forward(const Matrix& x) const {
    return forward_impl(x, nullptr);
}

Matrix GruClassifier::backward(const Matrix& x,
                               const std::vector<StepCache>& caches,
                               const std::vector<double>& d_logit,
                               std::vector<double>* param_grad) const {
    const std::size_t T = x.rows();
    const double* P = params_.data();
    double* G = param_grad ? param_grad->data() : nullptr;
    Matrix dX(T, d_, 0.0);

    std::vector<double> dh(h_, 0.0), dhn(h_), daz(h_), dar(h_), dan(h_),
        duh(h_);
    for (std::size_t t = T; t-- > 0;) {
        const StepCache& c = caches[t];
        const double go = d_logit[t];
        // Head: o_t = w . h_t + b.
        for (std::size_t j = 0; j < h_; ++j) dh[j] += go * P[w_ + j];
        if (G) {
            for (std::size_t j = 0; j < h_; ++j) G[w_ + j] += go * c.h[j];
            G[b_] += go;
        }
        // Gate adjoints.
        for (std::size_t j = 0; j < h_; ++j) {
            const double dz = dh[j] * (c.hprev[j] - c.n[j]);
            const double dn = dh[j] * (1.0 - c.z[j]);
            dan[j] = dn * (1.0 - c.n[j] * c.n[j]);
            const double dr = dan[j] * c.uh[j];
            duh[j] = dan[j] * c.r[j];
            dar[j] = dr * c.r[j] * (1.0 - c.r[j]);
            daz[j] = dz * c.z[j] * (1.0 - c.z[j]);
            dhn[j] = dh[j] * c.z[j];
        }
        const double* xt = x.values().data() + t * d_;
        double* dxt = &dX[t * d_];
        for (std::size_t j = 0; j < h_; ++j) {
            const double* wzr = P + wz_ + j * d_;
            const double* wrr = P + wr_ + j * d_;
            const double* wnr = P + wn_ + j * d_;
            for (std::size_t i = 0; i < d_; ++i) {
                dxt[i] += wzr[i] * daz[j] + wrr[i] * dar[j] + wnr[i] * dan[j];
            }
            const double* uzr = P + uz_ + j * h_;
            const double* urr = P + ur_ + j * h_;
            const double* unr = P + un_ + j * h_;
            for (std::size_t m = 0; m < h_; ++m) {
                dhn[m] += uzr[m] * daz[j] + urr[m] * dar[j] + unr[m] * duh[j];
            }
            if (G) {
                double* gwz = G + wz_ + j * d_;
                double* gwr = G + wr_ + j * d_;
                double* gwn = G + wn_ + j * d_;
                for (std::size_t i = 0; i < d_; ++i) {
                    gwz[i] += daz[j] * xt[i];
                    gwr[i] += dar[j] * xt[i];
                    gwn[i] += dan[j] * xt[i];
                }
                double* guz = G + uz_ + j * h_;
                double* gur = G + ur_ + j * h_;
                double* gun = G + un_ + j * h_;
                for (std::size_t m = 0; m < h_; ++m) {
                    guz[m] += daz[j] * c.hprev[m];
                    gur[m] += dar[j] * c.hprev[m];
                    gun[m] += duh[j] * c.hprev[m];
                }
                G[bz_ + j] += daz[j];
                G[br_ + j] += dar[j];
                G[bn_ + j] += dan[j];
            }
        }
        std::swap(dh, dhn);
    }
    return dX;
}

Matrix GruClassifier::input_vjp(const Matrix& x, const Matrix& upstream) const {
    if (upstream.rows() != x.rows() || upstream.cols() != 1) {
        throw std::invalid_argument(
            "GruClassifier::input_vjp: upstream must be T x 1");
    }
    std::vector<StepCache> caches;
    forward_impl(x, &caches);
    std::vector<double> d_logit(x.rows());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        const double p = caches[t].p;
        d_logit[t] = upstream(t, 0) * p * (1.0 - p);
    }
    return backward(x, caches, d_logit, nullptr);
}

std::vector<double> GruClassifier::label_gradient(
    const Matrix& x, const std::vector<int>& labels, double* loss_out) const {
    if (labels.size() != x.rows()) {
        throw std::invalid_argument(
            "GruClassifier::label_gradient: one label per time step required");
    }
    const std::size_t T = x.rows();
    std::vector<StepCache> caches;
    forward_impl(x, &caches);

    std::vector<double> d_logit(T);
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double p = caches[t].p;
        const double y = static_cast<double>(labels[t]);
        d_logit[t] = (p - y) / static_cast<double>(T);
        const double ps = std::max(p, 1e-8);
        const double qs = std::max(1.0 - p, 1e-8);
        loss += -(y * std::log(ps) + (1.0 - y) * std::log(qs));
    }
    if (loss_out) *loss_out = loss / static_cast<double>(T);

    std::vector<double> grad(params_.size(), 0.0);
    backward(x, caches, d_logit, &grad);
    return grad;
}

// ---------------------------------------------------------------------------
// Weight serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode_doubles(const double* values, std::size_t n) {
    std::vector<unsigned char> bytes(n * 8);
    for (std::size_t k = 0; k < n; ++k) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[k], 8);
        for (std::size_t b = 0; b < 8; ++b) {
            bytes[k * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
        }
    }
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        const std::size_t rem = bytes.size() - i;
        if (rem > 1) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (rem > 2) chunk |= static_cast<std::uint32_t>(bytes[i + 2]);
        out.push_back(kB64Alphabet[(chunk >> 18) & 63]);
        out.push_back(kB64Alphabet[(chunk >> 12) & 63]);
        out.push_back(rem > 1 ? kB64Alphabet[(chunk >> 6) & 63] : '=');
        out.push_back(rem > 2 ? kB64Alphabet[chunk & 63] : '=');
    }
    return out;
}

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::vector<double> base64_decode_doubles(const std::string& text,
                                          std::size_t expected) {
    if (text.size() % 4 != 0) {
        throw std::runtime_error("weights: base64 payload length invalid");
    }
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = b64_value(c);
                if (vals[k] < 0 || pad > 0) {
                    throw std::runtime_error("weights: invalid base64 data");
                }
            }
        }
        const std::uint32_t chunk =
            (static_cast<std::uint32_t>(vals[0]) << 18) |
            (static_cast<std::uint32_t>(vals[1]) << 12) |
            (static_cast<std::uint32_t>(vals[2]) << 6) |
            static_cast<std::uint32_t>(vals[3]);
        bytes.push_back(static_cast<unsigned char>((chunk >> 16) & 0xff));
        if (pad < 2) bytes.push_back(static_cast<unsigned char>((chunk >> 8) & 0xff));
        if (pad < 1) bytes.push_back(static_cast<unsigned char>(chunk & 0xff));
    }
    if (bytes.size() != expected * 8) {
        throw std::runtime_error("weights: array size does not match shape");
    }
    std::vector<double> out(expected);
    for (std::size_t k = 0; k < expected; ++k) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[k * 8 + b]) << (8 * b);
        }
        std::memcpy(&out[k], &bits, 8);
    }
    return out;
}

}  // namespace

void GruClassifier::save_weights(const std::string& path) const {
    const double* P = params_.data();
    json arrays;
    auto put = [&](const char* name, std::size_t offset,
                   std::vector<std::size_t> shape) {
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        arrays[name] = {{"shape", shape},
                        {"data", base64_encode_doubles(P + offset, n)}};
    };
    put("Wz", wz_, {h_, d_});
    put("Uz", uz_, {h_, h_});
    put("bz", bz_, {h_});
    put("Wr", wr_, {h_, d_});
    put("Ur", ur_, {h_, h_});
    put("br", br_, {h_});
    put("Wn", wn_, {h_, d_});
    put("Un", un_, {h_, h_});
    put("bn", bn_, {h_});
    put("w", w_, {h_});
    put("b", b_, {std::size_t{1}});

    json doc{{"format_version", 1},
             {"model", "gru_classifier"},
             {"input_size", d_},
             {"hidden_size", h_},
             {"arrays", arrays}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << doc.dump(2) << '\n';
}

GruClassifier GruClassifier::load_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    const json doc = json::parse(in);
    if (doc.value("format_version", 0) != 1) {
        throw std::runtime_error("weights: unsupported format_version");
    }
    GruClassifier model;
    model.d_ = doc.at("input_size").get<std::size_t>();
    model.h_ = doc.at("hidden_size").get<std::size_t>();
    if (model.d_ == 0 || model.h_ == 0) {
        throw std::runtime_error("weights: sizes must be positive");
    }
    model.init_layout();

    const json& arrays = doc.at("arrays");
    auto get = [&](const char* name, std::size_t offset,
                   std::vector<std::size_t> shape) {
        if (!arrays.contains(name)) {
            throw std::runtime_error(std::string("weights: missing array ") +
                                     name);
        }
        const json& a = arrays.at(name);
        if (a.at("shape").get<std::vector<std::size_t>>() != shape) {
            throw std::runtime_error(std::string("weights: bad shape for ") +
                                     name);
        }
        std::size_t n = 1;
        for (std::size_t s : shape) n *= s;
        const auto vals =
            base64_decode_doubles(a.at("data").get<std::string>(), n);
        std::copy(vals.begin(), vals.end(), model.params_.begin() + offset);
    };
    const std::size_t h = model.h_, d = model.d_;
    get("Wz", model.wz_, {h, d});
    get("Uz", model.uz_, {h, h});
    get("bz", model.bz_, {h});
    get("Wr", model.wr_, {h, d});
    get("Ur", model.ur_, {h, h});
    get("br", model.br_, {h});
    get("Wn", model.wn_, {h, d});
    get("Un", model.un_, {h, h});
    get("bn", model.bn_, {h});
    get("w", model.w_, {h});
    get("b", model.b_, {std::size_t{1}});
    return model;
}

// ---------------------------------------------------------------------------
// Final-step view
// ---------------------------------------------------------------------------

Matrix FinalStepView::forward(const Matrix& x) const {
    const Matrix full = inner_.forward(x);
    Matrix out(1, full.cols(), 0.0);
    for (std::size_t c = 0; c < full.cols(); ++c) {
        out(0, c) = full(full.rows() - 1, c);
    }
    return out;
}

Matrix FinalStepView::input_vjp(const Matrix& x, const Matrix& upstream) const {
    const Matrix full = inner_.forward(x);
    if (upstream.rows() != 1 || upstream.cols() != full.cols()) {
        throw std::invalid_argument(
            "FinalStepView::input_vjp: upstream must be 1 x d_Y");
    }
    Matrix expanded(full.rows(), full.cols(), 0.0);
    for (std::size_t c = 0; c < full.cols(); ++c) {
        expanded(full.rows() - 1, c) = upstream(0, c);
    }
    return inner_.input_vjp(x, expanded);
}

// ---------------------------------------------------------------------------
// Adam and training
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::size_t n, double learning_rate, double beta1,
                             double beta2, double epsilon, double weight_decay)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      wd_(weight_decay),
      m_(n, 0.0),
      v_(n, 0.0) {
    if (lr_ <= 0.0) {
        throw std::invalid_argument("AdamOptimizer: learning rate must be > 0");
    }
    if (beta1_ < 0.0 || beta1_ >= 1.0 || beta2_ < 0.0 || beta2_ >= 1.0) {
        throw std::invalid_argument("AdamOptimizer: betas must lie in [0, 1)");
    }
}

void AdamOptimizer::step(std::vector<double>& params,
                         const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("AdamOptimizer: size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] + wd_ * params[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

TrainResult train_gru(const HmmDataset& train, const TrainConfig& cfg,
                      RngStream& rng) {
    if (train.series.empty()) {
        throw std::invalid_argument("train_gru: empty dataset");
    }
    if (cfg.batch_size == 0) {
        throw std::invalid_argument("train_gru: batch_size must be positive");
    }
    const std::size_t n = train.series.size();
    const std::size_t d = train.series.front().inputs.cols();

    TrainResult result{GruClassifier(d, cfg.hidden_size, rng), {}, 0.0, 0.0};
    GruClassifier& model = result.model;
    AdamOptimizer opt(model.parameter_count(), cfg.learning_rate,
                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon,
                      cfg.weight_decay);

    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    std::vector<double> grad(model.parameter_count());
    std::vector<double> batch_grad(model.parameter_count());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(stop - start);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const HmmSeries& s = train.series[order[k]];
                double loss = 0.0;
                grad = model.label_gradient(s.inputs, s.labels, &loss);
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    batch_grad[i] += scale * grad[i];
                }
                epoch_loss += loss;
            }
            opt.step(model.parameters(), batch_grad);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }

    const EvalResult eval = evaluate_gru(model, train);
    result.final_loss = eval.cross_entropy;
    result.final_accuracy = eval.accuracy;
    return result;
}

EvalResult evaluate_gru(const GruClassifier& model, const HmmDataset& data) {
    if (data.series.empty()) {
        throw std::invalid_argument("evaluate_gru: empty dataset");
    }
    double ce = 0.0;
    std::size_t correct = 0, total = 0;
    for (const HmmSeries& s : data.series) {
        const Matrix p = model.forward(s.inputs);
        for (std::size_t t = 0; t < p.rows(); ++t) {
            const double y = static_cast<double>(s.labels[t]);
            const double ps = std::max(p(t, 0), 1e-8);
            const double qs = std::max(1.0 - p(t, 0), 1e-8);
            ce += -(y * std::log(ps) + (1.0 - y) * std::log(qs));
            correct += ((p(t, 0) >= 0.5) == (s.labels[t] == 1)) ? 1 : 0;
            ++total;
        }
    }
    return {ce / static_cast<double>(total),
            static_cast<double>(correct) / static_cast<double>(total)};
}

}  // namespace dynamask
