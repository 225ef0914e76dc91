#include "graspkit/losses_heads.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "graspkit/error.hpp"
#include "graspkit/rng.hpp"

namespace graspkit {

namespace {

double sym(Rng& rng, double scale) { return (2.0 * rng.uniform() - 1.0) * scale; }

void init_linear(Linear& l, int in, int out, Rng& rng) {
    l.in = in;
    l.out = out;
    l.w.resize(static_cast<std::size_t>(in) * out);
    l.b.assign(out, 0.0);
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& x : l.w) x = sym(rng, s);
}

void init_conv3(Conv3x3& k, int in_ch, int out_ch, Rng& rng) {
    k.in_ch = in_ch;
    k.out_ch = out_ch;
    k.w.resize(static_cast<std::size_t>(out_ch) * in_ch * 9);
    k.b.assign(out_ch, 0.0);
    double s = 1.0 / std::sqrt(9.0 * in_ch);
    for (double& x : k.w) x = sym(rng, s);
}

void init_conv1(Conv1x1& k, int in_ch, int out_ch, Rng& rng) {
    k.in_ch = in_ch;
    k.out_ch = out_ch;
    k.w.resize(static_cast<std::size_t>(out_ch) * in_ch);
    k.b.assign(out_ch, 0.0);
    double s = 1.0 / std::sqrt(static_cast<double>(in_ch));
    for (double& x : k.w) x = sym(rng, s);
}

void init_norm(ChannelNorm& n, int ch) {
    n.ch = ch;
    n.mu.assign(ch, 0.0);
    n.inv_sigma.assign(ch, 1.0);
    n.gamma.assign(ch, 1.0);
    n.beta.assign(ch, 0.0);
    n.calibrated = false;
}

FeatureMap relu_map(const FeatureMap& f) {
    FeatureMap out = f;
    for (double& x : out.v) x = std::max(0.0, x);
    return out;
}

// y(o, px) = b[o] + sum_i w[o*in+i] * x(i, px); shared by the 1x1 conv and the
// per-pixel MLP branch, which have the same weight layout.
FeatureMap pixelwise_affine(const double* w, const double* b, int in_ch, int out_ch,
                            const FeatureMap& in) {
    FeatureMap out(out_ch, in.h, in.w, in.tag);
    std::size_t plane = in.plane();
    for (int o = 0; o < out_ch; ++o) {
        double* dst = &out.v[o * plane];
        for (std::size_t p = 0; p < plane; ++p) dst[p] = b[o];
        for (int i = 0; i < in_ch; ++i) {
            double wv = w[static_cast<std::size_t>(o) * in_ch + i];
            const double* src = &in.v[i * plane];
            for (std::size_t p = 0; p < plane; ++p) dst[p] += wv * src[p];
        }
    }
    return out;
}

void pixelwise_affine_backward(const double* w, int in_ch, int out_ch, const FeatureMap& in,
                               const FeatureMap& gout, double* gw, double* gb, FeatureMap* gin) {
    std::size_t plane = in.plane();
    for (int o = 0; o < out_ch; ++o) {
        const double* go = &gout.v[o * plane];
        double acc_b = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc_b += go[p];
        gb[o] += acc_b;
        for (int i = 0; i < in_ch; ++i) {
            const double* src = &in.v[i * plane];
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += go[p] * src[p];
            gw[static_cast<std::size_t>(o) * in_ch + i] += acc;
        }
    }
    if (gin) {
        for (int i = 0; i < in_ch; ++i) {
            double* gi = &gin->v[i * plane];
            for (int o = 0; o < out_ch; ++o) {
                double wv = w[static_cast<std::size_t>(o) * in_ch + i];
                const double* go = &gout.v[o * plane];
                for (std::size_t p = 0; p < plane; ++p) gi[p] += wv * go[p];
            }
        }
    }
}

void conv3x3_backward(const Conv3x3& k, const FeatureMap& in, const FeatureMap& gout,
                      Conv3x3& gk, FeatureMap* gin) {
    int h = in.h, w = in.w;
    for (int o = 0; o < k.out_ch; ++o) {
        double acc_b = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) acc_b += gout.at(o, y, x);
        gk.b[o] += acc_b;
        for (int i = 0; i < k.in_ch; ++i) {
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    double acc = 0.0;
                    for (int y = 0; y < h; ++y) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= h) continue;
                        for (int x = 0; x < w; ++x) {
                            int xx = x + dx;
                            if (xx < 0 || xx >= w) continue;
                            acc += gout.at(o, y, x) * in.at(i, yy, xx);
                        }
                    }
                    gk.w[((static_cast<std::size_t>(o) * k.in_ch + i) * 3 + (dy + 1)) * 3 +
                         (dx + 1)] += acc;
                }
        }
    }
    if (gin) {
        for (int i = 0; i < k.in_ch; ++i)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int o = 0; o < k.out_ch; ++o)
                        for (int dy = -1; dy <= 1; ++dy) {
                            int sy = y - dy;
                            if (sy < 0 || sy >= h) continue;
                            for (int dx = -1; dx <= 1; ++dx) {
                                int sx = x - dx;
                                if (sx < 0 || sx >= w) continue;
                                acc += k.w[((static_cast<std::size_t>(o) * k.in_ch + i) * 3 +
                                            (dy + 1)) *
                                               3 +
                                           (dx + 1)] *
                                       gout.at(o, sy, sx);
                            }
                        }
                    gin->at(i, y, x) += acc;
                }
    }
}

// Gradient of post-activation h = relu(pre): mask by h > 0. The mask on the
// output is equivalent to the mask on the pre-activation away from exact zero.
void relu_mask(FeatureMap& g, const FeatureMap& post) {
    for (std::size_t p = 0; p < g.v.size(); ++p)
        if (!(post.v[p] > 0.0)) g.v[p] = 0.0;
}

double channel_concentration(const double* p, int h, int w, double* grad) {
    double z = 0.0, su = 0.0, sv = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double val = p[static_cast<std::size_t>(y) * w + x];
            z += val;
            su += val * x;
            sv += val * y;
        }
    if (!(z > 0.0)) return 0.0; // zero-mass class contributes nothing
    double cu = su / z, cv = sv / z;
    double loss = 0.0, au = 0.0, av = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double val = p[static_cast<std::size_t>(y) * w + x];
            double du = x - cu, dv = y - cv;
            double d = std::sqrt(du * du + dv * dv);
            loss += d * val;
            if (d > 0.0) {
                au += val * du / d;
                av += val * dv / d;
            }
        }
    loss /= z;
    if (grad) {
        double s_u = au / z, s_v = av / z;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double du = x - cu, dv = y - cv;
                double d = std::sqrt(du * du + dv * dv);
                grad[static_cast<std::size_t>(y) * w + x] +=
                    (d - loss - du * s_u - dv * s_v) / z;
            }
    }
    return loss;
}

void sgd_step(std::vector<ParamRef>& params, std::vector<ParamRef>& grads, double lr, double wd,
              double grad_scale) {
    for (std::size_t r = 0; r < params.size(); ++r) {
        if (!params[r].trainable) continue;
        double* p = params[r].data;
        const double* g = grads[r].data;
        for (std::size_t i = 0; i < params[r].size; ++i)
            p[i] -= lr * (g[i] * grad_scale + wd * p[i]);
    }
}

} // namespace

LocalizationHead make_head(int d, int classes, std::uint64_t seed) {
    if (d <= 0 || classes <= 0) raise(Errc::invalid_config, "head dims must be positive");
    Rng rng(seed);
    LocalizationHead h;
    h.d = d;
    h.classes = classes;
    init_linear(h.mlp, d, d, rng);
    init_conv3(h.conv1, d, d, rng);
    init_norm(h.norm1, d);
    init_conv3(h.conv2, d, d, rng);
    init_norm(h.norm2, d);
    init_conv1(h.class_conv, d, classes, rng);
    return h;
}

GestureClassifier make_classifier(int d, std::uint64_t seed) {
    if (d <= 0) raise(Errc::invalid_config, "classifier dim must be positive");
    Rng rng(seed);
    GestureClassifier c;
    c.d = d;
    init_linear(c.fc1, d, d, rng);
    init_linear(c.fc2, d, kGestureClasses, rng);
    return c;
}

LocalizationHead like_zeros(const LocalizationHead& h) {
    LocalizationHead z = h;
    std::fill(z.mlp.w.begin(), z.mlp.w.end(), 0.0);
    std::fill(z.mlp.b.begin(), z.mlp.b.end(), 0.0);
    std::fill(z.conv1.w.begin(), z.conv1.w.end(), 0.0);
    std::fill(z.conv1.b.begin(), z.conv1.b.end(), 0.0);
    std::fill(z.conv2.w.begin(), z.conv2.w.end(), 0.0);
    std::fill(z.conv2.b.begin(), z.conv2.b.end(), 0.0);
    std::fill(z.class_conv.w.begin(), z.class_conv.w.end(), 0.0);
    std::fill(z.class_conv.b.begin(), z.class_conv.b.end(), 0.0);
    for (ChannelNorm* n : {&z.norm1, &z.norm2}) {
        std::fill(n->mu.begin(), n->mu.end(), 0.0);
        std::fill(n->inv_sigma.begin(), n->inv_sigma.end(), 0.0);
        std::fill(n->gamma.begin(), n->gamma.end(), 0.0);
        std::fill(n->beta.begin(), n->beta.end(), 0.0);
    }
    return z;
}

GestureClassifier like_zeros(const GestureClassifier& c) {
    GestureClassifier z = c;
    std::fill(z.fc1.w.begin(), z.fc1.w.end(), 0.0);
    std::fill(z.fc1.b.begin(), z.fc1.b.end(), 0.0);
    std::fill(z.fc2.w.begin(), z.fc2.w.end(), 0.0);
    std::fill(z.fc2.b.begin(), z.fc2.b.end(), 0.0);
    return z;
}

std::vector<ParamRef> head_params(LocalizationHead& h) {
    std::vector<ParamRef> refs;
    auto add = [&](const char* name, std::vector<double>& v, bool trainable = true) {
        refs.push_back({name, v.data(), v.size(), trainable});
    };
    add("mlp.w", h.mlp.w);
    add("mlp.b", h.mlp.b);
    add("conv1.w", h.conv1.w);
    add("conv1.b", h.conv1.b);
    add("norm1.gamma", h.norm1.gamma);
    add("norm1.beta", h.norm1.beta);
    add("norm1.mu", h.norm1.mu, false);
    add("norm1.inv_sigma", h.norm1.inv_sigma, false);
    add("conv2.w", h.conv2.w);
    add("conv2.b", h.conv2.b);
    add("norm2.gamma", h.norm2.gamma);
    add("norm2.beta", h.norm2.beta);
    add("norm2.mu", h.norm2.mu, false);
    add("norm2.inv_sigma", h.norm2.inv_sigma, false);
    add("class_conv.w", h.class_conv.w);
    add("class_conv.b", h.class_conv.b);
    return refs;
}

std::vector<ParamRef> classifier_params(GestureClassifier& c) {
    std::vector<ParamRef> refs;
    refs.push_back({"fc1.w", c.fc1.w.data(), c.fc1.w.size(), true});
    refs.push_back({"fc1.b", c.fc1.b.data(), c.fc1.b.size(), true});
    refs.push_back({"fc2.w", c.fc2.w.data(), c.fc2.w.size(), true});
    refs.push_back({"fc2.b", c.fc2.b.data(), c.fc2.b.size(), true});
    return refs;
}

std::vector<ParamRef> trainable_only(const std::vector<ParamRef>& refs) {
    std::vector<ParamRef> out;
    for (const ParamRef& r : refs)
        if (r.trainable) out.push_back(r);
    return out;
}

std::vector<double> flatten(const std::vector<ParamRef>& refs) {
    std::vector<double> out;
    for (const ParamRef& r : refs) out.insert(out.end(), r.data, r.data + r.size);
    return out;
}

FeatureMap conv3x3_forward(const Conv3x3& k, const FeatureMap& in) {
    if (in.d != k.in_ch) raise(Errc::dimension_mismatch, "conv3x3 channel mismatch");
    FeatureMap out(k.out_ch, in.h, in.w, in.tag);
    for (int o = 0; o < k.out_ch; ++o)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double acc = k.b[o];
                for (int i = 0; i < k.in_ch; ++i)
                    for (int dy = -1; dy <= 1; ++dy) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx;
                            if (xx < 0 || xx >= in.w) continue;
                            acc += k.w[((static_cast<std::size_t>(o) * k.in_ch + i) * 3 +
                                        (dy + 1)) *
                                           3 +
                                       (dx + 1)] *
                                   in.at(i, yy, xx);
                        }
                    }
                out.at(o, y, x) = acc;
            }
    return out;
}

FeatureMap conv1x1_forward(const Conv1x1& k, const FeatureMap& in) {
    if (in.d != k.in_ch) raise(Errc::dimension_mismatch, "conv1x1 channel mismatch");
    return pixelwise_affine(k.w.data(), k.b.data(), k.in_ch, k.out_ch, in);
}

FeatureMap channel_norm_forward(const ChannelNorm& n, const FeatureMap& in) {
    if (in.d != n.ch) raise(Errc::dimension_mismatch, "norm channel mismatch");
    FeatureMap out = in;
    std::size_t plane = in.plane();
    for (int c = 0; c < n.ch; ++c) {
        double mu = n.mu[c], is = n.inv_sigma[c], g = n.gamma[c], b = n.beta[c];
        double* p = &out.v[c * plane];
        for (std::size_t q = 0; q < plane; ++q) p[q] = g * (p[q] - mu) * is + b;
    }
    return out;
}

FeatureMap localization_head_forward(const LocalizationHead& h, const FeatureMap& f) {
    HeadCache cache;
    return localization_head_forward(h, f, cache);
}

FeatureMap localization_head_forward(const LocalizationHead& h, const FeatureMap& f,
                                     HeadCache& cache) {
    if (f.d != h.d) raise(Errc::dimension_mismatch, "feature channels do not match head");
    cache.input = f;
    cache.mlp_pre = pixelwise_affine(h.mlp.w.data(), h.mlp.b.data(), h.mlp.in, h.mlp.out, f);
    cache.resid = f;
    for (std::size_t p = 0; p < cache.resid.v.size(); ++p)
        cache.resid.v[p] += std::max(0.0, cache.mlp_pre.v[p]);
    cache.conv1_out = conv3x3_forward(h.conv1, cache.resid);
    cache.act1 = relu_map(channel_norm_forward(h.norm1, cache.conv1_out));
    cache.conv2_out = conv3x3_forward(h.conv2, cache.act1);
    cache.act2 = relu_map(channel_norm_forward(h.norm2, cache.conv2_out));
    cache.class_pre = conv1x1_forward(h.class_conv, cache.act2);
    cache.maps = relu_map(cache.class_pre);
    return cache.maps;
}

void localization_head_backward(const LocalizationHead& h, const HeadCache& cache,
                                const FeatureMap& dmaps, LocalizationHead& grads) {
    std::size_t plane = cache.input.plane();

    FeatureMap g = dmaps;
    relu_mask(g, cache.maps);

    FeatureMap d_act2(h.d, cache.input.h, cache.input.w);
    pixelwise_affine_backward(h.class_conv.w.data(), h.class_conv.in_ch, h.class_conv.out_ch,
                              cache.act2, g, grads.class_conv.w.data(),
                              grads.class_conv.b.data(), &d_act2);

    relu_mask(d_act2, cache.act2);
    // norm2: dgamma += g*(x-mu)*inv_sigma, dbeta += g, dx = g*gamma*inv_sigma
    FeatureMap d_conv2 = d_act2;
    for (int c = 0; c < h.d; ++c) {
        double mu = h.norm2.mu[c], is = h.norm2.inv_sigma[c], ga = h.norm2.gamma[c];
        const double* go = &d_act2.v[c * plane];
        const double* x = &cache.conv2_out.v[c * plane];
        double* dx = &d_conv2.v[c * plane];
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t q = 0; q < plane; ++q) {
            dgamma += go[q] * (x[q] - mu) * is;
            dbeta += go[q];
            dx[q] = go[q] * ga * is;
        }
        grads.norm2.gamma[c] += dgamma;
        grads.norm2.beta[c] += dbeta;
    }

    FeatureMap d_act1(h.d, cache.input.h, cache.input.w);
    conv3x3_backward(h.conv2, cache.act1, d_conv2, grads.conv2, &d_act1);

    relu_mask(d_act1, cache.act1);
    FeatureMap d_conv1 = d_act1;
    for (int c = 0; c < h.d; ++c) {
        double mu = h.norm1.mu[c], is = h.norm1.inv_sigma[c], ga = h.norm1.gamma[c];
        const double* go = &d_act1.v[c * plane];
        const double* x = &cache.conv1_out.v[c * plane];
        double* dx = &d_conv1.v[c * plane];
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t q = 0; q < plane; ++q) {
            dgamma += go[q] * (x[q] - mu) * is;
            dbeta += go[q];
            dx[q] = go[q] * ga * is;
        }
        grads.norm1.gamma[c] += dgamma;
        grads.norm1.beta[c] += dbeta;
    }

    FeatureMap d_resid(h.d, cache.input.h, cache.input.w);
    conv3x3_backward(h.conv1, cache.resid, d_conv1, grads.conv1, &d_resid);

    // residual add: the input branch is frozen; the MLP branch passes through
    // its own rectifier (mask on the pre-activation, not the summed output).
    FeatureMap d_mlp = d_resid;
    relu_mask(d_mlp, cache.mlp_pre);
    pixelwise_affine_backward(h.mlp.w.data(), h.mlp.in, h.mlp.out, cache.input, d_mlp,
                              grads.mlp.w.data(), grads.mlp.b.data(), nullptr);
}

std::vector<double> gesture_forward(const GestureClassifier& c, const Embedding& e) {
    ClassifierCache cache;
    return gesture_forward(c, e, cache);
}

std::vector<double> gesture_forward(const GestureClassifier& c, const Embedding& e,
                                    ClassifierCache& cache) {
    if (static_cast<int>(e.size()) != c.fc1.in)
        raise(Errc::dimension_mismatch, "embedding dim does not match classifier");
    cache.input = e;
    cache.pre1.assign(c.fc1.out, 0.0);
    for (int o = 0; o < c.fc1.out; ++o) {
        double acc = c.fc1.b[o];
        for (int i = 0; i < c.fc1.in; ++i)
            acc += c.fc1.w[static_cast<std::size_t>(o) * c.fc1.in + i] * e[i];
        cache.pre1[o] = acc;
    }
    cache.act1 = cache.pre1;
    for (double& x : cache.act1) x = std::max(0.0, x);
    cache.scores.assign(c.fc2.out, 0.0);
    for (int o = 0; o < c.fc2.out; ++o) {
        double acc = c.fc2.b[o];
        for (int i = 0; i < c.fc2.in; ++i)
            acc += c.fc2.w[static_cast<std::size_t>(o) * c.fc2.in + i] * cache.act1[i];
        cache.scores[o] = acc;
    }
    return cache.scores;
}

void gesture_backward(const GestureClassifier& c, const ClassifierCache& cache,
                      const std::vector<double>& dscores, GestureClassifier& grads,
                      Embedding* dinput) {
    std::vector<double> d_act1(c.fc1.out, 0.0);
    for (int o = 0; o < c.fc2.out; ++o) {
        grads.fc2.b[o] += dscores[o];
        for (int i = 0; i < c.fc2.in; ++i) {
            grads.fc2.w[static_cast<std::size_t>(o) * c.fc2.in + i] += dscores[o] * cache.act1[i];
            d_act1[i] += c.fc2.w[static_cast<std::size_t>(o) * c.fc2.in + i] * dscores[o];
        }
    }
    for (int o = 0; o < c.fc1.out; ++o)
        if (!(cache.pre1[o] > 0.0)) d_act1[o] = 0.0;
    if (dinput) dinput->assign(c.fc1.in, 0.0);
    for (int o = 0; o < c.fc1.out; ++o) {
        grads.fc1.b[o] += d_act1[o];
        for (int i = 0; i < c.fc1.in; ++i) {
            grads.fc1.w[static_cast<std::size_t>(o) * c.fc1.in + i] +=
                d_act1[o] * cache.input[i];
            if (dinput)
                (*dinput)[i] += c.fc1.w[static_cast<std::size_t>(o) * c.fc1.in + i] * d_act1[o];
        }
    }
}

double cosine_margin_loss(const Embedding& f_op, const Embedding& f_ego, double alpha) {
    Embedding scratch;
    double loss = cosine_margin_loss_grad(f_op, f_ego, alpha, scratch);
    return loss;
}

double cosine_margin_loss_grad(const Embedding& f_op, const Embedding& f_ego, double alpha,
                               Embedding& d_ego) {
    if (f_op.size() != f_ego.size())
        raise(Errc::dimension_mismatch, "embedding sizes differ in cosine loss");
    double na2 = 0.0, nb2 = 0.0, dp = 0.0;
    for (std::size_t i = 0; i < f_op.size(); ++i) {
        na2 += f_op[i] * f_op[i];
        nb2 += f_ego[i] * f_ego[i];
        dp += f_op[i] * f_ego[i];
    }
    if (!(na2 > 0.0) || !(nb2 > 0.0))
        raise(Errc::zero_embedding, "cosine loss requires nonzero embeddings");
    double na = std::sqrt(na2), nb = std::sqrt(nb2);
    double cos = dp / (na * nb);
    double loss = 1.0 - cos - alpha;
    d_ego.assign(f_ego.size(), 0.0);
    if (loss <= 0.0) return 0.0;
    for (std::size_t i = 0; i < f_ego.size(); ++i)
        d_ego[i] = cos * f_ego[i] / nb2 - f_op[i] / (na * nb);
    return loss;
}

double concentration_loss(const FeatureMap& maps) {
    double total = 0.0;
    for (int c = 0; c < maps.d; ++c)
        total += channel_concentration(&maps.v[c * maps.plane()], maps.h, maps.w, nullptr);
    return total;
}

double concentration_loss(const DenseMap& map) {
    return channel_concentration(map.v.data(), map.h, map.w, nullptr);
}

double concentration_loss_grad(const FeatureMap& maps, FeatureMap& dmaps) {
    double total = 0.0;
    for (int c = 0; c < maps.d; ++c)
        total += channel_concentration(&maps.v[c * maps.plane()], maps.h, maps.w,
                                       &dmaps.v[c * dmaps.plane()]);
    return total;
}

double cross_entropy(const std::vector<double>& scores, int label) {
    if (label < 0 || label >= static_cast<int>(scores.size()))
        raise(Errc::label_out_of_range, "class label out of range");
    double m = *std::max_element(scores.begin(), scores.end());
    double lse = 0.0;
    for (double s : scores) lse += std::exp(s - m);
    return m + std::log(lse) - scores[label];
}

double cross_entropy_grad(const std::vector<double>& scores, int label,
                          std::vector<double>& dscores) {
    if (label < 0 || label >= static_cast<int>(scores.size()))
        raise(Errc::label_out_of_range, "class label out of range");
    double m = *std::max_element(scores.begin(), scores.end());
    double lse = 0.0;
    dscores.assign(scores.size(), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        dscores[i] = std::exp(scores[i] - m);
        lse += dscores[i];
    }
    for (double& d : dscores) d /= lse;
    dscores[label] -= 1.0;
    return m + std::log(lse) - scores[label];
}

std::vector<double> gap_scores(const FeatureMap& maps) {
    std::vector<double> scores(maps.d, 0.0);
    std::size_t plane = maps.plane();
    for (int c = 0; c < maps.d; ++c) {
        double acc = 0.0;
        const double* p = &maps.v[c * plane];
        for (std::size_t q = 0; q < plane; ++q) acc += p[q];
        scores[c] = acc / static_cast<double>(plane);
    }
    return scores;
}

void gap_backward(const std::vector<double>& dscores, FeatureMap& dmaps) {
    if (static_cast<int>(dscores.size()) != dmaps.d)
        raise(Errc::dimension_mismatch, "score/map count mismatch");
    std::size_t plane = dmaps.plane();
    for (int c = 0; c < dmaps.d; ++c) {
        double g = dscores[c] / static_cast<double>(plane);
        double* p = &dmaps.v[c * plane];
        for (std::size_t q = 0; q < plane; ++q) p[q] += g;
    }
}

void masked_pool_backward(const FeatureMap& f, const DenseMap& weights, const Embedding& pooled,
                          const Embedding& dpooled, DenseMap& dweights) {
    double mass = 0.0;
    for (double w : weights.v) mass += w;
    if (!(mass > 0.0)) raise(Errc::zero_mass, "pooling weights have zero mass");
    std::size_t plane = f.plane();
    for (std::size_t q = 0; q < plane; ++q) {
        double acc = 0.0;
        for (int d = 0; d < f.d; ++d) acc += dpooled[d] * (f.v[d * plane + q] - pooled[d]);
        dweights.v[q] += acc / mass;
    }
}

void min_max_normalize_backward(const DenseMap& input, const DenseMap& dnorm, DenseMap& dinput) {
    auto lo = std::min_element(input.v.begin(), input.v.end());
    auto hi = std::max_element(input.v.begin(), input.v.end());
    double a = *lo, r = *hi - a;
    if (!(r > 0.0)) return; // constant map: forward collapsed to zeros
    std::size_t imin = static_cast<std::size_t>(lo - input.v.begin());
    std::size_t imax = static_cast<std::size_t>(hi - input.v.begin());
    double gsum = 0.0, gwsum = 0.0;
    for (std::size_t q = 0; q < input.v.size(); ++q) {
        gsum += dnorm.v[q];
        gwsum += dnorm.v[q] * (input.v[q] - a) / r;
    }
    for (std::size_t q = 0; q < input.v.size(); ++q) {
        double g = dnorm.v[q] / r;
        if (q == imin) g += (gwsum - gsum) / r;
        if (q == imax) g -= gwsum / r;
        dinput.v[q] += g;
    }
}

double total_loss(const LossParts& parts, const LossConfig& cfg, bool warmup) {
    double l = cfg.lambda_c * parts.l_c + parts.l_class + parts.l_f;
    if (!warmup) l += parts.l_cos;
    return l;
}

std::vector<double> finite_diff_gradient(const std::function<double()>& loss_fn,
                                         const std::vector<ParamRef>& params, double eps) {
    if (!(eps > 0.0)) raise(Errc::invalid_config, "finite-difference step must be positive");
    std::vector<double> grad;
    for (const ParamRef& r : params)
        for (std::size_t i = 0; i < r.size; ++i) {
            double saved = r.data[i];
            r.data[i] = saved + eps;
            double up = loss_fn();
            r.data[i] = saved - eps;
            double down = loss_fn();
            r.data[i] = saved;
            grad.push_back((up - down) / (2.0 * eps));
        }
    return grad;
}

LossParts sample_forward_backward(const LocalizationHead& head, GestureClassifier* clf,
                                  const TrainSample& s, const LossConfig& cfg, bool warmup,
                                  LocalizationHead* hgrads, GestureClassifier* cgrads) {
    HeadCache cache;
    FeatureMap maps = localization_head_forward(head, s.features, cache);
    int classes = head.classes, h = maps.h, w = maps.w;
    if (s.task_label < 0 || s.task_label >= classes)
        raise(Errc::label_out_of_range, "task label out of range");

    LossParts parts;
    FeatureMap dmaps(classes, h, w);

    std::vector<double> scores = gap_scores(maps);
    if (hgrads) {
        std::vector<double> dscores;
        parts.l_f = cross_entropy_grad(scores, s.task_label, dscores);
        gap_backward(dscores, dmaps);
    } else {
        parts.l_f = cross_entropy(scores, s.task_label);
    }

    if (hgrads && cfg.lambda_c > 0.0) {
        FeatureMap dconc(classes, h, w);
        parts.l_c = concentration_loss_grad(maps, dconc);
        for (std::size_t p = 0; p < dmaps.v.size(); ++p)
            dmaps.v[p] += cfg.lambda_c * dconc.v[p];
    } else {
        parts.l_c = concentration_loss(maps);
    }

    bool need_cos = !s.target.empty() && !warmup;
    bool need_clf = clf != nullptr && s.gesture_label >= 0;
    if (need_cos || need_clf) {
        DenseMap map_t(h, w);
        std::copy_n(&maps.v[static_cast<std::size_t>(s.task_label) * maps.plane()], map_t.size(),
                    map_t.v.begin());
        DenseMap wnorm = min_max_normalize(map_t);
        double mass = 0.0;
        for (double x : wnorm.v) mass += x;
        bool through_weights = mass > 0.0;
        DenseMap weights = through_weights ? wnorm : DenseMap(h, w, 1.0);
        Embedding f_ego = masked_average_pool(s.features, weights);

        Embedding d_ego(f_ego.size(), 0.0);
        bool have_dego = false;
        if (need_cos) {
            Embedding g;
            parts.l_cos = cosine_margin_loss_grad(s.target, f_ego, cfg.alpha, g);
            if (hgrads) {
                for (std::size_t i = 0; i < g.size(); ++i) d_ego[i] += g[i];
                have_dego = true;
            }
        }
        if (need_clf) {
            if (s.gesture_label >= kGestureClasses)
                raise(Errc::label_out_of_range, "gesture label out of range");
            ClassifierCache cc;
            std::vector<double> gs = gesture_forward(*clf, f_ego, cc);
            if (cgrads) {
                std::vector<double> dgs;
                parts.l_class = cross_entropy_grad(gs, s.gesture_label, dgs);
                Embedding de;
                gesture_backward(*clf, cc, dgs, *cgrads, hgrads ? &de : nullptr);
                if (hgrads) {
                    for (std::size_t i = 0; i < de.size(); ++i) d_ego[i] += de[i];
                    have_dego = true;
                }
            } else {
                parts.l_class = cross_entropy(gs, s.gesture_label);
            }
        }
        if (hgrads && have_dego && through_weights) {
            DenseMap dweights(h, w);
            masked_pool_backward(s.features, weights, f_ego, d_ego, dweights);
            DenseMap dmap_t(h, w);
            min_max_normalize_backward(map_t, dweights, dmap_t);
            double* dst = &dmaps.v[static_cast<std::size_t>(s.task_label) * dmaps.plane()];
            for (std::size_t q = 0; q < dmap_t.v.size(); ++q) dst[q] += dmap_t.v[q];
        }
    }

    if (hgrads) localization_head_backward(head, cache, dmaps, *hgrads);
    return parts;
}

void calibrate_head_norms(LocalizationHead& head, const TrainBatch& batch) {
    if (batch.samples.empty()) return;
    std::vector<double> sum(head.d, 0.0), sumsq(head.d, 0.0);
    std::size_t count = 0;

    auto accumulate = [&](const FeatureMap& m) {
        std::size_t plane = m.plane();
        for (int c = 0; c < m.d; ++c) {
            const double* p = &m.v[c * plane];
            for (std::size_t q = 0; q < plane; ++q) {
                sum[c] += p[q];
                sumsq[c] += p[q] * p[q];
            }
        }
        count += plane;
    };
    auto freeze = [&](ChannelNorm& n) {
        for (int c = 0; c < n.ch; ++c) {
            double mu = sum[c] / static_cast<double>(count);
            double var = sumsq[c] / static_cast<double>(count) - mu * mu;
            n.mu[c] = mu;
            n.inv_sigma[c] = 1.0 / std::sqrt(std::max(var, 0.0) + 1e-5);
        }
        n.calibrated = true;
    };

    for (const TrainSample& s : batch.samples) {
        FeatureMap pre = pixelwise_affine(head.mlp.w.data(), head.mlp.b.data(), head.mlp.in,
                                          head.mlp.out, s.features);
        FeatureMap resid = s.features;
        for (std::size_t p = 0; p < resid.v.size(); ++p)
            resid.v[p] += std::max(0.0, pre.v[p]);
        accumulate(conv3x3_forward(head.conv1, resid));
    }
    freeze(head.norm1);

    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sumsq.begin(), sumsq.end(), 0.0);
    count = 0;
    for (const TrainSample& s : batch.samples) {
        FeatureMap pre = pixelwise_affine(head.mlp.w.data(), head.mlp.b.data(), head.mlp.in,
                                          head.mlp.out, s.features);
        FeatureMap resid = s.features;
        for (std::size_t p = 0; p < resid.v.size(); ++p)
            resid.v[p] += std::max(0.0, pre.v[p]);
        FeatureMap act1 =
            relu_map(channel_norm_forward(head.norm1, conv3x3_forward(head.conv1, resid)));
        accumulate(conv3x3_forward(head.conv2, act1));
    }
    freeze(head.norm2);
}

TrainResult train_heads(const std::vector<TrainBatch>& batches, LocalizationHead& head,
                        GestureClassifier* clf, const LossConfig& loss_cfg,
                        const TrainConfig& train_cfg) {
    if (train_cfg.epochs < 0 || train_cfg.learning_rate < 0.0 || train_cfg.weight_decay < 0.0)
        raise(Errc::invalid_config, "training hyperparameters must be non-negative");
    for (const TrainBatch& b : batches)
        for (const TrainSample& s : b.samples) {
            if (s.features.d != head.d)
                raise(Errc::data_inconsistency, "sample channel count does not match head");
            if (s.task_label < 0 || s.task_label >= head.classes)
                raise(Errc::data_inconsistency, "task label outside head classes");
            if (s.gesture_label >= kGestureClasses)
                raise(Errc::data_inconsistency, "gesture label outside gesture vocabulary");
            if (clf == nullptr && s.gesture_label >= 0)
                raise(Errc::data_inconsistency, "gesture label present without a classifier");
            if (!s.target.empty() && static_cast<int>(s.target.size()) != head.d)
                raise(Errc::data_inconsistency, "target embedding dim does not match features");
        }

    if (!batches.empty() && train_cfg.epochs > 0 && !head.norm1.calibrated)
        calibrate_head_norms(head, batches.front());

    TrainResult res;
    std::vector<ParamRef> hp = head_params(head);
    std::vector<ParamRef> cp = clf ? classifier_params(*clf) : std::vector<ParamRef>{};

    int step = 0;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        bool warmup = epoch < loss_cfg.warmup_epochs_without_cos;
        for (const TrainBatch& batch : batches) {
            if (batch.samples.empty()) continue;
            LocalizationHead hg = like_zeros(head);
            GestureClassifier cg = clf ? like_zeros(*clf) : GestureClassifier{};
            LossParts mean;
            for (const TrainSample& s : batch.samples) {
                LossParts p = sample_forward_backward(head, clf, s, loss_cfg, warmup, &hg,
                                                      clf ? &cg : nullptr);
                mean.l_cos += p.l_cos;
                mean.l_c += p.l_c;
                mean.l_class += p.l_class;
                mean.l_f += p.l_f;
            }
            double inv = 1.0 / static_cast<double>(batch.samples.size());
            mean.l_cos *= inv;
            mean.l_c *= inv;
            mean.l_class *= inv;
            mean.l_f *= inv;

            std::vector<ParamRef> hgp = head_params(hg);
            sgd_step(hp, hgp, train_cfg.learning_rate, train_cfg.weight_decay, inv);
            if (clf) {
                std::vector<ParamRef> cgp = classifier_params(cg);
                sgd_step(cp, cgp, train_cfg.learning_rate, train_cfg.weight_decay, inv);
            }

            StepTrace t;
            t.step = step++;
            t.epoch = epoch;
            t.l_cos = mean.l_cos;
            t.l_c = mean.l_c;
            t.l_class = mean.l_class;
            t.l_f = mean.l_f;
            t.total = total_loss(mean, loss_cfg, warmup);
            res.trace.push_back(t);
        }
    }
    return res;
}

} // namespace graspkit
