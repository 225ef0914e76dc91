#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graspkit/tensor_core.hpp"

namespace graspkit {

inline constexpr int kGestureClasses = 14;

struct LossConfig {
    double alpha = 0.5;                // cosine margin
    double lambda_c = 0.07;            // concentration weight
    int warmup_epochs_without_cos = 1; // initial epochs that drop the cosine term
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 5e-4;
    int batch_size = 3;
    int exo_per_batch = 3;
    int epochs = 1;
    std::uint64_t seed = 0;
};

// Plain parameter blocks. Weights are row-major; gradients reuse the same
// structs so parameter traversal order is shared by the optimizer, the
// checkpoint writer, and the finite-difference harness.
struct Linear {
    int in = 0, out = 0;
    std::vector<double> w; // out*in
    std::vector<double> b; // out
};

struct Conv3x3 {
    int in_ch = 0, out_ch = 0;
    std::vector<double> w; // out*in*3*3
    std::vector<double> b; // out
};

struct Conv1x1 {
    int in_ch = 0, out_ch = 0;
    std::vector<double> w; // out*in
    std::vector<double> b; // out
};

// Per-channel affine normalization with statistics frozen after a one-shot
// calibration pass; only gamma/beta train.
struct ChannelNorm {
    int ch = 0;
    std::vector<double> mu, inv_sigma; // frozen statistics
    std::vector<double> gamma, beta;   // trainable
    bool calibrated = false;
};

struct LocalizationHead {
    int d = 0;       // feature channels
    int classes = 0; // task classes
    Linear mlp;      // per-pixel D->D residual branch
    Conv3x3 conv1, conv2;
    ChannelNorm norm1, norm2;
    Conv1x1 class_conv; // D -> classes
};

struct GestureClassifier {
    int d = 0;
    Linear fc1; // D -> D
    Linear fc2; // D -> kGestureClasses
};

LocalizationHead make_head(int d, int classes, std::uint64_t seed);
GestureClassifier make_classifier(int d, std::uint64_t seed);
LocalizationHead like_zeros(const LocalizationHead& h);
GestureClassifier like_zeros(const GestureClassifier& c);

struct ParamRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    bool trainable = true;
};

std::vector<ParamRef> head_params(LocalizationHead& h);
std::vector<ParamRef> classifier_params(GestureClassifier& c);
std::vector<ParamRef> trainable_only(const std::vector<ParamRef>& refs);
std::vector<double> flatten(const std::vector<ParamRef>& refs);

// Layer forwards, exposed for unit-level verification.
FeatureMap conv3x3_forward(const Conv3x3& k, const FeatureMap& in);
FeatureMap conv1x1_forward(const Conv1x1& k, const FeatureMap& in);
FeatureMap channel_norm_forward(const ChannelNorm& n, const FeatureMap& in);

struct HeadCache {
    FeatureMap input;     // s0
    FeatureMap mlp_pre;   // W*s0+b, pre-activation
    FeatureMap resid;     // s0 + relu(mlp_pre)
    FeatureMap conv1_out; // pre-norm
    FeatureMap act1;      // relu(norm1(conv1_out))
    FeatureMap conv2_out;
    FeatureMap act2;
    FeatureMap class_pre; // 1x1 conv output, pre-activation
    FeatureMap maps;      // relu(class_pre)
};

FeatureMap localization_head_forward(const LocalizationHead& h, const FeatureMap& f);
FeatureMap localization_head_forward(const LocalizationHead& h, const FeatureMap& f,
                                     HeadCache& cache);
// Accumulates parameter gradients into `grads` (shapes from like_zeros).
// The backbone is frozen, so no input gradient is produced.
void localization_head_backward(const LocalizationHead& h, const HeadCache& cache,
                                const FeatureMap& dmaps, LocalizationHead& grads);

struct ClassifierCache {
    Embedding input;
    std::vector<double> pre1; // fc1 output, pre-activation
    std::vector<double> act1;
    std::vector<double> scores;
};

std::vector<double> gesture_forward(const GestureClassifier& c, const Embedding& e);
std::vector<double> gesture_forward(const GestureClassifier& c, const Embedding& e,
                                    ClassifierCache& cache);
void gesture_backward(const GestureClassifier& c, const ClassifierCache& cache,
                      const std::vector<double>& dscores, GestureClassifier& grads,
                      Embedding* dinput);

// Losses. The *_grad variants return the loss and write the gradient with
// respect to the argument noted in the parameter name.
double cosine_margin_loss(const Embedding& f_op, const Embedding& f_ego, double alpha);
double cosine_margin_loss_grad(const Embedding& f_op, const Embedding& f_ego, double alpha,
                               Embedding& d_ego);

double concentration_loss(const FeatureMap& maps);
double concentration_loss(const DenseMap& map);
double concentration_loss_grad(const FeatureMap& maps, FeatureMap& dmaps);

double cross_entropy(const std::vector<double>& scores, int label);
double cross_entropy_grad(const std::vector<double>& scores, int label,
                          std::vector<double>& dscores);

std::vector<double> gap_scores(const FeatureMap& maps);
void gap_backward(const std::vector<double>& dscores, FeatureMap& dmaps);

// Gradients for the pooling path: embedding -> pooling weights -> raw map.
void masked_pool_backward(const FeatureMap& f, const DenseMap& weights, const Embedding& pooled,
                          const Embedding& dpooled, DenseMap& dweights);
void min_max_normalize_backward(const DenseMap& input, const DenseMap& dnorm, DenseMap& dinput);

struct LossParts {
    double l_cos = 0.0, l_c = 0.0, l_class = 0.0, l_f = 0.0;
};

double total_loss(const LossParts& parts, const LossConfig& cfg, bool warmup);

// Central differences over the given parameter views, in flattened order.
// loss_fn() must re-evaluate the loss from the live parameter storage.
std::vector<double> finite_diff_gradient(const std::function<double()>& loss_fn,
                                         const std::vector<ParamRef>& params, double eps);

struct TrainSample {
    FeatureMap features;
    int task_label = 0;
    int gesture_label = -1; // <0 disables the classifier term for this sample
    Embedding target;       // empty disables the cosine term for this sample
};

struct TrainBatch {
    std::vector<TrainSample> samples;
};

struct StepTrace {
    int step = 0, epoch = 0;
    double l_cos = 0.0, l_c = 0.0, l_class = 0.0, l_f = 0.0, total = 0.0;
};

struct TrainResult {
    std::vector<StepTrace> trace;
};

// One sample's losses, with optional gradient accumulation into hgrads/cgrads.
LossParts sample_forward_backward(const LocalizationHead& head, GestureClassifier* clf,
                                  const TrainSample& s, const LossConfig& cfg, bool warmup,
                                  LocalizationHead* hgrads, GestureClassifier* cgrads);

void calibrate_head_norms(LocalizationHead& head, const TrainBatch& batch);

TrainResult train_heads(const std::vector<TrainBatch>& batches, LocalizationHead& head,
                        GestureClassifier* clf, const LossConfig& loss_cfg,
                        const TrainConfig& train_cfg);

} // namespace graspkit
