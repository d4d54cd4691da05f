#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lncb/event.hpp"
#include "lncb/features.hpp"
#include "lncb/kernels.hpp"
#include "lncb/labeling.hpp"
#include "lncb/metrics.hpp"
#include "lncb/rng.hpp"

namespace lncb {

class ShapeMismatch : public std::runtime_error {
public:
    explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

class EmptyBatchAfterDownsampling : public std::runtime_error {
public:
    EmptyBatchAfterDownsampling()
        : std::runtime_error("no rows left after downsampling; skip this step") {}
};

class NoTrainSnapshots : public std::runtime_error {
public:
    NoTrainSnapshots() : std::runtime_error("no snapshot timestamps fall inside the train split") {}
};

class NonFiniteLoss : public std::runtime_error {
public:
    explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
    int epochs = 30;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    int warmup_steps = 1000;
    std::array<double, kNumClasses> class_weights{1.0, 5.0, 5.0};
    std::optional<double> downsample_ratio;           // open rows kept per closing row
    std::optional<std::size_t> max_open_edges_per_step;
    std::uint64_t seed = 0;
    int64_t delta_seconds = 180LL * 86400;
    int depth = 2;    // 1 = single linear map
    int hidden = 128;
    FeatureConfig features;

    void validate() const;  // throws std::invalid_argument
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Feed-forward classifier over the encoded feature vector. Owns the time
// encoder so its parameters train jointly with the layers.
struct MlpModel {
    FeatureSchema schema;
    TimeEncoder encoder;
    int depth = 2;
    int hidden = 128;
    std::vector<Mat> w;                   // w[l]: out x in
    std::vector<std::vector<double>> b;

    static MlpModel init(const FeatureConfig& cfg, int depth, int hidden, Rng& rng);
    std::size_t input_dim() const { return schema.dim(); }
};

struct ForwardCache {
    std::vector<Mat> a;  // a[l] = input to layer l; a[0] is the encoded batch
    std::vector<Mat> z;  // z[l] = pre-activation output of layer l
};

// Logits for an already-encoded batch (x: n x schema.dim()).
Mat forward(const MlpModel& model, const Mat& x, ForwardCache* cache = nullptr);

// Encode the snapshot with the model's own time encoder, then forward.
Mat forward_batch(const MlpModel& model, const SnapshotBatch& batch,
                  ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<Mat> w;
    std::vector<std::vector<double>> b;
    std::vector<double> omega;
    std::vector<double> phase;
};

// Full-parameter gradients given dlogits. time_scalars (n x 3, days) routes
// the encoded-input gradient back into the encoder; pass nullptr when the
// time group is disabled.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Mat& dlogits,
                   const Mat* time_scalars);

// Gradient of the loss with respect to the encoded input batch.
Mat input_gradient(const MlpModel& model, const ForwardCache& cache, const Mat& dlogits);

struct LossResult {
    double loss = 0.0;
    Mat dlogits;  // full batch shape; zero rows for excluded instances
    std::size_t rows_included = 0;
};

// Mean over included rows of weights[y] * (-log softmax(logits)_y), with the
// matching analytic gradient. `rows` selects the included subset.
LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights,
                            const std::vector<std::size_t>& rows);
LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights);
// Downsampling form: keeps all closure rows plus ratio * (#closing) uniformly
// sampled open rows, then computes the loss over that subset.
LossResult weighted_ce_loss(const Mat& logits, const std::vector<int>& labels,
                            const std::array<double, kNumClasses>& weights, double ratio,
                            Rng& rng);

// Selects all closure rows plus ratio * (#closing rows) uniformly sampled
// open rows from `candidates`. Returns sorted indices; throws
// EmptyBatchAfterDownsampling when nothing survives.
std::vector<std::size_t> downsample_rows(const std::vector<int>& labels,
                                         const std::vector<std::size_t>& candidates, double ratio,
                                         Rng& rng);
std::vector<std::size_t> downsample_rows(const std::vector<int>& labels, double ratio, Rng& rng);

// Uniformly samples open rows so the total stays at or under `cap`, never
// dropping closure rows. Returns sorted indices.
std::vector<std::size_t> cap_open_rows(const std::vector<int>& labels, std::size_t cap,
                                       Rng& rng);

// Row subset of a snapshot batch (indices must be sorted).
SnapshotBatch select_rows(const SnapshotBatch& batch, const std::vector<std::size_t>& rows);

// Adam with decoupled weight decay and linear learning-rate warmup.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double weight_decay, int warmup_steps);
    void step(MlpModel& model, const Gradients& g);
    int steps_taken() const { return t_; }
    double effective_lr() const;  // lr * min(1, t / warmup)

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    struct Moments {
        std::vector<double> m, v;
    };
    void update(std::vector<double>& p, const std::vector<double>& g, Moments& mom,
                double lr_t, double bc1, double bc2);

    double lr_;
    double weight_decay_;
    int warmup_steps_;
    int t_ = 0;
    std::vector<Moments> w_;
    std::vector<Moments> b_;
    Moments omega_;
    Moments phase_;
    bool initialized_ = false;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_macro_f1 = -1.0;  // -1 when the val split held no snapshots
    std::array<double, kNumClasses> val_f1{};
    double lr_last = 0.0;
    int steps = 0;
};

struct TrainResult {
    MlpModel model;  // checkpoint with the best validation macro-F1
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_macro_f1 = -1.0;
    std::size_t total_steps = 0;
    double capped_open_fraction = 0.0;  // share of open rows dropped by the step cap
};

// Replays the train split once per epoch from the warm-start state, taking
// one optimizer step per distinct timestamp over all currently-open edges.
TrainResult train(const TrainConfig& cfg, const EventLog& warm, const EventLog& timeline,
                  const SplitBoundaries& splits, const Scaler& scaler);

enum class BaselineKind { Uniform, Stratified, Majority };

const char* to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

std::vector<Label> predict_baseline(BaselineKind kind,
                                    const std::array<double, kNumClasses>& train_dist,
                                    std::size_t n, Rng& rng);

struct AttributionReport {
    // Static feature names plus the three time scalars; encoder outputs are
    // summed back onto their source scalar.
    std::vector<std::string> names;
    std::vector<double> mean_abs;
    double max_completeness_gap = 0.0;  // worst relative |sum(attr) - (f(x) - f(0))|

    std::vector<std::pair<std::string, double>> ranked() const;
    nlohmann::json to_json() const;
};

// Path-integrated gradients of the predicted-class logit from the zero
// baseline, midpoint rule with `steps` interpolation points.
AttributionReport attribute(const MlpModel& model, const Mat& x, int steps = 32);

nlohmann::json checkpoint_json(const MlpModel& model, const TrainConfig& cfg);
MlpModel load_checkpoint(const nlohmann::json& j, TrainConfig* cfg_out = nullptr);

}  // namespace lncb
