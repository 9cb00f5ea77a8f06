#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tasnn/attention.hpp"
#include "tasnn/events.hpp"
#include "tasnn/neurons.hpp"
#include "tasnn/ops.hpp"

namespace tasnn {

// Where frame-attention modules sit: none / first weighted layer only /
// every weighted layer except the first / everywhere.
enum class TAStrategy { S1, S2, S3, S4 };

enum class RunMode { Train, Infer };
enum class LossKind { MseRate, CrossEntropyRate };
enum class PruneKind { None, Iap, Irp };

struct PruneContext {
  PruneKind kind = PruneKind::None;
  real p = 0;
  Rng* rng = nullptr;  // required for Irp
};

struct LayerDesc {
  enum class Kind { MaxPool, AvgPool, Conv, Linear, Dropout };
  Kind kind;
  std::size_t arg = 0;     // pool window, conv channels or linear width
  std::size_t kernel = 3;  // conv only
  real rate = 0;           // dropout only

  bool weighted() const { return kind == Kind::Conv || kind == Kind::Linear; }
};

// Parses pipeline notation like "Input-MP4-64C3-128C3-AP2-256FC-11":
// MPk/APk pool with window k, nCk is a conv with n maps and k x k kernel,
// nFC a linear layer with n outputs, DOp a dropout with rate p percent, and
// a trailing bare integer is the class readout layer.
std::vector<LayerDesc> parse_structure(const std::string& notation);

struct NetworkSpec {
  std::size_t in_c = 2, in_h = 0, in_w = 0;
  std::size_t T = 0;
  std::size_t classes = 0;  // derived from the last layer by validate()
  std::vector<LayerDesc> layers;
  TAStrategy strategy = TAStrategy::S1;
  NeuronConfig neuron;
  std::size_t ta_r = 16;
  TAHiddenRule ta_hidden = TAHiddenRule::Ceil;
  real ta_d_th = 0;
  // statistic for the first weighted layer's attention taken from the raw
  // network input rather than its post-pooling input
  bool ta_squeeze_prepool = false;
  bool bias = true;
  std::string structure;  // original notation, kept for display/serialization

  void validate();  // fills classes, throws ConfigError naming the layer
};

struct Block {
  LayerDesc desc;
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::size_t out_c = 0, out_h = 0, out_w = 0;
  LayerParams params;          // weighted blocks only
  std::optional<TAParams> ta;  // weighted blocks per strategy
  std::size_t weighted_index = SIZE_MAX;

  std::size_t in_size() const { return in_c * in_h * in_w; }
  std::size_t out_size() const { return out_c * out_h * out_w; }
  // multiply-accumulates to run this block on one frame (weighted only)
  std::size_t macs_per_frame() const;
};

// A layer pipeline unrolled over T timesteps with shared-parameter spiking
// dynamics after every weighted layer. Value semantics: copying a network
// copies its parameters, so read-only copies can run in parallel.
class Network {
 public:
  static Network build(const NetworkSpec& spec, std::uint64_t init_seed);

  // Runs the pipeline layer by layer, each layer across all T steps, so the
  // attention statistic can see its layer's whole input sequence. Train mode
  // uses continuous attention scores and records everything backward needs;
  // infer mode binarizes the scores and skips the weighted computation of
  // frames scored 0.
  Tensor forward(const FrameTensor& frames, RunMode mode,
                 const PruneContext* prune = nullptr,
                 Rng* dropout_rng = nullptr);

  real loss_value(const Tensor& outputs, std::size_t label,
                  LossKind loss = LossKind::MseRate) const;
  // forward in train mode + full backward through time; adds into the
  // gradient accumulators and returns the loss
  real loss_and_backward(const FrameTensor& frames, std::size_t label,
                         LossKind loss = LossKind::MseRate,
                         Rng* dropout_rng = nullptr);

  void zero_grads();
  std::vector<Tensor*> parameters();
  std::vector<Tensor*> gradients();
  std::vector<std::string> parameter_names() const;

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t param_count() const;
  std::size_t ta_param_count() const;

  // introspection for the most recent forward
  const std::vector<std::vector<real>>& last_scores() const {
    return last_scores_;
  }
  const std::vector<std::size_t>& last_executed_frames() const {
    return last_executed_;
  }
  // smallest distance of any membrane value from the threshold and from
  // zero in the most recent train-mode forward (gradient-check helper)
  real min_membrane_margin() const;

 private:
  struct BlockTrace {
    std::vector<Tensor> in_seq;
    std::vector<Tensor> post_ta;
    std::vector<Tensor> u_seq;
    std::vector<Tensor> z_seq;
    std::vector<Tensor> drop_mask;
    TACache ta_cache;
    std::vector<real> scores;  // empty means all-ones
  };

  NetworkSpec spec_;
  std::vector<Block> blocks_;
  std::vector<BlockTrace> trace_;
  std::vector<std::vector<real>> last_scores_;  // per weighted block
  std::vector<std::size_t> last_executed_;      // per weighted block
  bool trace_valid_ = false;

  void backward(const Tensor& grad_outputs);
};

// mean over timesteps of the output sequence; prediction is the argmax with
// first-index tie-break
std::vector<real> rate_readout(const Tensor& outputs);
std::size_t argmax_index(const std::vector<real>& v);

}  // namespace tasnn
