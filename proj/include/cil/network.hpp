#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cil/etf.hpp"
#include "cil/rng.hpp"
#include "cil/tensor.hpp"

namespace cil {

enum class Wiring { parallel, serial };
enum class HeadKind { etf, fc };

const char* to_string(Wiring w);
const char* to_string(HeadKind h);
Wiring wiring_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);

struct NetworkConfig {
  std::size_t input_dim = 0;
  std::size_t width = 0;      // base/expand feature width
  std::size_t head_dim = 0;   // adapt output width == classifier input dim
  Wiring wiring = Wiring::parallel;
  HeadKind head = HeadKind::etf;
  bool use_adapt = true;
  std::size_t adapt_hidden = 0;  // 0 -> 2 * width
};

// y = xW + b, Kaiming-uniform W and zero b.
struct Affine {
  Tensor W, b;
  std::size_t in = 0, out = 0;

  Affine() = default;
  Affine(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return in * out + out; }
};

// relu(A2(relu(A1 x)) + skip(x)); the skip is the identity when the widths
// match and a bias-free projection otherwise. identity_start zeroes A2 and
// makes the skip select the trailing `out` input coordinates, so the block
// initially reproduces its predecessor's output exactly and only departs
// from it as training demands — new expand layers must not disturb frozen
// behavior at the moment they are attached.
struct ResidualBlock {
  Affine a1, a2;
  Tensor proj;  // in x out, defined only when in != out
  std::size_t in = 0, out = 0;

  ResidualBlock() = default;
  ResidualBlock(std::size_t in, std::size_t out, Rng& rng,
                bool identity_start = false);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const;
};

// Trainable affine classifier for the FC ablation; grows columns as classes
// arrive, preserving existing weights bit-exactly.
struct FcHead {
  Affine layer;
  std::map<int, std::size_t> class_map;

  void init(std::size_t in_dim, const std::vector<int>& class_ids, Rng& rng);
  void grow(const std::vector<int>& new_class_ids, Rng& rng);
  Tensor forward(const Tensor& feats) const;
  std::vector<int> predict(const Tensor& feats) const;
  std::size_t num_classes() const { return class_map.size(); }
};

// Everything flowing at one stage: base features, every expand-layer output
// in order, adapted features, and head logits.
struct StageOutput {
  Tensor mu_b;
  std::vector<Tensor> mu_e;
  Tensor mu_a;  // == mu_e.back() when the adapt layer is disabled
  Tensor logits;
};

// The expandable model: a 3-block base, one expand block per task, a 2-layer
// MLP adapt head, and either an ETF or an FC classifier. The freeze mask is
// realized through the parameters' requires_grad flags.
class ModelState {
 public:
  ModelState(const NetworkConfig& cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }
  std::size_t num_expand_layers() const { return expands_.size(); }

  Tensor forward_base(const Tensor& x) const;
  StageOutput forward_stage(const Tensor& x, std::size_t stage) const;
  Tensor adapt_forward(const Tensor& mu_e) const;

  // Appends one expand block sized for the wiring mode. Must happen between
  // tasks; calling mid-training or twice in a row is a protocol error.
  void add_expand_layer(std::uint64_t seed);
  // Stage 0 trains everything; later stages freeze the base and all earlier
  // expand layers, keeping the newest expand layer and the adapt/fc head hot.
  void freeze_for_stage(std::size_t stage);
  void begin_training();
  void end_training();

  void set_etf(EtfClassifier etf);
  const EtfClassifier& etf() const;
  bool has_etf() const { return etf_.has_value(); }
  FcHead& fc();
  const FcHead& fc() const;

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> trainable_params() const;
  std::map<std::string, bool> freeze_mask() const;

  // Classifier-space features for a batch (adapted when the adapt layer is
  // on, last expand output otherwise).
  Tensor embed(const Tensor& x, std::size_t stage) const;
  std::vector<int> predict(const Tensor& x, std::size_t stage) const;

  std::size_t base_param_count() const;
  std::vector<std::size_t> expand_param_counts() const;
  std::size_t adapt_param_count() const;
  std::size_t head_param_count() const;

  // Versioned text checkpoint: config, named parameter arrays (exact decimal
  // round-trip), freeze mask, and the classifier. Bit-exact on reload.
  std::string serialize() const;
  static ModelState deserialize(const std::string& text);
  void save(const std::string& path) const;
  static ModelState load(const std::string& path);

 private:
  ModelState() = default;

  NetworkConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<ResidualBlock> base_;
  std::vector<ResidualBlock> expands_;
  Affine adapt1_, adapt2_;
  std::optional<EtfClassifier> etf_;
  FcHead fc_;
  bool training_active_ = false;
  bool expand_pending_ = false;  // guards double add without training

  std::size_t expand_in_width(bool first) const;
  void collect(std::vector<std::pair<std::string, Tensor>>& out) const;
};

}  // namespace cil
