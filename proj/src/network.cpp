#include "cil/network.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/ops.hpp"

namespace cil {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw ParseError("checkpoint: bad number '" + s + "'");
  return v;
}

}  // namespace

const char* to_string(Wiring w) {
  return w == Wiring::parallel ? "parallel" : "serial";
}

const char* to_string(HeadKind h) { return h == HeadKind::etf ? "etf" : "fc"; }

Wiring wiring_from_string(const std::string& s) {
  if (s == "parallel") return Wiring::parallel;
  if (s == "serial") return Wiring::serial;
  throw ConfigError("wiring must be 'parallel' or 'serial', got '" + s + "'");
}

HeadKind head_from_string(const std::string& s) {
  if (s == "etf") return HeadKind::etf;
  if (s == "fc") return HeadKind::fc;
  throw ConfigError("head must be 'etf' or 'fc', got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Affine::Affine(std::size_t in_, std::size_t out_, Rng& rng) : in(in_), out(out_) {
  W = Tensor::zeros({in, out}, true);
  b = Tensor::zeros({out}, true);
  kaiming_uniform_fill(W, in, rng);
}

Tensor Affine::forward(const Tensor& x) const {
  return add_rowvec(matmul(x, W), b);
}

ResidualBlock::ResidualBlock(std::size_t in_, std::size_t out_, Rng& rng,
                             bool identity_start)
    : a1(in_, out_, rng), a2(out_, out_, rng), in(in_), out(out_) {
  if (identity_start) {
    if (in < out) {
      throw ContractError("block: identity start needs input width >= " +
                          std::to_string(out) + ", got " + std::to_string(in));
    }
    for (std::size_t i = 0; i < a2.W.size(); ++i) a2.W.at(i) = 0.0;
  }
  if (in != out) {
    proj = Tensor::zeros({in, out}, true);
    if (identity_start) {
      // select the trailing `out` coordinates (the predecessor's features)
      for (std::size_t j = 0; j < out; ++j) proj.at2(in - out + j, j) = 1.0;
    } else {
      kaiming_uniform_fill(proj, in, rng);
    }
  }
}

Tensor ResidualBlock::forward(const Tensor& x) const {
  Tensor h = relu(a1.forward(x));
  Tensor y = a2.forward(h);
  Tensor skip = proj.defined() ? matmul(x, proj) : x;
  return relu(add(y, skip));
}

std::size_t ResidualBlock::param_count() const {
  std::size_t n = a1.param_count() + a2.param_count();
  if (proj.defined()) n += proj.size();
  return n;
}

void FcHead::init(std::size_t in_dim, const std::vector<int>& class_ids,
                  Rng& rng) {
  layer = Affine(in_dim, class_ids.size(), rng);
  class_map.clear();
  for (std::size_t i = 0; i < class_ids.size(); ++i) class_map[class_ids[i]] = i;
}

void FcHead::grow(const std::vector<int>& new_class_ids, Rng& rng) {
  const std::size_t old_k = layer.out;
  const std::size_t new_k = old_k + new_class_ids.size();
  Affine grown(layer.in, new_k, rng);
  // keep existing columns bit-identical
  for (std::size_t i = 0; i < layer.in; ++i)
    for (std::size_t j = 0; j < old_k; ++j)
      grown.W.at2(i, j) = layer.W.at2(i, j);
  for (std::size_t j = 0; j < old_k; ++j) grown.b.at(j) = layer.b.at(j);
  for (int id : new_class_ids) {
    if (class_map.count(id)) {
      throw ContractError("fc head: class id " + std::to_string(id) +
                          " already mapped");
    }
  }
  std::size_t col = old_k;
  for (int id : new_class_ids) class_map[id] = col++;
  layer = grown;
}

Tensor FcHead::forward(const Tensor& feats) const { return layer.forward(feats); }

std::vector<int> FcHead::predict(const Tensor& feats) const {
  NoGradScope ng;
  Tensor logits = forward(feats);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    bool first = true;
    double best = 0.0;
    int best_id = -1;
    for (const auto& [id, col] : class_map) {
      const double v = logits.at2(i, col);
      if (first || v > best) {
        best = v;
        best_id = id;
        first = false;
      }
    }
    out[i] = best_id;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ModelState
// ---------------------------------------------------------------------------

ModelState::ModelState(const NetworkConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed) {
  if (cfg_.input_dim == 0 || cfg_.width == 0 || cfg_.head_dim == 0) {
    throw ContractError("model: input_dim, width and head_dim must be set");
  }
  if (cfg_.adapt_hidden == 0) cfg_.adapt_hidden = 2 * cfg_.width;
  if (!cfg_.use_adapt && cfg_.head == HeadKind::etf &&
      cfg_.head_dim != cfg_.width) {
    throw ContractError(
        "model: without the adapt layer the classifier consumes expand "
        "features directly, so head_dim must equal width");
  }
  Rng rng(derive_seed(seed, 0x0D));
  base_.emplace_back(cfg_.input_dim, cfg_.width, rng);
  base_.emplace_back(cfg_.width, cfg_.width, rng);
  base_.emplace_back(cfg_.width, cfg_.width, rng);
  expands_.emplace_back(cfg_.width, cfg_.width, rng);  // the base task's layer
  if (cfg_.use_adapt) {
    adapt1_ = Affine(cfg_.width, cfg_.adapt_hidden, rng);
    adapt2_ = Affine(cfg_.adapt_hidden, cfg_.head_dim, rng);
  }
}

std::size_t ModelState::expand_in_width(bool first) const {
  if (first) return cfg_.width;
  return cfg_.wiring == Wiring::parallel ? 2 * cfg_.width : cfg_.width;
}

Tensor ModelState::forward_base(const Tensor& x) const {
  if (x.cols() != cfg_.input_dim) {
    throw DimensionError("model: input width " + std::to_string(x.cols()) +
                         " does not match base input width " +
                         std::to_string(cfg_.input_dim));
  }
  Tensor h = x;
  for (const ResidualBlock& blk : base_) h = blk.forward(h);
  return h;
}

StageOutput ModelState::forward_stage(const Tensor& x, std::size_t stage) const {
  if (stage >= expands_.size()) {
    throw ProtocolError("model: stage " + std::to_string(stage) +
                        " out of range, only " +
                        std::to_string(expands_.size()) + " expand layers");
  }
  StageOutput out;
  out.mu_b = forward_base(x);
  out.mu_e.reserve(stage + 1);
  out.mu_e.push_back(expands_[0].forward(out.mu_b));
  for (std::size_t i = 1; i <= stage; ++i) {
    Tensor in = cfg_.wiring == Wiring::parallel
                    ? concat_cols(out.mu_b, out.mu_e[i - 1])
                    : out.mu_e[i - 1];
    out.mu_e.push_back(expands_[i].forward(in));
  }
  out.mu_a = cfg_.use_adapt ? adapt_forward(out.mu_e[stage]) : out.mu_e[stage];
  if (cfg_.head == HeadKind::etf) {
    if (!etf_) throw ContractError("model: no ETF classifier set");
    out.logits = matmul(out.mu_a, etf_->W);
  } else {
    if (fc_.num_classes() == 0) throw ContractError("model: fc head not built");
    out.logits = fc_.forward(out.mu_a);
  }
  return out;
}

Tensor ModelState::adapt_forward(const Tensor& mu_e) const {
  if (!cfg_.use_adapt) throw ContractError("model: adapt layer disabled");
  if (mu_e.cols() != cfg_.width) {
    throw DimensionError("model: adapt input width " +
                         std::to_string(mu_e.cols()) + " != " +
                         std::to_string(cfg_.width));
  }
  return adapt2_.forward(relu(adapt1_.forward(mu_e)));
}

void ModelState::add_expand_layer(std::uint64_t seed) {
  if (training_active_) {
    throw ProtocolError("model: add_expand_layer called mid-task");
  }
  if (expand_pending_) {
    throw ProtocolError(
        "model: add_expand_layer called twice without an intervening task");
  }
  Rng rng(derive_seed(seed, 0xADD));
  // Parallel expansion attaches the new layer as an exact copy of its
  // predecessor (zero-init refinement, selector skip), so the deployed model
  // is unchanged at the moment of attachment and departs only as the new
  // task's loss demands. The serial ablation keeps the traditional random
  // initialization of a chained block.
  const bool identity_start = cfg_.wiring == Wiring::parallel;
  expands_.emplace_back(expand_in_width(false), cfg_.width, rng, identity_start);
  expand_pending_ = true;
}

void ModelState::freeze_for_stage(std::size_t stage) {
  if (stage >= expands_.size()) {
    throw ProtocolError("model: freeze stage " + std::to_string(stage) +
                        " out of range");
  }
  const bool base_trainable = stage == 0;
  for (auto& [name, p] : named_params()) {
    bool trainable;
    if (name.rfind("base.", 0) == 0) {
      trainable = base_trainable;
    } else if (name.rfind("expand.", 0) == 0) {
      const std::size_t idx = std::stoul(name.substr(7));
      trainable = idx == stage;
    } else {
      trainable = true;  // adapt layer and fc head stay hot throughout
    }
    p.set_requires_grad(trainable);
    if (!trainable) p.drop_grad();
  }
}

void ModelState::begin_training() {
  training_active_ = true;
  expand_pending_ = false;
}

void ModelState::end_training() { training_active_ = false; }

void ModelState::set_etf(EtfClassifier etf) {
  etf.W.set_requires_grad(false);  // the classifier is never trained
  etf_ = std::move(etf);
}

const EtfClassifier& ModelState::etf() const {
  if (!etf_) throw ContractError("model: no ETF classifier set");
  return *etf_;
}

FcHead& ModelState::fc() { return fc_; }
const FcHead& ModelState::fc() const { return fc_; }

void ModelState::collect(std::vector<std::pair<std::string, Tensor>>& out) const {
  auto add_affine = [&out](const std::string& prefix, const Affine& a) {
    out.emplace_back(prefix + ".W", a.W);
    out.emplace_back(prefix + ".b", a.b);
  };
  auto add_block = [&](const std::string& prefix, const ResidualBlock& blk) {
    add_affine(prefix + ".a1", blk.a1);
    add_affine(prefix + ".a2", blk.a2);
    if (blk.proj.defined()) out.emplace_back(prefix + ".proj", blk.proj);
  };
  for (std::size_t i = 0; i < base_.size(); ++i)
    add_block("base." + std::to_string(i), base_[i]);
  for (std::size_t i = 0; i < expands_.size(); ++i)
    add_block("expand." + std::to_string(i), expands_[i]);
  if (cfg_.use_adapt) {
    add_affine("adapt.1", adapt1_);
    add_affine("adapt.2", adapt2_);
  }
  if (cfg_.head == HeadKind::fc && fc_.num_classes() > 0) {
    add_affine("head.fc", fc_.layer);
  }
}

std::vector<std::pair<std::string, Tensor>> ModelState::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  collect(out);
  return out;
}

std::vector<Tensor> ModelState::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_params())
    if (p.requires_grad()) out.push_back(p);
  return out;
}

std::map<std::string, bool> ModelState::freeze_mask() const {
  std::map<std::string, bool> mask;
  for (const auto& [name, p] : named_params()) mask[name] = !p.requires_grad();
  return mask;
}

Tensor ModelState::embed(const Tensor& x, std::size_t stage) const {
  NoGradScope ng;
  StageOutput out = forward_stage(x, stage);
  return out.mu_a;
}

std::vector<int> ModelState::predict(const Tensor& x, std::size_t stage) const {
  NoGradScope ng;
  StageOutput out = forward_stage(x, stage);
  if (cfg_.head == HeadKind::etf) return classify_batch(*etf_, out.mu_a);
  return fc_.predict(out.mu_a);
}

std::size_t ModelState::base_param_count() const {
  std::size_t n = 0;
  for (const auto& blk : base_) n += blk.param_count();
  return n;
}

std::vector<std::size_t> ModelState::expand_param_counts() const {
  std::vector<std::size_t> out;
  for (const auto& blk : expands_) out.push_back(blk.param_count());
  return out;
}

std::size_t ModelState::adapt_param_count() const {
  return cfg_.use_adapt ? adapt1_.param_count() + adapt2_.param_count() : 0;
}

std::size_t ModelState::head_param_count() const {
  return cfg_.head == HeadKind::fc && fc_.num_classes() > 0
             ? fc_.layer.param_count()
             : 0;
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

std::string ModelState::serialize() const {
  std::ostringstream os;
  os << "cilmodel v1\n";
  os << "seed " << seed_ << "\n";
  os << "config " << cfg_.input_dim << " " << cfg_.width << " " << cfg_.head_dim
     << " " << to_string(cfg_.wiring) << " " << to_string(cfg_.head) << " "
     << (cfg_.use_adapt ? 1 : 0) << " " << cfg_.adapt_hidden << "\n";
  os << "expands " << expands_.size();
  for (const auto& blk : expands_) os << " " << blk.in;
  os << "\n";
  if (cfg_.head == HeadKind::fc) {
    os << "fc_classes";
    for (const auto& [id, col] : fc_.class_map) os << " " << id << ":" << col;
    os << "\n";
  }
  for (const auto& [name, p] : named_params()) {
    os << "param " << name << " " << p.rank();
    for (std::size_t e : p.shape()) os << " " << e;
    os << " " << (p.requires_grad() ? 0 : 1) << "\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) os << " ";
      os << format_double(p.at(i));
    }
    os << "\n";
  }
  if (etf_) {
    os << "etf " << etf_->K << " " << etf_->d << " " << format_double(etf_->E_W)
       << " " << etf_->seed << "\n";
    for (std::size_t r = 0; r < etf_->d; ++r) {
      for (std::size_t k = 0; k < etf_->K; ++k) {
        if (k) os << " ";
        os << format_double(etf_->W.at2(r, k));
      }
      os << "\n";
    }
    os << "etf_classes";
    for (const auto& [id, col] : etf_->class_map) os << " " << id << ":" << col;
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

ModelState ModelState::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "cilmodel v1") {
    throw ParseError("checkpoint: bad magic line '" + line + "'");
  }

  ModelState m;
  std::string word;
  is >> word;
  if (word != "seed") throw ParseError("checkpoint: expected seed");
  is >> m.seed_;

  is >> word;
  if (word != "config") throw ParseError("checkpoint: expected config");
  std::string wiring_s, head_s;
  int use_adapt = 0;
  is >> m.cfg_.input_dim >> m.cfg_.width >> m.cfg_.head_dim >> wiring_s >>
      head_s >> use_adapt >> m.cfg_.adapt_hidden;
  m.cfg_.wiring = wiring_from_string(wiring_s);
  m.cfg_.head = head_from_string(head_s);
  m.cfg_.use_adapt = use_adapt != 0;

  is >> word;
  if (word != "expands") throw ParseError("checkpoint: expected expands");
  std::size_t n_expands = 0;
  is >> n_expands;
  std::vector<std::size_t> in_widths(n_expands);
  for (auto& w : in_widths) is >> w;

  // rebuild the skeleton; every value is overwritten below
  Rng rng(derive_seed(m.seed_, 0x0D));
  m.base_.emplace_back(m.cfg_.input_dim, m.cfg_.width, rng);
  m.base_.emplace_back(m.cfg_.width, m.cfg_.width, rng);
  m.base_.emplace_back(m.cfg_.width, m.cfg_.width, rng);
  for (std::size_t i = 0; i < n_expands; ++i)
    m.expands_.emplace_back(in_widths[i], m.cfg_.width, rng);
  if (m.cfg_.use_adapt) {
    m.adapt1_ = Affine(m.cfg_.width, m.cfg_.adapt_hidden, rng);
    m.adapt2_ = Affine(m.cfg_.adapt_hidden, m.cfg_.head_dim, rng);
  }

  is >> word;
  if (m.cfg_.head == HeadKind::fc) {
    if (word != "fc_classes") throw ParseError("checkpoint: expected fc_classes");
    std::string rest;
    std::getline(is, rest);
    std::istringstream cs(rest);
    std::string pairtok;
    std::map<int, std::size_t> cmap;
    std::size_t max_col = 0;
    while (cs >> pairtok) {
      auto colon = pairtok.find(':');
      if (colon == std::string::npos)
        throw ParseError("checkpoint: bad class pair " + pairtok);
      int id = std::stoi(pairtok.substr(0, colon));
      std::size_t col = std::stoul(pairtok.substr(colon + 1));
      cmap[id] = col;
      max_col = std::max(max_col, col);
    }
    if (!cmap.empty()) {
      const std::size_t in_dim =
          m.cfg_.use_adapt ? m.cfg_.head_dim : m.cfg_.width;
      m.fc_.layer = Affine(in_dim, max_col + 1, rng);
      m.fc_.class_map = std::move(cmap);
    }
    is >> word;
  }

  auto find_param = [&m](const std::string& name) -> Tensor {
    for (auto& [n, p] : m.named_params())
      if (n == name) return p;
    throw ParseError("checkpoint: unknown parameter '" + name + "'");
  };

  while (word == "param") {
    std::string name;
    std::size_t rank = 0;
    is >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) is >> e;
    int frozen = 0;
    is >> frozen;
    Tensor p = find_param(name);
    if (p.shape() != shape) {
      throw ParseError("checkpoint: shape mismatch for '" + name + "'");
    }
    std::string tok;
    for (std::size_t i = 0; i < p.size(); ++i) {
      is >> tok;
      p.at(i) = parse_double(tok);
    }
    p.set_requires_grad(frozen == 0);
    is >> word;
  }

  if (word == "etf") {
    EtfClassifier c;
    is >> c.K >> c.d >> c.E_W >> c.seed;
    c.W = Tensor::zeros({c.d, c.K});
    std::string tok;
    for (std::size_t r = 0; r < c.d; ++r)
      for (std::size_t k = 0; k < c.K; ++k) {
        is >> tok;
        c.W.at2(r, k) = parse_double(tok);
      }
    is >> word;
    if (word != "etf_classes") throw ParseError("checkpoint: expected etf_classes");
    std::string rest;
    std::getline(is, rest);
    std::istringstream cs(rest);
    std::string pairtok;
    while (cs >> pairtok) {
      auto colon = pairtok.find(':');
      if (colon == std::string::npos)
        throw ParseError("checkpoint: bad class pair " + pairtok);
      c.class_map[std::stoi(pairtok.substr(0, colon))] =
          std::stoul(pairtok.substr(colon + 1));
    }
    m.set_etf(std::move(c));
    is >> word;
  }

  if (word != "end") throw ParseError("checkpoint: missing end marker");
  return m;
}

void ModelState::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ParseError("checkpoint: cannot open " + path + " for writing");
  f << serialize();
}

ModelState ModelState::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("checkpoint: cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return deserialize(os.str());
}

}  // namespace cil
