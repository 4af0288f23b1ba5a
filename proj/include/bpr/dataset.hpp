#ifndef BPR_DATASET_HPP
#define BPR_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bpr/binary_io.hpp"
#include "bpr/core.hpp"

namespace bpr {

struct Transition {
  std::vector<float> s;
  std::vector<float> a;
  float r = 0.0f;
  std::vector<float> s_next;
  std::vector<float> a_next;  // zero vector on terminal rows
  bool done = false;

  bool operator==(const Transition&) const = default;
};

/// A sampled minibatch, one transition per column.
template <class T>
struct Batch {
  Mat<T> s;
  Mat<T> a;
  Vec<T> r;
  Mat<T> s_next;
  Mat<T> a_next;
  Vec<T> done;  // 0 or 1
  std::vector<std::size_t> index;

  Eigen::Index size() const { return s.cols(); }
};

struct DatasetHeader {
  std::uint32_t state_dim = 0;
  std::uint32_t action_dim = 0;
  float reward_scale = 1.0f;
  std::string env_tag;

  bool operator==(const DatasetHeader&) const = default;
};

/// Static transition store. States are kept in whatever space they were
/// generated in; normalize_states() rewrites them and records the stats so
/// raw environment observations can be mapped the same way.
class OfflineDataset {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr float kStdFloor = 1e-6f;

  OfflineDataset() = default;
  OfflineDataset(std::uint32_t state_dim, std::uint32_t action_dim, std::string env_tag) {
    header_.state_dim = state_dim;
    header_.action_dim = action_dim;
    header_.env_tag = std::move(env_tag);
    state_mean_ = std::vector<float>(state_dim, 0.0f);
    state_std_ = std::vector<float>(state_dim, 1.0f);
  }

  const DatasetHeader& header() const { return header_; }
  std::size_t count() const { return rewards_.size(); }
  bool empty() const { return rewards_.empty(); }
  int state_dim() const { return static_cast<int>(header_.state_dim); }
  int action_dim() const { return static_cast<int>(header_.action_dim); }
  const std::vector<float>& state_mean() const { return state_mean_; }
  const std::vector<float>& state_std() const { return state_std_; }

  void append(const Transition& t) {
    if (t.s.size() != header_.state_dim || t.s_next.size() != header_.state_dim) {
      throw ShapeError("dataset append: state has wrong dimension");
    }
    if (t.a.size() != header_.action_dim || t.a_next.size() != header_.action_dim) {
      throw ShapeError("dataset append: action has wrong dimension");
    }
    if (!std::isfinite(t.r)) throw DatasetError("dataset append: non-finite reward");
    states_.insert(states_.end(), t.s.begin(), t.s.end());
    actions_.insert(actions_.end(), t.a.begin(), t.a.end());
    rewards_.push_back(t.r);
    next_states_.insert(next_states_.end(), t.s_next.begin(), t.s_next.end());
    next_actions_.insert(next_actions_.end(), t.a_next.begin(), t.a_next.end());
    dones_.push_back(t.done ? 1.0f : 0.0f);
  }

  Transition at(std::size_t i) const {
    const std::size_t sd = header_.state_dim, ad = header_.action_dim;
    Transition t;
    t.s.assign(states_.begin() + i * sd, states_.begin() + (i + 1) * sd);
    t.a.assign(actions_.begin() + i * ad, actions_.begin() + (i + 1) * ad);
    t.r = rewards_[i];
    t.s_next.assign(next_states_.begin() + i * sd, next_states_.begin() + (i + 1) * sd);
    t.a_next.assign(next_actions_.begin() + i * ad, next_actions_.begin() + (i + 1) * ad);
    t.done = dones_[i] != 0.0f;
    return t;
  }

  /// Uniform with replacement.
  template <class T>
  Batch<T> sample_batch(std::size_t size, Rng& rng) const {
    if (empty()) throw DatasetError("sample_batch: dataset is empty");
    if (size < 1) throw DatasetError("sample_batch: batch size must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, count() - 1);
    std::vector<std::size_t> idx(size);
    for (auto& i : idx) i = pick(rng);
    return gather<T>(idx);
  }

  template <class T>
  Batch<T> gather(const std::vector<std::size_t>& idx) const {
    const int sd = state_dim(), ad = action_dim();
    const auto n = static_cast<Eigen::Index>(idx.size());
    Batch<T> b;
    b.s.resize(sd, n);
    b.a.resize(ad, n);
    b.r.resize(n);
    b.s_next.resize(sd, n);
    b.a_next.resize(ad, n);
    b.done.resize(n);
    b.index = idx;
    for (Eigen::Index c = 0; c < n; ++c) {
      const std::size_t i = idx[c];
      if (i >= count()) throw DatasetError("gather: index out of range");
      for (int d = 0; d < sd; ++d) {
        b.s(d, c) = static_cast<T>(states_[i * sd + d]);
        b.s_next(d, c) = static_cast<T>(next_states_[i * sd + d]);
      }
      for (int d = 0; d < ad; ++d) {
        b.a(d, c) = static_cast<T>(actions_[i * ad + d]);
        b.a_next(d, c) = static_cast<T>(next_actions_[i * ad + d]);
      }
      b.r[c] = static_cast<T>(rewards_[i]);
      b.done[c] = static_cast<T>(dones_[i]);
    }
    return b;
  }

  template <class T>
  Batch<T> all() const {
    std::vector<std::size_t> idx(count());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return gather<T>(idx);
  }

  /// Standardizes s and s_next column-wise with max(std, 1e-6). Stats compose
  /// with any earlier normalization so they always map raw states.
  void normalize_states() {
    if (count() < 2) throw DatasetError("normalize_states: need at least two transitions");
    const std::size_t sd = header_.state_dim;
    for (std::size_t d = 0; d < sd; ++d) {
      double sum = 0.0;
      for (std::size_t i = 0; i < count(); ++i) sum += states_[i * sd + d];
      const double mean = sum / static_cast<double>(count());
      double sq = 0.0;
      for (std::size_t i = 0; i < count(); ++i) {
        const double c = states_[i * sd + d] - mean;
        sq += c * c;
      }
      const double std = std::max(std::sqrt(sq / static_cast<double>(count())), double(kStdFloor));
      for (std::size_t i = 0; i < count(); ++i) {
        states_[i * sd + d] = static_cast<float>((states_[i * sd + d] - mean) / std);
        next_states_[i * sd + d] = static_cast<float>((next_states_[i * sd + d] - mean) / std);
      }
      state_mean_[d] = static_cast<float>(state_mean_[d] + state_std_[d] * mean);
      state_std_[d] = static_cast<float>(state_std_[d] * std);
    }
  }

  /// Maps a raw environment observation into the dataset's state space.
  template <class T>
  Vec<T> normalize_observation(const Vec<T>& raw) const {
    Vec<T> out(raw.size());
    for (Eigen::Index d = 0; d < raw.size(); ++d) {
      out[d] = (raw[d] - T(state_mean_[d])) / std::max(T(state_std_[d]), T(kStdFloor));
    }
    return out;
  }

  void scale_rewards(float factor) {
    if (!(factor > 0.0f)) throw ConfigError("scale_rewards: factor must be positive");
    for (float& r : rewards_) r *= factor;
    header_.reward_scale *= factor;
  }

  // File layout (little-endian): "BPRD", version u32, state_dim u32,
  // action_dim u32, count u64, reward_scale f32, env_tag (u8 len + UTF-8),
  // then per record float32 s, a, r, s_next, a_next, done; then state mean
  // and state std as float32 vectors.
  void save(const std::string& path) const {
    io::Writer w;
    w.magic("BPRD");
    w.u32(kVersion);
    w.u32(header_.state_dim);
    w.u32(header_.action_dim);
    w.u64(count());
    w.f32(header_.reward_scale);
    w.short_string(header_.env_tag);
    const std::size_t sd = header_.state_dim, ad = header_.action_dim;
    for (std::size_t i = 0; i < count(); ++i) {
      w.bytes(&states_[i * sd], sd * 4);
      w.bytes(&actions_[i * ad], ad * 4);
      w.f32(rewards_[i]);
      w.bytes(&next_states_[i * sd], sd * 4);
      w.bytes(&next_actions_[i * ad], ad * 4);
      w.f32(dones_[i]);
    }
    w.bytes(state_mean_.data(), sd * 4);
    w.bytes(state_std_.data(), sd * 4);
    w.save(path);
  }

  static OfflineDataset load(const std::string& path) { return read(io::Reader::from_file(path)); }

  static OfflineDataset read(io::Reader r) {
    r.expect_magic("BPRD");
    const std::size_t version_at = r.offset();
    const auto version = r.u32();
    if (version != kVersion) {
      throw FormatError(r.source() + ": unsupported dataset version " + std::to_string(version) +
                        " at byte offset " + std::to_string(version_at) + " (supported: " +
                        std::to_string(kVersion) + ")");
    }
    const auto sd = r.u32();
    const auto ad = r.u32();
    const auto n = r.u64();
    const float scale = r.f32();
    std::string tag = r.short_string();
    const std::size_t record = (2 * std::size_t(sd) + 2 * std::size_t(ad) + 2) * 4;
    const std::size_t expected = r.offset() + n * record + 2 * std::size_t(sd) * 4;
    if (expected != r.size()) {
      throw FormatError(r.source() + ": length mismatch after header at byte offset " + std::to_string(r.offset()) +
                        ": expected " + std::to_string(expected) + " bytes for " + std::to_string(n) +
                        " records, file has " + std::to_string(r.size()));
    }
    OfflineDataset ds(sd, ad, std::move(tag));
    ds.header_.reward_scale = scale;
    ds.states_.resize(n * sd);
    ds.actions_.resize(n * ad);
    ds.rewards_.resize(n);
    ds.next_states_.resize(n * sd);
    ds.next_actions_.resize(n * ad);
    ds.dones_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r.bytes(&ds.states_[i * sd], sd * 4);
      r.bytes(&ds.actions_[i * ad], ad * 4);
      ds.rewards_[i] = r.f32();
      r.bytes(&ds.next_states_[i * sd], sd * 4);
      r.bytes(&ds.next_actions_[i * ad], ad * 4);
      ds.dones_[i] = r.f32();
    }
    r.bytes(ds.state_mean_.data(), sd * 4);
    r.bytes(ds.state_std_.data(), sd * 4);
    return ds;
  }

  bool operator==(const OfflineDataset&) const = default;

 private:
  DatasetHeader header_;
  std::vector<float> states_;
  std::vector<float> actions_;
  std::vector<float> rewards_;
  std::vector<float> next_states_;
  std::vector<float> next_actions_;
  std::vector<float> dones_;
  std::vector<float> state_mean_;
  std::vector<float> state_std_;
};

}  // namespace bpr

#endif  // BPR_DATASET_HPP
