#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fairbpr/dataset.hpp"
#include "fairbpr/rng.hpp"
#include "fairbpr/sampling.hpp"

namespace fairbpr {

// BPR-MF parameters: one latent vector per user and per item, no biases.
// Rows follow the order of the identifier lists passed at construction.
class FactorModel {
 public:
  FactorModel() = default;
  FactorModel(std::vector<std::string> users, std::vector<std::string> items, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  const std::vector<std::string>& users() const { return users_; }
  const std::vector<std::string>& items() const { return items_; }

  std::uint32_t user_row(std::string_view id) const;  // throws LookupError
  std::uint32_t item_row(std::string_view id) const;  // throws LookupError
  std::optional<std::uint32_t> find_user(std::string_view id) const;

  std::span<double> user_vector(std::uint32_t row) {
    return {user_factors_.data() + row * dim_, dim_};
  }
  std::span<const double> user_vector(std::uint32_t row) const {
    return {user_factors_.data() + row * dim_, dim_};
  }
  std::span<double> item_vector(std::uint32_t row) {
    return {item_factors_.data() + row * dim_, dim_};
  }
  std::span<const double> item_vector(std::uint32_t row) const {
    return {item_factors_.data() + row * dim_, dim_};
  }

  std::vector<double>& user_factors() { return user_factors_; }
  const std::vector<double>& user_factors() const { return user_factors_; }
  std::vector<double>& item_factors() { return item_factors_; }
  const std::vector<double>& item_factors() const { return item_factors_; }

  bool all_finite() const;
  bool operator==(const FactorModel& other) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::uint32_t> user_rows_;
  std::unordered_map<std::string, std::uint32_t> item_rows_;
  std::vector<double> user_factors_;  // row-major, num_users x dim
  std::vector<double> item_factors_;  // row-major, num_items x dim
};

struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.001;
  double l2_reg = 0.0;
  std::size_t dim = 10;
  std::uint64_t seed = 0;
  SamplerConfig sampler;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

// Every entry i.i.d. uniform on [0, 1): users first, then items.
FactorModel init_model(std::vector<std::string> users, std::vector<std::string> items,
                       std::size_t dim, Rng& rng);
FactorModel init_model(std::size_t n_users, std::size_t n_items, const TrainConfig& config,
                       Rng& rng);

double dot(std::span<const double> a, std::span<const double> b);
double score(const FactorModel& model, std::string_view user, std::string_view item);
inline double score(const FactorModel& model, std::uint32_t user, std::uint32_t item) {
  return dot(model.user_vector(user), model.item_vector(item));
}

// -ln(sigmoid(x)), stable for large |x|.
double bpr_loss(double x);

// One SGD step on -ln sigmoid(x_ui - x_uj) + l2/2 * (|u|^2 + |i|^2 + |j|^2),
// simultaneous update from the pre-step vectors. Returns the pre-step loss.
double bpr_step(FactorModel& model, const Triplet& triplet, double lr, double l2);

struct TrainResult {
  FactorModel model;
  std::vector<double> epoch_loss;  // mean pre-step loss per epoch
  CompositionAudit audit;          // over every triplet used
};

// Model rows follow the TrainIndex built from split.train.
TrainResult train(const DatasetSplit& split, const Catalog& catalog, const TrainConfig& config);
TrainResult train(const TrainIndex& index, const Catalog& catalog, const TrainConfig& config);

struct TopK {
  std::vector<std::uint32_t> items;  // item rows, best first
  bool short_list = false;           // fewer than k candidates existed
};

// Highest-scoring items not in `exclude` (sorted item rows). Ties go to the
// lower item row, i.e. the smaller identifier.
TopK recommend_top_k(const FactorModel& model, std::uint32_t user, std::size_t k,
                     std::span<const std::uint32_t> exclude);

// Text checkpoint: header, dimension, identifier maps and both matrices as
// hex floats, so save -> load is exact.
void save_checkpoint(const std::filesystem::path& path, const FactorModel& model,
                     const nlohmann::json& config = nlohmann::json::object());
FactorModel load_checkpoint(const std::filesystem::path& path,
                            nlohmann::json* config = nullptr);

}  // namespace fairbpr
