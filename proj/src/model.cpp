#include "fairbpr/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fairbpr/errors.hpp"

namespace fairbpr {
namespace {

constexpr std::string_view kCheckpointMagic = "fairbpr-checkpoint";
constexpr int kCheckpointVersion = 1;

std::unordered_map<std::string, std::uint32_t> make_rows(const std::vector<std::string>& ids,
                                                         const char* what) {
  std::unordered_map<std::string, std::uint32_t> rows;
  for (std::uint32_t r = 0; r < ids.size(); ++r) {
    if (!rows.emplace(ids[r], r).second) {
      throw DomainError(std::string("duplicate ") + what + " identifier '" + ids[r] + "'");
    }
  }
  return rows;
}

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::string> numbered_ids(std::size_t n) {
  // Zero-padded so that lexicographic order equals numeric order.
  const auto width = std::to_string(n == 0 ? 0 : n - 1).size();
  std::vector<std::string> ids(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto s = std::to_string(r);
    ids[r] = std::string(width - s.size(), '0') + s;
  }
  return ids;
}

void write_rows(std::ostream& out, const std::vector<std::string>& ids,
                const std::vector<double>& factors, std::size_t dim) {
  char buf[64];
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r].find_first_of("\t\n\r") != std::string::npos) {
      throw IoError("identifier '" + ids[r] + "' cannot be stored in a checkpoint");
    }
    out << ids[r];
    for (std::size_t f = 0; f < dim; ++f) {
      const auto [end, ec] =
          std::to_chars(buf, buf + sizeof(buf), factors[r * dim + f], std::chars_format::hex);
      out << '\t' << std::string_view(buf, end - buf);
    }
    out << '\n';
  }
}

class CheckpointReader {
 public:
  CheckpointReader(std::istream& in, std::string file) : in_(in), file_(std::move(file)) {}

  std::string line() {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of file");
    ++line_no_;
    return text;
  }

  // Reads "<key> <value>".
  std::string field(std::string_view key) {
    const auto text = line();
    if (text.size() <= key.size() || text.compare(0, key.size(), key) != 0 ||
        text[key.size()] != ' ') {
      fail("expected '" + std::string(key) + "'");
    }
    return text.substr(key.size() + 1);
  }

  std::size_t count(std::string_view key) {
    const auto text = field(key);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("bad count");
    return value;
  }

  void rows(std::size_t n, std::size_t dim, std::vector<std::string>& ids,
            std::vector<double>& factors) {
    ids.reserve(n);
    factors.reserve(n * dim);
    for (std::size_t r = 0; r < n; ++r) {
      const auto text = line();
      std::string_view rest(text);
      auto tab = rest.find('\t');
      ids.emplace_back(rest.substr(0, tab));
      for (std::size_t f = 0; f < dim; ++f) {
        if (tab == std::string_view::npos) fail("too few factors");
        rest.remove_prefix(tab + 1);
        tab = rest.find('\t');
        const auto token = rest.substr(0, tab);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value,
                                               std::chars_format::hex);
        if (ec != std::errc() || ptr != token.data() + token.size()) fail("bad factor value");
        factors.push_back(value);
      }
      if (tab != std::string_view::npos) fail("too many factors");
    }
  }

  [[noreturn]] void fail(const std::string& what) {
    throw IoError(file_ + ":" + std::to_string(line_no_ + 1) + ": corrupt checkpoint: " + what);
  }

 private:
  std::istream& in_;
  std::string file_;
  std::size_t line_no_ = 0;
};

}  // namespace

FactorModel::FactorModel(std::vector<std::string> users, std::vector<std::string> items,
                         std::size_t dim)
    : dim_(dim), users_(std::move(users)), items_(std::move(items)) {
  if (dim_ == 0) throw DomainError("latent dimension must be >= 1");
  if (users_.empty() || items_.empty()) throw DomainError("model needs >= 1 user and item");
  user_rows_ = make_rows(users_, "user");
  item_rows_ = make_rows(items_, "item");
  user_factors_.assign(users_.size() * dim_, 0.0);
  item_factors_.assign(items_.size() * dim_, 0.0);
}

std::uint32_t FactorModel::user_row(std::string_view id) const {
  const auto it = user_rows_.find(std::string(id));
  if (it == user_rows_.end()) throw LookupError("unknown user '" + std::string(id) + "'");
  return it->second;
}

std::uint32_t FactorModel::item_row(std::string_view id) const {
  const auto it = item_rows_.find(std::string(id));
  if (it == item_rows_.end()) throw LookupError("unknown item '" + std::string(id) + "'");
  return it->second;
}

std::optional<std::uint32_t> FactorModel::find_user(std::string_view id) const {
  const auto it = user_rows_.find(std::string(id));
  if (it == user_rows_.end()) return std::nullopt;
  return it->second;
}

bool FactorModel::all_finite() const { return finite(user_factors_) && finite(item_factors_); }

bool FactorModel::operator==(const FactorModel& other) const {
  return dim_ == other.dim_ && users_ == other.users_ && items_ == other.items_ &&
         user_factors_ == other.user_factors_ && item_factors_ == other.item_factors_;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (!(l2_reg >= 0.0) || !std::isfinite(l2_reg)) throw ConfigError("l2 must be >= 0");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  sampler.validate();
}

nlohmann::json to_json(const TrainConfig& config) {
  return {
      {"epochs", config.epochs},   {"learning_rate", config.learning_rate},
      {"l2", config.l2_reg},       {"dim", config.dim},
      {"seed", config.seed},       {"sampler", to_json(config.sampler)},
  };
}

FactorModel init_model(std::vector<std::string> users, std::vector<std::string> items,
                       std::size_t dim, Rng& rng) {
  FactorModel model(std::move(users), std::move(items), dim);
  for (auto& x : model.user_factors()) x = rng.uniform01();
  for (auto& x : model.item_factors()) x = rng.uniform01();
  return model;
}

FactorModel init_model(std::size_t n_users, std::size_t n_items, const TrainConfig& config,
                       Rng& rng) {
  if (n_users == 0 || n_items == 0) throw DomainError("init_model: zero users or items");
  return init_model(numbered_ids(n_users), numbered_ids(n_items), config.dim, rng);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) sum += a[f] * b[f];
  return sum;
}

double score(const FactorModel& model, std::string_view user, std::string_view item) {
  return score(model, model.user_row(user), model.item_row(item));
}

double bpr_loss(double x) {
  // softplus(-x)
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double bpr_step(FactorModel& model, const Triplet& t, double lr, double l2) {
  auto u = model.user_vector(t.user);
  auto i = model.item_vector(t.positive);
  auto j = model.item_vector(t.negative);
  const double x = dot(u, i) - dot(u, j);
  // d/dx ln sigmoid(x) = sigmoid(-x)
  const double g = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
  const double loss = bpr_loss(x);
  for (std::size_t f = 0; f < model.dim(); ++f) {
    const double uf = u[f];
    const double if_ = i[f];
    const double jf = j[f];
    u[f] += lr * (g * (if_ - jf) - l2 * uf);
    i[f] += lr * (g * uf - l2 * if_);
    j[f] += lr * (-g * uf - l2 * jf);
  }
  if (!std::isfinite(x) || !finite(u) || !finite(i) || !finite(j)) {
    throw TrainingError("non-finite factors after step on triplet (user '" +
                        model.users()[t.user] + "', pos '" + model.items()[t.positive] +
                        "', neg '" + model.items()[t.negative] + "')");
  }
  return loss;
}

TrainResult train(const TrainIndex& index, const Catalog& catalog, const TrainConfig& config) {
  config.validate();
  if (index.num_interactions() == 0) throw TrainingError("empty train split");
  Rng init_rng(derive_seed(config.seed, 0));
  TrainResult result{init_model(index.users(), index.items(), config.dim, init_rng), {}, {}};

  TripletSampler sampler(index, catalog, config.sampler);
  const auto n = config.sampler.resolved_triplets(index);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto triplets = sampler.next_epoch(n);
    double total = 0.0;
    for (const auto& t : triplets) {
      total += bpr_step(result.model, t, config.learning_rate, config.l2_reg);
      result.audit.add(t, index, catalog);
    }
    result.epoch_loss.push_back(triplets.empty() ? 0.0
                                                 : total / static_cast<double>(triplets.size()));
  }
  return result;
}

TrainResult train(const DatasetSplit& split, const Catalog& catalog, const TrainConfig& config) {
  const TrainIndex index(split.train);
  return train(index, catalog, config);
}

TopK recommend_top_k(const FactorModel& model, std::uint32_t user, std::size_t k,
                     std::span<const std::uint32_t> exclude) {
  if (k == 0) throw DomainError("k must be >= 1");
  if (user >= model.num_users()) throw LookupError("user row out of range");
  const auto u = model.user_vector(user);

  std::vector<std::pair<double, std::uint32_t>> candidates;
  candidates.reserve(model.num_items());
  auto excluded = exclude.begin();
  for (std::uint32_t item = 0; item < model.num_items(); ++item) {
    while (excluded != exclude.end() && *excluded < item) ++excluded;
    if (excluded != exclude.end() && *excluded == item) continue;
    candidates.emplace_back(dot(u, model.item_vector(item)), item);
  }
  const auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  TopK out;
  out.short_list = candidates.size() < k;
  const auto take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  out.items.reserve(take);
  for (std::size_t r = 0; r < take; ++r) out.items.push_back(candidates[r].second);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const FactorModel& model,
                     const nlohmann::json& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config " << config.dump() << '\n';
  out << "dim " << model.dim() << '\n';
  out << "users " << model.num_users() << '\n';
  write_rows(out, model.users(), model.user_factors(), model.dim());
  out << "items " << model.num_items() << '\n';
  write_rows(out, model.items(), model.item_factors(), model.dim());
  out << "end\n";
  if (!out) throw IoError("write failure on " + path.string());
}

FactorModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CheckpointReader reader(in, path.string());

  const auto version = reader.field(kCheckpointMagic);
  if (version != std::to_string(kCheckpointVersion)) {
    reader.fail("unsupported version '" + version + "'");
  }
  const auto config_text = reader.field("config");
  auto parsed = nlohmann::json::parse(config_text, nullptr, false);
  if (parsed.is_discarded()) reader.fail("bad config record");
  const auto dim = reader.count("dim");
  if (dim == 0) reader.fail("zero dimension");

  std::vector<std::string> users, items;
  std::vector<double> user_factors, item_factors;
  reader.rows(reader.count("users"), dim, users, user_factors);
  reader.rows(reader.count("items"), dim, items, item_factors);
  if (reader.line() != "end") reader.fail("missing end marker");

  FactorModel model;
  try {
    model = FactorModel(std::move(users), std::move(items), dim);
  } catch (const DomainError& e) {
    reader.fail(e.what());
  }
  model.user_factors() = std::move(user_factors);
  model.item_factors() = std::move(item_factors);
  if (!model.all_finite()) reader.fail("non-finite factor");
  if (config) *config = std::move(parsed);
  return model;
}

}  // namespace fairbpr
