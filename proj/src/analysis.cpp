// Copyright 2026 The STCCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stccl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "stccl/errors.hpp"
#include "stccl/rng.hpp"

namespace stccl {

namespace {

int histogram_bin(double value) {
  const int bin = static_cast<int>(std::floor((value + 1.0) / 2.0 * kHistogramBins));
  return std::clamp(bin, 0, kHistogramBins - 1);
}

}  // namespace

void CellStats::add_pos(double value) {
  ++n_pos;
  sum_pos += value;
  sumsq_pos += value * value;
  ++hist_pos[static_cast<std::size_t>(histogram_bin(value))];
}

void CellStats::add_neg(double value) {
  ++n_neg;
  sum_neg += value;
  sumsq_neg += value * value;
  ++hist_neg[static_cast<std::size_t>(histogram_bin(value))];
}

void CellStats::merge(const CellStats& other) {
  n_pos += other.n_pos;
  n_neg += other.n_neg;
  n_degenerate += other.n_degenerate;
  sum_pos += other.sum_pos;
  sum_neg += other.sum_neg;
  sumsq_pos += other.sumsq_pos;
  sumsq_neg += other.sumsq_neg;
  for (int i = 0; i < kHistogramBins; ++i) {
    hist_pos[static_cast<std::size_t>(i)] += other.hist_pos[static_cast<std::size_t>(i)];
    hist_neg[static_cast<std::size_t>(i)] += other.hist_neg[static_cast<std::size_t>(i)];
  }
}

double CellStats::std_pos() const {
  if (n_pos < 2) return 0.0;
  const double m = mean_pos();
  return std::sqrt(std::max(0.0, sumsq_pos / n_pos - m * m));
}

double CellStats::std_neg() const {
  if (n_neg < 2) return 0.0;
  const double m = mean_neg();
  return std::sqrt(std::max(0.0, sumsq_neg / n_neg - m * m));
}

CellStats& SimilarityStats::cell(Domain domain, int level) {
  return cells[domain == Domain::kSpatial ? 0 : 1][static_cast<std::size_t>(level - 1)];
}

const CellStats& SimilarityStats::cell(Domain domain, int level) const {
  return cells[domain == Domain::kSpatial ? 0 : 1][static_cast<std::size_t>(level - 1)];
}

void SimilarityStats::validate() const {
  for (const auto& domain : cells) {
    for (const CellStats& c : domain) {
      if (c.n_pos <= 0 || c.n_neg <= 0) throw ArgumentError("similarity cell has no samples");
      if (std::fabs(c.mean_pos()) > 1.0 + 1e-9 || std::fabs(c.mean_neg()) > 1.0 + 1e-9) {
        throw NumericError("similarity mean escaped [-1,1]");
      }
      long long mass_pos = 0, mass_neg = 0;
      for (int i = 0; i < kHistogramBins; ++i) {
        mass_pos += c.hist_pos[static_cast<std::size_t>(i)];
        mass_neg += c.hist_neg[static_cast<std::size_t>(i)];
      }
      if (mass_pos != c.n_pos || mass_neg != c.n_neg) {
        throw NumericError("histogram mass does not match counts");
      }
    }
  }
}

namespace {

struct PhiAccumulator {
  SimilarityStats* stats;
  bool use_projection;
  const MetricModel* model;
  int budget;
  double degenerate_rms;

  bool effectively_zero(const Tensor& raw) const {
    double sq = 0.0;
    for (std::int64_t i = 0; i < raw.numel(); ++i) sq += raw[i] * raw[i];
    return std::sqrt(sq / static_cast<double>(raw.numel())) < degenerate_rms;
  }

  bool cell_full(Domain domain, int level) const {
    return stats->cell(domain, level).n_pos >= budget;
  }

  // Applies the trained projection when requested, then records phi of the
  // pair plus its negatives.
  void add(Domain domain, int level, const CorrelationDescriptor& dx,
           const CorrelationDescriptor& dy, const std::vector<CorrelationDescriptor>& dy_negs) {
    CellStats& cell = stats->cell(domain, level);
    if (cell.n_pos >= budget) return;
    if (effectively_zero(dx.values.value()) || effectively_zero(dy.values.value())) {
      ++cell.n_degenerate;
      return;
    }

    Tensor ax, py;
    std::vector<Tensor> negs;
    if (use_projection) {
      const HeadVars& head = model->head(domain, level);
      const bool normalize = model->checkpoint().contrastive.normalize_embeddings;
      ax = project(head, dx.values, normalize).value();
      py = project(head, dy.values, normalize).value();
      negs.reserve(dy_negs.size());
      for (const auto& d : dy_negs) negs.push_back(project(head, d.values, normalize).value());
    } else {
      ax = dx.values.value();
      py = dy.values.value();
      negs.reserve(dy_negs.size());
      for (const auto& d : dy_negs) negs.push_back(d.values.value());
    }

    bool degenerate = false;
    const double pos = cosine_similarity(ax, py, &degenerate);
    if (degenerate) {
      ++cell.n_degenerate;
    } else {
      cell.add_pos(pos);
    }
    for (const Tensor& n : negs) {
      bool neg_degenerate = false;
      const double v = cosine_similarity(ax, n, &neg_degenerate);
      if (neg_degenerate) {
        ++cell.n_degenerate;
      } else {
        cell.add_neg(v);
      }
    }
  }
};

}  // namespace

SimilarityStats similarity_stats(const PairedDataset& data, const MetricCheckpoint& checkpoint,
                                 bool use_projection, const AnalysisConfig& config) {
  if (config.sample_budget < 1) throw ArgumentError("similarity_stats: budget must be >= 1");
  if (data.empty()) throw ArgumentError("similarity_stats: empty dataset");
  const int window = config.temporal_window;
  if (window < 4) throw ArgumentError("similarity_stats: temporal window must be >= 4");

  MetricModel model(checkpoint, /*trainable=*/false);
  SimilarityStats stats;
  stats.mechanism = checkpoint.mechanism;
  stats.trained = use_projection;

  const int n_pairs = static_cast<int>(data.size());
  const int spatial_yield = config.n_anchors * 8;
  const int temporal_yield = config.temporal_locations * 2;
  const int draws = std::max(
      (config.sample_budget + n_pairs * spatial_yield - 1) / (n_pairs * spatial_yield),
      (config.sample_budget + n_pairs * temporal_yield - 1) / (n_pairs * temporal_yield));

  PhiAccumulator acc{&stats, use_projection, &model, config.sample_budget,
                     config.degenerate_rms};
  const CorrelationOptions& copts = checkpoint.correlation;

  for (int pair_idx = 0; pair_idx < n_pairs; ++pair_idx) {
    const AlignedSequencePair& pair = data[static_cast<std::size_t>(pair_idx)];
    if (pair.x_frames.size() != pair.y_frames.size() ||
        static_cast<int>(pair.x_frames.size()) < window) {
      throw ArgumentError("similarity_stats: pair shorter than the temporal window");
    }
    const int frame_count = static_cast<int>(pair.x_frames.size());

    std::vector<FeaturePyramid> px, py;
    px.reserve(pair.x_frames.size());
    py.reserve(pair.y_frames.size());
    for (std::size_t t = 0; t < pair.x_frames.size(); ++t) {
      px.push_back(model.extract(Var::constant(pair.x_frames[t])));
      py.push_back(model.extract(Var::constant(pair.y_frames[t])));
    }

    Rng rng(Rng::mix(config.seed, 0x616e6100ULL + static_cast<std::uint64_t>(pair_idx)));
    for (int draw = 0; draw < draws; ++draw) {
      const int frame = static_cast<int>(rng.uniform_int(frame_count));
      const int start = frame_count == window
                            ? 0
                            : static_cast<int>(rng.uniform_int(frame_count - window + 1));
      const std::uint64_t draw_seed = rng.next_u64();

      for (int level = 1; level <= px.front().level_count(); ++level) {
        // Spatial cell.
        if (!acc.cell_full(Domain::kSpatial, level)) {
          const FeatureMap& map = px[static_cast<std::size_t>(frame)].level(level);
          const auto samples = sample_spatial_pairs(
              map.height(), map.width(), config.n_anchors,
              Rng::mix(draw_seed, 0x7370ULL + static_cast<std::uint64_t>(level)), level);
          for (const SpatialPairSample& sample : samples) {
            std::vector<CorrelationDescriptor> negs;
            negs.reserve(sample.negatives.size());
            for (const RegionIndex& k : sample.negatives) {
              negs.push_back(correlate_spatial(checkpoint.mechanism,
                                               py[static_cast<std::size_t>(frame)], sample.anchor,
                                               k, copts));
            }
            for (const RegionIndex& j : sample.positives) {
              acc.add(Domain::kSpatial, level,
                      correlate_spatial(checkpoint.mechanism, px[static_cast<std::size_t>(frame)],
                                        sample.anchor, j, copts),
                      correlate_spatial(checkpoint.mechanism, py[static_cast<std::size_t>(frame)],
                                        sample.anchor, j, copts),
                      negs);
            }
          }
        }
        // Temporal cell, over the drawn window.
        if (!acc.cell_full(Domain::kTemporal, level)) {
          std::vector<FeaturePyramid> wx(px.begin() + start, px.begin() + start + window);
          std::vector<FeaturePyramid> wy(py.begin() + start, py.begin() + start + window);
          const FeatureMap& map = wx.front().level(level);
          Rng loc_rng(Rng::mix(draw_seed, 0x746cULL + static_cast<std::uint64_t>(level)));
          for (int loc = 0; loc < config.temporal_locations; ++loc) {
            const int row = static_cast<int>(loc_rng.uniform_int(map.height()));
            const int col = static_cast<int>(loc_rng.uniform_int(map.width()));
            const auto samples = sample_temporal_pairs(window, 1, loc_rng.next_u64());
            for (const TemporalPairSample& sample : samples) {
              auto t_index = [&](int f) { return TemporalIndex{f, level, row, col}; };
              std::vector<CorrelationDescriptor> negs;
              negs.reserve(sample.negatives.size());
              for (int k : sample.negatives) {
                negs.push_back(correlate_temporal(checkpoint.mechanism, wy,
                                                  t_index(sample.anchor), t_index(k), copts));
              }
              for (int j : sample.positives) {
                acc.add(Domain::kTemporal, level,
                        correlate_temporal(checkpoint.mechanism, wx, t_index(sample.anchor),
                                           t_index(j), copts),
                        correlate_temporal(checkpoint.mechanism, wy, t_index(sample.anchor),
                                           t_index(j), copts),
                        negs);
              }
            }
          }
        }
      }
    }
  }
  stats.validate();
  return stats;
}

namespace {

const char* domain_name(int d) { return d == 0 ? "spatial" : "temporal"; }

nlohmann::ordered_json cell_json(const CellStats& c) {
  nlohmann::ordered_json j;
  j["n_pos"] = c.n_pos;
  j["n_neg"] = c.n_neg;
  j["n_degenerate"] = c.n_degenerate;
  j["mean_pos"] = c.mean_pos();
  j["mean_neg"] = c.mean_neg();
  j["std_pos"] = c.std_pos();
  j["std_neg"] = c.std_neg();
  j["sum_pos"] = c.sum_pos;
  j["sum_neg"] = c.sum_neg;
  j["sumsq_pos"] = c.sumsq_pos;
  j["sumsq_neg"] = c.sumsq_neg;
  j["hist_pos"] = c.hist_pos;
  j["hist_neg"] = c.hist_neg;
  return j;
}

CellStats cell_from_json(const nlohmann::json& j) {
  CellStats c;
  c.n_pos = j.at("n_pos").get<long long>();
  c.n_neg = j.at("n_neg").get<long long>();
  c.n_degenerate = j.at("n_degenerate").get<long long>();
  c.sum_pos = j.at("sum_pos").get<double>();
  c.sum_neg = j.at("sum_neg").get<double>();
  c.sumsq_pos = j.at("sumsq_pos").get<double>();
  c.sumsq_neg = j.at("sumsq_neg").get<double>();
  c.hist_pos = j.at("hist_pos").get<std::array<long long, kHistogramBins>>();
  c.hist_neg = j.at("hist_neg").get<std::array<long long, kHistogramBins>>();
  return c;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join_hist(const std::array<T, kHistogramBins>& hist) {
  std::ostringstream os;
  for (int i = 0; i < kHistogramBins; ++i) {
    if (i) os << ";";
    os << hist[static_cast<std::size_t>(i)];
  }
  return os.str();
}

std::array<long long, kHistogramBins> parse_hist(const std::string& text) {
  std::array<long long, kHistogramBins> hist{};
  std::istringstream is(text);
  std::string token;
  int i = 0;
  while (std::getline(is, token, ';')) {
    if (i >= kHistogramBins) throw ArgumentError("histogram column too long");
    hist[static_cast<std::size_t>(i++)] = std::stoll(token);
  }
  if (i != kHistogramBins) throw ArgumentError("histogram column too short");
  return hist;
}

}  // namespace

std::string report_json(const std::vector<SimilarityStats>& stats) {
  if (stats.empty()) throw ArgumentError("report: empty stats list");
  nlohmann::ordered_json root;
  root["stats"] = nlohmann::ordered_json::array();
  for (const SimilarityStats& s : stats) {
    nlohmann::ordered_json entry;
    entry["mechanism"] = to_string(s.mechanism);
    entry["trained"] = s.trained;
    entry["cells"] = nlohmann::ordered_json::array();
    for (int d = 0; d < 2; ++d) {
      for (int level = 1; level <= 4; ++level) {
        nlohmann::ordered_json cell = cell_json(s.cells[static_cast<std::size_t>(d)]
                                                       [static_cast<std::size_t>(level - 1)]);
        cell["domain"] = domain_name(d);
        cell["level"] = level;
        entry["cells"].push_back(cell);
      }
    }
    root["stats"].push_back(entry);
  }
  return root.dump(2);
}

std::vector<SimilarityStats> parse_report_json(const std::string& text) {
  nlohmann::json root = nlohmann::json::parse(text);
  std::vector<SimilarityStats> out;
  for (const auto& entry : root.at("stats")) {
    SimilarityStats s;
    s.mechanism = entry.at("mechanism").get<std::string>() == "vd" ? Mechanism::kVisualDisparity
                                                                   : Mechanism::kCorrelationMatrix;
    s.trained = entry.at("trained").get<bool>();
    for (const auto& cell : entry.at("cells")) {
      const int d = cell.at("domain").get<std::string>() == "spatial" ? 0 : 1;
      const int level = cell.at("level").get<int>();
      s.cells[static_cast<std::size_t>(d)][static_cast<std::size_t>(level - 1)] =
          cell_from_json(cell);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string report_csv(const std::vector<SimilarityStats>& stats) {
  if (stats.empty()) throw ArgumentError("report: empty stats list");
  std::ostringstream os;
  os << "mechanism,trained,domain,level,n_pos,n_neg,n_degenerate,mean_pos,mean_neg,std_pos,"
        "std_neg,sum_pos,sum_neg,sumsq_pos,sumsq_neg,hist_pos,hist_neg\n";
  for (const SimilarityStats& s : stats) {
    for (int d = 0; d < 2; ++d) {
      for (int level = 1; level <= 4; ++level) {
        const CellStats& c =
            s.cells[static_cast<std::size_t>(d)][static_cast<std::size_t>(level - 1)];
        os << to_string(s.mechanism) << "," << (s.trained ? 1 : 0) << "," << domain_name(d) << ","
           << level << "," << c.n_pos << "," << c.n_neg << "," << c.n_degenerate << ","
           << format_double(c.mean_pos()) << "," << format_double(c.mean_neg()) << ","
           << format_double(c.std_pos()) << "," << format_double(c.std_neg()) << ","
           << format_double(c.sum_pos) << "," << format_double(c.sum_neg) << ","
           << format_double(c.sumsq_pos) << "," << format_double(c.sumsq_neg) << ","
           << join_hist(c.hist_pos) << "," << join_hist(c.hist_neg) << "\n";
      }
    }
  }
  return os.str();
}

std::vector<SimilarityStats> parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ArgumentError("empty csv report");
  std::vector<SimilarityStats> out;
  auto find_stats = [&out](Mechanism m, bool trained) -> SimilarityStats& {
    for (SimilarityStats& s : out) {
      if (s.mechanism == m && s.trained == trained) return s;
    }
    out.emplace_back();
    out.back().mechanism = m;
    out.back().trained = trained;
    return out.back();
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string token;
    while (std::getline(ls, token, ',')) cols.push_back(token);
    if (cols.size() != 17) throw ArgumentError("csv report row has wrong arity");
    const Mechanism m = cols[0] == "vd" ? Mechanism::kVisualDisparity : Mechanism::kCorrelationMatrix;
    SimilarityStats& s = find_stats(m, cols[1] == "1");
    const int d = cols[2] == "spatial" ? 0 : 1;
    const int level = std::stoi(cols[3]);
    CellStats& c = s.cells[static_cast<std::size_t>(d)][static_cast<std::size_t>(level - 1)];
    c.n_pos = std::stoll(cols[4]);
    c.n_neg = std::stoll(cols[5]);
    c.n_degenerate = std::stoll(cols[6]);
    c.sum_pos = std::stod(cols[11]);
    c.sum_neg = std::stod(cols[12]);
    c.sumsq_pos = std::stod(cols[13]);
    c.sumsq_neg = std::stod(cols[14]);
    c.hist_pos = parse_hist(cols[15]);
    c.hist_neg = parse_hist(cols[16]);
  }
  return out;
}

std::string histogram_dat(const std::vector<SimilarityStats>& stats) {
  std::ostringstream os;
  os << "# bin_center pos_count neg_count\n";
  for (const SimilarityStats& s : stats) {
    for (int d = 0; d < 2; ++d) {
      for (int level = 1; level <= 4; ++level) {
        const CellStats& c =
            s.cells[static_cast<std::size_t>(d)][static_cast<std::size_t>(level - 1)];
        os << "# mechanism=" << to_string(s.mechanism) << " trained=" << (s.trained ? 1 : 0)
           << " domain=" << domain_name(d) << " level=" << level << "\n";
        for (int b = 0; b < kHistogramBins; ++b) {
          const double center = -1.0 + (b + 0.5) * 2.0 / kHistogramBins;
          os << format_double(center) << " " << c.hist_pos[static_cast<std::size_t>(b)] << " "
             << c.hist_neg[static_cast<std::size_t>(b)] << "\n";
        }
        os << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace stccl
