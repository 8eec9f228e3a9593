#include "mtsvm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mtsvm/rng.hpp"

namespace mtsvm {

void MultiTaskDataset::validate() const {
  if (tasks.empty()) throw InvalidDataset("dataset has no tasks");
  const Eigen::Index d = tasks.front().features.cols();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    if (task.features.rows() == 0) {
      throw InvalidDataset("task " + task.name + " is empty");
    }
    if (task.features.cols() != d) {
      throw InvalidDataset("task " + task.name + " has feature dim " +
                           std::to_string(task.features.cols()) +
                           ", expected " + std::to_string(d));
    }
    if (task.labels.size() != task.features.rows()) {
      throw InvalidDataset("task " + task.name +
                           ": label count does not match row count");
    }
    for (Eigen::Index i = 0; i < task.labels.size(); ++i) {
      if (task.labels[i] != 1.0 && task.labels[i] != -1.0) {
        throw InvalidDataset("task " + task.name + ": label must be +/-1");
      }
    }
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double* out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [ptr, ec] = std::from_chars(b, e, *out);
  if (ec != std::errc()) return false;
  while (ptr < e && (*ptr == ' ' || *ptr == '\t')) ++ptr;
  return ptr == e;
}

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

MultiTaskDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::map<std::string, std::size_t> index;
  std::vector<std::string> order;
  std::vector<std::vector<std::vector<double>>> rows;  // per task
  std::vector<std::vector<double>> labels;             // per task
  std::size_t dim = 0;

  std::string line;
  std::size_t lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (fields.size() < 3) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected task_id,label,f1..fd");
    }
    double lab = 0.0;
    if (!saw_data && !parse_double(fields[1], &lab)) {
      // header row
      continue;
    }
    if (!parse_double(fields[1], &lab) || (lab != 1.0 && lab != -1.0)) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": label must be +1 or -1, got '" + fields[1] + "'");
    }
    std::vector<double> feat(fields.size() - 2);
    for (std::size_t j = 2; j < fields.size(); ++j) {
      if (!parse_double(fields[j], &feat[j - 2]) ||
          !std::isfinite(feat[j - 2])) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": bad feature value '" + fields[j] + "'");
      }
    }
    if (!saw_data) {
      dim = feat.size();
      saw_data = true;
    } else if (feat.size() != dim) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": row has " +
                       std::to_string(feat.size()) + " features, expected " +
                       std::to_string(dim));
    }
    auto [it, inserted] = index.try_emplace(fields[0], order.size());
    if (inserted) {
      order.push_back(fields[0]);
      rows.emplace_back();
      labels.emplace_back();
    }
    rows[it->second].push_back(std::move(feat));
    labels[it->second].push_back(lab);
  }
  if (!saw_data) throw ParseError(path + ": no data rows");

  MultiTaskDataset data;
  data.tasks.resize(order.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    auto& task = data.tasks[t];
    task.name = order[t];
    const Eigen::Index n = static_cast<Eigen::Index>(rows[t].size());
    task.features.resize(n, static_cast<Eigen::Index>(dim));
    task.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      task.labels[i] = labels[t][static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < dim; ++j) {
        task.features(i, static_cast<Eigen::Index>(j)) =
            rows[t][static_cast<std::size_t>(i)][j];
      }
    }
  }
  data.validate();
  return data;
}

void save_csv(const MultiTaskDataset& data, const std::string& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  const Eigen::Index d = data.feature_dim();
  out << "task_id,label";
  for (Eigen::Index j = 0; j < d; ++j) out << ",f" << (j + 1);
  out << "\n";
  for (const auto& task : data.tasks) {
    for (Eigen::Index i = 0; i < task.features.rows(); ++i) {
      out << task.name << "," << (task.labels[i] > 0 ? "1" : "-1");
      for (Eigen::Index j = 0; j < d; ++j) {
        out << "," << format_double(task.features(i, j));
      }
      out << "\n";
    }
  }
}

MultiTaskDataset one_vs_one_tasks(const Eigen::MatrixXd& features,
                                  const std::vector<int>& class_labels) {
  if (static_cast<Eigen::Index>(class_labels.size()) != features.rows()) {
    throw InvalidDataset("one_vs_one_tasks: label count != row count");
  }
  std::vector<int> classes(class_labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw InvalidDataset("one_vs_one_tasks: need at least two classes");
  }

  MultiTaskDataset data;
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const int c = class_labels[static_cast<std::size_t>(i)];
        if (c == classes[a] || c == classes[b]) keep.push_back(i);
      }
      if (keep.empty()) continue;  // cannot happen for classes drawn from data
      TaskData task;
      task.name =
          std::to_string(classes[a]) + "v" + std::to_string(classes[b]);
      task.features.resize(static_cast<Eigen::Index>(keep.size()),
                           features.cols());
      task.labels.resize(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        task.features.row(static_cast<Eigen::Index>(i)) =
            features.row(keep[i]);
        task.labels[static_cast<Eigen::Index>(i)] =
            class_labels[static_cast<std::size_t>(keep[i])] == classes[a]
                ? 1.0
                : -1.0;
      }
      data.tasks.push_back(std::move(task));
    }
  }
  return data;
}

SplitResult split(const MultiTaskDataset& data, double fraction,
                  std::uint64_t seed) {
  data.validate();
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidDataset("split fraction must lie in (0, 1)");
  }
  SplitResult res;
  res.train.tasks.resize(data.tasks.size());
  res.test.tasks.resize(data.tasks.size());

  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    const auto& task = data.tasks[t];
    std::vector<Eigen::Index> train_idx, test_idx;
    for (int cls = 0; cls < 2; ++cls) {
      const double want = cls == 0 ? 1.0 : -1.0;
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < task.labels.size(); ++i) {
        if (task.labels[i] == want) idx.push_back(i);
      }
      if (idx.empty()) continue;
      if (idx.size() == 1) {
        train_idx.push_back(idx[0]);
        ++res.warnings;
        continue;
      }
      CounterRng rng(seed, t, static_cast<std::uint64_t>(cls));
      deterministic_shuffle(idx, rng);
      const auto n = static_cast<double>(idx.size());
      auto take = static_cast<std::size_t>(std::llround(fraction * n));
      take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
      train_idx.insert(train_idx.end(), idx.begin(),
                       idx.begin() + static_cast<std::ptrdiff_t>(take));
      test_idx.insert(test_idx.end(),
                      idx.begin() + static_cast<std::ptrdiff_t>(take),
                      idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto gather = [&](const std::vector<Eigen::Index>& idx, TaskData* out) {
      out->name = task.name;
      out->features.resize(static_cast<Eigen::Index>(idx.size()),
                           task.features.cols());
      out->labels.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        out->features.row(static_cast<Eigen::Index>(i)) =
            task.features.row(idx[i]);
        out->labels[static_cast<Eigen::Index>(i)] = task.labels[idx[i]];
      }
    };
    gather(train_idx, &res.train.tasks[t]);
    gather(test_idx, &res.test.tasks[t]);
  }
  return res;
}

MultiTaskDataset synth_multitask(int num_tasks, int samples_per_task, int dim,
                                 double relatedness, double noise,
                                 std::uint64_t seed) {
  if (num_tasks < 1 || samples_per_task < 1 || dim < 1) {
    throw InvalidDataset("synth_multitask: T, N, d must be positive");
  }
  if (!(relatedness >= 0.0 && relatedness <= 1.0)) {
    throw InvalidDataset("synth_multitask: relatedness must lie in [0, 1]");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) {
    throw InvalidDataset("synth_multitask: noise must lie in [0, 1]");
  }

  auto unit_gaussian = [](CounterRng& rng, int d) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.next_gaussian();
    const double n = v.norm();
    return n > 0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(d, 0).eval();
  };

  CounterRng shared_rng(seed, 0, 0);
  const Eigen::VectorXd w_shared = unit_gaussian(shared_rng, dim);

  MultiTaskDataset data;
  data.tasks.resize(static_cast<std::size_t>(num_tasks));
  for (int t = 0; t < num_tasks; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t) + 1, 0);
    // Separate stream so the feature matrix is invariant to `noise`.
    CounterRng flips(seed, static_cast<std::uint64_t>(t) + 1, 1);
    const Eigen::VectorXd w_private = unit_gaussian(rng, dim);
    Eigen::VectorXd w =
        relatedness * w_shared + (1.0 - relatedness) * w_private;
    const double wn = w.norm();
    w = wn > 0 ? Eigen::VectorXd(w / wn) : w_shared;

    auto& task = data.tasks[static_cast<std::size_t>(t)];
    task.name = "task" + std::to_string(t);
    task.features.resize(samples_per_task, dim);
    task.labels.resize(samples_per_task);
    for (int i = 0; i < samples_per_task; ++i) {
      for (int j = 0; j < dim; ++j) {
        task.features(i, j) = rng.next_gaussian();
      }
      double y = task.features.row(i).dot(w) >= 0.0 ? 1.0 : -1.0;
      if (noise > 0.0 && flips.next_double() < noise) y = -y;
      task.labels[i] = y;
    }
  }
  return data;
}

MultiTaskDataset subsample_to_min(const MultiTaskDataset& data,
                                  std::uint64_t seed) {
  data.validate();
  Eigen::Index nmin = data.tasks.front().features.rows();
  for (const auto& t : data.tasks) nmin = std::min(nmin, t.features.rows());

  MultiTaskDataset out;
  out.tasks.resize(data.tasks.size());
  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    const auto& task = data.tasks[t];
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(task.features.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      idx[i] = static_cast<Eigen::Index>(i);
    }
    CounterRng rng(seed, t, 5);
    deterministic_shuffle(idx, rng);
    idx.resize(static_cast<std::size_t>(nmin));
    std::sort(idx.begin(), idx.end());

    auto& dst = out.tasks[t];
    dst.name = task.name;
    dst.features.resize(nmin, task.features.cols());
    dst.labels.resize(nmin);
    for (Eigen::Index i = 0; i < nmin; ++i) {
      dst.features.row(i) = task.features.row(idx[static_cast<std::size_t>(i)]);
      dst.labels[i] = task.labels[idx[static_cast<std::size_t>(i)]];
    }
  }
  return out;
}

}  // namespace mtsvm
