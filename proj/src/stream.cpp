#include "cil/stream.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

TaskStream TaskStream::split_stream(Dataset ds, std::size_t base_classes,
                                    std::size_t inc_classes,
                                    std::uint64_t seed) {
  ds.validate();
  const std::size_t C = ds.num_classes;
  if (base_classes < 1 || base_classes > C) {
    throw SplitError("split: base class count " + std::to_string(base_classes) +
                     " outside 1.." + std::to_string(C));
  }
  // class -> task assignment by seeded permutation
  std::vector<int> order(C);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5717));
  rng.shuffle(order.begin(), order.end());

  const std::size_t rest = C - base_classes;
  const std::size_t leftover =
      inc_classes == 0 ? rest : rest % inc_classes;
  if (leftover != 0) {
    std::ostringstream os;
    os << "split: " << leftover << " leftover classes {";
    for (std::size_t i = C - leftover; i < C; ++i) {
      if (i != C - leftover) os << ",";
      os << order[i];
    }
    os << "} with base " << base_classes << " and increment " << inc_classes;
    throw SplitError(os.str());
  }

  TaskStream s;
  std::size_t pos = 0;
  while (pos < C) {
    const std::size_t take = pos == 0 ? base_classes : inc_classes;
    Task t;
    t.labels.assign(order.begin() + pos, order.begin() + pos + take);
    std::sort(t.labels.begin(), t.labels.end());
    pos += take;
    s.tasks_.push_back(std::move(t));
  }
  for (Task& t : s.tasks_) {
    t.train_rows = ds.indices_of(t.labels, true);
    t.test_rows = ds.indices_of(t.labels, false);
  }
  s.ds_ = std::move(ds);
  return s;
}

const Task& TaskStream::task(std::size_t t) const {
  if (t >= tasks_.size()) {
    throw ProtocolError("stream: task " + std::to_string(t) +
                        " out of range, have " + std::to_string(tasks_.size()));
  }
  return tasks_[t];
}

std::size_t TaskStream::classes_through(std::size_t t) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i <= t && i < tasks_.size(); ++i)
    n += tasks_[i].labels.size();
  return n;
}

void TaskStream::begin_task(std::size_t t) {
  task(t);  // range check
  current_task_ = t;
}

Tensor TaskStream::read_train_features(std::size_t owner,
                                       const std::vector<std::size_t>& rows) {
  if (owner != current_task_) forbidden_reads_ += rows.size();
  return ds_.gather_features(rows);
}

Tensor TaskStream::test_features(const std::vector<std::size_t>& rows) const {
  return ds_.gather_features(rows);
}

}  // namespace cil
